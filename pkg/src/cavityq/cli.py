"""Command-line front end: JSON configs in, CSV/JSON artifacts out.

Every artifact file starts with a header recording the tool version, the
rng seed, and a sha256 of the input config, and is written atomically
(temp file in the target directory, then rename), so interrupted runs
never leave half-written outputs. With a fixed seed and --threads 1,
reruns are byte-identical.

Exit codes: 0 success, 1 usage errors, 2 parse errors, 3 numeric errors,
4 capacity errors.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, codes, device, gates, fock, noise, pulse, qst, trotter
from .errors import CapacityError, NumericError, ParseError, UsageError

_PROB_FLOOR = 1e-12


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _load_object(text: str, what: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid {what} JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{what} must be a JSON object")
    return doc


_REQUIRED = object()


def _field(doc: dict, name: str, types, what: str, default=_REQUIRED):
    if name not in doc:
        if default is not _REQUIRED:
            return default
        raise ParseError(f"{what}: missing field '{name}'")
    val = doc[name]
    if types is float:
        ok = isinstance(val, (int, float)) and not isinstance(val, bool)
    elif types is int:
        ok = isinstance(val, int) and not isinstance(val, bool)
    else:
        ok = isinstance(val, types)
    if not ok:
        raise ParseError(f"{what}: field '{name}' has the wrong type")
    return val


def _number_list(doc: dict, name: str, what: str, default=_REQUIRED):
    val = _field(doc, name, list, what, default)
    if not isinstance(val, list):
        return val  # the caller's non-list default (e.g. None)
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool)
               for v in val):
        raise ParseError(f"{what}: field '{name}' must be a list of numbers")
    return [float(v) for v in val]


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent),
                               prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, str(path))
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _format_cell(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _emit_artifact(args, name: str, columns: list[str],
                   rows, input_sha: str) -> str:
    """Write the rows as CSV or JSON with the provenance header; returns
    the artifact path."""
    meta = {
        "tool": "cavityq",
        "version": __version__,
        "seed": args.seed,
        "threads": args.threads,
        "input_sha256": input_sha,
    }
    out_dir = Path(args.out)
    if args.format == "json":
        path = out_dir / f"{name}.json"
        doc = dict(meta)
        doc["columns"] = columns
        doc["rows"] = [[_json_cell(v) for v in row] for row in rows]
        _write_atomic(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        path = out_dir / f"{name}.csv"
        lines = [
            f"# cavityq {__version__}",
            f"# seed: {args.seed}",
            f"# threads: {args.threads}",
            f"# input_sha256: {input_sha}",
            ",".join(columns),
        ]
        for row in rows:
            lines.append(",".join(_format_cell(v) for v in row))
        _write_atomic(path, "\n".join(lines) + "\n")
    return str(path)


def _json_cell(value):
    if isinstance(value, (int, np.integer)):
        return int(value)
    return float(value)


def _np_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _print_summary(doc: dict) -> None:
    sys.stdout.write(
        json.dumps(doc, indent=2, sort_keys=True, default=_np_default) + "\n"
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_device(args) -> int:
    text = _read_text(args.params_file)
    params = device.DeviceParams.from_json(text)
    summary = device.device_summary(params)
    _print_summary(summary)
    return 0


def _parse_state_spec(spec: str, shape: fock.HilbertShape) -> fock.StateVector:
    try:
        occupations = [int(tok) for tok in spec.split(",")]
    except ValueError as exc:
        raise UsageError(
            f"state spec must be comma-separated occupation numbers, "
            f"got {spec!r}"
        ) from exc
    return fock.basis_state(shape, occupations)


def cmd_run(args) -> int:
    text = _read_text(args.circuit_file)
    circuit = gates.circuit_from_json(text)
    spec = args.state if args.state else ",".join("0" for _ in circuit.shape.dims)
    psi0 = _parse_state_spec(spec, circuit.shape)
    final = gates.apply_circuit(circuit, psi0)
    probs = np.abs(final.amplitudes.reshape(-1)) ** 2
    rows = [
        (idx, float(p)) for idx, p in enumerate(probs) if p > _PROB_FLOOR
    ]
    path = _emit_artifact(args, "run_probabilities",
                          ["basis_index", "probability"], rows, _sha256(text))
    _print_summary({
        "gates": len(circuit.gates),
        "kept_rows": len(rows),
        "output": path,
        "total_probability": float(probs.sum()),
    })
    return 0


def _qst_config_and_sweep(text: str):
    doc = _load_object(text, "transfer config")
    if "transfer" in doc:
        unknown = set(doc) - {"transfer", "delta_sweep_hz"}
        if unknown:
            raise ParseError(f"transfer config: unknown fields {sorted(unknown)}")
        if not isinstance(doc["transfer"], dict):
            raise ParseError("transfer config: 'transfer' must be an object")
        config = qst.qst_config_from_json(json.dumps(doc["transfer"]))
        sweep = _number_list(doc, "delta_sweep_hz", "transfer config", None)
        return config, sweep
    return qst.qst_config_from_json(text), None


def cmd_qst(args) -> int:
    text = _read_text(args.config_file)
    config, sweep = _qst_config_and_sweep(text)
    columns = ["delta_omega_hz", "eta", "sqrt_one_minus_eta"]
    if sweep is None:
        res = qst.simulate_transfer(config)
        rows = [(config.delta_omega_hz, res.eta,
                 float(np.sqrt(max(0.0, 1.0 - res.eta))))]
        summary = {"eta": res.eta, "fidelity": res.fidelity}
    else:
        if args.threads > 1:
            with concurrent.futures.ThreadPoolExecutor(args.threads) as pool:
                result = qst.detuning_sweep(config, sweep, map_fn=pool.map)
        else:
            result = qst.detuning_sweep(config, sweep)
        rows = list(result.rows)
        summary = {
            "baseline_eta": result.baseline_eta,
            "slope": result.slope,
            "intercept": result.intercept,
            "r_squared": result.r_squared,
        }
    path = _emit_artifact(args, "qst_sweep", columns, rows, _sha256(text))
    summary["output"] = path
    _print_summary(summary)
    return 0


def _grape_model(doc: dict):
    spec = _field(doc, "model", dict, "grape config")
    kind = _field(spec, "kind", str, "grape model")
    if kind == "qubit":
        detuning = _field(spec, "detuning_hz", float, "grape model", 0.0)
        return pulse.qubit_model(float(detuning))
    if kind == "dispersive":
        chi_hz = _field(spec, "chi_hz", float, "grape model")
        n_levels = _field(spec, "n_levels", int, "grape model")
        drive = _field(spec, "cavity_drive", bool, "grape model", False)
        return pulse.dispersive_model(float(chi_hz), int(n_levels),
                                      cavity_drive=drive)
    raise ParseError(f"grape model: unknown kind {kind!r}")


def _grape_target(doc: dict, dim: int) -> fock.Operator:
    spec = _field(doc, "target", dict, "grape config")
    kind = _field(spec, "kind", str, "grape target")
    shape = fock.HilbertShape((dim,))
    if kind == "identity":
        return fock.Operator(shape, np.eye(dim, dtype=complex))
    if kind == "pauli_x":
        if dim != 2:
            raise ParseError("grape target: pauli_x needs a 2-level model")
        return fock.Operator(shape, np.array([[0, 1], [1, 0]], dtype=complex))
    if kind == "snap":
        theta = _number_list(spec, "theta", "grape target")
        if len(theta) != dim:
            raise ParseError(
                f"grape target: snap needs {dim} phases, got {len(theta)}"
            )
        return fock.Operator(shape, np.diag(np.exp(1j * np.array(theta))))
    if kind == "matrix":
        re = _field(spec, "re", list, "grape target")
        im = _field(spec, "im", list, "grape target")
        try:
            mat = np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)
        except (ValueError, TypeError) as exc:
            raise ParseError(f"grape target: bad matrix: {exc}") from exc
        if mat.shape != (dim, dim):
            raise ParseError(f"grape target: matrix must be {dim}x{dim}")
        return fock.Operator(shape, mat)
    raise ParseError(f"grape target: unknown kind {kind!r}")


def cmd_grape(args) -> int:
    text = _read_text(args.config_file)
    doc = _load_object(text, "grape config")
    model = _grape_model(doc)
    dim = model.shape.total_dim
    target = _grape_target(doc, dim)
    n_segments = _field(doc, "n_segments", int, "grape config")
    dt_s = _field(doc, "dt_s", float, "grape config")
    iterations = _field(doc, "iterations", int, "grape config", 500)
    learning_rate = _field(doc, "learning_rate", float, "grape config", 0.2)
    tol = _field(doc, "tol", float, "grape config", 1e-8)
    if n_segments < 1:
        raise UsageError(f"n_segments must be >= 1, got {n_segments}")
    schedule0 = pulse.PulseSchedule(
        dt_s=float(dt_s),
        streams=np.zeros((model.n_streams, int(n_segments)), dtype=complex),
        carriers_hz=tuple(0.0 for _ in range(model.n_streams)),
    )
    result = pulse.grape_optimize(
        model, target, schedule0,
        iterations=int(iterations),
        learning_rate=float(learning_rate),
        seed=args.seed,
        tol=float(tol),
    )
    rows = [(int(it), float(infid), float(step))
            for it, infid, step in result.trace]
    path = _emit_artifact(args, "grape_trace",
                          ["iteration", "infidelity", "step_size"],
                          rows, _sha256(text))
    _print_summary({
        "fidelity": result.fidelity,
        "infidelity": result.infidelity,
        "iterations": result.iterations,
        "converged": result.converged,
        "output": path,
    })
    return 0


def cmd_code(args) -> int:
    text = _read_text(args.config_file)
    doc = _load_object(text, "code config")
    alpha_pair = _number_list(doc, "alpha", "code config")
    if len(alpha_pair) != 2:
        raise ParseError("code config: 'alpha' must be [re, im]")
    sign = _field(doc, "parity", str, "code config", "+")
    n_levels = _field(doc, "n_levels", int, "code config")
    t1_s = _field(doc, "t1_s", float, "code config")
    dt_s = _field(doc, "dt_s", float, "code config")
    steps = _field(doc, "steps", int, "code config")
    n_traj = _field(doc, "n_trajectories", int, "code config", 1)
    psi = codes.cat_state(complex(alpha_pair[0], alpha_pair[1]), sign,
                          int(n_levels))
    channel = noise.photon_loss_channel(float(t1_s), float(dt_s), int(n_levels))
    results = noise.run_trajectories(channel, psi, int(steps), int(n_traj),
                                     base_seed=args.seed)
    rows = []
    for traj in results:
        for s in range(traj.steps):
            rows.append((
                traj.seed, s + 1, int(traj.jump_counts[s]),
                float(traj.parities[s]), float(traj.mean_occupations[s]),
            ))
    path = _emit_artifact(args, "code_trajectories",
                          ["seed", "step", "jump_count", "parity", "mean_n"],
                          rows, _sha256(text))
    _print_summary({
        "initial_parity": codes.parity(psi),
        "n_trajectories": len(results),
        "total_jumps": sum(len(t.jump_steps) for t in results),
        "output": path,
    })
    return 0


def _hamiltonian_from_doc(doc: dict, what: str) -> trotter.QuditHamiltonian:
    diag = _number_list(doc, "diagonal", what)
    kin = _number_list(doc, "kinetic_diagonal", what)
    return trotter.QuditHamiltonian(diag, kin)


def _initial_level_state(doc: dict, n: int, what: str):
    level = _field(doc, "initial_level", int, what, 0)
    if not 0 <= level < n:
        raise UsageError(f"initial_level {level} outside 0..{n - 1}")
    return fock.basis_state(fock.HilbertShape((n,)), [int(level)])


def cmd_trotter(args) -> int:
    text = _read_text(args.config_file)
    doc = _load_object(text, "trotter config")
    h = _hamiltonian_from_doc(doc, "trotter config")
    t_total = _field(doc, "t_total_s", float, "trotter config")
    steps_list = _field(doc, "steps_list", list, "trotter config")
    if not all(isinstance(s, int) and not isinstance(s, bool)
               for s in steps_list):
        raise ParseError("trotter config: 'steps_list' must be integers")
    psi0 = _initial_level_state(doc, h.n_levels, "trotter config")
    rows = trotter.trotter_convergence(h, float(t_total),
                                       [int(s) for s in steps_list], psi0)
    out_rows = [(int(s), float(dt), float(infid)) for s, dt, infid in rows]
    path = _emit_artifact(args, "trotter_convergence",
                          ["steps", "dt_s", "infidelity"],
                          out_rows, _sha256(text))
    _print_summary({
        "n_levels": h.n_levels,
        "best_infidelity": min(r[2] for r in out_rows),
        "output": path,
    })
    return 0


def _otoc_operator(spec, n: int, what: str) -> np.ndarray:
    if not isinstance(spec, dict):
        raise ParseError(f"{what} must be an object")
    kind = _field(spec, "kind", str, what)
    if kind == "snap":
        theta = _number_list(spec, "theta", what)
        if len(theta) != n:
            raise ParseError(f"{what}: snap needs {n} phases")
        return np.diag(np.exp(1j * np.array(theta)))
    if kind == "fourier":
        return gates.fourier(n).matrix
    if kind == "matrix":
        re = _field(spec, "re", list, what)
        im = _field(spec, "im", list, what)
        try:
            mat = np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)
        except (ValueError, TypeError) as exc:
            raise ParseError(f"{what}: bad matrix: {exc}") from exc
        if mat.shape != (n, n):
            raise ParseError(f"{what}: matrix must be {n}x{n}")
        return mat
    raise ParseError(f"{what}: unknown kind {kind!r}")


def cmd_otoc(args) -> int:
    text = _read_text(args.config_file)
    doc = _load_object(text, "otoc config")
    h = _hamiltonian_from_doc(doc, "otoc config")
    times = _number_list(doc, "times_s", "otoc config")
    w = _otoc_operator(_field(doc, "w", dict, "otoc config"), h.n_levels,
                       "otoc config w")
    v = _otoc_operator(_field(doc, "v", dict, "otoc config"), h.n_levels,
                       "otoc config v")
    psi0 = _initial_level_state(doc, h.n_levels, "otoc config")
    rows = trotter.otoc_series(w, v, h, times, psi0)
    out_rows = [(float(t), float(re), float(im), float(mag))
                for t, re, im, mag in rows]
    path = _emit_artifact(args, "otoc_series",
                          ["t_s", "re_otoc", "im_otoc", "abs_otoc"],
                          out_rows, _sha256(text))
    _print_summary({
        "n_levels": h.n_levels,
        "min_abs_otoc": min(r[3] for r in out_rows),
        "output": path,
    })
    return 0


# ---------------------------------------------------------------------------
# parser and dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavityq",
        description="Cavity-qudit simulation experiments.",
    )
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=0,
                        help="rng seed recorded in every artifact")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for independent sweep points")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="artifact format")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("device", help="derived device quantities as JSON")
    p.add_argument("params_file")
    p.set_defaults(fn=cmd_device)

    p = sub.add_parser("run", help="run a circuit, emit basis probabilities")
    p.add_argument("circuit_file")
    p.add_argument("--state", default="",
                   help="comma-separated initial occupations (default all 0)")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("qst", help="state-transfer run or detuning sweep")
    p.add_argument("config_file")
    p.set_defaults(fn=cmd_qst)

    p = sub.add_parser("grape", help="piecewise-constant pulse optimization")
    p.add_argument("config_file")
    p.set_defaults(fn=cmd_grape)

    p = sub.add_parser("code", help="cat-state photon-loss trajectories")
    p.add_argument("config_file")
    p.set_defaults(fn=cmd_code)

    p = sub.add_parser("trotter", help="splitting-error convergence sweep")
    p.add_argument("config_file")
    p.set_defaults(fn=cmd_trotter)

    p = sub.add_parser("otoc", help="out-of-time-order correlator series")
    p.add_argument("config_file")
    p.set_defaults(fn=cmd_otoc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed < 0:
        parser.error("--seed must be nonnegative")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.fn(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
