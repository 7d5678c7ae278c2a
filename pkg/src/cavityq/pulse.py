"""Time-domain control of the dispersive qubit-cavity system.

Piecewise-constant complex drive schedules, forward simulation by exact
per-segment propagators, analytic-gradient pulse optimization for unitary
and state targets, number-selective SNAP pulse synthesis, and a
SNAP/displacement sequence optimizer for state preparation.

Unit conventions: drift Hamiltonians are in angular units (rad/s), control
operators are dimensionless quadratures, schedule amplitudes are in Hz, and
time steps are in seconds. A segment contributes
exp(-i*(H_drift + sum_k 2*pi*u_k*C_k)*dt).

Each complex amplitude stream pairs with two control operators: the stream's
real part drives controls[2s], the imaginary part controls[2s+1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .device import DeviceParams, chi as dispersive_shift
from .errors import (
    BandwidthError,
    NumericError,
    ParseError,
    ShapeError,
    UsageError,
)
from .fock import (
    HilbertShape,
    Operator,
    StateVector,
    annihilation,
    basis_state,
    number_operator,
    shape_of,
)

_SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])

# segments per 1/chi of pulse time; validated against step-halving refinement
_SNAP_SEGMENT_DENSITY = 900.0
_SNAP_MIN_SEGMENTS = 1500
# Gaussian envelope width as a fraction of each half-pulse
_SNAP_SIGMA_DIVISOR = 6.0


def _finite_complex_array(values, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128, copy=True, order="C")
    if arr.ndim != 1:
        raise ShapeError(f"{what} must be a 1-D array, got shape {arr.shape}")
    if not (np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))):
        raise NumericError(f"non-finite amplitudes in {what}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PulseSchedule:
    """Piecewise-constant drive: one complex amplitude stream per drive line.

    `dt_s` is the segment length in seconds, `streams` holds per-line
    amplitude arrays in Hz (all equal length), `carriers_hz` records the
    carrier frequency metadata for each line.
    """

    dt_s: float
    streams: tuple[np.ndarray, ...]
    carriers_hz: tuple[float, ...]

    def __post_init__(self) -> None:
        dt = float(self.dt_s)
        if not math.isfinite(dt) or dt <= 0:
            raise UsageError(f"dt_s must be positive and finite, got {self.dt_s}")
        object.__setattr__(self, "dt_s", dt)
        streams = tuple(
            _finite_complex_array(s, f"stream {i}")
            for i, s in enumerate(self.streams)
        )
        if not streams:
            raise UsageError("schedule needs at least one amplitude stream")
        n = len(streams[0])
        if n == 0:
            raise UsageError("streams must contain at least one segment")
        if any(len(s) != n for s in streams):
            raise ShapeError("all amplitude streams must have equal length")
        object.__setattr__(self, "streams", streams)
        carriers = tuple(float(c) for c in self.carriers_hz)
        if len(carriers) != len(streams):
            raise ShapeError(
                f"{len(carriers)} carriers for {len(streams)} streams"
            )
        if any(not math.isfinite(c) for c in carriers):
            raise NumericError("non-finite carrier frequency")
        object.__setattr__(self, "carriers_hz", carriers)

    @property
    def n_streams(self) -> int:
        return len(self.streams)

    @property
    def n_segments(self) -> int:
        return len(self.streams[0])

    @property
    def duration_s(self) -> float:
        return self.dt_s * self.n_segments

    def to_json(self) -> str:
        doc = {
            "dt_s": self.dt_s,
            "controls": [
                {
                    "carrier_hz": self.carriers_hz[i],
                    "amps": [[float(a.real), float(a.imag)] for a in s],
                }
                for i, s in enumerate(self.streams)
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "PulseSchedule":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid schedule JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ParseError("schedule JSON must be an object")
        unknown = set(doc) - {"dt_s", "controls"}
        if unknown:
            raise ParseError(f"unknown schedule fields: {sorted(unknown)}")
        if "dt_s" not in doc or "controls" not in doc:
            raise ParseError("schedule JSON needs 'dt_s' and 'controls'")
        if not isinstance(doc["controls"], list) or not doc["controls"]:
            raise ParseError("'controls' must be a non-empty list")
        streams = []
        carriers = []
        for i, entry in enumerate(doc["controls"]):
            if not isinstance(entry, dict) or set(entry) != {"carrier_hz", "amps"}:
                raise ParseError(
                    f"control {i} must have exactly 'carrier_hz' and 'amps'"
                )
            amps = entry["amps"]
            if not isinstance(amps, list):
                raise ParseError(f"control {i}: 'amps' must be a list")
            vals = []
            for j, pair in enumerate(amps):
                if (not isinstance(pair, list) or len(pair) != 2
                        or not all(isinstance(x, (int, float)) for x in pair)):
                    raise ParseError(
                        f"control {i} amp {j} must be a [re, im] number pair"
                    )
                vals.append(complex(pair[0], pair[1]))
            streams.append(np.array(vals, dtype=complex))
            if not isinstance(entry["carrier_hz"], (int, float)):
                raise ParseError(f"control {i}: 'carrier_hz' must be a number")
            carriers.append(float(entry["carrier_hz"]))
        try:
            return PulseSchedule(float(doc["dt_s"]), tuple(streams), tuple(carriers))
        except (UsageError, NumericError) as exc:
            raise ParseError(f"invalid schedule: {exc}") from exc


@dataclass(frozen=True, eq=False)
class ControlModel:
    """Drift Hamiltonian (rad/s) plus dimensionless control quadratures.

    Controls come in (real, imaginary) quadrature pairs, two per drive
    stream, so len(controls) must be even.
    """

    shape: HilbertShape
    drift: Operator
    controls: tuple[Operator, ...]

    def __post_init__(self) -> None:
        shape = shape_of(self.shape)
        object.__setattr__(self, "shape", shape)
        if self.drift.shape != shape:
            raise ShapeError("drift shape does not match model shape")
        if not self.drift.is_hermitian(1e-12 * max(
                1.0, float(np.max(np.abs(self.drift.matrix))))):
            raise UsageError("drift Hamiltonian must be Hermitian")
        controls = tuple(self.controls)
        if not controls or len(controls) % 2:
            raise UsageError(
                "controls must come in quadrature pairs (two per drive stream)"
            )
        for i, op in enumerate(controls):
            if op.shape != shape:
                raise ShapeError(f"control {i} shape does not match model shape")
            if not op.is_hermitian(1e-12):
                raise UsageError(f"control {i} must be Hermitian")
        object.__setattr__(self, "controls", controls)

    @property
    def n_streams(self) -> int:
        return len(self.controls) // 2


def qubit_model(detuning_hz: float = 0.0) -> ControlModel:
    """Two-level rotating-frame model: drift 2*pi*detuning*|e><e|,
    quadrature controls (sigma_x, sigma_y)."""
    drift = np.zeros((2, 2), dtype=complex)
    drift[1, 1] = 2 * np.pi * detuning_hz
    shape = shape_of(2)
    return ControlModel(
        shape,
        Operator(shape, drift),
        (Operator(shape, _SIGMA_X), Operator(shape, _SIGMA_Y)),
    )


def dispersive_model(chi_hz: float, n_levels: int,
                     cavity_drive: bool = False) -> ControlModel:
    """Dispersive qubit-cavity model, qubit first: drift
    -2*pi*chi |e><e| (x) n_hat, qubit drive quadratures, and optionally
    cavity drive quadratures."""
    if n_levels < 2:
        raise UsageError(f"need at least 2 cavity levels, got {n_levels}")
    if not math.isfinite(chi_hz) or chi_hz <= 0:
        raise UsageError(f"chi must be positive and finite, got {chi_hz}")
    shape = shape_of((2, n_levels))
    nhat = number_operator(n_levels).matrix
    e_proj = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    drift = -2 * np.pi * chi_hz * np.kron(e_proj, nhat)
    eye_n = np.eye(n_levels)
    controls = [
        Operator(shape, np.kron(_SIGMA_X, eye_n)),
        Operator(shape, np.kron(_SIGMA_Y, eye_n)),
    ]
    if cavity_drive:
        a = annihilation(n_levels).matrix
        controls.append(Operator(shape, np.kron(np.eye(2), a + a.conj().T)))
        controls.append(Operator(shape, np.kron(np.eye(2), 1j * (a.conj().T - a))))
    return ControlModel(shape, Operator(shape, drift), tuple(controls))


def dispersive_model_from_device(params: DeviceParams, n_levels: int,
                                 cavity_drive: bool = False) -> ControlModel:
    """Dispersive model with chi taken from the device parameters."""
    return dispersive_model(dispersive_shift(params), n_levels, cavity_drive)


def _segment_hamiltonian(model: ControlModel, amps: np.ndarray) -> np.ndarray:
    """H for one segment; amps is the per-stream complex amplitude column."""
    h = np.array(model.drift.matrix, copy=True)
    for s in range(model.n_streams):
        u = amps[s]
        h += 2 * np.pi * u.real * model.controls[2 * s].matrix
        h += 2 * np.pi * u.imag * model.controls[2 * s + 1].matrix
    return h


def _expm_unitary(h: np.ndarray, dt: float):
    """exp(-i h dt) via the eigenbasis; returns (U, eigvals, eigvecs)."""
    lam, vecs = np.linalg.eigh(h)
    u = (vecs * np.exp(-1j * lam * dt)) @ vecs.conj().T
    return u, lam, vecs


def _phi_matrix(exponents: np.ndarray) -> np.ndarray:
    """Divided differences of exp at the exponent eigenvalues: the Hadamard
    kernel of the Frechet derivative of expm in the eigenbasis."""
    m = exponents
    em = np.exp(m)
    dm = m[:, None] - m[None, :]
    small = np.abs(dm) < 1e-12
    num = em[:, None] - em[None, :]
    return np.where(small, (em[:, None] + em[None, :]) / 2,
                    num / np.where(small, 1.0, dm))


def _check_schedule_pairing(model: ControlModel, schedule: PulseSchedule) -> None:
    if schedule.n_streams != model.n_streams:
        raise UsageError(
            f"schedule has {schedule.n_streams} streams but the model's "
            f"{len(model.controls)} controls pair into {model.n_streams}"
        )


def simulate_schedule(model: ControlModel, schedule: PulseSchedule,
                      psi0: StateVector | None = None,
                      return_propagator: bool = False):
    """Evolve under the schedule: ordered product of per-segment propagators.

    Returns the final StateVector, the full propagator as an Operator when
    `return_propagator` is set and psi0 is None, or a (state, propagator)
    tuple when both are requested.
    """
    _check_schedule_pairing(model, schedule)
    if psi0 is None and not return_propagator:
        raise UsageError("need psi0, return_propagator=True, or both")
    if psi0 is not None and psi0.shape != model.shape:
        raise ShapeError("psi0 shape does not match model shape")
    amps = np.stack(schedule.streams)  # (S, M)
    dt = schedule.dt_s
    d = model.shape.total_dim
    prop = np.eye(d, dtype=complex) if return_propagator else None
    psi = None if psi0 is None else np.array(psi0.amplitudes, copy=True)
    for j in range(schedule.n_segments):
        h = _segment_hamiltonian(model, amps[:, j])
        lam, vecs = np.linalg.eigh(h)
        phases = np.exp(-1j * lam * dt)
        if psi is not None:
            psi = vecs @ (phases * (vecs.conj().T @ psi))
        if prop is not None:
            prop = vecs @ ((phases[:, None]) * (vecs.conj().T @ prop))
    out_state = None
    if psi is not None:
        out_state = StateVector(model.shape, psi, psi0.leakage)
    if prop is not None:
        op = Operator(model.shape, prop)
        return (out_state, op) if out_state is not None else op
    return out_state


def gate_fidelity(u: Operator, v: Operator) -> float:
    """|Tr(u^dag v)|^2 / d^2: phase-insensitive unitary overlap."""
    if u.shape != v.shape:
        raise ShapeError(f"shapes differ: {u.shape.dims} vs {v.shape.dims}")
    d = u.dim
    return float(abs(np.trace(u.matrix.conj().T @ v.matrix)) ** 2 / d**2)


def snap_average_fidelity(u: Operator, theta: Sequence[float]) -> float:
    """State-averaged fidelity of the qubit-ground block of `u` against the
    diagonal phase gate diag(e^{i theta_n}).

    Uses F_avg = (|Tr M|^2 + Tr(M^dag M)) / (d(d+1)) with
    M = S^dag U_gg, exact for a single-block (trace-decreasing) map.
    """
    dims = u.shape.dims
    if len(dims) != 2 or dims[0] != 2:
        raise ShapeError(f"expected a (2, N) qubit-cavity shape, got {dims}")
    n = dims[1]
    th = np.asarray(theta, dtype=float)
    if th.shape != (n,):
        raise ShapeError(f"theta must have length {n}, got {th.shape}")
    ugg = u.matrix[:n, :n]
    m = np.exp(-1j * th)[:, None] * ugg
    return float(
        (abs(np.trace(m)) ** 2 + np.trace(m.conj().T @ m).real) / (n * (n + 1))
    )


# ---------------------------------------------------------------------------
# shared line-search gradient ascent


def _ascend(x0: np.ndarray,
            value_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
            max_iter: int, tol: float, learning_rate: float,
            grow: float = 1.3, shrink: float = 0.5,
            max_backtracks: int = 60):
    """Maximize J(x) by steepest ascent with a backtracking line search.

    Accepts a step only if J strictly improves, so 1-J is nonincreasing.
    Returns (x, J, iterations, converged, trace); trace rows are
    (iteration, 1-J, step_size).
    """
    x = np.array(x0, dtype=float, copy=True)
    j, g = value_and_grad(x)
    trace = [(0, 1.0 - j, 0.0)]
    lr = float(learning_rate)
    iters = 0
    converged = 1.0 - j <= tol
    while not converged and iters < max_iter:
        accepted = False
        for _ in range(max_backtracks):
            x_try = x + lr * g
            j_try, g_try = value_and_grad(x_try)
            if j_try > j:
                x, j, g = x_try, j_try, g_try
                accepted = True
                break
            lr *= shrink
            if lr < 1e-18:
                break
        if not accepted:
            break  # stagnated: return best-so-far
        iters += 1
        trace.append((iters, 1.0 - j, lr))
        lr *= grow
        converged = 1.0 - j <= tol
    return x, j, iters, bool(converged), tuple(trace)


# ---------------------------------------------------------------------------
# GRAPE


@dataclass(frozen=True, eq=False)
class GrapeResult:
    """Optimized schedule plus the objective history.

    `fidelity` is the raw target fidelity of `schedule` (re-simulation
    reproduces it); trace rows (iteration, infidelity, step_size) report the
    optimized objective, which subtracts the guard-leakage penalty when one
    is active.
    """

    schedule: PulseSchedule
    fidelity: float
    infidelity: float
    iterations: int
    converged: bool
    trace: tuple[tuple[int, float, float], ...]

    def trace_csv(self) -> str:
        lines = ["iteration,infidelity,step_size"]
        for it, infid, step in self.trace:
            lines.append(f"{it},{infid:.12e},{step:.6e}")
        return "\n".join(lines) + "\n"


def _grape_pass(model: ControlModel, amps: np.ndarray, dt: float,
                target, psi0_vec, guard_indices, leak_weight,
                want_grad: bool):
    """One forward (+ adjoint) pass. amps: (S, M) complex in Hz.

    Returns (j_total, j_raw, grad) with grad (S, M) complex combining
    dJ/dRe + i dJ/dIm in 1/Hz, or None when not requested.
    """
    n_streams, n_seg = amps.shape
    d = model.shape.total_dim
    unitary_target = isinstance(target, Operator)
    props = []
    for jseg in range(n_seg):
        h = _segment_hamiltonian(model, amps[:, jseg])
        u, lam, vecs = _expm_unitary(h, dt)
        props.append((u, lam, vecs))

    if unitary_target:
        fwd = [np.eye(d, dtype=complex)]
        for u, _, _ in props:
            fwd.append(u @ fwd[-1])
        c = np.trace(target.matrix.conj().T @ fwd[-1]) / d
        j_raw = abs(c) ** 2
        j_total = j_raw
    else:
        fwd = [np.array(psi0_vec, copy=True)]
        for u, _, _ in props:
            fwd.append(u @ fwd[-1])
        psi_f = fwd[-1]
        c = np.vdot(target, psi_f)
        j_raw = abs(c) ** 2
        leak = 0.0
        if guard_indices:
            leak = float(np.sum(np.abs(psi_f[list(guard_indices)]) ** 2))
        j_total = j_raw - leak_weight * leak

    if not want_grad:
        return j_total, j_raw, None

    grad = np.zeros((n_streams, n_seg), dtype=complex)
    dirs = [(-1j * dt * 2 * np.pi) * op.matrix for op in model.controls]
    if unitary_target:
        back = [np.eye(d, dtype=complex)]
        for u, _, _ in reversed(props):
            back.append(back[-1] @ u)
        back = back[::-1]  # back[j] = U_{M-1} ... U_j;  back[M] = I
        vh = target.matrix.conj().T
        for jseg in range(n_seg):
            _, lam, vecs = props[jseg]
            phi = _phi_matrix(-1j * lam * dt)
            pre = vh @ back[jseg + 1]
            for k, e_dir in enumerate(dirs):
                inner = vecs.conj().T @ e_dir @ vecs
                du = vecs @ (inner * phi) @ vecs.conj().T
                dc = np.trace(pre @ du @ fwd[jseg]) / d
                val = 2 * (np.conj(c) * dc).real
                s, quad = divmod(k, 2)
                grad[s, jseg] += val if quad == 0 else 1j * val
    else:
        # adjoint seed covers both the overlap term and the leakage penalty
        seed = c * np.asarray(target)
        if guard_indices:
            seed = seed.copy()
            for gidx in guard_indices:
                seed[gidx] -= leak_weight * psi_f[gidx]
        chi_vec = seed
        for jseg in range(n_seg - 1, -1, -1):
            u, lam, vecs = props[jseg]
            phi = _phi_matrix(-1j * lam * dt)
            for k, e_dir in enumerate(dirs):
                inner = vecs.conj().T @ e_dir @ vecs
                du = vecs @ (inner * phi) @ vecs.conj().T
                dc = np.vdot(chi_vec, du @ fwd[jseg])
                val = 2 * dc.real
                s, quad = divmod(k, 2)
                grad[s, jseg] += val if quad == 0 else 1j * val
            chi_vec = u.conj().T @ chi_vec
    return j_total, j_raw, grad


def _resolve_state_target(model: ControlModel, target: StateVector,
                          psi0: StateVector | None):
    if target.shape != model.shape:
        raise ShapeError("target shape does not match model shape")
    if psi0 is None:
        psi0 = basis_state(model.shape, [0] * len(model.shape.dims))
    elif psi0.shape != model.shape:
        raise ShapeError("psi0 shape does not match model shape")
    return np.asarray(target.amplitudes), np.asarray(psi0.amplitudes)


def grape_gradient(model: ControlModel, schedule: PulseSchedule, target,
                   psi0: StateVector | None = None,
                   guard_indices: Sequence[int] = (),
                   leak_weight: float = 1.0):
    """Objective and its exact gradient for the schedule's amplitudes.

    Returns (objective, grads) where grads is one complex array per stream,
    entry s,j = dJ/dRe(u) + i dJ/dIm(u) in 1/Hz. The objective is
    |Tr(target^dag U)/d|^2 for an Operator target, |<target|psi>|^2 minus
    the guard-leakage penalty for a StateVector target.
    """
    _check_schedule_pairing(model, schedule)
    if isinstance(target, Operator):
        if target.shape != model.shape:
            raise ShapeError("target shape does not match model shape")
        tgt, psi0_vec = target, None
    elif isinstance(target, StateVector):
        tvec, psi0_vec = _resolve_state_target(model, target, psi0)
        tgt = tvec
    else:
        raise UsageError("target must be an Operator or a StateVector")
    amps = np.stack(schedule.streams)
    j_total, _, grad = _grape_pass(
        model, amps, schedule.dt_s, tgt, psi0_vec,
        tuple(int(i) for i in guard_indices), float(leak_weight), True,
    )
    return j_total, tuple(grad[s] for s in range(grad.shape[0]))


def grape_optimize(model: ControlModel, target, schedule0: PulseSchedule,
                   iterations: int = 500, learning_rate: float = 0.2,
                   seed: int | None = None, *,
                   psi0: StateVector | None = None, tol: float = 1e-8,
                   guard_indices: Sequence[int] = (),
                   leak_weight: float = 1.0) -> GrapeResult:
    """Gradient-ascent pulse optimization from `schedule0`.

    The target is an Operator (fidelity |Tr(target^dag U)/d|^2) or a
    StateVector (fidelity |<target|psi(T)>|^2 from `psi0`, default ground,
    with leakage on `guard_indices` penalized at `leak_weight`). Line-search
    steps are accepted only on improvement, so the trace's objective
    infidelity is nonincreasing. When `seed` is given and every initial
    amplitude is zero, amplitudes start from a small seeded random draw
    (scale 1/(8 * duration)) to break symmetry. Deterministic throughout.
    """
    _check_schedule_pairing(model, schedule0)
    if isinstance(target, Operator):
        if target.shape != model.shape:
            raise ShapeError("target shape does not match model shape")
        tgt, psi0_vec = target, None
    elif isinstance(target, StateVector):
        tvec, psi0_vec = _resolve_state_target(model, target, psi0)
        tgt = tvec
    else:
        raise UsageError("target must be an Operator or a StateVector")
    guard = tuple(int(i) for i in guard_indices)
    if guard and isinstance(tgt, Operator):
        raise UsageError("guard-leakage penalty applies to state targets only")
    for g in guard:
        if not 0 <= g < model.shape.total_dim:
            raise UsageError(f"guard index {g} out of range")
    dt = schedule0.dt_s
    amps0 = np.stack(schedule0.streams)
    n_streams, n_seg = amps0.shape

    # work in dimensionless per-segment drive areas w = 2*pi*u*dt
    area = 2 * np.pi * dt
    w0 = amps0 * area
    j0, _, _ = _grape_pass(model, amps0, dt, tgt, psi0_vec, guard,
                           float(leak_weight), False)
    if 1.0 - j0 > tol and seed is not None and not np.any(amps0):
        rng = np.random.default_rng(seed)
        scale = area / (8.0 * schedule0.duration_s)
        w0 = scale * (rng.standard_normal(w0.shape)
                      + 1j * rng.standard_normal(w0.shape))

    def pack(w: np.ndarray) -> np.ndarray:
        return np.concatenate([w.real.ravel(), w.imag.ravel()])

    def unpack(x: np.ndarray) -> np.ndarray:
        half = n_streams * n_seg
        return (x[:half] + 1j * x[half:]).reshape(n_streams, n_seg)

    def value_and_grad(x: np.ndarray):
        w = unpack(x)
        jt, _, grad = _grape_pass(model, w / area, dt, tgt, psi0_vec, guard,
                                  float(leak_weight), True)
        gw = grad / area  # chain rule u = w / area
        return jt, np.concatenate([gw.real.ravel(), gw.imag.ravel()])

    x_best, j_best, iters, converged, trace = _ascend(
        pack(w0), value_and_grad, int(iterations), float(tol),
        float(learning_rate),
    )
    w_best = unpack(x_best)
    amps_best = w_best / area
    schedule = PulseSchedule(
        dt, tuple(amps_best[s] for s in range(n_streams)),
        schedule0.carriers_hz,
    )
    _, j_raw, _ = _grape_pass(model, amps_best, dt, tgt, psi0_vec, guard,
                              float(leak_weight), False)
    return GrapeResult(
        schedule=schedule,
        fidelity=float(j_raw),
        infidelity=float(1.0 - j_raw),
        iterations=iters,
        converged=converged,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# SNAP synthesis


def _dispersive_chi_from_model(model: ControlModel) -> tuple[float, int]:
    """Infer (chi_hz, n_levels) from a dispersive-pattern drift; validates
    the qubit-first layout and the qubit quadrature controls."""
    dims = model.shape.dims
    if len(dims) != 2 or dims[0] != 2:
        raise ShapeError(f"expected a (2, N) qubit-cavity model, got {dims}")
    n = dims[1]
    if n < 2:
        raise UsageError("need at least two cavity levels")
    h = model.drift.matrix
    off = h - np.diag(np.diag(h))
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.max(np.abs(off)) > 1e-9 * scale:
        raise UsageError("drift is not diagonal in the dispersive basis")
    diag = np.diag(h).real
    if np.max(np.abs(diag[:n])) > 1e-9 * scale:
        raise UsageError("qubit-ground sector of the drift must be zero")
    chi_ang = -diag[n + 1] if n > 1 else 0.0
    expected = -chi_ang * np.arange(n)
    if np.max(np.abs(diag[n:] - expected)) > 1e-9 * max(scale, abs(chi_ang)):
        raise UsageError("drift does not follow the -2*pi*chi*n excited-sector ladder")
    if chi_ang <= 0:
        raise UsageError("dispersive shift must be positive")
    eye_n = np.eye(n)
    if (np.max(np.abs(model.controls[0].matrix - np.kron(_SIGMA_X, eye_n))) > 1e-12
            or np.max(np.abs(model.controls[1].matrix - np.kron(_SIGMA_Y, eye_n)))
            > 1e-12):
        raise UsageError(
            "controls[0:2] must be the qubit sigma_x, sigma_y quadratures"
        )
    return chi_ang / (2 * np.pi), n


def _snap_drive_samples(chi_hz: float, n: int, phases1: np.ndarray,
                        phases2: np.ndarray, duration_s: float,
                        n_segments: int) -> np.ndarray:
    """Midpoint-sampled complex drive (Hz) for two simultaneous
    number-selective pi-pulse blocks with per-sector AC-Stark chirps."""
    dt = duration_s / n_segments
    t_half = duration_s / 2
    sigma = t_half / _SNAP_SIGMA_DIVISOR
    tm = (np.arange(n_segments) + 0.5) * dt
    env = np.zeros(n_segments)
    for half in (0, 1):
        t0, t1 = half * t_half, (half + 1) * t_half
        mask = (tm >= t0) & (tm < t1)
        e = np.exp(-((tm[mask] - (t0 + t1) / 2) ** 2) / (2 * sigma**2))
        e *= 0.25 / (e.sum() * dt)  # discrete pulse area -> exact pi rotation
        env[mask] = e
    half_idx = (tm >= t_half).astype(int)
    phase_tab = np.stack([phases1, phases2])  # (2, n)
    omega_sq = (4 * np.pi * env) ** 2
    u = np.zeros(n_segments, dtype=complex)
    for level in range(n):
        shift = np.zeros(n_segments)
        for m in range(n):
            if m != level:
                shift += omega_sq / (2 * 2 * np.pi * chi_hz * (level - m))
        chirp = np.cumsum(shift) * dt  # tracks the AC-Stark-shifted sector
        phases = phase_tab[half_idx, level]
        u += env * np.exp(1j * (phases + 2 * np.pi * chi_hz * level * tm + chirp))
    return u


def synthesize_snap_pulse(model: ControlModel, theta: Sequence[float],
                          duration_s: float, *, dt_s: float | None = None,
                          precompensate: bool = True,
                          enforce_bound: bool = True) -> PulseSchedule:
    """Qubit drive schedule implementing snap(theta) on the cavity.

    Two simultaneous number-selective pi-pulse blocks (Gaussian envelopes,
    one tone per occupied level at detuning -n*chi plus an AC-Stark chirp):
    the first at phase 0, the second at pi - theta_n, leaving the geometric
    phase theta_n on each |g, n> while returning the qubit to ground. A
    single deterministic pre-compensation pass absorbs the residual
    diagonal phases into the second block.

    Durations below 2*pi/chi lack the spectral selectivity to separate
    sectors; by default these raise a bandwidth error. `enforce_bound=False`
    permits them, for degradation studies only.
    """
    chi_hz, n = _dispersive_chi_from_model(model)
    th = np.asarray(theta, dtype=float)
    if th.shape != (n,):
        raise ShapeError(f"theta must have length {n}, got shape {th.shape}")
    if not np.all(np.isfinite(th)):
        raise NumericError("non-finite phases in theta")
    duration_s = float(duration_s)
    if not math.isfinite(duration_s) or duration_s <= 0:
        raise UsageError("duration must be positive and finite")
    bound = 2 * np.pi / chi_hz
    if enforce_bound and duration_s < bound * (1 - 1e-12):
        raise BandwidthError(
            f"duration {duration_s:.3e} s is below the selective-drive bound "
            f"2*pi/chi = {bound:.3e} s"
        )
    if dt_s is None:
        n_segments = max(_SNAP_MIN_SEGMENTS,
                         int(round(duration_s * chi_hz * _SNAP_SEGMENT_DENSITY)))
    else:
        if dt_s <= 0 or not math.isfinite(dt_s):
            raise UsageError(f"dt_s must be positive and finite, got {dt_s}")
        n_segments = max(2, int(round(duration_s / dt_s)))

    phases1 = np.zeros(n)
    phases2 = np.pi - th

    def build(p2: np.ndarray) -> PulseSchedule:
        u = _snap_drive_samples(chi_hz, n, phases1, p2, duration_s, n_segments)
        streams = [u] + [np.zeros(n_segments, dtype=complex)
                         for _ in range(model.n_streams - 1)]
        return PulseSchedule(duration_s / n_segments, tuple(streams),
                             tuple(0.0 for _ in range(model.n_streams)))

    schedule = build(phases2)
    if precompensate:
        u_op = simulate_schedule(model, schedule, return_propagator=True)
        measured = np.angle(np.diag(u_op.matrix[:n, :n]) * np.exp(-1j * th))
        schedule = build(phases2 + measured)
    return schedule


# ---------------------------------------------------------------------------
# SNAP/displacement sequence state preparation


@dataclass(frozen=True, eq=False)
class SequencePrepResult:
    """Optimized displacement/SNAP alternation for state preparation.

    The sequence is D(alphas[B]) S(thetas[B-1]) ... S(thetas[0]) D(alphas[0])
    applied to vacuum on `n_levels` Fock levels (the target padded with
    `guard_levels` empty levels on top). `fidelity` is the raw target overlap
    |<t|psi>|^2; trace rows report the penalized objective's infidelity.
    """

    alphas: tuple[complex, ...]
    thetas: np.ndarray
    n_levels: int
    guard_levels: int
    fidelity: float
    infidelity: float
    iterations: int
    converged: bool
    trace: tuple[tuple[int, float, float], ...]

    def __post_init__(self) -> None:
        arr = np.array(self.thetas, dtype=float, copy=True, order="C")
        arr.setflags(write=False)
        object.__setattr__(self, "thetas", arr)
        object.__setattr__(self, "alphas",
                           tuple(complex(a) for a in self.alphas))


def _displacement_generator_eig(alpha: complex, a: np.ndarray,
                                adag: np.ndarray):
    g_herm = 1j * (alpha * adag - np.conj(alpha) * a)
    lam, vecs = np.linalg.eigh(g_herm)
    return lam, vecs


def _sequence_pass(alphas: np.ndarray, thetas: np.ndarray, target: np.ndarray,
                   a: np.ndarray, adag: np.ndarray, guard: tuple[int, ...],
                   leak_weight: float, want_grad: bool):
    """Forward (+ adjoint) pass over the displacement/SNAP alternation."""
    blocks = thetas.shape[0]
    n = len(target)
    dir_x = adag - a
    dir_y = 1j * (adag + a)
    psi = np.zeros(n, dtype=complex)
    psi[0] = 1.0
    gates = []          # ("D", lam, vecs) | ("S", diag)
    states = [psi]
    for k in range(blocks + 1):
        lam, vecs = _displacement_generator_eig(alphas[k], a, adag)
        psi = vecs @ (np.exp(-1j * lam) * (vecs.conj().T @ psi))
        gates.append(("D", lam, vecs))
        states.append(psi)
        if k < blocks:
            diag = np.exp(1j * thetas[k])
            psi = diag * psi
            gates.append(("S", diag, None))
            states.append(psi)
    psi_f = states[-1]
    c = np.vdot(target, psi_f)
    j_raw = abs(c) ** 2
    leak = 0.0
    if guard:
        leak = float(np.sum(np.abs(psi_f[list(guard)]) ** 2))
    j_total = j_raw - leak_weight * leak
    if not want_grad:
        return j_total, j_raw, None, None

    seed = c * target
    if guard:
        seed = seed.copy()
        for gidx in guard:
            seed[gidx] -= leak_weight * psi_f[gidx]
    g_alpha = np.zeros(blocks + 1, dtype=complex)
    g_theta = np.zeros_like(thetas)
    chi_vec = seed
    di = blocks
    si = blocks - 1
    for k in range(len(gates) - 1, -1, -1):
        kind, first, second = gates[k]
        pre = states[k]
        if kind == "D":
            lam, vecs = first, second
            phi = _phi_matrix(-1j * lam)
            pre_eig = vecs.conj().T @ pre
            chi_eig = vecs.conj().T @ chi_vec
            for quad, e_dir in enumerate((dir_x, dir_y)):
                inner = vecs.conj().T @ e_dir @ vecs
                dpsi = vecs @ ((inner * phi) @ pre_eig)
                val = 2 * np.vdot(chi_vec, dpsi).real
                g_alpha[di] += val if quad == 0 else 1j * val
            chi_vec = vecs @ (np.exp(1j * lam) * chi_eig)
            di -= 1
        else:
            diag = first
            post = states[k + 1]
            g_theta[si] = 2 * (1j * np.conj(chi_vec) * post).real
            chi_vec = np.conj(diag) * chi_vec
            si -= 1
    return j_total, j_raw, g_alpha, g_theta


def optimize_snap_displacement_sequence(
        target: StateVector | Sequence[complex], blocks: int = 8,
        seed: int = 0, iterations: int = 2000, learning_rate: float = 0.1,
        *, tol: float = 1e-3, guard_levels: int = 1,
        leak_weight: float = 1.0) -> SequencePrepResult:
    """Optimize an alternating displacement/SNAP sequence that prepares
    `target` from vacuum on a single mode.

    The simulation pads `guard_levels` empty Fock levels above the target's
    truncation and penalizes their population (weight `leak_weight`) so the
    result stays physical. Analytic gradients feed the same backtracking
    line search as grape_optimize; deterministic for a given seed.
    """
    if isinstance(target, StateVector):
        if len(target.shape.dims) != 1:
            raise ShapeError("sequence preparation targets a single mode")
        tvec = np.asarray(target.amplitudes)
    else:
        tvec = np.asarray(target, dtype=complex)
        if tvec.ndim != 1 or len(tvec) < 2:
            raise ShapeError("target must be a 1-D amplitude vector")
        if not np.all(np.isfinite(tvec.real) & np.isfinite(tvec.imag)):
            raise NumericError("non-finite target amplitudes")
    nrm = np.linalg.norm(tvec)
    if nrm < 1e-12:
        raise UsageError("target state is null")
    tvec = tvec / nrm
    if blocks < 1:
        raise UsageError(f"need at least one SNAP block, got {blocks}")
    if guard_levels < 0:
        raise UsageError("guard_levels must be nonnegative")
    n = len(tvec) + int(guard_levels)
    padded = np.zeros(n, dtype=complex)
    padded[: len(tvec)] = tvec
    guard = tuple(range(len(tvec), n))
    a_mat = annihilation(n).matrix
    adag = a_mat.conj().T

    rng = np.random.default_rng(seed)
    alphas0 = 0.3 * (rng.standard_normal(blocks + 1)
                     + 1j * rng.standard_normal(blocks + 1))
    thetas0 = 0.1 * rng.standard_normal((blocks, n))

    def pack(al: np.ndarray, th: np.ndarray) -> np.ndarray:
        return np.concatenate([al.real, al.imag, th.ravel()])

    def unpack(x: np.ndarray):
        al = x[: blocks + 1] + 1j * x[blocks + 1: 2 * (blocks + 1)]
        th = x[2 * (blocks + 1):].reshape(blocks, n)
        return al, th

    def value_and_grad(x: np.ndarray):
        al, th = unpack(x)
        jt, _, ga, gt = _sequence_pass(al, th, padded, a_mat, adag, guard,
                                       float(leak_weight), True)
        return jt, np.concatenate([ga.real, ga.imag, gt.ravel()])

    x_best, _, iters, converged, trace = _ascend(
        pack(alphas0, thetas0), value_and_grad, int(iterations), float(tol),
        float(learning_rate),
    )
    al, th = unpack(x_best)
    _, j_raw, _, _ = _sequence_pass(al, th, padded, a_mat, adag, guard,
                                    float(leak_weight), False)
    return SequencePrepResult(
        alphas=tuple(al),
        thetas=th,
        n_levels=n,
        guard_levels=int(guard_levels),
        fidelity=float(j_raw),
        infidelity=float(1.0 - j_raw),
        iterations=iters,
        converged=converged,
        trace=trace,
    )
