"""Pitch-and-catch state transfer through a directional vacuum channel.

Single-excitation cascaded model with the channel field eliminated:

    da/dt = -(k1(t)/2 + i*dw/2) a
    db/dt = -k2(t)/2 b - sqrt(k1(t) k2(t)) a

where k1/k2 are the emitter/receiver coupling rates (plain 1/s; "Hz" here
means inverse seconds with no 2*pi), dw the relative node detuning, and the
channel flux |sqrt(k1) a + sqrt(k2) b|^2 accounts for the emitted photon, so
|a|^2 + |b|^2 + integrated flux = 1 identically.

The sech photon envelope (peak kappa/2) is produced by the matched rate pair
k1(t) = (kappa/2)(1 + tanh(kappa t / 2)), k2(t) = k1(-t): with those the
equations integrate in closed form to a = sqrt((1-tanh)/2),
b = -sqrt((1+tanh)/2), transferring the excitation completely. The protocol
is centered at t = 0, so spans should straddle zero.

Phase convention: the reported transfer amplitude is tau = -b(t1), real and
positive for matched resonant transfer, and the superposition fidelity is
F = | |alpha|^2 + |beta|^2 tau |^2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateDetuningError,
    NumericError,
    ParseError,
    ShapeError,
    StepSizeError,
    UsageError,
)

_MAX_RATE_DT = 0.05


def sech_pitch(kappa_hz: float, t_s) -> np.ndarray | float:
    """Sech coupling/photon envelope kappa / (2 cosh(kappa t / 2)).

    Peaks at kappa/2 for t=0 and is even in t. The square integrates the
    emitted photon: the channel flux of the matched transfer is
    sech_pitch(kappa, t)^2 / kappa.
    """
    t = np.asarray(t_s, dtype=float)
    out = kappa_hz / (2.0 * np.cosh(kappa_hz * t / 2.0))
    return float(out) if np.isscalar(t_s) else out


def matched_emit_rate(kappa_hz: float) -> Callable[[float], float]:
    """Emitter decay rate producing the sech photon envelope:
    k1(t) = (kappa/2)(1 + tanh(kappa t / 2))."""
    if kappa_hz <= 0 or not math.isfinite(kappa_hz):
        raise UsageError(f"kappa must be positive and finite, got {kappa_hz}")

    def rate(t):
        return (kappa_hz / 2.0) * (1.0 + np.tanh(kappa_hz * np.asarray(t) / 2.0))

    return rate


def matched_catch_rate(kappa_hz: float) -> Callable[[float], float]:
    """Time reverse of the matched emitter rate: k2(t) = k1(-t)."""
    emit = matched_emit_rate(kappa_hz)

    def rate(t):
        return emit(-np.asarray(t))

    return rate


def raman_coupling(omega_drive_hz, g_hz: float, alpha_anharm_hz: float,
                   delta_hz: float):
    """Effective sideband coupling g*Omega*alpha / (sqrt(2) Delta (Delta+alpha)),
    pointwise in the drive envelope Omega."""
    if delta_hz == 0:
        raise DegenerateDetuningError("drive detuning Delta must be nonzero")
    if delta_hz + alpha_anharm_hz == 0:
        raise DegenerateDetuningError(
            "Delta + alpha hits the two-photon resonance (zero denominator)"
        )
    omega = np.asarray(omega_drive_hz, dtype=float)
    out = (g_hz * omega * alpha_anharm_hz
           / (math.sqrt(2.0) * delta_hz * (delta_hz + alpha_anharm_hz)))
    return float(out) if np.isscalar(omega_drive_hz) else out


@dataclass(frozen=True, eq=False)
class SampledWaveform:
    """Piecewise-linear rate samples anchored at t0_s, spaced dt_s apart.
    Evaluation clamps to the end samples outside the sampled window."""

    values: np.ndarray
    dt_s: float
    t0_s: float = 0.0

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float, copy=True, order="C")
        if vals.ndim != 1 or len(vals) < 2:
            raise ShapeError("sampled waveform needs a 1-D array of >= 2 values")
        if not np.all(np.isfinite(vals)):
            raise NumericError("non-finite waveform samples")
        if np.any(vals < 0):
            raise UsageError("coupling rates must be nonnegative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.dt_s <= 0 or not math.isfinite(self.dt_s):
            raise UsageError(f"dt_s must be positive and finite, got {self.dt_s}")
        object.__setattr__(self, "dt_s", float(self.dt_s))
        object.__setattr__(self, "t0_s", float(self.t0_s))

    @property
    def times(self) -> np.ndarray:
        return self.t0_s + self.dt_s * np.arange(len(self.values))

    def integral(self) -> float:
        return float(np.trapezoid(self.values, dx=self.dt_s))

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=float), self.times, self.values)


def _evaluate_rates(waveform, grid: np.ndarray, what: str) -> np.ndarray:
    """Evaluate a rate waveform on a time grid; validates nonnegativity."""
    if isinstance(waveform, SampledWaveform):
        rates = waveform(grid)
    elif callable(waveform):
        try:
            rates = np.asarray(waveform(grid), dtype=float)
            if rates.shape != grid.shape:
                raise TypeError
        except (TypeError, ValueError):
            rates = np.array([float(waveform(t)) for t in grid])
    else:
        raise UsageError(f"{what} must be callable or a SampledWaveform")
    if not np.all(np.isfinite(rates)):
        raise NumericError(f"{what} produced non-finite rates")
    if np.any(rates < 0):
        raise UsageError(f"{what} must be nonnegative everywhere")
    return rates


@dataclass(frozen=True, eq=False)
class QstConfig:
    """Transfer problem definition.

    `input_state` holds the qubit amplitudes (alpha, beta) of
    alpha|0> + beta|1>; only the single-excitation branch evolves.
    `channel_temperature` is a reserved extension hook and must be 0.
    """

    kappa_hz: float
    emit_waveform: object
    catch_waveform: object
    t_span_s: tuple[float, float]
    dt_s: float
    delta_omega_hz: float = 0.0
    input_state: tuple[complex, complex] = (0.0, 1.0)
    channel_temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.kappa_hz <= 0 or not math.isfinite(self.kappa_hz):
            raise UsageError(f"kappa must be positive, got {self.kappa_hz}")
        t0, t1 = (float(self.t_span_s[0]), float(self.t_span_s[1]))
        if not (math.isfinite(t0) and math.isfinite(t1)) or t1 <= t0:
            raise UsageError(f"invalid t_span {self.t_span_s}")
        object.__setattr__(self, "t_span_s", (t0, t1))
        if self.dt_s <= 0 or not math.isfinite(self.dt_s):
            raise UsageError(f"dt must be positive, got {self.dt_s}")
        object.__setattr__(self, "dt_s", float(self.dt_s))
        if not math.isfinite(self.delta_omega_hz):
            raise NumericError("non-finite detuning")
        object.__setattr__(self, "delta_omega_hz", float(self.delta_omega_hz))
        alpha, beta = (complex(self.input_state[0]), complex(self.input_state[1]))
        nrm = abs(alpha) ** 2 + abs(beta) ** 2
        if abs(nrm - 1.0) > 1e-9:
            raise UsageError(
                f"input state must be normalized: |alpha|^2+|beta|^2 = {nrm}"
            )
        object.__setattr__(self, "input_state", (alpha, beta))
        if self.channel_temperature != 0:
            raise UsageError(
                "thermal channels are a reserved extension: "
                "channel_temperature must be 0"
            )


@dataclass(frozen=True, eq=False)
class QstResult:
    """Transfer outcome plus amplitude traces on the integrator grid."""

    eta: float
    fidelity: float
    transfer_amplitude: complex
    times_s: np.ndarray
    a_trace: np.ndarray
    b_trace: np.ndarray
    emitted_trace: np.ndarray

    def __post_init__(self) -> None:
        for name in ("times_s", "a_trace", "b_trace", "emitted_trace"):
            arr = np.array(getattr(self, name), copy=True, order="C")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def simulate_transfer(config: QstConfig) -> QstResult:
    """RK4 integration of the cascaded amplitude equations.

    The excitation amplitude starts entirely in the emitter (a=1), the
    channel in vacuum. eta = |b(t1)|^2; the superposition fidelity uses the
    tau = -b(t1) phase reference. Raises a step-size error when
    max(k1, k2) * dt exceeds 0.05 on the integration grid.
    """
    t0, t1 = config.t_span_s
    n_steps = max(1, int(round((t1 - t0) / config.dt_s)))
    dt = (t1 - t0) / n_steps
    # rates on the half-step grid: index 2j is t_j, 2j+1 the midpoint
    grid = t0 + (dt / 2.0) * np.arange(2 * n_steps + 1)
    k1 = _evaluate_rates(config.emit_waveform, grid, "emit waveform")
    k2 = _evaluate_rates(config.catch_waveform, grid, "catch waveform")
    max_rate = float(max(k1.max(), k2.max()))
    if max_rate * dt > _MAX_RATE_DT * (1 + 1e-12):
        raise StepSizeError(
            f"max(kappa)*dt = {max_rate * dt:.3g} exceeds {_MAX_RATE_DT}; "
            f"reduce dt below {_MAX_RATE_DT / max_rate:.3e} s"
        )
    # scalar precomputations: the decay coefficient of a, the a->b coupling,
    # and the two flux weights, all on the half-step grid
    ca = -(k1 / 2.0 + 0.5j * config.delta_omega_hz)
    cb = -k2 / 2.0
    cab = -np.sqrt(k1 * k2)
    w1 = np.sqrt(k1)
    w2 = np.sqrt(k2)

    a, b, p = 1.0 + 0.0j, 0.0 + 0.0j, 0.0
    a_trace = np.empty(n_steps + 1, dtype=complex)
    b_trace = np.empty(n_steps + 1, dtype=complex)
    p_trace = np.empty(n_steps + 1, dtype=float)
    a_trace[0], b_trace[0], p_trace[0] = a, b, p
    h = dt / 2.0
    for j in range(n_steps):
        i0, im, i1 = 2 * j, 2 * j + 1, 2 * j + 2
        da1 = ca[i0] * a
        db1 = cb[i0] * b + cab[i0] * a
        dp1 = abs(w1[i0] * a + w2[i0] * b) ** 2
        a2, b2 = a + h * da1, b + h * db1
        da2 = ca[im] * a2
        db2 = cb[im] * b2 + cab[im] * a2
        dp2 = abs(w1[im] * a2 + w2[im] * b2) ** 2
        a3, b3 = a + h * da2, b + h * db2
        da3 = ca[im] * a3
        db3 = cb[im] * b3 + cab[im] * a3
        dp3 = abs(w1[im] * a3 + w2[im] * b3) ** 2
        a4, b4 = a + dt * da3, b + dt * db3
        da4 = ca[i1] * a4
        db4 = cb[i1] * b4 + cab[i1] * a4
        dp4 = abs(w1[i1] * a4 + w2[i1] * b4) ** 2
        a += (dt / 6.0) * (da1 + 2 * da2 + 2 * da3 + da4)
        b += (dt / 6.0) * (db1 + 2 * db2 + 2 * db3 + db4)
        p += (dt / 6.0) * (dp1 + 2 * dp2 + 2 * dp3 + dp4)
        a_trace[j + 1], b_trace[j + 1], p_trace[j + 1] = a, b, p
    b_final = complex(b)
    eta_raw = abs(b_final) ** 2
    if eta_raw > 1 + 1e-6:
        raise NumericError(f"integrator produced eta = {eta_raw} > 1")
    eta = min(max(eta_raw, 0.0), 1.0)
    tau = -b_final
    alpha, beta = config.input_state
    fid = abs(abs(alpha) ** 2 + abs(beta) ** 2 * tau) ** 2
    times = t0 + dt * np.arange(n_steps + 1)
    return QstResult(
        eta=eta,
        fidelity=float(fid),
        transfer_amplitude=tau,
        times_s=times,
        a_trace=a_trace,
        b_trace=b_trace,
        emitted_trace=p_trace,
    )


@dataclass(frozen=True, eq=False)
class DetuningSweepResult:
    """Rows of (delta_omega_hz, eta, sqrt(1-eta)) plus the linear fit of
    sqrt(1-eta) against |delta_omega| (least squares with intercept)."""

    rows: tuple[tuple[float, float, float], ...]
    slope: float
    intercept: float
    r_squared: float
    baseline_eta: float

    def to_csv(self) -> str:
        lines = ["delta_omega_hz,eta,sqrt_one_minus_eta"]
        for dw, eta, root in self.rows:
            lines.append(f"{dw:.12e},{eta:.12e},{root:.12e}")
        return "\n".join(lines) + "\n"


def _with_detuning(config: QstConfig, delta_hz: float) -> QstConfig:
    return QstConfig(
        kappa_hz=config.kappa_hz,
        emit_waveform=config.emit_waveform,
        catch_waveform=config.catch_waveform,
        t_span_s=config.t_span_s,
        dt_s=config.dt_s,
        delta_omega_hz=delta_hz,
        input_state=config.input_state,
        channel_temperature=config.channel_temperature,
    )


def detuning_sweep(config: QstConfig, delta_list: Sequence[float],
                   map_fn=map) -> DetuningSweepResult:
    """Transfer efficiency versus node detuning.

    Requires a matched-waveform baseline: the zero-detuning transfer must
    exceed eta = 0.99 for the linear small-detuning law to be meaningful.
    map_fn lets callers fan the independent sweep points out to a pool; it
    must preserve order (results are merged by index).
    """
    deltas = [float(d) for d in delta_list]
    if len(deltas) < 2:
        raise UsageError("need at least two detunings to sweep")
    baseline = simulate_transfer(_with_detuning(config, 0.0)).eta
    if baseline <= 0.99:
        raise UsageError(
            f"baseline transfer eta = {baseline:.4f} <= 0.99: the sweep "
            "requires matched waveforms"
        )
    etas = list(map_fn(
        lambda dw: simulate_transfer(_with_detuning(config, dw)).eta, deltas
    ))
    rows = [
        (dw, eta, math.sqrt(max(0.0, 1.0 - eta)))
        for dw, eta in zip(deltas, etas)
    ]
    x = np.array([abs(r[0]) for r in rows])
    ydat = np.array([r[2] for r in rows])
    if np.ptp(x) == 0:
        raise UsageError("detunings must span more than one |value| to fit")
    slope, intercept = np.polyfit(x, ydat, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((ydat - pred) ** 2))
    ss_tot = float(np.sum((ydat - ydat.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return DetuningSweepResult(
        rows=tuple(rows),
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(r_squared),
        baseline_eta=float(baseline),
    )


def on_off_ratio(waveform, floor_hz: float,
                 t_span_s: tuple[float, float] | None = None,
                 samples: int = 4001) -> float:
    """Dynamic range max|kappa(t)| / floor of a coupling waveform.

    Array-like inputs and SampledWaveforms use their own samples; a bare
    callable needs t_span_s to evaluate on (an odd sample count includes
    the midpoint).
    """
    if floor_hz <= 0 or not math.isfinite(floor_hz):
        raise UsageError(f"floor must be positive, got {floor_hz}")
    if isinstance(waveform, SampledWaveform):
        peak = float(np.max(np.abs(waveform.values)))
    elif callable(waveform):
        if t_span_s is None:
            raise UsageError("a callable waveform needs t_span_s")
        grid = np.linspace(t_span_s[0], t_span_s[1], samples)
        peak = float(np.max(np.abs(_evaluate_rates(waveform, grid, "waveform"))))
    else:
        vals = np.asarray(waveform, dtype=float)
        if vals.ndim != 1 or len(vals) == 0:
            raise ShapeError("waveform must be 1-D and non-empty")
        peak = float(np.max(np.abs(vals)))
    return peak / floor_hz


# ---------------------------------------------------------------------------
# config JSON


def _waveform_from_json(obj, slot: str, kappa_hz: float, t0_s: float):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ParseError(f"{slot} waveform must be an object with a 'kind'")
    kind = obj["kind"]
    if kind == "sech":
        allowed = {"kind", "kappa_hz"}
        unknown = set(obj) - allowed
        if unknown:
            raise ParseError(f"{slot} waveform: unknown fields {sorted(unknown)}")
        k = obj.get("kappa_hz", kappa_hz)
        if not isinstance(k, (int, float)) or k <= 0:
            raise ParseError(f"{slot} waveform: 'kappa_hz' must be positive")
        # the sech photon-envelope protocol: rising tanh rate on the emitter
        # side, its time reverse on the catcher
        if slot == "emit":
            return matched_emit_rate(float(k))
        return matched_catch_rate(float(k))
    if kind == "sampled":
        allowed = {"kind", "dt_s", "values"}
        unknown = set(obj) - allowed
        if unknown:
            raise ParseError(f"{slot} waveform: unknown fields {sorted(unknown)}")
        if "dt_s" not in obj or "values" not in obj:
            raise ParseError(f"{slot} waveform: 'sampled' needs dt_s and values")
        if (not isinstance(obj["values"], list)
                or not all(isinstance(v, (int, float)) for v in obj["values"])):
            raise ParseError(f"{slot} waveform: 'values' must be numbers")
        if not isinstance(obj["dt_s"], (int, float)):
            raise ParseError(f"{slot} waveform: 'dt_s' must be a number")
        try:
            return SampledWaveform(np.asarray(obj["values"], dtype=float),
                                   float(obj["dt_s"]), t0_s)
        except (UsageError, ShapeError, NumericError) as exc:
            raise ParseError(f"{slot} waveform: {exc}") from exc
    raise ParseError(f"{slot} waveform: unknown kind {kind!r}")


def qst_config_from_json(text: str) -> QstConfig:
    """Parse a transfer configuration document.

    Schema: {"kappa_hz":..., "t_span_s":[t0,t1], "dt_s":...,
    "delta_omega_hz":..., "input_state":[[re,im],[re,im]],
    "emit_waveform":{"kind":"sech"|"sampled",...},
    "catch_waveform":{...}, "channel_temperature":0}. Sampled waveforms are
    anchored at t_span_s[0].
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid transfer config JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("transfer config must be a JSON object")
    required = {"kappa_hz", "t_span_s", "dt_s", "emit_waveform",
                "catch_waveform"}
    optional = {"delta_omega_hz", "input_state", "channel_temperature"}
    missing = required - set(doc)
    if missing:
        raise ParseError(f"missing config fields: {sorted(missing)}")
    unknown = set(doc) - required - optional
    if unknown:
        raise ParseError(f"unknown config fields: {sorted(unknown)}")
    for name in ("kappa_hz", "dt_s"):
        if not isinstance(doc[name], (int, float)):
            raise ParseError(f"'{name}' must be a number")
    span = doc["t_span_s"]
    if (not isinstance(span, list) or len(span) != 2
            or not all(isinstance(v, (int, float)) for v in span)):
        raise ParseError("'t_span_s' must be a [t0, t1] number pair")
    dw = doc.get("delta_omega_hz", 0.0)
    if not isinstance(dw, (int, float)):
        raise ParseError("'delta_omega_hz' must be a number")
    state = doc.get("input_state", [[0.0, 0.0], [1.0, 0.0]])
    if (not isinstance(state, list) or len(state) != 2
            or not all(isinstance(p, list) and len(p) == 2
                       and all(isinstance(x, (int, float)) for x in p)
                       for p in state)):
        raise ParseError("'input_state' must be [[re,im],[re,im]]")
    temp = doc.get("channel_temperature", 0.0)
    if not isinstance(temp, (int, float)):
        raise ParseError("'channel_temperature' must be a number")
    t0 = float(span[0])
    kappa = float(doc["kappa_hz"])
    emit = _waveform_from_json(doc["emit_waveform"], "emit", kappa, t0)
    catch = _waveform_from_json(doc["catch_waveform"], "catch", kappa, t0)
    try:
        return QstConfig(
            kappa_hz=kappa,
            emit_waveform=emit,
            catch_waveform=catch,
            t_span_s=(t0, float(span[1])),
            dt_s=float(doc["dt_s"]),
            delta_omega_hz=float(dw),
            input_state=(complex(state[0][0], state[0][1]),
                         complex(state[1][0], state[1][1])),
            channel_temperature=float(temp),
        )
    except (UsageError, NumericError) as exc:
        raise ParseError(f"invalid transfer config: {exc}") from exc
