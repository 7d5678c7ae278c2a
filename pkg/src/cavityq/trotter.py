"""Trotterized qudit evolution built from the gate vocabulary.

The Hamiltonian is the split-diagonal form H/2pi = diag(V) + F diag(K) F†
(Hz), with V the level-space potential and K a kinetic term diagonal in the
Fourier-conjugate basis. One first-order step

    U(dt) = F S_K F† S_V,   S_X = diag(exp(-i 2pi X dt))

is the four-gate circuit [snap(-2pi V dt), fourier†, snap(-2pi K dt),
fourier], and exp(-iH dt) - U(dt) = O(dt^2), so the global error at fixed t
is O(dt). Exact references here diagonalize the dense Hamiltonian.

Scrambling diagnostics use the out-of-time-order correlator
C(t) = <psi0| W†(t) V† W(t) V |psi0> with W(t) = U†(t) W U(t) evaluated with
the exact propagator; |C| <= 1 for unitary W, V.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidDimensionError, NumericError, ShapeError, UsageError
from .fock import HilbertShape, Operator, StateVector
from .gates import Circuit, GateSpec, apply_circuit, fourier


@dataclass(frozen=True, eq=False)
class QuditHamiltonian:
    """Split-diagonal qudit Hamiltonian: V_n (Hz) over levels and K_j (Hz)
    over the Fourier-conjugate index, both length N."""

    diagonal: np.ndarray
    kinetic_diagonal: np.ndarray

    def __post_init__(self) -> None:
        for name in ("diagonal", "kinetic_diagonal"):
            arr = np.array(getattr(self, name), dtype=float, copy=True, order="C")
            if arr.ndim != 1:
                raise ShapeError(f"{name} must be a 1-D real vector")
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"non-finite entries in {name}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if len(self.diagonal) != len(self.kinetic_diagonal):
            raise ShapeError(
                f"length mismatch: diagonal has {len(self.diagonal)} entries, "
                f"kinetic_diagonal has {len(self.kinetic_diagonal)}"
            )
        if len(self.diagonal) < 2:
            raise InvalidDimensionError("a qudit needs at least 2 levels")

    @property
    def n_levels(self) -> int:
        return len(self.diagonal)

    def dense(self) -> np.ndarray:
        """Dense Hermitian matrix in rad/s."""
        f = fourier(self.n_levels).matrix
        mat = np.diag(self.diagonal.astype(complex))
        mat += f @ np.diag(self.kinetic_diagonal.astype(complex)) @ f.conj().T
        return 2.0 * np.pi * mat

    def operator(self) -> Operator:
        return Operator(HilbertShape((self.n_levels,)), self.dense())


def trotter_step(h: QuditHamiltonian, dt_s: float,
                 n_levels: int | None = None) -> Circuit:
    """One first-order splitting step as a four-gate circuit."""
    if not isinstance(h, QuditHamiltonian):
        raise UsageError("trotter_step needs a QuditHamiltonian")
    if not (dt_s > 0) or not math.isfinite(dt_s):
        raise UsageError(f"dt must be positive and finite, got {dt_s}")
    if n_levels is not None and n_levels != h.n_levels:
        raise ShapeError(
            f"requested {n_levels} levels but the Hamiltonian has {h.n_levels}"
        )
    n = h.n_levels
    pot_phases = list(-2.0 * np.pi * h.diagonal * dt_s)
    kin_phases = list(-2.0 * np.pi * h.kinetic_diagonal * dt_s)
    gates = (
        GateSpec("snap", {"target": 0, "theta": pot_phases}),
        GateSpec("fourier", {"target": 0, "inverse": True}),
        GateSpec("snap", {"target": 0, "theta": kin_phases}),
        GateSpec("fourier", {"target": 0}),
    )
    return Circuit(HilbertShape((n,)), gates)


def _eigh_cached(h: QuditHamiltonian) -> tuple[np.ndarray, np.ndarray]:
    evals, vecs = np.linalg.eigh(h.dense())
    return evals, vecs


def exact_propagator(h: QuditHamiltonian, t_s: float) -> Operator:
    """exp(-iHt) by dense diagonalization."""
    if not math.isfinite(t_s):
        raise NumericError(f"non-finite time {t_s}")
    evals, vecs = _eigh_cached(h)
    mat = vecs @ (np.exp(-1j * evals * t_s)[:, None] * vecs.conj().T)
    return Operator(HilbertShape((h.n_levels,)), mat)


def _state_vector(psi0, n: int) -> StateVector:
    shape = HilbertShape((n,))
    if psi0 is None:
        amp = np.zeros(n, dtype=complex)
        amp[0] = 1.0
        return StateVector(shape, amp)
    if isinstance(psi0, StateVector):
        if psi0.shape.total_dim != n:
            raise ShapeError(
                f"initial state has dimension {psi0.shape.total_dim}, "
                f"Hamiltonian has {n} levels"
            )
        return StateVector(shape, psi0.amplitudes.reshape(n)).normalized()
    amp = np.asarray(psi0, dtype=complex).reshape(-1)
    if amp.size != n:
        raise ShapeError(f"initial state length {amp.size} != {n} levels")
    return StateVector(shape, amp).normalized()


@dataclass(frozen=True, eq=False)
class TrotterResult:
    """Trotterized final state plus its fidelity to the exact evolution."""

    state: StateVector
    exact_fidelity: float
    steps: int
    dt_s: float

    @property
    def infidelity(self) -> float:
        return max(0.0, 1.0 - self.exact_fidelity)


def evolve_trotter(h: QuditHamiltonian, t_total_s: float, steps: int,
                   psi0=None) -> TrotterResult:
    """Repeated first-order steps over t_total, compared against exact
    evolution of the same initial state."""
    if not isinstance(steps, (int, np.integer)) or steps < 1:
        raise UsageError(f"steps must be a positive integer, got {steps}")
    if not math.isfinite(t_total_s) or t_total_s < 0:
        raise UsageError(f"t_total must be nonnegative, got {t_total_s}")
    psi = _state_vector(psi0, h.n_levels)
    if t_total_s == 0:
        return TrotterResult(state=psi, exact_fidelity=1.0, steps=int(steps),
                             dt_s=0.0)
    dt = t_total_s / steps
    circuit = trotter_step(h, dt)
    state = psi
    for _ in range(int(steps)):
        state = apply_circuit(circuit, state)
    exact = exact_propagator(h, t_total_s).apply(psi)
    fid = abs(np.vdot(exact.amplitudes, state.amplitudes)) ** 2
    return TrotterResult(state=state, exact_fidelity=float(fid),
                         steps=int(steps), dt_s=dt)


def trotter_convergence(h: QuditHamiltonian, t_total_s: float,
                        steps_list: Sequence[int],
                        psi0=None) -> tuple[tuple[int, float, float], ...]:
    """Rows of (steps, dt, infidelity) for a step-count sweep at fixed t."""
    if len(steps_list) == 0:
        raise UsageError("steps_list must be non-empty")
    rows = []
    for steps in steps_list:
        res = evolve_trotter(h, t_total_s, int(steps), psi0)
        rows.append((int(steps), res.dt_s, res.infidelity))
    return tuple(rows)


def _operator_matrix(op, n: int, what: str) -> np.ndarray:
    if isinstance(op, Operator):
        mat = op.matrix
    else:
        mat = np.asarray(op, dtype=complex)
    if mat.shape != (n, n):
        raise ShapeError(f"{what} must be {n}x{n}, got {mat.shape}")
    return mat


def otoc(w, v, h: QuditHamiltonian, t_s: float, psi0=None) -> complex:
    """<psi0| W†(t) V† W(t) V |psi0> with W(t) = U†(t) W U(t), U = exp(-iHt)
    exact. psi0 defaults to |0>."""
    n = h.n_levels
    w_mat = _operator_matrix(w, n, "W")
    v_mat = _operator_matrix(v, n, "V")
    psi = _state_vector(psi0, n).amplitudes.reshape(n)
    u = exact_propagator(h, t_s).matrix
    w_t = u.conj().T @ w_mat @ u
    chain = w_t.conj().T @ (v_mat.conj().T @ (w_t @ (v_mat @ psi)))
    return complex(np.vdot(psi, chain))


def otoc_series(w, v, h: QuditHamiltonian, times_s: Sequence[float],
                psi0=None) -> tuple[tuple[float, float, float, float], ...]:
    """Rows of (t, Re C, Im C, |C|) over a time grid, sharing one
    diagonalization."""
    n = h.n_levels
    w_mat = _operator_matrix(w, n, "W")
    v_mat = _operator_matrix(v, n, "V")
    psi = _state_vector(psi0, n).amplitudes.reshape(n)
    evals, vecs = _eigh_cached(h)
    rows = []
    for t in times_s:
        t = float(t)
        if not math.isfinite(t):
            raise NumericError(f"non-finite time {t}")
        u = vecs @ (np.exp(-1j * evals * t)[:, None] * vecs.conj().T)
        w_t = u.conj().T @ w_mat @ u
        chain = w_t.conj().T @ (v_mat.conj().T @ (w_t @ (v_mat @ psi)))
        val = complex(np.vdot(psi, chain))
        rows.append((t, val.real, val.imag, abs(val)))
    return tuple(rows)
