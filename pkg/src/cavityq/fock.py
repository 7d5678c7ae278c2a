"""Truncated-Fock-space states and operators.

Multi-mode registers are flattened row-major with the *first* listed
subsystem most significant, i.e. the flat index of |n_0, n_1, ...⟩ is
n_0 * (d_1 * d_2 * ...) + n_1 * (d_2 * ...) + ... ; this matches the
ordering of numpy.kron(A, B). All arrays are complex128 and frozen
after construction, and every function here is pure, so results are
bitwise reproducible in single-threaded runs.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
from scipy.special import gammaln

from .errors import (
    CapacityError,
    InvalidDimensionError,
    ShapeError,
    UsageError,
)

DEFAULT_DIM_CAP = 2**20
DIM_CAP_ENV_VAR = "CAVITYQ_DIM_CAP"

# Leakage beyond this marks a state as badly truncated.
TRUNCATION_TOL = 1e-6


class TruncationWarning(UserWarning):
    """A constructed state lost non-negligible weight to truncation."""


def dim_cap() -> int:
    """Active total-dimension cap (env override, else 2**20)."""
    raw = os.environ.get(DIM_CAP_ENV_VAR)
    if raw is None:
        return DEFAULT_DIM_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise UsageError(f"{DIM_CAP_ENV_VAR} must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise UsageError(f"{DIM_CAP_ENV_VAR} must be positive, got {cap}")
    return cap


@dataclass(frozen=True)
class HilbertShape:
    """Ordered truncation dimensions of a tensor-product register."""

    dims: tuple[int, ...]

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise InvalidDimensionError("shape needs at least one subsystem")
        for d in dims:
            if d < 1:
                raise InvalidDimensionError(f"subsystem dimension must be >= 1, got {d}")
        total = math.prod(dims)
        cap = dim_cap()
        if total > cap:
            raise CapacityError(f"total dimension {total} exceeds cap {cap}")
        object.__setattr__(self, "dims", dims)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def flat_index(self, occupations: Sequence[int]) -> int:
        """Flat basis index of |n_0, n_1, ...⟩."""
        if len(occupations) != len(self.dims):
            raise ShapeError(
                f"expected {len(self.dims)} occupation numbers, got {len(occupations)}"
            )
        idx = 0
        for n, d in zip(occupations, self.dims):
            if not 0 <= n < d:
                raise UsageError(f"occupation {n} outside [0, {d})")
            idx = idx * d + n
        return idx

    def unflatten(self, index: int) -> tuple[int, ...]:
        """Per-subsystem occupations of a flat basis index."""
        if not 0 <= index < self.total_dim:
            raise UsageError(f"index {index} outside [0, {self.total_dim})")
        occ = []
        for d in reversed(self.dims):
            occ.append(index % d)
            index //= d
        return tuple(reversed(occ))


def shape_of(dims: int | Sequence[int] | HilbertShape) -> HilbertShape:
    if isinstance(dims, HilbertShape):
        return dims
    if isinstance(dims, int):
        return HilbertShape((dims,))
    return HilbertShape(tuple(dims))


def _frozen_array(values, expected_shape) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128, copy=True, order="C")
    if arr.shape != expected_shape:
        raise ShapeError(f"array shape {arr.shape} does not match {expected_shape}")
    if not (np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))):
        raise UsageError("non-finite amplitudes")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state on a HilbertShape. `leakage` records probability lost
    to truncation by the constructor (before renormalization)."""

    shape: HilbertShape
    amplitudes: np.ndarray
    leakage: float = 0.0

    def __post_init__(self) -> None:
        shape = shape_of(self.shape)
        object.__setattr__(self, "shape", shape)
        arr = _frozen_array(self.amplitudes, (shape.total_dim,))
        object.__setattr__(self, "amplitudes", arr)

    @property
    def dim(self) -> int:
        return self.shape.total_dim

    @property
    def truncation_warning(self) -> bool:
        return self.leakage > TRUNCATION_TOL

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n < 1e-300:
            raise UsageError("cannot normalize a null state")
        return StateVector(self.shape, self.amplitudes / n, self.leakage)

    def overlap(self, other: "StateVector") -> complex:
        """⟨self|other⟩."""
        if self.shape != other.shape:
            raise ShapeError(f"shapes differ: {self.shape.dims} vs {other.shape.dims}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense linear operator on a HilbertShape."""

    shape: HilbertShape
    matrix: np.ndarray

    def __post_init__(self) -> None:
        shape = shape_of(self.shape)
        object.__setattr__(self, "shape", shape)
        d = shape.total_dim
        arr = _frozen_array(self.matrix, (d, d))
        object.__setattr__(self, "matrix", arr)

    @property
    def dim(self) -> int:
        return self.shape.total_dim

    def dagger(self) -> "Operator":
        return Operator(self.shape, self.matrix.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.shape != other.shape:
            raise ShapeError(f"shapes differ: {self.shape.dims} vs {other.shape.dims}")
        return Operator(self.shape, self.matrix @ other.matrix)

    def apply(self, psi: StateVector) -> StateVector:
        if self.shape != psi.shape:
            raise ShapeError(f"shapes differ: {self.shape.dims} vs {psi.shape.dims}")
        return StateVector(psi.shape, self.matrix @ psi.amplitudes, psi.leakage)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)

    def is_unitary(self, tol: float = 1e-10) -> bool:
        d = self.dim
        return bool(
            np.max(np.abs(self.matrix.conj().T @ self.matrix - np.eye(d))) <= tol
        )


def basis_state(shape: int | Sequence[int] | HilbertShape,
                occupations: int | Sequence[int]) -> StateVector:
    """Computational basis state |n_0, n_1, ...⟩. A bare int is read as a
    flat index, which for a single mode is just the occupation number."""
    shp = shape_of(shape)
    if isinstance(occupations, (int, np.integer)):
        idx = int(occupations)
        if not 0 <= idx < shp.total_dim:
            raise UsageError(f"flat index {idx} outside [0, {shp.total_dim})")
    else:
        idx = shp.flat_index(occupations)
    amps = np.zeros(shp.total_dim, dtype=np.complex128)
    amps[idx] = 1.0
    return StateVector(shp, amps)


def identity(shape: int | Sequence[int] | HilbertShape) -> Operator:
    shp = shape_of(shape)
    return Operator(shp, np.eye(shp.total_dim, dtype=np.complex128))


def annihilation(n: int) -> Operator:
    """Lowering operator with ⟨n-1|a|n⟩ = √n on an n-dimensional mode."""
    if n < 1:
        raise InvalidDimensionError(f"annihilation needs dimension >= 1, got {n}")
    mat = np.diag(np.sqrt(np.arange(1, n, dtype=np.float64)), k=1).astype(np.complex128)
    return Operator(HilbertShape((n,)), mat)


def creation(n: int) -> Operator:
    return annihilation(n).dagger()


def number_operator(n: int) -> Operator:
    if n < 1:
        raise InvalidDimensionError(f"number operator needs dimension >= 1, got {n}")
    return Operator(HilbertShape((n,)), np.diag(np.arange(n)).astype(np.complex128))


def tensor(*factors):
    """Kronecker product of states or of operators, first factor most
    significant. Raises CapacityError if the product dimension exceeds
    the active cap."""
    if not factors:
        raise UsageError("tensor needs at least one factor")
    if all(isinstance(f, StateVector) for f in factors):
        dims: list[int] = []
        for f in factors:
            dims.extend(f.shape.dims)
        shp = HilbertShape(tuple(dims))  # capacity check happens here
        amps = factors[0].amplitudes
        for f in factors[1:]:
            amps = np.kron(amps, f.amplitudes)
        leak = max(f.leakage for f in factors)
        return StateVector(shp, amps, leak)
    if all(isinstance(f, Operator) for f in factors):
        dims = []
        for f in factors:
            dims.extend(f.shape.dims)
        shp = HilbertShape(tuple(dims))
        mat = factors[0].matrix
        for f in factors[1:]:
            mat = np.kron(mat, f.matrix)
        return Operator(shp, mat)
    raise UsageError("tensor factors must be all states or all operators")


def propagator(h: Operator, t: float) -> Operator:
    """exp(-i*H*t). Hermitian H goes through an eigendecomposition so the
    result is unitary to machine precision; anything else falls back to
    scipy's expm."""
    if h.is_hermitian(tol=1e-10):
        # symmetrize away the tolerated asymmetry before eigh
        hm = (h.matrix + h.matrix.conj().T) / 2
        evals, evecs = np.linalg.eigh(hm)
        phases = np.exp(-1j * evals * t)
        mat = (evecs * phases) @ evecs.conj().T
    else:
        mat = scipy.linalg.expm(-1j * t * h.matrix)
    return Operator(h.shape, mat)


def coherent_amplitudes(alpha: complex, n: int) -> np.ndarray:
    """Unnormalized truncated coherent amplitudes c_k = e^{-|α|²/2} α^k/√(k!),
    evaluated in log space so large |α| stays finite."""
    if n < 1:
        raise InvalidDimensionError(f"coherent state needs dimension >= 1, got {n}")
    alpha = complex(alpha)
    if alpha == 0:
        amps = np.zeros(n, dtype=np.complex128)
        amps[0] = 1.0
        return amps
    k = np.arange(n)
    mag, phase = abs(alpha), np.angle(alpha)
    log_mag = -abs(alpha) ** 2 / 2 + k * math.log(mag) - 0.5 * gammaln(k + 1)
    return np.exp(log_mag) * np.exp(1j * phase * k)


def coherent_state(alpha: complex, n: int) -> StateVector:
    """Truncated coherent state, renormalized on the first n levels.

    The probability weight lost to truncation is attached as `leakage`;
    above 1e-6 a TruncationWarning is also emitted.
    """
    shp = HilbertShape((n,))
    alpha = complex(alpha)
    if alpha == 0:
        return basis_state(shp, 0)
    mag = abs(alpha)
    amps = coherent_amplitudes(alpha, n)
    captured = float(np.sum(np.abs(amps) ** 2))
    leakage = max(0.0, 1.0 - captured)
    if leakage > TRUNCATION_TOL:
        warnings.warn(
            f"coherent state |α|={mag:.3g} keeps only {captured:.6f} of its weight "
            f"at truncation {n}",
            TruncationWarning,
            stacklevel=2,
        )
    amps = amps / math.sqrt(captured)
    return StateVector(shp, amps, leakage)


def fidelity(a: StateVector, b: StateVector) -> float:
    """|⟨a|b⟩|² for normalized pure states."""
    return abs(a.overlap(b)) ** 2


def _as_axes(shape: HilbertShape, keep: Iterable[int]) -> list[int]:
    keep = list(keep)
    if not keep:
        raise UsageError("keep must name at least one subsystem")
    seen = set()
    for k in keep:
        if not 0 <= k < shape.n_subsystems:
            raise UsageError(f"subsystem {k} outside [0, {shape.n_subsystems})")
        if k in seen:
            raise UsageError(f"subsystem {k} listed twice")
        seen.add(k)
    return keep


def reduced_density_matrix(psi: StateVector, keep: Iterable[int]) -> np.ndarray:
    """Partial trace onto the kept subsystems (in the order given)."""
    keep = _as_axes(psi.shape, keep)
    dims = psi.shape.dims
    tens = psi.amplitudes.reshape(dims)
    traced = [i for i in range(len(dims)) if i not in keep]
    perm = keep + traced
    tens = np.transpose(tens, perm)
    dk = math.prod(dims[i] for i in keep)
    dt = math.prod(dims[i] for i in traced) if traced else 1
    mat = tens.reshape(dk, dt)
    return mat @ mat.conj().T


def mode_probabilities(psi: StateVector, keep: Iterable[int] | None = None) -> np.ndarray:
    """Marginal occupation probabilities of the kept subsystems jointly.

    With keep=None every subsystem is kept, i.e. this is just |ψ|²
    reshaped; a single subsystem gives its marginal distribution.
    """
    if keep is None:
        keep = range(psi.shape.n_subsystems)
    keep = _as_axes(psi.shape, keep)
    rho = reduced_density_matrix(psi, keep)
    probs = np.real(np.diag(rho)).copy()
    probs[probs < 0] = 0.0
    return probs


def mean_occupation(psi: StateVector, mode: int = 0) -> float:
    """⟨n̂⟩ of one subsystem."""
    probs = mode_probabilities(psi, [mode])
    return float(np.dot(np.arange(len(probs)), probs))
