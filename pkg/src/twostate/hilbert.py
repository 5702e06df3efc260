"""Dense linear algebra over small Hilbert spaces.

States and operators are thin immutable wrappers around complex128 numpy
arrays. Composite spaces use the left-factor-major (Kronecker) ordering: in
``a ⊗ b`` the basis index is ``i_a * dim_b + i_b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Settings",
    "settings",
    "StateVector",
    "Operator",
    "HERMITIAN",
    "UNITARY",
    "PROJECTOR",
    "basis_state",
    "state",
    "identity",
    "zeros",
    "inner_product",
    "tensor",
    "projector",
    "evolve",
    "unitary_of",
    "subspace_sigma_x",
]

HERMITIAN = "hermitian"
UNITARY = "unitary"
PROJECTOR = "projector"
_FLAGS = frozenset({HERMITIAN, UNITARY, PROJECTOR})


@dataclass
class Settings:
    """Global numerical tolerances.

    ``validation_tol`` guards user input (orthogonality, hermiticity);
    ``check_tol`` is used for internal self-consistency checks.
    """

    validation_tol: float = 1e-10
    check_tol: float = 1e-12


settings = Settings()


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.complex128, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class StateVector:
    """A ket over a finite labelled basis. Not normalized automatically."""

    amplitudes: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError(f"amplitudes must be a nonempty 1-d sequence, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", _frozen(amps))
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != amps.size:
                raise ValueError(f"{len(labels)} labels for a state of dim {amps.size}")
            object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> StateVector:
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / n, self.labels)

    def __repr__(self):
        return f"StateVector(dim={self.dim}, amplitudes={np.array2string(self.amplitudes, precision=6)})"


@dataclass(frozen=True, eq=False)
class Operator:
    """Square complex matrix carrying verified structure flags."""

    matrix: np.ndarray
    flags: frozenset[str] = field(default_factory=frozenset)
    name: str | None = None

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
            raise ValueError(f"operator must be a nonempty square matrix, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("operator entries must be finite")
        flags = frozenset(self.flags)
        unknown = flags - _FLAGS
        if unknown:
            raise ValueError(f"unknown structure flags: {sorted(unknown)}")
        object.__setattr__(self, "matrix", _frozen(mat))
        object.__setattr__(self, "flags", flags)
        tol = settings.validation_tol
        if (HERMITIAN in flags or PROJECTOR in flags) and not _is_hermitian(mat, tol):
            raise ValueError(f"operator {self.name or '<unnamed>'} flagged hermitian but is not")
        if UNITARY in flags and not np.allclose(mat @ mat.conj().T, np.eye(len(mat)), atol=tol, rtol=0):
            raise ValueError("operator flagged unitary but U U^dagger != I")
        if PROJECTOR in flags and not np.allclose(mat @ mat, mat, atol=tol, rtol=0):
            raise ValueError("operator flagged projector but P^2 != P")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_hermitian(self) -> bool:
        return HERMITIAN in self.flags or PROJECTOR in self.flags

    def dagger(self) -> Operator:
        return Operator(self.matrix.conj().T, self.flags, self.name)

    def apply(self, v: StateVector) -> StateVector:
        if v.dim != self.dim:
            raise ValueError(f"operator of dim {self.dim} applied to state of dim {v.dim}")
        return StateVector(self.matrix @ v.amplitudes, v.labels)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return self.apply(other)
        if isinstance(other, Operator):
            if other.dim != self.dim:
                raise ValueError(f"cannot compose operators of dims {self.dim} and {other.dim}")
            return Operator(self.matrix @ other.matrix)
        return NotImplemented

    def complement(self) -> Operator:
        """``I - P`` for a projector ``P``."""
        if PROJECTOR not in self.flags:
            raise ValueError("complement is only defined for projectors")
        name = f"I-{self.name}" if self.name else None
        return Operator(np.eye(self.dim) - self.matrix, {PROJECTOR, HERMITIAN}, name)


def _is_hermitian(mat: np.ndarray, tol: float) -> bool:
    return bool(np.allclose(mat, mat.conj().T, atol=tol, rtol=0))


def basis_state(dim: int, index: int, labels: Sequence[str] | None = None) -> StateVector:
    if not 0 <= index < dim:
        raise ValueError(f"basis index {index} out of range for dim {dim}")
    amps = np.zeros(dim, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(amps, labels)


def state(amplitudes: Iterable[complex], labels: Sequence[str] | None = None, normalize: bool = True) -> StateVector:
    v = StateVector(np.asarray(list(amplitudes), dtype=np.complex128), labels)
    return v.normalize() if normalize else v


def identity(dim: int) -> Operator:
    return Operator(np.eye(dim), {HERMITIAN, UNITARY, PROJECTOR}, "I")


def zeros(dim: int) -> Operator:
    return Operator(np.zeros((dim, dim)), {HERMITIAN}, "0")


def inner_product(a: StateVector, b: StateVector) -> complex:
    """Return ``<a|b>``, conjugating the left argument."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch in inner product: {a.dim} vs {b.dim}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def tensor(a, b):
    """Kronecker product of two states or two operators (left-factor-major)."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        labels = None
        if a.labels is not None and b.labels is not None:
            labels = [f"{x}⊗{y}" for x in a.labels for y in b.labels]
        return StateVector(np.kron(a.amplitudes, b.amplitudes), labels)
    if isinstance(a, Operator) and isinstance(b, Operator):
        flags = a.flags & b.flags
        name = f"{a.name}⊗{b.name}" if a.name and b.name else None
        return Operator(np.kron(a.matrix, b.matrix), flags, name)
    raise TypeError(f"tensor needs two states or two operators, got {type(a).__name__} and {type(b).__name__}")


def projector(basis_states: Iterable[StateVector], name: str | None = None) -> Operator:
    """Return ``sum |s><s|`` over mutually orthogonal states (normalized first)."""
    states = [s.normalize() for s in basis_states]
    if not states:
        raise ValueError("projector needs at least one state")
    dim = states[0].dim
    tol = settings.validation_tol
    for i, s in enumerate(states):
        if s.dim != dim:
            raise ValueError(f"state {i} has dim {s.dim}, expected {dim}")
        for j in range(i):
            overlap = inner_product(states[j], s)
            if abs(overlap) > tol:
                raise ValueError(f"states {j} and {i} are not orthogonal (overlap {overlap:.3g})")
    mat = sum(np.outer(s.amplitudes, s.amplitudes.conj()) for s in states)
    return Operator(mat, {PROJECTOR, HERMITIAN}, name)


def _spectral(H: Operator) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(H, Operator):
        raise TypeError("hamiltonian must be an Operator")
    if not (H.is_hermitian or _is_hermitian(H.matrix, settings.validation_tol)):
        raise ValueError("hamiltonian is not hermitian")
    return np.linalg.eigh(H.matrix)


def _propagator(H: Operator, duration: float) -> np.ndarray:
    if not np.isfinite(duration):
        raise ValueError(f"duration must be finite, got {duration}")
    evals, evecs = _spectral(H)
    if duration == 0:
        return np.eye(H.dim, dtype=np.complex128)
    return (evecs * np.exp(-1j * evals * duration)) @ evecs.conj().T


def unitary_of(H: Operator, duration: float) -> Operator:
    """``exp(-i H duration)`` from the eigen-decomposition of ``H``."""
    return Operator(_propagator(H, duration), {UNITARY}, f"U({duration:g})")


def evolve(H: Operator, duration: float, v: StateVector) -> StateVector:
    if H.dim != v.dim:
        raise ValueError(f"hamiltonian of dim {H.dim} cannot evolve a state of dim {v.dim}")
    return StateVector(_propagator(H, duration) @ v.amplitudes, v.labels)


def subspace_sigma_x(dim: int, i: int, j: int, strength: float = 1.0, name: str | None = None) -> Operator:
    """``strength * (|i><j| + |j><i|)``: the exchange operator on ``span{|i>, |j>}``."""
    if i == j:
        raise ValueError("exchange operator needs two distinct levels")
    mat = np.zeros((dim, dim), dtype=np.complex128)
    mat[i, j] = mat[j, i] = strength
    return Operator(mat, {HERMITIAN}, name)
