"""Pre- and post-selected systems: weak values, ABL probabilities, pointers.

A :class:`TwoStateVector` bundles a preparation ``|psi>`` at ``t0``, a final
post-selection ``|phi>`` at ``t_f`` and a Hamiltonian acting in between. At an
intermediate time ``t`` the forward state is ``U(t - t0)|psi>`` and the
backward state is ``U(t_f - t)^dagger |phi>``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .hilbert import (
    Operator,
    StateVector,
    evolve,
    inner_product,
    settings,
    zeros,
)

__all__ = [
    "NEAR_ORTHOGONAL",
    "NearOrthogonalWarning",
    "TwoStateVector",
    "WeakValueResult",
    "AblDistribution",
    "Intermediate",
    "PointerShift",
    "forward_state",
    "backward_state",
    "weak_value",
    "weak_value_sweep",
    "validate_partition",
    "abl_probabilities",
    "postselection_probability",
    "strong_weak_correspondence",
    "pointer_shift",
]

# Below this overlap weak values become numerically huge; reports flag it.
NEAR_ORTHOGONAL = 1e-6


class NearOrthogonalWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class TwoStateVector:
    pre: StateVector
    post: StateVector
    hamiltonian: Operator | None = None
    t0: float = 0.0
    t_f: float = 1.0

    def __post_init__(self):
        pre, post = self.pre.normalize(), self.post.normalize()
        if pre.dim != post.dim:
            raise ValueError(f"pre-selection has dim {pre.dim}, post-selection dim {post.dim}")
        H = self.hamiltonian if self.hamiltonian is not None else zeros(pre.dim)
        if H.dim != pre.dim:
            raise ValueError(f"hamiltonian has dim {H.dim}, states have dim {pre.dim}")
        if not self.t0 < self.t_f:
            raise ValueError(f"need t0 < t_f, got t0={self.t0}, t_f={self.t_f}")
        object.__setattr__(self, "pre", pre)
        object.__setattr__(self, "post", post)
        object.__setattr__(self, "hamiltonian", H)
        amp = self.transition_amplitude()
        if abs(amp) <= 1e-12:
            raise ValueError("pre- and post-selection are orthogonal: the post-selected ensemble is empty")
        if abs(amp) < NEAR_ORTHOGONAL:
            warnings.warn(
                f"|<phi|U|psi>| = {abs(amp):.3g}; weak values will be very large",
                NearOrthogonalWarning,
                stacklevel=3,
            )

    @property
    def dim(self) -> int:
        return self.pre.dim

    def transition_amplitude(self) -> complex:
        """``<phi| U(t_f - t0) |psi>``."""
        return inner_product(self.post, evolve(self.hamiltonian, self.t_f - self.t0, self.pre))

    @property
    def near_orthogonal(self) -> bool:
        return abs(self.transition_amplitude()) < NEAR_ORTHOGONAL


@dataclass(frozen=True)
class WeakValueResult:
    value: complex
    operator_name: str
    time: float


@dataclass(frozen=True)
class AblDistribution:
    outcome_labels: tuple[str, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        if len(self.outcome_labels) != len(self.probabilities):
            raise ValueError("one label per probability required")
        total = sum(self.probabilities)
        if abs(total - 1.0) > settings.validation_tol:
            raise ValueError(f"probabilities sum to {total}, not 1")

    def __getitem__(self, index):
        return self.probabilities[index]


class Intermediate(NamedTuple):
    """A projective measurement at time ``t`` and the outcome conditioned on."""

    partition: Sequence[Operator]
    outcome: int
    t: float


class PointerShift(NamedTuple):
    position_shift: float
    momentum_shift: float


def _check_time(tsv: TwoStateVector, t: float) -> None:
    if not tsv.t0 <= t <= tsv.t_f:
        raise ValueError(f"time {t} outside [{tsv.t0}, {tsv.t_f}]")


def forward_state(tsv: TwoStateVector, t: float) -> StateVector:
    _check_time(tsv, t)
    if t == tsv.t0:
        return tsv.pre
    return evolve(tsv.hamiltonian, t - tsv.t0, tsv.pre).normalize()


def backward_state(tsv: TwoStateVector, t: float) -> StateVector:
    _check_time(tsv, t)
    if t == tsv.t_f:
        return tsv.post
    # U(t_f - t)^dagger = U(t - t_f)
    return evolve(tsv.hamiltonian, t - tsv.t_f, tsv.post).normalize()


def _boundary_pair(tsv: TwoStateVector, t: float) -> tuple[np.ndarray, np.ndarray]:
    return forward_state(tsv, t).amplitudes, backward_state(tsv, t).amplitudes


def weak_value(tsv: TwoStateVector, A: Operator, t: float) -> WeakValueResult:
    """``<phi(t)|A|psi(t)> / <phi(t)|psi(t)>``."""
    if A.dim != tsv.dim:
        raise ValueError(f"operator of dim {A.dim} does not act on a system of dim {tsv.dim}")
    psi, phi = _boundary_pair(tsv, t)
    value = np.vdot(phi, A.matrix @ psi) / np.vdot(phi, psi)
    return WeakValueResult(complex(value), A.name or "A", t)


def weak_value_sweep(tsv: TwoStateVector, operators: Sequence[Operator], times: Sequence[float]) -> np.ndarray:
    """Weak values of each operator at each time, shape ``(len(times), len(operators))``."""
    out = np.empty((len(times), len(operators)), dtype=np.complex128)
    for i, t in enumerate(times):
        psi, phi = _boundary_pair(tsv, t)
        denom = np.vdot(phi, psi)
        for j, A in enumerate(operators):
            out[i, j] = np.vdot(phi, A.matrix @ psi) / denom
    return out


def validate_partition(partition: Sequence[Operator], dim: int) -> None:
    """Raise ``ValueError`` unless ``partition`` is a complete orthogonal projector set."""
    tol = settings.validation_tol
    defects = []
    if len(partition) == 0:
        raise ValueError("partition is empty")
    for k, P in enumerate(partition):
        m = P.matrix
        if P.dim != dim:
            defects.append(f"projector {k} has dim {P.dim}, expected {dim}")
            continue
        if not np.allclose(m, m.conj().T, atol=tol, rtol=0) or not np.allclose(m @ m, m, atol=tol, rtol=0):
            defects.append(f"element {k} is not a projector")
    if defects:
        raise ValueError("invalid partition: " + "; ".join(defects))
    for i in range(len(partition)):
        for j in range(i):
            if not np.allclose(partition[i].matrix @ partition[j].matrix, 0, atol=tol):
                defects.append(f"projectors {j} and {i} overlap")
    total = sum(P.matrix for P in partition)
    if not np.allclose(total, np.eye(dim), atol=tol, rtol=0):
        defects.append("projectors do not sum to the identity (incomplete partition)")
    if defects:
        raise ValueError("invalid partition: " + "; ".join(defects))


def _labels(partition: Sequence[Operator]) -> tuple[str, ...]:
    return tuple(P.name or f"outcome{k}" for k, P in enumerate(partition))


def abl_probabilities(tsv: TwoStateVector, partition: Sequence[Operator], t: float) -> AblDistribution:
    """Outcome probabilities of a projective measurement at ``t`` given both boundary states.

    ``Pr(j) = |<phi(t)|P_j|psi(t)>|^2 / sum_k |<phi(t)|P_k|psi(t)>|^2``.
    """
    validate_partition(partition, tsv.dim)
    psi, phi = _boundary_pair(tsv, t)
    weights = np.array([abs(np.vdot(phi, P.matrix @ psi)) ** 2 for P in partition])
    total = weights.sum()
    if total == 0.0:
        raise ValueError(f"every outcome at t={t} is incompatible with the post-selection")
    return AblDistribution(_labels(partition), tuple(float(w) for w in weights / total))


def postselection_probability(tsv: TwoStateVector, intermediate: Intermediate | tuple | None = None) -> float:
    """Probability that the final post-selection succeeds.

    With an intermediate measurement the value is conditional on the chosen
    outcome: the state is collapsed at ``t``, renormalized and evolved to ``t_f``.
    """
    if intermediate is None:
        return abs(tsv.transition_amplitude()) ** 2
    partition, outcome, t = intermediate
    validate_partition(partition, tsv.dim)
    if not 0 <= outcome < len(partition):
        raise ValueError(f"outcome index {outcome} out of range for {len(partition)} outcomes")
    psi = forward_state(tsv, t)
    collapsed = partition[outcome].matrix @ psi.amplitudes
    born = float(np.vdot(collapsed, collapsed).real)
    if born <= settings.check_tol**2:
        raise ValueError(f"outcome {outcome} has zero Born probability at t={t}")
    collapsed = StateVector(collapsed / np.sqrt(born))
    final = evolve(tsv.hamiltonian, tsv.t_f - t, collapsed)
    return abs(inner_product(tsv.post, final)) ** 2


def strong_weak_correspondence(tsv: TwoStateVector, P: Operator, t: float) -> bool:
    """True when the weak value of projector ``P`` is an eigenvalue (0 or 1).

    In that case a strong measurement of ``P`` has a certain outcome; this is
    re-derived from the ABL rule and a mismatch raises ``AssertionError``.
    """
    m = P.matrix
    tol = settings.validation_tol
    if not (np.allclose(m, m.conj().T, atol=tol, rtol=0) and np.allclose(m @ m, m, atol=tol, rtol=0)):
        raise ValueError("strong_weak_correspondence requires a projector")
    w = weak_value(tsv, P, t).value
    if abs(w - 1) <= tol:
        expected = (1.0, 0.0)
    elif abs(w) <= tol:
        expected = (0.0, 1.0)
    else:
        return False
    dist = abl_probabilities(tsv, [P, Operator(np.eye(P.dim) - m)], t)
    if not np.allclose(dist.probabilities, expected, atol=tol, rtol=0):
        raise AssertionError(f"weak value {w} but ABL distribution {dist.probabilities}")
    return True


def pointer_shift(
    tsv: TwoStateVector,
    A: Operator,
    t: float,
    coupling: float,
    pointer_width: float,
    grid: int = 4096,
) -> PointerShift:
    """Conditional pointer displacement after an impulsive von Neumann coupling.

    The pointer starts as a Gaussian with position spread ``pointer_width``
    sampled on a grid extending ``8 * pointer_width`` beyond every shifted branch. The
    interaction ``exp(-i coupling A p)`` translates the pointer by
    ``coupling * a`` in the eigenspace of ``A`` with eigenvalue ``a``; the
    joint state is then projected on the backward state and the mean pointer
    position and momentum are returned (``hbar = 1``).

    In the weak limit ``coupling << pointer_width``::

        position_shift -> coupling * Re(A_w)
        momentum_shift -> coupling * Im(A_w) / (2 * pointer_width**2)
    """
    if coupling <= 0 or pointer_width <= 0:
        raise ValueError("coupling and pointer_width must be positive")
    if grid < 64:
        raise ValueError(f"grid of {grid} points cannot resolve the pointer; need at least 64")
    if A.dim != tsv.dim:
        raise ValueError(f"operator of dim {A.dim} does not act on a system of dim {tsv.dim}")
    if not np.allclose(A.matrix, A.matrix.conj().T, atol=settings.validation_tol, rtol=0):
        raise ValueError("pointer coupling needs a hermitian observable")
    evals, evecs = np.linalg.eigh(A.matrix)
    if coupling * np.max(np.abs(evals)) > 4.0 * pointer_width:
        raise ValueError("coupling moves the pointer outside the simulated window")

    # every shifted branch keeps 8 widths of margin on both sides
    lo = min(0.0, coupling * evals.min()) - 8.0 * pointer_width
    hi = max(0.0, coupling * evals.max()) + 8.0 * pointer_width
    x = np.linspace(lo, hi, grid)
    psi, phi = _boundary_pair(tsv, t)
    # amplitude of each eigen-branch surviving the post-selection
    branch = (phi.conj() @ evecs) * (evecs.conj().T @ psi)
    shifted = x[None, :] - coupling * evals[:, None]
    wave = np.exp(-(shifted**2) / (4.0 * pointer_width**2))
    dwave = -shifted / (2.0 * pointer_width**2) * wave
    pointer = branch @ wave
    dpointer = branch @ dwave

    # uniform grid and negligible tails: the quadrature weight cancels in the ratios
    density = np.abs(pointer) ** 2
    norm = density.sum()
    position = (x * density).sum() / norm
    momentum = (pointer.conj() * -1j * dpointer).real.sum() / norm
    return PointerShift(float(position), float(momentum))
