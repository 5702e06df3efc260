"""Brute-force trajectory sampling of pre/post-selected ensembles.

Each trial prepares the initial state, optionally performs a projective
measurement at an intermediate time (Born rule, collapse, renormalize),
evolves to the final time and keeps the run with the Born probability of
the post-selection. Frequencies among kept runs estimate the ABL
probabilities without ever evaluating the ABL formula.

Randomness is counter-based: trial ``i`` draws its uniforms from Philox
block ``i`` under key ``master_seed``, so results do not depend on how
trials are chunked or distributed over threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .hilbert import Operator, StateVector, evolve
from .tsvf import TwoStateVector, validate_partition

__all__ = [
    "GENERATOR",
    "MIN_TRIALS",
    "EmptyEnsembleError",
    "TrialStream",
    "TrialOutcome",
    "EnsembleStats",
    "Protocol",
    "trial_uniforms",
    "sample_trajectory",
    "estimate_conditional",
    "estimate_postselection_rate",
]

GENERATOR = "numpy Philox4x64-10, key=seed, counter=trial index"
MIN_TRIALS = 1000
_CHUNK = 1 << 16
_SEED_MASK = (1 << 64) - 1


class EmptyEnsembleError(RuntimeError):
    """No trial survived the post-selection."""


class Protocol(NamedTuple):
    partition: Sequence[Operator]
    t: float


class TrialOutcome(NamedTuple):
    intermediate_outcome: int | None
    postselected: bool


def _to_unit(raw: np.ndarray) -> np.ndarray:
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def trial_uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Uniforms in [0, 1) for trials ``start .. start+count-1``, shape ``(count, 2)``."""
    bits = np.random.Philox(key=seed & _SEED_MASK, counter=start)
    raw = bits.random_raw(4 * count).reshape(count, 4)
    return _to_unit(raw[:, :2])


class TrialStream:
    """The uniforms owned by a single trial; exposes ``random()`` like a Generator."""

    def __init__(self, seed: int, index: int):
        self._values = list(trial_uniforms(seed, index, 1)[0])

    def random(self) -> float:
        if not self._values:
            raise RuntimeError("trial stream exhausted")
        return float(self._values.pop(0))


def _born_choice(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Index ``j`` with ``cum[j-1] < u <= cum[j]``; zero-probability outcomes are never chosen."""
    cum = np.cumsum(probs)
    cum = np.where(probs > 0, cum, -1.0)
    hit = cum[None, :] >= u[:, None]
    choice = np.argmax(hit, axis=1)
    # rounding can leave u above the last cumulative value
    last = int(np.flatnonzero(probs > 0)[-1])
    return np.where(hit.any(axis=1), choice, last)


class _Branches(NamedTuple):
    born: np.ndarray        # probability of each intermediate outcome
    keep: np.ndarray        # post-selection probability after each outcome


def _branches(tsv: TwoStateVector, protocol: Protocol | None) -> _Branches:
    if protocol is None:
        final = evolve(tsv.hamiltonian, tsv.t_f - tsv.t0, tsv.pre)
        keep = abs(np.vdot(tsv.post.amplitudes, final.amplitudes)) ** 2
        return _Branches(np.array([1.0]), np.array([min(keep, 1.0)]))
    partition, t = protocol
    validate_partition(partition, tsv.dim)
    if not tsv.t0 <= t <= tsv.t_f:
        raise ValueError(f"measurement time {t} outside [{tsv.t0}, {tsv.t_f}]")
    psi = evolve(tsv.hamiltonian, t - tsv.t0, tsv.pre).amplitudes
    born, keep = [], []
    for P in partition:
        collapsed = P.matrix @ psi
        p = float(np.vdot(collapsed, collapsed).real)
        born.append(p)
        if p == 0.0:
            keep.append(0.0)
            continue
        final = evolve(tsv.hamiltonian, tsv.t_f - t, StateVector(collapsed / np.sqrt(p)))
        keep.append(min(abs(np.vdot(tsv.post.amplitudes, final.amplitudes)) ** 2, 1.0))
    born = np.array(born)
    return _Branches(born / born.sum(), np.array(keep))


def sample_trajectory(tsv: TwoStateVector, protocol: Protocol | tuple | None, rng_stream) -> TrialOutcome:
    """One trial. ``rng_stream`` is anything with a ``random()`` method returning a uniform in [0, 1)."""
    if protocol is not None:
        protocol = Protocol(*protocol)
    branches = _branches(tsv, protocol)
    outcome = None
    keep = branches.keep[0]
    if protocol is not None:
        outcome = int(_born_choice(branches.born, np.array([rng_stream.random()]))[0])
        keep = branches.keep[outcome]
    return TrialOutcome(outcome, bool(rng_stream.random() < keep))


@dataclass(frozen=True)
class EnsembleStats:
    """Integer tallies of a Monte Carlo run plus derived frequencies.

    ``outcome_counts[j]`` counts all trials with intermediate outcome ``j``;
    ``postselected_outcome_counts[j]`` those that also passed post-selection.
    Without an intermediate measurement both have a single entry.
    """

    trials: int
    postselected_count: int
    outcome_labels: tuple[str, ...]
    outcome_counts: tuple[int, ...]
    postselected_outcome_counts: tuple[int, ...]
    seed: int
    generator: str = GENERATOR
    condition: int | None = None

    @property
    def conditional_frequencies(self) -> np.ndarray:
        if self.postselected_count == 0:
            raise EmptyEnsembleError("no post-selected trials")
        return np.array(self.postselected_outcome_counts, dtype=float) / self.postselected_count

    @property
    def standard_errors(self) -> np.ndarray:
        f = self.conditional_frequencies
        return np.sqrt(f * (1.0 - f) / self.postselected_count)

    @property
    def conditioning_count(self) -> int:
        return self.trials if self.condition is None else self.outcome_counts[self.condition]

    @property
    def postselection_rate(self) -> float:
        kept = self.postselected_count if self.condition is None else self.postselected_outcome_counts[self.condition]
        return kept / self.conditioning_count

    @property
    def postselection_rate_error(self) -> float:
        p = self.postselection_rate
        return float(np.sqrt(p * (1.0 - p) / self.conditioning_count))

    def to_dict(self) -> dict:
        out = {
            "trials": self.trials,
            "postselected_count": self.postselected_count,
            "outcome_labels": list(self.outcome_labels),
            "outcome_counts": list(self.outcome_counts),
            "postselected_outcome_counts": list(self.postselected_outcome_counts),
            "postselection_rate": self.postselection_rate,
            "postselection_rate_error": self.postselection_rate_error,
            "condition": self.condition,
        }
        if self.postselected_count:
            out["conditional_frequencies"] = self.conditional_frequencies.tolist()
            out["standard_errors"] = self.standard_errors.tolist()
        return out


def _chunk_counts(branches: _Branches, seed: int, start: int, count: int, measured: bool):
    u = trial_uniforms(seed, start, count)
    if measured:
        outcome = _born_choice(branches.born, u[:, 0])
        kept = u[:, 1] < branches.keep[outcome]
    else:
        outcome = np.zeros(count, dtype=np.intp)
        kept = u[:, 0] < branches.keep[0]
    n = len(branches.born)
    return np.bincount(outcome, minlength=n), np.bincount(outcome[kept], minlength=n)


def _run(tsv, protocol, trials, seed, workers) -> tuple[np.ndarray, np.ndarray]:
    if trials < MIN_TRIALS:
        raise ValueError(f"at least {MIN_TRIALS} trials are needed, got {trials}")
    branches = _branches(tsv, protocol)
    starts = range(0, trials, _CHUNK)
    jobs = [(seed, s, min(_CHUNK, trials - s), protocol is not None) for s in starts]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: _chunk_counts(branches, *job), jobs))
    else:
        parts = [_chunk_counts(branches, *job) for job in jobs]
    # integer sums in chunk order: deterministic for any worker count
    totals = sum(p[0] for p in parts)
    kept = sum(p[1] for p in parts)
    return totals, kept


def _labels(partition) -> tuple[str, ...]:
    return tuple(P.name or f"outcome{k}" for k, P in enumerate(partition))


def estimate_conditional(
    tsv: TwoStateVector,
    partition: Sequence[Operator],
    t: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> EnsembleStats:
    """Frequencies of intermediate outcomes among post-selected trials."""
    totals, kept = _run(tsv, Protocol(partition, t), trials, seed, workers)
    stats = EnsembleStats(
        trials=trials,
        postselected_count=int(kept.sum()),
        outcome_labels=_labels(partition),
        outcome_counts=tuple(int(x) for x in totals),
        postselected_outcome_counts=tuple(int(x) for x in kept),
        seed=seed,
    )
    if stats.postselected_count == 0:
        raise EmptyEnsembleError(f"none of {trials} trials passed the post-selection")
    return stats


def estimate_postselection_rate(
    tsv: TwoStateVector,
    protocol: Protocol | tuple | None,
    trials: int,
    seed: int,
    condition: int | None = None,
    workers: int = 1,
) -> EnsembleStats:
    """Post-selection success rate, optionally among trials with intermediate outcome ``condition``."""
    if protocol is not None:
        protocol = Protocol(*protocol)
    if condition is not None and protocol is None:
        raise ValueError("conditioning on an outcome needs an intermediate measurement")
    totals, kept = _run(tsv, protocol, trials, seed, workers)
    labels = _labels(protocol.partition) if protocol is not None else ("none",)
    stats = EnsembleStats(
        trials=trials,
        postselected_count=int(kept.sum()),
        outcome_labels=labels,
        outcome_counts=tuple(int(x) for x in totals),
        postselected_outcome_counts=tuple(int(x) for x in kept),
        seed=seed,
        condition=condition,
    )
    if stats.conditioning_count == 0:
        raise EmptyEnsembleError(f"outcome {condition} never occurred in {trials} trials")
    if stats.postselected_count == 0:
        raise EmptyEnsembleError(f"none of {trials} trials passed the post-selection")
    return stats
