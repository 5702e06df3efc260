"""Scenario builders for the three-boxes family of pre/post-selected experiments.

Time is measured in units where the tunnelling strength is 1, so ``t`` below
is the dimensionless product ``eps * t``. The disappearing-particle protocol
uses the grid ``t1 = 0``, ``t2 = pi/4``, ``t3 = pi/2`` and post-selects at
``t_f = pi``; these are the times at which ``<P1>_w = cos 2t`` and
``<P2>_w = -cos 2t`` take the values 1/0/-1 needed for certain outcomes.

Shutter protocols put a probe photon in orthogonal path modes. A photon in
the mode probing box ``b`` is moved to a dedicated reflected mode when the
shutter particle is in box ``b`` and is left untouched otherwise. The
shutter has no recoil.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import bell
from .hilbert import (
    Operator,
    StateVector,
    basis_state,
    identity,
    projector,
    subspace_sigma_x,
    tensor,
    unitary_of,
    zeros,
)
from .tsvf import (
    TwoStateVector,
    WeakValueResult,
    AblDistribution,
    Intermediate,
    abl_probabilities,
    postselection_probability,
    weak_value_sweep,
    forward_state,
)

__all__ = [
    "T1",
    "T2",
    "T3",
    "T_F",
    "SLOT_TIMES",
    "SpacetimePath",
    "PathCombination",
    "ShutterProbeSystem",
    "AblEntry",
    "ExperimentReport",
    "three_boxes_states",
    "disappearing_states",
    "tunnelling_hamiltonian",
    "three_boxes_system",
    "disappearing_system",
    "three_boxes_partitions",
    "disappearing_observables",
    "state_to_dict",
    "box_projector",
    "box_vs_rest",
    "tsv_report",
    "three_boxes",
    "disappearing_particle",
    "shutter_three_boxes",
    "temporal_shutter",
    "empty_box_probe",
    "crossed_interferometers",
    "quantum_liar",
    "RESTORING_COMBINATION",
]

T1, T2, T3, T_F = 0.0, math.pi / 4, math.pi / 2, math.pi
SLOT_TIMES = {"t1": T1, "t2": T2, "t3": T3}
BOX_LABELS = ("1", "2", "3")
_SQRT3 = math.sqrt(3.0)


# -- single-particle presets -------------------------------------------------

def three_boxes_states() -> tuple[StateVector, StateVector]:
    pre = StateVector(np.array([1, 1, 1]) / _SQRT3, BOX_LABELS)
    post = StateVector(np.array([1, 1, -1]) / _SQRT3, BOX_LABELS)
    return pre, post


def disappearing_states() -> tuple[StateVector, StateVector]:
    pre = StateVector(np.array([1, 1j, 1]) / _SQRT3, BOX_LABELS)
    post = StateVector(np.array([-1, 1j, 1]) / _SQRT3, BOX_LABELS)
    return pre, post


def tunnelling_hamiltonian(epsilon: float = 1.0) -> Operator:
    """``epsilon * sigma_x`` between boxes 1 and 2; box 3 is decoupled."""
    return subspace_sigma_x(3, 0, 1, epsilon, name="H")


def three_boxes_system() -> TwoStateVector:
    pre, post = three_boxes_states()
    return TwoStateVector(pre, post, zeros(3), 0.0, 1.0)


def disappearing_system(epsilon: float = 1.0) -> TwoStateVector:
    pre, post = disappearing_states()
    return TwoStateVector(pre, post, tunnelling_hamiltonian(epsilon), 0.0, T_F / epsilon)


def box_projector(box: int, dim: int = 3) -> Operator:
    return projector([basis_state(dim, box - 1)], name=f"P{box}")


def box_vs_rest(box: int, dim: int = 3) -> list[Operator]:
    P = box_projector(box, dim)
    return [P, P.complement()]


# -- reports -----------------------------------------------------------------

class AblEntry(NamedTuple):
    partition: str
    t: float
    distribution: AblDistribution


def _cjson(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def state_to_dict(v: StateVector) -> dict:
    out: dict[str, Any] = {"amplitudes": [_cjson(a) for a in v.amplitudes]}
    if v.labels is not None:
        out["labels"] = list(v.labels)
    return out


@dataclass
class ExperimentReport:
    """Tabulated outcome of one scenario.

    ``scalars`` holds named real numbers specific to a scenario (transmitted
    norm, discard rate, CHSH value...) and ``tables`` holds lists of flat
    records such as a weak-value sweep or per-mode amplitudes.
    """

    name: str
    weak_values: list[WeakValueResult] = field(default_factory=list)
    abl: list[AblEntry] = field(default_factory=list)
    postselection_rate: float = 1.0
    fidelity: float | None = None
    conditional_state: StateVector | None = None
    notes: list[str] = field(default_factory=list)
    scalars: dict[str, float] = field(default_factory=dict)
    tables: dict[str, list[dict]] = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.postselection_rate):
            raise ValueError("postselection rate must be finite")
        if self.fidelity is not None and not -1e-12 <= self.fidelity <= 1 + 1e-12:
            raise ValueError(f"fidelity {self.fidelity} outside [0, 1]")
        for w in self.weak_values:
            if not np.isfinite(w.value):
                raise ValueError(f"non-finite weak value for {w.operator_name} at t={w.time}")

    def weak_value(self, operator: str, t: float) -> complex:
        for w in self.weak_values:
            if w.operator_name == operator and w.time == t:
                return w.value
        raise KeyError((operator, t))

    def abl_for(self, partition: str, t: float) -> AblDistribution:
        for entry in self.abl:
            if entry.partition == partition and entry.t == t:
                return entry.distribution
        raise KeyError((partition, t))

    def to_dict(self) -> dict:
        """JSON-ready results section; complex numbers become ``[re, im]``."""
        return {
            "weak_values": [
                {"operator": w.operator_name, "t": w.time, "value": _cjson(w.value)} for w in self.weak_values
            ],
            "abl": [
                {
                    "partition": e.partition,
                    "t": e.t,
                    "outcomes": list(e.distribution.outcome_labels),
                    "probabilities": list(e.distribution.probabilities),
                }
                for e in self.abl
            ],
            "postselection_rate": self.postselection_rate,
            "fidelity": self.fidelity,
            "conditional_state": None if self.conditional_state is None else state_to_dict(self.conditional_state),
            "scalars": dict(self.scalars),
            "tables": {k: [dict(r) for r in rows] for k, rows in self.tables.items()},
            "notes": list(self.notes),
        }


def tsv_report(
    name: str,
    tsv: TwoStateVector,
    partitions: Mapping[str, Sequence[Operator]],
    times: Sequence[float],
    observables: Mapping[str, Operator] | None = None,
    sweep_points: int | None = None,
) -> ExperimentReport:
    """Weak values, ABL tables and post-selection rates of a single-particle system.

    Weak values are reported for every basis projector ``P1..Pd`` and for each
    extra named observable at each of ``times``; ABL distributions for each
    named partition; the post-selection rate unconditioned and conditioned on
    every possible intermediate outcome. With ``sweep_points`` the basis
    projector weak values are also sampled uniformly over ``[t0, t_f]``.
    """
    dim = tsv.dim
    basis_ops = [box_projector(i + 1, dim) for i in range(dim)]
    ops = basis_ops + [
        Operator(op.matrix, op.flags, op_name) for op_name, op in (observables or {}).items()
    ]
    values = weak_value_sweep(tsv, ops, list(times))
    weak = [
        WeakValueResult(complex(values[i, j]), op.name, float(t))
        for i, t in enumerate(times)
        for j, op in enumerate(ops)
    ]

    abl = []
    conditional = []
    for pname, partition in partitions.items():
        labelled = [
            Operator(P.matrix, P.flags, P.name or f"{pname}[{k}]") for k, P in enumerate(partition)
        ]
        for t in times:
            abl.append(AblEntry(pname, float(t), abl_probabilities(tsv, labelled, t)))
            psi = forward_state(tsv, t).amplitudes
            for k, P in enumerate(labelled):
                born = float(np.linalg.norm(P.matrix @ psi) ** 2)
                if born < 1e-24:
                    continue
                rate = postselection_probability(tsv, Intermediate(labelled, k, t))
                conditional.append(
                    {"partition": pname, "t": float(t), "outcome": P.name, "born": born, "postselection_rate": rate}
                )

    notes = []
    if tsv.near_orthogonal:
        notes.append("pre- and post-selection are nearly orthogonal; weak values are ill-conditioned")
    for w in weak:
        if w.operator_name in {op.name for op in basis_ops}:
            z = w.value
            if abs(z.imag) > 1e-10 or z.real < -1e-10 or z.real > 1 + 1e-10:
                shown = f"{z.real:.6g}" if abs(z.imag) <= 1e-10 else f"{z.real:.6g}{z.imag:+.6g}i"
                notes.append(f"anomalous weak value <{w.operator_name}>_w = {shown} at t={w.time:.6g}")

    tables: dict[str, list[dict]] = {"conditional_postselection": conditional}
    if sweep_points is not None:
        if sweep_points < 1:
            raise ValueError("sweep_points must be positive")
        grid = np.linspace(tsv.t0, tsv.t_f, sweep_points)
        sweep = weak_value_sweep(tsv, basis_ops, list(grid))
        rows = []
        for t, row in zip(grid, sweep):
            record = {"eps_t": float(t)}
            for i, z in enumerate(row):
                record[f"reP{i + 1}w"] = float(z.real)
                record[f"imP{i + 1}w"] = float(z.imag)
            rows.append(record)
        tables["sweep"] = rows

    return ExperimentReport(
        name=name,
        weak_values=weak,
        abl=abl,
        postselection_rate=postselection_probability(tsv),
        notes=notes,
        tables=tables,
    )


def three_boxes_partitions() -> dict[str, list[Operator]]:
    parts = {f"box{k}_vs_rest": box_vs_rest(k) for k in (1, 2, 3)}
    parts["which_box"] = [box_projector(k) for k in (1, 2, 3)]
    return parts


def three_boxes() -> ExperimentReport:
    return tsv_report("three-boxes", three_boxes_system(), three_boxes_partitions(), [0.5])


def disappearing_observables() -> dict[str, Operator]:
    return {
        "P12": projector([basis_state(3, 0), basis_state(3, 1)], name="P12"),
        "X12": subspace_sigma_x(3, 0, 1, name="X12"),
    }


def disappearing_particle(sweep_points: int = 101) -> ExperimentReport:
    if sweep_points < 3:
        raise ValueError("sweep_points must be at least 3")
    return tsv_report(
        "disappearing",
        disappearing_system(),
        {f"box{k}_vs_rest": box_vs_rest(k) for k in (1, 2, 3)},
        [T1, T2, T3],
        observables=disappearing_observables(),
        sweep_points=sweep_points,
    )


# -- shutter protocols --------------------------------------------------------

PATH_STATUSES = ("probing", "reflected", "transmitted", "bypass")


@dataclass(frozen=True)
class SpacetimePath:
    box: int | None
    slot: str
    status: str

    def __post_init__(self):
        if self.status not in PATH_STATUSES:
            raise ValueError(f"unknown path status {self.status!r}")
        if self.status in ("reflected", "transmitted") and self.box is None:
            raise ValueError(f"a {self.status} path needs a box")
        if self.box is not None and self.box not in (1, 2, 3):
            raise ValueError(f"box must be 1, 2 or 3, got {self.box}")

    @property
    def label(self) -> str:
        kind = {"reflected": "r", "transmitted": "p", "probing": "p", "bypass": "b"}[self.status]
        return f"{kind}{self.box if self.box is not None else ''}@{self.slot}"


_COMBO_ITEM = re.compile(r"^\s*(t[123])\s*:\s*([123](?:\s*,\s*[123])*)\s*$")


@dataclass(frozen=True)
class PathCombination:
    """Boxes the probe photon is split over in each time slot that it visits."""

    slots: tuple[tuple[str, tuple[int, ...]], ...]

    def __init__(self, slots: Mapping[str, Iterable[int]] | Iterable[tuple[str, Iterable[int]]]):
        items = slots.items() if isinstance(slots, Mapping) else slots
        cleaned = {}
        for slot, boxes in items:
            if slot not in SLOT_TIMES:
                raise ValueError(f"unknown time slot {slot!r}; expected one of t1, t2, t3")
            if slot in cleaned:
                raise ValueError(f"slot {slot} given twice")
            boxes = tuple(sorted(set(int(b) for b in boxes)))
            if not boxes:
                raise ValueError(f"slot {slot} has no boxes")
            if not set(boxes) <= {1, 2, 3}:
                raise ValueError(f"slot {slot}: boxes must be within {{1, 2, 3}}, got {boxes}")
            cleaned[slot] = boxes
        if not cleaned:
            raise ValueError("a path combination needs at least one slot")
        ordered = tuple((s, cleaned[s]) for s in sorted(cleaned, key=SLOT_TIMES.get))
        object.__setattr__(self, "slots", ordered)

    @classmethod
    def parse(cls, text: str) -> PathCombination:
        """Parse ``"t1:1,3;t2:3;t3:2,3"``."""
        items = []
        for chunk in text.split(";"):
            if not chunk.strip():
                continue
            m = _COMBO_ITEM.match(chunk)
            if m is None:
                raise ValueError(f"cannot parse path combination item {chunk!r}")
            items.append((m.group(1), [int(b) for b in m.group(2).split(",")]))
        return cls(items)

    def __str__(self):
        return ";".join(f"{s}:{','.join(map(str, b))}" for s, b in self.slots)

    def as_dict(self) -> dict[str, tuple[int, ...]]:
        return dict(self.slots)


RESTORING_COMBINATION = PathCombination({"t1": (1, 3), "t2": (3,), "t3": (2, 3)})


@dataclass(frozen=True, eq=False)
class ShutterProbeSystem:
    shutter: StateVector
    photon: StateVector
    joint: StateVector
    mode_map: tuple[SpacetimePath, ...]

    def __post_init__(self):
        if self.joint.dim != self.shutter.dim * self.photon.dim:
            raise ValueError("joint dimension must be shutter dim times photon dim")
        if abs(self.joint.norm() - 1.0) > 1e-12:
            raise ValueError("joint state is not normalized")
        if len(self.mode_map) != self.photon.dim:
            raise ValueError("one spacetime path per photon mode required")


def _probe_modes(combo: PathCombination) -> tuple[list[SpacetimePath], np.ndarray, np.ndarray]:
    """Mode list plus split amplitudes on the transmitted and reflected families."""
    modes: list[SpacetimePath] = []
    split_t, split_r = [], []
    n_slots = len(combo.slots)
    for slot, boxes in combo.slots:
        amp = 1.0 / math.sqrt(n_slots * len(boxes))
        for b in boxes:
            modes.append(SpacetimePath(b, slot, "transmitted"))
            split_t.append(amp)
            split_r.append(0.0)
            modes.append(SpacetimePath(b, slot, "reflected"))
            split_t.append(0.0)
            split_r.append(amp)
    return modes, np.array(split_t, dtype=np.complex128), np.array(split_r, dtype=np.complex128)


def _contact(modes: Sequence[SpacetimePath], slot: str, shutter_dim: int) -> np.ndarray:
    """Permutation on shutter (x) photon swapping probe and reflected modes of occupied boxes."""
    m = len(modes)
    perm = np.arange(shutter_dim * m)
    index = {(p.box, p.slot, p.status): i for i, p in enumerate(modes)}
    for s in range(shutter_dim):
        box = s + 1
        key_t, key_r = (box, slot, "transmitted"), (box, slot, "reflected")
        if key_t in index:
            i, j = s * m + index[key_t], s * m + index[key_r]
            perm[i], perm[j] = j, i
    return np.eye(shutter_dim * m)[perm]


@dataclass(frozen=True, eq=False)
class _ShutterRun:
    system: ShutterProbeSystem
    conditional: np.ndarray  # unnormalized photon state after shutter post-selection
    split_t: np.ndarray
    split_r: np.ndarray
    norms: tuple[float, ...]

    @property
    def success(self) -> float:
        return float(np.vdot(self.conditional, self.conditional).real)

    @property
    def normalized(self) -> np.ndarray:
        return self.conditional / math.sqrt(self.success)

    def family_norm(self, status: str) -> float:
        mask = np.array([p.status == status for p in self.system.mode_map])
        return float(np.linalg.norm(self.normalized[mask]))

    def fidelity(self, target: np.ndarray) -> float:
        # Overlap with the split isometry image equals the overlap of the recombined state with the input mode.
        return float(abs(np.vdot(target, self.normalized)) ** 2)


def _run_shutter(
    pre: StateVector,
    post: StateVector,
    H: Operator,
    combo: PathCombination,
    slot_times: Mapping[str, float],
    t_f: float,
) -> _ShutterRun:
    modes, split_t, split_r = _probe_modes(combo)
    labels = [p.label for p in modes]
    photon = StateVector(split_t, labels)
    system = ShutterProbeSystem(pre, photon, tensor(pre, photon), tuple(modes))
    eye_photon = identity(len(modes))

    joint = system.joint.amplitudes
    now = 0.0
    norms = []
    for slot, _ in combo.slots:
        t = slot_times[slot]
        joint = tensor(unitary_of(H, t - now), eye_photon).matrix @ joint
        joint = _contact(modes, slot, pre.dim) @ joint
        norms.append(float(np.linalg.norm(joint)))
        now = t
    joint = tensor(unitary_of(H, t_f - now), eye_photon).matrix @ joint
    norms.append(float(np.linalg.norm(joint)))
    if max(abs(n - 1.0) for n in norms) > 1e-12:
        raise ArithmeticError(f"joint evolution did not conserve the norm: {norms}")

    conditional = post.amplitudes.conj() @ joint.reshape(pre.dim, len(modes))
    return _ShutterRun(system, conditional, split_t, split_r, tuple(norms))


def _mode_table(run: _ShutterRun) -> list[dict]:
    rows = []
    for p, amp in zip(run.system.mode_map, run.normalized):
        rows.append({"mode": p.label, "box": p.box, "slot": p.slot, "status": p.status, "re": float(amp.real), "im": float(amp.imag)})
    return rows


def shutter_three_boxes(post: StateVector | None = None) -> ExperimentReport:
    """Static shutter: the photon probes boxes 1 and 2 while the shutter sits in the three-box superposition."""
    pre, default_post = three_boxes_states()
    post = default_post if post is None else post.normalize()
    combo = PathCombination({"t1": (1, 2)})
    run = _run_shutter(pre, post, zeros(3), combo, {"t1": 0.5}, 1.0)
    labels = [p.label for p in run.system.mode_map]
    return ExperimentReport(
        name="shutter",
        postselection_rate=run.success,
        fidelity=run.fidelity(run.split_r),
        conditional_state=StateVector(run.normalized, labels),
        scalars={
            "transmitted_norm": run.family_norm("transmitted"),
            "reflected_norm": run.family_norm("reflected"),
            "success_probability": run.success,
        },
        tables={"modes": _mode_table(run)},
    )


def _disappearing_run(combo: PathCombination) -> _ShutterRun:
    pre, post = disappearing_states()
    return _run_shutter(pre, post, tunnelling_hamiltonian(), combo, SLOT_TIMES, T_F)


def temporal_shutter(combo: PathCombination = RESTORING_COMBINATION) -> ExperimentReport:
    """Photon split in time and space over the boxes of the disappearing particle.

    Success means every part of the photon is reflected: the recombined
    reflected light is compared with the initial photon mode.
    """
    run = _disappearing_run(combo)
    labels = [p.label for p in run.system.mode_map]
    return ExperimentReport(
        name="temporal-shutter",
        postselection_rate=run.success,
        fidelity=run.fidelity(run.split_r),
        conditional_state=StateVector(run.normalized, labels),
        scalars={
            "transmitted_norm": run.family_norm("transmitted"),
            "reflected_norm": run.family_norm("reflected"),
            "success_probability": run.success,
        },
        tables={"modes": _mode_table(run)},
        notes=[f"combination {combo}"],
    )


def empty_box_probe(combo: PathCombination) -> ExperimentReport:
    """Photon sent through boxes expected to be empty; success means undisturbed transmission."""
    run = _disappearing_run(combo)
    labels = [p.label for p in run.system.mode_map]
    transmitted = run.family_norm("transmitted")
    scalars = {
        "transmitted_norm": transmitted,
        "reflected_norm": run.family_norm("reflected"),
        "transmission_probability": transmitted**2,
        "success_probability": run.success,
    }
    if transmitted > 1e-12:
        mask = np.array([p.status == "transmitted" for p in run.system.mode_map])
        passed = np.where(mask, run.normalized, 0)
        scalars["fidelity_given_transmission"] = float(abs(np.vdot(run.split_t, passed)) ** 2 / transmitted**2)
    return ExperimentReport(
        name="empty-box",
        postselection_rate=run.success,
        fidelity=run.fidelity(run.split_t),
        conditional_state=StateVector(run.normalized, labels),
        scalars=scalars,
        tables={"modes": _mode_table(run)},
        notes=[f"combination {combo}"],
    )


def crossed_interferometers() -> ExperimentReport:
    """Two two-arm interferometers whose arms cross pairwise (arm 1 with arm 1, arm 2 with arm 2).

    Branches in which the particles take non-crossing arms reach the outer
    detectors and are discarded; the silent branches are kept.
    """
    splitter = np.array([[1, -1], [1, 1]]) / math.sqrt(2)  # input mode 0 -> (|1> + |2>)/sqrt2
    single = StateVector(splitter @ np.array([1, 0]), ("1", "2"))
    joint = tensor(single, single)
    crossing = projector([basis_state(4, 0), basis_state(4, 3)], name="crossed")
    kept = crossing.matrix @ joint.amplitudes
    keep_prob = float(np.vdot(kept, kept).real)
    conditional = StateVector(kept / math.sqrt(keep_prob), joint.labels)
    result = bell.optimize_chsh(conditional)
    return ExperimentReport(
        name="crossed-ifm",
        postselection_rate=keep_prob,
        conditional_state=conditional,
        scalars={"discard_rate": 1.0 - keep_prob, "chsh": result.S},
        tables={"chsh_settings": _settings_table(result)},
    )


def _settings_table(result: bell.ChshResult) -> list[dict]:
    names = ("a", "a'", "b", "b'")
    return [{"setting": n, "theta": s.theta, "phi": s.phi} for n, s in zip(names, result.settings)]


def quantum_liar(emission_amplitude: float = 1 / math.sqrt(2)) -> ExperimentReport:
    """Two atoms, the first excited; its photon, if emitted, is absorbed by the second.

    Registers: atom 1, atom 2 (index 0 = ``|e>``, 1 = ``|g>``) and the photon
    field (0 or 1 quanta). Emission rotates ``|e g 0>`` into ``|g g 1>`` with
    amplitude ``emission_amplitude``; absorption then swaps ``|g g 1>`` with
    ``|g e 0>``. The field ends in vacuum and is dropped.
    """
    beta = float(emission_amplitude)
    if not 0.0 < beta < 1.0:
        raise ValueError("emission_amplitude must lie strictly between 0 and 1")
    alpha = math.sqrt(1.0 - beta * beta)

    def idx(a1, a2, n):
        return 4 * a1 + 2 * a2 + n

    emit = np.eye(8)
    i, j = idx(0, 1, 0), idx(1, 1, 1)
    emit[np.ix_([i, j], [i, j])] = [[alpha, -beta], [beta, alpha]]
    absorb = np.eye(8)
    k, m = idx(1, 1, 1), idx(1, 0, 0)
    absorb[[k, m]] = absorb[[m, k]]
    psi = absorb @ emit @ basis_state(8, idx(0, 1, 0)).amplitudes
    field = psi.reshape(4, 2)
    if np.linalg.norm(field[:, 1]) > 1e-12:
        raise ArithmeticError("photon left unabsorbed")
    atoms = StateVector(field[:, 0], ("e⊗e", "e⊗g", "g⊗e", "g⊗g")).normalize()
    result = bell.optimize_chsh(atoms)
    p_excited = float(np.sum(np.abs(atoms.amplitudes[:2]) ** 2))
    return ExperimentReport(
        name="quantum-liar",
        postselection_rate=1.0,
        conditional_state=atoms,
        scalars={"chsh": result.S, "p_atom1_excited": p_excited, "emission_amplitude": beta},
        tables={"chsh_settings": _settings_table(result)},
    )
