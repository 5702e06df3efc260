"""JSON experiment specifications and report files.

A spec file describes a single-particle pre/post-selected system::

    {
      "schema_version": "1",
      "name": "three-boxes",
      "dim": 3,
      "pre":  [[0.577, 0], [0.577, 0], [0.577, 0]],
      "post": [[0.577, 0], [0.577, 0], [-0.577, 0]],
      "hamiltonian": [[[0, 0], [0, 0], [0, 0]], ...],
      "t_f": 1.0,
      "measurement_times": [0.5],
      "partitions": {"box1_vs_rest": [{"name": "P1", "indices": [0]}, [1, 2]]},
      "observables": {"X12": [[...]]},
      "sweep_points": 101
    }

Complex numbers are ``[re, im]`` pairs. A projector is a list of basis
indices, an explicit matrix, or an object ``{"name", "indices" | "matrix"}``.
``name``, ``observables`` and ``sweep_points`` are optional; any other
unknown key is rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .hilbert import HERMITIAN, Operator, StateVector, basis_state, projector, settings
from .tsvf import TwoStateVector, validate_partition

__all__ = [
    "SCHEMA_VERSION",
    "SpecError",
    "ExperimentSpecFile",
    "ReportFile",
    "parse_spec",
    "parse_amplitudes",
    "spec_to_dict",
]

SCHEMA_VERSION = "1"

_REQUIRED = ("schema_version", "dim", "pre", "post", "hamiltonian", "t_f", "measurement_times", "partitions")
_OPTIONAL = ("name", "observables", "sweep_points")


class SpecError(ValueError):
    """Invalid specification; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str, line: int | None = None):
        self.path = path
        self.line = line
        where = f"{path}" + (f" (line {line})" if line is not None else "")
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True, eq=False)
class ExperimentSpecFile:
    dim: int
    pre: np.ndarray
    post: np.ndarray
    hamiltonian: np.ndarray
    t_f: float
    measurement_times: tuple[float, ...]
    partitions: dict[str, list[Operator]]
    observables: dict[str, Operator] = field(default_factory=dict)
    name: str = "custom"
    sweep_points: int | None = None
    schema_version: str = SCHEMA_VERSION

    def to_tsv(self) -> TwoStateVector:
        return TwoStateVector(
            StateVector(self.pre),
            StateVector(self.post),
            Operator(self.hamiltonian, {HERMITIAN}, "H"),
            0.0,
            self.t_f,
        )


def _reject_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise SpecError(k, "duplicate key")
        out[k] = v
    return out


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _complex(value, path: str) -> complex:
    if not (isinstance(value, list) and len(value) == 2 and all(_is_number(v) for v in value)):
        raise SpecError(path, f"expected a [re, im] pair of finite numbers, got {value!r}")
    return complex(float(value[0]), float(value[1]))


def parse_amplitudes(value, dim: int, path: str) -> np.ndarray:
    if not isinstance(value, list):
        raise SpecError(path, "expected a list of [re, im] pairs")
    if len(value) != dim:
        raise SpecError(path, f"expected {dim} amplitudes, got {len(value)}")
    vec = np.array([_complex(v, f"{path}[{i}]") for i, v in enumerate(value)], dtype=np.complex128)
    if np.linalg.norm(vec) == 0:
        raise SpecError(path, "state vector is zero")
    return vec


def _matrix(value, dim: int, path: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != dim:
        raise SpecError(path, f"expected {dim} rows")
    rows = []
    for r, row in enumerate(value):
        if not isinstance(row, list) or len(row) != dim:
            raise SpecError(f"{path}[{r}]", f"expected {dim} entries")
        rows.append([_complex(x, f"{path}[{r}][{c}]") for c, x in enumerate(row)])
    return np.array(rows, dtype=np.complex128)


def _check_hermitian(mat: np.ndarray, path: str) -> None:
    bad = np.argwhere(np.abs(mat - mat.conj().T) > settings.validation_tol)
    if len(bad):
        r, c = (int(x) for x in bad[0])
        raise SpecError(f"{path}[{r}][{c}]", f"matrix is not hermitian: entry ({r}, {c}) != conj of ({c}, {r})")


def _projector(value, dim: int, path: str) -> Operator:
    name = None
    if isinstance(value, dict):
        extra = set(value) - {"name", "indices", "matrix"}
        if extra:
            raise SpecError(f"{path}.{sorted(extra)[0]}", "unknown field")
        name = value.get("name")
        if name is not None and not isinstance(name, str):
            raise SpecError(f"{path}.name", "expected a string")
        if ("indices" in value) == ("matrix" in value):
            raise SpecError(path, "give exactly one of 'indices' or 'matrix'")
        key = "indices" if "indices" in value else "matrix"
        value, path = value[key], f"{path}.{key}"
    if not isinstance(value, list) or not value:
        raise SpecError(path, "projector must be a nonempty list of indices or a matrix")
    if all(isinstance(i, int) and not isinstance(i, bool) for i in value):
        if len(set(value)) != len(value):
            raise SpecError(path, "repeated basis index")
        for k, i in enumerate(value):
            if not 0 <= i < dim:
                raise SpecError(f"{path}[{k}]", f"basis index {i} out of range for dim {dim}")
        auto = "P" + "".join(str(i + 1) for i in sorted(value))
        return projector([basis_state(dim, i) for i in sorted(value)], name=name or auto)
    mat = _matrix(value, dim, path)
    _check_hermitian(mat, path)
    if not np.allclose(mat @ mat, mat, atol=settings.validation_tol, rtol=0):
        raise SpecError(path, "matrix is not idempotent")
    return Operator(mat, {"projector", HERMITIAN}, name)


def _real(value, path: str) -> float:
    if not _is_number(value):
        raise SpecError(path, f"expected a finite number, got {value!r}")
    return float(value)


def parse_spec(data: bytes | str) -> ExperimentSpecFile:
    """Strictly parse and validate a JSON spec; raises :class:`SpecError`."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        raw = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise SpecError(f"<document>:{exc.lineno}:{exc.colno}", exc.msg, exc.lineno) from None
    if not isinstance(raw, dict):
        raise SpecError("<document>", "top level must be an object")
    for key in raw:
        if key not in _REQUIRED and key not in _OPTIONAL:
            raise SpecError(key, "unknown field")
    for key in _REQUIRED:
        if key not in raw:
            raise SpecError(key, "missing required field")

    if raw["schema_version"] != SCHEMA_VERSION:
        raise SpecError("schema_version", f"unsupported version {raw['schema_version']!r}; expected {SCHEMA_VERSION!r}")
    dim = raw["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or not 1 <= dim <= 64:
        raise SpecError("dim", "expected an integer between 1 and 64")
    pre = parse_amplitudes(raw["pre"], dim, "pre")
    post = parse_amplitudes(raw["post"], dim, "post")
    H = _matrix(raw["hamiltonian"], dim, "hamiltonian")
    _check_hermitian(H, "hamiltonian")
    t_f = _real(raw["t_f"], "t_f")
    if t_f <= 0:
        raise SpecError("t_f", "must be positive")

    times = raw["measurement_times"]
    if not isinstance(times, list) or not times:
        raise SpecError("measurement_times", "expected a nonempty list")
    parsed_times = []
    for i, t in enumerate(times):
        t = _real(t, f"measurement_times[{i}]")
        if not 0 <= t <= t_f:
            raise SpecError(f"measurement_times[{i}]", f"{t} outside [0, t_f={t_f}]")
        parsed_times.append(t)

    parts = raw["partitions"]
    if not isinstance(parts, dict) or not parts:
        raise SpecError("partitions", "expected a nonempty object of named projector lists")
    partitions = {}
    for pname, plist in parts.items():
        path = f"partitions.{pname}"
        if not isinstance(plist, list) or not plist:
            raise SpecError(path, "expected a nonempty list of projectors")
        ops = [_projector(p, dim, f"{path}[{k}]") for k, p in enumerate(plist)]
        try:
            validate_partition(ops, dim)
        except ValueError as exc:
            raise SpecError(path, str(exc)) from None
        partitions[pname] = ops

    observables = {}
    obs = raw.get("observables", {})
    if not isinstance(obs, dict):
        raise SpecError("observables", "expected an object of named matrices")
    for oname, mat in obs.items():
        m = _matrix(mat, dim, f"observables.{oname}")
        observables[oname] = Operator(m, frozenset(), oname)

    sweep = raw.get("sweep_points")
    if sweep is not None and (not isinstance(sweep, int) or isinstance(sweep, bool) or sweep < 1):
        raise SpecError("sweep_points", "expected a positive integer")
    name = raw.get("name", "custom")
    if not isinstance(name, str):
        raise SpecError("name", "expected a string")

    spec = ExperimentSpecFile(
        dim=dim,
        pre=pre,
        post=post,
        hamiltonian=H,
        t_f=t_f,
        measurement_times=tuple(parsed_times),
        partitions=partitions,
        observables=observables,
        name=name,
        sweep_points=sweep,
    )
    try:
        spec.to_tsv()
    except ValueError as exc:
        raise SpecError("post", str(exc)) from None
    return spec


def _pairs(vec) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in vec]


def spec_to_dict(
    name: str,
    tsv: TwoStateVector,
    times,
    partitions: dict[str, list[Operator]],
    observables: dict[str, Operator] | None = None,
    sweep_points: int | None = None,
) -> dict:
    """Spec-file document for an in-memory system (inverse of :func:`parse_spec`)."""
    out: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "dim": tsv.dim,
        "pre": _pairs(tsv.pre.amplitudes),
        "post": _pairs(tsv.post.amplitudes),
        "hamiltonian": [_pairs(row) for row in tsv.hamiltonian.matrix],
        "t_f": tsv.t_f,
        "measurement_times": [float(t) for t in times],
        "partitions": {
            pname: [{"name": P.name, "matrix": [_pairs(r) for r in P.matrix]} for P in ops]
            for pname, ops in partitions.items()
        },
    }
    if observables:
        out["observables"] = {k: [_pairs(r) for r in op.matrix] for k, op in observables.items()}
    if sweep_points is not None:
        out["sweep_points"] = sweep_points
    return out


@dataclass(frozen=True)
class ReportFile:
    """Machine-readable envelope around a results section."""

    experiment: str
    parameters: dict
    results: dict
    rng: dict | None = None
    schema_version: str = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "parameters": self.parameters,
            "results": self.results,
            "rng": self.rng,
        }

    def to_json(self) -> str:
        # repr-based float formatting is the shortest string that round-trips binary64
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> ReportFile:
        raw = json.loads(text)
        return cls(
            experiment=raw["experiment"],
            parameters=raw["parameters"],
            results=raw["results"],
            rng=raw.get("rng"),
            schema_version=raw["schema_version"],
        )
