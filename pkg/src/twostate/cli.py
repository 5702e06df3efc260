"""Command-line entry point.

    twostate run three-boxes --format json
    twostate run temporal-shutter --combo "t1:1,3;t2:3;t3:2,3"
    twostate run custom --spec system.json --sweep 50 --format csv
    twostate mc disappearing --trials 1000000 --seed 7
    twostate chsh --state eq8

Exit codes: 0 success, 2 usage error, 3 invalid spec file, 4 empty
post-selected ensemble.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bell, experiments, montecarlo
from .experiments import ExperimentReport, PathCombination
from .specfile import ReportFile, SpecError, parse_amplitudes, parse_spec
from .tsvf import abl_probabilities

EXIT_OK, EXIT_USAGE, EXIT_SPEC, EXIT_EMPTY = 0, 2, 3, 4
OUTPUT_DIR_ENV = "TWOSTATE_OUTPUT_DIR"

RUN_NAMES = ("three-boxes", "disappearing", "shutter", "temporal-shutter", "empty-box", "crossed-ifm", "quantum-liar", "custom")
MC_NAMES = ("three-boxes", "disappearing", "custom")
DEFAULT_SWEEP = 101
DEFAULT_EMPTY_BOX = "t2:1,2"


class UsageError(Exception):
    pass


def preset_spec_text(name: str) -> str:
    """Checked-in spec file equivalent to a single-particle preset."""
    filename = {"three-boxes": "three_boxes.json", "disappearing": "disappearing.json"}[name]
    return resources.files("twostate").joinpath("specs", filename).read_text()


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    if isinstance(x, complex):
        return f"{x.real:.10g}{x.imag:+.10g}i"
    return str(x)


def _render_table(report: ReportFile) -> str:
    res = report.results
    out = [f"experiment: {report.experiment}"]
    for k, v in report.parameters.items():
        out.append(f"  {k}: {_fmt(v)}")
    for key in ("postselection_rate", "fidelity"):
        if res.get(key) is not None:
            out.append(f"{key}: {_fmt(res[key])}")
    for k, v in res.get("scalars", {}).items():
        out.append(f"{k}: {_fmt(v)}")
    if res.get("weak_values"):
        out.append("weak values:")
        for w in res["weak_values"]:
            out.append(f"  <{w['operator']}>_w  t={_fmt(w['t'])}  {_fmt(complex(*w['value']))}")
    if res.get("abl"):
        out.append("ABL probabilities:")
        for e in res["abl"]:
            probs = ", ".join(f"{o}={_fmt(p)}" for o, p in zip(e["outcomes"], e["probabilities"]))
            out.append(f"  {e['partition']}  t={_fmt(e['t'])}  {probs}")
    if res.get("conditional_state"):
        out.append("conditional state:")
        cs = res["conditional_state"]
        labels = cs.get("labels") or [str(i) for i in range(len(cs["amplitudes"]))]
        for lab, amp in zip(labels, cs["amplitudes"]):
            out.append(f"  {lab}: {_fmt(complex(*amp))}")
    for name, rows in res.get("tables", {}).items():
        if not rows:
            continue
        out.append(f"{name}:")
        cols = list(rows[0])
        out.append("  " + "  ".join(cols))
        for row in rows:
            out.append("  " + "  ".join(_fmt(row[c]) for c in cols))
    for note in res.get("notes", []):
        out.append(f"note: {note}")
    return "\n".join(out) + "\n"


def _primary_rows(res: dict) -> list[dict]:
    tables = res.get("tables", {})
    for key in ("sweep", "modes", "estimates"):
        if tables.get(key):
            return tables[key]
    if res.get("weak_values"):
        return [
            {"operator": w["operator"], "t": w["t"], "re": w["value"][0], "im": w["value"][1]}
            for w in res["weak_values"]
        ]
    return [{"quantity": k, "value": v} for k, v in res.get("scalars", {}).items()]


def _render_csv(report: ReportFile) -> str:
    rows = _primary_rows(report.results)
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def render(report: ReportFile, fmt: str) -> str:
    if fmt == "json":
        return report.to_json()
    if fmt == "csv":
        return _render_csv(report)
    return _render_table(report)


def _load_spec(path: str):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise SpecError(path, f"cannot read spec file: {exc.strerror}") from None
    return parse_spec(data)


def _combo(text: str | None, default) -> PathCombination:
    if text is None:
        return default
    try:
        return PathCombination.parse(text)
    except ValueError as exc:
        raise UsageError(f"--combo: {exc}") from None


def _single_particle(args):
    """(name, tsv, partitions, times, observables, sweep) for tsv-based experiments."""
    if args.experiment == "custom":
        if not args.spec:
            raise UsageError("run custom requires --spec <file>")
        spec = _load_spec(args.spec)
        sweep = args.sweep if args.sweep is not None else spec.sweep_points
        return spec.name, spec.to_tsv(), spec.partitions, list(spec.measurement_times), spec.observables, sweep
    if args.experiment == "three-boxes":
        return "three-boxes", experiments.three_boxes_system(), experiments.three_boxes_partitions(), [0.5], {}, args.sweep
    sweep = args.sweep if args.sweep is not None else DEFAULT_SWEEP
    parts = {f"box{k}_vs_rest": experiments.box_vs_rest(k) for k in (1, 2, 3)}
    times = [experiments.T1, experiments.T2, experiments.T3]
    return "disappearing", experiments.disappearing_system(), parts, times, experiments.disappearing_observables(), sweep


def _run(args) -> ReportFile:
    name = args.experiment
    params: dict = {}
    if name in ("three-boxes", "disappearing", "custom"):
        label, tsv, parts, times, obs, sweep = _single_particle(args)
        if name == "disappearing" and sweep < 3:
            raise UsageError("--sweep must be at least 3 for the disappearing particle")
        report = experiments.tsv_report(label, tsv, parts, times, obs, sweep)
        params = {"sweep_points": sweep} if sweep is not None else {}
        if name == "custom":
            params["spec"] = args.spec
    elif name == "shutter":
        report = experiments.shutter_three_boxes()
    elif name == "temporal-shutter":
        combo = _combo(args.combo, experiments.RESTORING_COMBINATION)
        report = experiments.temporal_shutter(combo)
        params = {"combo": str(combo)}
    elif name == "empty-box":
        combo = _combo(args.combo, PathCombination.parse(DEFAULT_EMPTY_BOX))
        report = experiments.empty_box_probe(combo)
        params = {"combo": str(combo)}
    elif name == "crossed-ifm":
        report = experiments.crossed_interferometers()
    else:
        beta = args.emission_amplitude
        if not 0 < beta < 1:
            raise UsageError("--emission-amplitude must lie strictly between 0 and 1")
        report = experiments.quantum_liar(beta)
        params = {"emission_amplitude": beta}
    return ReportFile(name, params, report.to_dict())


def _mc(args) -> ReportFile:
    label, tsv, parts, times, _, _ = _single_particle(args)
    seed, trials = args.seed, args.trials
    if trials < montecarlo.MIN_TRIALS:
        raise UsageError(f"--trials must be at least {montecarlo.MIN_TRIALS}")
    overall = montecarlo.estimate_postselection_rate(tsv, None, trials, seed, workers=args.workers)
    rows = [{
        "partition": "none", "t": None, "outcome": None, "frequency": None, "stderr": None, "abl": None,
        "postselection_rate": overall.postselection_rate, "rate_stderr": overall.postselection_rate_error,
    }]
    runs = []
    for pname, partition in parts.items():
        for t in times:
            stats = montecarlo.estimate_conditional(tsv, partition, t, trials, seed, workers=args.workers)
            exact = abl_probabilities(tsv, partition, t).probabilities
            runs.append({"partition": pname, "t": t, **stats.to_dict(), "abl": list(exact)})
            freqs, errs = stats.conditional_frequencies, stats.standard_errors
            for k, lab in enumerate(stats.outcome_labels):
                n = stats.outcome_counts[k]
                rate = stats.postselected_outcome_counts[k] / n if n else None
                rows.append({
                    "partition": pname, "t": t, "outcome": lab,
                    "frequency": float(freqs[k]), "stderr": float(errs[k]), "abl": exact[k],
                    "postselection_rate": rate,
                    "rate_stderr": None if rate is None else math.sqrt(rate * (1 - rate) / n),
                })
    results = {
        "postselection": overall.to_dict(),
        "conditional": runs,
        "tables": {"estimates": rows},
        "scalars": {"postselection_rate": overall.postselection_rate},
    }
    return ReportFile(
        label if args.experiment == "custom" else args.experiment,
        {"trials": trials, "seed": seed},
        results,
        rng={"seed": seed, "generator": montecarlo.GENERATOR},
    )


_STATES = {
    "eq8": np.array([1, 0, 0, 1]) / math.sqrt(2),
    "eq9": np.array([0, 1, 1, 0]) / math.sqrt(2),
}


def _chsh(args) -> ReportFile:
    if args.state in _STATES:
        amps = _STATES[args.state]
    else:
        try:
            raw = Path(args.state).read_text()
        except OSError as exc:
            raise SpecError(args.state, f"cannot read state file: {exc.strerror}") from None
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SpecError(f"{args.state}:{exc.lineno}:{exc.colno}", exc.msg, exc.lineno) from None
        if isinstance(doc, dict):
            extra = set(doc) - {"amplitudes"}
            if extra or "amplitudes" not in doc:
                raise SpecError("amplitudes", "state file must hold {'amplitudes': [[re, im] x 4]}")
            doc = doc["amplitudes"]
        amps = parse_amplitudes(doc, 4, "amplitudes")
        amps = amps / np.linalg.norm(amps)
    result = bell.optimize_chsh(amps)
    names = ("a", "a'", "b", "b'")
    results = {
        "scalars": {"chsh": result.S, "tsirelson_bound": bell.TSIRELSON},
        "tables": {
            "settings": [
                {"setting": n, "theta": s.theta, "phi": s.phi, "correlator": e}
                for n, s, e in zip(names, result.settings, (*result.correlators,))
            ]
        },
    }
    return ReportFile("chsh", {"state": args.state}, results)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("json", "csv", "table"), default="table")
    fmt.add_argument("--output", help=f"write here instead of stdout (relative paths resolve against ${OUTPUT_DIR_ENV} when set)")

    parser = argparse.ArgumentParser(prog="twostate", description="Pre- and post-selected quantum experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[fmt], help="run a preset experiment or a spec file")
    run.add_argument("experiment", choices=RUN_NAMES)
    run.add_argument("--spec", help="JSON spec file (for 'custom')")
    run.add_argument("--sweep", type=int, help="weak-value sweep points")
    run.add_argument("--combo", help='path combination, e.g. "t1:1,3;t2:3;t3:2,3"')
    run.add_argument("--emission-amplitude", type=float, default=1 / math.sqrt(2))

    mc = sub.add_parser("mc", parents=[fmt], help="Monte Carlo estimates for a single-particle experiment")
    mc.add_argument("experiment", choices=MC_NAMES)
    mc.add_argument("--spec")
    mc.add_argument("--trials", type=int, default=100_000)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--workers", type=int, default=1)
    mc.add_argument("--sweep", type=int, help=argparse.SUPPRESS)

    ch = sub.add_parser("chsh", parents=[fmt], help="optimal CHSH value of a two-qubit state")
    ch.add_argument("--state", default="eq8", help="eq8 = (|11>+|22>)/sqrt2, eq9 = (|eg>+|ge>)/sqrt2, or a JSON file of four [re, im] amplitudes")
    return parser


def _destination(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "run":
            report = _run(args)
        elif args.command == "mc":
            report = _mc(args)
        else:
            report = _chsh(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"twostate: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpecError as exc:
        print(f"twostate: invalid spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except montecarlo.EmptyEnsembleError as exc:
        print(f"twostate: empty ensemble: {exc}", file=sys.stderr)
        return EXIT_EMPTY

    text = render(report, args.format)
    if args.output:
        dest = _destination(args.output)
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
