"""Command-line front end: ``pctscm graph-check | estimate | adjust | simulate``.

Exit codes: 0 success, 1 analysis refusal, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from .adjustment import AdjustmentQuery, backdoor_adjust, dataset_table
from .data import (
    OUTCOME,
    PRESCRIBED,
    RECEIVED,
    DatasetSchema,
    TrialDataset,
    complete_cases,
    load_dataset,
    schema_sidecar,
    tabulate,
    write_dataset,
)
from .errors import AnalysisError, CycleError, InputError, PctError
from .estimators import (
    HR_METHODS,
    EffectEstimate,
    Protocol,
    ProtocolSpec,
    event_probability,
    hazard_ratio,
    odds_ratio,
    risk_ratio,
)
from .graph import (
    CausalDag,
    NodeRole,
    graph_from_dict,
    is_backdoor_admissible,
    open_backdoor_paths,
    pct_role_violations,
)
from .scm import params_from_dict
from .simulator import simulate

EXIT_OK, EXIT_REFUSED, EXIT_INPUT = 0, 1, 2

METRICS = ("prob", "rr", "or", "hr")
METRIC_NAMES = {"rr": "RR", "or": "OR", "hr": "HR"}


# --- shared loaders --------------------------------------------------------


def _read_json(path) -> object:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _load_data(path, schema_path=None, event=None, treatment=None, reference=None) -> TrialDataset:
    schema = None
    if schema_path is None and schema_sidecar(path).exists():
        schema_path = schema_sidecar(path)
    if schema_path is not None:
        schema = DatasetSchema.from_dict(_read_json(schema_path))
    try:
        d = load_dataset(path, schema)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    s = d.schema
    overrides = {k: v for k, v in (("event", event), ("treatment", treatment), ("reference", reference)) if v}
    if overrides:
        s = replace(s, **overrides)
    if s.event is None:
        raise InputError("no event label: pass --event or declare one in the schema")
    # default comparison: first declared arm against the next one
    treatment = s.treatment or next((x for x in s.arm_labels if x != s.reference), None)
    reference = s.reference or next((x for x in s.arm_labels if x != treatment), None)
    if treatment is None or reference is None:
        raise InputError("need two arm labels to compare")
    s = replace(s, treatment=treatment, reference=reference)
    return d.with_schema(s) if s != d.schema else d


# --- graph-check -----------------------------------------------------------


def cmd_graph_check(args) -> int:
    doc = _read_json(args.graph)
    out = []
    try:
        g = graph_from_dict(doc)
    except CycleError as exc:
        out.append("acyclic: FAIL (cycle " + " -> ".join(exc.cycle) + ")")
        out.append("result: FAIL")
        print("\n".join(out))
        return EXIT_REFUSED
    ok = True
    out.append("acyclic: pass")
    problems = pct_role_violations(g)
    if problems:
        ok = False
        out.append("roles: FAIL")
        out.extend(f"  - {p}" for p in problems)
    else:
        out.append("roles: pass")
    received = g.nodes_with_role(NodeRole.TREATMENT_RECEIVED)
    outcome = g.nodes_with_role(NodeRole.OUTCOME)
    if len(received) == 1 and len(outcome) == 1:
        xr, y = received[0], outcome[0]
        zs = [n for n in g.nodes if g.roles[n] is NodeRole.ADHERENCE_COVARIATE]
        shown = "{" + ", ".join(zs) + "}"
        if is_backdoor_admissible(g, xr, y, set(zs)):
            out.append(f"backdoor {xr} -> {y} given {shown}: admissible")
        else:
            ok = False
            out.append(f"backdoor {xr} -> {y} given {shown}: NOT admissible")
            for p in open_backdoor_paths(g, {xr}, y, set(zs)):
                out.append("  open path: " + _path_str(g, p))
    else:
        ok = False
        out.append("backdoor: skipped (needs one received-treatment and one outcome node)")
    out.append("result: " + ("pass" if ok else "FAIL"))
    print("\n".join(out))
    return EXIT_OK if ok else EXIT_REFUSED


def _path_str(g: CausalDag, path) -> str:
    parts = [path[0]]
    for u, v in zip(path, path[1:]):
        parts.append(("-> " if (u, v) in g.edges else "<- ") + v)
    return " ".join(parts)


# --- estimate --------------------------------------------------------------


@dataclass
class ReportCell:
    row: str
    protocol: str
    estimate: EffectEstimate | None = None
    error: str | None = None
    footnote: int | None = None


@dataclass
class ReportTable:
    title: str
    rows: list[str]
    protocols: list[str]
    precision: int
    cells: dict[tuple[str, str], ReportCell] = field(default_factory=dict)
    footnotes: list[str] = field(default_factory=list)

    def add_failure(self, row, protocol, message):
        self.footnotes.append(f"{row} {protocol}: {message}")
        self.cells[row, protocol] = ReportCell(row, protocol, error=message, footnote=len(self.footnotes))

    def text(self, cell: ReportCell) -> str:
        if cell.estimate is not None:
            return cell.estimate.render(self.precision)
        return f"-[{cell.footnote}]"

    def render_text(self) -> str:
        grid = [["", *self.protocols]]
        for r in self.rows:
            grid.append([r, *(self.text(self.cells[r, p]) for p in self.protocols)])
        widths = [max(len(line[i]) for line in grid) for i in range(len(grid[0]))]
        lines = [self.title, ""]
        for line in grid:
            first = line[0].ljust(widths[0])
            rest = [c.rjust(w) for c, w in zip(line[1:], widths[1:])]
            lines.append("  ".join([first, *rest]).rstrip())
        if self.footnotes:
            lines.append("")
            lines.extend(f"[{i}] {msg}" for i, msg in enumerate(self.footnotes, start=1))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        cells = []
        for r in self.rows:
            for p in self.protocols:
                c = self.cells[r, p]
                entry = {"row": r, "protocol": p}
                if c.estimate is not None:
                    entry.update(value=c.estimate.render(self.precision), exact=str(c.estimate.value))
                else:
                    entry.update(value=None, error=c.error, footnote=c.footnote)
                cells.append(entry)
        return {"title": self.title, "precision": self.precision, "cells": cells, "footnotes": self.footnotes}

    @property
    def n_failed(self) -> int:
        return sum(c.estimate is None for c in self.cells.values())


def build_report(
    d: TrialDataset,
    protocols,
    metrics,
    precision: int = 2,
    paper_rounding: bool = False,
    haldane: bool = False,
    horizon: int | None = None,
    hr_method: str = "mantel-haenszel",
) -> ReportTable:
    s = d.schema
    a, b, e = s.treatment, s.reference, s.event
    mode = f"arm probabilities rounded to {precision} places first" if paper_rounding else "exact, rounded once"
    title = f"{a} vs {b}, event {e} ({mode})"
    rows = []
    if "prob" in metrics:
        rows += [f"P({e}|{a})", f"P({e}|{b})"]
    rows += [METRIC_NAMES[m] for m in METRICS if m != "prob" and m in metrics]
    table = ReportTable(title, rows, [p.value for p in protocols], precision)
    inter = precision if paper_rounding else None
    cols = [PRESCRIBED, RECEIVED, OUTCOME]
    observed = (d.codes(PRESCRIBED) >= 0) & (d.codes(RECEIVED) >= 0) & (d.codes(OUTCOME) >= 0)
    counts = tabulate(d.select(observed), cols)
    if horizon is None and "hr" in metrics:
        times = d.event_time[d.event_time >= 0]
        horizon = int(times.max()) if times.size else 0
    for proto in protocols:
        spec = ProtocolSpec(proto, a, b, e)
        jobs = []
        if "prob" in metrics:
            jobs += [(f"P({e}|{a})", lambda s=spec: event_probability(counts, s, a))]
            jobs += [(f"P({e}|{b})", lambda s=spec: event_probability(counts, s, b))]
        if "rr" in metrics:
            jobs.append(("RR", lambda s=spec: risk_ratio(counts, s, inter)))
        if "or" in metrics:
            jobs.append(("OR", lambda s=spec: odds_ratio(counts, s, inter, haldane=haldane)))
        if "hr" in metrics:
            jobs.append(("HR", lambda s=spec: hazard_ratio(d, s, horizon, hr_method)))
        for row, job in jobs:
            try:
                table.cells[row, proto.value] = ReportCell(row, proto.value, estimate=job())
            except (AnalysisError, InputError) as exc:
                table.add_failure(row, proto.value, str(exc))
    return table


def cmd_estimate(args) -> int:
    d = _load_data(args.data, args.schema, args.event, args.treatment, args.reference)
    protocols = [p for p, flag in ((Protocol.ITT, args.itt), (Protocol.AT, args.at), (Protocol.PP, args.pp)) if flag]
    metrics = [m for m in METRICS if getattr(args, m)]
    if args.all:
        protocols, metrics = list(Protocol), list(METRICS)
    protocols = protocols or list(Protocol)
    metrics = metrics or ["rr", "or"]
    if args.precision < 0:
        raise InputError("--precision must be non-negative")
    table = build_report(
        d,
        protocols,
        metrics,
        precision=args.precision,
        paper_rounding=args.paper_rounding,
        haldane=args.haldane,
        horizon=args.horizon,
        hr_method=args.hr_method,
    )
    if args.format == "json":
        print(json.dumps(table.to_dict(), indent=2))
    else:
        print(table.render_text())
    return EXIT_REFUSED if table.n_failed == len(table.cells) else EXIT_OK


# --- adjust ----------------------------------------------------------------


def _parse_do(text: str) -> dict[str, str]:
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        node, sep, level = part.partition("=")
        if not sep or not node.strip() or not level.strip():
            raise InputError(f"--do expects node=level[,node=level], got {text!r}")
        out[node.strip()] = level.strip()
    if not out:
        raise InputError("--do needs at least one node=level")
    return out


def _parse_set(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def cmd_adjust(args) -> int:
    g = graph_from_dict(_read_json(args.graph))
    d = _load_data(args.data, args.schema, args.event)
    interventions = _parse_do(args.do)
    zs = _parse_set(args.adjust)
    y = g.role_node(NodeRole.OUTCOME)
    q = AdjustmentQuery(g, interventions, y, d.schema.event, frozenset(zs))
    data = complete_cases(d)
    nodes = [n for n in g.nodes if n in set(zs) | set(interventions) | {y}]
    est = backdoor_adjust(q, dataset_table(data, g, nodes))
    shown = "{" + ", ".join(q.ordered_adjustment()) + "}"
    if args.format == "json":
        print(json.dumps({
            "query": q.describe(),
            "adjustment_set": q.ordered_adjustment(),
            "value": est.render(args.precision),
            "exact": str(est.value),
            "n": len(data),
        }, indent=2))
    else:
        print(f"{q.describe()} = {est.render(args.precision)}  (exact {est.value}; adjustment set {shown}; n = {len(data)})")
    return EXIT_OK


# --- simulate --------------------------------------------------------------


def cmd_simulate(args) -> int:
    params = params_from_dict(_read_json(args.params))
    if args.n < 0:
        raise InputError("--n must be non-negative")
    if args.seed < 0:
        raise InputError("--seed must be non-negative")
    sim = simulate(params, args.n, args.seed)
    out = Path(args.out)
    write_dataset(sim.dataset, out)
    sim.dataset.schema.dump(schema_sidecar(out))
    if args.truth:
        with open(args.truth, "w", encoding="utf-8") as fh:
            json.dump(sim.truth_document(), fh, indent=2)
            fh.write("\n")
    print(f"wrote {sim.n_after_selection} of {sim.n_requested} simulated patients to {out}")
    return EXIT_OK


# --- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pctscm", description="Causal analysis of pragmatic clinical trial data.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("graph-check", help="validate a trial graph")
    g.add_argument("graph")
    g.set_defaults(func=cmd_graph_check)

    e = sub.add_parser("estimate", help="ITT / AT / PP effect table")
    e.add_argument("data")
    e.add_argument("--schema")
    e.add_argument("--itt", action="store_true")
    e.add_argument("--at", action="store_true")
    e.add_argument("--pp", action="store_true")
    e.add_argument("--prob", action="store_true", help="arm event probabilities")
    e.add_argument("--rr", action="store_true")
    e.add_argument("--or", dest="or", action="store_true")
    e.add_argument("--hr", action="store_true")
    e.add_argument("--all", action="store_true", help="every protocol and every metric")
    e.add_argument("--paper-rounding", action="store_true", help="round arm probabilities before forming ratios")
    e.add_argument("--precision", type=int, default=2)
    e.add_argument("--haldane", action="store_true", help="add 1/2 to each cell before forming odds")
    e.add_argument("--horizon", type=int, help="hazard ratio follow-up horizon (default: last recorded time)")
    e.add_argument("--hr-method", choices=HR_METHODS, default="mantel-haenszel")
    e.add_argument("--treatment")
    e.add_argument("--reference")
    e.add_argument("--event")
    e.add_argument("--format", choices=("table", "json"), default="table")
    e.set_defaults(func=cmd_estimate)

    a = sub.add_parser("adjust", help="backdoor-adjusted interventional estimate")
    a.add_argument("data")
    a.add_argument("graph")
    a.add_argument("--do", required=True, help="node=level[,node=level]")
    a.add_argument("--adjust", default="", help="comma-separated adjustment set")
    a.add_argument("--event")
    a.add_argument("--schema")
    a.add_argument("--precision", type=int, default=2)
    a.add_argument("--format", choices=("table", "json"), default="table")
    a.set_defaults(func=cmd_adjust)

    s = sub.add_parser("simulate", help="simulate a trial from SCM parameters")
    s.add_argument("params")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--truth")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AnalysisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (InputError, PctError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
