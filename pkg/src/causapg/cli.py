"""Command line front end.

Exit codes: 0 success, 1 expected failure (bad data, bad query, bad model),
2 usage errors. Diagnostics go to stderr, results to stdout.

A JSON config file may set defaults for tau, rho and max_paths; pass
--config or set CAUSAPG_CONFIG.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .analysis import (d_separated, find_colliders, find_confounders,
                       find_mediators, scan_associations, validate_edge)
from .cdah import load_cdah, save_cdah
from .errors import CausapgError
from .fixtures import main as fixtures_main
from .graph import PropertyGraph, ingest, update_from_json
from .maintenance import on_update
from .query.engine import evaluate, render_value
from .scm import fit_linear
from .transport import AlignmentRule, merge


def _load_config(path: str | None) -> dict:
    path = path or os.environ.get("CAUSAPG_CONFIG")
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    return cfg


def _print_table(result, json_out: bool) -> None:
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if json_out:
        print(json.dumps({"columns": list(result.columns),
                          "rows": result.rendered()}, indent=2))
        return
    if not result.columns:
        print("(no columns)")
        return
    rows = [[json.dumps(render_value(r[c]), default=str) for c in result.columns]
            for r in result.rows]
    widths = [max(len(c), *(len(row[i]) for row in rows)) if rows else len(c)
              for i, c in enumerate(result.columns)]
    print("  ".join(c.ljust(w) for c, w in zip(result.columns, widths)))
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    print(f"({len(rows)} row{'s' if len(rows) != 1 else ''})")


def _cmd_load(args, cfg) -> int:
    g = ingest(args.graph)
    snap = g.snapshot()
    labels = ", ".join(sorted(snap.labels())) or "(none)"
    print(f"{snap.node_count()} nodes, {snap.edge_count()} edges; labels: {labels}")
    return 0


def _cmd_query(args, cfg) -> int:
    snap = ingest(args.graph).snapshot()
    model = load_cdah(args.model) if args.model else None
    max_paths = args.max_paths or cfg.get("max_paths", 10_000)
    result = evaluate(args.query, snap, model, max_paths=max_paths)
    _print_table(result, args.json)
    if result.kind == "extract" and args.out:
        save_cdah(result.cdah, args.out)
        print(f"model written to {args.out}", file=sys.stderr)
    return 0


def _cmd_extract(args, cfg) -> int:
    snap = ingest(args.graph).snapshot()
    model = load_cdah(args.model) if args.model else None
    for text in args.queries:
        result = evaluate(text, snap, model, max_paths=cfg.get("max_paths", 10_000))
        for w in result.warnings:
            print(f"warning: {w}", file=sys.stderr)
        if result.kind != "extract":
            print("error: extract expects EXTRACT or MERGE queries", file=sys.stderr)
            return 1
        model = result.cdah
        for row in result.rows:
            print(f"{row['variable']}: {row['members']} members "
                  f"({row['added']} new)")
    if args.estimate:
        from .estimation import estimate_all
        model = estimate_all(model, snap)
    save_cdah(model, args.out)
    print(f"model written to {args.out}", file=sys.stderr)
    return 0


def _cmd_show(args, cfg) -> int:
    model = load_cdah(args.model)
    for name in sorted(model.variables):
        node = model.variables[name]
        rule = node.value_rule.prop if node.value_rule else "membership"
        eq = f"  [{node.equation.text}]" if node.equation else ""
        print(f"{name}: {len(node.members)} members, value by {rule}{eq}")
    for (s, d) in sorted(model.edges):
        e = model.edges[(s, d)]
        cpd = "cpd" if e.cpd is not None else "no cpd"
        ipd = ", ipd" if e.ipd is not None else ""
        print(f"{s} -> {d}: support {e.support}, {cpd}{ipd}")
    return 0


def _cmd_estimate(args, cfg) -> int:
    from .estimation import estimate_all
    snap = ingest(args.graph).snapshot()
    model = estimate_all(load_cdah(args.model), snap)
    save_cdah(model, args.out)
    print(f"estimated {len(model.edges)} edges -> {args.out}")
    return 0


def _cmd_analyze(args, cfg) -> int:
    model = load_cdah(args.model)
    if args.dsep:
        x, y = args.dsep
        res = d_separated(model, x, y, tuple(args.given), explain=True)
        given = ", ".join(args.given) or "{}"
        verdict = "separated" if res.separated else "connected"
        print(f"{x} and {y} given {given}: {verdict}")
        if res.witness:
            print("witness trail: " + " ~ ".join(res.witness))
        return 0
    x, y = args.pair
    if args.kind == "mediators":
        for m in find_mediators(model, x, y):
            note = "" if m.confound_free else " (confounded)"
            print(f"{m.variable}{note}")
    elif args.kind == "confounders":
        for c in find_confounders(model, x, y):
            print(c)
    else:
        for c in find_colliders(model, x, y):
            print(c)
    return 0


def _cmd_validate(args, cfg) -> int:
    snap = ingest(args.graph).snapshot()
    model = load_cdah(args.model)
    tau = args.tau if args.tau is not None else cfg.get("tau", 0.05)
    rho = args.rho if args.rho is not None else cfg.get("rho", 0.1)
    worst = "valid"
    for (s, d) in sorted(model.edges):
        v = validate_edge(model, s, d, snap, tau=tau, rho=rho)
        print(f"{s} -> {d}: {v.verdict} (tv {v.tv:.4f}, dependence "
              f"{v.dependence:.4f}, support {v.support})")
        if v.verdict != "valid":
            worst = v.verdict
    return 0 if worst == "valid" else 1


def _cmd_scan(args, cfg) -> int:
    snap = ingest(args.graph).snapshot()
    model = load_cdah(args.model)
    rho = args.rho if args.rho is not None else cfg.get("rho", 0.1)
    for cand in scan_associations(model, snap, rho=rho, bins=args.bins):
        print(f"{cand.a} ~ {cand.b}: dependence {cand.dependence:.4f}")
    return 0


def _cmd_merge(args, cfg) -> int:
    models = [load_cdah(p) for p in args.models]
    alignment = []
    if args.align:
        with open(args.align, encoding="utf-8") as fh:
            for row in json.load(fh):
                alignment.append(AlignmentRule(source=row["source"],
                                               variable=row["variable"],
                                               to=row.get("to")))
    merged, report = merge(models, alignment or None,
                           cycle_policy=args.cycle_policy)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for s, d, reason in report.dropped_edges:
        print(f"dropped edge {s} -> {d}: {reason}", file=sys.stderr)
    save_cdah(merged, args.out)
    print(f"merged {len(args.models)} models: {len(merged.variables)} variables, "
          f"{len(merged.edges)} edges -> {args.out}")
    return 0


def _cmd_update(args, cfg) -> int:
    g = ingest(args.graph)
    model = load_cdah(args.model)
    tau = cfg.get("tau", 0.05)
    rho = cfg.get("rho", 0.1)
    with open(args.updates, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            receipt = g.apply_update(update_from_json(json.loads(line)))
            outcome = on_update(model, receipt, g.snapshot(), tau=tau, rho=rho)
            model = outcome.cdah
            for w in outcome.warnings:
                print(f"warning: {w}", file=sys.stderr)
            fired = ", ".join(outcome.fired) or "-"
            print(f"update {line_no}: {outcome.kind} (fired: {fired})")
            for act in outcome.actions:
                where = f"{act.src} -> {act.dst}" if act.src else act.variable
                print(f"  {act.kind}: {where}")
    save_cdah(model, args.out)
    print(f"model written to {args.out}", file=sys.stderr)
    return 0


def _cmd_fit(args, cfg) -> int:
    snap = ingest(args.graph).snapshot()
    model = load_cdah(args.model)
    for target in args.targets:
        model = fit_linear(model, target, snapshot=snap)
        print(f"{target}: {model.hypernode(target).equation.text}")
    save_cdah(model, args.out)
    return 0


def _cmd_fixtures(args, cfg) -> int:
    return fixtures_main([args.dir])


def _cmd_repl(args, cfg) -> int:
    snap = ingest(args.graph).snapshot()
    model = load_cdah(args.model) if args.model else None
    max_paths = cfg.get("max_paths", 10_000)
    print("type queries ending with ';' ( :help for commands )")
    buffer = ""
    while True:
        try:
            line = input("...> " if buffer else "capg> ")
        except EOFError:
            print()
            return 0
        stripped = line.strip()
        if not buffer and stripped.startswith(":"):
            if stripped in (":quit", ":q", ":exit"):
                return 0
            if stripped == ":help":
                print(":quit  :model  :save PATH  :help")
            elif stripped == ":model":
                if model is None:
                    print("(no model loaded)")
                else:
                    vs = ", ".join(sorted(model.variables)) or "(empty)"
                    print(f"variables: {vs}; edges: {len(model.edges)}")
            elif stripped.startswith(":save "):
                path = stripped[len(":save "):].strip()
                if model is None:
                    print("(no model to save)")
                else:
                    save_cdah(model, path)
                    print(f"saved to {path}")
            else:
                print(f"unknown command {stripped}")
            continue
        buffer = f"{buffer}\n{line}" if buffer else line
        if not buffer.rstrip().endswith(";"):
            continue
        text, buffer = buffer, ""
        try:
            result = evaluate(text.rstrip().rstrip(";"), snap, model,
                              max_paths=max_paths)
        except CausapgError as exc:
            print(f"error: {exc}", file=sys.stderr)
            continue
        if result.kind == "extract":
            model = result.cdah
        _print_table(result, json_out=False)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causapg",
                                description="causal analysis over property graphs")
    p.add_argument("--version", action="version", version=f"causapg {__version__}")
    p.add_argument("--config", help="JSON config file (or CAUSAPG_CONFIG)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("load", help="validate a graph file and show counts")
    s.add_argument("graph")
    s.set_defaults(func=_cmd_load)

    s = sub.add_parser("query", help="run one query against a graph")
    s.add_argument("graph")
    s.add_argument("query")
    s.add_argument("--model", help="model file for causal clauses")
    s.add_argument("--out", help="write the updated model here (EXTRACT only)")
    s.add_argument("--json", action="store_true", help="JSON output")
    s.add_argument("--max-paths", type=int, default=None)
    s.set_defaults(func=_cmd_query)

    s = sub.add_parser("extract", help="run EXTRACT queries and save the model")
    s.add_argument("graph")
    s.add_argument("queries", nargs="+", metavar="query")
    s.add_argument("--model", help="extend an existing model")
    s.add_argument("--out", required=True)
    s.add_argument("--estimate", action="store_true",
                   help="estimate every edge before saving")
    s.set_defaults(func=_cmd_extract)

    s = sub.add_parser("show", help="summarize a model file")
    s.add_argument("model")
    s.set_defaults(func=_cmd_show)

    s = sub.add_parser("estimate", help="re-estimate every edge from a graph")
    s.add_argument("graph")
    s.add_argument("model")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_estimate)

    s = sub.add_parser("analyze", help="separation and role queries on a model")
    s.add_argument("model")
    group = s.add_mutually_exclusive_group(required=True)
    group.add_argument("--dsep", nargs=2, metavar=("X", "Y"))
    group.add_argument("--mediators", nargs=2, metavar=("X", "Y"),
                       dest="pair_mediators")
    group.add_argument("--confounders", nargs=2, metavar=("X", "Y"),
                       dest="pair_confounders")
    group.add_argument("--colliders", nargs=2, metavar=("X", "Y"),
                       dest="pair_colliders")
    s.add_argument("--given", nargs="*", default=[])
    s.set_defaults(func=_cmd_analyze)

    s = sub.add_parser("validate", help="check stored edges against the graph")
    s.add_argument("graph")
    s.add_argument("model")
    s.add_argument("--tau", type=float, default=None)
    s.add_argument("--rho", type=float, default=None)
    s.set_defaults(func=_cmd_validate)

    s = sub.add_parser("scan", help="rank unexplained associations")
    s.add_argument("graph")
    s.add_argument("model")
    s.add_argument("--rho", type=float, default=None)
    s.add_argument("--bins", type=int, default=5)
    s.set_defaults(func=_cmd_scan)

    s = sub.add_parser("merge", help="pool several models into one")
    s.add_argument("models", nargs="+", metavar="model")
    s.add_argument("--out", required=True)
    s.add_argument("--align", help="JSON list of rename/drop rules")
    s.add_argument("--cycle-policy", choices=("reject", "drop_min_support"),
                   default="reject")
    s.set_defaults(func=_cmd_merge)

    s = sub.add_parser("update", help="apply graph updates and maintain the model")
    s.add_argument("graph")
    s.add_argument("model")
    s.add_argument("--updates", required=True,
                   help="JSONL file, one graph update per line")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_update)

    s = sub.add_parser("fit", help="fit linear equations for target variables")
    s.add_argument("graph")
    s.add_argument("model")
    s.add_argument("targets", nargs="+", metavar="target")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_fit)

    s = sub.add_parser("fixtures", help="write the bundled example files")
    s.add_argument("dir", nargs="?", default="fixtures")
    s.set_defaults(func=_cmd_fixtures)

    s = sub.add_parser("repl", help="interactive query loop")
    s.add_argument("graph")
    s.add_argument("--model")
    s.set_defaults(func=_cmd_repl)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    # normalize the analyze pair flags into one place
    if getattr(args, "pair_mediators", None):
        args.kind, args.pair = "mediators", args.pair_mediators
    elif getattr(args, "pair_confounders", None):
        args.kind, args.pair = "confounders", args.pair_confounders
    elif getattr(args, "pair_colliders", None):
        args.kind, args.pair = "colliders", args.pair_colliders
    elif hasattr(args, "dsep"):
        args.kind, args.pair = "dsep", None
    try:
        return args.func(args, cfg)
    except CausapgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: bad JSON input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
