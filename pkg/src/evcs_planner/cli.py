"""Command-line interface: validate, optimize, compare, score, sp."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from .core import DataError
from .decision import DecisionMatrix, dump_scores_csv, read_front_csv, sp_metric
from .pipeline import (
    PILE_MODES,
    RunManifest,
    compare_runs,
    load_instance,
    optimize,
    write_outputs,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INFEASIBLE = 2
EXIT_IO = 3

logger = logging.getLogger("evcs_planner")

# CLI flag -> manifest field for the plain scalar options
_SCALAR_FLAGS = {
    "roads": "roads",
    "params": "params",
    "sites": "sites",
    "pop_size": "pop_size",
    "generations": "generations",
    "crossover_prob": "crossover_prob",
    "mutation_prob": "mutation_prob",
    "tau": "tau",
    "seed": "seed",
    "out_dir": "out_dir",
    "pile_mode": "pile_mode",
    "jobs": "n_jobs",
}


def _parse_override(text: str) -> tuple[str, Any]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    return key.strip(), parsed


def _add_manifest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", help="JSON run manifest; other flags override its fields")
    p.add_argument("--roads", help="roads.csv (default: bundled case study)")
    p.add_argument("--params", help="params.json (default: bundled case study)")
    p.add_argument("--sites", help="optional candidate-site coordinates CSV (id,x_km,y_km)")
    p.add_argument("--set", dest="overrides", action="append", type=_parse_override, default=[],
                   metavar="KEY=VALUE", help="override one model parameter (repeatable)")
    p.add_argument("--pile-mode", choices=PILE_MODES)
    p.add_argument("--congestion-aware", dest="congestion_aware", action="store_true", default=None)
    p.add_argument("--no-congestion-aware", dest="congestion_aware", action="store_false")
    p.add_argument("--pop-size", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--crossover-prob", type=float)
    p.add_argument("--mutation-prob", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--jobs", type=int, help="threads for objective evaluation")


def manifest_from_args(args: argparse.Namespace) -> RunManifest:
    base = RunManifest.load(args.manifest) if args.manifest else RunManifest()
    changes: dict[str, Any] = {}
    for flag, name in _SCALAR_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            changes[name] = value
    if args.congestion_aware is not None:
        changes["congestion_aware"] = args.congestion_aware
    if args.overrides:
        changes["overrides"] = {**base.overrides, **dict(args.overrides)}
    return dataclasses.replace(base, **changes)


def cmd_validate(args: argparse.Namespace) -> int:
    manifest = manifest_from_args(args)
    inst = load_instance(manifest)
    n_min, n_max = inst.bounds
    print(f"D={len(inst.network)}")
    print(f"total_demand_kwh={inst.demand_kwh:.0f}")
    print(f"N_min={n_min} N_max={n_max}")
    bad = inst.network.inconsistent_levels()
    if bad:
        print(f"warning: congestion level disagrees with flow band on roads {bad}")
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    manifest = manifest_from_args(args)
    inst = load_instance(manifest)
    outcome = optimize(manifest, inst)
    out = write_outputs(outcome)
    sel = outcome.selected_plan
    n_min, n_max = inst.bounds
    print(f"archive={len(outcome.plans)} plans, N bounds [{n_min}, {n_max}]")
    print(f"selected plan {sel.plan_id}: N={sel.plan.n_stations} "
          f"f1={sel.breakdown.f1:.0f} f2={sel.breakdown.f2:.0f}")
    print(f"outputs written to {out}")
    if not outcome.feasible:
        totals = {k: round(v, 4) for k, v in sel.feasibility.by_constraint().items() if v > 0}
        print(f"no feasible plan found (total violation {sel.feasibility.total_violation:.4f}: "
              f"{totals}); see feasibility.json", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    comp = compare_runs(args.run_a, args.run_b)
    text = comp.to_csv()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    F = read_front_csv(args.front)
    dm = DecisionMatrix.from_raw(F)
    text = dump_scores_csv(F, dm.scores, best=dm.best_index())
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    print(f"weights f1={dm.weights[0]:.6f} f2={dm.weights[1]:.6f}; selected plan {dm.best_index() + 1}")
    return EXIT_OK


def cmd_sp(args: argparse.Namespace) -> int:
    F = read_front_csv(args.front)
    print(f"SP={sp_metric(F):.10g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evcs-planner",
                                     description="Charging-station siting and sizing with NSGA-II.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log generation progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load inputs and print station-count bounds")
    _add_manifest_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("optimize", help="run the optimizer and write reports")
    _add_manifest_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("compare", help="cross-evaluate the selected plans of two runs")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--out", help="also write the comparison CSV here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("score", help="entropy-weight scoring of a front CSV")
    p.add_argument("front", help="CSV with f1,f2 columns (e.g. pareto.csv)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sp", help="spacing metric of a front CSV")
    p.add_argument("front")
    p.set_defaults(func=cmd_sp)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DataError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_IO if isinstance(exc, DataError) and _is_io(exc) else EXIT_VALIDATION


def _is_io(exc: DataError) -> bool:
    return isinstance(exc.__cause__, OSError)


if __name__ == "__main__":
    sys.exit(main())
