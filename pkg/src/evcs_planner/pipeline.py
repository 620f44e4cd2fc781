"""Run manifests, the end-to-end optimize pipeline and its report files."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .core import (
    CostBreakdown,
    DataError,
    ModelParams,
    Plan,
    RoadNetwork,
    load_params,
    load_roads,
    parse_params_json,
    parse_roads_csv,
    validate_params,
)
from .costs import evaluate as evaluate_costs
from .costs import station_capacity, total_demand_kwh
from .decision import DecisionMatrix, dump_scores_csv
from .feasibility import FeasibilityReport, check, station_count_bounds
from .moea import AlgoConfig, ArchiveEntry, ParetoArchive, RunResult, run_charging
from .network import DistanceMatrix, assign_demand, build_distance_matrix, load_sites_csv

logger = logging.getLogger(__name__)

PILE_MODES = ("mixed", "fast_only", "slow_only")

PARETO_FILE = "pareto.csv"
COSTS_FILE = "costs.csv"
DECISION_FILE = "decision.csv"
LOG_FILE = "generations.log"
RUN_FILE = "run.json"
DIAGNOSTICS_FILE = "feasibility.json"
STATIONS_DIR = "stations"

COMPARE_COLUMNS = (
    "n_stations",
    "annual_construction_cost",
    "pile_purchase_cost",
    "travel_loss_time_cost",
    "queue_time_cost",
    "total_time_cost",
    "energy_cost",
    "total_additional_cost",
    "annual_profit",
)


def bundled_roads() -> RoadNetwork:
    text = resources.files("evcs_planner").joinpath("data/roads.csv").read_text(encoding="utf-8")
    return parse_roads_csv(text, source="<bundled roads.csv>")


def bundled_params() -> ModelParams:
    text = resources.files("evcs_planner").joinpath("data/params.json").read_text(encoding="utf-8")
    return parse_params_json(text, source="<bundled params.json>")


def apply_pile_mode(params: ModelParams, mode: str) -> ModelParams:
    """Disable slow piles (``fast_only``) or fast piles (``slow_only``)."""
    if mode == "mixed":
        return params
    if mode == "fast_only":
        return params.replace(n_slow_min=0, n_slow_max=0)
    if mode == "slow_only":
        return params.replace(n_fast_min=0, n_fast_max=0)
    raise ValueError(f"pile_mode must be one of {PILE_MODES}, got {mode!r}")


@dataclass
class RunManifest:
    """Everything that determines one optimization run.

    ``roads`` and ``params`` default to the bundled case study. ``overrides``
    replaces individual parameter values after loading.
    """

    roads: str | None = None
    params: str | None = None
    sites: str | None = None
    overrides: dict[str, Any] = field(default_factory=dict)
    pop_size: int = 200
    generations: int = 500
    crossover_prob: float = 0.9
    mutation_prob: float = 0.1
    tau: float = 4.0
    seed: int = 0
    out_dir: str = "run"
    congestion_aware: bool = True
    pile_mode: str = "mixed"
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if self.pile_mode not in PILE_MODES:
            raise ValueError(f"pile_mode must be one of {PILE_MODES}, got {self.pile_mode!r}")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be >= 1")

    def algo_config(self) -> AlgoConfig:
        return AlgoConfig(self.pop_size, self.generations, self.crossover_prob,
                          self.mutation_prob, self.tau, self.seed)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunManifest":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise DataError(f"manifest has unknown key(s): {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"{path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{exc.lineno}: {exc.msg}") from None
        return cls.from_dict(data)

    def missing_files(self) -> list[str]:
        return [p for p in (self.roads, self.params, self.sites) if p and not Path(p).is_file()]


@dataclass(frozen=True)
class Instance:
    """Loaded inputs of a run: network, distances and effective parameters."""

    network: RoadNetwork
    dm: DistanceMatrix
    params: ModelParams

    @property
    def bounds(self) -> tuple[int, int]:
        return station_count_bounds(self.network, self.params)

    @property
    def demand_kwh(self) -> float:
        return total_demand_kwh(self.network, self.params)


def load_instance(manifest: RunManifest) -> Instance:
    """Load and validate the inputs named by ``manifest``.

    Raises:
        FileNotFoundError: for a referenced file that does not exist.
        DataError: for unparsable or invalid inputs.
    """
    missing = manifest.missing_files()
    if missing:
        raise FileNotFoundError(f"no such file: {missing[0]}")
    network = load_roads(manifest.roads) if manifest.roads else bundled_roads()
    params = load_params(manifest.params) if manifest.params else bundled_params()
    if manifest.overrides:
        try:
            params = params.replace(**manifest.overrides)
        except TypeError as exc:
            raise DataError(f"bad parameter override: {exc}") from None
    params = apply_pile_mode(params, manifest.pile_mode)
    report = validate_params(params)
    if not report.ok:
        raise DataError("invalid parameters: " + "; ".join(report.messages()))
    if params.D != len(network):
        raise DataError(f"params D={params.D} but the road file has {len(network)} roads")
    if manifest.sites:
        dm = load_sites_csv(manifest.sites, network)
    else:
        dm = build_distance_matrix(network)
    return Instance(network, dm, params)


@dataclass
class PlanReport:
    plan_id: int
    plan: Plan
    breakdown: CostBreakdown
    feasibility: FeasibilityReport


@dataclass
class RunOutcome:
    manifest: RunManifest
    instance: Instance
    result: RunResult
    plans: list[PlanReport]
    selected: int                   # index into plans
    decision: DecisionMatrix | None  # None when the archive has one plan

    @property
    def feasible(self) -> bool:
        return all(p.feasibility.feasible for p in self.plans)

    @property
    def selected_plan(self) -> PlanReport:
        return self.plans[self.selected]


def assess_plan(plan: Plan, instance: Instance, congestion_aware: bool = True
                ) -> tuple[CostBreakdown, FeasibilityReport]:
    a = assign_demand(plan, instance.dm, instance.network, instance.params)
    breakdown = evaluate_costs(plan, instance.network, instance.dm, instance.params,
                               congestion_aware=congestion_aware, assignment=a)
    report = check(plan, a, instance.dm, instance.network, instance.params)
    return breakdown, report


def summarize(manifest: RunManifest, instance: Instance, result: RunResult) -> RunOutcome:
    """Number the archive by ascending f1 and pick the entropy-weight winner."""
    entries: list[ArchiveEntry] = list(result.archive.sorted())
    plans = []
    for k, e in enumerate(entries, start=1):
        breakdown, report = e.detail if e.detail is not None else assess_plan(
            e.solution, instance, manifest.congestion_aware)
        plans.append(PlanReport(k, e.solution, breakdown, report))
    if len(plans) >= 2:
        dm = DecisionMatrix.from_raw([(p.breakdown.f1, p.breakdown.f2) for p in plans])
        selected = dm.best_index()
    else:
        dm, selected = None, 0
    return RunOutcome(manifest, instance, result, plans, selected, dm)


def optimize(manifest: RunManifest, instance: Instance | None = None) -> RunOutcome:
    instance = instance if instance is not None else load_instance(manifest)
    result = run_charging(instance.network, instance.dm, instance.params, manifest.algo_config(),
                          congestion_aware=manifest.congestion_aware, n_jobs=manifest.n_jobs)
    return summarize(manifest, instance, result)


# ---------------------------------------------------------------------------
# report files

def _f(x: float) -> str:
    return repr(float(x))


def _csv(rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def pareto_csv(outcome: RunOutcome) -> str:
    rows: list[list[Any]] = [["f1", "f2", "N", "plan_id"]]
    for p in outcome.plans:
        rows.append([_f(p.breakdown.f1), _f(p.breakdown.f2), p.plan.n_stations, p.plan_id])
    return _csv(rows)


def stations_csv(plan: Plan, params: ModelParams) -> str:
    rows: list[list[Any]] = [["station_id", "fast", "slow", "capacity_kw"]]
    for j in plan.stations:
        nf, ns = int(plan.nf[j]), int(plan.ns[j])
        cap = station_capacity(nf, ns, params)
        rows.append([int(j) + 1, nf, ns, int(cap) if float(cap).is_integer() else _f(cap)])
    return _csv(rows)


def costs_csv(outcome: RunOutcome) -> str:
    rows: list[list[Any]] = [["plan_id", *CostBreakdown.REPORT_COLUMNS]]
    for p in outcome.plans:
        row = p.breakdown.report_row()
        rows.append([p.plan_id, *(_f(row[c]) for c in CostBreakdown.REPORT_COLUMNS)])
    return _csv(rows)


def decision_csv(outcome: RunOutcome) -> str:
    F = [(p.breakdown.f1, p.breakdown.f2) for p in outcome.plans]
    scores = outcome.decision.scores if outcome.decision is not None else [math.nan] * len(F)
    return dump_scores_csv(F, scores, best=outcome.selected)


def run_record(outcome: RunOutcome) -> dict[str, Any]:
    sel = outcome.selected_plan
    n_min, n_max = outcome.instance.bounds
    return {
        "manifest": outcome.manifest.to_dict(),
        "feasible": outcome.feasible,
        "n_min": n_min,
        "n_max": n_max,
        "selected_plan_id": sel.plan_id,
        "selected": {
            "stations": [[int(j) + 1, int(sel.plan.nf[j]), int(sel.plan.ns[j])]
                         for j in sel.plan.stations],
            "f1": sel.breakdown.f1,
            "f2": sel.breakdown.f2,
            "total_violation": sel.feasibility.total_violation,
        },
    }


def write_outputs(outcome: RunOutcome, out_dir: str | Path | None = None) -> Path:
    """Write every report file; returns the output directory."""
    out = Path(out_dir if out_dir is not None else outcome.manifest.out_dir)
    (out / STATIONS_DIR).mkdir(parents=True, exist_ok=True)
    params = outcome.instance.params
    (out / PARETO_FILE).write_text(pareto_csv(outcome), encoding="utf-8")
    (out / COSTS_FILE).write_text(costs_csv(outcome), encoding="utf-8")
    (out / DECISION_FILE).write_text(decision_csv(outcome), encoding="utf-8")
    for p in outcome.plans:
        (out / STATIONS_DIR / f"plan_{p.plan_id}.csv").write_text(
            stations_csv(p.plan, params), encoding="utf-8")
    log = "".join(s.line() + "\n" for s in outcome.result.history)
    (out / LOG_FILE).write_text(log, encoding="utf-8")
    (out / DIAGNOSTICS_FILE).write_text(outcome.selected_plan.feasibility.to_json() + "\n",
                                        encoding="utf-8")
    (out / RUN_FILE).write_text(json.dumps(run_record(outcome), indent=2) + "\n", encoding="utf-8")
    return out


# ---------------------------------------------------------------------------
# comparison

def load_run(run_dir: str | Path) -> tuple[RunManifest, Plan]:
    """Manifest and selected plan of a finished run directory."""
    path = Path(run_dir) / RUN_FILE
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: {exc.msg}") from None
    manifest = RunManifest.from_dict(record["manifest"])
    D = manifest_D(manifest)
    plan = Plan.from_stations(D, {sid: (f, s) for sid, f, s in record["selected"]["stations"]})
    return manifest, plan


def manifest_D(manifest: RunManifest) -> int:
    network = load_roads(manifest.roads) if manifest.roads else bundled_roads()
    return len(network)


def comparison_row(plan: Plan, instance: Instance) -> dict[str, float]:
    """Cost figures of ``plan`` under congestion-aware costing."""
    b, _ = assess_plan(plan, instance, congestion_aware=True)
    row = b.report_row()
    return {
        "n_stations": float(plan.n_stations),
        "annual_construction_cost": row["annual_construction_cost"],
        "pile_purchase_cost": b.pile_cost_total,
        "travel_loss_time_cost": row["travel_loss_time_cost"],
        "queue_time_cost": row["queue_time_cost"],
        "total_time_cost": row["total_time_cost"],
        "energy_cost": row["energy_cost"],
        "total_additional_cost": row["total_additional_cost"],
        "annual_profit": row["annual_profit"],
    }


@dataclass(frozen=True)
class Comparison:
    a: dict[str, float]
    b: dict[str, float]

    def delta(self, column: str) -> float:
        return self.b[column] - self.a[column]

    def relative(self, column: str) -> float:
        base = self.a[column]
        return self.delta(column) / abs(base) if base != 0 else (0.0 if self.delta(column) == 0 else math.inf)

    def to_csv(self) -> str:
        rows: list[list[Any]] = [["metric", "a", "b", "delta", "relative"]]
        for c in COMPARE_COLUMNS:
            rows.append([c, _f(self.a[c]), _f(self.b[c]), _f(self.delta(c)), _f(self.relative(c))])
        return _csv(rows)


def compare_plans(plan_a: Plan, plan_b: Plan, instance: Instance) -> Comparison:
    """Evaluate two plans on the same congestion-aware cost model."""
    return Comparison(comparison_row(plan_a, instance), comparison_row(plan_b, instance))


def compare_runs(run_a: str | Path, run_b: str | Path) -> Comparison:
    """Cross-evaluate the selected plans of two runs on run A's inputs."""
    manifest_a, plan_a = load_run(run_a)
    _, plan_b = load_run(run_b)
    base = dataclasses.replace(manifest_a, pile_mode="mixed")
    instance = load_instance(base)
    if len(plan_b.open) != len(instance.network):
        raise DataError("runs were made on road networks of different sizes")
    return compare_plans(plan_a, plan_b, instance)
