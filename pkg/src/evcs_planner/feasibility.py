"""Constraint evaluation, station-count bounds and gene repair."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ModelParams, Plan, RoadNetwork
from .costs import station_capacity, total_demand_kwh
from .network import DISTANCE_TOL_KM, Assignment, DistanceMatrix, nearest_open, within

CONSTRAINT_IDS = ("C11", "C13", "C14", "C15", "C16", "C19", "C20", "C22", "C25")

OPEN_THRESHOLD = 0.5

_JUST_BELOW = math.nextafter(OPEN_THRESHOLD, 0.0)


@dataclass(frozen=True)
class Violation:
    constraint: str
    target: int   # 1-based station or road id; 0 for plan-wide constraints
    magnitude: float


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...] = ()

    @property
    def total_violation(self) -> float:
        return float(sum(v.magnitude for v in self.violations))

    @property
    def feasible(self) -> bool:
        return not self.violations

    def by_constraint(self) -> dict[str, float]:
        out = {cid: 0.0 for cid in CONSTRAINT_IDS}
        for v in self.violations:
            out[v.constraint] += v.magnitude
        return out

    def to_json(self) -> str:
        return json.dumps({
            "feasible": self.feasible,
            "total_violation": self.total_violation,
            "by_constraint": self.by_constraint(),
            "violations": [
                {"constraint": v.constraint, "id": v.target, "magnitude": v.magnitude}
                for v in self.violations
            ],
        }, indent=2)


def station_count_bounds(network: RoadNetwork, params: ModelParams) -> tuple[int, int]:
    """Fewest and most stations the total demand justifies.

    The upper bound assumes every station runs its minimum slow-pile
    complement, the lower bound its maximum fast-pile complement. When a pile
    type is disabled the formula that would divide by zero falls back to the
    enabled type: the upper bound then uses its minimum complement, and the
    lower bound its maximum complement, which must cover both the daily
    energy and the per-station peak power.
    """
    demand = total_demand_kwh(network, params)
    D = len(network)
    small = params.t_d_hours * params.n_slow_min * params.p_slow_kw
    if small <= 0:
        small = params.t_d_hours * params.n_fast_min * params.p_fast_kw
    n_max = D if small <= 0 else min(D, math.ceil(demand / small))
    big_kw = params.n_fast_max * params.p_fast_kw
    if big_kw > 0:
        n_min = math.ceil(demand / (params.t_d_hours * big_kw))
    else:
        big_kw = params.n_slow_max * params.p_slow_kw
        peak_kw = params.beta * params.eta * params.alpha * network.flows.sum() * params.session_kwh
        n_min = max(math.ceil(demand / (params.t_d_hours * big_kw)), math.ceil(peak_kw / big_kw))
    return int(min(n_min, n_max)), int(n_max)


def _overflow(value: float, bound: float) -> float:
    return (value - bound) / bound if bound > 0 else value - bound


def check(plan: Plan, assignment: Assignment, dm: DistanceMatrix, network: RoadNetwork,
          params: ModelParams, bounds: tuple[int, int] | None = None) -> FeasibilityReport:
    """Evaluate every constraint family; magnitudes are normalized overflows."""
    out: list[Violation] = []
    st = plan.stations
    nf, ns = plan.nf[st], plan.ns[st]
    S = np.asarray(station_capacity(nf, ns, params), dtype=float)
    demand_kwh = total_demand_kwh(network, params)

    # C11 total rated capacity over a running day
    supplied = params.t_d_hours * S.sum()
    if supplied < demand_kwh:
        out.append(Violation("C11", 0, _overflow(demand_kwh, supplied) if supplied > 0 else 1.0))

    # C13 peak power per station
    delta = assignment.delta_j[st]
    need = params.beta * params.eta * params.session_kwh * delta
    for j, s, q in zip(st, S, need):
        if s < q:
            out.append(Violation("C13", int(j) + 1, (q - s) / q))

    # C14 / C15 pile counts
    for cid, counts, lo, hi in (("C14", nf, params.n_fast_min, params.n_fast_max),
                                ("C15", ns, params.n_slow_min, params.n_slow_max)):
        for j, n in zip(st, counts):
            if n < lo:
                out.append(Violation(cid, int(j) + 1, (lo - n) / max(lo, 1)))
            elif n > hi:
                out.append(Violation(cid, int(j) + 1, (n - hi) / max(hi, 1)))

    # C16 station count
    n_min, n_max = bounds if bounds is not None else station_count_bounds(network, params)
    N = st.size
    if N < n_min:
        out.append(Violation("C16", 0, (n_min - N) / n_min))
    elif N > n_max:
        out.append(Violation("C16", 0, (N - n_max) / n_max))

    # C19 nearest open neighbour between r and 2r; vacuous for a single station
    r = params.r_service_km
    if N >= 2:
        sub = dm.d[np.ix_(st, st)].copy()
        np.fill_diagonal(sub, np.inf)
        nn = sub.min(axis=1)
        for j, dist in zip(st, nn):
            if dist < r - DISTANCE_TOL_KM:
                out.append(Violation("C19", int(j) + 1, (r - dist) / r))
            elif dist > 2 * r + DISTANCE_TOL_KM:
                out.append(Violation("C19", int(j) + 1, (dist - 2 * r) / (2 * r)))

    # C20 vehicles served per station
    for j, dj in zip(st, delta):
        if dj < params.b_min:
            out.append(Violation("C20", int(j) + 1, (params.b_min - dj) / params.b_min))
        elif dj > params.b_max:
            out.append(Violation("C20", int(j) + 1, (dj - params.b_max) / params.b_max))

    # C22 full coverage; per-road magnitudes sum to the uncovered demand fraction
    road_demand = params.alpha * network.flows
    total = road_demand.sum()
    for i in np.flatnonzero(~assignment.covered):
        out.append(Violation("C22", int(i) + 1, road_demand[i] / total))

    # C25 distribution-network cap (inclusive)
    if S.sum() > params.p_max_kw:
        out.append(Violation("C25", 0, _overflow(S.sum(), params.p_max_kw)))

    return FeasibilityReport(tuple(out))


@dataclass(frozen=True)
class GeneBounds:
    """Gene ranges and station-count window used by repair and initialization.

    Genes are laid out ``[open_1..open_D, nf_1..nf_D, ns_1..ns_D]``.
    """

    D: int
    nf_range: tuple[int, int]
    ns_range: tuple[int, int]
    n_range: tuple[int, int]
    demand: np.ndarray = field(repr=False)
    distances: np.ndarray | None = field(default=None, repr=False)
    radius_km: float = math.inf

    @property
    def lower(self) -> np.ndarray:
        D = self.D
        return np.concatenate([np.zeros(D), np.full(D, float(self.nf_range[0])),
                               np.full(D, float(self.ns_range[0]))])

    @property
    def upper(self) -> np.ndarray:
        D = self.D
        return np.concatenate([np.ones(D), np.full(D, float(self.nf_range[1])),
                               np.full(D, float(self.ns_range[1]))])

    def is_open_gene(self, index: int) -> bool:
        return index < self.D

    @classmethod
    def for_problem(cls, network: RoadNetwork, dm: DistanceMatrix, params: ModelParams) -> "GeneBounds":
        return cls(
            D=len(network),
            nf_range=(params.n_fast_min, params.n_fast_max),
            ns_range=(params.n_slow_min, params.n_slow_max),
            n_range=station_count_bounds(network, params),
            demand=params.alpha * network.flows,
            distances=dm.d,
            radius_km=params.r_service_km,
        )


def encode(plan: Plan) -> np.ndarray:
    return np.concatenate([plan.open, plan.nf, plan.ns]).astype(float)


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def _open_greedy(is_open: np.ndarray, k: int, bounds: GeneBounds) -> None:
    """Open ``k`` closed sites, each time the one with most uncovered demand in reach."""
    demand = bounds.demand
    d = bounds.distances
    if d is None:
        reach = np.eye(bounds.D, dtype=bool)
    else:
        reach = within(d, bounds.radius_km)
    covered = reach[:, is_open].any(axis=1) if is_open.any() else np.zeros(bounds.D, bool)
    for _ in range(k):
        gain = (demand * ~covered) @ reach
        gain[is_open] = -np.inf
        best = gain.max()
        tied = np.flatnonzero(gain == best)
        j = tied[np.argmax(demand[tied])]
        is_open[j] = True
        covered |= reach[:, j]


def _close_greedy(is_open: np.ndarray, k: int, bounds: GeneBounds) -> None:
    """Close ``k`` open sites, each time the one currently serving least demand."""
    demand = bounds.demand
    d = bounds.distances
    if d is None:
        order = np.flatnonzero(is_open)
        drop = order[np.lexsort((order, demand[order]))][:k]
        is_open[drop] = False
        return
    stations = np.flatnonzero(is_open)
    near, _ = nearest_open(d, stations)
    for _ in range(k):
        share = np.bincount(near, weights=demand, minlength=bounds.D)[stations]
        j = stations[np.argmin(share)]
        is_open[j] = False
        stations = stations[stations != j]
        moved = np.flatnonzero(near == j)
        if moved.size:
            near[moved], _ = nearest_open(d[moved], stations)


def repair_genes(raw_genes, bounds: GeneBounds) -> tuple[Plan, np.ndarray]:
    """Decode real-valued genes into a valid plan.

    Returns the plan and a projected copy of the genes whose open genes agree
    with it; an open gene the count adjustment overrode is reflected through
    the threshold (``g -> 1 - g``).
    """
    D = bounds.D
    genes = np.array(raw_genes, dtype=float).reshape(-1)
    if genes.size != 3 * D:
        raise ValueError(f"expected {3 * D} genes, got {genes.size}")
    og, fg, sg = genes[:D], genes[D:2 * D], genes[2 * D:]
    is_open = og >= OPEN_THRESHOLD
    before = is_open.copy()
    n_min, n_max = bounds.n_range
    N = int(is_open.sum())
    if N < n_min:
        _open_greedy(is_open, n_min - N, bounds)
    elif N > n_max:
        _close_greedy(is_open, N - n_max, bounds)

    nf = np.clip(_round_half_up(fg), *bounds.nf_range).astype(np.int64)
    ns = np.clip(_round_half_up(sg), *bounds.ns_range).astype(np.int64)
    nf[~is_open] = 0
    ns[~is_open] = 0

    flipped = is_open != before
    og[flipped] = 1.0 - og[flipped]
    og[flipped & is_open & (og < OPEN_THRESHOLD)] = OPEN_THRESHOLD
    og[flipped & ~is_open & (og >= OPEN_THRESHOLD)] = _JUST_BELOW
    lo, hi = bounds.lower, bounds.upper
    np.clip(genes, lo, hi, out=genes)
    return Plan(is_open.astype(np.int8), nf, ns), genes


def repair(raw_genes, params: ModelParams | None, bounds: GeneBounds) -> Plan:
    """Integer plan from raw genes: threshold, round, clamp, fix station count."""
    return repair_genes(raw_genes, bounds)[0]
