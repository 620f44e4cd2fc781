"""Domain types, parameter container and file I/O shared by every module."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Upper edges of the congestion bands in vehicles/day; a flow equal to an edge
# belongs to the lower band.
CONGESTION_BAND_EDGES = (100.0, 200.0, 300.0, 400.0)
MIN_BAND_FLOW = 30.0
MAX_BAND_FLOW = 520.0

ROAD_COLUMNS = ("id", "daily_flow", "congestion_level", "length_km", "x_km", "y_km", "neighbors")


class DataError(ValueError):
    """Raised when an input file or record cannot be parsed or is inconsistent."""


def classify_congestion(daily_flow: float) -> int:
    """Return the congestion level (0..4) for a daily EV flow.

    Flows outside 30..520 vehicles/day are clamped with a warning. Band
    boundaries resolve to the lower band, so ``classify_congestion(100) == 0``.

    Raises:
        DataError: if ``daily_flow`` is negative or not finite.
    """
    if not math.isfinite(daily_flow) or daily_flow < 0:
        raise DataError(f"daily flow must be a nonnegative number, got {daily_flow!r}")
    if daily_flow < MIN_BAND_FLOW or daily_flow > MAX_BAND_FLOW:
        logger.warning("daily flow %s outside 30..520, clamping", daily_flow)
        daily_flow = min(max(daily_flow, MIN_BAND_FLOW), MAX_BAND_FLOW)
    level = 0
    for edge in CONGESTION_BAND_EDGES:
        if daily_flow > edge:
            level += 1
    return level


@dataclass(frozen=True)
class Road:
    id: int
    daily_flow: float
    congestion_level: int
    length_km: float
    midpoint: tuple[float, float]
    neighbors: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not self.daily_flow > 0:
            raise DataError(f"road {self.id}: daily_flow must be > 0, got {self.daily_flow}")
        if self.congestion_level not in (0, 1, 2, 3, 4):
            raise DataError(f"road {self.id}: congestion_level must be in 0..4")
        if not self.length_km > 0:
            raise DataError(f"road {self.id}: length_km must be > 0")


@dataclass(frozen=True)
class RoadNetwork:
    """Ordered collection of roads; road ``id`` k sits at position k-1."""

    roads: tuple[Road, ...]

    def __post_init__(self) -> None:
        if not self.roads:
            raise DataError("road network is empty")
        for pos, road in enumerate(self.roads, start=1):
            if road.id != pos:
                raise DataError(f"road ids must be 1..D in order; position {pos} has id {road.id}")
        ids = set(range(1, len(self.roads) + 1))
        for road in self.roads:
            bad = [n for n in road.neighbors if n not in ids or n == road.id]
            if bad:
                raise DataError(f"road {road.id}: invalid neighbor ids {bad}")

    def __len__(self) -> int:
        return len(self.roads)

    @property
    def flows(self) -> np.ndarray:
        return np.array([r.daily_flow for r in self.roads], dtype=float)

    @property
    def levels(self) -> np.ndarray:
        return np.array([r.congestion_level for r in self.roads], dtype=int)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([r.length_km for r in self.roads], dtype=float)

    @property
    def midpoints(self) -> np.ndarray:
        return np.array([r.midpoint for r in self.roads], dtype=float)

    def inconsistent_levels(self) -> list[int]:
        """Road ids whose stored congestion level disagrees with their flow band."""
        return [r.id for r in self.roads if classify_congestion(r.daily_flow) != r.congestion_level]


@dataclass(frozen=True)
class ModelParams:
    """Economic and technical constants of the siting model.

    Defaults are the bundled case-study values, plus documented defaults
    for the remaining quantities (``beta``, ``eta``, radius,
    site cost, vehicle bounds, grid cap, hourly arrival profile).
    """

    D: int = 234
    T_year: float = 365.0
    alpha: float = 0.08
    cap_kwh: float = 80.0
    soc_ref: float = 0.9
    soc_0: float = 0.3
    c_s: float = 1.0
    c_p: float = 0.8
    r: float = 0.03
    T_life_years: float = 5.0
    c_fast: float = 25000.0
    c_slow: float = 10000.0
    mu: float = 0.2
    k_time: float = 17.0
    v0_kmh: float = 40.0
    g_kwh_per_km: float = 0.3
    t_d_hours: float = 16.0
    p_fast_kw: float = 80.0
    p_slow_kw: float = 40.0
    beta: float = 0.1
    eta: float = 1.5
    n_fast_min: int = 10
    n_fast_max: int = 35
    n_slow_min: int = 10
    n_slow_max: int = 35
    b_min: float = 100.0
    b_max: float = 1200.0
    p_max_kw: float = 60000.0
    r_service_km: float = 3.4
    c_site_yuan: float = 680000.0
    arrival_profile: tuple[float, ...] = field(default_factory=lambda: (1.0 / 24,) * 24)

    def __post_init__(self) -> None:
        object.__setattr__(self, "arrival_profile", tuple(float(x) for x in self.arrival_profile))

    @property
    def delta_soc(self) -> float:
        return self.soc_ref - self.soc_0

    @property
    def session_kwh(self) -> float:
        """Energy delivered per charging session (cap * delta SOC)."""
        return self.cap_kwh * self.delta_soc

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["arrival_profile"] = list(self.arrival_profile)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        names = [f.name for f in dataclasses.fields(cls)]
        missing = [n for n in names if n not in data]
        if missing:
            raise DataError(f"params missing key(s): {', '.join(missing)}")
        unknown = sorted(set(data) - set(names))
        if unknown:
            raise DataError(f"params has unknown key(s): {', '.join(unknown)}")
        return cls(**{n: data[n] for n in names})


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[tuple[str, str], ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        # truthy when there is something to report
        return bool(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def messages(self) -> list[str]:
        return [f"{name}: {msg}" for name, msg in self.violations]


def validate_params(params: ModelParams) -> ValidationReport:
    """Collect every invariant violation of ``params``; empty when valid."""
    out: list[tuple[str, str]] = []

    def need(cond: bool, name: str, msg: str) -> None:
        if not cond:
            out.append((name, msg))

    p = params
    need(p.soc_0 >= 0.2, "soc_0", "soc_0 ≥ 0.2")
    need(p.soc_ref <= 0.9, "soc_ref", "soc_ref ≤ 0.9")
    need(0 < p.soc_0 < p.soc_ref <= 1, "soc_0", "0 < soc_0 < soc_ref ≤ 1")
    need(p.c_p > 0, "c_p", "c_p > 0")
    need(p.c_s > p.c_p, "c_s", "c_s > c_p")
    need(0 < p.alpha <= 1, "alpha", "0 < alpha ≤ 1")
    for name in ("D", "T_year", "cap_kwh", "T_life_years", "c_fast", "c_slow", "k_time",
                 "v0_kmh", "t_d_hours", "p_fast_kw", "p_slow_kw", "beta", "eta",
                 "b_max", "p_max_kw", "r_service_km", "r"):
        need(getattr(p, name) > 0, name, f"{name} > 0")
    for name in ("mu", "g_kwh_per_km", "c_site_yuan", "b_min",
                 "n_fast_min", "n_fast_max", "n_slow_min", "n_slow_max"):
        need(getattr(p, name) >= 0, name, f"{name} ≥ 0")
    need(p.n_fast_min <= p.n_fast_max, "n_fast_min", "n_fast_min ≤ n_fast_max")
    need(p.n_slow_min <= p.n_slow_max, "n_slow_min", "n_slow_min ≤ n_slow_max")
    need(p.n_fast_max + p.n_slow_max > 0, "n_fast_max", "at least one pile type allowed")
    need(p.b_min <= p.b_max, "b_min", "b_min ≤ b_max")
    prof = np.asarray(p.arrival_profile, dtype=float)
    need(prof.shape == (24,) and bool(np.all(prof >= 0)) and abs(prof.sum() - 1) < 1e-9,
         "arrival_profile", "24 nonnegative weights summing to 1")
    return ValidationReport(tuple(out))


@dataclass
class Plan:
    """One siting-and-sizing plan; index i refers to candidate site i+1."""

    open: np.ndarray
    nf: np.ndarray
    ns: np.ndarray
    rank: int | None = None
    crowding: float | None = None
    objectives: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        self.open = np.asarray(self.open, dtype=np.int8)
        self.nf = np.asarray(self.nf, dtype=np.int64)
        self.ns = np.asarray(self.ns, dtype=np.int64)
        if not (self.open.shape == self.nf.shape == self.ns.shape) or self.open.ndim != 1:
            raise ValueError("open, nf and ns must be 1-d arrays of equal length")

    @property
    def n_stations(self) -> int:
        return int(self.open.sum())

    @property
    def stations(self) -> np.ndarray:
        """0-based indices of open sites."""
        return np.flatnonzero(self.open)

    def key(self) -> bytes:
        return self.open.tobytes() + self.nf.tobytes() + self.ns.tobytes()

    def check_invariants(self, params: ModelParams) -> list[str]:
        errs = []
        closed = self.open == 0
        if np.any(self.nf[closed] != 0) or np.any(self.ns[closed] != 0):
            errs.append("closed site with piles")
        o = ~closed
        if np.any((self.nf[o] < params.n_fast_min) | (self.nf[o] > params.n_fast_max)):
            errs.append("fast pile count out of bounds")
        if np.any((self.ns[o] < params.n_slow_min) | (self.ns[o] > params.n_slow_max)):
            errs.append("slow pile count out of bounds")
        return errs

    @classmethod
    def from_stations(cls, D: int, stations: dict[int, tuple[int, int]]) -> "Plan":
        """Build from ``{road_id: (n_fast, n_slow)}`` with 1-based road ids."""
        open_ = np.zeros(D, dtype=np.int8)
        nf = np.zeros(D, dtype=np.int64)
        ns = np.zeros(D, dtype=np.int64)
        for rid, (f, s) in stations.items():
            open_[rid - 1] = 1
            nf[rid - 1] = f
            ns[rid - 1] = s
        return cls(open_, nf, ns)


@dataclass(frozen=True)
class CostBreakdown:
    income: float
    annual_cost: float
    pile_cost_total: float
    om_cost_total: float
    travel_time_cost: float
    queue_time_cost: float
    energy_cost: float
    f1: float
    f2: float
    # annualized shares of annual_cost, reported in the plan cost tables
    site_cost_annual: float = 0.0
    pile_cost_annual: float = 0.0

    REPORT_COLUMNS = (
        "annual_construction_cost",
        "annual_pile_purchase_cost",
        "annual_om_cost",
        "annual_profit",
        "travel_loss_time_cost",
        "queue_time_cost",
        "total_time_cost",
        "energy_cost",
        "total_additional_cost",
    )

    def report_row(self) -> dict[str, float]:
        """Nine-column cost report row."""
        return {
            "annual_construction_cost": self.site_cost_annual,
            "annual_pile_purchase_cost": self.pile_cost_annual,
            "annual_om_cost": self.om_cost_total,
            "annual_profit": -self.f1,
            "travel_loss_time_cost": self.travel_time_cost,
            "queue_time_cost": self.queue_time_cost,
            "total_time_cost": self.travel_time_cost + self.queue_time_cost,
            "energy_cost": self.energy_cost,
            "total_additional_cost": self.f2,
        }


# ---------------------------------------------------------------------------
# serialization

def _fmt(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def _num(text: str) -> float:
    v = float(text)
    return int(v) if v.is_integer() and "." not in text and "e" not in text.lower() else v


def dump_roads_csv(network: RoadNetwork) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROAD_COLUMNS)
    for r in network.roads:
        w.writerow([
            r.id, _fmt(r.daily_flow), r.congestion_level, _fmt(r.length_km),
            _fmt(r.midpoint[0]), _fmt(r.midpoint[1]), ";".join(str(n) for n in r.neighbors),
        ])
    return buf.getvalue()


def parse_roads_csv(text: str, source: str = "roads.csv") -> RoadNetwork:
    """Parse the roads table; errors name the offending line."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{source}: empty file") from None
    if tuple(h.strip() for h in header) != ROAD_COLUMNS:
        raise DataError(f"{source}:1: expected header {','.join(ROAD_COLUMNS)}")
    roads = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(ROAD_COLUMNS):
            raise DataError(f"{source}:{lineno}: expected {len(ROAD_COLUMNS)} fields, got {len(row)}")
        try:
            rid = int(row[0])
            flow = _num(row[1])
            level = int(row[2])
            length = _num(row[3])
            xy = (_num(row[4]), _num(row[5]))
            nbrs = tuple(int(n) for n in row[6].split(";") if n.strip())
        except ValueError as exc:
            raise DataError(f"{source}:{lineno}: {exc}") from None
        if flow <= 0:
            raise DataError(f"{source}:{lineno}: road {rid} has non-positive daily_flow {row[1]}")
        try:
            roads.append(Road(rid, flow, level, length, xy, nbrs))
        except DataError as exc:
            raise DataError(f"{source}:{lineno}: {exc}") from None
    try:
        return RoadNetwork(tuple(roads))
    except DataError as exc:
        raise DataError(f"{source}: {exc}") from None


def load_roads(path: str | Path) -> RoadNetwork:
    path = Path(path)
    return parse_roads_csv(path.read_text(encoding="utf-8"), source=str(path))


def save_roads(network: RoadNetwork, path: str | Path) -> None:
    Path(path).write_text(dump_roads_csv(network), encoding="utf-8")


def dump_params_json(params: ModelParams) -> str:
    return json.dumps(params.to_dict(), indent=2) + "\n"


def parse_params_json(text: str, source: str = "params.json") -> ModelParams:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{source}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise DataError(f"{source}: expected a JSON object")
    try:
        return ModelParams.from_dict(data)
    except DataError as exc:
        raise DataError(f"{source}: {exc}") from None


def load_params(path: str | Path) -> ModelParams:
    path = Path(path)
    return parse_params_json(path.read_text(encoding="utf-8"), source=str(path))


def save_params(params: ModelParams, path: str | Path) -> None:
    Path(path).write_text(dump_params_json(params), encoding="utf-8")


def roads_from_flows(
    flows: Sequence[float],
    midpoints: Iterable[tuple[float, float]],
    neighbors: Iterable[Sequence[int]],
    length_km: float | Sequence[float],
) -> RoadNetwork:
    flows = list(flows)
    lengths = [length_km] * len(flows) if np.isscalar(length_km) else list(length_km)
    roads = tuple(
        Road(i + 1, f, classify_congestion(f), float(lengths[i]), tuple(xy), tuple(nb))
        for i, (f, xy, nb) in enumerate(zip(flows, midpoints, neighbors))
    )
    return RoadNetwork(roads)
