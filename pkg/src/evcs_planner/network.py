"""Congestion multipliers, road-graph distances and demand assignment."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .core import DataError, ModelParams, Plan, RoadNetwork, roads_from_flows

logger = logging.getLogger(__name__)

# Travel speed (km/h) per congestion level 0..4.
LEVEL_SPEEDS_KMH = (40.0, 28.0, 25.0, 22.0, 20.0)
FREE_FLOW_KMH = LEVEL_SPEEDS_KMH[0]

GRID_ROWS = 13
GRID_COLS = 18
GRID_ROAD_LENGTH_KM = 0.85
GRID_EXTENT_KM = 10.0

# Slack for distance-vs-radius comparisons; path sums of decimal lengths
# otherwise land a few ulps on either side of a radius.
DISTANCE_TOL_KM = 1e-9


def within(dist, radius: float):
    """``dist <= radius`` up to ``DISTANCE_TOL_KM``."""
    return np.asarray(dist) <= radius + DISTANCE_TOL_KM


def lambda_index(level: int) -> float:
    """Travel-time multiplier of a road relative to free flow."""
    if level not in (0, 1, 2, 3, 4):
        raise ValueError(f"congestion level must be in 0..4, got {level!r}")
    return FREE_FLOW_KMH / LEVEL_SPEEDS_KMH[level]


LAMBDA_TABLE = np.array([lambda_index(lv) for lv in range(5)])


def travel_speed(level: int, v0: float) -> float:
    if not v0 > 0:
        raise ValueError(f"free-flow speed must be positive, got {v0}")
    return v0 / lambda_index(level)


def road_lambdas(network: RoadNetwork, congestion_aware: bool = True) -> np.ndarray:
    if not congestion_aware:
        return np.ones(len(network))
    return LAMBDA_TABLE[network.levels]


@dataclass(frozen=True)
class DistanceMatrix:
    """``d[i, j]``: travel distance (km) from road i's midpoint to site j."""

    d: np.ndarray

    def __post_init__(self) -> None:
        self.d.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.d.shape


def build_distance_matrix(network: RoadNetwork) -> DistanceMatrix:
    """All-pairs shortest paths over the road adjacency graph.

    Adjacent roads are joined by an edge of weight ``(len_i + len_j) / 2``.
    Unreachable pairs are ``inf`` and trigger a warning.
    """
    n = len(network)
    if n == 0:
        raise DataError("empty network")
    lengths = network.lengths
    rows, cols, w = [], [], []
    for road in network.roads:
        i = road.id - 1
        for nb in road.neighbors:
            j = nb - 1
            rows.append(i)
            cols.append(j)
            w.append((lengths[i] + lengths[j]) / 2.0)
    graph = csr_matrix((w, (rows, cols)), shape=(n, n))
    d = shortest_path(graph, method="D", directed=False)
    if np.isinf(d).any():
        logger.warning("road graph is disconnected; %d unreachable pairs", int(np.isinf(d).sum()))
    return DistanceMatrix(np.ascontiguousarray(d))


def load_sites_csv(path: str | Path, network: RoadNetwork) -> DistanceMatrix:
    """Distance matrix for an explicit candidate-site geometry (``id,x_km,y_km``).

    Sites are attached to their closest road midpoint (Euclidean) and the
    distance from road i to site j is the road-graph distance to that
    attachment point plus the straight-line hop from it to the site.
    """
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["id", "x_km", "y_km"]:
        raise DataError(f"{path}:1: expected header id,x_km,y_km")
    coords = {}
    for lineno, row in enumerate(reader, start=2):
        try:
            coords[int(row["id"])] = (float(row["x_km"]), float(row["y_km"]))
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    if sorted(coords) != list(range(1, len(network) + 1)):
        raise DataError(f"{path}: site ids must be exactly 1..{len(network)}")
    sites = np.array([coords[k] for k in sorted(coords)])
    mids = network.midpoints
    base = build_distance_matrix(network).d
    hop = np.linalg.norm(sites[:, None, :] - mids[None, :, :], axis=2)  # site x road
    attach = hop.argmin(axis=1)
    d = base[:, attach] + hop[np.arange(len(sites)), attach][None, :]
    return DistanceMatrix(d)


def grid_layout(rows: int = GRID_ROWS, cols: int = GRID_COLS, extent_km: float = GRID_EXTENT_KM):
    """Midpoints spread over a square of side ``extent_km`` and 4-neighbour
    adjacency for roads laid row-major on a ``rows x cols`` grid."""
    xs = np.linspace(0.0, extent_km, cols)
    ys = np.linspace(0.0, extent_km, rows)
    mids, nbrs = [], []
    for k in range(rows * cols):
        r, c = divmod(k, cols)
        mids.append((float(xs[c]), float(ys[r])))
        nb = []
        if r > 0:
            nb.append(k - cols + 1)
        if c > 0:
            nb.append(k)
        if c < cols - 1:
            nb.append(k + 2)
        if r < rows - 1:
            nb.append(k + cols + 1)
        nbrs.append(nb)
    return mids, nbrs


def synthetic_grid_network(flows: Sequence[float], rows: int = GRID_ROWS, cols: int = GRID_COLS,
                           road_length_km: float = GRID_ROAD_LENGTH_KM,
                           extent_km: float = GRID_EXTENT_KM) -> RoadNetwork:
    """Roads on a ``rows x cols`` lattice, each ``road_length_km`` long.

    Graph distance is ``road_length_km`` per lattice hop. Keep the midpoint
    spacing ``extent_km / (n - 1)`` at or below the road length so graph
    distance never undercuts straight-line distance.
    """
    if len(flows) != rows * cols:
        raise ValueError(f"need {rows * cols} flows for a {rows}x{cols} grid, got {len(flows)}")
    mids, nbrs = grid_layout(rows, cols, extent_km)
    return roads_from_flows(flows, mids, nbrs, road_length_km)


@dataclass(frozen=True)
class Assignment:
    station_of_road: np.ndarray   # 0-based site index, -1 when uncovered
    num_ij: np.ndarray            # charging vehicles/day each road sends to its station
    delta_j: np.ndarray           # per site, charging vehicles/day served (0 when closed)
    hourly_arrivals: np.ndarray   # (D, 24)
    covered: np.ndarray           # bool per road
    nearest_distance: np.ndarray  # km to nearest open site, per road

    @property
    def uncovered_roads(self) -> np.ndarray:
        return np.flatnonzero(~self.covered)


def nearest_open(d: np.ndarray, stations: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest open site per road; ties go to the lower site index."""
    sub = d[:, stations]
    k = sub.argmin(axis=1)  # argmin returns the first minimum
    return stations[k], sub[np.arange(d.shape[0]), k]


def assign_demand(plan: Plan, dm: DistanceMatrix, network: RoadNetwork,
                  params: ModelParams) -> Assignment:
    """Send each road's charging demand to its nearest open station.

    Roads farther than the service radius from every open station are left
    uncovered and contribute nothing to station loads.
    """
    stations = plan.stations
    if stations.size == 0:
        raise ValueError("plan has no open stations")
    demand = params.alpha * network.flows
    site, dist = nearest_open(dm.d, stations)
    covered = within(dist, params.r_service_km)
    station_of_road = np.where(covered, site, -1)
    num_ij = np.where(covered, demand, 0.0)
    delta = np.bincount(site[covered], weights=demand[covered], minlength=len(network))
    hourly = np.outer(delta, np.asarray(params.arrival_profile))
    return Assignment(station_of_road, num_ij, delta, hourly, covered, dist)
