"""Problem adapters handed to the NSGA-II engine."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .core import CostBreakdown, ModelParams, Plan, RoadNetwork
from .costs import evaluate as evaluate_costs
from .feasibility import FeasibilityReport, GeneBounds, check, repair_genes
from .network import DistanceMatrix, assign_demand


@dataclass(frozen=True)
class Evaluation:
    objectives: tuple[float, float]
    violation: float
    detail: Any = None


class ChargingProblem:
    """Siting-and-sizing problem over the ``[open | nf | ns]`` gene layout."""

    def __init__(self, network: RoadNetwork, dm: DistanceMatrix, params: ModelParams,
                 congestion_aware: bool = True):
        self.network = network
        self.dm = dm
        self.params = params
        self.congestion_aware = congestion_aware
        self.bounds = GeneBounds.for_problem(network, dm, params)
        D = len(network)
        self.lower = self.bounds.lower
        self.upper = self.bounds.upper
        self.binary_genes = np.arange(3 * D) < D
        self.integer_genes = ~self.binary_genes

    def decode(self, genes: np.ndarray) -> tuple[Plan, np.ndarray]:
        return repair_genes(genes, self.bounds)

    @staticmethod
    def key(plan: Plan) -> bytes:
        return plan.key()

    def evaluate(self, plan: Plan) -> Evaluation:
        breakdown, report = self.assess(plan)
        return Evaluation((breakdown.f1, breakdown.f2), report.total_violation, (breakdown, report))

    def assess(self, plan: Plan) -> tuple[CostBreakdown, FeasibilityReport]:
        a = assign_demand(plan, self.dm, self.network, self.params)
        breakdown = evaluate_costs(plan, self.network, self.dm, self.params,
                                   congestion_aware=self.congestion_aware, assignment=a)
        report = check(plan, a, self.dm, self.network, self.params, bounds=self.bounds.n_range)
        return breakdown, report


class ConvexTestProblem:
    """Two-gene bi-objective benchmark with a known Pareto front.

    Minimizes ``(x1^2 + x2^2, (x1 - 2)^2 + x2^2)``; the Pareto set is
    ``x2 = 0, 0 <= x1 <= 2`` and the front is ``f2 = (sqrt(f1) - 2)^2``.
    """

    def __init__(self, lower=(-2.0, -2.0), upper=(4.0, 2.0)):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.binary_genes = np.zeros(2, dtype=bool)
        self.integer_genes = np.zeros(2, dtype=bool)

    def decode(self, genes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        g = np.clip(np.asarray(genes, dtype=float), self.lower, self.upper)
        return g, g

    @staticmethod
    def key(x: np.ndarray) -> bytes:
        return np.asarray(x, dtype=float).tobytes()

    def evaluate(self, x: np.ndarray) -> Evaluation:
        x1, x2 = float(x[0]), float(x[1])
        return Evaluation((x1 * x1 + x2 * x2, (x1 - 2.0) ** 2 + x2 * x2), 0.0)

    @staticmethod
    def front_distance(points: np.ndarray, samples: int = 20001) -> np.ndarray:
        """Euclidean distance of each objective point to the analytic front."""
        t = np.linspace(0.0, 2.0, samples)
        curve = np.column_stack([t * t, (t - 2.0) ** 2])
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(len(pts))
        for lo in range(0, len(pts), 256):
            chunk = pts[lo:lo + 256]
            gap = np.hypot(curve[None, :, 0] - chunk[:, None, 0], curve[None, :, 1] - chunk[:, None, 1])
            out[lo:lo + 256] = gap.min(axis=1)
        return out
