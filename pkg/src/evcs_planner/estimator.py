"""scikit-learn style wrappers around the planner and the entropy-weight ranker."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import ModelParams, Plan, RoadNetwork, roads_from_flows
from .decision import entropy_weights
from .moea import AlgoConfig
from .network import DistanceMatrix, build_distance_matrix, synthetic_grid_network
from .pipeline import Instance, RunManifest, apply_pile_mode, assess_plan, bundled_params, optimize


def _as_network(X) -> RoadNetwork:
    if isinstance(X, RoadNetwork):
        return X
    flows = check_array(np.asarray(X, dtype=float).reshape(-1, 1), ensure_min_samples=2).ravel()
    return synthetic_grid_network(flows)


class ChargingStationPlanner(BaseEstimator):
    """Optimize a siting-and-sizing plan for one road network.

    ``fit`` accepts a :class:`RoadNetwork` or a vector of daily flows laid on
    the default 13 x 18 grid.

    Attributes:
        archive_: final Pareto archive.
        pareto_front_: ``(n, 2)`` objective array ordered by ascending f1.
        scores_: entropy-weight score per archived plan (``None`` for one plan).
        best_index_: index of the selected plan in ``pareto_front_``.
        best_plan_: the selected :class:`Plan`.
        feasible_: whether every archived plan satisfies all constraints.
    """

    def __init__(self, pop_size: int = 200, generations: int = 500, crossover_prob: float = 0.9,
                 mutation_prob: float = 0.1, tau: float = 4.0, random_state: int = 0,
                 congestion_aware: bool = True, pile_mode: str = "mixed",
                 params: ModelParams | None = None, n_jobs: int = 1):
        self.pop_size = pop_size
        self.generations = generations
        self.crossover_prob = crossover_prob
        self.mutation_prob = mutation_prob
        self.tau = tau
        self.random_state = random_state
        self.congestion_aware = congestion_aware
        self.pile_mode = pile_mode
        self.params = params
        self.n_jobs = n_jobs

    def _instance(self, X, dm: DistanceMatrix | None) -> Instance:
        network = _as_network(X)
        params = self.params if self.params is not None else bundled_params()
        params = apply_pile_mode(params.replace(D=len(network)), self.pile_mode)
        return Instance(network, dm if dm is not None else build_distance_matrix(network), params)

    def fit(self, X, y=None, dm: DistanceMatrix | None = None):
        AlgoConfig(self.pop_size, self.generations, self.crossover_prob, self.mutation_prob,
                   self.tau, self.random_state)
        inst = self._instance(X, dm)
        manifest = RunManifest(pop_size=self.pop_size, generations=self.generations,
                               crossover_prob=self.crossover_prob, mutation_prob=self.mutation_prob,
                               tau=self.tau, seed=self.random_state,
                               congestion_aware=self.congestion_aware, pile_mode=self.pile_mode,
                               n_jobs=self.n_jobs)
        outcome = optimize(manifest, inst)
        self.instance_ = inst
        self.outcome_ = outcome
        self.archive_ = outcome.result.archive
        self.pareto_front_ = np.array([(p.breakdown.f1, p.breakdown.f2) for p in outcome.plans])
        self.scores_ = None if outcome.decision is None else outcome.decision.scores
        self.best_index_ = outcome.selected
        self.best_plan_ = outcome.selected_plan.plan
        self.feasible_ = outcome.feasible
        self.history_ = outcome.result.history
        return self

    def predict(self, plans) -> np.ndarray:
        """``(f1, f2)`` of each plan on the fitted network."""
        check_is_fitted(self, "archive_")
        if isinstance(plans, Plan):
            plans = [plans]
        rows = []
        for plan in plans:
            b, _ = assess_plan(plan, self.instance_, self.congestion_aware)
            rows.append((b.f1, b.f2))
        return np.array(rows, dtype=float).reshape(-1, 2)


class EntropyWeightRanker(TransformerMixin, BaseEstimator):
    """Entropy-weight scoring of cost-type criteria (smaller is better).

    ``fit`` learns per-column ranges and entropy weights; ``transform``
    returns normalized benefit values in [0, 1]; ``decision_function``
    the weighted score; ``predict`` marks the single best row with 1.
    """

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2)
        self.data_max_ = X.max(axis=0)
        self.data_min_ = X.min(axis=0)
        self.n_features_in_ = X.shape[1]
        Y = self._normalize(X)
        self.shares_, self.entropies_, self.weights_ = entropy_weights(Y)
        return self

    def _normalize(self, X: np.ndarray) -> np.ndarray:
        span = self.data_max_ - self.data_min_
        Y = np.zeros_like(X, dtype=float)
        ok = span > 0
        Y[:, ok] = (self.data_max_[ok] - X[:, ok]) / span[ok]
        return np.clip(Y, 0.0, 1.0)

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "weights_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return self._normalize(X)

    def decision_function(self, X) -> np.ndarray:
        return self.transform(X) @ self.weights_

    def predict(self, X) -> np.ndarray:
        X = check_array(X)
        S = self.decision_function(X)
        top = np.flatnonzero(S == S.max())
        if top.size > 1 and X.shape[1] > 1:
            top = top[X[top, 1] == X[top, 1].min()]
        out = np.zeros(len(X), dtype=int)
        out[top[0]] = 1
        return out
