"""Operator profit and user additional-cost objectives of a plan."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, pdtr

from .core import CostBreakdown, ModelParams, Plan, RoadNetwork
from .network import Assignment, DistanceMatrix, assign_demand, road_lambdas

# Offered load at or above this fraction of capacity counts as saturated.
SATURATION_RHO = 0.999


def capital_recovery_factor(r: float, T: float) -> float:
    """Annuity factor ``r(1+r)^T / ((1+r)^T - 1)``."""
    if r <= 0:
        raise ValueError(f"discount rate must be positive, got {r}")
    if T < 1:
        raise ValueError(f"operating life must be at least one year, got {T}")
    growth = (1.0 + r) ** T
    # expm1/log1p keep precision for tiny rates
    denom = np.expm1(T * np.log1p(r))
    return float(r * growth / denom)


def station_capacity(nf, ns, params: ModelParams):
    """Rated station power in kW; works elementwise on arrays."""
    cap = np.asarray(nf) * params.p_fast_kw + np.asarray(ns) * params.p_slow_kw
    return float(cap) if cap.ndim == 0 else cap


def total_demand_kwh(network: RoadNetwork, params: ModelParams) -> float:
    return float(params.alpha * network.flows.sum() * params.session_kwh)


def operator_income(network: RoadNetwork, params: ModelParams) -> float:
    margin = params.c_s - params.c_p
    return float(params.T_year * params.alpha * network.flows.sum() * params.session_kwh * margin)


def pile_purchase_cost(plan: Plan, params: ModelParams) -> float:
    o = plan.open.astype(bool)
    return float(params.c_fast * plan.nf[o].sum() + params.c_slow * plan.ns[o].sum())


def annualized_operator_cost(plan: Plan, params: ModelParams) -> float:
    """Annualized investment plus O&M, both on site + pile investment."""
    investment = plan.n_stations * params.c_site_yuan + pile_purchase_cost(plan, params)
    crf = capital_recovery_factor(params.r, params.T_life_years)
    return (crf + params.mu) * investment


def _pair_sum(assignment: Assignment, dm: DistanceMatrix, weights: np.ndarray) -> float:
    covered = assignment.covered
    rows = np.flatnonzero(covered)
    d = dm.d[rows, assignment.station_of_road[rows]]
    return float(np.sum(weights[rows] * assignment.num_ij[rows] * d))


def travel_time_cost(assignment: Assignment, dm: DistanceMatrix, network: RoadNetwork,
                     params: ModelParams, congestion_aware: bool = True) -> float:
    """Yearly value of drive time to the station, slowed by the origin road's congestion."""
    lam = road_lambdas(network, congestion_aware)
    return params.T_year * params.k_time * _pair_sum(assignment, dm, lam) / params.v0_kmh


def energy_loss_cost(assignment: Assignment, dm: DistanceMatrix, network: RoadNetwork,
                     params: ModelParams) -> float:
    ones = np.ones(len(network))
    return params.T_year * params.c_s * params.g_kwh_per_km * _pair_sum(assignment, dm, ones)


@dataclass(frozen=True)
class QueueEstimate:
    wait_hours: np.ndarray
    utilization: np.ndarray


def erlang_c_wait(servers, arrival_rate, service_rate, cap_hours: float = np.inf):
    """Mean M/M/c queueing delay (Erlang-C), vectorized over matching arrays.

    Loads with utilization at or above ``SATURATION_RHO`` return ``cap_hours``.
    Returns ``(wait, utilization)``.
    """
    c = np.atleast_1d(np.asarray(servers, dtype=np.int64))
    lam = np.atleast_1d(np.asarray(arrival_rate, dtype=float))
    mu = np.atleast_1d(np.asarray(service_rate, dtype=float))
    c, lam, mu = np.broadcast_arrays(c, lam, mu)
    if np.any(c < 1):
        raise ValueError("a queue needs at least one server")
    a = lam / mu
    rho = a / c
    # Erlang-B as Poisson pmf / cdf at c, evaluated in log space
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pmf = c * np.log(a) - a - gammaln(c + 1.0)
        b = np.exp(log_pmf) / pdtr(c, a)
    saturated = rho >= SATURATION_RHO
    with np.errstate(divide="ignore", invalid="ignore"):
        pw = c * b / (c - a * (1.0 - b))
        wait = pw / (c * mu - lam)
    wait = np.where(lam <= 0, 0.0, wait)
    wait = np.where(saturated, cap_hours, wait)
    return wait, rho


def queue_wait(nf: int, ns: int, hourly_arrivals_j, params: ModelParams) -> QueueEstimate:
    """Hourly mean waits of one station, its piles pooled at their mean power."""
    c = int(nf) + int(ns)
    if c < 1:
        raise ValueError("station has no charging piles")
    mean_power = float(station_capacity(nf, ns, params)) / c
    mu_s = mean_power / params.session_kwh
    arrivals = np.asarray(hourly_arrivals_j, dtype=float)
    wait, rho = erlang_c_wait(np.full(arrivals.shape, c), arrivals, mu_s, params.t_d_hours)
    return QueueEstimate(wait, rho)


def station_waits(plan: Plan, assignment: Assignment, params: ModelParams) -> np.ndarray:
    """(D, 24) waits; rows of closed sites are zero."""
    D = len(plan.open)
    out = np.zeros((D, len(params.arrival_profile)))
    st = plan.stations
    if st.size == 0:
        return out
    c = plan.nf[st] + plan.ns[st]
    if np.any(c < 1):
        raise ValueError("open station without piles")
    mu_s = station_capacity(plan.nf[st], plan.ns[st], params) / c / params.session_kwh
    arr = assignment.hourly_arrivals[st]
    wait, _ = erlang_c_wait(np.repeat(c[:, None], arr.shape[1], axis=1), arr,
                            np.repeat(mu_s[:, None], arr.shape[1], axis=1), params.t_d_hours)
    out[st] = wait
    return out


def queue_time_cost(plan: Plan, assignment: Assignment, params: ModelParams) -> float:
    waits = station_waits(plan, assignment, params)
    return float(params.T_year * params.k_time * np.sum(assignment.hourly_arrivals * waits))


def evaluate(plan: Plan, network: RoadNetwork, dm: DistanceMatrix, params: ModelParams,
             congestion_aware: bool = True, assignment: Assignment | None = None) -> CostBreakdown:
    """Both objectives and their components for ``plan``."""
    income = operator_income(network, params)
    crf = capital_recovery_factor(params.r, params.T_life_years)
    site_total = plan.n_stations * params.c_site_yuan
    pile_total = pile_purchase_cost(plan, params)
    om = params.mu * (site_total + pile_total)
    annual = crf * (site_total + pile_total) + om
    if plan.n_stations == 0:
        t1 = t2 = loss = 0.0
    else:
        if assignment is None:
            assignment = assign_demand(plan, dm, network, params)
        t1 = travel_time_cost(assignment, dm, network, params, congestion_aware)
        t2 = queue_time_cost(plan, assignment, params)
        loss = energy_loss_cost(assignment, dm, network, params)
    return CostBreakdown(
        income=income,
        annual_cost=annual,
        pile_cost_total=pile_total,
        om_cost_total=om,
        travel_time_cost=t1,
        queue_time_cost=t2,
        energy_cost=loss,
        f1=annual - income,
        f2=t1 + t2 + loss,
        site_cost_annual=crf * site_total,
        pile_cost_annual=crf * pile_total,
    )
