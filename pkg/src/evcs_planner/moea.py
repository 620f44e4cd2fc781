"""NSGA-II with logistic-map chaos initialization and arithmetic crossover."""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .core import ModelParams, Plan, RoadNetwork
from .feasibility import GeneBounds, repair_genes
from .network import DistanceMatrix
from .problem import ChargingProblem, Evaluation

logger = logging.getLogger(__name__)

# Logistic-map seeds this close to a short cycle or fixed point are rejected.
_BAD_SEEDS = (0.0, 0.25, 0.5, 0.75, 1.0)
_SEED_GUARD = 1e-6

# Offspring draws per population slot before a generation gives up on novelty.
_MATING_RETRIES = 20


@dataclass(frozen=True)
class AlgoConfig:
    pop_size: int = 200
    generations: int = 500
    crossover_prob: float = 0.9
    mutation_prob: float = 0.1
    tau: float = 4.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.pop_size < 4 or self.pop_size % 2:
            raise ValueError(f"pop_size must be an even integer >= 4, got {self.pop_size}")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_prob", "mutation_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.tau <= 4.0:
            raise ValueError(f"tau must lie in (0, 4], got {self.tau}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


# ---------------------------------------------------------------------------
# chaos initialization

def logistic_step(x: float, tau: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"logistic map state must lie in [0, 1], got {x}")
    return tau * x * (1.0 - x)


def chaos_seed(rng: np.random.Generator) -> float:
    while True:
        x = float(rng.random())
        if all(abs(x - b) > _SEED_GUARD for b in _BAD_SEEDS):
            return x


def logistic_trajectory(x0, tau: float, length: int) -> np.ndarray:
    """Iterates 1..length of the logistic map from ``x0`` (array seeds allowed)."""
    x = np.array(x0, dtype=float)
    out = np.empty((length,) + x.shape)
    for k in range(length):
        x = tau * x * (1.0 - x)
        out[k] = x
    return out


def chaos_genes(pop_size: int, lower: np.ndarray, upper: np.ndarray, tau: float,
                rng: np.random.Generator) -> np.ndarray:
    """One logistic trajectory per gene; individual k takes iterate k of each."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    seeds = np.array([chaos_seed(rng) for _ in range(lower.size)])
    traj = logistic_trajectory(seeds, tau, pop_size)
    return lower + traj * (upper - lower)


def chaos_init(config: AlgoConfig, bounds: GeneBounds, network: RoadNetwork | None = None,
               params: ModelParams | None = None,
               rng: np.random.Generator | None = None) -> list[Plan]:
    """Chaos-initialized, repaired population of plans."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    genes = chaos_genes(config.pop_size, bounds.lower, bounds.upper, config.tau, rng)
    return [repair_genes(g, bounds)[0] for g in genes]


# ---------------------------------------------------------------------------
# ranking

def dominates_rect(FA, VA, FB, VB) -> np.ndarray:
    """``M[p, q]`` is True when row p of A constrained-dominates row q of B."""
    FA = np.asarray(FA, dtype=float)
    FB = np.asarray(FB, dtype=float)
    VA = np.asarray(VA, dtype=float)
    VB = np.asarray(VB, dtype=float)
    le = np.ones((FA.shape[0], FB.shape[0]), dtype=bool)
    lt = np.zeros_like(le)
    for k in range(FA.shape[1]):
        a, b = FA[:, k, None], FB[None, :, k]
        le &= a <= b
        lt |= a < b
    fa, fb = VA <= 0, VB <= 0
    if fa.all() and fb.all():
        return le & lt
    both = fa[:, None] & fb[None, :]
    neither = ~fa[:, None] & ~fb[None, :]
    return ((both & le & lt)
            | (fa[:, None] & ~fb[None, :])
            | (neither & (VA[:, None] < VB[None, :])))


def domination_matrix(objectives, violations=None) -> np.ndarray:
    """``M[p, q]`` is True when p constrained-dominates q (all objectives minimized)."""
    F = np.asarray(objectives, dtype=float)
    v = np.zeros(F.shape[0]) if violations is None else np.asarray(violations, dtype=float)
    return dominates_rect(F, v, F, v)


def fast_nondominated_sort(objectives, violations=None) -> list[np.ndarray]:
    """Partition indices into fronts; ``fronts[0]`` is the nondominated set."""
    F = np.asarray(objectives, dtype=float)
    if F.ndim != 2 or F.shape[0] == 0:
        raise ValueError("objectives must be a nonempty (n, m) array")
    dom = domination_matrix(F, violations)
    remaining = dom.sum(axis=0)
    assigned = np.zeros(F.shape[0], dtype=bool)
    fronts = []
    while not assigned.all():
        current = np.flatnonzero((remaining == 0) & ~assigned)
        fronts.append(current)
        assigned[current] = True
        remaining = remaining - dom[current].sum(axis=0)
    return fronts


def ranks_from_fronts(fronts: Sequence[np.ndarray], n: int) -> np.ndarray:
    rank = np.empty(n, dtype=np.int64)
    for k, f in enumerate(fronts, start=1):
        rank[f] = k
    return rank


def crowding_distance(front_objectives) -> np.ndarray:
    F = np.atleast_2d(np.asarray(front_objectives, dtype=float))
    n, m = F.shape
    if n == 0:
        raise ValueError("front is empty")
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for k in range(m):
        order = np.argsort(F[:, k], kind="stable")
        vals = F[order, k]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = vals[-1] - vals[0]
        if span > 0:
            dist[order[1:-1]] += (vals[2:] - vals[:-2]) / span
    return dist


def rank_and_crowd(objectives, violations) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    F = np.asarray(objectives, dtype=float)
    fronts = fast_nondominated_sort(F, violations)
    rank = ranks_from_fronts(fronts, F.shape[0])
    crowd = np.empty(F.shape[0])
    for f in fronts:
        crowd[f] = crowding_distance(F[f])
    return fronts, rank, crowd


# ---------------------------------------------------------------------------
# variation

def binary_tournament(rank, crowding, rng: np.random.Generator) -> int:
    """Index of the better of two uniformly drawn individuals."""
    n = len(rank)
    if n == 0:
        raise ValueError("empty population")
    a, b = (int(i) for i in rng.integers(n, size=2))
    if rank[b] < rank[a] or (rank[b] == rank[a] and crowding[b] > crowding[a]):
        return b
    return a


def arithmetic_crossover(parent_a, parent_b, rng: np.random.Generator,
                         crossover_prob: float) -> tuple[np.ndarray, np.ndarray]:
    """Convex blend of two real-valued gene vectors with one weight per mating."""
    a = np.asarray(parent_a, dtype=float)
    b = np.asarray(parent_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("parents differ in dimensionality")
    if rng.random() >= crossover_prob:
        return a.copy(), b.copy()
    m = rng.random()
    n = 1.0 - m
    return m * a + n * b, n * a + m * b


def mutate(genes, rng: np.random.Generator, mutation_prob: float, lower, upper,
           binary_genes=None, integer_genes=None) -> np.ndarray:
    """With probability ``mutation_prob`` reset one uniformly chosen gene.

    Binary genes flip between 0 and 1, integer genes are redrawn uniformly
    from their integer range and other genes uniformly from their interval.
    """
    out = np.array(genes, dtype=float)
    if rng.random() >= mutation_prob:
        return out
    k = int(rng.integers(out.size))
    lo, hi = float(np.asarray(lower)[k]), float(np.asarray(upper)[k])
    if binary_genes is not None and binary_genes[k]:
        out[k] = 0.0 if out[k] >= 0.5 else 1.0
    elif integer_genes is not None and integer_genes[k]:
        out[k] = float(rng.integers(int(round(lo)), int(round(hi)) + 1))
    else:
        out[k] = rng.uniform(lo, hi)
    return out


# ---------------------------------------------------------------------------
# archive

@dataclass
class ArchiveEntry:
    solution: Any
    objectives: tuple[float, float]
    violation: float = 0.0
    detail: Any = None
    genes: np.ndarray | None = field(default=None, repr=False)


def _dominates(p: ArchiveEntry, q: ArchiveEntry) -> bool:
    if p.violation <= 0 < q.violation:
        return True
    if p.violation > 0 and q.violation > 0:
        return p.violation < q.violation
    if q.violation <= 0 < p.violation:
        return False
    fp, fq = p.objectives, q.objectives
    return all(a <= b for a, b in zip(fp, fq)) and any(a < b for a, b in zip(fp, fq))


class ParetoArchive:
    """Mutually nondominated entries; insertion keeps the invariant.

    Entries with identical objectives are kept once (the first arrival),
    unless the newcomer dominates through a lower constraint violation.
    """

    def __init__(self, entries: Sequence[ArchiveEntry] = ()):
        self.entries: list[ArchiveEntry] = []
        for e in entries:
            self.insert(e)

    def insert(self, entry: ArchiveEntry) -> bool:
        for e in self.entries:
            if _dominates(e, entry):
                return False
            if tuple(e.objectives) == tuple(entry.objectives) and not _dominates(entry, e):
                return False
        self.entries = [e for e in self.entries if not _dominates(entry, e)]
        self.entries.append(entry)
        return True

    def update(self, batch: Sequence[ArchiveEntry]) -> int:
        """Insert many entries at once; same result as inserting them in order.

        Returns the number of entries accepted.
        """
        batch = list(batch)
        if not batch:
            return 0
        Fc = np.array([e.objectives for e in batch], dtype=float).reshape(len(batch), -1)
        Vc = np.array([e.violation for e in batch], dtype=float)
        keep = ~dominates_rect(Fc, Vc, Fc, Vc).any(axis=0)
        # first occurrence of each objective vector among surviving candidates
        idx = np.flatnonzero(keep)
        _, first = np.unique(Fc[idx], axis=0, return_index=True)
        keep[:] = False
        keep[idx[first]] = True
        if self.entries:
            Fa = self.objectives
            Va = np.array([e.violation for e in self.entries], dtype=float)
            same = np.ones((len(Fa), len(Fc)), dtype=bool)
            for k in range(Fc.shape[1]):
                same &= Fa[:, k, None] == Fc[None, :, k]
            beats = dominates_rect(Fc, Vc, Fa, Va)
            duplicate = (same & ~beats.T).any(axis=0)
            keep &= ~dominates_rect(Fa, Va, Fc, Vc).any(axis=0) & ~duplicate
            idx = np.flatnonzero(keep)
            if idx.size:
                lost = beats[idx].any(axis=0)
                self.entries = [e for e, gone in zip(self.entries, lost) if not gone]
        idx = np.flatnonzero(keep)
        self.entries.extend(batch[i] for i in idx)
        return int(idx.size)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def objectives(self) -> np.ndarray:
        return np.array([e.objectives for e in self.entries], dtype=float).reshape(-1, 2)

    @property
    def feasible(self) -> bool:
        return all(e.violation <= 0 for e in self.entries)

    def sorted(self) -> "ParetoArchive":
        """Copy ordered by the first objective."""
        out = ParetoArchive()
        out.entries = sorted(self.entries, key=lambda e: tuple(e.objectives))
        return out

    def is_mutually_nondominated(self) -> bool:
        return not any(_dominates(p, q) for p in self.entries for q in self.entries if p is not q)


# ---------------------------------------------------------------------------
# main loop

@dataclass
class GenerationStats:
    generation: int
    feasible_count: int
    best_f1: float
    best_f2: float
    archive_size: int

    def line(self) -> str:
        return (f"gen={self.generation} feasible={self.feasible_count} "
                f"best_f1={self.best_f1:.1f} best_f2={self.best_f2:.1f} archive={self.archive_size}")


@dataclass
class RunResult:
    archive: ParetoArchive
    history: list[GenerationStats]
    population: list[ArchiveEntry]


def _evaluate_all(problem, solutions, n_jobs: int) -> list[Evaluation]:
    if n_jobs == 1 or len(solutions) < 2:
        return [problem.evaluate(s) for s in solutions]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(problem.evaluate, solutions))


def _stats(gen: int, F: np.ndarray, V: np.ndarray, archive: ParetoArchive) -> GenerationStats:
    feas = V <= 0
    best = F[feas].min(axis=0) if feas.any() else (np.nan, np.nan)
    n_arch = len(archive) if archive.feasible else 0
    return GenerationStats(gen, int(feas.sum()), float(best[0]), float(best[1]), n_arch)


def _entries(sols, evals, genes, index) -> list[ArchiveEntry]:
    return [ArchiveEntry(sols[i], tuple(evals[i].objectives), evals[i].violation,
                         evals[i].detail, genes[i]) for i in index]


def nsga2(problem, config: AlgoConfig, n_jobs: int = 1,
          callback: Callable[[int, ParetoArchive], None] | None = None) -> RunResult:
    """Elitist (mu + lambda) NSGA-II on a problem exposing bounds/decode/evaluate.

    Besides the population, an elite archive collects every rank-1 plan seen
    and drops members only when a newcomer dominates them, so no
    nondominated plan is lost to crowding truncation. ``callback`` receives
    the archive after each generation.

    All random draws happen in one serial order, so the result depends only on
    ``config.seed``; ``n_jobs`` only parallelizes objective evaluation.
    """
    rng = np.random.default_rng(config.seed)
    lower, upper = problem.lower, problem.upper
    pop = config.pop_size

    raw = chaos_genes(pop, lower, upper, config.tau, rng)
    decoded = [problem.decode(g) for g in raw]
    sols = [s for s, _ in decoded]
    genes = np.array([g for _, g in decoded])
    evals = _evaluate_all(problem, sols, n_jobs)
    F = np.array([e.objectives for e in evals], dtype=float)
    V = np.array([e.violation for e in evals], dtype=float)
    fronts, rank, crowd = rank_and_crowd(F, V)
    seen = {problem.key(s) for s in sols}
    archive = ParetoArchive()
    archive.update(_entries(sols, evals, genes, fronts[0]))
    history = [_stats(0, F, V, archive)]
    logger.info(history[-1].line())
    if callback is not None:
        callback(0, archive)

    for gen in range(1, config.generations + 1):
        # Mate until pop_size distinct new plans exist (bounded retries).
        decoded = []
        attempts = 0
        while len(decoded) < pop and attempts < _MATING_RETRIES * pop:
            a = binary_tournament(rank, crowd, rng)
            b = binary_tournament(rank, crowd, rng)
            ca, cb = arithmetic_crossover(genes[a], genes[b], rng, config.crossover_prob)
            for c in (ca, cb):
                attempts += 1
                c = mutate(c, rng, config.mutation_prob, lower, upper,
                           problem.binary_genes, problem.integer_genes)
                sol, proj = problem.decode(c)
                k = problem.key(sol)
                if k not in seen and len(decoded) < pop:
                    seen.add(k)
                    decoded.append((sol, proj))
        child_sols = [s for s, _ in decoded]
        child_evals = _evaluate_all(problem, child_sols, n_jobs)

        all_sols = sols + child_sols
        all_genes = np.vstack([genes] + [g[None, :] for _, g in decoded])
        all_evals = evals + child_evals
        F2 = np.vstack([F] + [np.asarray(e.objectives)[None, :] for e in child_evals])
        V2 = np.concatenate([V, [e.violation for e in child_evals]])
        fronts2, _, crowd2 = rank_and_crowd(F2, V2)

        keep: list[int] = []
        for f in fronts2:
            if len(keep) + f.size <= pop:
                keep.extend(f.tolist())
            else:
                order = np.argsort(-crowd2[f], kind="stable")
                keep.extend(f[order[: pop - len(keep)]].tolist())
            if len(keep) == pop:
                break
        idx = np.array(keep)
        sols = [all_sols[i] for i in idx]
        seen = {problem.key(s) for s in sols}
        genes = all_genes[idx]
        evals = [all_evals[i] for i in idx]
        F, V = F2[idx], V2[idx]
        fronts, rank, crowd = rank_and_crowd(F, V)
        archive.update(_entries(sols, evals, genes, fronts[0]))
        history.append(_stats(gen, F, V, archive))
        logger.info(history[-1].line())
        if callback is not None:
            callback(gen, archive)

    population = _entries(sols, evals, genes, range(len(sols)))
    if not archive.feasible:
        warnings.warn("no feasible solution found; archive holds the least-violating solutions",
                      RuntimeWarning, stacklevel=2)
    return RunResult(archive, history, population)


def evolve(network: RoadNetwork, dm: DistanceMatrix, params: ModelParams, config: AlgoConfig,
           congestion_aware: bool = True, n_jobs: int = 1) -> ParetoArchive:
    """Pareto archive of siting-and-sizing plans for one configuration."""
    return run_charging(network, dm, params, config, congestion_aware, n_jobs).archive


def run_charging(network: RoadNetwork, dm: DistanceMatrix, params: ModelParams,
                 config: AlgoConfig, congestion_aware: bool = True, n_jobs: int = 1) -> RunResult:
    problem = ChargingProblem(network, dm, params, congestion_aware)
    result = nsga2(problem, config, n_jobs=n_jobs)
    for e in result.archive:
        e.solution.objectives = tuple(e.objectives)
    return result
