"""Choosing which agents a new committed voice should reach.

The planner attaches one committed agent (fixed opinion theta_agent, read
with probability p_agent by each chosen target) to a budgeted set of
persuadable targets so as to maximize either the average equilibrium
opinion or the number of agents pushed above a threshold. The mean
objective is monotone and submodular in the target set, so the classic
greedy sweep is within a (1 - 1/e) factor of optimal.

Greedy cost is dominated by evaluating marginal gains. For the mean
objective with an opinion-1 agent the gain of adding target k to the
current set has a closed form in the current modified system: with
M the negated modified coupling block, equilibrium theta0, and
u = M^-1 e_k,

    gain(k) = p * (1 - theta0[k]) * sum(M^-T 1)[k] / (1 + p * M^-1[k, k])

one transpose solve gives the column aggregates for every candidate at
once and one batched solve gives the diagonals, so each greedy round
costs a factorization plus pool-many triangular solves instead of
pool-many fresh factorizations. The formula is the Sherman-Morrison
rank-one update of the inverse, and it must agree with a full re-solve
to tight tolerance (the test suite enforces 1e-8 throughout entire
greedy runs). Committing a pick is a serial rank-one diagonal update
followed by one fresh solve.

Candidate evaluations inside a round are independent reads of one shared
factorization and can fan out across worker threads; results are merged
in pool order, so the outcome is identical for any worker count.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np

from .centrality import rank_all
from .equilibrium import (
    Modification,
    SystemMatrices,
    _Factorized,
    _stubborn_vector,
    assemble,
)
from .errors import ConfigError, DomainError
from .network import AgentId, Network


@dataclass(frozen=True)
class MeanShift:
    """Maximize the average persuadable equilibrium opinion."""


@dataclass(frozen=True)
class ThresholdCount:
    """Maximize how many persuadable agents end strictly above tau."""

    tau: float

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise DomainError(f"tau {self.tau!r} outside (0, 1)")


Objective = MeanShift | ThresholdCount


@dataclass(frozen=True)
class AllCandidates:
    """Every persuadable agent is a candidate target."""


@dataclass(frozen=True)
class TopHic:
    """Restrict candidates to the m highest persuadable centrality scores.

    Ranked once on the unmodified network and frozen; greedy never
    recomputes the pool. With a single persuadable agent the centrality
    ranking is undefined and the pool degrades to that one agent.
    """

    m: int

    def __post_init__(self) -> None:
        if self.m < 1:
            raise DomainError("candidate pool size must be positive")


CandidatePool = AllCandidates | TopHic


@dataclass(frozen=True)
class PlacementProblem:
    """Budget and semantics for one placement run."""

    k: int
    p_agent: float
    theta_agent: float = 1.0
    objective: Objective = MeanShift()
    pool: CandidatePool = TopHic(1000)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise DomainError("budget k must be positive")
        if not 0.0 < self.p_agent <= 1.0:
            raise DomainError(f"p_agent {self.p_agent!r} outside (0, 1]")
        if not 0.0 <= self.theta_agent <= 1.0:
            raise DomainError(f"theta_agent {self.theta_agent!r} outside [0, 1]")


@dataclass(frozen=True, eq=False)
class PlacementResult:
    """Chosen targets in pick order plus the objective trajectory.

    objective_values[j] is the objective after the first j targets, so it
    has length k + 1 and starts at the unmodified network's value.
    fallback_iterations lists threshold-objective rounds that were decided
    by the mean-shift tiebreak because every candidate's count gain was
    zero.
    """

    targets: tuple[AgentId, ...]
    objective_values: tuple[float, ...]
    final_theta: np.ndarray
    free_ids: tuple[AgentId, ...]
    method: str
    fallback_iterations: tuple[int, ...] = field(default=())


def objective_value(objective: Objective, theta: np.ndarray) -> float:
    """Evaluate an objective on a clamped persuadable opinion vector."""
    theta = np.asarray(theta)
    if theta.size == 0:
        raise ConfigError("objective undefined without persuadable agents")
    if isinstance(objective, MeanShift):
        return float(theta.mean())
    return float(np.count_nonzero(theta > objective.tau))


def candidate_pool(
    network: Network,
    problem: PlacementProblem,
    *,
    sys: SystemMatrices | None = None,
) -> tuple[AgentId, ...]:
    """Frozen candidate list for a run, in ascending id order."""
    if sys is None:
        sys = assemble(network)
    free = list(sys.free_ids)
    if isinstance(problem.pool, AllCandidates) or sys.n_free == 1:
        pool = free
    else:
        report = rank_all(network, sys=sys)
        ranked = report.ranked(kind="persuadable")
        pool = sorted(agent for agent, _ in ranked[: problem.pool.m])
    if len(pool) < problem.k:
        raise ConfigError(
            f"candidate pool has {len(pool)} agents, fewer than budget {problem.k}"
        )
    return tuple(pool)


def marginal_gain_mean(
    sys: SystemMatrices,
    stubborn_values,
    candidate: AgentId,
    p_agent: float,
    *,
    base: Modification | None = None,
) -> float:
    """Exact change in the persuadable opinion sum from adding one target.

    Defined for an opinion-1 placed agent (the closed form above); with
    base carrying the already-placed targets this is the greedy marginal
    gain. For other agent opinions evaluate by re-solving instead.
    """
    if base is not None and base.theta_agent != 1.0:
        raise ConfigError("fast gain is defined for an opinion-1 agent; re-solve instead")
    if not 0.0 < p_agent <= 1.0:
        raise DomainError(f"p_agent {p_agent!r} outside (0, 1]")
    row = sys.row_of.get(candidate)
    if row is None:
        raise DomainError(f"candidate {candidate} is not a persuadable agent")
    if base is not None and candidate in base.targets:
        raise DomainError(f"candidate {candidate} is already a target")

    op = _Factorized(sys, base)
    rhs = _rhs_for(sys, stubborn_values, base)
    theta0 = op.solve(rhs)
    col_aggregate = op.solve(np.ones(sys.n_free), transpose=True)[row]
    e = np.zeros(sys.n_free)
    e[row] = 1.0
    diag = op.solve(e)[row]
    return float(p_agent * (1.0 - theta0[row]) * col_aggregate / (1.0 + p_agent * diag))


def greedy_place(
    network: Network,
    problem: PlacementProblem,
    *,
    sys: SystemMatrices | None = None,
    workers: int = 1,
) -> PlacementResult:
    """Greedy target selection; ties broken by ascending agent id."""
    if sys is None:
        sys = assemble(network)
    _check_budget(problem, sys)
    pool = candidate_pool(network, problem, sys=sys)
    sv = _stubborn_values(network, sys)
    rhs0 = sys.source @ sv
    p, th_a = problem.p_agent, problem.theta_agent

    chosen: list[AgentId] = []
    fallbacks: list[int] = []
    op = _Factorized(sys)
    theta = op.solve(rhs0)
    values = [objective_value(problem.objective, np.clip(theta, 0.0, 1.0))]

    for round_idx in range(problem.k):
        available = np.array([c for c in pool if c not in chosen], dtype=np.intp)
        rows = np.array([sys.row_of[c] for c in available], dtype=np.intp)

        if isinstance(problem.objective, MeanShift):
            if th_a == 1.0:
                gains = _fast_mean_gains(op, theta, rows, p, workers)
            else:
                gains = _resolve_mean_gains(
                    sys, rhs0, theta, chosen, available, p, th_a, workers
                )
            pick = _argbest(gains, available)
        else:
            count_gains, mean_gains = _threshold_gains(
                op, theta, rows, p, th_a, problem.objective.tau, workers
            )
            if count_gains.max() > 0:
                pick = _argbest(count_gains, available)
            else:
                fallbacks.append(round_idx)
                pick = _argbest(mean_gains, available)

        chosen.append(pick)
        mod = Modification(tuple(chosen), p, th_a)
        op = _Factorized(sys, mod)
        rhs = rhs0.copy()
        rhs[[sys.row_of[c] for c in chosen]] += p * th_a
        theta = op.solve(rhs)
        values.append(objective_value(problem.objective, np.clip(theta, 0.0, 1.0)))

    return PlacementResult(
        targets=tuple(chosen),
        objective_values=tuple(values),
        final_theta=theta,
        free_ids=sys.free_ids,
        method="greedy",
        fallback_iterations=tuple(fallbacks),
    )


def baseline_place(
    network: Network,
    problem: PlacementProblem,
    ordering: str,
    *,
    sys: SystemMatrices | None = None,
) -> PlacementResult:
    """Pick the top-k agents of a fixed ordering and evaluate each prefix.

    ordering is one of "out_degree" (follower count), "posting_rate"
    (raw rate; requires rates), or "hic" (persuadable centrality). Scores
    rank descending with ties broken by ascending id; the ordering spans
    all persuadable agents regardless of the problem's candidate pool.
    """
    if sys is None:
        sys = assemble(network)
    _check_budget(problem, sys)

    if ordering == "out_degree":
        out = network.out_edges()
        score = {a: float(len(out[a])) for a in sys.free_ids}
    elif ordering == "posting_rate":
        if network.posting_rates is None:
            raise ConfigError("posting_rate ordering requires posting rates")
        score = {a: float(network.posting_rates[a]) for a in sys.free_ids}
    elif ordering == "hic":
        report = rank_all(network, sys=sys)
        score = {
            a: s for a, s in report.scores.items() if report.kind[a] == "persuadable"
        }
        if not score:
            raise ConfigError("centrality ordering undefined for this network")
    else:
        raise ConfigError(f"unknown baseline ordering {ordering!r}")

    ranked = sorted(score, key=lambda a: (-score[a], a))
    targets = tuple(ranked[: problem.k])
    values, theta = _prefix_values(network, sys, problem, targets)
    return PlacementResult(
        targets=targets,
        objective_values=values,
        final_theta=theta,
        free_ids=sys.free_ids,
        method=f"baseline:{ordering}",
    )


def brute_force_place(
    network: Network,
    problem: PlacementProblem,
    *,
    sys: SystemMatrices | None = None,
    max_subsets: int = 10**6,
) -> PlacementResult:
    """Exact optimum by enumerating every k-subset of persuadable agents.

    Refuses when the subset count exceeds max_subsets. Ties resolve to
    the lexicographically smallest subset for determinism.
    """
    if sys is None:
        sys = assemble(network)
    _check_budget(problem, sys)
    n1, k = sys.n_free, problem.k
    if comb(n1, k) > max_subsets:
        raise ConfigError(
            f"brute force over C({n1}, {k}) subsets exceeds the {max_subsets} cap"
        )
    sv = _stubborn_values(network, sys)
    rhs0 = sys.source @ sv

    best: tuple[AgentId, ...] | None = None
    best_value = -np.inf
    for combo in itertools.combinations(sys.free_ids, k):
        theta = _solve_with_targets(sys, rhs0, combo, problem)
        value = objective_value(problem.objective, np.clip(theta, 0.0, 1.0))
        if value > best_value:
            best, best_value = combo, value
    assert best is not None
    values, theta = _prefix_values(network, sys, problem, best)
    return PlacementResult(
        targets=best,
        objective_values=values,
        final_theta=theta,
        free_ids=sys.free_ids,
        method="brute_force",
    )


def mean_rate_probability(network: Network) -> float:
    """Reading probability of an agent posting at the mean persuadable rate.

    Scaled by the same normalization constant as the network's own rates,
    so the placed agent is treated exactly like an ordinary agent posting
    that often.
    """
    if network.posting_rates is None:
        raise ConfigError("mean-rate probability requires posting rates")
    z = network.rate_scale
    if z is None:
        sums = [
            sum(network.posting_rates[j] for j, _ in network.in_edges[i])
            for i in range(network.n_agents)
            if i not in network.stubborn
        ]
        z = max(sums, default=0.0)
    if z <= 0:
        raise DomainError("rate normalization constant is zero")
    free = [i for i in range(network.n_agents) if i not in network.stubborn]
    if not free:
        raise ConfigError("no persuadable agents to average over")
    p = float(np.mean([network.posting_rates[i] for i in free]) / z)
    if not 0.0 < p <= 1.0:
        raise DomainError(f"mean-rate probability {p!r} outside (0, 1]")
    return p


def _check_budget(problem: PlacementProblem, sys: SystemMatrices) -> None:
    if sys.n_free == 0:
        raise ConfigError("placement needs at least one persuadable agent")
    if problem.k > sys.n_free:
        raise ConfigError(
            f"budget {problem.k} exceeds the {sys.n_free} persuadable agents"
        )


def _stubborn_values(network: Network, sys: SystemMatrices) -> np.ndarray:
    return np.array([network.opinions[a] for a in sys.stubborn_ids], dtype=np.float64)


def _rhs_for(sys: SystemMatrices, stubborn_values, base: Modification | None) -> np.ndarray:
    sv = _stubborn_vector(sys, stubborn_values)
    rhs = sys.source @ sv
    if base is not None:
        rows = [sys.row_of[a] for a in base.targets]
        rhs = rhs.copy()
        rhs[rows] += base.p_agent * base.theta_agent
    return rhs


def _argbest(gains: np.ndarray, candidates: np.ndarray) -> AgentId:
    """Largest gain, ties to the smallest agent id (candidates are sorted)."""
    return int(candidates[int(np.argmax(gains))])


def _fast_mean_gains(
    op: _Factorized, theta: np.ndarray, rows: np.ndarray, p: float, workers: int
) -> np.ndarray:
    aggregates = op.solve(np.ones(op.n), transpose=True)

    def diag_chunk(chunk: np.ndarray) -> np.ndarray:
        rhs = np.zeros((op.n, len(chunk)))
        rhs[chunk, np.arange(len(chunk))] = 1.0
        cols = op.solve(rhs)
        return cols[chunk, np.arange(len(chunk))]

    diag = _fan_out(diag_chunk, rows, workers)
    return p * (1.0 - theta[rows]) * aggregates[rows] / (1.0 + p * diag)


def _threshold_gains(
    op: _Factorized,
    theta: np.ndarray,
    rows: np.ndarray,
    p: float,
    theta_agent: float,
    tau: float,
    workers: int,
) -> tuple[np.ndarray, np.ndarray]:
    """(count gains, mean-sum gains) per candidate via rank-one updates."""
    base_count = np.count_nonzero(np.clip(theta, 0.0, 1.0) > tau)

    def gains_chunk(chunk: np.ndarray) -> np.ndarray:
        rhs = np.zeros((op.n, len(chunk)))
        rhs[chunk, np.arange(len(chunk))] = 1.0
        cols = op.solve(rhs)
        diag = cols[chunk, np.arange(len(chunk))]
        scale = p * (theta_agent - theta[chunk]) / (1.0 + p * diag)
        updated = theta[:, None] + cols * scale[None, :]
        counts = (np.clip(updated, 0.0, 1.0) > tau).sum(axis=0)
        mean_sums = scale * cols.sum(axis=0)
        return np.stack([counts - base_count, mean_sums])

    stacked = _fan_out(gains_chunk, rows, workers, width=2)
    return stacked[0], stacked[1]


def _resolve_mean_gains(
    sys: SystemMatrices,
    rhs0: np.ndarray,
    theta: np.ndarray,
    chosen: Sequence[AgentId],
    candidates: np.ndarray,
    p: float,
    theta_agent: float,
    workers: int,
) -> np.ndarray:
    """Full re-solve gains, used when the placed agent's opinion is not 1."""
    base_sum = theta.sum()
    problem_stub = PlacementProblem(k=1, p_agent=p, theta_agent=theta_agent)

    def gain_of(candidate_block: np.ndarray) -> np.ndarray:
        out = np.empty(len(candidate_block))
        for idx, c in enumerate(candidate_block):
            combo = tuple(chosen) + (int(c),)
            theta1 = _solve_with_targets(sys, rhs0, combo, problem_stub)
            out[idx] = theta1.sum() - base_sum
        return out

    return _fan_out(gain_of, candidates, workers)


def _solve_with_targets(
    sys: SystemMatrices,
    rhs0: np.ndarray,
    targets: Sequence[AgentId],
    problem: PlacementProblem,
) -> np.ndarray:
    mod = Modification(tuple(targets), problem.p_agent, problem.theta_agent)
    op = _Factorized(sys, mod)
    rhs = rhs0.copy()
    rhs[[sys.row_of[a] for a in targets]] += problem.p_agent * problem.theta_agent
    return op.solve(rhs)


def _prefix_values(
    network: Network,
    sys: SystemMatrices,
    problem: PlacementProblem,
    targets: Sequence[AgentId],
) -> tuple[tuple[float, ...], np.ndarray]:
    sv = _stubborn_values(network, sys)
    rhs0 = sys.source @ sv
    theta = _Factorized(sys).solve(rhs0)
    values = [objective_value(problem.objective, np.clip(theta, 0.0, 1.0))]
    for j in range(1, len(targets) + 1):
        theta = _solve_with_targets(sys, rhs0, targets[:j], problem)
        values.append(objective_value(problem.objective, np.clip(theta, 0.0, 1.0)))
    return tuple(values), theta


def _fan_out(fn, items: np.ndarray, workers: int, *, width: int = 1) -> np.ndarray:
    """Apply fn to contiguous chunks of items, concatenating in order.

    fn must produce per-item results that do not depend on which chunk the
    item lands in (all the evaluators here are independent column solves),
    so the concatenated output is identical for any worker count.
    """
    if len(items) == 0:
        empty = np.empty((width, 0)) if width > 1 else np.empty(0)
        return empty
    if workers <= 1 or len(items) == 1:
        return fn(items)
    chunks = np.array_split(items, min(workers, len(items)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(fn, chunks))
    return np.concatenate(results, axis=-1)
