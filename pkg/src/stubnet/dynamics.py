"""Stochastic simulation of the posting-and-reading opinion process.

Each step, every persuadable agent independently either reads one post or
reads nothing: source j is read with the edge probability p(j -> i), and
with the leftover probability the agent keeps its opinion. A read post
carries a coarse signal Y of the author's current opinion, unbiased in
expectation; the reader then moves its opinion to a convex combination
weighted by its stubbornness schedule,

    theta_i(t+1) = (1 - w_i(t)) * theta_i(t) + w_i(t) * Y.

Updates are synchronous (everyone reads the time-t opinions), stubborn
agents never move, and replicas are fully independent.

Randomness is replica-keyed: replica r draws from its own counter-based
Philox stream derived from (seed, r), with a fixed draw layout over
(step, agent). Trajectories are therefore bit-reproducible no matter how
replicas are partitioned across workers, which is what makes the
reporting layer's byte-identical-reruns guarantee possible. Within a
replica the source choices and verbalization draws are pre-generated in
fixed chunks and the state update is vectorized across replicas.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .network import ROW_SUM_TOL, AgentId, Network


class Verbalization(str, Enum):
    """How much of an author's opinion a post reveals.

    EXACT passes the opinion through; BERNOULLI posts a single bit with
    success probability equal to the opinion. Both are unbiased.
    """

    EXACT = "exact"
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class Constant:
    """Time-invariant stubbornness weight."""

    w: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.w <= 1.0:
            raise DomainError(f"constant weight {self.w!r} outside [0, 1]")


@dataclass(frozen=True)
class PowerLaw:
    """Decaying weight w(t) = c / (t + tau + 1)**delta."""

    c: float
    tau: float
    delta: float

    def __post_init__(self) -> None:
        if self.c < 0 or self.tau < 0:
            raise DomainError("power-law schedule needs c >= 0 and tau >= 0")
        if not 0.0 < self.delta <= 1.0:
            raise DomainError(f"delta {self.delta!r} outside (0, 1]")
        if self.c > (self.tau + 1.0) ** self.delta:
            raise DomainError(
                f"c {self.c!r} exceeds (tau+1)**delta, so w(0) would exceed 1"
            )


ScheduleKind = Constant | PowerLaw


@dataclass(frozen=True)
class StubbornnessSchedule:
    """Per-agent assignment of a stubbornness weight sequence."""

    assignments: tuple[ScheduleKind, ...]

    @staticmethod
    def uniform(kind: ScheduleKind, n_agents: int) -> "StubbornnessSchedule":
        return StubbornnessSchedule(assignments=(kind,) * n_agents)

    def weights(self, t: int) -> np.ndarray:
        out = np.empty(len(self.assignments))
        for i, kind in enumerate(self.assignments):
            if isinstance(kind, Constant):
                out[i] = kind.w
            else:
                out[i] = kind.c / (t + kind.tau + 1.0) ** kind.delta
        return out

    def sum_min_weights_diverges(self) -> bool:
        """Whether the sum over time of the per-step minimum weight diverges.

        With delta capped at 1 a power law always has a divergent sum, so
        the pointwise minimum over agents diverges unless some agent's
        weights are identically zero.
        """
        for kind in self.assignments:
            if isinstance(kind, Constant) and kind.w == 0.0:
                return False
            if isinstance(kind, PowerLaw) and kind.c == 0.0:
                return False
        return len(self.assignments) > 0

    def sum_max_squares_converges(self) -> bool:
        """Whether the sum over time of the per-step maximum squared weight converges."""
        for kind in self.assignments:
            if isinstance(kind, Constant) and kind.w > 0.0:
                return False
            if isinstance(kind, PowerLaw) and kind.c > 0.0 and kind.delta <= 0.5:
                return False
        return True


@dataclass(frozen=True, eq=False)
class OpinionState:
    """One trajectory's full opinion vector at time t."""

    t: int
    theta: np.ndarray


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    """Across-replica statistics at the sampled times.

    mean and variance are per persuadable agent (variance across replicas,
    ddof=1, zero for a single replica). dist_to_eq is the replica-average
    L2 distance of the persuadable block to a supplied equilibrium;
    centering_norm is the replica-average L2 norm of the opinion vector
    minus its own mean, tracked only on stubborn-free networks.
    """

    times: np.ndarray
    free_ids: tuple[AgentId, ...]
    mean: np.ndarray
    variance: np.ndarray
    dist_to_eq: np.ndarray | None
    centering_norm: np.ndarray | None
    replicas: int
    seed: int


@dataclass(frozen=True)
class RateEstimate:
    """Log-log decay slope fitted on the trailing half of a trace."""

    slope: float
    intercept: float
    samples_used: int
    converged: bool


class _Kernel:
    """Padded source tables and schedule arrays for the vectorized update."""

    def __init__(self, network: Network, schedule: StubbornnessSchedule) -> None:
        if not network.weighted:
            raise DomainError("simulation requires edge probabilities")
        if len(schedule.assignments) != network.n_agents:
            raise ConfigError(
                f"schedule covers {len(schedule.assignments)} agents, "
                f"network has {network.n_agents}"
            )
        self.n = network.n_agents
        self.free = np.array(network.nonstubborn, dtype=np.intp)
        n1 = len(self.free)
        self.n1 = n1
        degrees = np.zeros(n1, dtype=np.intp)
        dmax = max((len(network.in_edges[a]) for a in self.free), default=0)
        dmax = max(dmax, 1)
        sources = np.zeros((n1, dmax), dtype=np.intp)
        cum = np.full((n1, dmax), 2.0)
        for q, agent in enumerate(self.free):
            edges = network.in_edges[agent]
            degrees[q] = len(edges)
            total = 0.0
            for m, (src, prob) in enumerate(edges):
                total += prob
                sources[q, m] = src
                cum[q, m] = total
            if total > 1.0 + ROW_SUM_TOL:
                raise DomainError(
                    f"agent {network.original_ids[agent]!r} has source "
                    f"probabilities summing to {total!r} > 1; not a probability law"
                )
        self.sources = sources
        self.cum = cum
        self.degrees = degrees
        self.last_slot = np.maximum(degrees - 1, 0)

        kinds = [schedule.assignments[a] for a in self.free]
        self.const_mask = np.array([isinstance(k, Constant) for k in kinds])
        self.const_w = np.array(
            [k.w if isinstance(k, Constant) else 0.0 for k in kinds]
        )
        self.pl_c = np.array([k.c if isinstance(k, PowerLaw) else 0.0 for k in kinds])
        self.pl_tau = np.array(
            [k.tau if isinstance(k, PowerLaw) else 0.0 for k in kinds]
        )
        self.pl_delta = np.array(
            [k.delta if isinstance(k, PowerLaw) else 1.0 for k in kinds]
        )
        self.all_delta_one = bool(np.all(self.pl_delta == 1.0))

    def weight_block(self, t0: int, length: int) -> np.ndarray:
        """Weights for steps t0 .. t0+length-1, shape (length, n1)."""
        t = np.arange(t0, t0 + length, dtype=np.float64)[:, None]
        base = t + self.pl_tau[None, :] + 1.0
        if self.all_delta_one:
            w = self.pl_c[None, :] / base
        else:
            w = self.pl_c[None, :] / np.power(base, self.pl_delta[None, :])
        if self.const_mask.any():
            w[:, self.const_mask] = self.const_w[self.const_mask]
        return w

    def chunk_length(self) -> int:
        return max(1, min(4096, 2_000_000 // max(1, self.n1)))


def step(
    network: Network,
    state: OpinionState,
    schedule: StubbornnessSchedule,
    verbalization: Verbalization,
    rng: np.random.Generator,
) -> OpinionState:
    """Advance one trajectory a single synchronous step.

    Draw layout per step: one uniform per persuadable agent for the
    source-or-nothing choice, then (Bernoulli only) one more per agent for
    the posted bit.
    """
    kernel = _Kernel(network, schedule)
    theta = np.asarray(state.theta, dtype=np.float64)
    if theta.shape != (network.n_agents,):
        raise DomainError(f"state has shape {theta.shape}, expected ({network.n_agents},)")
    th = theta[None, :].copy()
    u = rng.random((1, kernel.n1))
    v = rng.random((1, kernel.n1)) if verbalization is Verbalization.BERNOULLI else None
    w = kernel.weight_block(state.t, 1)[0]
    _advance(kernel, th, u, v, w)
    return OpinionState(t=state.t + 1, theta=th[0])


def _advance(kernel: _Kernel, th: np.ndarray, u, v, w) -> None:
    """One synchronous update of the replica block th, in place."""
    idx = (u[:, :, None] >= kernel.cum[None, :, :]).sum(axis=2)
    updating = idx < kernel.degrees[None, :]
    slot = np.minimum(idx, kernel.last_slot[None, :])
    src = kernel.sources[np.arange(kernel.n1)[None, :], slot]
    read = np.take_along_axis(th, src, axis=1)
    if v is not None:
        read = (v < read).astype(np.float64)
    current = th[:, kernel.free]
    th[:, kernel.free] = np.where(
        updating, (1.0 - w) * current + w * read, current
    )


def run(
    network: Network,
    schedule: StubbornnessSchedule,
    verbalization: Verbalization = Verbalization.BERNOULLI,
    *,
    steps: int,
    replicas: int,
    seed: int,
    sample_every: int | None = None,
    sample_times: Sequence[int] | None = None,
    initial: float | Sequence[float] = 0.5,
    equilibrium: Sequence[float] | None = None,
    workers: int = 1,
) -> SimulationTrace:
    """Simulate independent replicas and return across-replica statistics.

    Samples are taken at 0, at steps, and at either the arithmetic grid
    sample_every or the explicit sample_times. initial fills the
    persuadable opinions (stubborn agents always start and stay at their
    fixed opinions); pass equilibrium (full-length vector) to track L2
    distance to it. Identical (seed, config) runs produce identical traces
    for any worker count.
    """
    if steps < 1:
        raise ConfigError("steps must be positive")
    if replicas < 1:
        raise ConfigError("replicas must be positive")
    if seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    kernel = _Kernel(network, schedule)
    times = _sample_grid(steps, sample_every, sample_times)
    theta0 = _initial_vector(network, initial)
    eq_free = None
    if equilibrium is not None:
        eq = np.asarray(equilibrium, dtype=np.float64)
        if eq.shape != (network.n_agents,):
            raise DomainError(
                f"equilibrium has shape {eq.shape}, expected ({network.n_agents},)"
            )
        eq_free = eq[kernel.free]

    children = np.random.SeedSequence(seed).spawn(replicas)
    snapshots = np.empty((len(times), replicas, kernel.n1))

    length = kernel.chunk_length()
    cap = max(1, 4_000_000 // (length * max(1, kernel.n1)))
    n_blocks = max(1, math.ceil(replicas / cap), min(workers, replicas))
    blocks = np.array_split(np.arange(replicas), n_blocks)
    bernoulli = verbalization is Verbalization.BERNOULLI

    def run_block(block: np.ndarray) -> None:
        gens = [np.random.Generator(np.random.Philox(children[r])) for r in block]
        th = np.tile(theta0, (len(block), 1))
        sample_index = {int(t): s for s, t in enumerate(times)}
        if 0 in sample_index:
            snapshots[sample_index[0], block, :] = th[:, kernel.free]
        t = 0
        while t < steps:
            chunk = min(length, steps - t)
            u_all = np.stack([g.random((chunk, kernel.n1)) for g in gens])
            v_all = (
                np.stack([g.random((chunk, kernel.n1)) for g in gens])
                if bernoulli
                else None
            )
            w_all = kernel.weight_block(t, chunk)
            for s in range(chunk):
                _advance(
                    kernel,
                    th,
                    u_all[:, s, :],
                    None if v_all is None else v_all[:, s, :],
                    w_all[s],
                )
                t += 1
                pos = sample_index.get(t)
                if pos is not None:
                    snapshots[pos, block, :] = th[:, kernel.free]

    if len(blocks) > 1 and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_block, blocks))
    else:
        for block in blocks:
            run_block(block)

    mean = snapshots.mean(axis=1)
    if replicas > 1:
        variance = snapshots.var(axis=1, ddof=1)
    else:
        variance = np.zeros_like(mean)
    dist = None
    if eq_free is not None:
        dist = np.sqrt(((snapshots - eq_free[None, None, :]) ** 2).sum(axis=2)).mean(
            axis=1
        )
    centering = None
    if not network.stubborn:
        deviation = snapshots - snapshots.mean(axis=2, keepdims=True)
        centering = np.sqrt((deviation**2).sum(axis=2)).mean(axis=1)
    return SimulationTrace(
        times=times,
        free_ids=tuple(int(a) for a in kernel.free),
        mean=mean,
        variance=variance,
        dist_to_eq=dist,
        centering_norm=centering,
        replicas=replicas,
        seed=seed,
    )


def consensus_run(
    network: Network,
    schedule: StubbornnessSchedule,
    *,
    steps: int,
    replicas: int,
    seed: int,
    verbalization: Verbalization = Verbalization.BERNOULLI,
    initial: float | Sequence[float] | None = None,
    sample_every: int | None = None,
    sample_times: Sequence[int] | None = None,
    workers: int = 1,
) -> SimulationTrace:
    """Simulate a stubborn-free network expected to contract to consensus.

    Refuses unless every consensus hypothesis holds, naming the failed
    one: the network must have no stubborn agents, the expected-update
    matrix must be scrambling, the summed minimum weights must diverge,
    and the summed maximum squared weights must converge.
    """
    if network.stubborn:
        raise ConfigError(
            "consensus hypothesis failed: network has stubborn agents"
        )
    if not is_scrambling(network):
        raise ConfigError(
            "consensus hypothesis failed: expected-update matrix is not scrambling"
        )
    if not schedule.sum_min_weights_diverges():
        raise ConfigError(
            "consensus hypothesis failed: sum of minimum weights does not diverge"
        )
    if not schedule.sum_max_squares_converges():
        raise ConfigError(
            "consensus hypothesis failed: sum of maximum squared weights does not converge"
        )
    if initial is None:
        if any(v is None for v in network.opinions):
            raise ConfigError(
                "initial opinions required: pass initial= or record opinions for every agent"
            )
        initial = [float(v) for v in network.opinions]
    return run(
        network,
        schedule,
        verbalization,
        steps=steps,
        replicas=replicas,
        seed=seed,
        sample_every=sample_every,
        sample_times=sample_times,
        initial=initial,
        workers=workers,
    )


def update_matrix(network: Network) -> np.ndarray:
    """Dense expected-update generator: stubborn rows zero, persuadable
    rows carry source probabilities off-diagonal and minus their total on
    the diagonal."""
    if not network.weighted:
        raise DomainError("update matrix requires edge probabilities")
    n = network.n_agents
    a = np.zeros((n, n))
    for i in range(n):
        if i in network.stubborn:
            continue
        total = 0.0
        for j, prob in network.in_edges[i]:
            a[i, j] = prob
            total += prob
        a[i, i] = -total
    return a


def is_scrambling(network: Network) -> bool:
    """Whether every pair of rows of the update generator shares support.

    Diagonal entries count: an agent with any source has a nonzero
    diagonal. Quadratic in the agent count; intended for the moderate
    sizes where consensus experiments run.
    """
    support = (update_matrix(network) != 0.0).astype(np.float64)
    overlap = support @ support.T
    return bool(overlap.min() > 0.5)


def ergodicity_coefficient(matrix: np.ndarray) -> float:
    """Contraction coefficient of a row-stochastic matrix.

    One minus the smallest pairwise row overlap; zero means one step
    forces consensus, one means no contraction is guaranteed. Strictly
    submultiplicative over products, which is what drives the consensus
    argument.
    """
    p = np.asarray(matrix, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {p.shape}")
    if p.size == 0:
        raise DomainError("empty matrix")
    if p.min() < -1e-12:
        raise DomainError("matrix has negative entries")
    row_sums = p.sum(axis=1)
    if np.abs(row_sums - 1.0).max() > 1e-12:
        raise DomainError("rows must sum to one within 1e-12")
    n = p.shape[0]
    if n == 1:
        return 0.0
    smallest = np.inf
    for i in range(n - 1):
        overlaps = np.minimum(p[i], p[i + 1 :]).sum(axis=1)
        smallest = min(smallest, float(overlaps.min()))
    return float(min(max(1.0 - smallest, 0.0), 1.0))


def rate_estimate(trace: SimulationTrace, *, tail_fraction: float = 0.5) -> RateEstimate:
    """Least-squares slope of log distance against log time.

    Fits the trailing tail_fraction of positive-time samples; a slope
    near zero is flagged as non-convergent.
    """
    if trace.dist_to_eq is None:
        raise ConfigError("trace has no equilibrium distances to fit")
    mask = trace.times > 0
    t = trace.times[mask].astype(np.float64)
    d = trace.dist_to_eq[mask]
    if len(t) < 4:
        raise DomainError(f"need at least 4 positive-time samples, have {len(t)}")
    start = int(len(t) * (1.0 - tail_fraction))
    tt, dd = t[start:], np.maximum(d[start:], 1e-300)
    slope, intercept = np.polyfit(np.log(tt), np.log(dd), 1)
    return RateEstimate(
        slope=float(slope),
        intercept=float(intercept),
        samples_used=len(tt),
        converged=bool(slope <= -0.05),
    )


def _sample_grid(
    steps: int,
    sample_every: int | None,
    sample_times: Sequence[int] | None,
) -> np.ndarray:
    if sample_every is not None and sample_times is not None:
        raise ConfigError("pass sample_every or sample_times, not both")
    chosen: set[int] = {0, steps}
    if sample_every is not None:
        if sample_every < 1:
            raise ConfigError("sample_every must be positive")
        chosen.update(range(sample_every, steps + 1, sample_every))
    elif sample_times is not None:
        for t in sample_times:
            t = int(t)
            if not 0 <= t <= steps:
                raise ConfigError(f"sample time {t} outside [0, {steps}]")
            chosen.add(t)
    return np.array(sorted(chosen), dtype=np.int64)


def _initial_vector(network: Network, initial) -> np.ndarray:
    theta0 = np.empty(network.n_agents)
    if np.isscalar(initial):
        value = float(initial)
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"initial opinion {value!r} outside [0, 1]")
        theta0.fill(value)
    else:
        vec = np.asarray(initial, dtype=np.float64)
        if vec.shape != (network.n_agents,):
            raise DomainError(
                f"initial vector has shape {vec.shape}, expected ({network.n_agents},)"
            )
        if vec.min() < 0.0 or vec.max() > 1.0:
            raise DomainError("initial opinions must lie in [0, 1]")
        theta0[:] = vec
    for agent in network.stubborn:
        theta0[agent] = network.opinions[agent]
    return theta0
