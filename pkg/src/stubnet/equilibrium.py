"""Expected steady-state opinions under stubborn boundary agents.

In expectation the update rule is linear, so the long-run opinions of the
persuadable agents solve a grounded linear system. Writing M for the
negated persuadable-to-persuadable coupling block (a nonsingular M-matrix
whenever every persuadable agent can be traced back to a stubborn one)
and S for the stubborn-to-persuadable block, the equilibrium is

    M @ theta = S @ theta_stubborn.

This is the same algebra as a resistor network: stubborn agents act as
fixed voltage sources and each persuadable agent settles at the weighted
average of its sources' potentials. Placing an extra stubborn agent that
is read with probability p by a set of targets adds p to the diagonal at
the target rows and p * theta_agent to the right-hand side; the placed
agent is never materialized as a graph node.

Solves are direct (sparse LU) below a size threshold and preconditioned
GMRES above it. Every equilibrium solve enforces a residual bound of
1e-10 * max(1, ||rhs||_inf) with one iterative-refinement retry.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import gmres, spilu, splu, LinearOperator

from .errors import ConfigError, DomainError, NumericalError, PreconditionError
from .network import AgentId, Network, validate

DIRECT_THRESHOLD = 50_000
RESIDUAL_RTOL = 1e-10
ITERATIVE_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """Sparse blocks of the expected-update generator, rows ordered by id.

    coupling is the n1 x n1 block among persuadable agents: row i carries
    the reading probabilities from its persuadable sources off-diagonal
    and minus the total reading probability (over all sources, stubborn
    included) on the diagonal. source is the n1 x n0 block of reading
    probabilities from stubborn agents. Row sums of [source | coupling]
    are therefore nonpositive, and zero exactly for agents whose source
    probabilities sum to one.
    """

    coupling: sparse.csr_matrix
    source: sparse.csr_matrix
    free_ids: tuple[AgentId, ...]
    stubborn_ids: tuple[AgentId, ...]
    row_of: dict[AgentId, int]
    col_of: dict[AgentId, int]

    @property
    def n_free(self) -> int:
        return len(self.free_ids)


@dataclass(frozen=True)
class Modification:
    """A placed stubborn agent read by each target with probability p_agent.

    Purely symbolic: applied as a diagonal shift plus right-hand-side
    injection at solve time. targets must be distinct persuadable agents.
    """

    targets: tuple[AgentId, ...]
    p_agent: float
    theta_agent: float = 1.0

    def __post_init__(self) -> None:
        targets = tuple(self.targets)
        if len(targets) == 0:
            raise DomainError("modification needs at least one target")
        if len(set(targets)) != len(targets):
            raise DomainError("modification targets must be distinct")
        object.__setattr__(self, "targets", tuple(sorted(targets)))
        if not 0.0 < self.p_agent <= 1.0:
            raise DomainError(f"p_agent {self.p_agent!r} outside (0, 1]")
        if not 0.0 <= self.theta_agent <= 1.0:
            raise DomainError(f"theta_agent {self.theta_agent!r} outside [0, 1]")


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    """Raw equilibrium over the persuadable agents, in free_ids order.

    theta is unclamped; reporting layers may clip to [0, 1] (the true
    solution lies within the span of the source opinions up to solver
    tolerance, so any clip should be tiny).
    """

    theta: np.ndarray
    free_ids: tuple[AgentId, ...]
    residual_norm: float
    rhs_norm: float
    method: str
    iterations: int | None
    refinements: int

    def as_mapping(self) -> dict[AgentId, float]:
        return {a: float(v) for a, v in zip(self.free_ids, self.theta)}


def assemble(network: Network) -> SystemMatrices:
    """Build the sparse blocks for a structurally valid network."""
    report = validate(network)
    if report.row_sum_violations:
        agent, total = report.row_sum_violations[0]
        raise PreconditionError(
            f"agent {network.original_ids[agent]!r} has source probabilities "
            f"summing to {total!r} > 1"
        )
    if report.unreachable_nonstubborn:
        agent = report.unreachable_nonstubborn[0]
        raise PreconditionError(
            f"agent {network.original_ids[agent]!r} is unreachable from every "
            f"stubborn agent (and {len(report.unreachable_nonstubborn) - 1} more)"
        )

    free_ids = tuple(sorted(set(range(network.n_agents)) - network.stubborn))
    stubborn_ids = tuple(sorted(network.stubborn))
    row_of = {a: r for r, a in enumerate(free_ids)}
    col_of = {a: c for c, a in enumerate(stubborn_ids)}

    g_rows: list[int] = []
    g_cols: list[int] = []
    g_vals: list[float] = []
    f_rows: list[int] = []
    f_cols: list[int] = []
    f_vals: list[float] = []
    for agent in free_ids:
        r = row_of[agent]
        total = 0.0
        for src, prob in network.in_edges[agent]:
            total += prob
            if src in row_of:
                g_rows.append(r)
                g_cols.append(row_of[src])
                g_vals.append(prob)
            else:
                f_rows.append(r)
                f_cols.append(col_of[src])
                f_vals.append(prob)
        g_rows.append(r)
        g_cols.append(r)
        g_vals.append(-total)

    n1, n0 = len(free_ids), len(stubborn_ids)
    coupling = sparse.csr_matrix(
        (g_vals, (g_rows, g_cols)), shape=(n1, n1), dtype=np.float64
    )
    source = sparse.csr_matrix(
        (f_vals, (f_rows, f_cols)), shape=(n1, n0), dtype=np.float64
    )
    return SystemMatrices(
        coupling=coupling,
        source=source,
        free_ids=free_ids,
        stubborn_ids=stubborn_ids,
        row_of=row_of,
        col_of=col_of,
    )


class _Factorized:
    """One grounded system M = -(coupling) + p * diag(targets), ready to solve.

    Shared read-only by concurrent evaluations; nothing here mutates after
    construction.
    """

    def __init__(
        self,
        sys: SystemMatrices,
        modification: Modification | None = None,
        *,
        method: str = "auto",
        direct_threshold: int = DIRECT_THRESHOLD,
    ) -> None:
        n = sys.n_free
        matrix = (-sys.coupling).tocsc()
        if modification is not None:
            rows = _target_rows(sys, modification)
            shift = np.zeros(n)
            shift[rows] = modification.p_agent
            matrix = (matrix + sparse.diags(shift)).tocsc()
        self.matrix = matrix
        self.n = n
        if method == "auto":
            method = "direct" if n < direct_threshold else "iterative"
        if method not in ("direct", "iterative"):
            raise ConfigError(f"unknown solve method {method!r}")
        self.method = method
        self._lu = None
        self._ilu = None
        if n == 0:
            return
        try:
            if method == "direct":
                self._lu = splu(matrix)
            else:
                self._ilu = spilu(matrix, drop_tol=1e-6, fill_factor=20)
        except RuntimeError as exc:
            raise NumericalError(f"factorization failed: {exc}") from exc

    def solve(self, rhs: np.ndarray, *, transpose: bool = False) -> np.ndarray:
        """Solve M x = rhs (or M^T x = rhs); rhs may be a vector or matrix."""
        rhs = np.asarray(rhs, dtype=np.float64)
        if self.n == 0:
            return np.zeros_like(rhs)
        if self.method == "direct":
            return self._lu.solve(rhs, trans="T" if transpose else "N")
        if rhs.ndim == 1:
            return self._gmres(rhs, transpose)
        out = np.empty_like(rhs)
        for j in range(rhs.shape[1]):
            out[:, j] = self._gmres(rhs[:, j], transpose)
        return out

    def iterations_hint(self) -> int | None:
        return getattr(self, "_last_iterations", None)

    def _gmres(self, b: np.ndarray, transpose: bool) -> np.ndarray:
        mat = self.matrix.T.tocsc() if transpose else self.matrix
        trans = "T" if transpose else "N"
        precond = LinearOperator(
            mat.shape, matvec=lambda v: self._ilu.solve(v, trans=trans)
        )
        count = {"n": 0}

        def cb(_):
            count["n"] += 1

        x, info = gmres(
            mat,
            b,
            rtol=ITERATIVE_RTOL,
            atol=0.0,
            maxiter=10 * self.n,
            M=precond,
            callback=cb,
            callback_type="pr_norm",
        )
        if info != 0:
            raise NumericalError(
                f"iterative solve did not reach tolerance (info={info}, "
                f"{count['n']} iterations)"
            )
        self._last_iterations = count["n"]
        return x


def solve_equilibrium(
    sys: SystemMatrices,
    stubborn_values: Mapping[AgentId, float] | Sequence[float],
    modification: Modification | None = None,
    *,
    method: str = "auto",
    direct_threshold: int = DIRECT_THRESHOLD,
) -> EquilibriumSolution:
    """Solve for the expected limiting opinions of the persuadable agents.

    stubborn_values maps stubborn agents to their fixed opinions (or gives
    them as a sequence in stubborn_ids order). A Modification adds the
    placed agent's diagonal shift and injection before solving.
    """
    sv = _stubborn_vector(sys, stubborn_values)
    rhs = sys.source @ sv
    if modification is not None:
        rows = _target_rows(sys, modification)
        rhs = rhs.copy()
        rhs[rows] += modification.p_agent * modification.theta_agent

    op = _Factorized(sys, modification, method=method, direct_threshold=direct_threshold)
    theta = op.solve(rhs)
    rhs_norm = float(np.abs(rhs).max(initial=0.0))
    tol = RESIDUAL_RTOL * max(1.0, rhs_norm)
    refinements = 0
    residual = _residual_inf(op.matrix, theta, rhs)
    if residual > tol:
        theta = theta + op.solve(rhs - op.matrix @ theta)
        refinements = 1
        residual = _residual_inf(op.matrix, theta, rhs)
        if residual > tol:
            raise NumericalError(
                f"equilibrium residual {residual:.3e} exceeds {tol:.3e} "
                f"after refinement (n={op.n}, method={op.method})"
            )
    return EquilibriumSolution(
        theta=theta,
        free_ids=sys.free_ids,
        residual_norm=residual,
        rhs_norm=rhs_norm,
        method=op.method,
        iterations=op.iterations_hint(),
        refinements=refinements,
    )


def row_sums_of_inverse(
    sys: SystemMatrices, modification: Modification | None = None
) -> np.ndarray:
    """Row sums of the inverse of the (possibly modified) coupling block.

    Returned as x solving coupling_mod @ x = 1; every entry is nonpositive
    because the negated block is a nonsingular M-matrix with nonnegative
    inverse.
    """
    op = _Factorized(sys, modification)
    return -op.solve(np.ones(sys.n_free))


def inverse_column(
    sys: SystemMatrices, agent: AgentId, modification: Modification | None = None
) -> np.ndarray:
    """One column of the inverse of the (possibly modified) coupling block."""
    row = _free_row(sys, agent)
    op = _Factorized(sys, modification)
    e = np.zeros(sys.n_free)
    e[row] = 1.0
    return -op.solve(e)


def full_opinion_vector(
    network: Network, solution: EquilibriumSolution
) -> np.ndarray:
    """Merge stubborn opinions and a solved free block into one length-N vector."""
    theta = np.empty(network.n_agents)
    for agent in network.stubborn:
        theta[agent] = network.opinions[agent]
    for agent, value in zip(solution.free_ids, solution.theta):
        theta[agent] = value
    return theta


def write_matrix_dump(sys: SystemMatrices, coupling_sink, source_sink) -> None:
    """Write both blocks as coordinate text (row col value), losslessly."""
    for mat, sink in ((sys.coupling, coupling_sink), (sys.source, source_sink)):
        coo = mat.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with _open_text(sink) as f:
            f.write("row col value\n")
            for idx in order:
                f.write(f"{coo.row[idx]} {coo.col[idx]} {float(coo.data[idx])!r}\n")


def _stubborn_vector(
    sys: SystemMatrices, values: Mapping[AgentId, float] | Sequence[float]
) -> np.ndarray:
    if isinstance(values, Mapping):
        missing = [a for a in sys.stubborn_ids if a not in values]
        if missing:
            raise DomainError(f"missing stubborn opinions for agents {missing}")
        vec = np.array([float(values[a]) for a in sys.stubborn_ids])
    else:
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != (len(sys.stubborn_ids),):
            raise DomainError(
                f"expected {len(sys.stubborn_ids)} stubborn values, got shape {vec.shape}"
            )
    if vec.size and (vec.min() < 0.0 or vec.max() > 1.0):
        raise DomainError("stubborn opinions must lie in [0, 1]")
    return vec


def _target_rows(sys: SystemMatrices, modification: Modification) -> np.ndarray:
    return np.array([_free_row(sys, a) for a in modification.targets], dtype=np.intp)


def _free_row(sys: SystemMatrices, agent: AgentId) -> int:
    row = sys.row_of.get(agent)
    if row is None:
        if agent in sys.col_of:
            raise DomainError(f"agent {agent} is stubborn; a persuadable agent is required")
        raise DomainError(f"agent {agent} is not part of this system")
    return row


def _residual_inf(matrix, theta: np.ndarray, rhs: np.ndarray) -> float:
    if theta.size == 0:
        return 0.0
    return float(np.abs(matrix @ theta - rhs).max())


def _open_text(sink):
    if hasattr(sink, "write"):
        from .network import _NonClosing

        return _NonClosing(sink)
    import os

    return open(os.fspath(sink), "w", encoding="utf-8")
