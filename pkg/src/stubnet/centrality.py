"""Harmonic influence centrality for both kinds of agents.

The centrality of an agent measures how far the average persuadable
opinion moves when that agent's voice is pushed from one extreme to the
other. For a stubborn agent this is literally the mean response to
flipping its fixed opinion between 0 and 1, which linearity reduces to a
column aggregate of the equilibrium operator. For a persuadable agent it
is the limit of planting ever-stronger committed followers-of-nobody
around it, which collapses to pinning: freeze the agent's opinion, drop
its sources, and measure the average response of everyone else. Both
collapse to closed forms in the inverse of the coupling block:

    stubborn i:     c(i) = (1/n1) * sum_j (M^-1 S)[j, i]
    persuadable i:  c(i) = (sum_j M^-1[j, i] / M^-1[i, i] - 1) / (n1 - 1)

with M the negated persuadable coupling block and S the stubborn block.
Stubborn scores for every agent come from a single transpose solve;
persuadable scores need one column solve each, which rank_all batches and
optionally fans out across worker threads (read-only shared
factorization, deterministic merge).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import SystemMatrices, _Factorized, assemble
from .errors import ConfigError, DomainError
from .network import AgentId, Network


@dataclass(frozen=True)
class CentralityReport:
    """Scores plus which formula produced each one.

    kind[agent] is "stubborn" or "persuadable". notes records agents or
    whole kinds that had to be omitted (for example the persuadable
    formula is undefined with a single persuadable agent).
    """

    scores: dict[AgentId, float]
    kind: dict[AgentId, str]
    notes: tuple[str, ...] = field(default=())

    def ranked(self, kind: str | None = None) -> list[tuple[AgentId, float]]:
        """Agents sorted by descending score, ties by ascending id."""
        items = [
            (a, s)
            for a, s in self.scores.items()
            if kind is None or self.kind[a] == kind
        ]
        return sorted(items, key=lambda item: (-item[1], item[0]))


def hic_stubborn(sys: SystemMatrices, agent: AgentId) -> float:
    """Mean persuadable response to flipping one stubborn opinion 0 -> 1."""
    col = sys.col_of.get(agent)
    if col is None:
        raise DomainError(f"agent {agent} is not stubborn; use hic_nonstubborn")
    if sys.n_free == 0:
        raise ConfigError("centrality undefined without persuadable agents")
    weights = _Factorized(sys).solve(np.ones(sys.n_free), transpose=True)
    return float((sys.source.getcol(col).T @ weights)[0] / sys.n_free)


def hic_nonstubborn(sys: SystemMatrices, agent: AgentId) -> float:
    """Mean response of the other persuadable agents to pinning this one.

    Exact infinite-strength limit of surrounding the agent with committed
    followers-of-nobody; equals pinning (drop the agent's sources, fix its
    value, average the others' response to moving it 0 -> 1).
    """
    row = sys.row_of.get(agent)
    if row is None:
        raise DomainError(f"agent {agent} is not persuadable; use hic_stubborn")
    if sys.n_free < 2:
        raise ConfigError(
            "persuadable centrality needs at least two persuadable agents"
        )
    e = np.zeros(sys.n_free)
    e[row] = 1.0
    column = _Factorized(sys).solve(e)
    return float((column.sum() / column[row] - 1.0) / (sys.n_free - 1))


def rank_all(
    network: Network,
    *,
    sys: SystemMatrices | None = None,
    workers: int = 1,
) -> CentralityReport:
    """Score every agent with the formula matching its kind.

    Returns both kinds side by side; they live on different scales (a
    stubborn score is a mean shift in [0, 1], a persuadable score is a
    normalized pinning response), so no mixed ranking is implied unless a
    caller explicitly asks CentralityReport.ranked(kind=None).
    """
    if sys is None:
        sys = assemble(network)
    scores: dict[AgentId, float] = {}
    kind: dict[AgentId, str] = {}
    notes: list[str] = []
    n1 = sys.n_free

    if n1 == 0:
        return CentralityReport(
            scores={}, kind={}, notes=("no persuadable agents; nothing to score",)
        )

    op = _Factorized(sys)
    weights = op.solve(np.ones(n1), transpose=True)
    stub_scores = np.asarray((sys.source.T @ weights)).ravel() / n1
    for agent, score in zip(sys.stubborn_ids, stub_scores):
        scores[agent] = float(score)
        kind[agent] = "stubborn"

    if n1 == 1:
        notes.append(
            "single persuadable agent; persuadable centrality undefined, omitted"
        )
        return CentralityReport(scores=scores, kind=kind, notes=tuple(notes))

    def columns_for(rows: np.ndarray) -> np.ndarray:
        rhs = np.zeros((n1, len(rows)))
        rhs[rows, np.arange(len(rows))] = 1.0
        return op.solve(rhs)

    all_rows = np.arange(n1)
    if workers > 1 and n1 > 1:
        chunks = np.array_split(all_rows, min(workers, n1))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(columns_for, chunks))
        columns = np.concatenate(results, axis=1)
    else:
        columns = columns_for(all_rows)

    diag = columns[all_rows, all_rows]
    col_sums = columns.sum(axis=0)
    free_scores = (col_sums / diag - 1.0) / (n1 - 1)
    for agent, score in zip(sys.free_ids, free_scores):
        scores[agent] = float(score)
        kind[agent] = "persuadable"
    return CentralityReport(scores=scores, kind=kind, notes=tuple(notes))
