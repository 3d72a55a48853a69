"""Directed communication networks of stubborn and persuadable agents.

An edge (src, dst) means that posts written by src reach dst, so src can
pull dst's opinion. Each edge carries the probability that, in one round,
dst reads a post from src. Probabilities across dst's sources must sum to
at most one; the remainder is the chance that dst reads nothing that round
and keeps its opinion. Stubborn agents never update and act as fixed
boundary values for everyone else.

Agents are identified by dense integers 0..N-1. Loaders remap arbitrary
string ids in first-seen order and keep the original ids around for
reporting. Networks are immutable; every transformation returns a new one.
"""

from __future__ import annotations

import csv
import operator
import os
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .errors import (
    ConfigError,
    DomainError,
    DuplicateEdgeError,
    ParseError,
)

AgentId = int

ROW_SUM_TOL = 1e-12

EDGE_HEADER = ("src", "dst", "prob")
AGENT_HEADER = ("id", "opinion", "rate", "stubborn")


@dataclass(frozen=True)
class Network:
    """Immutable snapshot of a communication network.

    in_edges[i] lists the information sources of agent i as (source, prob)
    pairs in load order. prob is None while the network is unweighted,
    i.e. before posting rates have been normalized into probabilities.
    opinions[i] is the recorded opinion of agent i or None when absent;
    stubborn agents always have one. posting_rates is either a rate for
    every agent or None. rate_scale remembers the normalization constant
    once normalize_rates has run, so that later additions (for instance a
    placed agent posting at a given rate) can be scaled consistently.
    """

    n_agents: int
    in_edges: tuple[tuple[tuple[AgentId, float | None], ...], ...]
    stubborn: frozenset[AgentId]
    opinions: tuple[float | None, ...]
    posting_rates: tuple[float, ...] | None
    original_ids: tuple[str, ...]
    rate_scale: float | None = None

    @property
    def weighted(self) -> bool:
        return all(p is not None for edges in self.in_edges for _, p in edges)

    @property
    def nonstubborn(self) -> tuple[AgentId, ...]:
        return tuple(i for i in range(self.n_agents) if i not in self.stubborn)

    def stubborn_opinions(self) -> dict[AgentId, float]:
        return {i: self.opinions[i] for i in sorted(self.stubborn)}

    def out_edges(self) -> tuple[tuple[AgentId, ...], ...]:
        """Follower lists: out_edges()[j] holds every i that reads j."""
        out: list[list[AgentId]] = [[] for _ in range(self.n_agents)]
        for i, edges in enumerate(self.in_edges):
            for j, _ in edges:
                out[j].append(i)
        return tuple(tuple(v) for v in out)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of structural validation.

    The two violation tuples are empty exactly when the network satisfies
    the standing assumptions of the equilibrium theory: every in-neighbor
    probability mass is at most one and every persuadable agent can be
    traced back to some stubborn agent. isolated_components counts weakly
    connected components containing no stubborn agent; it is informational
    (those components are already covered by unreachable_nonstubborn).
    """

    row_sum_violations: tuple[tuple[AgentId, float], ...]
    unreachable_nonstubborn: tuple[AgentId, ...]
    isolated_components: int

    @property
    def ok(self) -> bool:
        return not self.row_sum_violations and not self.unreachable_nonstubborn


def network_from_edges(
    n_agents: int,
    edges: Iterable[tuple[AgentId, AgentId, float | None]],
    stubborn_opinions: Mapping[AgentId, float],
    *,
    posting_rates: Sequence[float] | None = None,
    opinions: Sequence[float | None] | None = None,
    original_ids: Sequence[str] | None = None,
) -> Network:
    """Build a Network directly from an edge list, applying the same
    domain checks as the file loader."""
    if n_agents <= 0:
        raise DomainError("network needs at least one agent")
    ids = tuple(original_ids) if original_ids is not None else tuple(
        str(i) for i in range(n_agents)
    )
    if len(ids) != n_agents or len(set(ids)) != n_agents:
        raise DomainError("original_ids must be unique and cover every agent")

    full_opinions: list[float | None] = (
        list(opinions) if opinions is not None else [None] * n_agents
    )
    if len(full_opinions) != n_agents:
        raise DomainError("opinions must cover every agent")
    for agent, value in stubborn_opinions.items():
        agent = _as_index(agent)
        _check_agent_index(agent, n_agents)
        full_opinions[agent] = float(value)
    stubborn = frozenset(_as_index(a) for a in stubborn_opinions)

    in_lists: list[list[tuple[AgentId, float | None]]] = [[] for _ in range(n_agents)]
    seen: set[tuple[AgentId, AgentId]] = set()
    for src, dst, prob in edges:
        src, dst = _as_index(src), _as_index(dst)
        prob = None if prob is None else float(prob)
        _check_agent_index(src, n_agents)
        _check_agent_index(dst, n_agents)
        _check_edge(src, dst, prob, seen)
        in_lists[dst].append((src, prob))

    rates = tuple(float(r) for r in posting_rates) if posting_rates is not None else None
    net = Network(
        n_agents=n_agents,
        in_edges=tuple(tuple(v) for v in in_lists),
        stubborn=stubborn,
        opinions=tuple(full_opinions),
        posting_rates=rates,
        original_ids=ids,
    )
    _check_domains(net)
    return net


def load_network(edges_source, agents_source, *, delimiter: str = ",") -> Network:
    """Load a Network from two tabular sources.

    agents_source rows: id, opinion, rate, stubborn. The row order defines
    the dense AgentId remapping. opinion may be blank for non-stubborn
    agents; rate must be given for all agents or for none; stubborn is 0
    or 1. edges_source rows: src, dst, prob with prob in (0, 1]; prob may
    be blank (on every row) when rates will be normalized afterwards.
    """
    agent_rows = _read_rows(agents_source, AGENT_HEADER, delimiter)
    index: dict[str, AgentId] = {}
    opinions: list[float | None] = []
    rates: list[float | None] = []
    stubborn_set: set[AgentId] = set()
    for lineno, row in agent_rows:
        raw_id, raw_opinion, raw_rate, raw_flag = row
        if raw_id in index:
            raise ParseError(f"agents line {lineno}: duplicate id {raw_id!r}")
        agent = len(index)
        index[raw_id] = agent
        opinions.append(_parse_optional_float(raw_opinion, "opinion", lineno))
        rates.append(_parse_optional_float(raw_rate, "rate", lineno))
        if raw_flag not in ("0", "1"):
            raise ParseError(
                f"agents line {lineno}: stubborn flag must be 0 or 1, got {raw_flag!r}"
            )
        if raw_flag == "1":
            stubborn_set.add(agent)

    n = len(index)
    if n == 0:
        raise ParseError("agents source contains no rows")
    have_rates = [r is not None for r in rates]
    if any(have_rates) and not all(have_rates):
        raise ParseError("rate column must be filled for every agent or for none")
    posting_rates = tuple(r for r in rates) if all(have_rates) else None  # type: ignore[misc]

    in_lists: list[list[tuple[AgentId, float | None]]] = [[] for _ in range(n)]
    seen: set[tuple[AgentId, AgentId]] = set()
    for lineno, row in _read_rows(edges_source, EDGE_HEADER, delimiter, min_cols=2):
        raw_src, raw_dst = row[0], row[1]
        raw_prob = row[2] if len(row) > 2 else ""
        for raw in (raw_src, raw_dst):
            if raw not in index:
                raise ParseError(
                    f"edges line {lineno}: unknown agent id {raw!r} (not in agents source)"
                )
        src, dst = index[raw_src], index[raw_dst]
        prob = _parse_optional_float(raw_prob, "prob", lineno)
        try:
            _check_edge(src, dst, prob, seen)
        except DuplicateEdgeError:
            raise DuplicateEdgeError(
                f"edges line {lineno}: duplicate edge {raw_src!r} -> {raw_dst!r}"
            ) from None
        except DomainError as exc:
            raise DomainError(f"edges line {lineno}: {exc}") from None
        in_lists[dst].append((src, prob))

    probs_present = [p is not None for edges in in_lists for _, p in edges]
    if any(probs_present) and not all(probs_present):
        raise ParseError("prob column must be filled on every edge or on none")

    net = Network(
        n_agents=n,
        in_edges=tuple(tuple(v) for v in in_lists),
        stubborn=frozenset(stubborn_set),
        opinions=tuple(opinions),
        posting_rates=posting_rates,
        original_ids=tuple(index),
    )
    _check_domains(net)
    return net


def write_network(network: Network, edges_sink, agents_sink, *, delimiter: str = ",") -> None:
    """Serialize a Network back to the two tabular formats losslessly."""
    with _open_sink(agents_sink) as f:
        w = csv.writer(f, delimiter=delimiter, lineterminator="\n")
        w.writerow(AGENT_HEADER)
        for i in range(network.n_agents):
            rate = "" if network.posting_rates is None else repr(network.posting_rates[i])
            opinion = "" if network.opinions[i] is None else repr(network.opinions[i])
            flag = "1" if i in network.stubborn else "0"
            w.writerow([network.original_ids[i], opinion, rate, flag])
    with _open_sink(edges_sink) as f:
        w = csv.writer(f, delimiter=delimiter, lineterminator="\n")
        w.writerow(EDGE_HEADER)
        for dst in range(network.n_agents):
            for src, prob in network.in_edges[dst]:
                w.writerow(
                    [
                        network.original_ids[src],
                        network.original_ids[dst],
                        "" if prob is None else repr(prob),
                    ]
                )


def normalize_rates(network: Network) -> Network:
    """Turn raw posting rates into reading probabilities.

    Every edge from source j gets prob rate_j / Z where Z is the largest
    in-neighborhood rate sum over persuadable agents, so the busiest
    neighborhood saturates at total probability one and everyone else
    stays below. Edges out of zero-rate agents are dropped (they never
    post, so they are never read).
    """
    if network.posting_rates is None:
        raise DomainError("normalize_rates requires posting rates for every agent")
    rates = network.posting_rates
    if any(r < 0 for r in rates):
        raise DomainError("posting rates must be nonnegative")
    if all(r == 0 for r in rates):
        raise DomainError("degenerate input: every posting rate is zero")

    sums = [
        sum(rates[j] for j, _ in network.in_edges[i])
        for i in range(network.n_agents)
        if i not in network.stubborn
    ]
    z = max(sums, default=0.0)
    if z <= 0:
        raise DomainError(
            "degenerate input: no persuadable agent has a positive-rate source"
        )
    new_in = tuple(
        tuple((j, rates[j] / z) for j, _ in edges if rates[j] > 0)
        for edges in network.in_edges
    )
    return replace(network, in_edges=new_in, rate_scale=z)


def validate(network: Network) -> ValidationReport:
    """Check the standing structural assumptions.

    Flags persuadable agents whose source probabilities exceed one (with
    tolerance 1e-12) and persuadable agents with no directed path from any
    stubborn agent. Requires a weighted network.
    """
    if not network.weighted:
        raise DomainError("validate requires edge probabilities; normalize rates first")

    violations = []
    for i in range(network.n_agents):
        if i in network.stubborn:
            continue
        total = sum(p for _, p in network.in_edges[i])
        if total > 1.0 + ROW_SUM_TOL:
            violations.append((i, total))

    out = network.out_edges()
    reached = set(network.stubborn)
    frontier = list(network.stubborn)
    while frontier:
        j = frontier.pop()
        for i in out[j]:
            if i not in reached:
                reached.add(i)
                frontier.append(i)
    unreachable = tuple(
        i for i in range(network.n_agents)
        if i not in network.stubborn and i not in reached
    )

    parent = list(range(network.n_agents))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, edges in enumerate(network.in_edges):
        for j, _ in edges:
            parent[find(i)] = find(j)
    roots_with_stubborn = {find(i) for i in network.stubborn}
    all_roots = {find(i) for i in range(network.n_agents)}
    isolated = len(all_roots - roots_with_stubborn)

    return ValidationReport(
        row_sum_violations=tuple(violations),
        unreachable_nonstubborn=unreachable,
        isolated_components=isolated,
    )


def classify_stubborn(
    opinions: Sequence[float],
    low: tuple[float, float],
    high: tuple[float, float],
) -> tuple[frozenset[AgentId], dict[AgentId, float]]:
    """Partition agents into stubborn and persuadable by opinion extremity.

    Agents whose measured opinion falls inside the closed interval low or
    the closed interval high are labeled stubborn and keep their measured
    opinion as their fixed value. The intervals must be disjoint subsets
    of [0, 1] with low entirely below high.
    """
    for name, (lo, hi) in (("low", low), ("high", high)):
        if not (0.0 <= lo <= hi <= 1.0):
            raise ConfigError(f"{name} interval must satisfy 0 <= lo <= hi <= 1")
    if not low[1] < high[0]:
        raise ConfigError("low and high intervals must be disjoint, low below high")

    stubborn: set[AgentId] = set()
    values: dict[AgentId, float] = {}
    for i, theta in enumerate(opinions):
        if theta is None or theta != theta:
            raise DomainError(f"agent {i} has no measured opinion to classify")
        if not 0.0 <= theta <= 1.0:
            raise DomainError(f"agent {i} opinion {theta!r} outside [0, 1]")
        if low[0] <= theta <= low[1] or high[0] <= theta <= high[1]:
            stubborn.add(i)
            values[i] = float(theta)
    return frozenset(stubborn), values


def _as_index(agent) -> int:
    """Coerce an integral agent id to int; reject floats and the like."""
    try:
        return operator.index(agent)
    except TypeError:
        raise DomainError(f"agent id {agent!r} is not an integer") from None


def _check_agent_index(agent: int, n: int) -> None:
    if not isinstance(agent, (int,)) or isinstance(agent, bool) or not 0 <= agent < n:
        raise DomainError(f"agent id {agent!r} outside dense range 0..{n - 1}")


def _check_edge(
    src: AgentId,
    dst: AgentId,
    prob: float | None,
    seen: set[tuple[AgentId, AgentId]],
) -> None:
    if src == dst:
        raise DomainError(f"self-loop on agent {src}; agents do not read themselves")
    if (src, dst) in seen:
        raise DuplicateEdgeError(f"duplicate edge {src} -> {dst}")
    seen.add((src, dst))
    if prob is not None and not 0.0 < prob <= 1.0:
        raise DomainError(f"edge probability {prob!r} outside (0, 1]")


def _check_domains(net: Network) -> None:
    for i in net.stubborn:
        if net.opinions[i] is None:
            raise DomainError(f"stubborn agent {net.original_ids[i]!r} has no opinion")
    for i, value in enumerate(net.opinions):
        if value is not None and not 0.0 <= value <= 1.0:
            raise DomainError(
                f"agent {net.original_ids[i]!r} opinion {value!r} outside [0, 1]"
            )
    if net.posting_rates is not None:
        for i, rate in enumerate(net.posting_rates):
            if rate < 0:
                raise DomainError(
                    f"agent {net.original_ids[i]!r} posting rate {rate!r} is negative"
                )


def _parse_optional_float(raw: str, field: str, lineno: int) -> float | None:
    raw = raw.strip()
    if raw == "":
        return None
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(f"line {lineno}: cannot parse {field} value {raw!r}") from None
    if value != value:
        raise ParseError(f"line {lineno}: {field} value is NaN")
    return value


def _read_rows(source, header: tuple[str, ...], delimiter: str, *, min_cols: int | None = None):
    """Yield (lineno, row) pairs after checking the header row."""
    want = min_cols if min_cols is not None else len(header)
    with _open_source(source) as f:
        reader = csv.reader(f, delimiter=delimiter)
        rows = []
        first = next(reader, None)
        if first is None:
            raise ParseError("input is empty, expected a header row")
        got = tuple(c.strip().lower() for c in first)
        if got != header and got != header[:want]:
            raise ParseError(f"expected header {','.join(header)}, got {','.join(got)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(c.strip() == "" for c in row):
                continue
            if not want <= len(row) <= len(header):
                raise ParseError(
                    f"line {lineno}: expected {len(header)} columns, got {len(row)}"
                )
            rows.append((lineno, [c.strip() for c in row]))
    return rows


def _open_source(source):
    if hasattr(source, "read"):
        return _NonClosing(source)
    return open(os.fspath(source), "r", encoding="utf-8", newline="")


def _open_sink(sink):
    if hasattr(sink, "write"):
        return _NonClosing(sink)
    return open(os.fspath(sink), "w", encoding="utf-8", newline="")


class _NonClosing:
    """Context manager that leaves caller-owned streams open."""

    def __init__(self, stream) -> None:
        self._stream = stream

    def __enter__(self):
        return self._stream

    def __exit__(self, *exc) -> None:
        return None
