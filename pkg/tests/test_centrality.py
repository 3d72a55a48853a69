import numpy as np
import pytest

import stubnet as sn
from helpers import random_network

EPS4 = 4 * np.finfo(float).eps


def flip_oracle(net, agent):
    """Mean free-block response to moving one stubborn opinion 0 -> 1,
    measured by two full solves."""
    sys_ = sn.assemble(net)
    sv = dict(net.stubborn_opinions())
    lo, hi = dict(sv), dict(sv)
    lo[agent], hi[agent] = 0.0, 1.0
    a = sn.solve_equilibrium(sys_, lo).theta
    b = sn.solve_equilibrium(sys_, hi).theta
    return float((b - a).mean())


def pinning_oracle(net, agent):
    """Freeze one persuadable agent, drop its sources, flip it 0 -> 1, and
    average the response of the remaining persuadable agents."""
    edges = [
        (src, dst, prob)
        for dst in range(net.n_agents)
        if dst != agent
        for src, prob in net.in_edges[dst]
    ]
    means = []
    for value in (0.0, 1.0):
        stub = dict(net.stubborn_opinions())
        stub[agent] = value
        pinned = sn.network_from_edges(net.n_agents, edges, stub)
        sol = sn.solve_equilibrium(sn.assemble(pinned), pinned.stubborn_opinions())
        means.append(float(sol.theta.mean()))
    return means[1] - means[0]


def test_chain_hand_values(chain):
    sys_ = sn.assemble(chain)
    assert abs(sn.hic_nonstubborn(sys_, 0) - 2.0 / 3.0) <= EPS4
    assert abs(sn.hic_nonstubborn(sys_, 1) - 0.0) <= EPS4
    assert abs(sn.hic_stubborn(sys_, 2) - 5.0 / 6.0) <= EPS4
    assert abs(sn.hic_stubborn(sys_, 3) - 1.0 / 6.0) <= EPS4


def test_stubborn_scores_match_flip_oracle():
    rng = np.random.default_rng(61)
    for _ in range(12):
        net = random_network(rng, n_max=40)
        sys_ = sn.assemble(net)
        for agent in sys_.stubborn_ids:
            fast = sn.hic_stubborn(sys_, agent)
            assert abs(fast - flip_oracle(net, agent)) <= 1e-9


def test_persuadable_scores_match_pinning_oracle():
    rng = np.random.default_rng(62)
    for _ in range(10):
        net = random_network(rng, n_max=30)
        sys_ = sn.assemble(net)
        if sys_.n_free < 2:
            continue
        picks = rng.choice(sys_.free_ids, size=min(4, sys_.n_free), replace=False)
        for agent in (int(a) for a in picks):
            fast = sn.hic_nonstubborn(sys_, agent)
            assert abs(fast - pinning_oracle(net, agent)) <= 1e-9


def test_persuadable_score_is_strong_follower_limit(chain):
    """Secondary oracle: a committed follower cluster around the agent.

    Scale the agent's own sources down to mass eps and hand the rest to a
    fixed companion whose opinion we flip; as eps -> 0 this converges to
    the pinning value.
    """
    for agent, expected in ((0, 2.0 / 3.0), (1, 0.0)):
        eps = 1e-6
        scale = {agent: eps}
        means = []
        for value in (0.0, 1.0):
            edges = []
            for dst in range(chain.n_agents):
                for src, prob in chain.in_edges[dst]:
                    edges.append((src, dst, prob * scale.get(dst, 1.0)))
            anchor = chain.n_agents
            edges.append((anchor, agent, 1.0 - eps))
            stub = dict(chain.stubborn_opinions())
            stub[anchor] = value
            net = sn.network_from_edges(chain.n_agents + 1, edges, stub)
            sol = sn.solve_equilibrium(sn.assemble(net), net.stubborn_opinions())
            other = [
                v
                for a, v in zip(sol.free_ids, sol.theta)
                if a != agent
            ]
            means.append(float(np.mean(other)))
        assert abs((means[1] - means[0]) - expected) <= 1e-4


def test_rank_all_matches_single_agent_calls():
    rng = np.random.default_rng(63)
    net = random_network(rng, n_min=20, n_max=40)
    sys_ = sn.assemble(net)
    report = sn.rank_all(net, sys=sys_)
    for agent in sys_.stubborn_ids:
        assert report.scores[agent] == sn.hic_stubborn(sys_, agent)
        assert report.kind[agent] == "stubborn"
    for agent in sys_.free_ids:
        assert report.scores[agent] == pytest.approx(
            sn.hic_nonstubborn(sys_, agent), abs=1e-12
        )
        assert report.kind[agent] == "persuadable"


def test_rank_all_is_worker_invariant():
    rng = np.random.default_rng(64)
    net = random_network(rng, n_min=50, n_max=80)
    base = sn.rank_all(net, workers=1)
    for workers in (2, 5):
        again = sn.rank_all(net, workers=workers)
        assert again.scores == base.scores


def test_ranked_breaks_ties_by_ascending_id():
    # two persuadable agents in mirror positions share a score
    net = sn.network_from_edges(
        4,
        [(2, 0, 0.4), (3, 0, 0.4), (2, 1, 0.4), (3, 1, 0.4)],
        {2: 1.0, 3: 0.0},
    )
    report = sn.rank_all(net)
    listing = report.ranked(kind="persuadable")
    assert [a for a, _ in listing] == [0, 1]
    assert listing[0][1] == listing[1][1]


def test_wrong_kind_raises(chain):
    sys_ = sn.assemble(chain)
    with pytest.raises(sn.DomainError, match="not stubborn"):
        sn.hic_stubborn(sys_, 0)
    with pytest.raises(sn.DomainError, match="not persuadable"):
        sn.hic_nonstubborn(sys_, 2)


def test_single_persuadable_agent_is_noted(two_sources):
    report = sn.rank_all(two_sources)
    assert 0 not in report.scores
    assert any("single persuadable" in note for note in report.notes)
    sys_ = sn.assemble(two_sources)
    with pytest.raises(sn.ConfigError):
        sn.hic_nonstubborn(sys_, 0)


def test_no_persuadable_agents_is_noted():
    net = sn.network_from_edges(2, [(0, 1, 0.5)], {0: 1.0, 1: 0.0})
    report = sn.rank_all(net)
    assert report.scores == {}
    assert report.notes
