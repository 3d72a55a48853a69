"""Deterministic random-network corpus shared across test modules."""

import numpy as np

import stubnet as sn


def random_network(rng, n_min=5, n_max=60, max_stubborn_frac=0.5, rates=False):
    """Draw a valid weighted network.

    Agents 0..n0-1 are stubborn. Every persuadable agent reads at least
    one lower-indexed agent, so reachability from the stubborn block holds
    by induction and assemble() never rejects the draw.
    """
    n = int(rng.integers(n_min, n_max + 1))
    n0 = int(rng.integers(1, max(2, int(n * max_stubborn_frac)) + 1))
    n0 = min(n0, n - 1)
    edges = []
    for i in range(n0, n):
        k = int(rng.integers(1, min(5, i) + 1))
        lower = [int(j) for j in rng.choice(i, size=k, replace=False)]
        srcs = list(lower)
        others = [j for j in range(n) if j != i and j not in set(srcs)]
        if others and rng.random() < 0.5:
            m = min(2, len(others))
            srcs += [int(j) for j in rng.choice(np.array(others), size=m, replace=False)]
        cap = float(rng.uniform(0.2, 1.0))
        shares = rng.dirichlet(np.ones(len(srcs))) * cap
        for j, p in zip(srcs, shares):
            edges.append((j, i, float(p)))
    stubborn = {a: float(rng.random()) for a in range(n0)}
    posting = [float(rng.uniform(0.1, 5.0)) for _ in range(n)] if rates else None
    return sn.network_from_edges(n, edges, stubborn, posting_rates=posting)


def dense_blocks(sys):
    """Dense (M, F) with M the negated persuadable coupling block."""
    return (-sys.coupling).toarray(), sys.source.toarray()


def dense_equilibrium(net, sys=None):
    """Independent oracle: dense-factorization solve of the grounded system."""
    if sys is None:
        sys = sn.assemble(net)
    m, f = dense_blocks(sys)
    sv = np.array([net.opinions[a] for a in sys.stubborn_ids])
    return np.linalg.solve(m, f @ sv)
