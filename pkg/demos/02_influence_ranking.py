"""
Who actually moves the network
==============================

Influence scores for every agent, computed from the grounded linear
system rather than by simulation. A stubborn agent's score is the mean
response of the persuadable block to flipping its opinion from zero to
one; a persuadable agent's score is the same quantity in the limit where
it behaves like a stubborn agent.
"""

import numpy as np

import stubnet as sn

rng = np.random.default_rng(7)

# A random hierarchy: agent i reads a couple of earlier agents, the
# first three agents are stubborn.
n = 40
edges = []
for i in range(3, n):
    for j in rng.choice(i, size=min(3, i), replace=False):
        edges.append((int(j), i, float(rng.uniform(0.05, 0.25))))
stubborn = {0: 1.0, 1: 0.0, 2: 0.5}
net = sn.network_from_edges(n, edges, stubborn)

ranking = sn.rank_all(net)
print("top stubborn agents:")
for agent, score in ranking.ranked("stubborn"):
    print(f"  {agent}: {score:.4f}")
print("top five persuadable agents:")
for agent, score in ranking.ranked("persuadable")[:5]:
    print(f"  {agent}: {score:.4f}")

# Sanity check the winner against a brute-force flip experiment.
best = ranking.ranked("stubborn")[0][0]
sys_ = sn.assemble(net)
low = dict(net.stubborn_opinions())
high = dict(low)
low[best], high[best] = 0.0, 1.0
swing = (
    sn.solve_equilibrium(sys_, high).theta.mean()
    - sn.solve_equilibrium(sys_, low).theta.mean()
)
print(f"flip experiment for agent {best}: {swing:.6f}")
print(f"score for agent {best}:          {ranking.scores[best]:.6f}")
