"""
How fast the herd settles down
==============================

Replica simulation of the full stochastic dynamics on a ring of
persuadable agents fed by two stubborn sources. With stubbornness
weights decaying like 5/(t+10), the distance to the linear-system
equilibrium should shrink as a power of t; we measure the exponent from
log-spaced samples.
"""

import numpy as np

import stubnet as sn

n1 = 10
edges = []
for i in range(n1):
    edges.append(((i - 1) % n1, i, 0.2))
    edges.append(((i + 1) % n1, i, 0.2))
    edges.append((n1, i, 0.15))       # the opinion-one source
    edges.append((n1 + 1, i, 0.05))   # the opinion-zero source
net = sn.network_from_edges(n1 + 2, edges, {n1: 1.0, n1 + 1: 0.0})

# the ring is symmetric, so every agent settles at 0.15 / 0.20 = 0.75
equilibrium = sn.full_opinion_vector(
    net, sn.solve_equilibrium(sn.assemble(net), net.stubborn_opinions())
)
print("equilibrium:", equilibrium[:3], "...")

schedule = sn.StubbornnessSchedule.uniform(sn.PowerLaw(5.0, 9.0, 1.0), net.n_agents)
times = sorted(set(int(t) for t in np.logspace(2, 5, 10)))
trace = sn.run(
    net,
    schedule,
    sn.Verbalization.BERNOULLI,
    steps=100_000,
    replicas=60,
    seed=4,
    sample_times=times,
    equilibrium=equilibrium,
    workers=4,
)

print(" t        distance")
for t, d in zip(trace.times, trace.dist_to_eq):
    print(f"{int(t):>7d}  {d:.5f}")

est = sn.rate_estimate(trace)
print(f"fitted decay exponent: {est.slope:.3f} (converged: {est.converged})")
