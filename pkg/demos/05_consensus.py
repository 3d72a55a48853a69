"""
Consensus without any stubborn agents
=====================================

Remove the fixed anchors and the question changes: do the agents agree
with each other at all? Agreement is guaranteed when every pair of
agents shares an information source each round (a scrambling update),
weights decay slowly enough to keep moving but fast enough to quiet the
noise, and it can be quantified through the ergodicity coefficient of
the expected update matrix.
"""

import numpy as np

import stubnet as sn

# A hub read by everyone, reading back one spoke.
edges = [(0, i, 0.5) for i in (1, 2, 3, 4)] + [(1, 0, 0.5)]
net = sn.network_from_edges(5, edges, {}, opinions=[0.0, 0.25, 0.5, 0.75, 1.0])

print("scrambling update:", sn.is_scrambling(net))

# One synchronous expected update: rows of I + A, with A the generator.
p = sn.update_matrix(net) + np.eye(5)
tau = sn.ergodicity_coefficient(p)
print(f"ergodicity coefficient of one step: {tau:.3f} (< 1 contracts)")
print(f"two steps compound to at most {tau * tau:.3f}")

schedule = sn.StubbornnessSchedule.uniform(sn.PowerLaw(1.0, 1.0, 1.0), 5)
trace = sn.consensus_run(
    net,
    schedule,
    steps=50_000,
    replicas=80,
    seed=13,
    sample_times=sorted(set(int(t) for t in np.logspace(1, 4.5, 8))),
)

print(" t        disagreement")
for t, d in zip(trace.times, trace.centering_norm):
    print(f"{int(t):>7d}  {d:.5f}")

print("final mean opinions:", np.round(trace.mean[-1], 4))
