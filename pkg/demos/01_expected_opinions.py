"""
Expected limiting opinions on a small network
=============================================

Three persuadable agents caught between two stubborn extremists. We
build the network in code, check it satisfies the standing assumptions,
and solve for where everyone ends up on average.
"""

import numpy as np

import stubnet as sn

# Agents 0..2 are persuadable, 3 posts opinion one, 4 posts opinion zero.
# An edge (src, dst, p) means dst reads a post from src with probability
# p each round; whatever probability is left over, dst reads nothing.
edges = [
    (3, 0, 0.4), (4, 0, 0.1),
    (0, 1, 0.3), (4, 1, 0.2),
    (1, 2, 0.25), (3, 2, 0.05), (4, 2, 0.1),
]
net = sn.network_from_edges(5, edges, {3: 1.0, 4: 0.0})

report = sn.validate(net)
print("structurally sound:", report.ok)

# The expected dynamics are linear, so the limit is one sparse solve.
sys_ = sn.assemble(net)
sol = sn.solve_equilibrium(sys_, net.stubborn_opinions())
for agent, value in sol.as_mapping().items():
    print(f"agent {agent} settles at {value:.4f}")
print("residual norm:", sol.residual_norm)

# Opinions are convex combinations of the stubborn anchors: solving with
# both anchors at one must give exactly one everywhere.
ones = sn.solve_equilibrium(sys_, {3: 1.0, 4: 1.0})
print("all-ones check:", np.allclose(ones.theta, 1.0, atol=1e-12))

# What if a new opinion-one source also reached agent 1 with prob 0.3?
mod = sn.Modification(targets=(1,), p_agent=0.3, theta_agent=1.0)
lifted = sn.solve_equilibrium(sys_, net.stubborn_opinions(), mod)
print("with the extra source:", dict(lifted.as_mapping()))
