"""
Removing simultaneous births from a family tree
===============================================

If births may happen at the same instant as the mother's own birth, the
moment bound needs a coupling step: every such child is moved up to become a
sibling of its mother.  Birth times never change, only family relations, so
the number of individuals born by any time is the same before and after.
"""

import numpy as np

from cmjlab import FamilyTree, OffspringLaw, relabel_tree
from cmjlab.coupling_lab import births_up_to, progeny_mean, random_tied_tree

# Ancestor (1) is born at 0 and so is its first child (1, 1).  After the
# rewrite the child is a second ancestor (2), and the remaining children of
# (1) are renumbered from 1.
tree = FamilyTree({(1,): 0.0, (1, 1): 0.0, (1, 2): 1.0, (1, 3): 2.0, (1, 2, 1): 1.5})
res = relabel_tree(tree, depth_cap=5)
for label in res.tree.labels():
    print(label, res.tree.births[label])
print(f"steps: {res.steps}, ancestors: {res.tree.n_ancestors}")

# The same on a random tree with many ties.
rng = np.random.default_rng(0)
big = random_tied_tree(rng, max_nodes=40, tie_prob=0.4, mean_kids=2.0)
out = relabel_tree(big, depth_cap=8)
times = sorted(set(big.births.values()))
print(f"\nrandom tree: {len(big)} nodes, {len(big.red_labels())} tied pairs, "
      f"{big.n_ancestors} -> {out.tree.n_ancestors} ancestors, cap hit: {out.cap_hit}")
print("births by time unchanged:", all(births_up_to(big, t) == births_up_to(out.tree, t) for t in times))

# The children born at the same instant as their mother form a subcritical
# Galton-Watson tree, whose size has mean 1/(1 - mean offspring).
law = OffspringLaw.from_mapping({0: 0.7, 1: 0.2, 2: 0.1})
rep = progeny_mean(law, 50_000, seed=5)
print(f"\nGW total progeny: {rep.mean:.4f} +/- {rep.se:.4f}, formula {rep.expected:.4f}")
