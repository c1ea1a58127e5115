"""The folding maps and their limit on a seeded curve.

Shows the three-piece fold of a single interval, then checks on the grid that
the limit map F_0 never increases distances.
"""
import numpy as np

from snowcircle.dyadic import DyadicPoint
from snowcircle.folding import FoldSpec, cascade_table, fold_eval, fold_preimages
from snowcircle.metric import build_index
from snowcircle.rules import keep_at_root, seeded_random

root = FoldSpec(keep_at_root(4), 0)
print("root fold on D_3:")
for k in range(9):
    x = DyadicPoint(k, 3)
    print(f"  f({x}) = {fold_eval(root, x)}")
print("preimages of 1/2:", sorted(str(p) for p in fold_preimages(root, DyadicPoint.parse("1/2"))))

rule = seeded_random(0.5, seed=7, cap=3, depth=8)
L = 8
F0 = cascade_table(rule, L)[0] % (1 << L)
D = build_index(rule, L).matrix().astype(np.int64)
D0 = build_index(rule, L, 0).matrix().astype(np.int64)
slack = D - D0[np.ix_(F0, F0)]
print(f"\nseeded rule {rule.hash[:10]}: folded levels {sorted(rule.folded_levels)}")
print("F_0 is 1-Lipschitz on D_8:", bool((slack >= 0).all()))
print("distinct images of the 256 grid points:", np.unique(F0).size)
