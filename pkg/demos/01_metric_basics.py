"""Distances on two small curves: the round circle and a circle with one kept interval.

Run with ``python3 demos/01_metric_basics.py``.
"""
from snowcircle.dyadic import DyadicPoint
from snowcircle.metric import build_index
from snowcircle.rules import keep_at_root, uniform_halve

P = DyadicPoint.parse

round_circle = build_index(uniform_halve(6), 6)
bumpy = build_index(keep_at_root(6), 6)
flat = build_index(keep_at_root(6), 6, "trunc:0")

print("pair          round   keep-at-root   truncated at 0")
for x, y in [("1/8", "1/2"), ("0", "1/2"), ("1/4", "3/4"), ("0", "1/16")]:
    row = [str(idx.dist(P(x), P(y))) for idx in (round_circle, bumpy, flat)]
    print(f"{x:>4} {y:>4}    {row[0]:>6} {row[1]:>12} {row[2]:>14}")

chain = bumpy.minimal_chain(P("1/8"), P("7/16"))
print("\nminimal chain 1/8 -> 7/16:", " ".join(map(str, chain)), "cost", bumpy.chain_cost(chain))

for name, idx in [("round", round_circle), ("keep-at-root", bumpy)]:
    tc = idx.bounded_turning_constant()
    print(f"bounded turning constant ({name}): {tc.ratio} at {tc.witness[0]}, {tc.witness[1]}")
