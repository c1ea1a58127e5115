"""Diameter of delta-components of preimages under F_0 for one seeded curve.

For every pair of adjacent dyadic intervals H at levels 3..5 and the two
extreme scales delta, the preimage of H splits into delta-components; the
table lists the largest diameter as a multiple of delta.
"""
from snowcircle.rules import seeded_random
from snowcircle.verifier import verify_lipschitz_light

rule = seeded_random(0.5, seed=3, cap=3, depth=10)
report = verify_lipschitz_light(rule, 10, (3, 5))

print("M*  scale  targets  components  max diam/delta")
for M in (3, 4, 5):
    for name in ("low", "high"):
        rows = [t for t in report.targets if t.M_star == M and t.delta_name == name]
        comps = sum(len(t.components) for t in rows)
        worst = max(t.max_delta_ratio for t in rows)
        print(f"{M:>2}  {name:>5}  {len(rows):>7}  {comps:>10}  {str(worst):>14}")

print("\nbound", report.bound, "passed:", report.passed)
print("F_0 Lipschitz constant:", report.lipschitz.value)
print("composite map constant (measured):", report.composite.constant)
for name, check in report.checks.items():
    print(f"  {name:<30} {check.status:<5} {check.instances} instances")
