"""The full table of exact property checks for one curve, as printed by ``snowcircle lemmas``."""
from snowcircle.reports import lemma_table
from snowcircle.rules import periodic_keep
from snowcircle.lemmas import run_suite

rule = periodic_keep(3, depth=9)
print(lemma_table(run_suite(rule, 9)))
