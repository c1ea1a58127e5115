"""Weak quasicircles from dyadic diameter functions: exact chain metrics, folding maps
and certification that the folded projection is Lipschitz light."""

__version__ = "0.1.0"
