"""Exact and asymptotic enumeration of degree-bounded unlabeled trees."""

__version__ = "0.1.0"
