"""Numerical workbench for radial Schur multipliers on trees, tree products,
and median graphs: symbol calculus, weighted Hankel trace norms, Besov-side
cross-checks, graph witnesses, and a small experiment CLI."""

__version__ = "0.1.0"
