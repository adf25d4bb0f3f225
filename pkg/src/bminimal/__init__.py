"""Weighted minimal (B-minimal) graphs: variations, solvers and stability checks."""

__version__ = "0.1.0"
