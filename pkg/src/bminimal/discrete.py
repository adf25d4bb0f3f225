"""Finite-difference stencils, quadrature and small direct solvers shared by the modules."""

from __future__ import annotations

import math

import numpy as np


class SingularMatrixError(ArithmeticError):
    """Raised when elimination meets a pivot below the stall threshold."""


PIVOT_FLOOR = 1e-14


def d1(y: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """Second-order first derivative: central inside, one-sided at both ends."""
    y = np.moveaxis(np.asarray(y), axis, 0)
    if y.shape[0] < 3:
        raise ValueError("need at least 3 nodes along the differentiation axis")
    out = np.empty_like(y)
    out[1:-1] = (y[2:] - y[:-2]) / (2 * h)
    out[0] = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * h)
    out[-1] = (3 * y[-1] - 4 * y[-2] + y[-3]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def d1_transpose(g: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """Apply the transpose of the :func:`d1` stencil matrix along ``axis``."""
    g = np.moveaxis(np.asarray(g), axis, 0)
    out = np.zeros_like(g)
    s = 1.0 / (2 * h)
    # interior rows i: -1 at i-1, +1 at i+1
    out[:-2] -= s * g[1:-1]
    out[2:] += s * g[1:-1]
    # first row: -3, 4, -1
    out[0] += -3 * s * g[0]
    out[1] += 4 * s * g[0]
    out[2] += -1 * s * g[0]
    # last row: 1, -4, 3 on the last three nodes
    out[-3] += s * g[-1]
    out[-2] += -4 * s * g[-1]
    out[-1] += 3 * s * g[-1]
    return np.moveaxis(out, 0, axis)


def d2(y: np.ndarray, h: float) -> np.ndarray:
    """Second-order second derivative; one-sided four-point formula at the ends."""
    y = np.asarray(y)
    if y.shape[0] < 4:
        raise ValueError("need at least 4 nodes for the second derivative")
    out = np.empty_like(y)
    out[1:-1] = (y[2:] - 2 * y[1:-1] + y[:-2]) / h**2
    out[0] = (2 * y[0] - 5 * y[1] + 4 * y[2] - y[3]) / h**2
    out[-1] = (2 * y[-1] - 5 * y[-2] + 4 * y[-3] - y[-4]) / h**2
    return out


def trapezoid_weights(m: int, h: float) -> np.ndarray:
    w = np.full(m, h)
    w[0] = w[-1] = h / 2
    return w


def fixed_sum(values) -> float:
    """Exactly rounded sum in fixed order (deterministic across runs)."""
    return math.fsum(np.ravel(np.asarray(values, dtype=float)).tolist())


def trapezoid(values: np.ndarray, h: float) -> float:
    values = np.asarray(values, dtype=float)
    return fixed_sum(trapezoid_weights(values.shape[0], h) * values)


def solve_tridiagonal(lower, diag, upper, rhs) -> np.ndarray:
    """Thomas elimination without pivoting.

    ``lower[i]`` couples row i+1 to column i, ``upper[i]`` couples row i to
    column i+1.  Raises SingularMatrixError on a pivot smaller than 1e-14.
    """
    n = len(diag)
    c = np.empty(n)
    d = np.empty(n)
    piv = diag[0]
    if abs(piv) < PIVOT_FLOOR:
        raise SingularMatrixError("zero pivot in row 0")
    c[0] = upper[0] / piv if n > 1 else 0.0
    d[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i - 1] * c[i - 1]
        if abs(piv) < PIVOT_FLOOR:
            raise SingularMatrixError(f"zero pivot in row {i}")
        c[i] = upper[i] / piv if i < n - 1 else 0.0
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / piv
    x = np.empty(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


class BandedLU:
    """LU factorization without pivoting of a banded matrix.

    ``band`` has shape (N, 2*bw + 1) with ``band[r, bw + (c - r)] = A[r, c]``.
    """

    def __init__(self, band: np.ndarray, bw: int):
        a = np.array(band, dtype=float)
        n = a.shape[0]
        for k in range(n):
            piv = a[k, bw]
            if abs(piv) < PIVOT_FLOOR:
                raise SingularMatrixError(f"zero pivot in row {k}")
            last = min(k + bw, n - 1)
            if last == k:
                continue
            rows = np.arange(k + 1, last + 1)
            offs = rows - k
            mult = a[rows, bw - offs] / piv
            a[rows, bw - offs] = mult
            cols = (bw - offs)[:, None] + np.arange(1, bw + 1)[None, :]
            a[rows[:, None], cols] -= mult[:, None] * a[k, bw + 1 :][None, :]
        self.lu = a
        self.bw = bw

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        a, bw = self.lu, self.bw
        n = a.shape[0]
        y = np.array(rhs, dtype=float)
        for k in range(n):
            last = min(k + bw, n - 1)
            if last > k:
                offs = np.arange(1, last - k + 1)
                y[k + 1 : last + 1] -= a[k + offs, bw - offs] * y[k]
        x = np.empty(n)
        for k in range(n - 1, -1, -1):
            last = min(k + bw, n - 1)
            acc = y[k] - a[k, bw + 1 : bw + 1 + last - k] @ x[k + 1 : last + 1]
            x[k] = acc / a[k, bw]
        return x
