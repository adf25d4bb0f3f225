"""Weighted length of graph curves y(x) and its variations.

For a graph curve with ``w = sqrt(1 + y'^2)`` and a weight ``B(x, y)`` the
functional is ``I(y) = int w exp(B) dx``.  Its critical points satisfy the
Euler-Lagrange equation

    -exp(-B) d/dx( exp(B) y' / w ) + w B_y = 0,

which is the curve version of ``H = (DB)^N``: the curvature vector equals the
normal part of grad B.  With ``B = y`` the grim reaper ``y = -log cos x`` is a
solution (it translates with unit speed under curve-shortening flow).

All derivatives use second-order differences (central inside, one-sided at
the ends) and all integrals the composite trapezoid rule, so the variations
below are the exact derivatives of the discrete functional.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Union

import numpy as np

from . import discrete
from .expr import Expr, Function

HALF_PI = np.pi / 2


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    a: float
    b: float
    n: int  # number of intervals

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need n >= 2 intervals, got {self.n}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.n + 1)

    @cached_property
    def midpoints(self) -> np.ndarray:
        return self.a + self.h * (np.arange(self.n) + 0.5)

    def trapezoid(self, values) -> float:
        return discrete.trapezoid(values, self.h)


@dataclass(frozen=True, eq=False)
class GraphCurve:
    grid: Grid1D
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.shape != (self.grid.n + 1,):
            raise ValueError(f"expected {self.grid.n + 1} values, got shape {y.shape}")
        object.__setattr__(self, "y", y)

    @classmethod
    def from_function(cls, grid: Grid1D, func: Union[Callable, str, Function]) -> "GraphCurve":
        if isinstance(func, str):
            func = Function(func, ["x"])
        if isinstance(func, Function):
            values = func(x=grid.x)
        else:
            values = func(grid.x)
        return cls(grid, np.broadcast_to(values, grid.x.shape).astype(float))

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @cached_property
    def yp(self) -> np.ndarray:
        return discrete.d1(self.y, self.grid.h)

    @cached_property
    def ypp(self) -> np.ndarray:
        return discrete.d2(self.y, self.grid.h)

    @cached_property
    def w(self) -> np.ndarray:
        return np.sqrt(1.0 + self.yp**2)


class WeightField:
    """The weight ``B(x, y)`` with its exact partial derivatives."""

    def __init__(self, B: Union[str, Expr, Function], variables: Iterable[str] = ("x", "y")):
        if isinstance(B, Function):
            self.B = B
        else:
            self.B = Function(B, variables)
        self.variables = self.B.variables

    @classmethod
    def translator(cls) -> "WeightField":
        """``B(x, y) = y``: the weight whose critical curves translate under CSF."""
        return cls("y")

    def __repr__(self):
        return f"WeightField({str(self.B)!r})"

    @property
    def B_x(self) -> Function:
        return self.B.partial("x")

    @property
    def B_y(self) -> Function:
        return self.B.partial("y")

    @property
    def B_yy(self) -> Function:
        return self.B_y.partial("y")

    def _bind(self, x, y):
        env = {"y": y, "y1": y}
        if "x" in self.variables or "x1" in self.variables:
            env["x"] = env["x1"] = x
        return env

    def value(self, x, y):
        return np.broadcast_to(self.B(**self._bind(x, y)), np.shape(y))

    def dx(self, x, y):
        return np.broadcast_to(self.B_x(**self._bind(x, y)), np.shape(y))

    def dy(self, x, y):
        return np.broadcast_to(self.B_y(**self._bind(x, y)), np.shape(y))

    def dyy(self, x, y):
        return np.broadcast_to(self.B_yy(**self._bind(x, y)), np.shape(y))

    def is_translator(self) -> bool:
        """True when B(x, y) == y (checked on a fixed set of points)."""
        pts = np.linspace(-1.3, 1.7, 7)
        xx, yy = np.meshgrid(pts, pts + 0.25)
        try:
            return bool(
                np.allclose(self.value(xx, yy), yy, rtol=0, atol=1e-13)
                and np.allclose(self.dy(xx, yy), 1.0, rtol=0, atol=1e-13)
            )
        except (ArithmeticError, ValueError):
            return False


@dataclass(frozen=True, eq=False)
class Perturbation:
    """Grid values of a variation ``xi`` vanishing at both ends."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n + 1,):
            raise ValueError(f"expected {self.grid.n + 1} values, got shape {v.shape}")
        if v[0] != 0.0 or v[-1] != 0.0:
            raise ValueError("perturbation must vanish at both endpoints")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid1D, func, clamp_ends: bool = True) -> "Perturbation":
        """Sample ``func`` on the grid; ``clamp_ends`` zeroes the two end values."""
        if isinstance(func, str):
            func = Function(func, ["x"])
        values = func(x=grid.x) if isinstance(func, Function) else func(grid.x)
        values = np.array(np.broadcast_to(values, grid.x.shape), dtype=float)
        if clamp_ends:
            values[0] = values[-1] = 0.0
        return cls(grid, values)

    def scaled(self, c: float) -> "Perturbation":
        return Perturbation(self.grid, c * self.values)


@dataclass(frozen=True, eq=False)
class CurveFrame:
    T: np.ndarray  # (n+1, 2) unit tangents
    N: np.ndarray  # (n+1, 2) unit normals
    kappa: np.ndarray  # signed curvature y''/w^3


def _xi(xi, grid: Grid1D) -> np.ndarray:
    if isinstance(xi, Perturbation):
        if xi.grid != grid:
            raise ValueError("perturbation lives on a different grid")
        return xi.values
    return Perturbation(grid, xi).values


def grim_reaper(x):
    """``-log(cos x)`` on ``|x| < pi/2``."""
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) >= HALF_PI):
        raise DomainError("grim reaper is only defined for |x| < pi/2")
    r = -np.log(np.cos(xa))
    return float(r) if r.ndim == 0 else r


def grim_reaper_curve(grid: Grid1D) -> GraphCurve:
    return GraphCurve(grid, grim_reaper(grid.x))


def weighted_length(c: GraphCurve, B: WeightField) -> float:
    """Trapezoid value of ``int w exp(B(x, y)) dx``."""
    eB = np.exp(B.value(c.x, c.y))
    return c.grid.trapezoid(c.w * eB)


def first_variation(c: GraphCurve, xi, B: WeightField) -> float:
    """Directional derivative ``int { y' xi'/w + w B_y xi } exp(B) dx``."""
    xv = _xi(xi, c.grid)
    xip = discrete.d1(xv, c.grid.h)
    eB = np.exp(B.value(c.x, c.y))
    integrand = (c.yp * xip / c.w + c.w * B.dy(c.x, c.y) * xv) * eB
    return c.grid.trapezoid(integrand)


def second_variation_general(c: GraphCurve, xi, B: WeightField | None = None) -> float:
    """Full second variation for ``B = y``.

    ``int { xi'^2/w - y'^2 xi'^2/w^3 + 2 y' xi' xi/w + w xi^2 } e^y dx``.
    For other weights use a finite difference of :func:`weighted_length`.
    """
    if B is not None and not B.is_translator():
        raise ValueError("second_variation_general is only defined for B = y")
    xv = _xi(xi, c.grid)
    xip = discrete.d1(xv, c.grid.h)
    yp, w = c.yp, c.w
    integrand = (
        xip**2 / w - yp**2 * xip**2 / w**3 + 2 * yp * xip * xv / w + w * xv**2
    ) * np.exp(c.y)
    return c.grid.trapezoid(integrand)


def second_variation_critical(c: GraphCurve, xi) -> float:
    """Second variation at a critical curve, ``int xi'^2 e^y / w^3 dx >= 0``."""
    xv = _xi(xi, c.grid)
    xip = discrete.d1(xv, c.grid.h)
    return c.grid.trapezoid(xip**2 / c.w**3 * np.exp(c.y))


def half_node_flux(c: GraphCurve, B: WeightField) -> np.ndarray:
    """``F_{i+1/2} = exp(B_{i+1/2}) s / sqrt(1 + s^2)`` with ``s`` the cell slope."""
    h = c.grid.h
    s = np.diff(c.y) / h
    ybar = 0.5 * (c.y[1:] + c.y[:-1])
    return np.exp(B.value(c.grid.midpoints, ybar)) * s / np.sqrt(1.0 + s**2)


def el_residual(c: GraphCurve, B: WeightField) -> np.ndarray:
    """Euler-Lagrange residual at the interior nodes (length n-1)."""
    if c.grid.n < 3:
        raise ValueError("el_residual needs n >= 3")
    h = c.grid.h
    F = half_node_flux(c, B)
    xi, yi = c.x[1:-1], c.y[1:-1]
    return -np.exp(-B.value(xi, yi)) * np.diff(F) / h + c.w[1:-1] * B.dy(xi, yi)


def curve_frame(c: GraphCurve) -> CurveFrame:
    yp, w = c.yp, c.w
    T = np.stack([1.0 / w, yp / w], axis=-1)
    N = np.stack([-yp / w, 1.0 / w], axis=-1)
    return CurveFrame(T=T, N=N, kappa=c.ypp / w**3)


def bminimal_residual_geometric(c: GraphCurve, B: WeightField) -> np.ndarray:
    """``H - (DB)^N`` at the interior nodes, shape (n-1, 2)."""
    if c.grid.n < 3:
        raise ValueError("bminimal_residual_geometric needs n >= 3")
    fr = curve_frame(c)
    xi, yi = c.x[1:-1], c.y[1:-1]
    N = fr.N[1:-1]
    H = fr.kappa[1:-1, None] * N
    grad_B = np.stack([B.dx(xi, yi), B.dy(xi, yi)], axis=-1)
    DBn = np.sum(grad_B * N, axis=-1)[:, None] * N
    return H - DBn


def translation_speed(c: GraphCurve) -> np.ndarray:
    """Graph curve-shortening velocity ``y''/(1 + y'^2)`` at the interior nodes."""
    return c.ypp[1:-1] / (1.0 + c.yp[1:-1] ** 2)
