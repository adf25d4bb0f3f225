"""Graphs ``x -> (x, y(x))`` of maps ``y: D -> R^k`` with ``D`` in ``R^n`` (n = 1, 2).

The weighted volume is ``I(y) = int_D w exp(B(y)) dx`` with the first
fundamental form ``g_ij = delta_ij + <D_i y, D_j y>`` and ``w = sqrt(det g)``.

Note on the first variation.  Differentiating ``det g`` gives

    dI(y) xi = int { w g^ij <D_i y, D_j xi> + w <D_y B, xi> } exp(B) dx,

which is the form implemented here.  A display with ``g^ij <D_i y, D_j xi> / w``
in place of ``w g^ij <...>`` circulates for this functional; it does not reduce
to the curve formula ``y' xi'/w`` for n = k = 1 (where ``w g^11 = 1/w``) nor
to the scalar equation ``-exp(-y) div(exp(y) grad y / w) + w = 0``, so it is
treated as a misprint.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import discrete
from .expr import Function, free_variables
from .geometry1d import WeightField


@dataclass(frozen=True)
class GridND:
    axes: tuple  # ((a, b, m), ...) with m nodes per axis

    def __post_init__(self):
        axes = tuple((float(a), float(b), int(m)) for a, b, m in self.axes)
        if len(axes) not in (1, 2):
            raise ValueError("only n = 1 or n = 2 is supported")
        for a, b, m in axes:
            if not a < b:
                raise ValueError(f"need a < b on every axis, got [{a}, {b}]")
            if m < 3:
                raise ValueError("need at least 3 nodes per axis")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def square(cls, a: float, b: float, m: int, n: int = 2) -> "GridND":
        return cls(tuple((a, b, m) for _ in range(n)))

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(m for _, _, m in self.axes)

    @property
    def h(self) -> tuple:
        return tuple((b - a) / (m - 1) for a, b, m in self.axes)

    @cached_property
    def coords(self) -> tuple:
        return tuple(np.linspace(a, b, m) for a, b, m in self.axes)

    @cached_property
    def mesh(self) -> tuple:
        return tuple(np.meshgrid(*self.coords, indexing="ij"))

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for d in range(self.n):
            idx = [slice(None)] * self.n
            idx[d] = 0
            mask[tuple(idx)] = True
            idx[d] = -1
            mask[tuple(idx)] = True
        return mask

    @cached_property
    def quadrature_weights(self) -> np.ndarray:
        w = np.ones(self.shape)
        for d, (_, _, m) in enumerate(self.axes):
            wd = discrete.trapezoid_weights(m, self.h[d])
            w = w * wd.reshape([-1 if e == d else 1 for e in range(self.n)])
        return w

    def bindings(self) -> dict:
        env = {f"x{d + 1}": self.mesh[d] for d in range(self.n)}
        if self.n == 1:
            env["x"] = self.mesh[0]
        return env

    @property
    def interior(self) -> tuple:
        return tuple(slice(1, -1) for _ in range(self.n))


@dataclass(frozen=True, eq=False)
class GraphField:
    grid: GridND
    values: np.ndarray  # grid.shape + (k,)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape == self.grid.shape:
            v = v[..., None]
        if v.shape[:-1] != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("graph values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_functions(cls, grid: GridND, funcs: Sequence) -> "GraphField":
        """Sample one expression (string or Function over x1..xn) per component."""
        names = [f"x{d + 1}" for d in range(grid.n)] + (["x"] if grid.n == 1 else [])
        comps = []
        for f in funcs:
            if isinstance(f, str):
                f = Function(f, names)
            comps.append(np.broadcast_to(f(**grid.bindings()), grid.shape))
        return cls(grid, np.stack(comps, axis=-1))

    @property
    def k(self) -> int:
        return self.values.shape[-1]

    @property
    def dirichlet_mask(self) -> np.ndarray:
        return self.grid.boundary_mask

    def with_values(self, values) -> "GraphField":
        return GraphField(self.grid, values)


@dataclass(frozen=True, eq=False)
class FirstFundamentalData:
    grads: np.ndarray  # (n,) + shape + (k,)  D_i y
    g: np.ndarray  # shape + (n, n)
    g_inv: np.ndarray  # shape + (n, n)
    w: np.ndarray  # shape


def first_fundamental_data(y: GraphField) -> FirstFundamentalData:
    grid = y.grid
    grads = np.stack([discrete.d1(y.values, grid.h[d], axis=d) for d in range(grid.n)])
    n = grid.n
    g = np.empty(grid.shape + (n, n))
    for i in range(n):
        for j in range(n):
            g[..., i, j] = (i == j) + np.sum(grads[i] * grads[j], axis=-1)
    if n == 1:
        det = g[..., 0, 0]
        g_inv = 1.0 / g
    else:
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
        g_inv = np.empty_like(g)
        g_inv[..., 0, 0] = g[..., 1, 1] / det
        g_inv[..., 1, 1] = g[..., 0, 0] / det
        g_inv[..., 0, 1] = -g[..., 0, 1] / det
        g_inv[..., 1, 0] = -g[..., 1, 0] / det
    return FirstFundamentalData(grads=grads, g=g, g_inv=g_inv, w=np.sqrt(det))


def _y_bindings(values: np.ndarray) -> dict:
    k = values.shape[-1]
    env = {f"y{c + 1}": values[..., c] for c in range(k)}
    if k == 1:
        env["y"] = values[..., 0]
    return env


def _check_weight(B: WeightField, k: int):
    allowed = {f"y{c + 1}" for c in range(k)} | ({"y"} if k == 1 else set())
    extra = free_variables(B.B.expr) - allowed
    if extra:
        raise ValueError(f"graphic weight may only depend on y-variables, found {sorted(extra)}")


def _weight(B: WeightField, values: np.ndarray):
    return np.broadcast_to(B.B(**_y_bindings(values)), values.shape[:-1])


def _weight_grad(B: WeightField, values: np.ndarray) -> np.ndarray:
    k = values.shape[-1]
    env = _y_bindings(values)
    return np.stack(
        [np.broadcast_to(B.B.partial(f"y{c + 1}")(**env), values.shape[:-1]) for c in range(k)],
        axis=-1,
    )


def graphic_functional(y: GraphField, B: WeightField) -> float:
    """Tensor-trapezoid value of ``int_D w exp(B(y)) dx``."""
    _check_weight(B, y.k)
    ffd = first_fundamental_data(y)
    return discrete.fixed_sum(y.grid.quadrature_weights * ffd.w * np.exp(_weight(B, y.values)))


def graphic_gradient(y: GraphField, B: WeightField) -> np.ndarray:
    """Gradient of :func:`graphic_functional` w.r.t. the nodal values.

    Shape ``grid.shape + (k,)``; Dirichlet (boundary) entries are zero.
    """
    _check_weight(B, y.k)
    grid = y.grid
    ffd = first_fundamental_data(y)
    W = grid.quadrature_weights
    eB = np.exp(_weight(B, y.values))
    scale = (W * ffd.w * eB)[..., None]
    grad = scale * _weight_grad(B, y.values)
    for j in range(grid.n):
        # P_j = W w e^B g^{ij} D_i y
        P = sum(ffd.g_inv[..., i, j][..., None] * ffd.grads[i] for i in range(grid.n))
        grad = grad + discrete.d1_transpose(scale * P, grid.h[j], axis=j)
    grad[grid.boundary_mask] = 0.0
    return grad


def _central(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Central difference at nodes 1..m-2 along ``axis`` (other axes untouched)."""
    v = np.moveaxis(values, axis, 0)
    return np.moveaxis((v[2:] - v[:-2]) / (2 * h), 0, axis)


def _half_node_fluxes(u: np.ndarray, h: tuple, weight=None) -> list:
    """Fluxes ``e^{B(ubar)} D_d u / w`` on the half nodes in each direction.

    Flux ``d`` is returned on the half nodes between consecutive nodes along
    axis ``d`` and on interior nodes along the other axis; the transverse
    derivative is the average of the two neighbouring central differences.
    """
    n = u.ndim
    fluxes = []
    for d in range(n):
        ud = np.moveaxis(u, d, 0)
        s = (ud[1:] - ud[:-1]) / h[d]
        ubar = 0.5 * (ud[1:] + ud[:-1])
        sq = s**2
        if n == 2:
            o = 1 - d
            c = np.moveaxis(_central(u, h[o], axis=o), d, 0)  # interior along o
            t = 0.5 * (c[1:] + c[:-1])
            s = s[:, 1:-1]
            sq = s**2 + t**2
            ubar = ubar[:, 1:-1]
        eB = np.exp(weight(ubar)) if weight is not None else 1.0
        fluxes.append(eB * s / np.sqrt(1.0 + sq))
    return fluxes


def _node_w(u: np.ndarray, h: tuple) -> np.ndarray:
    sq = 0.0
    for d in range(u.ndim):
        c = _central(u, h[d], axis=d)
        sl = [slice(1, -1)] * u.ndim
        sl[d] = slice(None)
        sq = sq + c[tuple(sl)] ** 2
    return np.sqrt(1.0 + sq)


def _divergence(fluxes: list, h: tuple) -> np.ndarray:
    div = 0.0
    for d, F in enumerate(fluxes):
        Fd = np.diff(F, axis=0) / h[d]
        div = div + np.moveaxis(Fd, 0, d)
    return div


def graphic_el_residual(y: GraphField, B: WeightField) -> np.ndarray:
    """Euler-Lagrange residual at interior nodes, shape ``interior + (k,)``.

    For k = 1 the half-node flux form of
    ``-exp(-B) D_j(exp(B) w g^ij D_i y) + w D_y B`` is used (``w g^ij D_i y``
    reduces to ``grad y / w``).  For k > 1 the residual is the discrete
    gradient divided by the local quadrature weight and ``exp(B)``.
    """
    _check_weight(B, y.k)
    grid = y.grid
    inner = grid.interior
    if y.k == 1:
        u = y.values[..., 0]
        wfun = lambda v: np.broadcast_to(B.B(y=v, y1=v), np.shape(v))
        div = _divergence(_half_node_fluxes(u, grid.h, wfun), grid.h)
        uP = u[inner]
        BP = wfun(uP)
        dB = np.broadcast_to(B.B.partial("y1")(y=uP, y1=uP), uP.shape)
        return (-np.exp(-BP) * div + _node_w(u, grid.h) * dB)[..., None]
    grad = graphic_gradient(y, B)
    eB = np.exp(_weight(B, y.values))
    return grad[inner] / (grid.quadrature_weights * eB)[inner][..., None]


def translator_residual_alt(y: GraphField) -> np.ndarray:
    """``1/w - div(grad y / w)`` for k = 1, half-node fluxes without weights.

    Algebraically equal to the ``B = y`` residual of :func:`graphic_el_residual`;
    the two discretizations differ by O(h^2).
    """
    if y.k != 1:
        raise ValueError("translator form is defined for k = 1")
    grid = y.grid
    u = y.values[..., 0]
    div = _divergence(_half_node_fluxes(u, grid.h), grid.h)
    return (1.0 / _node_w(u, grid.h) - div)[..., None]
