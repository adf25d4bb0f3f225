"""Newton solvers for B-minimal graphs.

* :func:`solve_curve_bvp` -- two-point boundary value problem for curves with an
  arbitrary weight ``B(x, y)``; exact tridiagonal Jacobian.
* :func:`solve_graph_pde_2d` -- Dirichlet problem for the translating graph
  equation ``-exp(-y) div(exp(y) grad y / w) + w = 0`` on a rectangle.

Both use damped Newton: full step first, halved while the residual sup-norm
does not decrease, giving up below a step of 2**-20.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import discrete
from .discrete import BandedLU, SingularMatrixError
from .expr import Function
from .geometry1d import GraphCurve, Grid1D, WeightField, el_residual
from .graphic import GraphField, GridND

log = logging.getLogger(__name__)

MIN_STEP = 2.0**-20


@dataclass(frozen=True)
class SolveConfig:
    tol_residual: float = 1e-10
    max_iter: int = 50

    def __post_init__(self):
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class SolveReport:
    status: str  # "converged" | "max_iter" | "stalled"
    iterations: int
    residual_history: list = field(default_factory=list)
    step_history: list = field(default_factory=list)

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1]

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def quadratic_constants(self, tail: int = 3) -> list:
        """``r_{i+1} / r_i**2`` for the last ``tail`` Newton steps."""
        r = self.residual_history
        out = [r[i + 1] / r[i] ** 2 for i in range(len(r) - 1) if r[i] > 0]
        return out[-tail:]

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "residual_history": list(self.residual_history),
            "quadratic_constants": self.quadratic_constants(),
        }


def _newton(u0, residual, solve_linear, cfg: SolveConfig):
    """Generic damped Newton on the interior unknowns ``u``."""
    u = u0
    r = residual(u)
    norm = float(np.max(np.abs(r))) if r.size else 0.0
    report = SolveReport(status="max_iter", iterations=0, residual_history=[norm])
    for it in range(cfg.max_iter):
        if norm <= cfg.tol_residual:
            report.status = "converged"
            break
        try:
            du = solve_linear(u, r)
        except SingularMatrixError as exc:
            log.warning("Jacobian singular: %s", exc)
            report.status = "stalled"
            break
        step = 1.0
        while True:
            trial = u - step * du
            with np.errstate(all="ignore"):
                try:
                    r_trial = residual(trial)
                except ArithmeticError:
                    r_trial = np.full_like(r, np.inf)
            n_trial = float(np.max(np.abs(r_trial)))
            if np.isfinite(n_trial) and (n_trial < norm or n_trial <= cfg.tol_residual):
                break
            step /= 2
            if step < MIN_STEP:
                report.status = "stalled"
                return u, report
        u, r, norm = trial, r_trial, n_trial
        report.iterations = it + 1
        report.residual_history.append(norm)
        report.step_history.append(step)
        log.debug("newton %d: |R| = %.3e (step %g)", it + 1, norm, step)
    else:
        if norm <= cfg.tol_residual:
            report.status = "converged"
    return u, report


# ---------------------------------------------------------------------------
# curves


def curve_jacobian(c: GraphCurve, B: WeightField):
    """Exact tridiagonal Jacobian of :func:`el_residual` w.r.t. interior values.

    Returns ``(lower, diag, upper)``.
    """
    h = c.grid.h
    x, y = c.x, c.y
    s = np.diff(y) / h
    wh = np.sqrt(1.0 + s**2)
    xm, ybar = c.grid.midpoints, 0.5 * (y[1:] + y[:-1])
    eBh = np.exp(B.value(xm, ybar))
    Byh = B.dy(xm, ybar)
    F = eBh * s / wh
    # dF_{i+1/2}/dy_i and dF_{i+1/2}/dy_{i+1}
    dF_left = eBh * (-1.0 / (h * wh**3)) + 0.5 * Byh * F
    dF_right = eBh * (1.0 / (h * wh**3)) + 0.5 * Byh * F

    xi, yi = x[1:-1], y[1:-1]
    eBi = np.exp(-B.value(xi, yi))
    By = B.dy(xi, yi)
    Byy = B.dyy(xi, yi)
    yp, w = c.yp[1:-1], c.w[1:-1]
    dw = yp / (2 * h * w)  # dw_i/dy_{i+1}; dw_i/dy_{i-1} = -dw

    diag = By * eBi * np.diff(F) / h - eBi * (dF_left[1:] - dF_right[:-1]) / h + w * Byy
    upper = -eBi * dF_right[1:] / h + dw * By
    lower = eBi * dF_left[:-1] / h - dw * By
    # row i couples to i-1 via lower[i], to i+1 via upper[i]
    return lower[1:], diag, upper[:-1]


def solve_curve_bvp(grid: Grid1D, ya: float, yb: float, B: WeightField,
                    cfg: SolveConfig | None = None) -> tuple[GraphCurve, SolveReport]:
    """Solve the Euler-Lagrange equation with ``y(a) = ya``, ``y(b) = yb``.

    Starts from the affine interpolant.  Failure is reported in the status,
    never raised.
    """
    cfg = cfg or SolveConfig()
    if grid.n < 3:
        raise ValueError("solve_curve_bvp needs n >= 3")
    if not (np.isfinite(ya) and np.isfinite(yb)):
        raise ValueError("boundary values must be finite")
    y0 = ya + (yb - ya) * (grid.x - grid.a) / (grid.b - grid.a)
    y0[0], y0[-1] = ya, yb

    def full(u):
        return np.concatenate(([ya], u, [yb]))

    def residual(u):
        return el_residual(GraphCurve(grid, full(u)), B)

    def solve_linear(u, r):
        lower, diag, upper = curve_jacobian(GraphCurve(grid, full(u)), B)
        return discrete.solve_tridiagonal(lower, diag, upper, r)

    u, report = _newton(y0[1:-1].copy(), residual, solve_linear, cfg)
    return GraphCurve(grid, full(u)), report


# ---------------------------------------------------------------------------
# translating graphs over a rectangle


def translator_residual_2d(u: np.ndarray, h: tuple) -> np.ndarray:
    """Residual of ``-exp(-y) div(exp(y) grad y / w) + w`` at interior nodes.

    Written out for ``B = y`` only and valid for complex input, which the
    Jacobian assembly uses.
    """
    h1, h2 = h
    c1 = (u[2:, :] - u[:-2, :]) / (2 * h1)  # rows 1..m1-2, all columns
    c2 = (u[:, 2:] - u[:, :-2]) / (2 * h2)  # all rows, columns 1..m2-2

    s1 = (u[1:, 1:-1] - u[:-1, 1:-1]) / h1
    t2 = 0.5 * (c2[1:, :] + c2[:-1, :])
    F1 = np.exp(0.5 * (u[1:, 1:-1] + u[:-1, 1:-1])) * s1 / np.sqrt(1.0 + s1 * s1 + t2 * t2)

    s2 = (u[1:-1, 1:] - u[1:-1, :-1]) / h2
    t1 = 0.5 * (c1[:, 1:] + c1[:, :-1])
    F2 = np.exp(0.5 * (u[1:-1, 1:] + u[1:-1, :-1])) * s2 / np.sqrt(1.0 + s2 * s2 + t1 * t1)

    div = (F1[1:, :] - F1[:-1, :]) / h1 + (F2[:, 1:] - F2[:, :-1]) / h2
    w = np.sqrt(1.0 + c1[:, 1:-1] ** 2 + c2[1:-1, :] ** 2)
    return -np.exp(-u[1:-1, 1:-1]) * div + w


_CSTEP = 1e-20


def translator_jacobian_2d(u: np.ndarray, h: tuple) -> tuple[np.ndarray, int]:
    """Banded Jacobian of :func:`translator_residual_2d` by coloured complex steps.

    The stencil couples each node to its 3x3 neighbourhood, so perturbing all
    interior nodes of one colour ``(i % 3, j % 3)`` at once still isolates every
    entry; nine residual evaluations give the Jacobian to round-off.
    Returns ``(band, bw)`` in the layout used by :class:`discrete.BandedLU`.
    """
    m1, m2 = u.shape
    n1, n2 = m1 - 2, m2 - 2
    N, bw = n1 * n2, n2 + 1
    band = np.zeros((N, 2 * bw + 1))
    I, J = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")  # interior indices
    row = I * n2 + J
    for a in range(3):
        for b in range(3):
            sel = (I % 3 == a) & (J % 3 == b)
            if not sel.any():
                continue
            z = u.astype(complex)
            z[1:-1, 1:-1][sel] += 1j * _CSTEP
            dR = translator_residual_2d(z, h).imag / _CSTEP
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    # residual rows whose (di, dj) neighbour carries this colour
                    src_i, src_j = I + di, J + dj
                    ok = (src_i >= 0) & (src_i < n1) & (src_j >= 0) & (src_j < n2)
                    ok &= (src_i % 3 == a) & (src_j % 3 == b)
                    band[row[ok], bw + di * n2 + dj] = dR[ok]
    return band, bw


def solve_graph_pde_2d(grid: GridND, dirichlet, cfg: SolveConfig | None = None
                       ) -> tuple[GraphField, SolveReport]:
    """Solve the ``B = y`` graph equation with Dirichlet data ``dirichlet(x1, x2)``.

    The initial guess interpolates the boundary data bilinearly (Coons patch).
    """
    cfg = cfg or SolveConfig()
    if grid.n != 2:
        raise ValueError("solve_graph_pde_2d needs a two-dimensional grid")
    if isinstance(dirichlet, str):
        dirichlet = Function(dirichlet, ["x1", "x2"])
    X1, X2 = grid.mesh
    data = np.array(np.broadcast_to(dirichlet(x1=X1, x2=X2), grid.shape), dtype=float)
    if not np.all(np.isfinite(data[grid.boundary_mask])):
        raise ValueError("Dirichlet data must be finite on the boundary")

    s = (grid.coords[0] - grid.coords[0][0]) / (grid.coords[0][-1] - grid.coords[0][0])
    t = (grid.coords[1] - grid.coords[1][0]) / (grid.coords[1][-1] - grid.coords[1][0])
    S, T = s[:, None], t[None, :]
    d = data
    y0 = ((1 - S) * d[:1, :] + S * d[-1:, :] + (1 - T) * d[:, :1] + T * d[:, -1:]
          - ((1 - S) * (1 - T) * d[0, 0] + S * (1 - T) * d[-1, 0]
             + (1 - S) * T * d[0, -1] + S * T * d[-1, -1]))
    y0[grid.boundary_mask] = data[grid.boundary_mask]
    h = grid.h
    shape_in = (grid.shape[0] - 2, grid.shape[1] - 2)

    def full(u):
        z = y0.copy()
        z[1:-1, 1:-1] = u.reshape(shape_in)
        return z

    def residual(u):
        return translator_residual_2d(full(u), h).ravel()

    def solve_linear(u, r):
        band, bw = translator_jacobian_2d(full(u), h)
        return BandedLU(band, bw).solve(r)

    u, report = _newton(y0[1:-1, 1:-1].ravel().copy(), residual, solve_linear, cfg)
    return GraphField(grid, full(u)), report
