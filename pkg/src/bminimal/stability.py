"""Numerical verification of the weighted Hardy-type inequality

    int (3 cos^2 x - 1) / (4 cos x) u^2 dx  <=  int u'^2 cos x dx,
    u compactly supported in J = (-pi/2, pi/2),

through its regularization ``p = eps + cos x``, ``f = (3p^2 - 1)/(4p^2)``,
``dmu = p dx``:  ``int f u^2 dmu <= int u'^2 dmu``.

Two routes are provided:

* spectral -- the bottom generalized eigenvalue of the Sturm-Liouville pencil
  ``-(p u')' - f p u = lambda p u`` with Dirichlet ends (Sturm bisection);
* constructive -- solve ``v'' - (sin x/p) v' + f v = 0``, put ``phi = v'/v``
  (a solution of ``phi' + phi^2 - phi sin x/p + f = 0``) and check the identity
  ``int (u' - u phi)^2 dmu = int (u'^2 - f u^2) dmu``.

The default initial data ``v(-pi/2) = 1, v'(-pi/2) = 0`` give a solution that
changes sign near ``pi/2 - 2 eps``; the constructive identity then only holds
for ``u`` supported to the left of the crossing.  Starting from
``v(-pi/2) = 0, v'(-pi/2) = 1`` (``initial="jacobi"``) yields a solution that
stays positive on the half-open interval whenever the bottom eigenvalue is
positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import discrete
from .geometry1d import HALF_PI, Grid1D, Perturbation

INITIAL_CONDITIONS = {"neumann": (1.0, 0.0), "jacobi": (0.0, 1.0)}


@dataclass(frozen=True)
class SmoczykProblem:
    """Regularized stability data.

    ``p``, ``dp`` (its derivative) and ``f`` may be overridden for oracle
    problems, e.g. ``p = 1, f = 0`` (plain Dirichlet Laplacian on J).
    """

    eps: float = 0.0
    p_func: Optional[Callable] = None
    dp_func: Optional[Callable] = None
    f_func: Optional[Callable] = None

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be >= 0")

    a = -HALF_PI
    b = HALF_PI

    def p(self, x):
        if self.p_func is not None:
            return np.broadcast_to(self.p_func(x), np.shape(x)).astype(float)
        return self.eps + np.cos(x)

    def dp(self, x):
        if self.dp_func is not None:
            return np.broadcast_to(self.dp_func(x), np.shape(x)).astype(float)
        if self.p_func is not None:
            raise ValueError("dp_func is required together with p_func")
        return -np.sin(x)

    def f(self, x):
        if self.f_func is not None:
            return np.broadcast_to(self.f_func(x), np.shape(x)).astype(float)
        p = self.p(x)
        with np.errstate(divide="ignore"):
            return (3 * p**2 - 1) / (4 * p**2)

    def fp(self, x, u=None):
        """``f * p``; where ``p = 0`` the value is taken as 0 (requires u = 0 there)."""
        if self.f_func is not None:
            return self.f(x) * self.p(x)
        p = self.p(x)
        out = np.zeros_like(p)
        pos = p > 0
        out[pos] = (3 * p[pos] ** 2 - 1) / (4 * p[pos])
        if u is not None and np.any(~pos & (u != 0)):
            raise ValueError("test function must vanish where the weight p vanishes")
        return out


class GapResult(NamedTuple):
    lhs: float
    rhs: float
    gap: float


def sl_grid(n: int) -> Grid1D:
    """Uniform grid over the closed interval J with ``n`` intervals."""
    return Grid1D(-HALF_PI, HALF_PI, n)


def inequality_gap(u: Perturbation, prob: SmoczykProblem) -> GapResult:
    """Trapezoid values of ``int f u^2 dmu`` and ``int u'^2 dmu`` and their gap."""
    grid = u.grid
    x, uv = grid.x, u.values
    up = discrete.d1(uv, grid.h)
    lhs = grid.trapezoid(prob.fp(x, uv) * uv**2)
    rhs = grid.trapezoid(up**2 * prob.p(x))
    return GapResult(lhs, rhs, rhs - lhs)


class Tridiagonal(NamedTuple):
    diag: np.ndarray
    off: np.ndarray


def assemble_sl(prob: SmoczykProblem, m: int) -> tuple[Tridiagonal, np.ndarray]:
    """Stiffness ``A`` (symmetric tridiagonal) and lumped mass ``M`` on ``m`` interior nodes.

    ``h * u^T A u`` approximates ``int (u'^2 - f u^2) dmu`` for Dirichlet ``u``.
    """
    if m < 3:
        raise ValueError("need m >= 3 interior nodes")
    h = math.pi / (m + 1)
    x = -HALF_PI + h * np.arange(1, m + 1)
    xh = -HALF_PI + h * (np.arange(m + 1) + 0.5)
    ph = prob.p(xh)
    diag = (ph[:-1] + ph[1:]) / h**2 - prob.f(x) * prob.p(x)
    off = -ph[1:-1] / h**2
    return Tridiagonal(diag, off), prob.p(x)


def sl_nodes(m: int) -> np.ndarray:
    h = math.pi / (m + 1)
    return -HALF_PI + h * np.arange(1, m + 1)


def _sturm_count(d: list, e2: list, lam: float) -> int:
    """Number of eigenvalues of the symmetric tridiagonal matrix below ``lam``."""
    count = 0
    q = d[0] - lam
    if q < 0:
        count += 1
    for i in range(1, len(d)):
        if q == 0.0:
            q = 1e-300
        q = d[i] - lam - e2[i - 1] / q
        if q < 0:
            count += 1
    return count


def min_eigenvalue(A: Tridiagonal, M: np.ndarray, tol: float = 1e-12) -> float:
    """Smallest ``lambda`` with ``A u = lambda M u`` by Sturm-sequence bisection."""
    M = np.asarray(M, dtype=float)
    if np.any(M <= 0):
        raise ValueError("mass matrix must be positive")
    s = 1.0 / np.sqrt(M)
    d = A.diag * s * s
    e = A.off * s[:-1] * s[1:]
    radius = np.zeros_like(d)
    radius[:-1] += np.abs(e)
    radius[1:] += np.abs(e)
    lo = float(np.min(d - radius))
    hi = float(np.min(d))  # Rayleigh quotient of a unit vector
    dl, e2 = d.tolist(), (e * e).tolist()
    # bracket: count(lo) == 0, count(hi + ...) >= 1
    hi = hi + tol
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _sturm_count(dl, e2, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def rayleigh_quotient(A: Tridiagonal, M: np.ndarray, u: np.ndarray) -> float:
    Au = A.diag * u
    Au[:-1] += A.off * u[1:]
    Au[1:] += A.off * u[:-1]
    return float(u @ Au) / float(u @ (M * u))


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    step: float
    x: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    initial: tuple
    first_crossing: Optional[float]  # first mesh point with v <= 0, if any

    @property
    def positive(self) -> bool:
        return self.first_crossing is None

    @property
    def phi(self) -> np.ndarray:
        out = np.full_like(self.v, np.nan)
        pos = self.v > 0
        out[pos] = self.dv[pos] / self.v[pos]
        return out


def _rk4(a: float, nsteps: int, h: float, v0: float, dv0: float,
         coef: Callable, f: Callable) -> tuple[np.ndarray, np.ndarray]:
    """Classic RK4 for v'' = coef(x) v' - f(x) v on a uniform mesh."""
    xs = a + h * np.arange(nsteps + 1)
    xm = xs[:-1] + 0.5 * h
    c0, cm, c1 = coef(xs[:-1]).tolist(), coef(xm).tolist(), coef(xs[1:]).tolist()
    f0, fm, f1 = f(xs[:-1]).tolist(), f(xm).tolist(), f(xs[1:]).tolist()
    v = np.empty(nsteps + 1)
    dv = np.empty(nsteps + 1)
    y, z = v0, dv0
    v[0], dv[0] = y, z
    h2, h6 = 0.5 * h, h / 6.0
    for k in range(nsteps):
        k1y, k1z = z, c0[k] * z - f0[k] * y
        y2, z2 = y + h2 * k1y, z + h2 * k1z
        k2y, k2z = z2, cm[k] * z2 - fm[k] * y2
        y3, z3 = y + h2 * k2y, z + h2 * k2z
        k3y, k3z = z3, cm[k] * z3 - fm[k] * y3
        y4, z4 = y + h * k3y, z + h * k3z
        k4y, k4z = z4, c1[k] * z4 - f1[k] * y4
        y += h6 * (k1y + 2 * k2y + 2 * k3y + k4y)
        z += h6 * (k1z + 2 * k2z + 2 * k3z + k4z)
        v[k + 1], dv[k + 1] = y, z
    return v, dv


def _riccati_coefficients(prob: SmoczykProblem):
    # v'' = -(p'/p) v' - f v
    return (lambda x: -prob.dp(x) / prob.p(x)), prob.f


def solve_riccati_v(prob: SmoczykProblem, step: float | None = None, *,
                    initial: str | tuple = "neumann", tol: float = 1e-9,
                    max_steps: int = 2**22) -> RiccatiSolution:
    """Integrate ``v'' - (sin x/p) v' + f v = 0`` across J by RK4.

    ``initial`` is ``"neumann"`` (v = 1, v' = 0 at -pi/2), ``"jacobi"``
    (v = 0, v' = 1) or an explicit ``(v0, dv0)`` pair.  Without ``step`` the
    mesh is refined by halving until two successive solutions agree to ``tol``
    on the coarse nodes.  A sign change of ``v`` is reported through
    ``first_crossing``, not raised.
    """
    p_left = float(prob.p(np.array([prob.a]))[0])
    # cos(-pi/2) rounds to 6e-17, so eps = 0 shows up as a tiny positive p
    if not p_left > 1e-12:
        raise ValueError("the ODE route needs p > 0 at -pi/2 (eps > 0)")
    v0, dv0 = INITIAL_CONDITIONS[initial] if isinstance(initial, str) else initial
    coef, f = _riccati_coefficients(prob)
    length = prob.b - prob.a

    if step is not None:
        if not step > 0:
            raise ValueError("step must be positive")
        nsteps = max(1, math.ceil(length / step - 1e-9))
        v, dv = _rk4(prob.a, nsteps, length / nsteps, v0, dv0, coef, f)
    else:
        nsteps = 2 ** max(10, math.ceil(math.log2(8.0 / p_left)))
        if nsteps > max_steps:
            raise RuntimeError("eps too small for the RK4 step budget")
        v, dv = _rk4(prob.a, nsteps, length / nsteps, v0, dv0, coef, f)
        while True:
            if 2 * nsteps > max_steps:
                raise RuntimeError("RK4 step refinement did not reach the tolerance")
            v2, dv2 = _rk4(prob.a, 2 * nsteps, length / (2 * nsteps), v0, dv0, coef, f)
            change = float(np.max(np.abs(v2[::2] - v)))
            nsteps, v, dv = 2 * nsteps, v2, dv2
            if change < tol:
                break
    h = length / nsteps
    x = prob.a + h * np.arange(nsteps + 1)
    check = v[1:] if v0 == 0 else v
    bad = np.nonzero(check <= 0)[0]
    crossing = None
    if bad.size:
        crossing = float(x[bad[0] + (1 if v0 == 0 else 0)])
    return RiccatiSolution(step=h, x=x, v=v, dv=dv, initial=(v0, dv0), first_crossing=crossing)


def _hermite(x0, h, y, dy, xq):
    """Cubic Hermite interpolation of uniformly sampled (y, y') at ``xq``."""
    t = (xq - x0) / h
    k = np.clip(np.floor(t).astype(int), 0, len(y) - 2)
    s = t - k
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s**2 * (3 - 2 * s)
    h11 = s**2 * (s - 1)
    return h00 * y[k] + h10 * h * dy[k] + h01 * y[k + 1] + h11 * h * dy[k + 1]


def riccati_on_grid(sol: RiccatiSolution, prob: SmoczykProblem, x: np.ndarray):
    """``(v, v')`` at arbitrary points (fourth-order Hermite interpolation)."""
    coef, f = _riccati_coefficients(prob)
    ddv = coef(sol.x) * sol.dv - f(sol.x) * sol.v
    v = _hermite(sol.x[0], sol.step, sol.v, sol.dv, x)
    dv = _hermite(sol.x[0], sol.step, sol.dv, ddv, x)
    return v, dv


class RiccatiPositivityError(ArithmeticError):
    pass


def completing_square_check(u: Perturbation, sol: RiccatiSolution, prob: SmoczykProblem) -> float:
    """``|int (u' - u phi)^2 dmu - int (u'^2 - f u^2) dmu|`` on the grid of ``u``.

    Exact equality holds for ``phi = v'/v``; the returned value is the
    discretization error.  Raises RiccatiPositivityError when ``v`` has a
    non-positive sample inside the support of ``u``.
    """
    grid = u.grid
    x, uv = grid.x, u.values
    nz = np.nonzero(uv)[0]
    if nz.size == 0:
        return 0.0
    lo = grid.x[max(nz[0] - 1, 0)]
    hi = grid.x[min(nz[-1] + 1, grid.n)]
    if sol.first_crossing is not None:
        inside = (sol.x >= lo) & (sol.x <= hi)
        if sol.initial[0] == 0:
            inside[0] = False
        if np.any(sol.v[inside] <= 0):
            raise RiccatiPositivityError(
                f"v changes sign at x = {sol.first_crossing:.6g} inside the support of u"
            )
    up = discrete.d1(uv, grid.h)
    v, dv = riccati_on_grid(sol, prob, x)
    u_phi = np.empty_like(uv)
    pos = v > 0
    u_phi[pos] = uv[pos] * dv[pos] / v[pos]
    # u and v both vanish (Jacobi start): u v'/v -> u' by l'Hopital
    u_phi[~pos] = up[~pos]
    p = prob.p(x)
    left = grid.trapezoid((up - u_phi) ** 2 * p)
    right = grid.trapezoid(up**2 * p - prob.fp(x, uv) * uv**2)
    return abs(left - right)
