"""Curve-shortening flow of graphs, ``y_t = y'' / (1 + y'^2)``.

With ``B = y`` the B-minimal curves are exactly the graphs that translate
upward with unit speed under this flow; the grim reaper is the model case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import Const, Function
from .geometry1d import GraphCurve

CFL = 0.4


@dataclass(frozen=True, eq=False)
class FlowState:
    curve: GraphCurve
    t: float


def _boundary_function(b) -> Function:
    if isinstance(b, Function):
        return b
    if isinstance(b, (int, float)):
        return Function(Const(float(b)), ["t"])
    return Function(b, ["t"])


def evolve_csf(initial: GraphCurve, t_end: float, dt: float, boundary: Sequence,
               n_samples: int = 2) -> list[FlowState]:
    """Forward-Euler graph CSF with time-dependent Dirichlet values.

    ``boundary`` is a pair of expressions in ``t`` giving ``y(a, t)`` and
    ``y(b, t)``.  ``dt`` must satisfy ``dt <= 0.4 h^2``; it is shrunk so that
    a whole number of steps reaches ``t_end``.  Returns ``n_samples`` states at
    evenly spaced step indices, first and last included.
    """
    h = initial.grid.h
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if not (0 < dt <= CFL * h * h * (1 + 1e-12)):
        raise ValueError(f"dt = {dt:g} violates the stability bound 0.4 h^2 = {CFL * h * h:g}")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    left, right = (_boundary_function(b) for b in boundary)

    nsteps = max(1, math.ceil(t_end / dt - 1e-9))
    tau = t_end / nsteps
    record = {round(j * nsteps / (n_samples - 1)) for j in range(n_samples)}

    y = initial.y.copy()
    grid = initial.grid
    states = []
    if 0 in record:
        states.append(FlowState(GraphCurve(grid, y.copy()), 0.0))
    inv_h2, inv_2h = 1.0 / (h * h), 1.0 / (2 * h)
    for k in range(1, nsteps + 1):
        ypp = (y[2:] - 2 * y[1:-1] + y[:-2]) * inv_h2
        yp = (y[2:] - y[:-2]) * inv_2h
        y[1:-1] += tau * ypp / (1.0 + yp * yp)
        t = k * tau
        y[0] = left(t=t)
        y[-1] = right(t=t)
        if k in record:
            states.append(FlowState(GraphCurve(grid, y.copy()), t))
    return states
