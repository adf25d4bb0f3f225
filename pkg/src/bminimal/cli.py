"""Config-driven command line front end.

    bminimal --config run.json [--out DIR] [--quiet]

Each run executes one task and writes ``result.json`` plus a task CSV into the
output directory.  Exit codes: 0 success, 1 configuration error (nothing is
written), 2 solver did not converge, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from typing import Any

import numpy as np

from . import expr as ex
from .flow import CFL, evolve_csf
from .geometry1d import (HALF_PI, GraphCurve, Grid1D, Perturbation, WeightField,
                         bminimal_residual_geometric, el_residual, first_variation,
                         grim_reaper, grim_reaper_curve, second_variation_general,
                         weighted_length)
from .graphic import GridND, graphic_el_residual, translator_residual_alt
from .solvers import SolveConfig, solve_curve_bvp, solve_graph_pde_2d
from .stability import (SmoczykProblem, RiccatiPositivityError, assemble_sl,
                        completing_square_check, inequality_gap, min_eigenvalue,
                        riccati_on_grid, sl_grid, solve_riccati_v)

log = logging.getLogger("bminimal")

TASKS = ("verify", "solve1d", "solve2d", "stability", "flow", "variation")
EDGE_MARGIN = 1e-9

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# output helpers


def fmt(v) -> str:
    return "%.17g" % float(v)


def write_csv(path: str, header: list, columns: list):
    cols = [np.ravel(np.asarray(c, dtype=float)) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(fmt(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_json(path: str, data: dict):
    with open(path, "w", newline="\n") as fh:
        fh.write(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# config validation


def _get(cfg: dict, key: str, default=None, kind=None):
    v = cfg.get(key, default)
    if v is None:
        raise ConfigError(f"missing required key {key!r}")
    if kind is not None:
        try:
            if kind is int:
                if isinstance(v, bool) or float(v) != int(v):
                    raise ValueError
                v = int(v)
            else:
                v = kind(v)
        except (TypeError, ValueError):
            raise ConfigError(f"key {key!r} must be of type {kind.__name__}") from None
    return v


def _interval(cfg, default):
    iv = cfg.get("interval", default)
    if not (isinstance(iv, (list, tuple)) and len(iv) == 2):
        raise ConfigError("'interval' must be a pair [a, b]")
    try:
        a, b = float(iv[0]), float(iv[1])
    except (TypeError, ValueError):
        raise ConfigError("'interval' entries must be numbers") from None
    if not a < b:
        raise ConfigError("'interval' needs a < b")
    return a, b


def _function(text, variables, key):
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return ex.Function(ex.Const(float(text)), variables)
    if not isinstance(text, str):
        raise ConfigError(f"{key!r} must be an expression string or a number")
    try:
        return ex.Function(text, variables)
    except ex.ExprError as exc:
        raise ConfigError(f"invalid expression for {key!r}: {exc}") from None


def _weight(cfg, default="y"):
    return WeightField(_function(cfg.get("B", default), ["x", "y"], "B"))


def _constant(value, key) -> float:
    f = _function(value, [], key)
    try:
        return float(f())
    except ArithmeticError as exc:
        raise ConfigError(f"cannot evaluate {key!r}: {exc}") from None


def _solve_config(cfg) -> SolveConfig:
    tol = cfg.get("tolerances", {}) or {}
    try:
        return SolveConfig(tol_residual=float(tol.get("tol_residual", 1e-10)),
                           max_iter=int(tol.get("max_iter", 50)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid tolerances: {exc}") from None


def _check_reaper_interval(a, b, B: WeightField):
    if B.is_translator() and (a <= -HALF_PI + EDGE_MARGIN or b >= HALF_PI - EDGE_MARGIN):
        raise ConfigError("interval must lie inside (-pi/2, pi/2) for the B = y grim reaper case")


# ---------------------------------------------------------------------------
# tasks: each returns (plan) after validation; plan() runs and writes outputs


def plan_verify(cfg):
    a, b = _interval(cfg, [-1.3, 1.3])
    B = _weight(cfg)
    if not B.is_translator():
        raise ConfigError("task 'verify' checks the grim reaper and needs B = y")
    _check_reaper_interval(a, b, B)
    ns = [int(n) for n in cfg.get("ns", [100, 200, 400])]
    if any(n < 3 for n in ns):
        raise ConfigError("grid sizes must be >= 3")

    def run(out):
        el, geo, I = [], [], []
        for n in ns:
            c = grim_reaper_curve(Grid1D(a, b, n))
            el.append(float(np.max(np.abs(el_residual(c, B)))))
            geo.append(float(np.max(np.linalg.norm(bminimal_residual_geometric(c, B), axis=1))))
            I.append(weighted_length(c, B))
        hs = [(b - a) / n for n in ns]
        write_csv(os.path.join(out, "verify.csv"), ["n", "h", "el_residual", "geometric_residual", "I"],
                  [ns, hs, el, geo, I])
        result = {
            "ns": ns,
            "el_residual_sup": el,
            "geometric_residual_sup": geo,
            "el_ratios": [el[i] / el[i + 1] for i in range(len(ns) - 1)],
            "geometric_ratios": [geo[i] / geo[i + 1] for i in range(len(ns) - 1)],
            "weighted_length": I,
        }
        return result, EXIT_OK

    return run


def plan_solve1d(cfg):
    a, b = _interval(cfg, [-1.2, 1.2])
    n = _get(cfg, "n", 200, int)
    if n < 3:
        raise ConfigError("'n' must be >= 3")
    B = _weight(cfg)
    bnd = _get(cfg, "boundary")
    if not (isinstance(bnd, (list, tuple)) and len(bnd) == 2):
        raise ConfigError("'boundary' must be a pair [ya, yb]")
    ya, yb = _constant(bnd[0], "boundary[0]"), _constant(bnd[1], "boundary[1]")
    scfg = _solve_config(cfg)
    grid = Grid1D(a, b, n)

    def run(out):
        curve, report = solve_curve_bvp(grid, ya, yb, B, scfg)
        res = el_residual(curve, B)
        resid = np.concatenate(([0.0], res, [0.0]))
        write_csv(os.path.join(out, "solve1d.csv"), ["x", "y", "residual"], [grid.x, curve.y, resid])
        result = {"solve": report.as_dict(),
                  "recomputed_residual_sup": float(np.max(np.abs(res))),
                  "weighted_length": weighted_length(curve, B),
                  "h": grid.h}
        if (B.is_translator() and -HALF_PI < a and b < HALF_PI
                and abs(ya - grim_reaper(a)) < 1e-12 and abs(yb - grim_reaper(b)) < 1e-12):
            result["grim_reaper_sup_error"] = float(np.max(np.abs(curve.y - grim_reaper(grid.x))))
        return result, EXIT_OK if report.converged else EXIT_NOT_CONVERGED

    return run


def plan_solve2d(cfg):
    dom = cfg.get("domain", [[-1.0, 1.0], [-1.0, 1.0]])
    try:
        (a1, b1), (a2, b2) = [(float(p), float(q)) for p, q in dom]
    except (TypeError, ValueError):
        raise ConfigError("'domain' must be [[a1, b1], [a2, b2]]") from None
    ms = cfg.get("m", [41, 41])
    if isinstance(ms, int):
        ms = [ms, ms]
    m1, m2 = int(ms[0]), int(ms[1])
    if min(m1, m2) < 3:
        raise ConfigError("grid sizes must be >= 3")
    B = _weight(cfg)
    if not B.is_translator():
        raise ConfigError("task 'solve2d' is defined for B = y only")
    dirichlet = _function(_get(cfg, "boundary"), ["x1", "x2"], "boundary")
    scfg = _solve_config(cfg)
    try:
        grid = GridND(((a1, b1, m1), (a2, b2, m2)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    def run(out):
        field, report = solve_graph_pde_2d(grid, dirichlet, scfg)
        res = graphic_el_residual(field, B)[..., 0]
        alt = translator_residual_alt(field)[..., 0]
        full = np.zeros(grid.shape)
        full[1:-1, 1:-1] = res
        X1, X2 = grid.mesh
        write_csv(os.path.join(out, "solve2d.csv"), ["x1", "x2", "y", "residual"],
                  [X1, X2, field.values[..., 0], full])
        result = {"solve": report.as_dict(),
                  "recomputed_residual_sup": float(np.max(np.abs(res))),
                  "translator_form_difference_sup": float(np.max(np.abs(res - alt))),
                  "h": list(grid.h)}
        return result, EXIT_OK if report.converged else EXIT_NOT_CONVERGED

    return run


def plan_stability(cfg):
    eps = _get(cfg, "epsilon", 0.01, float)
    if eps < 0:
        raise ConfigError("'epsilon' must be >= 0")
    m = _get(cfg, "m", 2000, int)
    n_grid = _get(cfg, "n_grid", 4000, int)
    if m < 3 or n_grid < 4:
        raise ConfigError("'m' must be >= 3 and 'n_grid' >= 4")
    battery = _get(cfg, "battery_size", 200, int)
    degree = _get(cfg, "battery_degree", 5, int)
    seed = _get(cfg, "seed", 0, int)
    initial = cfg.get("riccati_initial", "neumann")
    if initial not in ("neumann", "jacobi"):
        raise ConfigError("'riccati_initial' must be 'neumann' or 'jacobi'")
    step = cfg.get("riccati_step")
    if step is not None and not float(step) > 0:
        raise ConfigError("'riccati_step' must be positive")
    test = _function(cfg.get("test_function", "cos(x)"), ["x"], "test_function")
    prob = SmoczykProblem(eps)

    def run(out):
        lam = {}
        for mm in (m, 2 * m):
            A, M = assemble_sl(prob, mm)
            lam[mm] = min_eigenvalue(A, M)
        write_csv(os.path.join(out, "eigen.csv"), ["m", "lambda_min"], [list(lam), list(lam.values())])

        grid = sl_grid(n_grid)
        u = Perturbation.from_function(grid, test)
        spot = inequality_gap(u, prob)
        rng = np.random.default_rng(seed)
        gaps = []
        for _ in range(battery):
            coeffs = rng.normal(size=int(rng.integers(0, degree + 1)) + 1)
            ub = Perturbation.from_function(grid, lambda x: np.cos(x) * np.polyval(coeffs, x))
            gaps.append(inequality_gap(ub, prob).gap)

        result = {"epsilon": eps, "m": m,
                  "lambda_min": lam[m], "lambda_min_2m": lam[2 * m],
                  "lambda_drift": abs(lam[2 * m] - lam[m]),
                  "test_function": str(test),
                  "spot_check": spot._asdict(),
                  "battery_size": battery, "battery_min_gap": min(gaps) if gaps else None,
                  "riccati_initial": initial}
        code = EXIT_OK
        x = grid.x
        v = dv = np.full_like(x, np.nan)
        if eps > 0:
            sol = solve_riccati_v(prob, None if step is None else float(step), initial=initial)
            result.update(riccati_positive=sol.positive, riccati_first_crossing=sol.first_crossing,
                          riccati_step=sol.step)
            v, dv = riccati_on_grid(sol, prob, x)
            try:
                result["completing_square_residual"] = completing_square_check(u, sol, prob)
            except RiccatiPositivityError as exc:
                result["completing_square_residual"] = None
                result["completing_square_error"] = str(exc)
            if not sol.positive:
                code = EXIT_NUMERICAL
        else:
            result.update(riccati_positive=None, riccati_first_crossing=None,
                          riccati_note="the ODE route needs epsilon > 0")
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(v > 0, dv / v, np.nan)
        write_csv(os.path.join(out, "stability.csv"), ["x", "p", "f", "v", "phi"],
                  [x, prob.p(x), prob.f(x), v, phi])
        return result, code

    return run


def plan_flow(cfg):
    a, b = _interval(cfg, [-1.2, 1.2])
    n = _get(cfg, "n", 240, int)
    if n < 3:
        raise ConfigError("'n' must be >= 3")
    h = (b - a) / n
    t_end = _get(cfg, "t_end", 0.1, float)
    dt = _get(cfg, "dt", CFL * h * h, float)
    if not t_end > 0:
        raise ConfigError("'t_end' must be positive")
    if not (0 < dt <= CFL * h * h * (1 + 1e-12)):
        raise ConfigError(f"'dt' must satisfy 0 < dt <= 0.4 h^2 = {CFL * h * h:g}")
    init = _function(cfg.get("initial", "-log(cos(x))"), ["x"], "initial")
    samples = _get(cfg, "samples", 5, int)
    if samples < 2:
        raise ConfigError("'samples' must be >= 2")
    grid = Grid1D(a, b, n)
    try:
        curve = GraphCurve.from_function(grid, init)
    except ArithmeticError as exc:
        raise ConfigError(f"initial curve not evaluable on the interval: {exc}") from None
    bnd = cfg.get("boundary")
    if bnd is None:
        bnd = [f"{fmt(curve.y[0])} + t", f"{fmt(curve.y[-1])} + t"]
    if not (isinstance(bnd, (list, tuple)) and len(bnd) == 2):
        raise ConfigError("'boundary' must be a pair of expressions in t")
    left, right = (_function(s, ["t"], "boundary") for s in bnd)

    def run(out):
        states = evolve_csf(curve, t_end, dt, (left, right), n_samples=samples)
        ts, xs, ys, errs = [], [], [], []
        for st in states:
            ts.append(np.full(grid.n + 1, st.t))
            xs.append(grid.x)
            ys.append(st.curve.y)
            errs.append(float(np.max(np.abs(st.curve.y[1:-1] - (curve.y[1:-1] + st.t)))))
        write_csv(os.path.join(out, "flow.csv"), ["t", "x", "y"], [ts, xs, ys])
        result = {"h": h, "dt": dt, "t_end": t_end,
                  "sample_times": [st.t for st in states],
                  "translation_error_sup": errs}
        return result, EXIT_OK

    return run


def plan_variation(cfg):
    a, b = _interval(cfg, [-1.2, 1.2])
    B = _weight(cfg)
    ycurve = _function(cfg.get("curve", "-log(cos(x))"), ["x"], "curve")
    xi = _function(cfg.get("test_function", "cos(x)"), ["x"], "test_function")
    ns = [int(n) for n in cfg.get("ns", [100, 200, 400])]
    if any(n < 3 for n in ns):
        raise ConfigError("grid sizes must be >= 3")
    t1 = _get(cfg, "t1", 1e-6, float)
    t2 = _get(cfg, "t2", 1e-4, float)

    def run(out):
        I, e1, e2 = [], [], []
        for n in ns:
            g = Grid1D(a, b, n)
            c = GraphCurve.from_function(g, ycurve)
            p = Perturbation.from_function(g, xi)
            plus = GraphCurve(g, c.y + t1 * p.values)
            minus = GraphCurve(g, c.y - t1 * p.values)
            fd1 = (weighted_length(plus, B) - weighted_length(minus, B)) / (2 * t1)
            d1v = first_variation(c, p, B)
            I0 = weighted_length(c, B)
            I.append(I0)
            e1.append(abs(d1v - fd1) / max(abs(fd1), 1e-300))
            if B.is_translator():
                plus = GraphCurve(g, c.y + t2 * p.values)
                minus = GraphCurve(g, c.y - t2 * p.values)
                fd2 = (weighted_length(plus, B) - 2 * I0 + weighted_length(minus, B)) / t2**2
                d2v = second_variation_general(c, p, B)
                e2.append(abs(d2v - fd2) / max(abs(fd2), 1e-300))
            else:
                e2.append(float("nan"))
        write_csv(os.path.join(out, "variation.csv"), ["n", "I", "delta1_err", "delta2_err"],
                  [ns, I, e1, e2])
        return {"ns": ns, "I": I, "delta1_rel_err": e1, "delta2_rel_err": e2}, EXIT_OK

    return run


PLANNERS = {
    "verify": plan_verify,
    "solve1d": plan_solve1d,
    "solve2d": plan_solve2d,
    "stability": plan_stability,
    "flow": plan_flow,
    "variation": plan_variation,
}


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def run(cfg: dict, out_dir: str | None = None) -> int:
    """Validate ``cfg``, run its task and write the outputs; returns the exit code."""
    try:
        task = cfg.get("task")
        if task not in PLANNERS:
            raise ConfigError(f"'task' must be one of {', '.join(TASKS)}")
        out_dir = out_dir or cfg.get("output_dir")
        if not out_dir:
            raise ConfigError("no output directory: set 'output_dir' or pass --out")
        job = PLANNERS[task](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    os.makedirs(out_dir, exist_ok=True)
    try:
        result, code = job(out_dir)
    except ArithmeticError as exc:
        log.error("numerical failure: %s", exc)
        result, code = {"error": str(exc)}, EXIT_NUMERICAL
    result = {"task": task, "exit_code": code, **result}
    write_json(os.path.join(out_dir, "result.json"), result)
    log.info("%s finished with exit code %d; outputs in %s", task, code, out_dir)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bminimal", description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output directory (overrides output_dir)")
    parser.add_argument("--quiet", action="store_true", help="only report errors")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
