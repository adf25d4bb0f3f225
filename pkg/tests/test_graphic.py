import math

import numpy as np
import pytest

from bminimal.geometry1d import (GraphCurve, Grid1D, Perturbation, WeightField, el_residual,
                                 first_variation, grim_reaper, weighted_length)
from bminimal.graphic import (GraphField, GridND, first_fundamental_data, graphic_el_residual,
                              graphic_functional, graphic_gradient, translator_residual_alt)

B_Y = WeightField("y", ["y"])


def _random_field(rng, grid, k, scale=0.4):
    X = grid.mesh
    comps = []
    for _ in range(k):
        v = np.full(grid.shape, rng.normal())
        for d in range(grid.n):
            a, b, _ = grid.axes[d]
            s = (X[d] - a) / (b - a)
            v = v + scale * (rng.normal() * np.sin(np.pi * s) + rng.normal() * np.cos(2 * s))
        if grid.n == 2:
            v = v + scale * rng.normal() * X[0] * X[1]
        comps.append(v)
    return GraphField(grid, np.stack(comps, axis=-1))


def test_grid_validation():
    with pytest.raises(ValueError):
        GridND(((0, 1, 5), (0, 1, 5), (0, 1, 5)))
    with pytest.raises(ValueError):
        GridND(((1, 0, 5),))
    g = GridND.square(-1, 1, 5)
    assert g.shape == (5, 5) and g.h == (0.5, 0.5)
    mask = g.boundary_mask
    assert mask.sum() == 16 and not mask[1:-1, 1:-1].any()


def test_field_shape_checked():
    with pytest.raises(ValueError):
        GraphField(GridND.square(0, 1, 4), np.zeros((4, 5)))
    with pytest.raises(ValueError):
        GraphField(GridND.square(0, 1, 4), np.full((4, 4), np.nan))


def test_constant_field_area():
    g = GridND.square(0, 1, 9)
    y = GraphField(g, np.full(g.shape, 0.7))
    assert graphic_functional(y, B_Y) == pytest.approx(math.exp(0.7), rel=1e-14)
    np.testing.assert_allclose(graphic_gradient(y, WeightField("2", ["y"])), 0.0, atol=1e-13)


def test_sqrt6_example():
    g = GridND(((0, 1, 11),))
    y = GraphField.from_functions(g, ["x", "2*x"])
    assert y.k == 2
    assert graphic_functional(y, WeightField("0", ["y1", "y2"])) == pytest.approx(math.sqrt(6), rel=1e-14)


def test_first_fundamental_invariants(rng):
    for n, k in [(1, 1), (1, 3), (2, 1), (2, 2)]:
        m = 9
        grid = GridND(tuple((-1, 1.5, m) for _ in range(n)))
        ffd = first_fundamental_data(_random_field(rng, grid, k, scale=2.0))
        assert np.all(ffd.w >= 1.0)
        np.testing.assert_allclose(ffd.g, np.swapaxes(ffd.g, -1, -2))
        np.testing.assert_allclose(ffd.g @ ffd.g_inv, np.broadcast_to(np.eye(n), ffd.g.shape), atol=1e-12)
        assert np.all(np.linalg.eigvalsh(ffd.g) > 0)


def test_n1_k1_matches_weighted_length(rng):
    g1 = Grid1D(-1.0, 1.0, 40)
    c = GraphCurve(g1, np.sin(2 * g1.x) + 0.3)
    y = GraphField(GridND(((-1.0, 1.0, 41),)), c.y)
    I1 = weighted_length(c, WeightField("y"))
    assert graphic_functional(y, B_Y) == pytest.approx(I1, rel=1e-14)


@pytest.mark.parametrize("n, k", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_gradient_matches_finite_differences(n, k, rng):
    grid = GridND(tuple((-0.8, 1.1, 7) for _ in range(n)))
    B = WeightField("0.5*y1 + 0.2*sin(y1)" if k == 1 else "0.5*y1 - 0.3*y2^2/(1 + y1^2)",
                    ["y1"] if k == 1 else ["y1", "y2"])
    y = _random_field(rng, grid, k)
    grad = graphic_gradient(y, B)
    assert np.all(grad[grid.boundary_mask] == 0.0)
    for idx in np.argwhere(~grid.boundary_mask):
        for c in range(k):
            pos = tuple(idx) + (c,)
            step = 1e-6 * max(1.0, abs(y.values[pos]))
            up, dn = y.values.copy(), y.values.copy()
            up[pos] += step
            dn[pos] -= step
            fd = (graphic_functional(y.with_values(up), B) - graphic_functional(y.with_values(dn), B)) / (2 * step)
            assert grad[pos] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_gradient_n1_k1_matches_first_variation():
    g1 = Grid1D(-1.0, 1.0, 60)
    c = GraphCurve(g1, 0.4 * np.cos(g1.x) + 0.2 * g1.x)
    grad = graphic_gradient(GraphField(GridND(((-1.0, 1.0, 61),)), c.y), B_Y)[:, 0]
    for j in (1, 17, 30, 59):
        e = np.zeros(61)
        e[j] = 1.0
        assert grad[j] == pytest.approx(first_variation(c, Perturbation(g1, e), WeightField("y")), rel=1e-13)


def test_affine_field_constant_weight_zero_residual():
    g = GridND.square(-1, 1, 9)
    y = GraphField.from_functions(g, ["0.3*x1 - 1.2*x2 + 2"])
    np.testing.assert_allclose(graphic_el_residual(y, WeightField("4", ["y"])), 0.0, atol=1e-13)


def test_n1_residual_matches_geometry1d():
    g1 = Grid1D(-1.2, 1.2, 80)
    c = GraphCurve(g1, -np.log(np.cos(g1.x)) + 0.1 * g1.x**3)
    R = graphic_el_residual(GraphField(GridND(((-1.2, 1.2, 81),)), c.y), B_Y)[:, 0]
    np.testing.assert_allclose(R, el_residual(c, WeightField("y")), rtol=1e-13, atol=1e-13)


def test_n1_grim_reaper_residual_second_order():
    sups = []
    for m in (101, 201, 401):
        g = GridND(((-1.3, 1.3, m),))
        sups.append(np.max(np.abs(graphic_el_residual(GraphField(g, grim_reaper(g.coords[0])), B_Y))))
    assert 3.5 <= sups[0] / sups[1] <= 4.5 and 3.5 <= sups[1] / sups[2] <= 4.5


def test_dimensional_reduction():
    g1 = Grid1D(-1.0, 1.0, 30)
    c = GraphCurve(g1, 0.5 * np.sin(2 * g1.x) + g1.x**2)
    g = GridND(((-1.0, 1.0, 31), (0.0, 2.0, 11)))
    y = GraphField(g, np.repeat(c.y[:, None], 11, axis=1))
    R = graphic_el_residual(y, B_Y)[..., 0]
    R1 = el_residual(c, WeightField("y"))
    for j in range(R.shape[1]):
        np.testing.assert_allclose(R[:, j], R1, rtol=1e-13, atol=1e-13)


def test_translator_forms_agree_to_second_order(rng):
    seeds = rng.integers(1 << 30, size=3)
    for seed in seeds:
        ratios = []
        diffs = []
        for m in (21, 41, 81):
            g = GridND.square(-1, 1, m)
            y = _random_field(np.random.default_rng(seed), g, 1)
            diffs.append(np.max(np.abs(graphic_el_residual(y, B_Y) - translator_residual_alt(y))))
        ratios = [diffs[0] / diffs[1], diffs[1] / diffs[2]]
        assert all(3.5 <= r <= 4.5 for r in ratios), ratios


def test_k2_residual_is_scaled_gradient(rng):
    g = GridND.square(0, 1, 6)
    y = _random_field(rng, g, 2)
    B = WeightField("y1 + y2", ["y1", "y2"])
    R = graphic_el_residual(y, B)
    assert R.shape == (4, 4, 2)
    grad = graphic_gradient(y, B)
    eB = np.exp(y.values[..., 0] + y.values[..., 1])
    np.testing.assert_allclose(R, grad[1:-1, 1:-1] / (g.quadrature_weights * eB)[1:-1, 1:-1, None])


def test_weight_must_not_depend_on_x():
    g = GridND.square(0, 1, 5)
    with pytest.raises(ValueError):
        graphic_functional(GraphField(g, np.zeros(g.shape)), WeightField("x + y"))
