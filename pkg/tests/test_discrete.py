import numpy as np
import pytest
from scipy.linalg import solve_banded

from bminimal import discrete


def _dense_d1(m, h):
    eye = np.eye(m)
    return np.stack([discrete.d1(eye[:, j], h) for j in range(m)], axis=1)


def test_d1_is_second_order():
    errs = []
    for m in (41, 81, 161):
        x = np.linspace(0, 2, m)
        errs.append(np.max(np.abs(discrete.d1(np.sin(x), x[1] - x[0]) - np.cos(x))))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.1)


def test_d1_exact_on_quadratics():
    x = np.linspace(-1, 2, 7)
    np.testing.assert_allclose(discrete.d1(3 * x**2 - x, x[1] - x[0]), 6 * x - 1, atol=1e-12)


def test_d2_exact_on_cubics():
    x = np.linspace(-1, 2, 9)
    np.testing.assert_allclose(discrete.d2(x**3 + x**2, x[1] - x[0]), 6 * x + 2, atol=1e-10)


@pytest.mark.parametrize("m", [3, 4, 7])
def test_d1_transpose_matches_dense_matrix(m, rng):
    h = 0.3
    D = _dense_d1(m, h)
    g = rng.normal(size=m)
    np.testing.assert_allclose(discrete.d1_transpose(g, h), D.T @ g, atol=1e-13)


def test_d1_transpose_along_axis(rng):
    D = _dense_d1(6, 0.5)
    g = rng.normal(size=(4, 6, 2))
    expect = np.einsum("ji,ajc->aic", D, g)
    np.testing.assert_allclose(discrete.d1_transpose(g, 0.5, axis=1), expect, atol=1e-13)


def test_trapezoid_linear_exact():
    x = np.linspace(0, 3, 11)
    assert discrete.trapezoid(2 * x + 1, x[1] - x[0]) == pytest.approx(12.0, rel=1e-15)


def test_fixed_sum_is_exactly_rounded():
    assert discrete.fixed_sum([1e16, 1.0, -1e16]) == 1.0


def test_tridiagonal_matches_dense(rng):
    n = 50
    lower, upper = rng.normal(size=n - 1), rng.normal(size=n - 1)
    diag = 4 + rng.random(n)
    A = np.diag(diag) + np.diag(lower, -1) + np.diag(upper, 1)
    b = rng.normal(size=n)
    np.testing.assert_allclose(discrete.solve_tridiagonal(lower, diag, upper, b), np.linalg.solve(A, b))


def test_tridiagonal_stalls_on_zero_pivot():
    with pytest.raises(discrete.SingularMatrixError):
        discrete.solve_tridiagonal(np.ones(2), np.array([1.0, 1.0, 1.0]), np.ones(2), np.ones(3))


def test_banded_lu_matches_lapack(rng):
    n, bw = 60, 7
    A = np.zeros((n, n))
    for o in range(-bw, bw + 1):
        A += np.diag(rng.normal(size=n - abs(o)), o)
    A += np.diag(np.full(n, 20.0))
    band = np.zeros((n, 2 * bw + 1))
    ab = np.zeros((2 * bw + 1, n))
    for r in range(n):
        for c in range(max(0, r - bw), min(n, r + bw + 1)):
            band[r, bw + c - r] = A[r, c]
            ab[bw + r - c, c] = A[r, c]
    b = rng.normal(size=n)
    x = discrete.BandedLU(band, bw).solve(b)
    np.testing.assert_allclose(x, solve_banded((bw, bw), ab, b), rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(A @ x, b, atol=1e-12)
