import numpy as np
import pytest

from halfspace_green import system as sc
from halfspace_green.config import DEFAULT_CONFIG
from halfspace_green.errors import (
    DimensionMismatch,
    NotWeaklyElliptic,
    PointAtSingularity,
    StepUnderflow,
    UnsupportedDimension,
)
from halfspace_green.fundamental import (
    delta_residual,
    eval_dE,
    eval_dE_with_error,
    eval_E,
    make_evaluator,
    verify_delta_identity,
)
from halfspace_green.quadrature import Bump


def kelvin(mu, lam, x):
    r = np.linalg.norm(x)
    c = -1.0 / (8 * np.pi * mu * (lam + 2 * mu) * r)
    return c * ((lam + 3 * mu) * np.eye(3) + (lam + mu) * np.outer(x, x) / r**2)


def lame_2d(mu, lam, x):
    """Plane elasticity kernel up to an additive constant matrix."""
    r = np.linalg.norm(x)
    c = 1.0 / (4 * np.pi * mu * (lam + 2 * mu))
    return c * ((lam + 3 * mu) * np.log(r) * np.eye(2) - (lam + mu) * np.outer(x, x) / r**2)


def test_laplacian_3d_closed_form(rng):
    F = make_evaluator(sc.laplacian(3))
    x = rng.standard_normal((50, 3))
    got = eval_E(F, x)[:, 0, 0]
    assert np.allclose(got, -1 / (4 * np.pi * np.linalg.norm(x, axis=1)), rtol=1e-12, atol=0)


def test_laplacian_2d_vanishes_on_radius_two():
    F = make_evaluator(sc.laplacian(2))
    th = np.linspace(0, 2 * np.pi, 7)
    vals = eval_E(F, 2 * np.stack([np.cos(th), np.sin(th)], -1))
    assert np.max(np.abs(vals)) < 1e-15
    assert eval_E(F, [1.0, 0.0])[0, 0].real == pytest.approx(-np.log(2) / (2 * np.pi), rel=1e-13)


def test_kelvin_matrix(rng):
    F = make_evaluator(sc.lame(1.5, 0.5, 3))
    for x in rng.standard_normal((5, 3)):
        assert np.allclose(eval_E(F, x), kelvin(1.5, 0.5, x), rtol=0, atol=1e-13)


def test_plane_lame_up_to_constant(rng):
    F = make_evaluator(sc.lame(1.0, 2.0, 2))
    x0 = np.array([0.7, -0.2])
    for x in rng.standard_normal((5, 2)):
        got = eval_E(F, x) - eval_E(F, x0)
        assert np.allclose(got, lame_2d(1.0, 2.0, x) - lame_2d(1.0, 2.0, x0), atol=1e-13)


def test_anisotropic_3d_closed_form(rng):
    lam = 2.5
    F = make_evaluator(sc.l_lambda(lam, 3))
    x = rng.standard_normal((10, 3))
    q = x[:, 0] ** 2 + x[:, 1] ** 2 + x[:, 2] ** 2 / lam
    expect = -1 / (4 * np.pi * np.sqrt(lam) * np.sqrt(q))
    assert np.allclose(eval_E(F, x)[:, 0, 0], expect, rtol=1e-11)


def test_diagonal_2d_log_differences(rng):
    c1, c2 = 2.0, 3.0
    F = make_evaluator(sc.diag_anisotropic([c1, c2]))
    x, y = rng.standard_normal((2, 8, 2))

    def q(p):
        return p[:, 0] ** 2 / c1 + p[:, 1] ** 2 / c2

    expect = np.log(q(x) / q(y)) / (4 * np.pi * np.sqrt(c1 * c2))
    got = (eval_E(F, x) - eval_E(F, y))[:, 0, 0]
    assert np.allclose(got, expect, atol=1e-13)


def test_complex_coefficient_even_and_homogeneous(rng):
    F = make_evaluator(sc.l_lambda(2 + 1j, 3))
    x = rng.standard_normal((10, 3))
    assert np.allclose(eval_E(F, x), eval_E(F, -x), atol=1e-14)
    assert np.allclose(eval_E(F, 3 * x), eval_E(F, x) / 3, atol=1e-14)


def test_transpose_law(rng):
    S = sc.coupled_pair(3, 0.4)
    F, FT = make_evaluator(S), make_evaluator(sc.transpose_system(S))
    x = rng.standard_normal((5, 3))
    assert np.allclose(eval_E(FT, x), np.swapaxes(eval_E(F, x), 1, 2), atol=1e-14)


def test_gradient_3d(rng):
    F = make_evaluator(sc.laplacian(3))
    x = rng.standard_normal((6, 3))
    r = np.linalg.norm(x, axis=1)
    for j in range(3):
        g = [0, 0, 0]
        g[j] = 1
        got = eval_dE(F, x, tuple(g))[:, 0, 0]
        assert np.allclose(got, x[:, j] / (4 * np.pi * r**3), rtol=1e-10)


def test_second_derivative_2d():
    F = make_evaluator(sc.laplacian(2))
    x = np.array([[0.6, 0.8]])
    # d_1 d_2 of ln|x| / 2pi is -2 x1 x2 / (2 pi |x|^4)
    got = eval_dE(F, x, (1, 1))[0, 0, 0]
    assert got.real == pytest.approx(-2 * 0.48 / (2 * np.pi), rel=1e-6)
    _, err = eval_dE_with_error(F, x, (1, 1))
    assert err[0] < 1e-6


def test_third_derivative_degree(rng):
    F = make_evaluator(sc.l_lambda(2.0, 3))
    x = rng.standard_normal(3)
    a, b = eval_dE(F, x, (1, 1, 1)), eval_dE(F, 2 * x, (1, 1, 1))
    assert np.allclose(b, a * 2.0 ** (-4), rtol=1e-4)


def test_errors():
    F = make_evaluator(sc.laplacian(2))
    with pytest.raises(PointAtSingularity):
        eval_E(F, [0.0, 0.0])
    with pytest.raises(DimensionMismatch):
        eval_E(F, [1.0, 0.0, 0.0])
    with pytest.raises(UnsupportedDimension):
        make_evaluator(sc.laplacian(4))
    with pytest.raises(NotWeaklyElliptic):
        make_evaluator(sc.l_lambda(-1.0, 2))
    tiny = make_evaluator(sc.laplacian(2), DEFAULT_CONFIG.replace(fd_step=1e-13))
    with pytest.raises(StepUnderflow):
        eval_dE(tiny, [0.5, 0.0], (1, 0))


@pytest.mark.parametrize("S", [sc.laplacian(2), sc.l_lambda(2 + 1j, 2), sc.lame(1.0, 1.0, 2)],
                         ids=["laplacian", "complex", "lame"])
def test_delta_identity_2d(S):
    F = make_evaluator(S)
    res = delta_residual(F, Bump(np.array([0.2, -0.1]), 0.6))
    assert np.max(np.abs(res)) < 1e-6


def test_delta_identity_column():
    F = make_evaluator(sc.lame(1.0, 1.0, 3))
    col = verify_delta_identity(F, Bump(np.zeros(3), 1.0), 1)
    assert col.shape == (3,)
    assert np.max(np.abs(col)) < 1e-6
