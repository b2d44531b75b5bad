import numpy as np
import pytest

from halfspace_green import system as sc
from halfspace_green.errors import CoincidentPoints, NonpositiveT, NotInHalfSpace, RouteUnavailable
from halfspace_green.fundamental import make_evaluator
from halfspace_green.halfspace import (
    FAR_FIELD_RADIUS,
    GreenSampleSpec,
    adn_kernel,
    build_poisson_kernel,
    green,
    green_convolution,
    green_reflection,
    make_kernels,
    poisson_availability,
    poisson_from_green,
    poisson_kernel,
    poisson_values_and_errors,
    remainder,
    sample_pairs,
    verify_green_identities,
)


def laplace_green_2d(x, y):
    yb = y * np.array([1, -1])
    return (np.log(np.linalg.norm(x - y, axis=-1)) - np.log(np.linalg.norm(x - yb, axis=-1))) / (2 * np.pi)


def laplace_green_3d(x, y):
    yb = y * np.array([1, 1, -1])
    return (-1 / np.linalg.norm(x - y, axis=-1) + 1 / np.linalg.norm(x - yb, axis=-1)) / (4 * np.pi)


@pytest.fixture(scope="module")
def K2():
    return make_kernels(sc.laplacian(2), "convolution")


def test_green_closed_values():
    K3 = make_kernels(sc.laplacian(3))
    assert green(K3, [0, 0, 1.0], [0, 0, 2.0])[0, 0].real == pytest.approx(-1 / (6 * np.pi), rel=1e-13)
    K2r = make_kernels(sc.laplacian(2))
    assert green(K2r, [0, 1.0], [0, 3.0])[0, 0].real == pytest.approx(-np.log(2) / (2 * np.pi), rel=1e-13)


def test_reflection_against_images(rng):
    K3 = make_kernels(sc.laplacian(3))
    x, y = sample_pairs(3, GreenSampleSpec(pairs=20))
    assert np.allclose(green_reflection(K3, x, y)[:, 0, 0], laplace_green_3d(x, y), atol=1e-14)


def test_convolution_against_images(K2):
    x, y = sample_pairs(2, GreenSampleSpec(pairs=8, seed=3))
    G, err = green_convolution(K2, x, y, with_error=True)
    exact = laplace_green_2d(x, y)
    assert np.max(np.abs(G[:, 0, 0] - exact)) < 1e-6
    # the estimate must not be wildly optimistic
    assert np.all(np.abs(G[:, 0, 0] - exact) <= 10 * err + 1e-12)


def test_laplace_poisson_closed_form(K2):
    P = poisson_kernel(K2)
    xp = np.linspace(-10, 10, 41)
    assert np.allclose(P(xp)[:, 0, 0], 1 / (np.pi * (1 + xp**2)), rtol=1e-9, atol=0)
    assert P.normalization_defect < 1e-6
    assert abs(P.integral[0, 0] - 1) < 1e-8


@pytest.mark.parametrize("lam", [2.0, 0.5 + 1j])
def test_anisotropic_poisson_2d(lam):
    P = build_poisson_kernel(make_evaluator(sc.l_lambda(lam, 2)))
    x = np.linspace(-5, 5, 21)
    expect = np.sqrt(lam) / (np.pi * (1 + lam * x**2))
    assert np.allclose(P(x)[:, 0, 0], expect, rtol=1e-8)
    assert abs(P.integral[0, 0] - 1) < 1e-6


def test_anisotropic_poisson_3d(rng):
    lam = 3.0
    P = build_poisson_kernel(make_evaluator(sc.l_lambda(lam, 3)))
    xp = rng.uniform(-4, 4, (10, 2))
    expect = lam / (2 * np.pi * (1 + lam * np.sum(xp**2, axis=1)) ** 1.5)
    assert np.allclose(P(xp)[:, 0, 0], expect, rtol=1e-8)


def test_far_field_branch_is_continuous():
    F = make_evaluator(sc.laplacian(3))
    xp = np.array([[FAR_FIELD_RADIUS * 0.999, 0.0], [FAR_FIELD_RADIUS * 1.001, 0.0]])
    vals, err = poisson_values_and_errors(F, xp)
    r = xp[:, 0]
    expect = 1 / (2 * np.pi * (1 + r**2) ** 1.5)
    assert np.allclose(vals[:, 0, 0], expect, rtol=1e-5)
    assert np.all(err < 1e-5 * expect)


def test_poisson_recovered_from_green(K2):
    xp = np.array([[-1.0], [0.0], [2.5]])
    assert np.allclose(poisson_from_green(K2, xp), poisson_kernel(K2)(xp), atol=1e-8)


def test_adn_kernel_scaling(K2):
    P = poisson_kernel(K2)
    got = adn_kernel(P, [0.5], 2.0)
    assert got[0, 0].real == pytest.approx(2.0 / (np.pi * (4 + 0.25)), rel=1e-9)
    with pytest.raises(NonpositiveT):
        adn_kernel(P, [0.5], 0.0)


def test_remainder_is_image_term():
    K = make_kernels(sc.laplacian(3))
    x, y = np.array([0.3, 0.0, 1.0]), np.array([0.0, 0.1, 0.5])
    yb = y * np.array([1, 1, -1])
    assert remainder(K, x, y)[0, 0].real == pytest.approx(-1 / (4 * np.pi * np.linalg.norm(x - yb)))


def test_point_validation():
    K = make_kernels(sc.laplacian(2))
    with pytest.raises(NotInHalfSpace):
        green(K, [0, -1.0], [0, 1.0])
    with pytest.raises(CoincidentPoints):
        green(K, [0, 1.0], [0, 1.0])


def test_unavailable_routes():
    S = sc.lame(1.0, 1.0, 2)
    with pytest.raises(RouteUnavailable):
        make_kernels(S, "reflection")
    with pytest.raises(RouteUnavailable):
        make_kernels(S, "convolution")
    ok, why = poisson_availability(S)
    assert not ok and "reflection" in why
    ok, why = poisson_availability(sc.l_lambda(1j, 2))
    assert not ok and "Legendre" in why


def test_identity_suite_coupled_pair():
    K = make_kernels(sc.coupled_pair(2, 0.5))
    rep = verify_green_identities(K, GreenSampleSpec(pairs=20, bumps=2))
    assert rep.passed, [r.to_dict() for r in rep.records if r.status == "fail"]
    assert {r.check_id for r in rep.records} >= {"transposition", "symmetry", "delta", "boundary", "nt_decay"}
