import numpy as np
import pytest

from halfspace_green.errors import DivergentNorm, EmptyCone
from halfspace_green.nontangential import (
    ConeProbe,
    ExcludedRegion,
    hl_maximal,
    maximal_bracket,
    nt_limit,
    nt_max,
    weighted_integral,
    weighted_norms,
)


def height(pts):
    return pts[:, -1:]


def test_cone_grid_lies_in_cone():
    for vertex in ([0.5], [1.0, -2.0]):
        probe = ConeProbe(np.array(vertex), kappa=0.7, radial_levels=10, angular_samples=16)
        pts = probe.grid()
        assert np.all(probe.contains(pts))
        assert probe.describe()["points"] == len(pts)


def test_wider_cone_only_adds_points():
    f = lambda p: np.exp(-np.sum((p[:, :-1] - 0.3) ** 2, axis=1) / p[:, -1])[:, None]
    vals = [nt_max(f, ConeProbe(np.array([2.0]), k, radial_levels=20, angular_samples=16))
            for k in (0.5, 1.0, 2.0, 4.0)]
    assert all(b >= a for a, b in zip(vals[:-1], vals[1:]))


def test_nt_max_of_height_is_t_max():
    probe = ConeProbe(np.zeros(2), t_max=10.0, radial_levels=8, angular_samples=8)
    assert nt_max(height, probe) == pytest.approx(10.0)


def test_exclusion():
    probe = ConeProbe(np.zeros(1), kappa=0.1, t_max=4.0, radial_levels=8, angular_samples=8)
    full = nt_max(height, probe)
    cut = nt_max(height, probe, ExcludedRegion.ball([0.0, 4.0], 1.0))
    assert cut < full
    with pytest.raises(EmptyCone):
        nt_max(height, probe, ExcludedRegion.ball([0.0, 1.0], 1e4))
    with pytest.raises(ValueError):
        ExcludedRegion("cube")


def test_nt_limit_certifies_smooth_function():
    u = lambda p: (np.cos(p[:, 0]) + p[:, -1])[:, None]
    lim = nt_limit(u, ConeProbe(np.array([0.4])))
    assert lim.certified
    assert lim.value[0] == pytest.approx(np.cos(0.4), abs=1e-5)


def test_nt_limit_rejects_oscillation():
    u = lambda p: np.sin(1 / p[:, -1])[:, None]
    assert not nt_limit(u, ConeProbe(np.array([0.0]))).certified


def test_maximal_function_of_interval_indicator():
    f = lambda z: ((z[:, 0] >= 0) & (z[:, 0] <= 1)).astype(float)
    # the best ball around x = 2 has radius 2 and captures the whole interval
    assert hl_maximal(f, [2.0], breakpoints=(0.0, 1.0)) == pytest.approx(0.25, abs=1e-6)
    assert hl_maximal(f, [0.5], breakpoints=(0.0, 1.0)) == pytest.approx(1.0, abs=1e-9)


def test_maximal_function_of_disc_indicator():
    f = lambda z: (np.linalg.norm(z, axis=1) <= 1).astype(float)
    # for a far point the sup is near the ball that just covers the disc
    got = hl_maximal(f, [10.0, 0.0], angular=512)
    assert got == pytest.approx(1 / 121, rel=2e-2)


def test_bracket_form():
    assert maximal_bracket([0.0], 2) == 1.0
    assert maximal_bracket([np.e, 0.0], 3) == pytest.approx(2 / (1 + np.e**2))


def test_weighted_integral_closed_form():
    got = weighted_integral(lambda z: np.ones(len(z)), 1, 2)
    assert got == pytest.approx(np.pi, rel=1e-6)
    got = weighted_integral(lambda z: np.exp(-np.sum(z**2, axis=1)), 2, 3)
    assert 0 < got < np.pi


def test_divergent_weight_detected():
    with pytest.raises(DivergentNorm):
        weighted_integral(lambda z: np.ones(len(z)), 1, 1)


def test_weighted_norms_of_indicator():
    f = lambda z: ((z[:, 0] >= 0) & (z[:, 0] <= 1)).astype(float)
    w = weighted_norms(f, 1, 1, with_maximal=False, breakpoints=(0.0, 1.0))
    assert w.weighted_l1 == pytest.approx(np.log(2), rel=1e-8)
    assert w.z_norm is None
