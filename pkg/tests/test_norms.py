import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.errors import FitError
from artifact.norms import (NormKind, fit_power, lorentz_norm, lp_norm, norm, radial_field,
                            rearrangement)
from artifact.resolvent import RadialGrid

GRID = RadialGrid(4000, 20.0)
R = GRID.nodes


def test_gaussian_lp_norms():
    f = radial_field(np.exp(-R * R))
    # int e^{-p r^2} d^3x = (pi / p)^{3/2}
    for p in (1, 2, 3):
        assert lp_norm(f, p, GRID) == pytest.approx((np.pi / p) ** (1.5 / p), rel=1e-6)
    assert lp_norm(f, np.inf, GRID) == pytest.approx(np.exp(-R[0] ** 2))


def test_weak_l3_of_coulomb_profile():
    # |x|^{-1} on eps <= |x| <= R: sup_s s |{f > s}|^{1/3} is reached at s = 1/R
    eps, rmax = 0.5, 10.0
    f = radial_field(1.0 / R)
    val = lorentz_norm(f, 3, np.inf, GRID, (eps, rmax))
    exact = (4 * np.pi / 3) ** (1 / 3) * (1 - (eps / rmax) ** 3) ** (1 / 3)
    assert val == pytest.approx(exact, rel=2e-3)


def test_lorentz_32_1_of_ball_indicator():
    rho = 3.0
    f = radial_field(np.where(R < rho, 1.0, 0.0))
    vol = 4 * np.pi * rho ** 3 / 3
    assert lorentz_norm(f, 1.5, 1, GRID) == pytest.approx(vol ** (2 / 3), rel=1e-3)


def test_unsupported_lorentz_pair():
    with pytest.raises(ValueError):
        lorentz_norm(radial_field(np.ones(GRID.n)), 2, 2, GRID)


def test_sup_of_two_wave_field_hits_the_pole():
    a, b = 1.0, 0.7
    f = {0: a * np.ones(GRID.n), 1: b * np.ones(GRID.n)}
    exact = (a + b * np.sqrt(3)) / np.sqrt(4 * np.pi)
    assert lp_norm(f, np.inf, GRID) == pytest.approx(exact, rel=1e-12)


def test_l2_sums_waves():
    g = np.exp(-R)
    f = {0: g, 2: 2 * g}
    assert lp_norm(f, 2, GRID) ** 2 == pytest.approx(5 * lp_norm({0: g}, 2, GRID) ** 2)


def test_rearrangement_is_monotone():
    rng = np.random.default_rng(1)
    f = {0: rng.standard_normal(GRID.n), 1: rng.standard_normal(GRID.n)}
    prof = rearrangement(f, GRID)
    assert np.all(np.diff(prof.levels) < 0)
    assert np.all(np.diff(prof.measures) > 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100.0), st.sampled_from(list(NormKind)))
def test_norms_are_homogeneous(c, kind):
    f = {0: np.exp(-R) * np.cos(R), 1: R * np.exp(-R)}
    scaled = {k: c * v for k, v in f.items()}
    assert norm(scaled, kind, GRID, 8.0) == pytest.approx(c * norm(f, kind, GRID, 8.0), rel=1e-9)


def test_window_restricts():
    f = radial_field(np.exp(-R))
    assert norm(f, "l2", GRID, 1.0) < norm(f, "l2", GRID)


def test_fit_power_recovers_exponent():
    t = np.geomspace(1, 100, 12)
    fit = fit_power(t, 3.0 * t ** -1.5)
    assert fit.exponent == pytest.approx(-1.5)
    assert fit.r_squared == pytest.approx(1.0)
    with pytest.raises(FitError):
        fit_power(t[:5], t[:5] ** -1.0)
    with pytest.raises(FitError):
        fit_power(t, -t)
    assert fit_power(t, t ** -1.0, window=(1, 50)).window[1] <= 50


def test_unit_ball_l3():
    one = radial_field(np.ones(GRID.n))
    assert lp_norm(one, 3, GRID, (0.0, 1.0)) == pytest.approx((4 * np.pi / 3) ** (1 / 3), rel=1e-4)
