import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.checks import random_block_system, shooting_threshold
from artifact.errors import SingularBlockError, TuningError
from artifact.potential import PotentialSpec, factorize, sample
from artifact.resolvent import FOUR_PI, RadialGrid, wave_diffq1_matrix
from artifact.threshold import (BlockSystem, Kind, ThresholdReport, analyze, bs_outer, c0_scalar,
                                evaluate_profile, feshbach_invert, gram_entry, laurent_extract,
                                moments, resonance_tail_check, tail_fit, tune_coupling,
                                tune_shape, v_pairing)

from conftest import tuned_well

SQUARE = PotentialSpec("square_well", [1.0])


def test_shooting_oracle_against_closed_forms():
    # s-wave: sqrt(g) = pi/2; p-wave: j_0(sqrt g) = 0 -> sqrt(g) = pi
    assert shooting_threshold(0) == pytest.approx(np.pi ** 2 / 4, abs=1e-9)
    assert shooting_threshold(1) == pytest.approx(np.pi ** 2, abs=1e-9)


@pytest.mark.parametrize("ell", [0, 1])
def test_tuned_coupling_fine_grid(ell):
    grid = RadialGrid(3200, 4.0)
    assert tune_coupling(SQUARE, ell, grid) == pytest.approx(shooting_threshold(ell), abs=1e-4)


def test_tuner_counts_thresholds_upward():
    grid = RadialGrid(800, 4.0)
    g0, g1 = (tune_coupling(SQUARE, 0, grid, k) for k in (0, 1))
    # the n-th s-wave threshold sits at sqrt(g) = (n + 1/2) pi
    assert g1 == pytest.approx((1.5 * np.pi) ** 2, rel=1e-3)
    assert g0 < g1
    with pytest.raises(TuningError):
        tune_coupling(SQUARE, 0, grid, 0, bracket=(3.0, 4.0))


def test_tune_shape_rejects_noncrossing_bracket():
    spec = PotentialSpec("sum_of_wells", [1.0, 1.0, 0.3, 5.0])
    with pytest.raises(TuningError):
        tune_shape(spec, RadialGrid(400, 10.0), [0, 1], [1, 0], 3, (0.1, 0.2))


@pytest.mark.parametrize("coupling", [-1.0, 0.5, 4.0])
def test_off_threshold_wells_are_generic(coupling):
    rep, _ = analyze(SQUARE.with_coupling(coupling), RadialGrid(800, 40.0))
    assert rep.classification is Kind.GENERIC
    assert rep.dims == {"M": 0, "E": 0}


def test_kind1_resonance(kind1):
    spec, grid, rep, fact = kind1
    assert rep.classification is Kind.KIND1
    assert rep.dims == {"M": 1, "E": 0}
    phi, v = rep.phi, fact.values
    assert gram_entry(phi, phi, grid, v) == pytest.approx(1.0, abs=1e-10)
    pair = v_pairing(phi, grid, v)
    assert pair > 0
    assert rep.a_const.real == pytest.approx(0.0, abs=1e-12)
    assert rep.a_const.imag == pytest.approx(FOUR_PI / pair ** 2, rel=1e-12)
    assert resonance_tail_check(phi, grid, v, spec).rel_error <= 0.02


def test_resonance_is_fixed_by_bootstrap(kind1):
    # U = -G0 V U evaluated back on the nodes
    _, grid, rep, fact = kind1
    again = evaluate_profile(rep.phi, grid, fact.values, grid.nodes)
    np.testing.assert_allclose(again, rep.phi.profile, atol=1e-5 * np.abs(rep.phi.profile).max())


def test_c0_approaches_inverse_a_from_nonzero_lambda(kind1):
    # the lam != 0 difference quotient uses the oscillatory kernel, not the i r r' limit
    _, grid, rep, fact = kind1
    target = 1.0 / rep.a_const
    for lam in (1e-2, 1e-3):
        assert abs(c0_scalar(lam, rep.phi, grid, fact) - target) <= 0.01 * abs(target)
    assert c0_scalar(0.0, rep.phi, grid, fact) == pytest.approx(target, rel=1e-10)


def test_kind2_pwave_eigenfunction(kind2):
    _, grid, rep, fact = kind2
    assert rep.classification is Kind.KIND2
    assert rep.phi is None and rep.dims == {"M": 1, "E": 1}
    state = rep.e_basis[0]
    assert state.ell == 1
    # F = U / r decays like |x|^{-2}
    _, resid, _ = tail_fit(state, grid, 2, (5.0, 30.0))
    assert resid < 1e-3
    mom = moments(state, grid, fact.values)
    assert not mom.e1_member
    assert np.abs(mom.first).max() > 1e-3


def test_higher_wave_moments():
    grid = RadialGrid(800, 40.0)
    for ell, first_zero, member in ((2, True, False), (3, True, True)):
        g = tune_coupling(SQUARE, ell, grid)
        rep, fact = analyze(SQUARE.with_coupling(g), grid, ell_max=ell)
        assert rep.classification is Kind.KIND2
        mom = moments(rep.e_basis[0], grid, fact.values)
        assert bool(np.abs(mom.first).max() < 1e-10) is first_zero
        assert mom.e1_member is member
        # the l = 2 quadrupole is traceless
        assert np.trace(mom.second) == pytest.approx(0.0, abs=1e-10)


def test_gram_positive_definite(kind2):
    _, _, rep, _ = kind2
    assert np.linalg.eigvalsh(rep.gram).min() > 0


def test_report_roundtrip(kind1):
    _, _, rep, _ = kind1
    again = ThresholdReport.from_dict(json.loads(json.dumps(rep.to_dict())))
    assert again.classification is rep.classification
    assert again.a_const == rep.a_const
    np.testing.assert_array_equal(again.phi.profile, rep.phi.profile)


# block inversion -----------------------------------------------------------------

def test_feshbach_random_systems():
    rng = np.random.default_rng(0)
    for _ in range(200):
        bs, mat = random_block_system(rng)
        assert np.linalg.norm(feshbach_invert(bs) - np.linalg.inv(mat), 2) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.data())
def test_feshbach_property(n, data):
    k = data.draw(st.integers(1, n - 1))
    seed = data.draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((n, n)) + n * np.eye(n)
    bs = BlockSystem.split(mat, k)
    np.testing.assert_allclose(feshbach_invert(bs) @ mat, np.eye(n), atol=1e-10)
    np.testing.assert_array_equal(bs.dense(), mat)


def test_feshbach_singular_block():
    mat = np.eye(4)
    mat[0, 0] = 0.0
    with pytest.raises(SingularBlockError, match="L00"):
        feshbach_invert(BlockSystem.split(mat, 2))
    mat = np.eye(4)
    mat[3, 3] = 0.0
    with pytest.raises(SingularBlockError, match="C"):
        feshbach_invert(BlockSystem.split(mat, 2))


# Laurent coefficients -------------------------------------------------------------

def test_laurent_generic_has_no_singular_part():
    grid = RadialGrid(400, 20.0)
    fact = factorize(sample(SQUARE.with_coupling(-1.0), grid))
    lc = laurent_extract(grid, fact, [0, 1, 2])
    n0 = np.linalg.norm(lc.A_0, 2)
    assert np.linalg.norm(lc.A_minus2, 2) <= 1e-6 * n0
    assert np.linalg.norm(lc.A_minus1, 2) <= 1e-6 * n0


def test_laurent_kind1_residue(kind1):
    _, grid, rep, fact = kind1
    lc = laurent_extract(grid, fact, [0])
    expect = -rep.a_const * bs_outer({0: [rep.phi]}, grid, fact, lc.blocks)
    n1 = np.linalg.norm(lc.A_minus1, 2)
    assert np.linalg.norm(lc.A_minus2, 2) <= 1e-6 * n1
    assert np.linalg.norm(lc.A_minus1 - expect, 2) <= 0.02 * n1


def test_diffq1_static_limit_is_rank_one():
    r = np.linspace(0.1, 1.0, 7)
    m = wave_diffq1_matrix(0, 0.0, r)
    assert np.linalg.matrix_rank(m) == 1


@pytest.mark.parametrize("ell", [0, 1])
def test_classification_stable_under_refinement(ell):
    kinds = {tuned_well(ell, n)[2].classification for n in (800, 1600)}
    assert len(kinds) == 1


def test_joint_tuning_puts_both_waves_at_threshold():
    grid = RadialGrid(800, 40.0)
    spec = tune_shape(PotentialSpec("sum_of_wells", [1.0, 1.0, 0.3, 5.0]), grid,
                      [0, 1], [1, 0], 3, (4.0, 8.0))
    assert 4.0 < spec.params[3] < 8.0
    rep, _ = analyze(spec, grid)
    assert rep.classification is Kind.KIND3
    assert rep.singular_values[0] < 1e-6 and rep.singular_values[1] < 1e-6
    assert rep.singular_values[2] > 1e-3


@pytest.mark.parametrize("ell", [0, 1, 2])
def test_tuned_coupling_makes_i_plus_t_singular(ell):
    _, _, rep, _ = tuned_well(ell)
    assert rep.singular_values[ell] <= 1e-8


def test_c0_continuity_and_reflection(kind1):
    _, grid, rep, fact = kind1
    c0 = c0_scalar(0.0, rep.phi, grid, fact)
    assert abs(c0_scalar(1e-4, rep.phi, grid, fact) - c0) <= 1e-3 * abs(c0)
    # real kernel values: K(-lam) = -conj(K(lam)) for the difference quotient
    lam = 0.05
    assert c0_scalar(-lam, rep.phi, grid, fact) == pytest.approx(-np.conj(c0_scalar(lam, rep.phi, grid, fact)))


def test_feshbach_trivial_cases():
    assert np.allclose(feshbach_invert(BlockSystem.split(np.eye(5), 2)), np.eye(5))
    a, b = np.diag([2.0, 4.0]), np.array([[1.0, 1.0], [0.0, 1.0]])
    mat = np.block([[a, np.zeros((2, 2))], [np.zeros((2, 2)), b]])
    out = feshbach_invert(BlockSystem.split(mat, 2))
    np.testing.assert_allclose(out[:2, :2], np.linalg.inv(a))
    np.testing.assert_allclose(out[2:, 2:], np.linalg.inv(b))
    np.testing.assert_allclose(out[:2, 2:], 0.0)
