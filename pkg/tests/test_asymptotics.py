import math

import numpy as np
import pytest

import dampedwavelab as dw
from dampedwavelab.coefficients import DomainError, RegimeError


def test_parabolic_multiplier_examples():
    assert dw.parabolic_multiplier(dw.constant(1.0), 0.5, 4.0) == pytest.approx(
        math.exp(-1.0))
    assert dw.parabolic_multiplier(dw.constant(1.0), 0.3, 0.0) == 1.0
    # R(3) = 2 for kappa = 1/2
    assert dw.parabolic_multiplier(dw.power(1.0, 0.5), 1.0, 3.0) == pytest.approx(
        math.exp(-2.0))


def test_parabolic_multiplier_bounds():
    rng = np.random.default_rng(2)
    for _ in range(30):
        xi = rng.uniform(0.0, 3.0)
        t = rng.uniform(0.0, 100.0)
        v = dw.parabolic_multiplier(dw.power(1.0, 0.5), xi, t)
        assert 0.0 < v <= 1.0


def test_zero_frequency_conservation():
    # data (1, 0): the first solution component stays exactly 1 at xi = 0
    for profile in (dw.constant(1.0), dw.power(1.0, 2.0), dw.scale_invariant(0.5)):
        pair = dw.solve_fundamental(profile, 0.0, 0.0, [0.0, 5.0, 50.0], 1e-10)
        assert np.max(np.abs(pair.phi1 - 1.0)) < 1e-9


def test_wave_operator_zero_profile_exact():
    probes = [10.0, 30.0, 100.0, 300.0]
    for xi in (0.1, 0.5, 1.0, 2.0):
        est = dw.wave_operator_approx(dw.zero(), xi, probes, 1e-12)
        br = math.hypot(1.0, xi)
        expected = np.diag([xi / br, 1.0])
        assert np.max(np.abs(est.w_plus - expected)) <= 1e-10


def test_wave_operator_integrable_profile_certifies():
    profile = dw.integrable(1.0, 2.0)
    probes = [30.0, 100.0, 300.0, 1000.0]
    for xi in (0.3, 1.0):
        est = dw.wave_operator_approx(profile, xi, probes, 1e-11)
        assert est.certified
        assert abs(est.determinant) > 1e-6


def test_wave_operator_scale_invariant_certifies():
    est = dw.wave_operator_approx(dw.scale_invariant(0.5), 1.0,
                                  [100.0, 1000.0, 10000.0, 100000.0], 1e-9)
    assert est.certified
    assert np.all(np.diff(est.cauchy_diffs) < 0)


def test_wave_operator_preconditions():
    with pytest.raises(RegimeError):
        dw.wave_operator_approx(dw.constant(1.0), 1.0, [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(DomainError):
        dw.wave_operator_approx(dw.zero(), 1.0, [1.0, 2.0, 3.0])


def test_diffusion_discrepancy_matched_at_reference():
    profile = dw.constant(1.0)
    rep = dw.diffusion_discrepancy(profile, [0.05], 200.0, 1e-10, t_ref=20.0)
    assert rep.sup_corrected <= rep.corrected_relative[0] + 1e-12
    assert rep.corrected_relative[0] <= 0.05
    assert rep.raw_relative[0] <= 0.05


def test_diffusion_discrepancy_zero_frequency_and_t0_limits():
    profile = dw.constant(1.0)
    rep = dw.diffusion_discrepancy(profile, [0.0], 50.0, 1e-10)
    assert rep.raw[0] <= 1e-9
    # tiny elapsed time, matched data: discrepancy vanishes with t
    rep = dw.diffusion_discrepancy(profile, [0.1], 1e-4, 1e-10, t_ref=5e-5)
    assert rep.raw[0] <= 1e-6


def test_diffusion_discrepancy_window_validation():
    profile = dw.constant(1.0)
    with pytest.raises(DomainError):
        dw.diffusion_discrepancy(profile, [0.8], 10.0)   # outside elliptic part
    with pytest.raises(RegimeError):
        dw.diffusion_discrepancy(dw.scale_invariant(0.5), [0.01], 10.0)
    with pytest.raises(RegimeError):
        dw.diffusion_discrepancy(dw.power(1.0, 2.0), [0.01], 10.0)


def test_overdamping_state_certified_nonzero():
    profile = dw.power(1.0, 2.0)
    state = dw.overdamping_state(profile, [0.0, 0.5, 1.0, 2.0], 1e-10)
    assert np.all(state.certified)
    assert np.all(np.abs(state.data_limits) > 0.0)
    # xi = 0 with data (1, 0): limit exactly 1
    assert state.data_limits[0] == pytest.approx(1.0, abs=1e-9)
    # |limit| in (0, 1] for data (1, 0)
    assert np.all(np.abs(state.data_limits) <= 1.0 + 1e-9)


def test_overdamping_state_zero_data():
    profile = dw.power(1.0, 2.0)
    state = dw.overdamping_state(profile, [0.5, 1.0], 1e-10, data=(0.0, 0.0))
    assert np.allclose(state.data_limits, 0.0)


def test_overdamping_state_regime_check():
    with pytest.raises(RegimeError):
        dw.overdamping_state(dw.constant(1.0), [1.0])


def test_frequency_truncated_decay_improves():
    profile = dw.constant(1.0)
    times = np.geomspace(1.0, 200.0, 8)
    curve, verdict = dw.frequency_truncated_decay(profile, 0.5, times, 1e-9)
    assert verdict == "improved"
    amp = np.sqrt(1.0 + curve.times) * curve.values
    assert amp[-1] < 0.2 * amp[0]


def test_frequency_truncated_decay_small_cut_recovers_full_curve():
    profile = dw.constant(1.0)
    times = np.geomspace(1.0, 30.0, 5)
    curve, _ = dw.frequency_truncated_decay(profile, 1e-3, times, 1e-8)
    full = dw.l2_norm_curve(profile, times, tol=1e-8)
    assert np.max(np.abs(curve.values - full.values)
                  / np.maximum(full.values, 1e-12)) < 0.05


def test_frequency_truncated_decay_regression_pin():
    # amplified value at t = 1e3 sits far below half the amplified t = 10 value
    profile = dw.constant(1.0)
    times = np.array([10.0, 100.0, 1000.0])
    curve, _ = dw.frequency_truncated_decay(profile, 0.1, times, 1e-9)
    amp = np.sqrt(1.0 + times) * curve.values
    assert amp[-1] < 0.5 * amp[0]
    assert np.all(np.diff(amp) < 0)


def test_frequency_truncated_decay_regime_checks():
    with pytest.raises(RegimeError):
        dw.frequency_truncated_decay(dw.power(1.0, 2.0), 0.5, [1.0, 2.0])
    with pytest.raises(DomainError):
        dw.frequency_truncated_decay(dw.constant(1.0), 0.0, [1.0, 2.0])
