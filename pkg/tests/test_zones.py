import math

import numpy as np
import pytest

import dampedwavelab as dw
from dampedwavelab.coefficients import DomainError, RegimeError
from dampedwavelab.zones import (
    DISSIPATIVE,
    DISSIPATIVE_CORE,
    ELLIPTIC,
    HYPERBOLIC,
    REDUCED,
    ZoneConfig,
    classify_point,
    hyperbolic_state_ratio,
    micro_energy_weight_h,
    prose_dissipative,
    separating_curve,
    zone_map,
)


def eff_config(profile, **kw):
    return ZoneConfig(dw.classify_regime(profile), **kw)


def test_classify_point_effective_examples():
    profile = dw.constant(1.0)
    cfg = eff_config(profile, N=10.0, eps_red=0.1)
    # far enough out in t that the core does not swallow the point
    assert classify_point(cfg, profile, 30.0, 0.4) == ELLIPTIC
    assert classify_point(cfg, profile, 30.0, 0.6) == HYPERBOLIC
    assert classify_point(cfg, profile, 30.0, 0.5) == REDUCED
    assert classify_point(cfg, profile, 5.0, 0.4) == DISSIPATIVE_CORE


def test_classify_point_noneffective_example():
    profile = dw.scale_invariant(0.5)
    cfg = ZoneConfig(dw.classify_regime(profile), N=10.0)
    assert classify_point(cfg, profile, 99.0, 0.05) == DISSIPATIVE
    assert classify_point(cfg, profile, 99.0, 0.2) == HYPERBOLIC


def test_classify_point_regime_mismatch():
    cfg = ZoneConfig(dw.classify_regime(dw.scale_invariant(0.5)))
    with pytest.raises(RegimeError):
        classify_point(cfg, dw.constant(1.0), 1.0, 1.0)


def test_prose_dissipative_form():
    profile = dw.scale_invariant(1.0)
    # for scale-invariant b the prose and h forms coincide up to the constant
    assert prose_dissipative(profile, 9.0, 0.05, 1.0)
    assert not prose_dissipative(profile, 9.0, 0.2, 1.0)


def test_micro_energy_weight_matching():
    # boundary (1+t) xi = N: both branches agree
    assert micro_energy_weight_h(9.0, 0.1, 1.0) == pytest.approx(0.1)
    assert micro_energy_weight_h(0.0, 0.01, 1.0) == 1.0
    assert micro_energy_weight_h(0.0, 5.0, 1.0) == 5.0
    with pytest.raises(DomainError):
        micro_energy_weight_h(1.0, 1.0, 0.0)


def test_separating_curve_values():
    assert separating_curve(dw.constant(1.0), 17.0) == 0.5
    assert separating_curve(dw.power(1.0, 1.0), 3.0) == 2.0
    assert separating_curve(dw.scale_invariant(4.0), 1.0) == 1.0


def test_on_curve_m_vanishes():
    for profile in (dw.constant(1.0), dw.power(1.0, 0.5), dw.power(1.0, 1.0)):
        for t in (0.0, 1.0, 10.0):
            xi = separating_curve(profile, t)
            pt = dw.PhaseSpacePoint.at(profile, t, xi)
            assert pt.m_value == pytest.approx(0.0, abs=1e-14)
            assert pt.gamma_distance == pytest.approx(0.0, abs=1e-14)


def test_phase_space_point_sign_consistency():
    rng = np.random.default_rng(0)
    profile = dw.power(1.0, 0.5)
    for _ in range(50):
        t, xi = rng.uniform(0, 50), rng.uniform(0, 5)
        pt = dw.PhaseSpacePoint.at(profile, t, xi)
        if pt.gamma_distance != 0.0:
            assert math.copysign(1, pt.m_value) == math.copysign(1, pt.gamma_distance)


def test_partition_property():
    rng = np.random.default_rng(1)
    for profile in (dw.constant(1.0), dw.power(1.0, 1.0), dw.scale_invariant(0.5)):
        cfg = ZoneConfig(dw.classify_regime(profile))
        fam_ne = cfg.regime.label == "non_effective"
        labels = {DISSIPATIVE, HYPERBOLIC} if fam_ne else \
            {ELLIPTIC, REDUCED, HYPERBOLIC, DISSIPATIVE_CORE}
        for _ in range(100):
            t, xi = rng.uniform(0, 100), rng.uniform(0, 10)
            assert classify_point(cfg, profile, t, xi) in labels


def test_zone_boundaries_move_with_parameters():
    profile = dw.constant(1.0)
    t, xi = 50.0, 0.3
    # larger N grows the core
    small = ZoneConfig(dw.classify_regime(profile), N=1.0)
    large = ZoneConfig(dw.classify_regime(profile), N=30.0)
    assert classify_point(small, profile, t, xi) == ELLIPTIC
    assert classify_point(large, profile, t, xi) == DISSIPATIVE_CORE
    # wider collar absorbs near-curve points
    narrow = ZoneConfig(dw.classify_regime(profile), eps_red=0.01)
    wide = ZoneConfig(dw.classify_regime(profile), eps_red=0.4)
    assert classify_point(narrow, profile, t, 0.55) == HYPERBOLIC
    assert classify_point(wide, profile, t, 0.55) == REDUCED


def test_elliptic_exponent_bound_closed_form_case():
    lhs, rhs, holds = dw.elliptic_exponent_bound(dw.constant(1.0), 0.3, 0.0, 10.0)
    assert lhs == pytest.approx(10.0 * (math.sqrt(0.16) - 0.5), rel=1e-9)
    assert rhs == pytest.approx(-0.9, rel=1e-12)
    assert holds


def test_elliptic_exponent_bound_small_xi_limit():
    lhs, rhs, holds = dw.elliptic_exponent_bound(dw.constant(1.0), 1e-6, 0.0, 5.0)
    assert holds
    assert abs(lhs) < 1e-6 and abs(rhs) < 1e-6


def test_elliptic_exponent_bound_power_profile():
    lhs, rhs, holds = dw.elliptic_exponent_bound(dw.power(1.0, 0.5), 0.1, 0.0, 50.0)
    assert holds


def test_elliptic_exponent_bound_rejects_exit():
    # for increasing b the interval [s, t] must start inside
    with pytest.raises(RegimeError):
        dw.elliptic_exponent_bound(dw.power(1.0, 0.5), 0.8, 0.0, 10.0)
    # decreasing b exits at the far end
    with pytest.raises(RegimeError):
        dw.elliptic_exponent_bound(dw.scale_invariant(4.0), 0.4, 0.0, 20.0)


def test_elliptic_exponent_bound_random_sweep():
    rng = np.random.default_rng(7)
    profiles = [dw.constant(1.0), dw.constant(0.5), dw.power(1.0, 0.5),
                dw.power(1.0, 1.0), dw.power(1.0, 2.0), dw.scale_invariant(10.0)]
    checked = 0
    while checked < 100:
        profile = profiles[rng.integers(len(profiles))]
        s = rng.uniform(0.0, 20.0)
        t = s + rng.uniform(0.5, 30.0)
        bmin = min(dw.eval_b(profile, s), dw.eval_b(profile, t))
        if bmin <= 0:
            continue
        xi = rng.uniform(0.0, 0.49) * bmin
        if xi <= 0:
            continue
        lhs, rhs, holds = dw.elliptic_exponent_bound(profile, xi, s, t)
        assert holds, (profile.kind, xi, s, t, lhs, rhs)
        checked += 1


def test_zone_map_gamma_row_constant():
    profile = dw.constant(1.0)
    cfg = ZoneConfig(dw.classify_regime(profile), N=0.5)
    ts = np.linspace(1.0, 50.0, 6)
    xis = np.array([0.2, 0.5, 0.9])
    labels = zone_map(cfg, profile, ts, xis)
    assert all(labels[i, 1] == REDUCED for i in range(len(ts)))
    assert all(labels[i, 2] == HYPERBOLIC for i in range(len(ts)))


def test_zone_map_elliptic_region_grows_with_increasing_b():
    profile = dw.power(1.0, 1.0)
    cfg = ZoneConfig(dw.classify_regime(profile), N=1.0)
    ts = np.array([1.0, 10.0, 100.0])
    xis = np.geomspace(0.05, 20.0, 30)
    labels = zone_map(cfg, profile, ts, xis)
    counts = [(labels[i] == ELLIPTIC).sum() for i in range(3)]
    assert counts[0] < counts[1] < counts[2]


def test_zone_map_elliptic_region_shrinks_with_decreasing_b():
    # the upper elliptic boundary xi = b(t)/2 moves down in t
    profile = dw.power(1.0, -0.5)
    cfg = ZoneConfig(dw.classify_regime(profile), N=0.1)
    ts = np.array([0.0, 10.0, 200.0])
    xis = np.geomspace(0.005, 2.0, 40)
    labels = zone_map(cfg, profile, ts, xis)
    uppers = [max((x for x, lab in zip(xis, labels[i]) if lab == ELLIPTIC),
                  default=0.0) for i in range(3)]
    assert uppers[0] > uppers[1] > uppers[2] > 0.0


def test_hyperbolic_state_ratio_bounded():
    # deep hyperbolic points keep the micro-energy within a factor 10
    cases = [
        (dw.constant(1.0), 2.0, np.linspace(0.0, 30.0, 31)),
        (dw.scale_invariant(0.5), 1.0, np.linspace(0.0, 50.0, 26)),
        (dw.integrable(1.0, 2.0), 1.5, np.linspace(0.0, 50.0, 26)),
    ]
    for profile, xi, tg in cases:
        assert hyperbolic_state_ratio(profile, xi, tg) <= 10.0


def test_hyperbolic_state_ratio_rejects_shallow_points():
    with pytest.raises(RegimeError):
        hyperbolic_state_ratio(dw.constant(1.0), 0.6, np.linspace(0, 10, 11))
