import math

import numpy as np
import pytest
from scipy.integrate import quad

import dampedwavelab as dw
from dampedwavelab.coefficients import (
    BORDERLINE,
    EFFECTIVE,
    NON_EFFECTIVE,
    OVER_DAMPING,
    DomainError,
    UnclassifiableError,
    scalar_b,
)

ALL_BUILTINS = [
    dw.zero(),
    dw.constant(1.0),
    dw.constant(0.5),
    dw.scale_invariant(0.5),
    dw.scale_invariant(2.0),
    dw.power(1.0, 0.5),
    dw.power(1.0, 1.0),
    dw.power(1.0, 2.0),
    dw.power(2.0, -0.5),
    dw.iterated_log(1.0, 1),
    dw.iterated_log(2.0, 2),
    dw.integrable(1.0, 2.0),
]


def test_eval_b_examples():
    assert dw.eval_b(dw.scale_invariant(2.0), 3.0) == pytest.approx(0.5)
    assert dw.eval_b(dw.zero(), 7.0) == 0.0
    # mu/((1+t) ln(e+t)) at t=0
    assert dw.eval_b(dw.iterated_log(1.0, 1), 0.0) == pytest.approx(1.0)


def test_eval_b_rejects_negative_time():
    with pytest.raises(DomainError):
        dw.eval_b(dw.constant(1.0), -0.5)


def test_derivative_examples():
    assert dw.eval_b_derivative(dw.scale_invariant(2.0), 0.0, 1) == pytest.approx(-2.0)
    assert dw.eval_b_derivative(dw.constant(1.0), 5.0, 1) == 0.0
    # kappa (1+t)^(kappa-1) at t=3, kappa=1/2
    assert dw.eval_b_derivative(dw.power(1.0, 0.5), 3.0, 1) == pytest.approx(0.25)


@pytest.mark.parametrize("profile", ALL_BUILTINS)
@pytest.mark.parametrize("k", [1, 2])
def test_derivatives_match_finite_differences(profile, k):
    for t in (0.3, 2.0, 17.0):
        # second differences amplify rounding noise; widen h and abs band
        h = (1e-5 if k == 1 else 1e-4) * (1.0 + t)
        if k == 1:
            fd = (dw.eval_b(profile, t + h) - dw.eval_b(profile, t - h)) / (2 * h)
        else:
            fd = (dw.eval_b(profile, t + h) - 2 * dw.eval_b(profile, t)
                  + dw.eval_b(profile, t - h)) / h**2
        exact = dw.eval_b_derivative(profile, t, k)
        assert exact == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_lambda_examples():
    assert dw.eval_lambda(dw.scale_invariant(2.0), 3.0) == pytest.approx(4.0)
    for profile in ALL_BUILTINS:
        assert dw.eval_lambda(profile, 0.0) == 1.0


def test_iterated_log_lambda_asymptotics():
    # lambda(t) grows like (ln(e+t))^(mu/2) for depth 1
    p = dw.iterated_log(1.0, 1)
    for t in (1e3, 1e5):
        ratio = dw.eval_lambda(p, t) / math.log(math.e + t) ** 0.5
        assert 0.5 < ratio < 2.0


@pytest.mark.parametrize("profile", ALL_BUILTINS)
def test_lambda_closed_form_vs_quadrature(profile):
    # closed forms agree with direct quadrature of b to 1e-10 relative
    bf = scalar_b(profile)
    for t in (0.0, 1.0, 10.0, 100.0, 1000.0):
        direct, _ = quad(bf, 0.0, t, epsabs=1e-14, epsrel=1e-12, limit=200)
        log_lam = dw.eval_log_lambda(profile, t)
        assert log_lam == pytest.approx(direct / 2.0, rel=1e-10, abs=1e-12)


def test_recip_primitive_examples():
    assert dw.eval_recip_primitive(dw.constant(1.0), 10.0) == pytest.approx(10.0)
    # 2((1+t)^(1/2) - 1) at t=3
    assert dw.eval_recip_primitive(dw.power(1.0, 0.5), 3.0) == pytest.approx(2.0)
    # kappa=2: bounded by 1 at infinity
    assert dw.eval_recip_primitive(dw.power(1.0, 2.0), math.inf) == pytest.approx(1.0)


def test_recip_primitive_closed_vs_quadrature():
    for profile in (dw.constant(0.5), dw.scale_invariant(2.0),
                    dw.power(1.0, 0.5), dw.power(1.0, 1.0), dw.integrable(1.0, 2.0)):
        bf = scalar_b(profile)
        for t in (0.5, 5.0, 50.0):
            direct, _ = quad(lambda s: 1.0 / bf(s), 0.0, t,
                             epsabs=1e-14, epsrel=1e-12, limit=200)
            assert dw.eval_recip_primitive(profile, t) == pytest.approx(
                direct, rel=1e-9)


def test_recip_primitive_rejects_vanishing_b():
    with pytest.raises(DomainError):
        dw.eval_recip_primitive(dw.zero(), 1.0)
    with pytest.raises(DomainError):
        dw.eval_recip_primitive(dw.scale_invariant(0.0), 1.0)


def test_recip_primitive_integrable_endpoint_singularity():
    # custom profile with b(0) = 0 but 1/b integrable at the origin
    p = dw.custom(lambda t: math.sqrt(t), lambda t: 0.5 / math.sqrt(max(t, 1e-300)),
                  monotone="nondecreasing", tb_limit=math.inf)
    assert dw.eval_recip_primitive(p, 4.0, 1e-9) == pytest.approx(4.0, rel=1e-7)


def test_monotonicity_of_lambda_and_recip_primitive():
    rng = np.random.default_rng(42)
    profiles = [p for p in ALL_BUILTINS if p.kind != "zero"
                and not (p.kind == "scale_invariant" and p.mu == 0.0)]
    for profile in profiles:
        ts = np.sort(rng.uniform(0.0, 200.0, size=8))
        lams = [dw.eval_log_lambda(profile, t) for t in ts]
        assert np.all(np.diff(lams) >= -1e-12)
        rs = [dw.eval_recip_primitive(profile, t) for t in ts]
        assert np.all(np.diff(rs) >= -1e-12)


def test_classify_regime_table():
    assert dw.classify_regime(dw.scale_invariant(0.5)).label == NON_EFFECTIVE
    assert dw.classify_regime(dw.power(1.0, 0.5)).label == EFFECTIVE
    assert dw.classify_regime(dw.power(1.0, 2.0)).label == OVER_DAMPING
    assert dw.classify_regime(dw.constant(1.0)).label == EFFECTIVE
    assert dw.classify_regime(dw.zero()).label == NON_EFFECTIVE
    assert dw.classify_regime(dw.integrable(1.0, 2.0)).label == NON_EFFECTIVE
    assert dw.classify_regime(dw.iterated_log(1.0, 1)).label == NON_EFFECTIVE


def test_borderline_iff_mu_at_least_one():
    for mu in (0.1, 0.5, 0.99):
        assert dw.classify_regime(dw.scale_invariant(mu)).label == NON_EFFECTIVE
    for mu in (1.0, 1.5, 10.0):
        r = dw.classify_regime(dw.scale_invariant(mu))
        assert r.label == BORDERLINE
        assert r.mu_eff == mu


def test_classify_custom_profiles():
    slow = dw.custom(lambda t: 0.3 / (1.0 + t),
                     lambda t: -0.3 / (1.0 + t) ** 2,
                     monotone="nonincreasing")
    assert dw.classify_regime(slow).label == NON_EFFECTIVE
    grow = dw.custom(lambda t: (1.0 + t) ** 0.3,
                     lambda t: 0.3 * (1.0 + t) ** (-0.7),
                     monotone="nondecreasing")
    assert dw.classify_regime(grow).label == EFFECTIVE
    wobble = dw.custom(lambda t: 1.0 / (1.0 + t) * (1.5 + math.sin(math.log(1 + t))),
                       lambda t: 0.0, monotone="nonincreasing")
    with pytest.raises(UnclassifiableError):
        dw.classify_regime(wobble)


def test_check_hypotheses_constants():
    ts = list(np.geomspace(0.01, 1e4, 25)) + [0.0]
    rep = dw.check_hypotheses(dw.scale_invariant(1.0), ts, k_max=1)
    assert rep.constants[1] == pytest.approx(1.0, rel=1e-12)
    rep = dw.check_hypotheses(dw.constant(1.0), ts, k_max=2)
    assert rep.constants[1] == 0.0 and rep.constants[2] == 0.0
    rep = dw.check_hypotheses(dw.power(1.0, 0.5), ts, k_max=1)
    assert rep.constants[1] == pytest.approx(0.5, rel=1e-12)


@pytest.mark.parametrize("profile", ALL_BUILTINS)
def test_check_hypotheses_finite_on_builtins(profile):
    ts = np.geomspace(0.01, 1e4, 20)
    rep = dw.check_hypotheses(profile, ts, k_max=2)
    assert rep.positive_ok
    assert rep.monotone_ok
    assert rep.all_finite


def test_zero_samples_excluded():
    rep = dw.check_hypotheses(dw.zero(), [0.0, 1.0, 2.0], k_max=1)
    assert rep.excluded == (0.0, 1.0, 2.0)
    assert rep.constants[1] == 0.0


def test_profile_validation():
    with pytest.raises(DomainError):
        dw.power(0.0, 0.5)
    with pytest.raises(DomainError):
        dw.power(1.0, -1.0)
    with pytest.raises(DomainError):
        dw.integrable(1.0, 1.0)
    with pytest.raises(DomainError):
        dw.iterated_log(1.0, 4)
    with pytest.raises(DomainError):
        dw.constant(-1.0)
