"""Phase-space zone geometry for the two decay regimes.

Non-effective damping splits the extended phase space into a dissipative
zone (1+t)|xi| <= N and a hyperbolic zone.  Effective damping is organized
around the separating curve Gamma = {2|xi| = b(t)}: an elliptic part where
2|xi| < b(t) (the quantity m(t, xi) = xi^2 - b^2(t)/4 is negative), a
hyperbolic part where it is positive, a reduced collar around Gamma, and a
dissipative core near the t-axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .coefficients import (
    CoefficientProfile,
    DomainError,
    RegimeClass,
    RegimeError,
    NON_EFFECTIVE,
    classify_regime,
    eval_b,
    eval_log_lambda,
    eval_recip_primitive,
    scalar_b,
)
from .fundamental import solve_fundamental

# zone labels, non-effective family
DISSIPATIVE = "dissipative"
HYPERBOLIC = "hyperbolic"
# zone labels, effective family (HYPERBOLIC is shared)
ELLIPTIC = "elliptic"
REDUCED = "reduced"
DISSIPATIVE_CORE = "dissipative_core"


@dataclass(frozen=True)
class ZoneConfig:
    """Zone constant N and the relative reduced-zone half width."""

    regime: RegimeClass
    N: float = 10.0
    eps_red: float = 0.1

    def __post_init__(self):
        if self.N <= 0:
            raise DomainError("zone constant N must be > 0")
        if not (0.0 < self.eps_red < 0.5):
            raise DomainError("eps_red must lie in (0, 1/2)")


@dataclass(frozen=True)
class PhaseSpacePoint:
    """A point (t, xi) with its distance measures to the separating curve."""

    t: float
    xi: float
    m_value: float          # xi^2 - b^2(t)/4
    gamma_distance: float   # 2 xi - b(t)

    @classmethod
    def at(cls, profile: CoefficientProfile, t: float, xi: float) -> "PhaseSpacePoint":
        b = eval_b(profile, t)
        return cls(t, xi, xi * xi - 0.25 * b * b, 2.0 * xi - b)


def _family(regime: RegimeClass) -> str:
    # borderline profiles admit both zone families
    if regime.label == NON_EFFECTIVE:
        return "ne"
    if regime.is_effective_family:
        return "eff"
    return "both"


def classify_point(config: ZoneConfig, profile: CoefficientProfile,
                   t: float, xi: float) -> str:
    """Zone label of (t, xi) under the configured regime.

    Non-effective family: dissipative iff (1+t) xi <= N, else hyperbolic.
    Effective family: hyperbolic iff 2 xi >= (1+eps) b, reduced inside the
    collar |2 xi / b - 1| < eps, and on the elliptic side the dissipative
    core (1+t) xi <= N takes precedence over the elliptic zone.
    """
    if t < 0 or xi < 0:
        raise DomainError("phase-space points need t >= 0 and xi >= 0")
    fam = _family(config.regime)
    actual = classify_regime(profile)
    if _family(actual) not in (fam, "both") and fam != "both":
        raise RegimeError(
            f"config regime {config.regime.label} does not match the "
            f"profile regime {actual.label}")
    if fam == "ne" or (fam == "both" and config.regime.label == NON_EFFECTIVE):
        return DISSIPATIVE if (1.0 + t) * xi <= config.N else HYPERBOLIC
    b = eval_b(profile, t)
    d = config.eps_red
    if 2.0 * xi >= (1.0 + d) * b:
        return HYPERBOLIC
    if 2.0 * xi > (1.0 - d) * b:
        return REDUCED
    if (1.0 + t) * xi <= config.N:
        return DISSIPATIVE_CORE
    return ELLIPTIC


def prose_dissipative(profile: CoefficientProfile, t: float, xi: float,
                      N: float) -> bool:
    """The alternative dissipative-zone form |xi| <= N b(t).

    Classification itself uses the (1+t)|xi| <= N form that defines the
    micro-energy weight; for scale-invariant profiles the two coincide up
    to the constant.
    """
    return xi <= N * eval_b(profile, t)


def micro_energy_weight_h(t: float, xi: float, N: float) -> float:
    """h(t, xi) = N/(1+t) in the dissipative zone, |xi| outside.

    Both branches equal xi on the boundary (1+t) xi = N, the only point of
    continuity across it.
    """
    if N <= 0:
        raise DomainError("N must be > 0")
    return N / (1.0 + t) if (1.0 + t) * xi <= N else xi


def separating_curve(profile: CoefficientProfile, t: float) -> float:
    """xi on Gamma at time t, i.e. b(t)/2; monotone exactly as b is."""
    return 0.5 * eval_b(profile, t)


def elliptic_exponent_bound(profile: CoefficientProfile, xi: float,
                            s: float, t: float, tol: float = 1e-10):
    """Check int_s^t (sqrt|m| - b/2) <= -xi^2 int_s^t 1/b inside the
    elliptic part.

    Returns (lhs, rhs, holds).  The interval must satisfy 2 xi < b(tau) on
    [s, t]; if it exits the elliptic part the crossing time is reported in
    the raised error.
    """
    if not (0 <= s < t):
        raise DomainError("need 0 <= s < t")
    bf = scalar_b(profile)

    def margin(tau):
        return bf(tau) - 2.0 * xi

    if margin(s) <= 0 or margin(t) <= 0:
        bad = s if margin(s) <= 0 else t
        raise RegimeError(f"[{s}, {t}] is not inside the elliptic part: "
                          f"2 xi >= b at tau = {bad}")
    # monotone b makes the endpoint check sufficient; probe custom profiles
    if profile.kind == "custom" and margin((s + t) / 2.0) <= 0:
        cross = brentq(margin, s, (s + t) / 2.0)
        raise RegimeError(f"interval exits the elliptic part at tau = {cross}")

    def integrand(tau):
        b = bf(tau)
        return math.sqrt(abs(xi * xi - 0.25 * b * b)) - 0.5 * b

    lhs, _ = quad(integrand, s, t, epsabs=1e-14, epsrel=tol, limit=200)
    rhs = -xi * xi * (eval_recip_primitive(profile, t, tol)
                      - eval_recip_primitive(profile, s, tol))
    return lhs, rhs, bool(lhs <= rhs + tol)


def zone_map(config: ZoneConfig, profile: CoefficientProfile,
             t_grid, xi_grid) -> np.ndarray:
    """Elementwise classify_point over the grid; shape (n_t, n_xi)."""
    ts = np.asarray(t_grid, dtype=float)
    xs = np.asarray(xi_grid, dtype=float)
    out = np.empty((ts.size, xs.size), dtype=object)
    for i, t in enumerate(ts):
        for j, x in enumerate(xs):
            out[i, j] = classify_point(config, profile, t, x)
    return out


def hyperbolic_state_ratio(profile: CoefficientProfile, xi: float,
                           t_grid, tol: float = 1e-10) -> float:
    """Max over the grid of the micro-energy norm ratio for v = lambda u.

    For points deep in the hyperbolic part the vector
    (sqrt|m| v_hat, d/dt v_hat) keeps a norm comparable to its initial one;
    the returned ratio max_t ||V(t)|| / ||V(t_0)|| quantifies that.  The
    grid must stay deep hyperbolic (2 xi >= 2 b)."""
    ts = np.asarray(t_grid, dtype=float)
    bf = scalar_b(profile)
    for te in (ts[0], ts[-1]):
        if 2.0 * xi < 2.0 * bf(te):
            raise RegimeError(f"grid leaves the deep hyperbolic region at t = {te}")
    pair = solve_fundamental(profile, xi, 0.0, ts, tol)
    log_lams = np.array([eval_log_lambda(profile, t) for t in ts])
    lams = np.exp(log_lams)
    norms = []
    for (p, dp) in ((pair.phi1, pair.dphi1), (pair.phi2, pair.dphi2)):
        v = lams * p
        dv = lams * (0.5 * np.array([bf(t) for t in ts]) * p + dp)
        m = np.array([abs(xi * xi - 0.25 * bf(t) ** 2) for t in ts])
        nrm = np.sqrt(m * np.abs(v) ** 2 + np.abs(dv) ** 2)
        norms.append(np.max(nrm) / nrm[0])
    return float(max(norms))
