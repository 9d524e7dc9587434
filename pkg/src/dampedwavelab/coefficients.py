"""Dissipation coefficient families b(t) and their calculus.

A profile represents one coefficient family of the damped wave equation
u_tt - Lap u + b(t) u_t = 0.  The module provides pointwise evaluation,
derivatives, the primitive B(t) = int_0^t b, the gauge lambda(t) =
exp(B(t)/2), the reciprocal primitive R(t) = int_0^t dtau/b(tau),
regime classification and empirical hypothesis checks.

Profiles are immutable value objects; every operation here is a pure
function, safe to call concurrently.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

KINDS = ("zero", "constant", "scale_invariant", "power", "iterated_log",
         "integrable", "custom")

#: regime labels
NON_EFFECTIVE = "non_effective"
BORDERLINE = "scale_invariant_borderline"
EFFECTIVE = "effective"
OVER_DAMPING = "over_damping"


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class RegimeError(ValueError):
    """Operation invoked for a profile in the wrong dissipation regime."""


class UnclassifiableError(ValueError):
    """Sampled asymptotics of a custom profile neither converge nor diverge."""


class QuadratureWarning(UserWarning):
    """Adaptive quadrature did not certify the requested tolerance."""


class AccuracyWarning(UserWarning):
    """A finite-difference error estimate exceeds the requested tolerance."""


def _iterexp(k: int) -> float:
    """e^[k]: e, e^e, e^(e^e), ..."""
    v = math.e
    for _ in range(k - 1):
        v = math.exp(v)
    return v


@dataclass(frozen=True)
class CoefficientProfile:
    """One dissipation coefficient family.

    Use the factory functions (zero, constant, scale_invariant, power,
    iterated_log, integrable, custom) rather than the raw constructor.
    Parameter fields are only meaningful for their own kind.
    """

    kind: str
    b0: float = 0.0            # constant
    mu: float = 0.0            # scale_invariant, iterated_log
    c: float = 1.0             # power, integrable
    kappa: float = 0.0         # power
    depth: int = 1             # iterated_log
    sigma: float = 2.0         # integrable
    b_func: Callable[[float], float] | None = None
    db_func: Callable[[float], float] | None = None
    monotone: str = "unknown"  # custom: "nonincreasing" | "nondecreasing"
    tb_limit: float | None = None  # custom: declared limit of t*b(t), may be inf

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown coefficient kind {self.kind!r}")
        if self.kind == "constant" and self.b0 < 0:
            raise DomainError("constant profile needs b0 >= 0")
        if self.kind == "scale_invariant" and self.mu < 0:
            raise DomainError("scale-invariant profile needs mu >= 0")
        if self.kind == "power":
            if self.c <= 0:
                raise DomainError("power profile needs c > 0")
            if self.kappa <= -1:
                raise DomainError("power profile needs kappa > -1")
        if self.kind == "iterated_log":
            if self.mu <= 0:
                raise DomainError("iterated-log profile needs mu > 0")
            if not (1 <= self.depth <= 3):
                raise DomainError("iterated-log depth must be in 1..3 "
                                  "(e^[4] overflows double precision)")
        if self.kind == "integrable":
            if self.c <= 0:
                raise DomainError("integrable profile needs c > 0")
            if self.sigma <= 1:
                raise DomainError("integrable profile needs sigma > 1")
        if self.kind == "custom":
            if self.b_func is None or self.db_func is None:
                raise DomainError("custom profile needs b and b' callables")
            if self.monotone not in ("nonincreasing", "nondecreasing"):
                raise DomainError("custom profile needs a declared monotonicity")

    def describe(self) -> str:
        p = {
            "zero": "b(t) = 0",
            "constant": f"b(t) = {self.b0}",
            "scale_invariant": f"b(t) = {self.mu}/(1+t)",
            "power": f"b(t) = {self.c}*(1+t)^{self.kappa}",
            "iterated_log": f"b(t) = {self.mu}/((1+t) ln(e+t) ... ln^[{self.depth}](e^[{self.depth}]+t))",
            "integrable": f"b(t) = {self.c}*(1+t)^(-{self.sigma})",
            "custom": "b(t) = <user callable>",
        }
        return p[self.kind]


def zero() -> CoefficientProfile:
    return CoefficientProfile("zero")


def constant(b0: float) -> CoefficientProfile:
    return CoefficientProfile("constant", b0=float(b0))


def scale_invariant(mu: float) -> CoefficientProfile:
    return CoefficientProfile("scale_invariant", mu=float(mu))


def power(c: float, kappa: float) -> CoefficientProfile:
    return CoefficientProfile("power", c=float(c), kappa=float(kappa))


def iterated_log(mu: float, depth: int = 1) -> CoefficientProfile:
    return CoefficientProfile("iterated_log", mu=float(mu), depth=int(depth))


def integrable(c: float, sigma: float) -> CoefficientProfile:
    return CoefficientProfile("integrable", c=float(c), sigma=float(sigma))


def custom(b: Callable[[float], float], db: Callable[[float], float],
           monotone: str, tb_limit: float | None = None) -> CoefficientProfile:
    return CoefficientProfile("custom", b_func=b, db_func=db,
                              monotone=monotone, tb_limit=tb_limit)


# ---------------------------------------------------------------------------
# iterated-log helpers
# ---------------------------------------------------------------------------

def _itlog_chain(t: float, k: int) -> list[float]:
    """Chain a_0 = e^[k] + t, a_j = ln(a_{j-1}); a_k equals ln^[k](e^[k]+t)."""
    a = [_iterexp(k) + t]
    for _ in range(k):
        a.append(math.log(a[-1]))
    return a

def _itlog_factors(t: float, m: int):
    """Factors f_0 = 1+t, f_k = ln^[k](e^[k]+t) together with f', f''.

    f_k' = 1 / prod(a_0..a_{k-1}) along the chain of f_k, and
    f_k'' = -f_k' * sum_j a_j'/a_j over the same chain.
    """
    fs, dfs, ddfs = [1.0 + t], [1.0], [0.0]
    for k in range(1, m + 1):
        a = _itlog_chain(t, k)
        prods = [1.0]
        for j in range(k):                       # prods[j+1] = a_0 * ... * a_j
            prods.append(prods[-1] * a[j])
        fk = a[k]
        dfk = 1.0 / prods[k]
        # a_j' = 1/prods[j]; sum over j < k of a_j'/a_j
        ssum = sum(1.0 / (prods[j] * a[j]) for j in range(k))
        fs.append(fk)
        dfs.append(dfk)
        ddfs.append(-dfk * ssum)
    return fs, dfs, ddfs


# ---------------------------------------------------------------------------
# pointwise evaluation
# ---------------------------------------------------------------------------

def eval_b(profile: CoefficientProfile, t):
    """b(t) for t >= 0 (scalar or ndarray), exact per kind."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise DomainError("t must be >= 0")
    k = profile.kind
    if k == "zero":
        out = np.zeros_like(arr)
    elif k == "constant":
        out = np.full_like(arr, profile.b0)
    elif k == "scale_invariant":
        out = profile.mu / (1.0 + arr)
    elif k == "power":
        out = profile.c * (1.0 + arr) ** profile.kappa
    elif k == "integrable":
        out = profile.c * (1.0 + arr) ** (-profile.sigma)
    elif k == "iterated_log":
        flat = np.atleast_1d(arr).ravel()
        vals = np.empty_like(flat)
        for i, ti in enumerate(flat):
            fs, _, _ = _itlog_factors(ti, profile.depth)
            vals[i] = profile.mu / math.prod(fs)
        out = vals.reshape(np.shape(arr))
    else:  # custom
        flat = np.atleast_1d(arr).ravel()
        out = np.array([profile.b_func(ti) for ti in flat]).reshape(np.shape(arr))
    return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out


def scalar_b(profile: CoefficientProfile) -> Callable[[float], float]:
    """Fast scalar closure for b(t); the ODE right-hand-side hot path."""
    k = profile.kind
    if k == "zero":
        return lambda t: 0.0
    if k == "constant":
        b0 = profile.b0
        return lambda t: b0
    if k == "scale_invariant":
        mu = profile.mu
        return lambda t: mu / (1.0 + t)
    if k == "power":
        c, kap = profile.c, profile.kappa
        return lambda t: c * (1.0 + t) ** kap
    if k == "integrable":
        c, sg = profile.c, profile.sigma
        return lambda t: c * (1.0 + t) ** (-sg)
    if k == "iterated_log":
        mu, m = profile.mu, profile.depth
        def _b(t):
            fs, _, _ = _itlog_factors(t, m)
            return mu / math.prod(fs)
        return _b
    return profile.b_func


def _fd_derivative(f: Callable[[float], float], t: float, order: int,
                   tol: float):
    """Central finite difference with one Richardson extrapolation step.

    Returns (value, error_estimate).  Step control: start from a scale-aware
    h and halve once; the Richardson difference doubles as error estimate.
    """
    h = max(1e-3 * (1.0 + t), 1e-5)
    def stencil(hh):
        if order == 1:
            return (f(t + hh) - f(max(t - hh, 0.0))) / ((t + hh) - max(t - hh, 0.0))
        if order == 2:
            tm = max(t - hh, 0.0)
            # non-symmetric fallback near t=0
            if tm == 0.0 and t < hh:
                return (f(t + 2 * hh) - 2 * f(t + hh) + f(t)) / hh**2
            return (f(t + hh) - 2 * f(t) + f(tm)) / hh**2
        raise DomainError("finite differences support order 1 and 2 only")
    coarse, fine = stencil(h), stencil(h / 2)
    p = 2.0  # central stencils are second order
    rich = fine + (fine - coarse) / (2**p - 1)
    est = abs(fine - coarse) / (2**p - 1)
    if est > tol * max(1.0, abs(rich)):
        warnings.warn(f"finite-difference error estimate {est:.2e} exceeds "
                      f"tolerance {tol:.1e}", AccuracyWarning)
    return rich, est


def eval_b_derivative(profile: CoefficientProfile, t: float, k: int = 1,
                      tol: float = 1e-6) -> float:
    """k-th derivative of b at t; closed form for k <= 2 on built-in kinds.

    Higher k (and b'' of custom profiles) fall back to Richardson-extrapolated
    central differences and warn when the error estimate exceeds tol.
    """
    if t < 0:
        raise DomainError("t must be >= 0")
    if k < 1:
        raise DomainError("derivative order k must be >= 1")
    kd = profile.kind
    if kd == "zero" or kd == "constant":
        return 0.0
    if kd == "scale_invariant":
        return profile.mu * (-1.0) ** k * math.factorial(k) * (1.0 + t) ** (-(k + 1))
    if kd in ("power", "integrable"):
        expo = profile.kappa if kd == "power" else -profile.sigma
        coef = profile.c
        for j in range(k):
            coef *= (expo - j)
        return coef * (1.0 + t) ** (expo - k)
    if kd == "iterated_log":
        if k <= 2:
            fs, dfs, ddfs = _itlog_factors(t, profile.depth)
            b = profile.mu / math.prod(fs)
            gs = [dfs[i] / fs[i] for i in range(len(fs))]
            if k == 1:
                return -b * sum(gs)
            dgs = [(ddfs[i] * fs[i] - dfs[i] ** 2) / fs[i] ** 2
                   for i in range(len(fs))]
            return b * (sum(gs) ** 2 - sum(dgs))
        val, _ = _fd_derivative(lambda s: eval_b_derivative(profile, s, 2, tol),
                                t, k - 2, tol)
        return val
    # custom
    if k == 1:
        return profile.db_func(t)
    val, _ = _fd_derivative(profile.db_func, t, k - 1, tol)
    return val


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def _quad(f, a: float, b: float, tol: float, points=None) -> float:
    val, err = quad(f, a, b, epsabs=1e-14, epsrel=tol, limit=200, points=points)
    if err > tol * max(abs(val), 1.0) * 10:
        warnings.warn(f"quadrature achieved error bound {err:.2e} for value "
                      f"{val:.6e}, requested rel {tol:.1e}", QuadratureWarning)
    return val


def eval_primitive(profile: CoefficientProfile, t: float, tol: float = 1e-10) -> float:
    """B(t) = int_0^t b(tau) dtau, closed form where available."""
    if t < 0:
        raise DomainError("t must be >= 0")
    k = profile.kind
    if k == "zero":
        return 0.0
    if k == "constant":
        return profile.b0 * t
    if k == "scale_invariant":
        return profile.mu * math.log1p(t)
    if k == "power":
        e = profile.kappa + 1.0
        return profile.c * ((1.0 + t) ** e - 1.0) / e
    if k == "integrable":
        e = 1.0 - profile.sigma
        return profile.c * ((1.0 + t) ** e - 1.0) / e
    if t == 0.0:
        return 0.0
    return _quad(scalar_b(profile), 0.0, t, tol)


def eval_log_lambda(profile: CoefficientProfile, t: float, tol: float = 1e-10) -> float:
    """log lambda(t) = B(t)/2; robust against overflow of lambda itself."""
    return 0.5 * eval_primitive(profile, t, tol)


def eval_lambda(profile: CoefficientProfile, t: float, tol: float = 1e-10) -> float:
    """Gauge lambda(t) = exp(B(t)/2); lambda(0) = 1, nondecreasing for b >= 0.

    Returns math.inf (with a warning) when B(t)/2 overflows the exponential.
    """
    if tol <= 0:
        raise DomainError("tol must be > 0")
    ll = eval_log_lambda(profile, t, tol)
    if ll > 709.0:
        warnings.warn(f"lambda({t}) overflows double precision "
                      f"(log lambda = {ll:.3e}); returning inf", QuadratureWarning)
        return math.inf
    return math.exp(ll)


def recip_primitive_limit(profile: CoefficientProfile) -> float:
    """R(inf) = int_0^inf dtau/b(tau); finite only in the over-damping case."""
    if profile.kind == "power" and profile.kappa > 1.0:
        return 1.0 / (profile.c * (profile.kappa - 1.0))
    return math.inf


def eval_recip_primitive(profile: CoefficientProfile, t: float,
                         tol: float = 1e-10) -> float:
    """R(t) = int_0^t dtau/b(tau), closed form where available.

    Rejects profiles with b identically zero on a subinterval of (0, t].
    t = math.inf is admitted for kinds with a finite limit.
    """
    if tol <= 0:
        raise DomainError("tol must be > 0")
    if t < 0:
        raise DomainError("t must be >= 0")
    k = profile.kind
    if k == "zero" or (k == "constant" and profile.b0 == 0.0) \
            or (k == "scale_invariant" and profile.mu == 0.0):
        raise DomainError("reciprocal primitive undefined: b vanishes on (0, t]")
    if t == 0.0:
        return 0.0
    if k == "constant":
        return t / profile.b0
    if k == "scale_invariant":
        return t * (t + 2.0) / (2.0 * profile.mu)
    if k == "power":
        if profile.kappa == 1.0:
            if math.isinf(t):
                return math.inf
            return math.log1p(t) / profile.c
        e = 1.0 - profile.kappa
        if math.isinf(t):
            return recip_primitive_limit(profile)
        return ((1.0 + t) ** e - 1.0) / (profile.c * e)
    if k == "integrable":
        e = 1.0 + profile.sigma
        if math.isinf(t):
            return math.inf
        return ((1.0 + t) ** e - 1.0) / (profile.c * e)
    if math.isinf(t):
        raise DomainError("infinite horizon only supported for closed-form kinds")
    bf = scalar_b(profile)
    b_at_0 = bf(0.0)
    if b_at_0 <= 0.0:
        # integrable endpoint singularity is acceptable; probe on (0, t]
        probe = bf(min(t, 1e-6) / 2.0)
        if probe <= 0.0:
            raise DomainError("b vanishes on a subinterval of (0, t]; "
                              "reciprocal primitive rejected")
    return _quad(lambda s: 1.0 / bf(s), 0.0, t, tol)


@dataclass(frozen=True)
class CoefficientCalculus:
    """Bundled calculus callables for one profile at a fixed tolerance."""

    profile: CoefficientProfile
    tol: float = 1e-10

    def b(self, t):
        return eval_b(self.profile, t)

    def B(self, t: float) -> float:
        return eval_primitive(self.profile, t, self.tol)

    def log_lam(self, t: float) -> float:
        return eval_log_lambda(self.profile, t, self.tol)

    def lam(self, t: float) -> float:
        return eval_lambda(self.profile, t, self.tol)

    def R(self, t: float) -> float:
        return eval_recip_primitive(self.profile, t, self.tol)


# ---------------------------------------------------------------------------
# regime classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeClass:
    """Dissipation regime plus the diagnostics that decided it."""

    label: str                      # one of the regime labels above
    mu_eff: float | None            # finite limit of t*b(t), borderline only
    tb_limit: float                 # limit of t*b(t); may be 0 or inf
    b_integrable: bool              # b in L1(R+)
    recip_b_integrable: bool        # 1/b in L1(R+)

    @property
    def is_effective_family(self) -> bool:
        return self.label in (EFFECTIVE, OVER_DAMPING)


@functools.lru_cache(maxsize=256)
def classify_regime(profile: CoefficientProfile,
                    horizon: float = 1e8) -> RegimeClass:
    """Classify the dissipation regime of a profile.

    Non-effective when lim t*b(t) < 1; borderline (with mu_eff) when the
    limit is finite and >= 1; effective when t*b(t) -> inf; over-damping
    when additionally 1/b is integrable.  Built-in kinds are classified
    analytically; custom profiles are sampled up to the horizon.
    """
    k = profile.kind
    if k == "zero" or (k == "constant" and profile.b0 == 0.0):
        return RegimeClass(NON_EFFECTIVE, None, 0.0, True, False)
    if k == "constant":
        return RegimeClass(EFFECTIVE, None, math.inf, False, False)
    if k == "scale_invariant":
        mu = profile.mu
        if mu == 0.0:
            return RegimeClass(NON_EFFECTIVE, None, 0.0, True, False)
        if mu < 1.0:
            return RegimeClass(NON_EFFECTIVE, None, mu, False, False)
        return RegimeClass(BORDERLINE, mu, mu, False, False)
    if k == "power":
        od = profile.kappa > 1.0
        return RegimeClass(OVER_DAMPING if od else EFFECTIVE, None, math.inf,
                           False, od)
    if k == "iterated_log":
        return RegimeClass(NON_EFFECTIVE, None, 0.0, False, False)
    if k == "integrable":
        return RegimeClass(NON_EFFECTIVE, None, 0.0, True, False)

    # custom: declared asymptotics first, sampling second
    if profile.tb_limit is not None:
        L = profile.tb_limit
        if math.isinf(L):
            ri = _recip_integrable_sampled(profile, horizon)
            return RegimeClass(OVER_DAMPING if ri else EFFECTIVE, None,
                               math.inf, False, ri)
        if L < 1.0:
            return RegimeClass(NON_EFFECTIVE, None, L, False, False)
        return RegimeClass(BORDERLINE, L, L, False, False)
    ts = np.geomspace(1.0, horizon, 25)
    tb = np.array([ti * profile.b_func(ti) for ti in ts])
    diffs = np.diff(tb)
    if np.all(diffs >= -1e-12 * np.abs(tb[1:])) and tb[-1] > 100.0:
        ri = _recip_integrable_sampled(profile, horizon)
        return RegimeClass(OVER_DAMPING if ri else EFFECTIVE, None, math.inf,
                           False, ri)
    tail = tb[-8:]
    if np.max(tail) - np.min(tail) < 1e-3 * max(1.0, abs(tail[-1])):
        L = float(tail[-1])
        if L < 1.0:
            return RegimeClass(NON_EFFECTIVE, None, L, False, False)
        return RegimeClass(BORDERLINE, L, L, False, False)
    raise UnclassifiableError(
        "sampled t*b(t) neither converges nor diverges monotonically "
        f"over horizon {horizon:g}")


def _recip_integrable_sampled(profile: CoefficientProfile, horizon: float) -> bool:
    r1 = _quad(lambda s: 1.0 / profile.b_func(s), 0.0, horizon / 4.0, 1e-8)
    r2 = _quad(lambda s: 1.0 / profile.b_func(s), horizon / 4.0, horizon, 1e-8)
    return r2 < 0.01 * (1.0 + r1)


# ---------------------------------------------------------------------------
# hypothesis checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HypothesisReport:
    """Empirical constants C_k and structural flags over a sample set."""

    constants: dict[int, float]     # k -> smallest empirical C_k
    positive_ok: bool               # b(t) >= 0 on all samples
    monotone_ok: bool               # sampled monotonicity consistent
    excluded: tuple[float, ...]     # samples with b(t) = 0, excluded from C_k
    n_samples: int

    @property
    def all_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.constants.values())


def check_hypotheses(profile: CoefficientProfile, t_samples,
                     k_max: int = 2) -> HypothesisReport:
    """Empirical C_k = max |b^(k)(t)| (1+t)^k / b(t) over the samples.

    Samples with b(t) = 0 are excluded from the ratio and reported.
    """
    ts = sorted(float(t) for t in t_samples)
    if not ts:
        raise DomainError("need a nonempty sample list")
    if k_max > 3:
        raise DomainError("k_max must be <= 3")
    bvals = [eval_b(profile, t) for t in ts]
    positive_ok = all(v >= 0.0 for v in bvals)
    diffs = [bvals[i + 1] - bvals[i] for i in range(len(bvals) - 1)]
    monotone_ok = all(d <= 1e-12 for d in diffs) or all(d >= -1e-12 for d in diffs)
    excluded = tuple(t for t, v in zip(ts, bvals) if v == 0.0)
    constants: dict[int, float] = {}
    for k in range(1, k_max + 1):
        best = 0.0
        for t, v in zip(ts, bvals):
            if v == 0.0:
                continue
            best = max(best, abs(eval_b_derivative(profile, t, k)) * (1.0 + t) ** k / v)
        constants[k] = best
    return HypothesisReport(constants, positive_ok, monotone_ok, excluded, len(ts))


def is_nonincreasing(profile: CoefficientProfile) -> bool:
    """Analytic monotonicity direction for built-ins; declared for custom."""
    k = profile.kind
    if k in ("zero", "constant"):
        return True
    if k in ("scale_invariant", "iterated_log", "integrable"):
        return True
    if k == "power":
        return profile.kappa <= 0.0
    return profile.monotone == "nonincreasing"
