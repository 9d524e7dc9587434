"""Operator-norm decay curves, exponent fits and predicted rates.

The multipliers depend on |xi| only, so operator norms over L^2 reduce to
the sup over xi >= 0 of the 2x2 matrix spectral norm (Plancherel).  The sup
is taken over an adaptively refined radial grid; the maximizer is tracked
per time and the grid refined around it until the max is stable to 1%.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .coefficients import (
    BORDERLINE,
    EFFECTIVE,
    NON_EFFECTIVE,
    OVER_DAMPING,
    CoefficientProfile,
    DomainError,
    RegimeError,
    classify_regime,
    eval_b,
    eval_log_lambda,
    eval_recip_primitive,
)
from .fundamental import energy_norms, solve_fundamental

FIT_MODELS = ("power_t", "power_shifted", "power_recip", "log_power")

#: quadratic-over-linear curvature ratio above which a fit is flagged as the
#: wrong model family
CURVATURE_THRESHOLD = 0.05

#: value floor keeping decay curves positive after dead-mode padding
VALUE_FLOOR = 1e-300


@dataclass(frozen=True)
class RateQuery:
    """An L^p -> L^q question on the conjugate line pq = p + q.

    q = math.inf encodes the (1, infinity) endpoint.  r_p defaults to the
    smallest admissible regularity order plus 1/2.
    """

    n: int
    p: float = 2.0
    q: float = 2.0
    r_p: float | None = None
    k: int = 0
    alpha_order: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("space dimension n must be >= 1")
        if not (1.0 <= self.p <= 2.0):
            raise DomainError("p must lie in [1, 2]")
        if not (2.0 <= self.q):
            raise DomainError("q must lie in [2, inf]")
        if math.isinf(self.q):
            if self.p != 1.0:
                raise DomainError("q = inf requires p = 1 on the conjugate line")
        elif abs(self.p * self.q - (self.p + self.q)) > 1e-9:
            raise DomainError("indices must satisfy pq = p + q")
        if self.k < 0 or self.alpha_order < 0:
            raise DomainError("derivative orders must be >= 0")
        if self.r_p is not None and self.r_p <= self.n * self.dual_gap:
            raise DomainError("regularity order r_p must exceed n(1/p - 1/q)")

    @property
    def dual_gap(self) -> float:
        """1/p - 1/q."""
        inv_q = 0.0 if math.isinf(self.q) else 1.0 / self.q
        return 1.0 / self.p - inv_q

    @property
    def regularity(self) -> float:
        return self.r_p if self.r_p is not None else self.n * self.dual_gap + 0.5


@dataclass(frozen=True)
class DecayCurve:
    """An operator-norm surrogate sampled over increasing times."""

    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.size != v.size:
            raise DomainError("times and values must be 1-d of equal length")
        if np.any(np.diff(t) <= 0):
            raise DomainError("times must be strictly increasing")
        if np.any(~np.isfinite(v)) or np.any(v <= 0):
            raise DomainError("values must be finite and positive")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FitResult:
    """Least-squares exponent in log coordinates with diagnostics."""

    model: str
    exponent: float
    intercept: float
    residual_rms: float
    window: tuple[float, float]
    curvature: float
    rejected: bool
    n_points: int
    log_depth: int = 1


@dataclass(frozen=True)
class RatePrediction:
    """A predicted rate: callable plus the estimate that produced it."""

    rate: Callable[[float], float]
    anchor: str
    description: str
    scale: str                      # natural fit model of the prediction
    exponent: float | None          # exponent in that scale, when it exists
    flag: str | None = None
    p_star: float | None = None
    alt_exponent: float | None = None


@dataclass(frozen=True)
class SharpnessResult:
    curve: DecayCurve               # amplified curve
    amplifier: str
    band: tuple[float, float]
    ratio: float
    verdict: str


@dataclass(frozen=True)
class HigherOrderPoint:
    t: float
    value: float
    predicted_value: float
    predicted_exponent: float
    k: int
    alpha_order: int
    anchor: str


# ---------------------------------------------------------------------------
# sup over xi machinery
# ---------------------------------------------------------------------------

def default_xi_grid(profile: CoefficientProfile, n: int = 24,
                    xi_min: float = 1e-3, xi_max: float | None = None):
    if xi_max is None:
        xi_max = max(10.0, 5.0 * eval_b(profile, 0.0))
    return [0.0] + list(np.geomspace(xi_min, xi_max, n))


def _insert_neighbors(grid: list[float], idx: int) -> set[float]:
    """Midpoints around grid[idx]; geometric when both ends are positive."""
    new = set()
    for a, b in ((idx - 1, idx), (idx, idx + 1)):
        if 0 <= a and b < len(grid):
            lo, hi = grid[a], grid[b]
            mid = math.sqrt(lo * hi) if lo > 0 else 0.5 * (lo + hi)
            if lo < mid < hi:
                new.add(mid)
    return new


def sup_over_xi(value_fn: Callable[[float], np.ndarray], times,
                xi_grid, refine_rel: float = 0.01, max_rounds: int = 12):
    """Sup over an adaptively refined xi grid of value_fn(xi) per time.

    value_fn maps one xi to the sampled values over all times.  Refinement
    inserts neighbors of every per-time maximizer until the max changes by
    less than refine_rel everywhere; if the round budget runs out a warning
    brackets the max.  Returns (sup_values, n_evaluations, converged).
    """
    times = np.asarray(times, dtype=float)
    cache: dict[float, np.ndarray] = {}

    def get(x: float) -> np.ndarray:
        if x not in cache:
            cache[x] = value_fn(x)
        return cache[x]

    grid = sorted(set(float(x) for x in xi_grid))
    vals = np.array([get(x) for x in grid])
    mx = vals.max(axis=0)
    converged = False
    for _ in range(max_rounds):
        argmax = vals.argmax(axis=0)
        new: set[float] = set()
        for idx in set(argmax.tolist()):
            new |= _insert_neighbors(grid, idx)
        new -= set(grid)
        if not new:
            converged = True
            break
        grid = sorted(set(grid) | new)
        vals = np.array([get(x) for x in grid])
        new_mx = vals.max(axis=0)
        change = np.max(np.abs(new_mx - mx) / np.maximum(new_mx, VALUE_FLOOR))
        mx = new_mx
        if change < refine_rel:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"xi-refinement budget exhausted; max bracketed within "
            f"{refine_rel:.0%} band around {float(np.max(mx)):.6e}",
            RuntimeWarning)
    return mx, len(cache), converged


def _energy_norm_fn(profile: CoefficientProfile, times, tol: float):
    def fn(x: float) -> np.ndarray:
        pair = solve_fundamental(profile, x, 0.0, times, tol)
        return energy_norms(pair)
    return fn


def l2_norm_curve(profile: CoefficientProfile, times, xi_grid=None,
                  tol: float = 1e-8, refine_rel: float = 0.01,
                  max_rounds: int = 12) -> DecayCurve:
    """sup_xi of the spectral norm of E(t, xi) per time.

    The grid must span [0, xi_max]; it is refined near the maximizing xi
    until the max is stable to refine_rel.
    """
    times = np.asarray(times, dtype=float)
    if xi_grid is None:
        xi_grid = default_xi_grid(profile)
    mx, n_eval, converged = sup_over_xi(
        _energy_norm_fn(profile, times, tol), times, xi_grid,
        refine_rel, max_rounds)
    values = np.maximum(mx, VALUE_FLOOR)
    regime = classify_regime(profile).label
    return DecayCurve(times, values, meta={
        "norm": "l2_sup", "regime": regime, "n_xi_solves": n_eval,
        "refine_converged": converged, "solver_tol": tol})


def radial_l1_multiplier_norm(profile: CoefficientProfile, t: float, n: int,
                              tol: float = 1e-6) -> float:
    """int over the elliptic part of ||E(t, xi)|| xi^(n-1) dxi.

    The surface-measure constant of the radial reduction is omitted.
    Returns 0.0 (with a warning) when the elliptic part is empty at time t.
    """
    if n not in (1, 2, 3):
        raise DomainError("n must be 1, 2 or 3")
    regime = classify_regime(profile)
    if not regime.is_effective_family:
        raise RegimeError("the elliptic-part norm needs an effective-family "
                          f"profile, got {regime.label}")
    b_t = eval_b(profile, t)
    upper = 0.5 * b_t
    if upper <= 0.0:
        warnings.warn(f"empty elliptic part at t = {t}", RuntimeWarning)
        return 0.0

    solver_tol = max(tol * 1e-2, 1e-10)

    def integrand(x: float) -> float:
        pair = solve_fundamental(profile, x, 0.0, [t], solver_tol)
        return energy_norms(pair)[0] * x ** (n - 1)

    # the mass concentrates near xi ~ (1 + R(t))^(-1/2); give quad breakpoints
    try:
        r_t = eval_recip_primitive(profile, t, 1e-8)
        w = 1.0 / math.sqrt(1.0 + r_t)
    except DomainError:
        w = upper
    pts = sorted({min(w, upper * 0.5), min(3 * w, upper * 0.75)})
    val, err = quad(integrand, 0.0, upper, points=pts, limit=60,
                    epsabs=1e-13, epsrel=tol)
    if err > 10 * tol * max(abs(val), 1e-13):
        warnings.warn(f"elliptic-part quadrature achieved {err:.2e} "
                      f"(requested rel {tol:.1e})", RuntimeWarning)
    return float(val)


# ---------------------------------------------------------------------------
# decay-exponent fitting
# ---------------------------------------------------------------------------

def _iterlog_abscissa(t: np.ndarray, depth: int) -> np.ndarray:
    v = np.asarray(t, dtype=float)
    e_k = math.e
    for _ in range(depth - 1):
        e_k = math.exp(e_k)
    out = np.log(e_k + v)
    for _ in range(depth - 1):
        out = np.log(out)
    return out


def model_abscissa(model: str, times: np.ndarray,
                   profile: CoefficientProfile | None = None,
                   log_depth: int = 1) -> np.ndarray:
    """Log-transformed abscissa of a fit model."""
    t = np.asarray(times, dtype=float)
    if model == "power_t":
        if np.any(t <= 0):
            raise DomainError("power_t model needs t > 0")
        return np.log(t)
    if model == "power_shifted":
        return np.log1p(t)
    if model == "power_recip":
        if profile is None:
            raise DomainError("power_recip model needs the profile for R(t)")
        return np.log([1.0 + eval_recip_primitive(profile, ti) for ti in t])
    if model == "log_power":
        return np.log(_iterlog_abscissa(t, log_depth))
    raise DomainError(f"unknown fit model {model!r}")


def fit_decay(curve: DecayCurve, model: str = "power_shifted", window=None,
              profile: CoefficientProfile | None = None,
              log_depth: int = 1) -> FitResult:
    """Least-squares decay exponent of the curve in log coordinates.

    The curvature statistic |c2| span^2 / max(|c1| span, 1) from a quadratic
    fit flags the wrong model family when it exceeds CURVATURE_THRESHOLD;
    the fit is still reported, with rejected = True.
    """
    t = curve.times
    v = curve.values
    if window is None:
        window = (t[-1] / 10.0, t[-1])
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise DomainError("degenerate fit window")
    mask = (t >= lo) & (t <= hi)
    if np.count_nonzero(mask) < 5:
        raise DomainError("need at least 5 points inside the fit window")
    tw, vw = t[mask], v[mask]
    if np.any(vw <= VALUE_FLOOR * 10):
        raise DomainError("window contains floored (vanished) values")
    x = model_abscissa(model, tw, profile, log_depth)
    y = np.log(vw)
    span = float(x.max() - x.min())
    if span <= 0:
        raise DomainError("fit abscissa has zero span")
    xs = x - x.mean()
    c2, c1, _c0 = np.polyfit(xs, y, 2)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    curvature = abs(c2) * span ** 2 / max(abs(c1) * span, 1.0)
    return FitResult(
        model=model, exponent=float(slope), intercept=float(intercept),
        residual_rms=float(np.sqrt(np.mean(resid ** 2))),
        window=(lo, hi), curvature=float(curvature),
        rejected=bool(curvature > CURVATURE_THRESHOLD),
        n_points=int(np.count_nonzero(mask)), log_depth=log_depth)


def fit_decay_auto(curve: DecayCurve, profile: CoefficientProfile | None = None,
                   window=None) -> FitResult:
    """power_shifted fit, switching to log_power when curvature rejects it."""
    first = fit_decay(curve, "power_shifted", window, profile)
    if not first.rejected:
        return first
    return fit_decay(curve, "log_power", window, profile)


# ---------------------------------------------------------------------------
# predicted rates
# ---------------------------------------------------------------------------

def _maxform_exponent(n: int, dual_gap: float, mu: float) -> float:
    return max(-(n - 1) / 2.0 * dual_gap - mu / 2.0, -n * dual_gap - 1.0)


def predicted_energy_rate(profile: CoefficientProfile,
                          query: RateQuery) -> RatePrediction:
    """Predicted decay of the energy operator norm for the query indices.

    Non-effective: lambda(t)^-1 (1+t)^(-(n-1)/2 (1/p - 1/q)).
    Borderline scale-invariant: the max-form power of (1+t).
    Effective: (1 + R(t))^(-n/2 (1/p - 1/q) - 1/2).
    Over-damping: the constant rate 1, flagged.
    """
    regime = classify_regime(profile)
    D = query.dual_gap
    n = query.n
    if regime.label == NON_EFFECTIVE:
        base = -(n - 1) / 2.0 * D

        def rate(t: float) -> float:
            return math.exp(-eval_log_lambda(profile, t)) * (1.0 + t) ** base

        expo = None
        if profile.kind == "scale_invariant":
            expo = base - profile.mu / 2.0
        elif profile.kind in ("zero", "integrable") or \
                (profile.kind == "constant" and profile.b0 == 0.0):
            expo = base
        return RatePrediction(rate, "noneffective-energy-estimate",
                              "free-wave structure damped by 1/lambda(t)",
                              "power_shifted", expo)
    if regime.label == BORDERLINE:
        mu = regime.mu_eff
        expo = _maxform_exponent(n, D, mu)
        alt = -(n - 1) / 2.0 * D - mu / 2.0
        return RatePrediction(lambda t: (1.0 + t) ** expo,
                              "scale-invariant-max-form",
                              "two-branch power for b = mu/(1+t)",
                              "power_shifted", expo,
                              flag="noneffective-convention-alongside",
                              alt_exponent=alt)
    if regime.label == OVER_DAMPING:
        return RatePrediction(lambda t: 1.0, "overdamping-bounded",
                              "no decay once 1/b is integrable",
                              "constant", 0.0, flag="upper-bound-only")
    expo = -n / 2.0 * D - 0.5

    def rate(t: float) -> float:
        return (1.0 + eval_recip_primitive(profile, t)) ** expo

    return RatePrediction(rate, "effective-energy-estimate",
                          "diffusion-scale power of 1 + int 1/b",
                          "power_recip", expo)


def _log_t_lambda_limit(profile: CoefficientProfile) -> float:
    """liminf of 1 - log_t lambda(t); closed for built-ins."""
    if profile.kind == "scale_invariant":
        return 1.0 - profile.mu / 2.0
    if profile.kind in ("zero", "integrable", "iterated_log") or \
            (profile.kind == "constant" and profile.b0 == 0.0):
        return 1.0
    # sampled estimate for custom non-effective profiles
    t = 1e6
    return 1.0 - eval_log_lambda(profile, t) / math.log(t)


def predicted_solution_rate(profile: CoefficientProfile,
                            query: RateQuery) -> RatePrediction:
    """Predicted decay of the solution operator norm, with critical p*."""
    regime = classify_regime(profile)
    D = query.dual_gap
    n = query.n
    if regime.label in (NON_EFFECTIVE, BORDERLINE):
        L = _log_t_lambda_limit(profile) if regime.label == NON_EFFECTIVE \
            else 1.0 - regime.mu_eff / 2.0
        inv_p_star = 0.5 + L / (n + 1.0)
        flag = None
        if not (0.5 <= inv_p_star <= 1.0):
            flag = "p-star-outside-[1,2]-single-branch"
        p_star = 1.0 / inv_p_star if inv_p_star > 0 else math.inf
        # p < p* means 1/p > 1/p*; outside [1, 2] only one branch survives
        if flag is None:
            low_branch = 1.0 / query.p > inv_p_star
        else:
            low_branch = inv_p_star < 0.5
        if low_branch:
            def rate(t: float) -> float:
                return math.exp(-eval_log_lambda(profile, t)) \
                    * (1.0 + t) ** (-(n - 1) / 2.0 * D)
            desc = "free-wave branch p < p*"
        else:
            def rate(t: float) -> float:
                return math.exp(-2.0 * eval_log_lambda(profile, t)) \
                    * (1.0 + t) ** (1.0 - n * D)
            desc = "dissipative-zone branch p >= p*"
        return RatePrediction(rate, "solution-estimate-noneffective", desc,
                              "power_shifted", None, flag=flag, p_star=p_star)
    expo = -n / 2.0 * D
    flag = "upper-bound-only" if regime.label == OVER_DAMPING else None

    def rate(t: float) -> float:
        return (1.0 + eval_recip_primitive(profile, t)) ** expo

    return RatePrediction(rate, "solution-estimate-effective",
                          "diffusion-scale power of 1 + int 1/b",
                          "power_recip", expo, flag=flag)


# ---------------------------------------------------------------------------
# higher order and sharpness
# ---------------------------------------------------------------------------

def higher_order_check(profile: CoefficientProfile, t: float, k: int,
                       alpha_order: int, xi_grid=None,
                       tol: float = 1e-8) -> HigherOrderPoint:
    """sup_xi of the order-(k, alpha) solution-multiplier row norm at time t,
    paired with the (1 + R(t))-power predicted for L^2 -> L^2.

    The row is xi^alpha (D_t^k Phi1, bracket * D_t^k Phi2) against data
    normalization bracket^(k + alpha); D_t^k is taken from the equation
    itself (D_t^2 Phi = b Phi' + xi^2 Phi).
    """
    if k > 2:
        raise DomainError("k <= 2 supported")
    regime = classify_regime(profile)
    if not regime.is_effective_family:
        raise RegimeError("higher-order rate comparison needs an "
                          "effective-family profile")
    if xi_grid is None:
        xi_grid = default_xi_grid(profile)

    def value_fn(x: float) -> np.ndarray:
        pair = solve_fundamental(profile, x, 0.0, [t], tol)
        br = pair.bracket
        rows = []
        for (p, dp) in ((pair.phi1, pair.dphi1), (pair.phi2, pair.dphi2)):
            if k == 0:
                m = p
            elif k == 1:
                m = -1j * dp
            else:
                b_t = eval_b(profile, np.asarray([t]))
                m = b_t * dp + x * x * p
            rows.append(m[0])
        w = x ** alpha_order / br ** (k + alpha_order)
        return np.array([w * math.hypot(abs(rows[0]), br * abs(rows[1]))])

    mx, _, _ = sup_over_xi(value_fn, [t], xi_grid)
    value = float(mx[0])
    # L2 -> L2 pairing: the -n/2 (1/p - 1/q) term vanishes at p = q = 2
    pred_expo = -k - alpha_order / 2.0
    r_t = eval_recip_primitive(profile, t)
    return HigherOrderPoint(
        t=t, value=value, predicted_value=(1.0 + r_t) ** pred_expo,
        predicted_exponent=pred_expo, k=k, alpha_order=alpha_order,
        anchor="matsumura-higher-order")


def sharpness_probe(profile: CoefficientProfile, times, xi_grid=None,
                    tol: float = 1e-8, band_limit: float = 10.0) -> SharpnessResult:
    """Amplified norm curve testing two-sided boundedness.

    Non-effective: amplifier lambda(t); effective (not over-damping):
    amplifier sqrt(1 + R(t)).  Verdict "two-sided-bounded" when the
    amplified curve stays inside a band of ratio <= band_limit.
    """
    regime = classify_regime(profile)
    if regime.label == OVER_DAMPING:
        raise RegimeError("over-damping profiles keep a nonzero limit; "
                          "use asymptotics.overdamping_state")
    curve = l2_norm_curve(profile, times, xi_grid, tol)
    if regime.label == NON_EFFECTIVE or (
            regime.label == BORDERLINE and regime.mu_eff <= 2.0):
        amp_name = "lambda"
        amp = np.exp([eval_log_lambda(profile, t) for t in curve.times])
    else:
        amp_name = "sqrt(1+R)"
        amp = np.sqrt([1.0 + eval_recip_primitive(profile, t)
                       for t in curve.times])
    vals = curve.values * amp
    band = (float(vals.min()), float(vals.max()))
    ratio = band[1] / band[0]
    verdict = "two-sided-bounded" if ratio <= band_limit else "unbounded-band"
    amplified = DecayCurve(curve.times, vals, meta={
        "norm": "l2_sup_amplified", "amplifier": amp_name, **curve.meta})
    return SharpnessResult(amplified, amp_name, band, float(ratio), verdict)
