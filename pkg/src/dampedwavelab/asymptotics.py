"""Long-time asymptotics: scattering, diffusion surrogate, over-damping.

Three limit objects are computed per frequency, each with an explicit
convergence certificate (monotone decreasing Cauchy differences over probe
times; no extrapolation is trusted without it):

* the wave-operator limit lambda(t) E0(t, xi)^{-1} E(t, xi) for weak
  (non-effective) damping,
* the discrepancy against the parabolic surrogate multiplier
  exp(-xi^2 R(t)) for effective damping,
* the asymptotic state of the solution multiplier in the over-damping case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

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
    recip_primitive_limit,
)
from .fundamental import (
    energy_matrices,
    energy_norms,
    solve_fundamental,
)
from .rates import DecayCurve, VALUE_FLOOR, sup_over_xi

#: free-propagator unitarity is asserted this tightly at every probe
UNITARITY_LIMIT = 1e-12


@dataclass(frozen=True)
class WaveOperatorEstimate:
    """W_+(xi) approximations at increasing probe times."""

    xi: float
    probe_times: np.ndarray
    iterates: np.ndarray            # (n_probes, 2, 2) complex
    cauchy_diffs: np.ndarray        # max-abs differences of consecutive iterates
    certified: bool                 # diffs decreasing over the last probes

    @property
    def w_plus(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def determinant(self) -> complex:
        m = self.w_plus
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


@dataclass(frozen=True)
class DiffusionReport:
    """Hyperbolic-vs-parabolic multiplier discrepancies over a xi window."""

    t: float
    t_ref: float
    xi_window: np.ndarray
    raw: np.ndarray                 # |Phi1 - exp(-xi^2 R)|
    corrected: np.ndarray           # amplitude-matched at t_ref
    raw_relative: np.ndarray
    corrected_relative: np.ndarray

    @property
    def sup_raw(self) -> float:
        return float(np.max(self.raw))

    @property
    def sup_corrected(self) -> float:
        return float(np.max(self.corrected))


@dataclass(frozen=True)
class AsymptoticState:
    """Per-xi limits of the solution multiplier row with certificates."""

    xi_grid: np.ndarray
    limits: np.ndarray              # (n_xi, 2) complex row limits
    data_limits: np.ndarray         # limits applied to the requested data
    diffs: np.ndarray               # (n_xi, n_probes-1) successive differences
    certified: np.ndarray           # per-xi monotone-decreasing certificate
    probe_times: np.ndarray


def _free_inverse(xi: float, t: float) -> np.ndarray:
    """E0(t, xi)^{-1} = conjugate transpose; unitarity asserted."""
    c, s = math.cos(t * xi), math.sin(t * xi)
    e0 = np.array([[c, 1j * s], [1j * s, c]])
    gram = e0.conj().T @ e0
    if np.max(np.abs(gram - np.eye(2))) > UNITARITY_LIMIT:
        raise AssertionError("free propagator lost unitarity")
    return e0.conj().T


def wave_operator_approx(profile: CoefficientProfile, xi, probe_times,
                         tol: float = 1e-10) -> WaveOperatorEstimate:
    """Evaluate lambda(t) E0(t, xi)^{-1} E(t, xi) at the probe times.

    Needs a non-effective (or borderline) profile and at least 4 increasing
    probes.  A missing certificate is a result, not an exception.
    """
    regime = classify_regime(profile)
    if regime.label not in (NON_EFFECTIVE, BORDERLINE):
        raise RegimeError(f"wave operators need weak damping, got {regime.label}")
    probes = np.asarray(probe_times, dtype=float)
    if probes.size < 4 or np.any(np.diff(probes) <= 0):
        raise DomainError("need >= 4 increasing probe times")
    x = xi.xi if hasattr(xi, "xi") else float(xi)
    pair = solve_fundamental(profile, x, 0.0, probes, tol)
    mats = energy_matrices(pair)
    iterates = np.empty_like(mats)
    for i, t in enumerate(probes):
        lam = math.exp(eval_log_lambda(profile, t))
        iterates[i] = lam * (_free_inverse(x, t) @ mats[i])
    diffs = np.array([np.max(np.abs(iterates[i + 1] - iterates[i]))
                      for i in range(len(probes) - 1)])
    certified = bool(diffs.size >= 2 and np.all(np.diff(diffs[-3:]) < 0))
    return WaveOperatorEstimate(x, probes, iterates, diffs, certified)


def parabolic_multiplier(profile: CoefficientProfile, xi, t: float,
                         tol: float = 1e-10) -> float:
    """exp(-xi^2 R(t)), the multiplier of b(t) w_t = Lap w."""
    x = xi.xi if hasattr(xi, "xi") else float(xi)
    if t == 0.0:
        return 1.0
    return math.exp(-x * x * eval_recip_primitive(profile, t, tol))


def diffusion_discrepancy(profile: CoefficientProfile, xi_window, t: float,
                          tol: float = 1e-10,
                          t_ref: float | None = None) -> DiffusionReport:
    """Discrepancy of Phi1(t, xi) against the parabolic multiplier.

    For data (1, 0) both the raw comparison and a corrected variant are
    reported; the corrected one rescales the parabolic multiplier by the
    amplitude ratio measured at the reference time t_ref (default t/10).
    The window must lie inside the elliptic part at time t.
    """
    regime = classify_regime(profile)
    if not regime.is_effective_family or regime.label == OVER_DAMPING:
        raise RegimeError("diffusion comparison needs an effective, "
                          f"non-over-damping profile, got {regime.label}")
    xs = np.asarray(xi_window, dtype=float)
    if xs.ndim != 1 or xs.size == 0:
        raise DomainError("xi_window must be a nonempty 1-d array")
    b_t = eval_b(profile, t)
    if np.any(2.0 * xs > b_t):
        raise DomainError(f"window exits the elliptic part at t = {t} "
                          f"(needs 2 xi <= b = {b_t:.6g})")
    if t_ref is None:
        t_ref = max(t / 10.0, 1.0)
    if not 0 < t_ref < t:
        raise DomainError("t_ref must lie in (0, t)")
    raw = np.empty_like(xs)
    corrected = np.empty_like(xs)
    raw_rel = np.empty_like(xs)
    corr_rel = np.empty_like(xs)
    for i, x in enumerate(xs):
        pair = solve_fundamental(profile, x, 0.0, [t_ref, t], tol)
        phi_ref, phi_t = pair.phi1
        pm_ref = parabolic_multiplier(profile, x, t_ref, tol)
        pm_t = parabolic_multiplier(profile, x, t, tol)
        amp = phi_ref / pm_ref
        raw[i] = abs(phi_t - pm_t)
        corrected[i] = abs(phi_t - amp * pm_t)
        scale = max(abs(pm_t), VALUE_FLOOR)
        raw_rel[i] = raw[i] / scale
        corr_rel[i] = corrected[i] / max(abs(amp * pm_t), VALUE_FLOOR)
    return DiffusionReport(t, t_ref, xs, raw, corrected, raw_rel, corr_rel)


def overdamping_state(profile: CoefficientProfile, xi_grid,
                      tol: float = 1e-10, data=(1.0, 0.0),
                      probe_times=None) -> AsymptoticState:
    """Per-xi limits of the solution multiplier row for over-damping.

    Probes default to a geometric ladder; the last iterate is refined by
    the R(infinity)-informed factor exp(-xi^2 (R(inf) - R(t_last))), and
    certificates are monotone decreasing successive differences.
    """
    regime = classify_regime(profile)
    if regime.label != OVER_DAMPING:
        raise RegimeError(f"over-damping profile required, got {regime.label}")
    xs = np.asarray(xi_grid, dtype=float)
    if probe_times is None:
        probe_times = np.geomspace(10.0, 1e4, 5)
    probes = np.asarray(probe_times, dtype=float)
    if probes.size < 3:
        raise DomainError("need >= 3 probe times")
    r_inf = recip_primitive_limit(profile)
    r_last = eval_recip_primitive(profile, probes[-1], tol) \
        if math.isfinite(r_inf) else math.nan
    u1, u2 = complex(data[0]), complex(data[1])
    limits = np.empty((xs.size, 2), dtype=complex)
    data_limits = np.empty(xs.size, dtype=complex)
    diffs = np.empty((xs.size, probes.size - 1))
    certified = np.empty(xs.size, dtype=bool)
    for i, x in enumerate(xs):
        pair = solve_fundamental(profile, x, 0.0, probes, tol)
        br = pair.bracket
        rows = np.stack([pair.phi1, br * pair.phi2], axis=1)
        d = np.max(np.abs(np.diff(rows, axis=0)), axis=1)
        tail_factor = 1.0
        if math.isfinite(r_inf):
            tail_factor = math.exp(-x * x * (r_inf - r_last))
        limits[i] = rows[-1] * tail_factor
        data_limits[i] = limits[i, 0] * u1 + limits[i, 1] * (u2 / br)
        diffs[i] = d
        # each successive difference must shrink, except once it has fallen
        # below what the solver can resolve (convergence reached earlier)
        floor = 10.0 * tol * max(1.0, float(np.max(np.abs(rows))))
        certified[i] = bool(np.all((np.diff(d) < 0) | (d[1:] <= floor)))
    return AsymptoticState(xs, limits, data_limits, diffs, certified, probes)


def frequency_truncated_decay(profile: CoefficientProfile, c_cut: float,
                              times, tol: float = 1e-8):
    """sup_{xi >= c_cut} ||E(t, xi)|| and the improvement verdict.

    Needs an effective profile with 1/b not integrable.  Verdict
    "improved" when the amplified curve sqrt(1 + R(t)) * value decreases
    to below a fifth of its initial value over the window.
    """
    if c_cut <= 0:
        raise DomainError("c_cut must be > 0")
    regime = classify_regime(profile)
    if regime.label != EFFECTIVE:
        raise RegimeError("frequency truncation needs an effective profile "
                          f"with 1/b not integrable, got {regime.label}")
    ts = np.asarray(times, dtype=float)
    xi_max = max(10.0, 5.0 * eval_b(profile, 0.0), 2.0 * c_cut)
    grid = list(np.geomspace(c_cut, xi_max, 24))

    def value_fn(x: float) -> np.ndarray:
        pair = solve_fundamental(profile, x, 0.0, ts, tol)
        return energy_norms(pair)

    mx, n_eval, converged = sup_over_xi(value_fn, ts, grid)
    values = np.maximum(mx, VALUE_FLOOR)
    curve = DecayCurve(ts, values, meta={
        "norm": "l2_sup_truncated", "c_cut": c_cut,
        "n_xi_solves": n_eval, "refine_converged": converged})
    amp = np.sqrt([1.0 + eval_recip_primitive(profile, t) for t in ts])
    amplified = amp * values
    improved = bool(amplified[-1] < 0.2 * amplified[0])
    verdict = "improved" if improved else "no-improvement"
    return curve, verdict
