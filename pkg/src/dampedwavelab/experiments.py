"""Experiment configs, runners and machine-readable reports.

A bundle config is a JSON document (schema_version 1) holding a list of
named experiments.  Each experiment fixes a coefficient profile, grids,
queries and tolerances, runs one verification kind, and produces CSV
curves plus a structured summary with predicted-vs-fitted comparison rows.
Identical config and seed reproduce byte-identical CSV output.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import tempfile
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import coefficients as coeffs
from .coefficients import (
    CoefficientProfile,
    check_hypotheses,
    classify_regime,
    eval_b,
)
from .asymptotics import (
    diffusion_discrepancy,
    frequency_truncated_decay,
    overdamping_state,
    wave_operator_approx,
)
from .fundamental import (
    oracle_constant,
    oracle_scale_invariant,
    solve_fundamental,
)
from .rates import (
    DecayCurve,
    RateQuery,
    fit_decay,
    higher_order_check,
    l2_norm_curve,
    predicted_energy_rate,
    sharpness_probe,
)
from .zones import ZoneConfig, separating_curve, zone_map

SCHEMA_VERSION = 1

EXPERIMENT_KINDS = (
    "NormCurve", "ZoneMap", "Sharpness", "WaveOperator", "Diffusion",
    "OverDamping", "HypothesisCheck", "OracleCrosscheck", "HigherOrder",
)

#: default tolerances, echoed into every parsed config so that pass/fail
#: rows always read their tolerance from the config, never from code
DEFAULT_TOLERANCES = {
    "solver": 1e-8,
    "quadrature": 1e-8,
    "oracle": 1e-8,
    "exponent": 0.05,
    "diffusion": 0.05,
    "band_ratio": 10.0,
    "nonzero_floor": 1e-8,
    "lower_bound": 0.01,
    "improvement_factor": 5.0,
    "hypothesis_constant": 1e6,
}

ENV_OUT_DIR = "DAMPEDWAVELAB_OUT"


class ConfigError(ValueError):
    """Invalid configuration; carries per-field error messages."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


# ---------------------------------------------------------------------------
# config model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    start: float
    stop: float
    count: int
    spacing: str = "log"

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class XiGrid:
    minimum: float = 1e-3
    maximum: float = 10.0
    count: int = 24
    refine_budget: int = 12

    def values(self, include_zero: bool = True) -> list[float]:
        g = list(np.geomspace(self.minimum, self.maximum, self.count))
        return ([0.0] + g) if include_zero else g


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: str
    coefficient: dict
    time_grid: TimeGrid | None = None
    xi_grid: XiGrid = XiGrid()
    queries: tuple[RateQuery, ...] = ()
    tolerances: dict = field(default_factory=dict)
    fit_model: str = "auto"
    params: dict = field(default_factory=dict)

    def profile(self) -> CoefficientProfile:
        return profile_from_dict(self.coefficient)


@dataclass(frozen=True)
class BundleConfig:
    experiments: tuple[ExperimentConfig, ...]
    seed: int = 0
    out_dir: str = "results"
    schema_version: int = SCHEMA_VERSION


@dataclass
class ComparisonRow:
    quantity: str
    anchor: str
    predicted: float
    fitted: float
    difference: float
    tolerance: float
    passed: bool


@dataclass
class ExperimentReport:
    name: str
    kind: str
    config_echo: dict
    records: dict = field(default_factory=dict)
    comparisons: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)          # key -> DecayCurve
    zone_grids: dict = field(default_factory=dict)      # key -> (t, xi, labels)
    invariant_failures: list = field(default_factory=list)
    error: str | None = None


@dataclass
class ReportBundle:
    reports: list
    seed: int
    environment: dict

    @property
    def any_invariant_failure(self) -> bool:
        return any(r.invariant_failures or r.error for r in self.reports)

    @property
    def any_comparison_failure(self) -> bool:
        return any(not row.passed for r in self.reports for row in r.comparisons)

    def exit_code(self) -> int:
        if self.any_invariant_failure:
            return 3
        if self.any_comparison_failure:
            return 2
        return 0


# ---------------------------------------------------------------------------
# parsing and serialization
# ---------------------------------------------------------------------------

_PROFILE_FIELDS = {
    "zero": (),
    "constant": ("b0",),
    "scale_invariant": ("mu",),
    "power": ("c", "kappa"),
    "iterated_log": ("mu", "depth"),
    "integrable": ("c", "sigma"),
}


def profile_from_dict(d: dict) -> CoefficientProfile:
    kind = d.get("kind")
    if kind not in _PROFILE_FIELDS:
        raise ConfigError([f"coefficient.kind: unknown kind {kind!r}"])
    kwargs = {k: d[k] for k in _PROFILE_FIELDS[kind] if k in d}
    missing = [k for k in _PROFILE_FIELDS[kind] if k not in d]
    if missing:
        raise ConfigError([f"coefficient.{k}: required for kind {kind!r}"
                           for k in missing])
    factory = getattr(coeffs, kind)
    return factory(**kwargs)


def _query_from_dict(d: dict, path: str, issues: list) -> RateQuery | None:
    try:
        q = d.get("q", 2.0)
        if isinstance(q, str):
            q = math.inf if q in ("inf", "infinity") else float(q)
        return RateQuery(n=int(d.get("n", 1)), p=float(d.get("p", 2.0)), q=q,
                         r_p=d.get("r_p"), k=int(d.get("k", 0)),
                         alpha_order=int(d.get("alpha_order", 0)))
    except (ValueError, TypeError) as exc:
        issues.append(f"{path}: {exc}")
        return None


def parse_experiment(d: dict, path: str, issues: list) -> ExperimentConfig | None:
    if not isinstance(d, dict):
        issues.append(f"{path}: experiment must be an object")
        return None
    name = d.get("name")
    if not name or not isinstance(name, str):
        issues.append(f"{path}.name: required string")
        return None
    kind = d.get("kind")
    if kind not in EXPERIMENT_KINDS:
        issues.append(f"{path}.kind: unknown experiment kind {kind!r}")
        return None
    coeff = d.get("coefficient")
    if not isinstance(coeff, dict):
        issues.append(f"{path}.coefficient: required object")
        return None
    try:
        profile_from_dict(coeff)
    except ConfigError as exc:
        issues.extend(f"{path}.{m}" for m in exc.issues)
        return None
    except coeffs.DomainError as exc:
        issues.append(f"{path}.coefficient: {exc}")
        return None

    tg = None
    if "time_grid" in d:
        g = d["time_grid"]
        try:
            tg = TimeGrid(float(g["start"]), float(g["stop"]),
                          int(g.get("count", 13)), g.get("spacing", "log"))
            if tg.start <= 0 and tg.spacing == "log":
                issues.append(f"{path}.time_grid.start: must be > 0 for log spacing")
            if tg.stop <= tg.start:
                issues.append(f"{path}.time_grid.stop: must exceed start")
            if tg.count < 2:
                issues.append(f"{path}.time_grid.count: must be >= 2")
        except (KeyError, ValueError, TypeError) as exc:
            issues.append(f"{path}.time_grid: {exc!r}")
            return None
    xg = XiGrid()
    if "xi_grid" in d:
        g = d["xi_grid"]
        try:
            xg = XiGrid(float(g.get("min", 1e-3)), float(g.get("max", 10.0)),
                        int(g.get("count", 24)), int(g.get("refine_budget", 12)))
            if not 0 < xg.minimum < xg.maximum:
                issues.append(f"{path}.xi_grid: need 0 < min < max")
            if xg.count < 4:
                issues.append(f"{path}.xi_grid.count: must be >= 4")
        except (ValueError, TypeError) as exc:
            issues.append(f"{path}.xi_grid: {exc!r}")
            return None
    queries = []
    for i, qd in enumerate(d.get("queries", [])):
        q = _query_from_dict(qd, f"{path}.queries[{i}]", issues)
        if q is not None:
            queries.append(q)
    tol = dict(DEFAULT_TOLERANCES)
    for key, val in d.get("tolerances", {}).items():
        if key not in DEFAULT_TOLERANCES:
            issues.append(f"{path}.tolerances.{key}: unknown tolerance")
            continue
        try:
            val = float(val)
        except (TypeError, ValueError):
            issues.append(f"{path}.tolerances.{key}: must be a number")
            continue
        if val <= 0:
            issues.append(f"{path}.tolerances.{key}: must be > 0")
        tol[key] = val
    return ExperimentConfig(
        name=name, kind=kind, coefficient=dict(coeff), time_grid=tg,
        xi_grid=xg, queries=tuple(queries), tolerances=tol,
        fit_model=d.get("fit_model", "auto"), params=dict(d.get("params", {})))


def parse_bundle(obj: dict) -> BundleConfig:
    issues: list[str] = []
    if not isinstance(obj, dict):
        raise ConfigError(["root: config must be a JSON object"])
    if obj.get("schema_version") != SCHEMA_VERSION:
        issues.append(f"schema_version: expected {SCHEMA_VERSION}, "
                      f"got {obj.get('schema_version')!r}")
    exps_raw = obj.get("experiments")
    if not isinstance(exps_raw, list) or not exps_raw:
        issues.append("experiments: required nonempty list")
        exps_raw = []
    exps = []
    names = set()
    for i, d in enumerate(exps_raw):
        e = parse_experiment(d, f"experiments[{i}]", issues)
        if e is not None:
            if e.name in names:
                issues.append(f"experiments[{i}].name: duplicate {e.name!r}")
            names.add(e.name)
            exps.append(e)
    seed = obj.get("seed", 0)
    if not isinstance(seed, int):
        issues.append("seed: must be an integer")
        seed = 0
    out_dir = obj.get("out_dir", "results")
    if issues:
        raise ConfigError(issues)
    return BundleConfig(tuple(exps), seed=seed, out_dir=out_dir)


def load_bundle(path: str) -> BundleConfig:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"root: invalid JSON ({exc})"])
    return parse_bundle(obj)


def bundle_to_dict(cfg: BundleConfig) -> dict:
    def query_dict(q: RateQuery) -> dict:
        d = {"n": q.n, "p": q.p, "q": "inf" if math.isinf(q.q) else q.q}
        if q.r_p is not None:
            d["r_p"] = q.r_p
        if q.k:
            d["k"] = q.k
        if q.alpha_order:
            d["alpha_order"] = q.alpha_order
        return d

    out = {"schema_version": cfg.schema_version, "seed": cfg.seed,
           "out_dir": cfg.out_dir, "experiments": []}
    for e in cfg.experiments:
        d = {"name": e.name, "kind": e.kind, "coefficient": e.coefficient,
             "xi_grid": {"min": e.xi_grid.minimum, "max": e.xi_grid.maximum,
                         "count": e.xi_grid.count,
                         "refine_budget": e.xi_grid.refine_budget},
             "tolerances": e.tolerances, "fit_model": e.fit_model,
             "params": e.params,
             "queries": [query_dict(q) for q in e.queries]}
        if e.time_grid is not None:
            d["time_grid"] = {"start": e.time_grid.start,
                              "stop": e.time_grid.stop,
                              "count": e.time_grid.count,
                              "spacing": e.time_grid.spacing}
        out["experiments"].append(d)
    return out


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

def _experiment_rng(bundle_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([bundle_seed, zlib.crc32(name.encode())])


def _natural_fit(profile: CoefficientProfile, query: RateQuery):
    """(fit model, predicted exponent, log depth, anchor) for the norm curve.

    Translates the regime prediction into the scale a log-space fit can
    recover: powers of (1+t) where lambda or R is power-like, iterated-log
    powers for the logarithmic families.  Returns None when no closed
    exponent exists for the profile/query pair.
    """
    pred = predicted_energy_rate(profile, query)
    kind = profile.kind
    if pred.scale == "power_shifted" and pred.exponent is not None:
        return "power_shifted", pred.exponent, 1, pred.anchor
    if pred.scale == "power_shifted" and kind == "iterated_log" \
            and query.dual_gap == 0.0:
        return "log_power", -profile.mu / 2.0, profile.depth, pred.anchor
    if pred.scale == "power_recip":
        e = pred.exponent
        if kind == "constant":
            return "power_shifted", e, 1, pred.anchor
        if kind == "power" and profile.kappa == 1.0:
            return "log_power", e, 1, "log-damping-estimate"
        if kind == "power":
            return "power_shifted", (1.0 - profile.kappa) * e, 1, pred.anchor
        return "power_recip", e, 1, pred.anchor
    return None


def _run_norm_curve(cfg: ExperimentConfig, rng) -> ExperimentReport:
    rep = _new_report(cfg)
    profile = cfg.profile()
    times = cfg.time_grid.values()
    curve = l2_norm_curve(profile, times, cfg.xi_grid.values(),
                          tol=cfg.tolerances["solver"],
                          max_rounds=cfg.xi_grid.refine_budget)
    rep.curves["main"] = curve
    rep.records["regime"] = classify_regime(profile).label
    for q in (cfg.queries or (RateQuery(n=1),)):
        natural = _natural_fit(profile, q)
        if natural is None:
            rep.records.setdefault("skipped_queries", []).append(
                f"n={q.n} p={q.p} q={q.q}: no closed exponent")
            continue
        model, expected, depth, anchor = natural
        if cfg.fit_model != "auto":
            model = cfg.fit_model
        fit = fit_decay(curve, model, window=(times[0], times[-1]),
                        profile=profile, log_depth=depth)
        rep.records[f"fit_{model}"] = dataclasses.asdict(fit)
        rep.comparisons.append(ComparisonRow(
            quantity=f"energy-norm-exponent[{model}] n={q.n} p={q.p} q={q.q}",
            anchor=anchor, predicted=float(expected), fitted=fit.exponent,
            difference=abs(fit.exponent - expected),
            tolerance=cfg.tolerances["exponent"],
            passed=bool(abs(fit.exponent - expected)
                        <= cfg.tolerances["exponent"])))
    return rep


def _run_sharpness(cfg: ExperimentConfig, rng) -> ExperimentReport:
    rep = _new_report(cfg)
    profile = cfg.profile()
    times = cfg.time_grid.values()
    res = sharpness_probe(profile, times, cfg.xi_grid.values(),
                          tol=cfg.tolerances["solver"],
                          band_limit=cfg.tolerances["band_ratio"])
    rep.curves["amplified"] = res.curve
    rep.records.update(amplifier=res.amplifier, band_low=res.band[0],
                       band_high=res.band[1], verdict=res.verdict)
    rep.comparisons.append(ComparisonRow(
        quantity="amplified-band-ratio", anchor="sharpness-two-sided",
        predicted=1.0, fitted=res.ratio, difference=res.ratio - 1.0,
        tolerance=cfg.tolerances["band_ratio"],
        passed=bool(res.ratio <= cfg.tolerances["band_ratio"])))
    return rep


def _run_zone_map(cfg: ExperimentConfig, rng) -> ExperimentReport:
    rep = _new_report(cfg)
    profile = cfg.profile()
    times = cfg.time_grid.values()
    xis = np.asarray(cfg.xi_grid.values(include_zero=False))
    zc = ZoneConfig(classify_regime(profile),
                    N=float(cfg.params.get("zone_constant", 10.0)),
                    eps_red=float(cfg.params.get("eps_red", 0.1)))
    labels = zone_map(zc, profile, times, xis)
    rep.zone_grids["main"] = (times, xis, labels)
    rep.records["separating_curve"] = {
        f"{t:.6g}": separating_curve(profile, t) for t in times}
    return rep


def _run_wave_operator(cfg: ExperimentConfig, rng) -> ExperimentReport:
    rep = _new_report(cfg)
    profile = cfg.profile()
    probes = cfg.params.get("probe_times", [30.0, 100.0, 300.0, 1000.0])
    table = []
    for x in cfg.xi_grid.values(include_zero=False):
        est = wave_operator_approx(profile, x, probes,
                                   tol=cfg.tolerances["solver"])
        det = abs(est.determinant)
        table.append({"xi": x, "certified": est.certified, "abs_det": det,
                      "last_diff": float(est.cauchy_diffs[-1])})
        if not est.certified:
            rep.invariant_failures.append(
                f"wave operator at xi={x:.6g}: no convergence certificate")
        if det <= cfg.tolerances["nonzero_floor"]:
            rep.invariant_failures.append(
                f"wave operator at xi={x:.6g}: determinant {det:.3e} ~ 0")
    rep.records["frequencies"] = table
    rep.records["probe_times"] = list(probes)
    return rep


def _run_diffusion(cfg: ExperimentConfig, rng) -> ExperimentReport:
    rep = _new_report(cfg)
    profile = cfg.profile()
    t = float(cfg.params.get("t", 200.0))
    t_ref = cfg.params.get("t_ref")
    window = cfg.params.get("xi_window")
    if window is None:
        upper = 0.45 * eval_b(profile, t)
        window = list(np.linspace(upper / 10.0, upper, 6))
    report = diffusion_discrepancy(profile, window, t,
                                   tol=cfg.tolerances["solver"],
                                   t_ref=t_ref)
    rep.records.update(
        t=report.t, t_ref=report.t_ref,
        sup_raw=report.sup_raw, sup_corrected=report.sup_corrected,
        sup_corrected_relative=float(np.max(report.corrected_relative)))
    rep.comparisons.append(ComparisonRow(
        quantity="corrected-relative-discrepancy",
        anchor="parabolic-surrogate-equivalence",
        predicted=0.0,
        fitted=float(np.max(report.corrected_relative)),
        difference=float(np.max(report.corrected_relative)),
        tolerance=cfg.tolerances["diffusion"],
        passed=bool(np.max(report.corrected_relative)
                    <= cfg.tolerances["diffusion"])))
    if "c_cut" in cfg.params:
        times = cfg.time_grid.values()
        curve, verdict = frequency_truncated_decay(
            profile, float(cfg.params["c_cut"]), times,
            tol=cfg.tolerances["solver"])
        rep.curves["truncated"] = curve
        rep.records["truncation_verdict"] = verdict
        amp = np.sqrt([1.0 + coeffs.eval_recip_primitive(profile, ti)
                       for ti in times]) * curve.values
        factor = float(amp[0] / max(amp[-1], 1e-300))
        rep.comparisons.append(ComparisonRow(
            quantity="amplified-truncated-decay-factor",
            anchor="strong-limit-improvement",
            predicted=cfg.tolerances["improvement_factor"], fitted=factor,
            difference=0.0, tolerance=cfg.tolerances["improvement_factor"],
            passed=bool(factor >= cfg.tolerances["improvement_factor"])))
    return rep


def _run_overdamping(cfg: ExperimentConfig, rng) -> ExperimentReport:
    rep = _new_report(cfg)
    profile = cfg.profile()
    xs = np.linspace(0.0, cfg.params.get("xi_max", 2.0),
                     int(cfg.params.get("xi_count", 50)))
    state = overdamping_state(profile, xs, tol=cfg.tolerances["solver"],
                              data=tuple(cfg.params.get("data", (1.0, 0.0))))
    n_cert = int(np.count_nonzero(state.certified))
    min_mag = float(np.min(np.abs(state.data_limits)))
    rep.records.update(n_frequencies=len(xs), n_certified=n_cert,
                       min_limit_magnitude=min_mag)
    rep.comparisons.append(ComparisonRow(
        quantity="certified-nonzero-limits", anchor="overdamping-asymptotic-state",
        predicted=float(len(xs)), fitted=float(n_cert),
        difference=float(len(xs) - n_cert), tolerance=0.5,
        passed=bool(n_cert == len(xs)
                    and min_mag > cfg.tolerances["nonzero_floor"])))
    if cfg.time_grid is not None:
        curve = l2_norm_curve(profile, cfg.time_grid.values(),
                              cfg.xi_grid.values(),
                              tol=cfg.tolerances["solver"])
        rep.curves["main"] = curve
        rep.comparisons.append(ComparisonRow(
            quantity="norm-curve-lower-bound", anchor="overdamping-no-decay",
            predicted=cfg.tolerances["lower_bound"],
            fitted=float(curve.values.min()), difference=0.0,
            tolerance=cfg.tolerances["lower_bound"],
            passed=bool(curve.values.min() >= cfg.tolerances["lower_bound"])))
    return rep


def _run_hypothesis_check(cfg: ExperimentConfig, rng) -> ExperimentReport:
    rep = _new_report(cfg)
    profile = cfg.profile()
    t_max = float(cfg.params.get("t_max", 1e4))
    count = int(cfg.params.get("sample_count", 40))
    samples = np.concatenate([[0.0], np.exp(rng.uniform(0.0, math.log(1 + t_max),
                                                        count - 1)) - 1.0])
    report = check_hypotheses(profile, samples,
                              k_max=int(cfg.params.get("k_max", 2)))
    rep.records.update(
        constants={str(k): v for k, v in report.constants.items()},
        positive_ok=report.positive_ok, monotone_ok=report.monotone_ok,
        excluded=list(report.excluded), regime=classify_regime(profile).label)
    worst = max(report.constants.values()) if report.constants else 0.0
    rep.comparisons.append(ComparisonRow(
        quantity="hypothesis-constants-finite", anchor="derivative-bounds",
        predicted=0.0, fitted=worst, difference=worst,
        tolerance=cfg.tolerances["hypothesis_constant"],
        passed=bool(report.positive_ok and report.monotone_ok
                    and report.all_finite
                    and worst <= cfg.tolerances["hypothesis_constant"])))
    return rep


def _run_oracle_crosscheck(cfg: ExperimentConfig, rng) -> ExperimentReport:
    rep = _new_report(cfg)
    profile = cfg.profile()
    if profile.kind not in ("scale_invariant", "constant"):
        raise ConfigError([f"{cfg.name}: oracle crosscheck supports "
                           "scale_invariant and constant kinds"])
    tg = cfg.time_grid or TimeGrid(0.0, 100.0, 26, "linear")
    times = np.linspace(tg.start, tg.stop, tg.count) \
        if tg.spacing == "linear" else tg.values()
    xis = cfg.xi_grid.values(include_zero=False)
    worst = 0.0
    for x in xis:
        pair = solve_fundamental(profile, x, 0.0, times,
                                 cfg.tolerances["solver"])
        if profile.kind == "scale_invariant":
            ph1, ph2, dph1, dph2 = oracle_scale_invariant(profile.mu, x, times)
        else:
            ph1, ph2, dph1, dph2 = oracle_constant(profile.b0, x, times)
        err = max(np.max(np.abs(pair.phi1 - ph1)),
                  np.max(np.abs(pair.phi2 - ph2)),
                  np.max(np.abs(pair.dphi1 - dph1)),
                  np.max(np.abs(pair.dphi2 - dph2)))
        worst = max(worst, float(err))
    rep.records["max_abs_error"] = worst
    rep.records["n_frequencies"] = len(xis)
    if worst > cfg.tolerances["oracle"]:
        rep.invariant_failures.append(
            f"oracle mismatch: max abs error {worst:.3e} exceeds "
            f"{cfg.tolerances['oracle']:.1e}")
    return rep


def _run_higher_order(cfg: ExperimentConfig, rng) -> ExperimentReport:
    rep = _new_report(cfg)
    profile = cfg.profile()
    times = cfg.time_grid.values()
    for q in (cfg.queries or (RateQuery(n=1, k=1),)):
        vals = []
        for t in times:
            pt = higher_order_check(profile, float(t), q.k, q.alpha_order,
                                    cfg.xi_grid.values(),
                                    tol=cfg.tolerances["solver"])
            vals.append(pt.value)
        curve = DecayCurve(times, np.maximum(vals, 1e-300),
                           meta={"norm": f"higher_order_k{q.k}_a{q.alpha_order}"})
        key = f"k{q.k}_a{q.alpha_order}"
        rep.curves[key] = curve
        fit = fit_decay(curve, "power_recip", window=(times[0], times[-1]),
                        profile=profile)
        expected = -q.k - q.alpha_order / 2.0
        rep.records[f"fit_{key}"] = dataclasses.asdict(fit)
        rep.comparisons.append(ComparisonRow(
            quantity=f"higher-order-exponent k={q.k} alpha={q.alpha_order}",
            anchor="matsumura-higher-order", predicted=expected,
            fitted=fit.exponent, difference=abs(fit.exponent - expected),
            tolerance=cfg.tolerances["exponent"],
            passed=bool(abs(fit.exponent - expected)
                        <= cfg.tolerances["exponent"])))
    return rep


_DRIVERS = {
    "NormCurve": _run_norm_curve,
    "Sharpness": _run_sharpness,
    "ZoneMap": _run_zone_map,
    "WaveOperator": _run_wave_operator,
    "Diffusion": _run_diffusion,
    "OverDamping": _run_overdamping,
    "HypothesisCheck": _run_hypothesis_check,
    "OracleCrosscheck": _run_oracle_crosscheck,
    "HigherOrder": _run_higher_order,
}


def _new_report(cfg: ExperimentConfig) -> ExperimentReport:
    echo = {"name": cfg.name, "kind": cfg.kind, "coefficient": cfg.coefficient,
            "tolerances": dict(cfg.tolerances), "params": dict(cfg.params)}
    return ExperimentReport(name=cfg.name, kind=cfg.kind, config_echo=echo)


def run_experiment(cfg: ExperimentConfig, seed: int = 0) -> ExperimentReport:
    """Run one experiment; exceptions become a failed report, not a crash."""
    rng = _experiment_rng(seed, cfg.name)
    try:
        return _DRIVERS[cfg.kind](cfg, rng)
    except Exception as exc:                      # noqa: BLE001 partial-failure policy
        rep = _new_report(cfg)
        rep.error = f"{type(exc).__name__}: {exc}"
        return rep


def _run_packed(args):
    cfg, seed = args
    return run_experiment(cfg, seed)


def run_bundle(bundle: BundleConfig, only: str | None = None,
               jobs: int = 1) -> ReportBundle:
    import scipy

    cfgs = [c for c in bundle.experiments if only is None or c.name == only]
    if only is not None and not cfgs:
        raise ConfigError([f"--only: no experiment named {only!r}"])
    if jobs > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_packed,
                                    [(c, bundle.seed) for c in cfgs]))
    else:
        reports = [run_experiment(c, bundle.seed) for c in cfgs]
    env = {"package": "dampedwavelab 0.1.0",
           "numpy": np.__version__, "scipy": scipy.__version__}
    return ReportBundle(reports, bundle.seed, env)


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _atomic_write(path: str, text: str):
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _curve_csv(curve: DecayCurve) -> str:
    lines = ["t,value"]
    lines += [f"{_fmt(t)},{_fmt(v)}" for t, v in zip(curve.times, curve.values)]
    return "\n".join(lines) + "\n"


def _zones_csv(times, xis, labels) -> str:
    lines = ["t,xi,label"]
    for i, t in enumerate(times):
        for j, x in enumerate(xis):
            lines.append(f"{_fmt(t)},{_fmt(x)},{labels[i, j]}")
    return "\n".join(lines) + "\n"


def _summary_dict(rep: ExperimentReport) -> dict:
    return {
        "name": rep.name,
        "kind": rep.kind,
        "config": rep.config_echo,
        "records": rep.records,
        "comparisons": [dataclasses.asdict(c) for c in rep.comparisons],
        "invariant_failures": rep.invariant_failures,
        "error": rep.error,
        "curves": sorted(rep.curves),
    }


def emit_reports(bundle: ReportBundle, out_dir: str) -> list[str]:
    """Write curve/zone CSVs, per-experiment summaries and the digest.

    All writes are atomic (temp file + rename).  Returns written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    def put(name: str, text: str):
        path = os.path.join(out_dir, name)
        _atomic_write(path, text)
        written.append(path)

    digest = ["# dampedwavelab report", ""]
    if not bundle.reports:
        digest.append("no experiments")
    for rep in bundle.reports:
        for key, curve in sorted(rep.curves.items()):
            suffix = "" if key == "main" else f"__{key}"
            put(f"curve_{rep.name}{suffix}.csv", _curve_csv(curve))
        for key, (ts, xs, labels) in sorted(rep.zone_grids.items()):
            suffix = "" if key == "main" else f"__{key}"
            put(f"zones_{rep.name}{suffix}.csv", _zones_csv(ts, xs, labels))
        put(f"summary_{rep.name}.json",
            json.dumps(_summary_dict(rep), indent=2, sort_keys=True,
                       default=float) + "\n")
        status = "ERROR" if rep.error else (
            "INVARIANT-FAIL" if rep.invariant_failures else (
                "FAIL" if any(not c.passed for c in rep.comparisons)
                else "pass"))
        digest.append(f"## {rep.name} ({rep.kind}): {status}")
        if rep.error:
            digest.append(f"- error: {rep.error}")
        for msg in rep.invariant_failures:
            digest.append(f"- invariant: {msg}")
        for c in rep.comparisons:
            digest.append(
                f"- {c.quantity} [{c.anchor}]: predicted {c.predicted:.6g}, "
                f"got {c.fitted:.6g}, |diff| {c.difference:.3g}, "
                f"tol {c.tolerance:.3g}: {'pass' if c.passed else 'FAIL'}")
        digest.append("")
    import datetime

    digest.append(f"seed: {bundle.seed}")
    digest.append(f"environment: {json.dumps(bundle.environment, sort_keys=True)}")
    digest.append("generated_at: "
                  + datetime.datetime.now(datetime.timezone.utc).isoformat())
    put("report.md", "\n".join(digest) + "\n")
    return written
