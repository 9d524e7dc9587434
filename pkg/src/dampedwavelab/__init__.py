"""Numerical verification laboratory for wave equations with time-dependent damping.

The package computes the per-frequency Fourier-multiplier representation of
solutions to u_tt - Lap u + b(t) u_t = 0, the induced operator-norm decay
curves, the phase-space zone geometry, scattering and diffusion asymptotics,
and checks the associated decay estimates quantitatively.
"""

from .coefficients import (
    CoefficientCalculus,
    CoefficientProfile,
    HypothesisReport,
    RegimeClass,
    check_hypotheses,
    classify_regime,
    constant,
    custom,
    eval_b,
    eval_b_derivative,
    eval_lambda,
    eval_log_lambda,
    eval_primitive,
    eval_recip_primitive,
    integrable,
    iterated_log,
    power,
    scale_invariant,
    zero,
)
from .fundamental import (
    EnergyMultiplier,
    FreePropagator,
    FrequencyPoint,
    FundamentalPair,
    SolutionMultiplier,
    dissipation_identity_residual,
    energy_multiplier,
    free_propagator,
    kg_transform_residual,
    oracle_constant,
    oracle_scale_invariant,
    solution_multiplier,
    solve_fundamental,
)
from .zones import (
    PhaseSpacePoint,
    ZoneConfig,
    classify_point,
    elliptic_exponent_bound,
    micro_energy_weight_h,
    separating_curve,
    zone_map,
)
from .rates import (
    DecayCurve,
    FitResult,
    RateQuery,
    fit_decay,
    fit_decay_auto,
    higher_order_check,
    l2_norm_curve,
    predicted_energy_rate,
    predicted_solution_rate,
    radial_l1_multiplier_norm,
    sharpness_probe,
)
from .asymptotics import (
    AsymptoticState,
    DiffusionReport,
    WaveOperatorEstimate,
    diffusion_discrepancy,
    frequency_truncated_decay,
    overdamping_state,
    parabolic_multiplier,
    wave_operator_approx,
)

__version__ = "0.1.0"
