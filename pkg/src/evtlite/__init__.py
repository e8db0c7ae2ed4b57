"""Exceedance-probability estimation for climate-ensemble precipitation extremes.

Pipeline: reduce each daily spatial field to an order statistic, fit a
month-varying threshold by asymmetric-Laplace likelihood, decluster the
exceedances, fit generalized Pareto tails, optionally model day-to-day
extremal persistence, and combine the per-run fitted models by Monte Carlo
simulation into point and interval estimates.
"""

from .cev import (
    CEVModel,
    LaplaceSeries,
    fit_cev,
    fit_conditional_pairs,
    laplace_cdf,
    laplace_quantile,
    sample_residual,
    simulate_chain,
    to_laplace,
)
from .decluster import ClusterSet, decluster_correction, extremal_index, run_decluster
from .ensemble import (
    QUESTIONS,
    CombinedEstimates,
    EstimateResult,
    RunEmulator,
    SimulationConfig,
    build_emulator,
    combine_rates,
    laplace_targets,
    monte_carlo_estimate,
    run_question,
    simulate_cluster_run,
    simulate_marginal_run,
)
from .gpd import (
    GPModel,
    MixedDistribution,
    build_mixed,
    fit_gp,
    fit_gp_excesses,
    gp_cdf,
    gp_quantile,
    mixed_cdf,
    mixed_quantile,
    qq_envelope,
    qq_exponential,
)
from .ingest import Calendar, EnsembleRun, load_run, save_run, validate_ensemble
from .summarise import SummarySeries, event_indicator, spatial_order_statistic
from .synth import SynthSpec, event_truth, generate_ensemble, generate_run, per_day_probability
from .threshold import ThresholdModel, ald_negloglik, fit_threshold

__version__ = "0.1.0"
