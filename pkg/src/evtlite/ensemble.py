"""Per-run emulators and the Monte Carlo combination of fitted models.

Each run contributes a generative emulator (threshold + GP tail + mixed
distribution, plus the conditional tail model for the persistence
question). Ensembles of synthetic runs are simulated by picking an
emulator uniformly for each synthetic run, counting target exceedances,
averaging counts within a synthetic ensemble and applying the extremal
index correction. Point and interval estimates are the mean and central
quantiles of the per-ensemble statistics.

Randomness: every (t_sim, t_srun) cell owns the stream
default_rng(SeedSequence(seed, spawn_key=(t_sim, t_srun))), so chunked or
parallel execution over t_sim reproduces the serial output bit for bit.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .cev import CEVModel, fit_cev, laplace_quantile, to_laplace
from .decluster import ClusterSet, run_decluster
from .gpd import (
    GPModel,
    MixedDistribution,
    build_mixed,
    fit_gp,
    gp_quantile,
    mixed_cdf,
    mixed_cdf_by_day,
)
from .ingest import EnsembleRun, validate_ensemble
from .summarise import spatial_order_statistic
from .threshold import ThresholdModel, fit_threshold

PROB_CLIP = 1e-10
_CORRECTIONS = ("power", "multiplicative")


@dataclass(frozen=True)
class QuestionSpec:
    order_k: int
    target: float
    shape_mode: str
    uses_chain: bool


QUESTIONS = {
    "q1": QuestionSpec(order_k=1, target=1.7, shape_mode="by_month", uses_chain=False),
    "q2": QuestionSpec(order_k=20, target=5.7, shape_mode="constant", uses_chain=False),
    "q3": QuestionSpec(order_k=23, target=5.0, shape_mode="constant", uses_chain=True),
}


@dataclass(frozen=True)
class RunEmulator:
    """All fitted components of one run, sharing the same summary series."""

    run_id: int
    order_k: int
    months: np.ndarray        # per-day month labels of the source run
    series_values: np.ndarray  # summary series the models were fitted on
    threshold_model: ThresholdModel
    gp_model: GPModel
    mixed: MixedDistribution
    cluster_set: ClusterSet
    cev_model: CEVModel | None = None

    @property
    def n_days(self) -> int:
        return self.months.size

    @cached_property
    def month_cluster_counts(self) -> np.ndarray:
        return self.cluster_set.month_cluster_counts


@dataclass(frozen=True)
class CombinedEstimates:
    """Cross-run means of the declustered rate and the extremal index."""

    pi_hat: float
    theta_hat: float


@dataclass
class SimulationConfig:
    """Settings for the simulation-based estimate.

    n_days simulates runs shorter than the fitted ones (counts then refer
    to that window); None uses the full fitted run length. rate_mode turns
    the per-run count into an occurred/not indicator. correction selects
    how the extremal index re-enters: "power" applies
    1 - (1 - e_bar)**theta, "multiplicative" applies theta * e_bar.
    """

    question: str
    target_level: float | None = None
    n_sim: int = 10_000
    n_srun: int = 50
    seed: int = 0
    alpha: float = 0.05
    rate_mode: bool = False
    correction: str = "power"
    n_days: int | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.question not in QUESTIONS:
            raise ValueError(f"question must be one of {sorted(QUESTIONS)}, got {self.question!r}")
        if self.n_sim < 1 or self.n_srun < 1:
            raise ValueError("n_sim and n_srun must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.correction not in _CORRECTIONS:
            raise ValueError(f"correction must be one of {_CORRECTIONS}")
        if self.n_days is not None and self.n_days < 1:
            raise ValueError("n_days must be >= 1 when given")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class EstimateResult:
    """Monte Carlo point and interval estimate with the raw per-sim draws."""

    point: float
    ci_low: float
    ci_high: float
    c_samples: np.ndarray
    mean_e_samples: np.ndarray


def combine_rates(emulators: list[RunEmulator]) -> CombinedEstimates:
    """Arithmetic means of the per-run declustered rates and extremal indices.

    Runs whose extremal index is undefined (no exceedances) are excluded;
    at least one defined run is required.
    """
    defined = [e for e in emulators if e.cluster_set.theta_hat is not None]
    if not defined:
        raise ValueError("extremal index is undefined for every run")
    pi_hat = float(np.mean([e.cluster_set.pi_star_hat for e in defined]))
    theta_hat = float(np.mean([e.cluster_set.theta_hat for e in defined]))
    return CombinedEstimates(pi_hat=pi_hat, theta_hat=theta_hat)


def _sim_months(emulator: RunEmulator, n_days: int | None) -> np.ndarray:
    if n_days is None:
        return emulator.months
    if n_days > emulator.n_days:
        raise ValueError(f"n_days={n_days} exceeds the fitted run length {emulator.n_days}")
    return emulator.months[:n_days]


def simulate_marginal_run(emulator: RunEmulator, pi_hat: float, target: float,
                          rng: np.random.Generator, n_days: int | None = None) -> int:
    """Count target exceedances in one synthetic run.

    Each day independently hosts a threshold exceedance with probability
    pi_hat; exceedance magnitudes are monthly-threshold plus a GP excess.
    The target must sit above every monthly threshold, otherwise the GP
    tail cannot express the event and the mixed distribution is needed.
    """
    months = _sim_months(emulator, n_days)
    u = emulator.threshold_model.u_by_month
    if target <= float(np.max(u)):
        raise ValueError(
            f"target {target} is not above every monthly threshold (max {float(np.max(u)):.4f}); "
            "use the mixed distribution for sub-threshold levels"
        )
    hits = rng.random(months.size) < pi_hat
    hit_idx = months[hits] - 1
    if hit_idx.size == 0:
        return 0
    sigma = emulator.gp_model.sigma_by_month[hit_idx]
    xi = emulator.gp_model.xi_by_month[hit_idx]
    excess = gp_quantile(rng.random(hit_idx.size), sigma, xi)
    return int(np.sum(u[hit_idx] + excess > target))


def laplace_targets(emulator: RunEmulator, target: float) -> np.ndarray:
    """Per-month Laplace-scale image of a raw target level under the
    emulator's own mixed distribution (margins are run- and month-specific)."""
    p = np.array([mixed_cdf(emulator.mixed, target, m) for m in range(1, 13)])
    return laplace_quantile(np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP))


def simulate_cluster_run(emulator: RunEmulator, target_laplace, rng: np.random.Generator,
                         steps: int = 30) -> int:
    """Count clusters whose chain exceeds the target on >= 2 consecutive steps.

    The cluster count is Poisson with the observed per-run cluster count as
    its rate; each cluster starts from a GP exceedance in a month sampled
    proportionally to the observed per-month cluster counts, transformed to
    the Laplace scale, then propagated by the conditional recursion.
    target_laplace is a scalar or a 12-vector of per-month levels.

    Chains are advanced as a batch; every step draws residuals for all
    clusters so the random stream layout does not depend on chain values.
    """
    cev = emulator.cev_model
    if cev is None:
        raise ValueError("emulator has no fitted conditional tail model")
    t_by_month = np.broadcast_to(np.asarray(target_laplace, dtype=np.float64), (12,))
    n_r = emulator.cluster_set.n_clusters
    n_clusters = int(rng.poisson(n_r))
    if n_clusters == 0:
        return 0
    counts = emulator.month_cluster_counts
    months = rng.choice(12, size=n_clusters, p=counts / counts.sum()) + 1
    idx = months - 1
    sigma = emulator.gp_model.sigma_by_month[idx]
    xi = emulator.gp_model.xi_by_month[idx]
    u = emulator.threshold_model.u_by_month[idx]
    x0 = u + gp_quantile(rng.random(n_clusters), sigma, xi)
    p0 = np.clip(mixed_cdf_by_day(emulator.mixed, x0, months), PROB_CLIP, 1.0 - PROB_CLIP)
    y = laplace_quantile(p0)
    t = t_by_month[idx]
    # initial values at or below the conditioning threshold cannot be chained;
    # a lone step-0 exceedance never makes two consecutive ones, so they count 0
    alive = y > cev.q_threshold
    prev_exceed = (y > t) & alive
    counted = np.zeros(n_clusters, dtype=bool)
    res = cev.residuals
    h = cev.kde_bandwidth
    for _ in range(steps):
        z = res[rng.integers(res.size, size=n_clusters)] + h * rng.standard_normal(n_clusters)
        with np.errstate(invalid="ignore", over="ignore"):
            y = np.where(alive & (y > 0.0), cev.beta0 * y + y ** cev.beta1 * z, np.nan)
        cur_exceed = y > t  # NaN compares False
        counted |= prev_exceed & cur_exceed
        prev_exceed = cur_exceed
        alive &= np.isfinite(y) & (y > 0.0)
    return int(counted.sum())


def _cell_rng(seed: int, t_sim: int, t_srun: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t_sim, t_srun)))


def _simulate_cells(emulators, config: SimulationConfig, theta_hat: float, pi_hat: float,
                    targets_laplace, t_sims):
    """Compute (c, e_bar) for a list of outer-loop indices."""
    spec_chain = QUESTIONS[config.question].uses_chain
    c_out = np.empty(len(t_sims))
    ebar_out = np.empty(len(t_sims))
    for k, t_sim in enumerate(t_sims):
        e_vals = np.empty(config.n_srun)
        for t_srun in range(1, config.n_srun + 1):
            rng = _cell_rng(config.seed, t_sim, t_srun)
            r = int(rng.integers(len(emulators)))
            if spec_chain:
                e = simulate_cluster_run(emulators[r], targets_laplace[r], rng)
            else:
                e = simulate_marginal_run(emulators[r], pi_hat, config.target_level, rng,
                                          n_days=config.n_days)
            if config.rate_mode:
                e = min(e, 1)
            e_vals[t_srun - 1] = e
        e_bar = float(e_vals.mean())
        if spec_chain:
            c = e_bar  # no extremal-index correction for the persistence question
        elif config.correction == "multiplicative":
            c = theta_hat * e_bar
        else:
            if e_bar > 1.0:
                raise RuntimeError(
                    f"mean exceedance count {e_bar:.4f} > 1: the power correction needs a "
                    "rate; rerun with rate_mode or shorter simulated runs"
                )
            # theta = 1 is an exact identity, not 1 - (1 - e_bar)**1
            c = e_bar if theta_hat == 1.0 else 1.0 - (1.0 - e_bar) ** theta_hat
        c_out[k] = c
        ebar_out[k] = e_bar
    return c_out, ebar_out


def _cells_worker(payload):
    return _simulate_cells(*payload)


def monte_carlo_estimate(emulators: list[RunEmulator], config: SimulationConfig,
                         combined: CombinedEstimates) -> EstimateResult:
    """Simulate n_sim synthetic ensembles of n_srun runs each and summarise.

    For each synthetic run an emulator is picked uniformly at random; the
    per-ensemble statistic is the corrected mean exceedance count. Returns
    the sample mean and the central (alpha/2, 1 - alpha/2) quantiles.
    """
    if not emulators:
        raise ValueError("at least one emulator is required")
    if config.target_level is None:
        raise ValueError("config.target_level must be set")
    spec = QUESTIONS[config.question]
    targets_laplace = None
    if spec.uses_chain:
        for e in emulators:
            if e.cev_model is None:
                raise ValueError(f"run {e.run_id}: question {config.question} needs a conditional tail model")
        targets_laplace = [laplace_targets(e, config.target_level) for e in emulators]

    all_t_sims = list(range(1, config.n_sim + 1))
    if config.workers == 1:
        c, ebar = _simulate_cells(emulators, config, combined.theta_hat, combined.pi_hat,
                                  targets_laplace, all_t_sims)
    else:
        n_chunks = min(config.workers * 4, config.n_sim)
        # plain ints: spawn keys must not depend on how the chunking was done
        chunks = [[int(t) for t in chunk] for chunk in np.array_split(all_t_sims, n_chunks)]
        payloads = [
            (emulators, config, combined.theta_hat, combined.pi_hat, targets_laplace, chunk)
            for chunk in chunks if chunk
        ]
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(_cells_worker, payloads))
        c = np.concatenate([p[0] for p in parts])
        ebar = np.concatenate([p[1] for p in parts])

    point = float(np.mean(c))
    ci_low, ci_high = np.quantile(c, [config.alpha / 2.0, 1.0 - config.alpha / 2.0])
    return EstimateResult(point=point, ci_low=float(ci_low), ci_high=float(ci_high),
                          c_samples=c, mean_e_samples=ebar)


def build_emulator(run: EnsembleRun, question: str, order_k: int | None = None,
                   tau: float = 0.95, run_length: int = 3, q_prob: float = 0.90,
                   shape_mode: str | None = None, min_month_obs: int = 50,
                   min_month_maxima: int = 10, month_conditional_bulk: bool = False) -> RunEmulator:
    """Fit every model component of one run for the given question."""
    spec = QUESTIONS.get(question)
    if spec is None:
        raise ValueError(f"question must be one of {sorted(QUESTIONS)}, got {question!r}")
    k = spec.order_k if order_k is None else order_k
    mode = spec.shape_mode if shape_mode is None else shape_mode
    series = spatial_order_statistic(run, k)
    tm = fit_threshold(series, tau=tau, min_month_obs=min_month_obs)
    cs = run_decluster(series, tm, l=run_length)
    gp = fit_gp(cs, tm, shape_mode=mode, min_month_maxima=min_month_maxima)
    mixed = build_mixed(series, gp, pi=cs.pi_star_hat, month_conditional_bulk=month_conditional_bulk)
    cev = fit_cev(to_laplace(series, mixed), q_prob=q_prob) if spec.uses_chain else None
    return RunEmulator(
        run_id=run.run_id, order_k=k, months=series.months, series_values=series.values,
        threshold_model=tm, gp_model=gp, mixed=mixed, cluster_set=cs, cev_model=cev,
    )


def run_question(question: str, runs: list[EnsembleRun], config: SimulationConfig,
                 **fit_kwargs) -> EstimateResult:
    """Full pipeline for one question: fit per-run emulators, combine, simulate."""
    validate_ensemble(runs)
    if config.question != question:
        config = replace(config, question=question)
    emulators = [build_emulator(run, question, **fit_kwargs) for run in runs]
    combined = combine_rates(emulators)
    if config.target_level is None:
        config = replace(config, target_level=QUESTIONS[question].target)
    return monte_carlo_estimate(emulators, config, combined)
