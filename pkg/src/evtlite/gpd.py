"""Generalized Pareto tail models with month-varying parameters.

Cluster maxima minus their monthly threshold are modelled as GP excesses.
The log-scale varies freely by month; the shape is either a single shared
value or month-specific. The fitted tail joins the empirical bulk of the
full summary series into one mixed distribution whose tail weight is the
declustered exceedance rate.

Numerical policy: log(1 + xi * z / sigma) is evaluated through log1p and
the exponential branch takes over for |xi| < 1e-10, keeping the two
branches consistent to well below 1e-7 near xi = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .decluster import ClusterSet
from .summarise import SummarySeries
from .threshold import ThresholdModel

XI_ZERO_EPS = 1e-10
XI_MIN = -0.9
XI_MAX = 2.0

_SHAPE_MODES = ("constant", "by_month")


def _all_scalar(*args) -> bool:
    return all(np.ndim(a) == 0 for a in args)


def gp_cdf(z, sigma, xi):
    """GP distribution function H(z; sigma, xi) for excesses z >= 0.

    Clamps to 1 at the upper support endpoint when xi < 0. Accepts scalars
    or broadcastable arrays.
    """
    scalar = _all_scalar(z, sigma, xi)
    z = np.maximum(np.asarray(z, dtype=np.float64), 0.0)
    sigma = np.asarray(sigma, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    if np.any(sigma <= 0.0):
        raise ValueError("sigma must be positive")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = xi * z / sigma
        exp_branch = -np.expm1(-z / sigma)
        gen_branch = -np.expm1(-np.log1p(np.maximum(t, -1.0)) / xi)
        out = np.where(
            np.abs(xi) < XI_ZERO_EPS,
            exp_branch,
            np.where(1.0 + t <= 0.0, 1.0, gen_branch),
        )
    return float(out) if scalar else out


def gp_quantile(p, sigma, xi):
    """Inverse of gp_cdf: the excess with non-exceedance probability p in [0, 1)."""
    scalar = _all_scalar(p, sigma, xi)
    p = np.asarray(p, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    if np.any(sigma <= 0.0):
        raise ValueError("sigma must be positive")
    if np.any(p < 0.0) or np.any(p >= 1.0):
        raise ValueError("p must lie in [0, 1)")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log1m = np.log1p(-p)
        exp_branch = -sigma * log1m
        gen_branch = sigma * np.expm1(-xi * log1m) / xi
        out = np.where(np.abs(xi) < XI_ZERO_EPS, exp_branch, gen_branch)
    return float(out) if scalar else out


@dataclass(frozen=True)
class GPModel:
    """Fitted GP tail: per-month log-scales plus shared or per-month shape."""

    log_sigma_by_month: np.ndarray  # (12,)
    shape_mode: str                 # "constant" or "by_month"
    xi: np.ndarray                  # (1,) when constant, (12,) when by_month
    threshold_model: ThresholdModel
    loglik: float

    def __post_init__(self) -> None:
        ls = np.ascontiguousarray(self.log_sigma_by_month, dtype=np.float64)
        xi = np.atleast_1d(np.asarray(self.xi, dtype=np.float64))
        if ls.shape != (12,):
            raise ValueError("log_sigma_by_month must have 12 entries")
        if self.shape_mode not in _SHAPE_MODES:
            raise ValueError(f"shape_mode must be one of {_SHAPE_MODES}")
        expected = (12,) if self.shape_mode == "by_month" else (1,)
        if xi.shape != expected:
            raise ValueError(f"xi must have shape {expected} for shape_mode={self.shape_mode}")
        object.__setattr__(self, "log_sigma_by_month", ls)
        object.__setattr__(self, "xi", xi)

    @property
    def sigma_by_month(self) -> np.ndarray:
        return np.exp(self.log_sigma_by_month)

    @property
    def xi_by_month(self) -> np.ndarray:
        return self.xi if self.xi.size == 12 else np.full(12, self.xi[0])

    def to_dict(self) -> dict:
        return {
            "log_sigma_by_month": [float(v) for v in self.log_sigma_by_month],
            "shape_mode": self.shape_mode,
            "xi": float(self.xi[0]) if self.xi.size == 1 else [float(v) for v in self.xi],
            "loglik": float(self.loglik),
        }

    @classmethod
    def from_dict(cls, d: dict, threshold_model: ThresholdModel) -> "GPModel":
        xi = d["xi"]
        xi = np.asarray([xi] if np.ndim(xi) == 0 else xi, dtype=np.float64)
        return cls(
            log_sigma_by_month=np.asarray(d["log_sigma_by_month"], dtype=np.float64),
            shape_mode=str(d["shape_mode"]),
            xi=xi,
            threshold_model=threshold_model,
            loglik=float(d["loglik"]),
        )


def _gp_negloglik(z: np.ndarray, sigma: np.ndarray, xi: np.ndarray) -> float:
    """Pointwise GP negative log-likelihood; +inf outside the support."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = xi * z / sigma
        if np.any(1.0 + t <= 0.0):
            return float("inf")
        small = np.abs(xi) < XI_ZERO_EPS
        contrib = np.where(
            small,
            np.log(sigma) + z / sigma,
            np.log(sigma) + (1.0 + 1.0 / np.where(small, 1.0, xi)) * np.log1p(np.where(small, 0.0, t)),
        )
        total = float(np.sum(contrib))
    return total if np.isfinite(total) else float("inf")


def _pwm_init(z: np.ndarray) -> tuple[float, float]:
    """Probability-weighted-moment starting values (sigma0, xi0).

    Uses a0 = E[Z] and a1 = E[Z (1 - F(Z))]; for the GP these are
    sigma / (1 - xi) and sigma / (2 (2 - xi)).
    """
    zs = np.sort(z)
    n = zs.size
    a0 = float(zs.mean())
    p = (np.arange(1, n + 1) - 0.35) / n
    a1 = float(np.mean(zs * (1.0 - p)))
    denom = a0 - 2.0 * a1
    if denom <= 0.0 or a0 <= 0.0:
        return max(a0, 1e-8), 0.5  # extremely heavy sample; start heavy-tailed
    xi0 = (a0 - 4.0 * a1) / denom
    sigma0 = a0 * (1.0 - xi0)
    if not np.isfinite(sigma0) or sigma0 <= 0.0:
        sigma0 = a0
    return float(sigma0), float(np.clip(xi0, -0.4, 1.2))


def _minimize_simplex(fun, x0, max_iter):
    options = {"maxiter": max_iter, "fatol": 1e-9, "xatol": 1e-9}
    res = minimize(fun, x0, method="Nelder-Mead", options=options)
    # restart once from the solution; helps 13-dimensional simplexes settle
    return minimize(fun, res.x, method="Nelder-Mead", options=options)


def fit_gp_excesses(z: np.ndarray, max_iter: int = 2000) -> tuple[float, float, float]:
    """Two-parameter GP maximum likelihood fit to a plain excess sample.

    Returns (sigma, xi, loglik) with xi box-constrained to [-0.9, 2.0].
    This is the primitive behind the month-indexed fits.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0:
        raise RuntimeError("cannot fit a GP model to an empty sample")
    if np.any(z <= 0.0):
        raise ValueError("excesses must be positive")
    if float(np.ptp(z)) <= 1e-12 * max(1.0, float(np.max(z))):
        raise RuntimeError("degenerate excesses: all values are (numerically) equal")
    sigma0, xi0 = _pwm_init(z)

    def nll(params):
        log_s, x = params
        if not np.all(np.isfinite(params)) or not XI_MIN <= x <= XI_MAX:
            return float("inf")
        return _gp_negloglik(z, np.full(z.size, np.exp(log_s)), np.full(z.size, x))

    x0 = np.array([np.log(sigma0), xi0])
    if not np.isfinite(nll(x0)):
        x0 = np.array([np.log(max(z.mean(), 1e-10)), 0.0])  # exponential start is always feasible
    res = _minimize_simplex(nll, x0, max_iter=max_iter)
    if not np.isfinite(res.fun):
        raise RuntimeError("GP fit did not converge")
    return float(np.exp(res.x[0])), float(np.clip(res.x[1], XI_MIN, XI_MAX)), -float(res.fun)


def fit_gp(cs: ClusterSet, thresholds: ThresholdModel, shape_mode: str = "constant",
           min_month_maxima: int = 10) -> GPModel:
    """Maximum-likelihood GP fit to cluster-maximum excesses.

    shape_mode "by_month" fits independent (sigma, xi) per month and needs
    at least min_month_maxima maxima in every month; "constant" shares one
    xi across months and needs at least one maximum per month. The shape is
    box-constrained to [-0.9, 2.0] to avoid the irregular-MLE region.
    """
    if shape_mode not in _SHAPE_MODES:
        raise ValueError(f"shape_mode must be one of {_SHAPE_MODES}")
    if cs.n_clusters == 0:
        raise RuntimeError("cannot fit a GP model: the cluster set is empty")
    z = cs.maxima - thresholds.u_by_month[cs.maxima_months - 1]
    if np.any(z <= 0.0):
        raise ValueError("cluster maxima at or below their monthly threshold; inputs inconsistent")
    if float(np.ptp(z)) <= 1e-12 * max(1.0, float(np.max(z))):
        raise RuntimeError("degenerate exceedances: all excesses are (numerically) equal")
    months = cs.maxima_months
    counts = np.bincount(months, minlength=13)[1:]
    floor = min_month_maxima if shape_mode == "by_month" else 1
    short = [m + 1 for m in range(12) if counts[m] < floor]
    if short:
        raise RuntimeError(f"months {short} have fewer than {floor} cluster maxima for shape_mode={shape_mode}")

    idx = months - 1
    if shape_mode == "constant":
        sigma0, xi0 = _pwm_init(z)
        month_means = np.array([z[idx == m].mean() for m in range(12)])

        def start(xi_init):
            scales = np.maximum(month_means * max(1.0 - xi_init, 0.1), 1e-10)
            return np.concatenate([np.log(scales), [xi_init]])

        def nll(params):
            log_sigma, xi = params[:12], params[12]
            if not np.all(np.isfinite(params)) or not XI_MIN <= xi <= XI_MAX:
                return float("inf")
            return _gp_negloglik(z, np.exp(log_sigma)[idx], np.full(z.size, xi))

        x0 = start(xi0)
        if not np.isfinite(nll(x0)):
            x0 = start(0.0)  # PWM start lies outside the support; exponential start always works
        res = _minimize_simplex(nll, x0, max_iter=400 * 13)
        if not np.isfinite(res.fun):
            raise RuntimeError("GP fit did not converge (constant shape)")
        log_sigma = res.x[:12].copy()
        xi = np.array([np.clip(res.x[12], XI_MIN, XI_MAX)])
        total_nll = float(res.fun)
    else:
        log_sigma = np.empty(12)
        xi = np.empty(12)
        total_nll = 0.0
        for m in range(12):
            try:
                sigma_m, xi_m, ll_m = fit_gp_excesses(z[idx == m])
            except RuntimeError as exc:
                raise RuntimeError(f"month {m + 1}: {exc}") from exc
            log_sigma[m] = np.log(sigma_m)
            xi[m] = xi_m
            total_nll -= ll_m

    return GPModel(log_sigma_by_month=log_sigma, shape_mode=shape_mode, xi=xi,
                   threshold_model=thresholds, loglik=-total_nll)


@dataclass(frozen=True)
class MixedDistribution:
    """Empirical bulk below the monthly threshold, GP tail above it.

    The tail weight pi is the declustered exceedance rate. At the threshold
    the distribution function equals 1 - pi exactly; to keep the junction
    monotone the bulk branch is capped at 1 - pi (the model asserts that at
    most pi of the mass sits above the threshold, so the cap only binds
    where the pooled empirical bulk disagrees with the monthly threshold).
    """

    bulk_sorted: np.ndarray
    pi: float
    gp: GPModel
    bulk_by_month: tuple | None = None  # 12 sorted arrays for the month-conditional variant

    def __post_init__(self) -> None:
        if not 0.0 < self.pi < 1.0:
            raise ValueError(f"pi must lie in (0, 1), got {self.pi}")
        bulk = np.sort(np.asarray(self.bulk_sorted, dtype=np.float64))
        object.__setattr__(self, "bulk_sorted", bulk)


def build_mixed(series: SummarySeries, gp: GPModel, pi: float,
                month_conditional_bulk: bool = False) -> MixedDistribution:
    """Assemble the mixed distribution from the full (not declustered) series."""
    bulk_by_month = None
    if month_conditional_bulk:
        bulk_by_month = tuple(np.sort(series.values[series.months == m]) for m in range(1, 13))
    return MixedDistribution(bulk_sorted=series.values, pi=pi, gp=gp, bulk_by_month=bulk_by_month)


def _bulk_cdf(md: MixedDistribution, y: np.ndarray, month: int) -> np.ndarray:
    sample = md.bulk_sorted if md.bulk_by_month is None else md.bulk_by_month[month - 1]
    return np.searchsorted(sample, y, side="right") / sample.size


def mixed_cdf(md: MixedDistribution, y, month: int):
    """Distribution function of the mixed bulk/tail model for one month."""
    if not 1 <= int(month) <= 12:
        raise ValueError(f"month must lie in 1..12, got {month}")
    month = int(month)
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    u = md.gp.threshold_model.u_by_month[month - 1]
    sigma = md.gp.sigma_by_month[month - 1]
    xi = md.gp.xi_by_month[month - 1]
    tail = y >= u
    out = np.empty(y.shape)
    out[tail] = 1.0 - md.pi * (1.0 - gp_cdf(y[tail] - u, sigma, xi))
    out[~tail] = np.minimum(_bulk_cdf(md, y[~tail], month), 1.0 - md.pi)
    return float(out[0]) if scalar else out


def mixed_cdf_by_day(md: MixedDistribution, values: np.ndarray, months: np.ndarray) -> np.ndarray:
    """Vectorised mixed_cdf over a series with per-day months."""
    out = np.empty(values.shape, dtype=np.float64)
    for month in range(1, 13):
        mask = months == month
        if mask.any():
            out[mask] = mixed_cdf(md, values[mask], month)
    return out


def mixed_quantile(md: MixedDistribution, p: float, month: int) -> float:
    """Inverse of mixed_cdf: GP tail inverse above 1 - pi, bulk quantile below."""
    if not 1 <= int(month) <= 12:
        raise ValueError(f"month must lie in 1..12, got {month}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    month = int(month)
    u = md.gp.threshold_model.u_by_month[month - 1]
    if p >= 1.0 - md.pi:
        sigma = md.gp.sigma_by_month[month - 1]
        xi = md.gp.xi_by_month[month - 1]
        p_tail = max(0.0, 1.0 - (1.0 - p) / md.pi)  # clamp roundoff at the junction
        return float(u + gp_quantile(p_tail, sigma, xi))
    sample = md.bulk_sorted if md.bulk_by_month is None else md.bulk_by_month[month - 1]
    # exact inverse of the right-continuous step ECDF (inverted-cdf convention);
    # the 1e-9 slack absorbs ulp noise in p so sample points round-trip exactly
    k = int(np.ceil(p * sample.size - 1e-9))
    k = min(max(k, 1), sample.size)
    return float(min(sample[k - 1], u))


def qq_exponential(model: GPModel, cs: ClusterSet) -> np.ndarray:
    """QQ points on standard exponential margins for the fitted tail.

    Each excess z maps to -log(1 - H(z)); sorted values pair with the
    plotting positions -log(1 - j / (n + 1)). Returns an (n, 2) array of
    (theoretical, empirical) points.
    """
    z = cs.maxima - model.threshold_model.u_by_month[cs.maxima_months - 1]
    sigma = model.sigma_by_month[cs.maxima_months - 1]
    xi = model.xi_by_month[cs.maxima_months - 1]
    surv = np.clip(1.0 - gp_cdf(z, sigma, xi), 1e-300, None)
    empirical = np.sort(-np.log(surv))
    n = z.size
    theoretical = -np.log1p(-np.arange(1, n + 1) / (n + 1.0))
    return np.column_stack([theoretical, empirical])


def qq_envelope(model: GPModel, cs: ClusterSet, n_boot: int = 200, level: float = 0.95,
                seed: int = 0) -> np.ndarray:
    """Pointwise parametric-bootstrap envelope for the exponential QQ plot.

    Simulates n_boot replicate excess samples from the fitted model (same
    months), transforms them with the same fitted parameters and takes the
    pointwise central quantiles of the sorted values. Returns (n, 3) columns
    (theoretical, lower, upper).
    """
    n = cs.n_clusters
    rng = np.random.default_rng(seed)
    sims = np.sort(-np.log1p(-rng.random((n_boot, n))), axis=1)
    alpha = 1.0 - level
    lower = np.quantile(sims, alpha / 2.0, axis=0)
    upper = np.quantile(sims, 1.0 - alpha / 2.0, axis=0)
    theoretical = -np.log1p(-np.arange(1, n + 1) / (n + 1.0))
    return np.column_stack([theoretical, lower, upper])
