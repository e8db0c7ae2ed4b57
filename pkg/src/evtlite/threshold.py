"""Month-varying exceedance threshold via asymmetric-Laplace likelihood.

The location parameter of an asymmetric Laplace density with asymmetry tau
is the tau-quantile of the data, so maximising the likelihood month by month
estimates the month-specific tau-quantile together with a scale. Months are
disjoint factor levels, hence the joint 24-parameter fit decomposes into 12
independent two-parameter fits; we exploit that directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .summarise import SummarySeries


@dataclass(frozen=True)
class ThresholdModel:
    """Fitted tau-quantile threshold, one (location, log-scale) pair per month."""

    tau: float
    u_by_month: np.ndarray         # (12,)
    log_zeta_by_month: np.ndarray  # (12,)
    loglik: float

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        u = np.ascontiguousarray(self.u_by_month, dtype=np.float64)
        lz = np.ascontiguousarray(self.log_zeta_by_month, dtype=np.float64)
        if u.shape != (12,) or lz.shape != (12,):
            raise ValueError("u_by_month and log_zeta_by_month must have 12 entries")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(lz))):
            raise ValueError("threshold parameters must be finite")
        object.__setattr__(self, "u_by_month", u)
        object.__setattr__(self, "log_zeta_by_month", lz)

    def threshold_at(self, month: int) -> float:
        """Threshold u(month) for month in 1..12."""
        if not 1 <= int(month) <= 12:
            raise ValueError(f"month must lie in 1..12, got {month}")
        return float(self.u_by_month[int(month) - 1])

    def to_dict(self) -> dict:
        return {
            "tau": float(self.tau),
            "u_by_month": [float(v) for v in self.u_by_month],
            "log_zeta_by_month": [float(v) for v in self.log_zeta_by_month],
            "loglik": float(self.loglik),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdModel":
        return cls(
            tau=float(d["tau"]),
            u_by_month=np.asarray(d["u_by_month"], dtype=np.float64),
            log_zeta_by_month=np.asarray(d["log_zeta_by_month"], dtype=np.float64),
            loglik=float(d["loglik"]),
        )


def pinball(t, tau: float):
    """Quantile check function t * (tau - 1{t < 0})."""
    t = np.asarray(t, dtype=np.float64)
    return t * (tau - (t < 0.0))


def ald_negloglik(params, series: SummarySeries, tau: float) -> float:
    """Negative log-likelihood of the month-indexed asymmetric Laplace model.

    params holds the 12 locations followed by the 12 log-scales. Returns
    +inf for non-finite parameters or underflowing scales so unconstrained
    optimisers can be used directly.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (24,):
        raise ValueError(f"expected 24 parameters, got shape {params.shape}")
    if not np.all(np.isfinite(params)):
        return float("inf")
    u = params[:12]
    log_zeta = params[12:]
    zeta = np.exp(log_zeta)
    if not np.all(np.isfinite(zeta)) or np.any(zeta <= 0.0):
        return float("inf")
    idx = series.months - 1
    t = (series.values - u[idx]) / zeta[idx]
    nll = np.sum(log_zeta[idx] - np.log(tau * (1.0 - tau)) + pinball(t, tau))
    return float(nll) if np.isfinite(nll) else float("inf")


def _month_negloglik(p, x: np.ndarray, tau: float) -> float:
    u, log_zeta = p
    if not (np.isfinite(u) and np.isfinite(log_zeta)) or abs(log_zeta) > 600.0:
        return float("inf")
    zeta = np.exp(log_zeta)
    val = x.size * (log_zeta - np.log(tau * (1.0 - tau))) + np.sum(pinball((x - u) / zeta, tau))
    return float(val) if np.isfinite(val) else float("inf")


def _fit_month(x: np.ndarray, tau: float, month: int, max_iter: int, n_restarts: int, tol: float):
    # ALD likelihood is non-smooth in u, so use a derivative-free simplex
    # initialised at (empirical tau-quantile, log mean absolute deviation).
    u0 = float(np.quantile(x, tau))
    mad = float(np.mean(np.abs(x - np.median(x))))
    s0 = float(np.log(max(mad, 1e-12)))
    rng = np.random.default_rng(90210 + month)  # fixed seed: fits stay deterministic
    starts = [(u0, s0)]
    jitter = max(mad, 1e-6)
    for _ in range(n_restarts):
        starts.append((u0 + 0.1 * jitter * rng.standard_normal(), s0 + 0.5 * rng.standard_normal()))
    best = None
    options = {"maxiter": max_iter, "fatol": tol, "xatol": 1e-10}
    for p0 in starts:
        res = minimize(_month_negloglik, np.asarray(p0, dtype=np.float64), args=(x, tau),
                       method="Nelder-Mead", options=options)
        res = minimize(_month_negloglik, res.x, args=(x, tau), method="Nelder-Mead", options=options)
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise RuntimeError(f"threshold fit for month {month} found no finite optimum after {len(starts)} starts")
    return float(best.x[0]), float(best.x[1]), float(best.fun)


def fit_threshold(series: SummarySeries, tau: float = 0.95, min_month_obs: int = 50,
                  max_iter: int = 500, n_restarts: int = 3, tol: float = 1e-8) -> ThresholdModel:
    """Fit the month-varying tau-quantile threshold to a summary series."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    counts = np.bincount(series.months, minlength=13)[1:]
    short = [m + 1 for m in range(12) if counts[m] < min_month_obs]
    if short:
        raise ValueError(f"months {short} have fewer than {min_month_obs} observations")
    u = np.empty(12)
    log_zeta = np.empty(12)
    total_nll = 0.0
    for month in range(1, 13):
        x = series.values[series.months == month]
        u[month - 1], log_zeta[month - 1], nll = _fit_month(x, tau, month, max_iter, n_restarts, tol)
        total_nll += nll
    return ThresholdModel(tau=tau, u_by_month=u, log_zeta_by_month=log_zeta, loglik=-total_nll)
