"""Shared builders and independent reference implementations for the tests."""

from __future__ import annotations

import numpy as np

import evtlite as ev
from evtlite.decluster import ClusterSet


def oracle_decluster(values, u, l):
    """Independent declustering reference: label segments split by maximal
    windows of at least l consecutive sub-threshold days, then group
    exceedances by segment. Returns a list of 1-based day-index lists."""
    values = np.asarray(values, dtype=float)
    u = np.broadcast_to(np.asarray(u, dtype=float), values.shape)
    n = values.size
    segment = 0
    run_below = 0
    labels = np.empty(n, dtype=int)
    for i in range(n):
        if values[i] > u[i]:
            run_below = 0
        else:
            run_below += 1
            if run_below == l:
                segment += 1
        labels[i] = segment
    clusters = {}
    for i in range(n):
        if values[i] > u[i]:
            clusters.setdefault(labels[i], []).append(i + 1)
    return [clusters[key] for key in sorted(clusters)]


def constant_threshold_model(u, tau=0.95):
    return ev.ThresholdModel(
        tau=tau,
        u_by_month=np.full(12, float(u)),
        log_zeta_by_month=np.zeros(12),
        loglik=0.0,
    )


def make_cluster_set(maxima, maxima_months, n_days=10_000, n_exceedances=None,
                     run_length_l=3, run_id=1):
    maxima = np.asarray(maxima, dtype=float)
    maxima_months = np.asarray(maxima_months, dtype=np.int64)
    n = maxima.size
    n_exc = n if n_exceedances is None else n_exceedances
    return ClusterSet(
        run_id=run_id, run_length_l=run_length_l, n_days=n_days,
        cluster_days=tuple(np.array([d]) for d in range(1, n + 1)),
        cluster_values=tuple(np.array([v]) for v in maxima),
        maxima=maxima, maxima_days=np.arange(1, n + 1, dtype=np.int64),
        maxima_months=maxima_months,
        n_exceedances=n_exc,
        theta_hat=(n / n_exc) if n_exc else None,
        pi_star_hat=n / n_days,
    )


def make_marginal_emulator(n_days=1000, u=1.0, sigma=1.0, xi=0.0, n_clusters=50,
                           pi_mixed=0.05, run_id=1):
    """Emulator with hand-set parameters, no fitting involved."""
    months = ev.Calendar().months_for(n_days)
    tm = constant_threshold_model(u)
    gp = ev.GPModel(
        log_sigma_by_month=np.full(12, np.log(sigma)), shape_mode="constant",
        xi=np.array([float(xi)]), threshold_model=tm, loglik=0.0,
    )
    n_cl = min(n_clusters, n_days)
    cs = make_cluster_set(
        maxima=u + 0.5 + np.linspace(0.0, 1.0, n_cl),
        maxima_months=months[:n_cl].copy(),
        n_days=n_days, run_id=run_id,
    )
    series = ev.SummarySeries(run_id, 1, np.linspace(0.0, u, n_days), months)
    mixed = ev.build_mixed(series, gp, pi=pi_mixed)
    return ev.RunEmulator(
        run_id=run_id, order_k=1, months=months, series_values=series.values,
        threshold_model=tm, gp_model=gp, mixed=mixed, cluster_set=cs,
    )
