#!/usr/bin/env python3
"""Parameter-recovery experiment for the GP tail and the conditional tail model.

Replicates simulated datasets at several sample sizes and tabulates the
spread of the fitted parameters around the truth, showing the expected
1/sqrt(n) shrinkage.

    python scripts/recovery_experiment.py --replicates 40
"""

import argparse

import numpy as np

import evtlite as ev


def gp_recovery(replicates, sizes, sigma=2.0, xi=0.1):
    print(f"GP tail fit, truth sigma={sigma} xi={xi}")
    print(f"{'n':>8} {'sigma mean':>12} {'sigma sd':>10} {'xi mean':>10} {'xi sd':>10}")
    for n in sizes:
        fits = []
        for rep in range(replicates):
            rng = np.random.default_rng(1000 * n + rep)
            z = ev.gp_quantile(rng.random(n), sigma, xi)
            fits.append(ev.fit_gp_excesses(z)[:2])
        fits = np.asarray(fits)
        print(f"{n:>8} {fits[:, 0].mean():>12.4f} {fits[:, 0].std():>10.4f} "
              f"{fits[:, 1].mean():>10.4f} {fits[:, 1].std():>10.4f}")


def cev_recovery(replicates, sizes, beta0=0.4, beta1=0.2):
    q = ev.laplace_quantile(0.9)
    print(f"\nconditional tail fit, truth beta0={beta0} beta1={beta1}")
    print(f"{'n':>8} {'b0 mean':>10} {'b0 sd':>10} {'b1 mean':>10} {'b1 sd':>10}")
    for n in sizes:
        fits = []
        for rep in range(replicates):
            rng = np.random.default_rng(2000 * n + rep)
            x = ev.laplace_quantile(rng.uniform(0.9, 1.0, size=n))
            y = beta0 * x + x ** beta1 * rng.standard_normal(n)
            model = ev.fit_conditional_pairs(x, y, q)
            fits.append((model.beta0, model.beta1))
        fits = np.asarray(fits)
        print(f"{n:>8} {fits[:, 0].mean():>10.4f} {fits[:, 0].std():>10.4f} "
              f"{fits[:, 1].mean():>10.4f} {fits[:, 1].std():>10.4f}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--replicates", type=int, default=40)
    args = parser.parse_args()
    gp_recovery(args.replicates, sizes=(500, 2000, 8000))
    cev_recovery(max(args.replicates // 2, 5), sizes=(1000, 4000))
