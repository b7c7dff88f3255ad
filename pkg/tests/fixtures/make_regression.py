"""Regenerate regression.json. Run from the repo root: python tests/fixtures/make_regression.py"""
import json
from pathlib import Path

import numpy as np

from rtemvdr import asymptotics as asy
from rtemvdr.mvdr import oracle_snr
from rtemvdr.rte import rte_residual, solve_rte
from rtemvdr.scenario import build_covariance, reference_scenario, sample_snapshots


def bisect(f, lo, hi, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def main():
    s = reference_scenario()
    sigma = build_covariance(s)
    s0 = s.steering
    rho, n = 0.65, 40

    batch = sample_snapshots(s, n, 1)
    est = solve_rte(batch, rho)
    assert rte_residual(est.matrix, batch, rho) <= 1e-10

    lam = np.linalg.eigvalsh(sigma)
    gamma = bisect(lambda g: np.mean(lam / (rho * g + (1 - rho) * lam)) - 1, 1e-9, 1e4)
    assert abs(gamma - asy.solve_gamma(sigma, rho)) < 1e-10 * gamma
    alpha = asy.compute_alpha(rho, gamma, 4 / n)
    delta = asy.solve_delta(sigma, alpha, n)
    assert abs(asy.delta_residual(sigma, alpha, n, delta)) < 1e-10 * delta
    sol = asy.solve_sigma0(sigma, rho, full_output=True)
    center, scale = asy.large_nn_center_scale(s, rho, 100, 2000, seed=3)

    out = {
        "rte": {"seed": 1, "n": n, "rho": rho, "iterations": est.iterations,
                "real": est.matrix.real.tolist(), "imag": est.matrix.imag.tolist()},
        "oracle_snr": oracle_snr(sigma, s0),
        "gamma_rho065": gamma,
        "alpha_rho065_n40": alpha,
        "delta_rho065_n40": delta,
        "sigma0_eigvals_rho065": sol.eigvals.tolist(),
        "snr0_rho065": asy.snr0(sigma, sol.matrix, s0),
        "large_nn_rho065_n100": {"n_trials": 2000, "seed": 3, "center": center, "scale": scale},
    }
    path = Path(__file__).with_name("regression.json")
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps({k: v for k, v in out.items() if k != "rte"}, indent=2))


if __name__ == "__main__":
    main()
