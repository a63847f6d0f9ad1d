"""Quick self-verification: cross-checks the main path against the oracle
module and the calibration formulas.  Used by ``dpsco verify``."""

from __future__ import annotations

import math

import numpy as np

from . import algorithms, geometry, oracle
from .core import approx_budget, tnc_model, risk_gradient
from .mechanisms import gaussian_scale, laplace_scale


def check_noise_roundtrip(trials: int = 200, seed: int = 0) -> str:
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        sens = 10.0 ** rng.uniform(-4, 2)
        eps = 10.0 ** rng.uniform(-2, 1)
        delta = 10.0 ** rng.uniform(-8, -3)
        if eps > 2 * math.log(1 / delta):
            continue
        b = approx_budget(eps, delta)
        sigma = gaussian_scale(sens, b)
        back = sigma * eps / (4.0 * math.sqrt(math.log(1.0 / delta)))
        assert abs(back - sens) <= 1e-12 * sens
        assert laplace_scale(sens, eps) == sens / eps
    return f"{trials} calibration round-trips"


def check_projections(trials: int = 100, seed: int = 1) -> str:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        d = int(rng.integers(2, 8))
        sets = [geometry.L2Ball(center=rng.normal(0, 0.2, d), radius=1.0),
                geometry.L1Ball(radius=1.0),
                geometry.Box(lower=-0.6 * np.ones(d),
                             upper=0.6 * np.ones(d))]
        k = int(rng.integers(1, 3))
        chosen = [sets[i] for i in rng.choice(3, size=k, replace=False)]
        fset = chosen[0] if k == 1 else geometry.Intersection(tuple(chosen))
        p = rng.normal(0, 2, d)
        ours = geometry.project(fset, p)
        ref = oracle.qp_project(chosen, p)
        worst = max(worst, float(np.linalg.norm(ours - ref)))
    assert worst <= 1e-6, f"projection deviation {worst:.2e}"
    return f"{trials} projections within {worst:.2e} of the QP oracle"


def check_tnc_stationarity(trials: int = 30, seed: int = 2) -> str:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        d = int(rng.integers(2, 12))
        theta = float(rng.choice([2.0, 2.5, 3.0]))
        n = int(rng.integers(50, 500))
        X = rng.choice([-1.0, 1.0], size=(n, d)) / math.sqrt(d)
        z = X.mean(axis=0)
        if np.linalg.norm(z) > 1:
            continue
        w_star = oracle.tnc_minimizer(z, theta)
        g = risk_gradient(tnc_model(theta), w_star, X, np.zeros(n))
        worst = max(worst, float(np.linalg.norm(g)))
    assert worst <= 1e-8, f"stationarity residual {worst:.2e}"
    return f"{trials} hard-instance stationarity residuals <= {worst:.2e}"


def check_determinism(seed: int = 3) -> str:
    from . import bench

    cfg = dict(problem="synthetic_tnc", algorithms=["phased_sgd"],
               sweep_kind="n", sweep_values=[512], seeds=2,
               master_seed=seed, timing=False)
    t1 = bench.run_experiment(bench.ExperimentConfig(**cfg))
    t2 = bench.run_experiment(bench.ExperimentConfig(**cfg))
    e1 = [r.per_seed_errors for r in t1.rows]
    e2 = [r.per_seed_errors for r in t2.rows]
    assert e1 == e2, "identical configs produced different results"
    return "re-run reproduces identical results"


ALL_CHECKS = [
    ("noise calibration round-trip", check_noise_roundtrip),
    ("projection vs QP oracle", check_projections),
    ("TNC hard-instance stationarity", check_tnc_stationarity),
    ("end-to-end determinism", check_determinism),
]


def run_all(echo=print) -> bool:
    ok = True
    for name, fn in ALL_CHECKS:
        try:
            detail = fn()
            echo(f"PASS  {name}: {detail}")
        except Exception as exc:
            ok = False
            echo(f"FAIL  {name}: {exc}")
    return ok
