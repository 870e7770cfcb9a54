"""Ranked Gibbs weights of the thinned system against Poisson-Dirichlet draws.

Run: python3 demos/gibbs_weights.py
"""
import numpy as np

from remlab.field import FieldSpec, sample_field
from remlab.gibbs import PdParams, gibbs_weights, pd_sample, weight_stats
from remlab.legendre import asymptotic_solve
from remlab.process import ThinningSpec, run_replicates
from remlab.rng import derive_key

n, m, rho, R = 20, 0.3, 0.5, 300
field = FieldSpec.uniform(0.5, 1.5)
thin = ThinningSpec(rho, m, n)
lam = asymptotic_solve(field, m, thin.c).lambda_hat

for factor in (1.5, 2.5, 4.0):
    beta = factor * lam
    params = PdParams.from_beta(lam, beta)
    gibbs = weight_stats(run_replicates(
        lambda r: gibbs_weights(sample_field(field, n, derive_key(1, "demo-field", r), m), m, thin,
                                beta, derive_key(1, "demo-thin", r)), R, threads=4))
    pd = weight_stats(pd_sample(params, 2000, 5, i) for i in range(R))
    print(f"beta={beta:.3f} alpha={params.alpha:.3f}  sum w^2: gibbs {gibbs.mean_sq:.4f}+-{gibbs.stderr_sq:.4f}"
          f"  PD {pd.mean_sq:.4f}+-{pd.stderr_sq:.4f}  (1-alpha = {1 - params.alpha:.4f})"
          f"  w1: gibbs {gibbs.mean_w1:.4f}  PD {pd.mean_w1:.4f}")
