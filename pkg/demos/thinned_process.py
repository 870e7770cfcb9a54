"""Thinned, centred energies against the exponential-intensity Poisson process.

Run: python3 demos/thinned_process.py [n] [replicates]
"""
import sys

import numpy as np

from remlab.field import FieldSpec, sample_field
from remlab.legendre import asymptotic_solve, coupled_solve
from remlab.process import ThinningSpec, Window, compare_stats, realize_process, run_replicates
from remlab.rng import derive_key

n = int(sys.argv[1]) if len(sys.argv) > 1 else 20
R = int(sys.argv[2]) if len(sys.argv) > 2 else 300
m, rho = 0.3, 0.5
field = FieldSpec.uniform(0.5, 1.5)
thin = ThinningSpec(rho, m, n)
lam = asymptotic_solve(field, m, thin.c).lambda_hat
window = Window.default(lam)
print(f"n={n}  c={thin.c:.10f}  lambda~={lam:.6f}  expected retained={thin.scale:.2f}")


def job(r):
    h = sample_field(field, n, derive_key(0, "demo-field", r), m)
    sol = coupled_solve(h, m, n * thin.c)
    return realize_process(h, m, thin, window, derive_key(0, "demo-thin", r), solution=sol)


reals = run_replicates(job, R, threads=4)
st = compare_stats(reals, lam, window, 8, (0.5, 1.0))
print(f"{'x_lo':>7} {'x_hi':>7} {'mean':>8} {'se':>7} {'PPP':>8} {'disp':>6}")
for b in range(len(st.mean_count)):
    print(f"{st.edges[b]:7.3f} {st.edges[b + 1]:7.3f} {st.mean_count[b]:8.4f} {st.count_stderr[b]:7.4f} "
          f"{st.predicted[b]:8.4f} {st.dispersion[b]:6.3f}")
print(f"KS {st.ks_stat:.4f} (p = {st.ks_p:.3g}) on {st.n_points} points")
for theta, emp, pred, se in st.laplace_pairs:
    print(f"Laplace theta={theta}: empirical {emp:.4f} +- {se:.4f}, PPP {pred:.4f}")
