"""Exact tail, tilted Monte Carlo and the sharp approximation side by side.

Run: python3 demos/sharp_tail.py
"""
import numpy as np

from remlab.field import FieldSpec, sample_field
from remlab.tails import exact_tail, sharp_tail, tilted_tail

m = 0.3
spec = FieldSpec.uniform(0.5, 1.5)

print(f"{'n':>3} {'a/Sigma':>8} {'exact':>12} {'tilted':>12} {'stderr':>10} {'sharp':>12} {'ratio':>7}")
for n in (12, 16, 20, 24):
    h = sample_field(spec, n, seed=n, bias=m)
    for frac in (0.3, 0.45, 0.6):
        a = frac * h.sigma_n
        ex = exact_tail(h, m, a, threads=4).value
        mc = tilted_tail(h, m, a, samples=2 * 10**5, seed=1, threads=4)
        J = sharp_tail(h, m, a).value
        print(f"{n:3d} {frac:8.2f} {ex:12.5e} {mc.value:12.5e} {mc.stderr:10.2e} {J:12.5e} {ex / J:7.4f}")
