"""
Relative efficiency and deficiency from power expansions
========================================================

A procedure's power against theta = c / sqrt(n) is modelled as
p0(c) + p1(c) / sqrt(n) + p2(c) / n. Matching first-order terms gives the
relative efficiency. When that efficiency is one, matching the whole
expansion gives the deficiency: how many extra observations the weaker
procedure needs.
"""

import numpy as np
from scipy import special

from rankpower import (
    GaussianLocalPower,
    PowerExpansion,
    are,
    deficiency_curve,
    deficiency_leading_coeff,
)

# Gaussian local power models: efficiency is the squared ratio of efficacies.
for ea, eb in ((2.0, 1.0), (1.0, 2.0), (1.0, np.sqrt(3 / np.pi))):
    E = are(GaussianLocalPower(ea, 0.05), GaussianLocalPower(eb, 0.05), 1.0)
    print(f"efficacies {ea:.3f} vs {eb:.3f}: E = {E:.6f}")

# Same first-order power, different second-order terms.
z = special.ndtri(0.95)
b0 = lambda c: float(special.ndtr(c - z))
A = PowerExpansion(b0, lambda c: 0.1, domain=(0.0, 7.6))
B = PowerExpansion(b0, domain=(0.0, 7.6))
fit = deficiency_curve(A, B, 1.0, [1e2, 1e3, 1e4, 1e5, 1e6])
print("\nn, d_n:")
for n, d in zip(fit.n_grid, fit.d_values):
    print(f"  {n:9.0f} {d:10.3f}")
print(f"fit d_n = {fit.h1:.4f} sqrt(n) + {fit.h2:.4f} (residual {fit.residual:.2e})")
print(f"closed form h1 = {deficiency_leading_coeff(A, B, 1.0):.4f}")

# Equal n^(-1/2) terms: the deficiency settles to a constant.
A2 = PowerExpansion(b0, lambda c: 0.05, lambda c: 0.3, domain=(0.0, 7.6))
B2 = PowerExpansion(b0, lambda c: 0.05, lambda c: -0.2, domain=(0.0, 7.6))
fit2 = deficiency_curve(A2, B2, 1.0, [1e2, 1e3, 1e4, 1e5, 1e6])
print("\nequal first-order terms, d_n:", np.round(fit2.d_values, 4))
