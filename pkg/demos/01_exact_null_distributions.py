"""
Exact null distributions and randomized critical values
=======================================================

Under the null hypothesis every set of second-sample ranks is equally
likely, whatever the common continuous distribution. The law of a linear
rank statistic is therefore a finite combinatorial object.
"""

import numpy as np

from rankpower import SampleSizes, critical_value, null_pmf, score_vector

# Wilcoxon scores are integers, so the law comes from a dynamic programme
# and carries exact rational probabilities.
sizes = SampleSizes(2, 2)
pmf = null_pmf(score_vector("wilcoxon", sizes.N), sizes)
for t, p in zip(pmf.support, pmf.exact):
    print(f"T = {t:g}: {p}")

# Real-valued scores (van der Waerden, expected normal order statistics,
# Savage) are handled by enumerating the rank sets.
sizes = SampleSizes(6, 5)
for kind in ("vdw", "normal", "savage"):
    pmf = null_pmf(score_vector(kind, sizes.N), sizes)
    print(f"{kind:8s} atoms={len(pmf):4d} mean={pmf.mean():+.6f}")

# A randomized test rejects above the threshold and with probability gamma
# on it, which makes the size exactly alpha.
test = critical_value(score_vector("wilcoxon", sizes.N), sizes, 0.05)
print(f"threshold={test.threshold:g} gamma={test.gamma:.4f} size={test.size}")

# Large samples: the Wilcoxon law at m = n = 400 comes from Fourier
# inversion of its generating function.
big = SampleSizes(400, 400)
test = critical_value(score_vector("wilcoxon", big.N), big, 0.05)
mean = big.n * (big.N + 1) / 2
sd = np.sqrt(big.m * big.n * (big.N + 1) / 12)
print(f"m = n = 400: threshold {test.threshold:g}, normal approximation {mean + 1.6449 * sd:.1f}")
