"""
Empirical sample-size matching
==============================

For each n, estimate the power of test A at (n, n) against theta = c/sqrt(n),
then find the smallest k at which test B reaches that power on (k, k)
against the same theta. The difference k - n is the empirical deficiency.
This demo uses few replicates; see the acceptance suite for the full runs.
"""

from rankpower import ComparatorTest, DistributionFamily, Local, RankTest, matched_sample_size

reps = 20_000
grid = [10, 20, 40]

print("Wilcoxon (B) against the t-test (A), normal shift, c = 2.5")
for r in matched_sample_size(RankTest("wilcoxon", 0.05), ComparatorTest("t-test", 0.05), grid, Local(2.5), reps=reps, rng=3):
    print(f"  n={r.n:3d} k={r.k:3d} d={r.d:2d} target={r.target:.4f} power(k)={r.power_at_k:.4f} within noise={r.within_noise}")

print("\nWilcoxon (B) against the logistic score test (A), logistic shift, c = 4")
efficient = ComparatorTest("perm-score", 0.05, family=DistributionFamily.LOGISTIC)
for r in matched_sample_size(RankTest("wilcoxon", 0.05), efficient, grid, Local(4.0, DistributionFamily.LOGISTIC), reps=reps, rng=3):
    print(f"  n={r.n:3d} k={r.k:3d} d={r.d:2d} k resolution={r.k_resolution:.2f}")
