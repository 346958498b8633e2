"""
Exact power against Lehmann alternatives
========================================

When the second sample has distribution F^a, the probability of each rank
set has a closed form that does not involve F. Exact power of any rank test
follows by summation, and the most powerful rank test is obtained by
ordering the rank sets by that probability.
"""

from rankpower import (
    RankSet,
    SampleSizes,
    critical_value,
    exact_power,
    lmp_scores,
    mp_test,
    rankset_prob_lehmann,
    score_vector,
)

# One observation each: the Y value is the larger with probability a/(a+1).
top = RankSet((2,), SampleSizes(1, 1))
print("P(top rank), a = 2, 3:", rankset_prob_lehmann(top, 2.0), rankset_prob_lehmann(top, 3.0))

sizes = SampleSizes(4, 4)
alpha, a = 0.1, 2.0
print(f"\nexact power at m = n = 4, alpha = {alpha}, a = {a}")
for kind in ("wilcoxon", "vdw", "normal", "savage"):
    test = critical_value(score_vector(kind, sizes.N), sizes, alpha)
    print(f"  {kind:8s} {exact_power(test, a):.6f}")

mp = mp_test(sizes, a, alpha)
print(f"  MP       {exact_power(mp, a):.6f}  ({len(mp.reject_set)} rank sets rejected outright, gamma={mp.gamma:.3f})")

# Near a = 1 the best test is the one built on Savage scores.
print("\nlocally most powerful scores for N = 6:", lmp_scores(6).values.round(4))

# Power as a function of a, with a < 1 favouring small Y ranks.
test = critical_value(score_vector("savage", sizes.N), sizes, alpha)
for a in (0.5, 1.0, 1.5, 2.0, 3.0, 5.0):
    print(f"  a = {a:3.1f}: Savage power {exact_power(test, a):.4f}")
