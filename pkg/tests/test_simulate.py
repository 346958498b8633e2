import math

import numpy as np
import pytest
from scipy import stats

from rankpower import (
    ComparatorTest,
    DistributionFamily,
    Lehmann,
    Local,
    NotBracketed,
    RankTest,
    RngSpec,
    SampleSizes,
    Shift,
    critical_value,
    draw_two_samples,
    exact_power,
    matched_sample_size,
    mp_test,
    power_mc,
    score_vector,
)
from rankpower.distributions import student_t_cdf, student_t_ppf
from rankpower.simulate import rejection_indicators, uniform_columns

FAMILIES = list(DistributionFamily)


def within(est, value, k=4.0):
    return abs(est.estimate - value) <= k * max(est.std_error, math.sqrt(value * (1 - value) / est.reps))


class TestRngSpec:
    def test_seed_range(self):
        with pytest.raises(ValueError):
            RngSpec(-1)
        with pytest.raises(ValueError):
            RngSpec(2**64)
        RngSpec(2**64 - 1)

    def test_chunk_size_positive(self):
        with pytest.raises(ValueError):
            RngSpec(1, chunk_size=0)

    def test_columns_nested_across_widths(self):
        spec = RngSpec(5)
        wide = uniform_columns(spec, 3, 1, 50, 130)
        narrow = uniform_columns(spec, 3, 1, 50, 7)
        np.testing.assert_array_equal(wide[:, :7], narrow)

    def test_streams_differ(self):
        spec = RngSpec(5)
        a = uniform_columns(spec, 0, 0, 10, 3)
        b = uniform_columns(spec, 0, 1, 10, 3)
        assert not np.array_equal(a, b)

    def test_open_interval(self):
        u = uniform_columns(RngSpec(0), 0, 0, 10_000, 64)
        assert u.min() > 0 and u.max() < 1


class TestDrawTwoSamples:
    def test_null_is_exchangeable(self):
        x, y = draw_two_samples(SampleSizes(20_000, 20_000), Lehmann(1.0), DistributionFamily.NORMAL, rng=3)
        assert stats.ks_2samp(x, y).statistic < 0.02

    def test_lehmann_two_uniform_mean(self):
        _, y = draw_two_samples(SampleSizes(1, 200_000), Lehmann(2.0), DistributionFamily.UNIFORM, rng=4)
        se = math.sqrt(1 / 18 / y.size)  # var of density 2y on (0,1) is 1/18
        assert abs(y.mean() - 2 / 3) < 4 * se

    def test_zero_shift_equals_null(self):
        sz = SampleSizes(7, 9)
        for fam in FAMILIES:
            a = draw_two_samples(sz, Shift(0.0, fam), rng=11)
            b = draw_two_samples(sz, Lehmann(1.0), fam, rng=11)
            np.testing.assert_array_equal(a[0], b[0])
            np.testing.assert_array_equal(a[1], b[1])

    def test_shift_moves_y_only(self):
        sz = SampleSizes(4, 5)
        x0, y0 = draw_two_samples(sz, Shift(0.0), rng=2)
        x1, y1 = draw_two_samples(sz, Shift(1.5), rng=2)
        np.testing.assert_array_equal(x0, x1)
        np.testing.assert_allclose(y1 - y0, 1.5)

    def test_local_theta(self):
        assert Local(2.0).theta(16) == 0.5

    def test_sizes(self):
        x, y = draw_two_samples(SampleSizes(3, 8), Lehmann(3.0), DistributionFamily.CAUCHY, rng=0)
        assert x.shape == (3,) and y.shape == (8,)


class TestStudentT:
    @pytest.mark.parametrize("t", [-30.0, -2.0, -0.3, 0.0, 0.7, 5.0, 1e3])
    def test_cdf_closed_forms(self, t):
        assert student_t_cdf(t, 1) == pytest.approx(0.5 + math.atan(t) / math.pi, abs=1e-12)
        assert student_t_cdf(t, 2) == pytest.approx(0.5 + t / (2 * math.sqrt(2 + t * t)), abs=1e-12)

    @pytest.mark.parametrize("p", [0.001, 0.05, 0.3, 0.5, 0.9, 0.975])
    def test_ppf_closed_forms(self, p):
        assert student_t_ppf(p, 1) == pytest.approx(math.tan(math.pi * (p - 0.5)), rel=1e-10, abs=1e-10)
        assert student_t_ppf(p, 2) == pytest.approx((2 * p - 1) / math.sqrt(2 * p * (1 - p)), rel=1e-10, abs=1e-10)

    @pytest.mark.parametrize("df", [3, 7, 30])
    def test_ppf_inverts_cdf(self, df):
        for p in (0.01, 0.2, 0.95):
            assert student_t_cdf(student_t_ppf(p, df), df) == pytest.approx(p, abs=1e-12)

    def test_ppf_domain(self):
        with pytest.raises(ValueError):
            student_t_ppf(1.0, 3)


class TestComparatorTest:
    def test_score_needs_family(self):
        with pytest.raises(ValueError):
            ComparatorTest("perm-score", 0.05)

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            ComparatorTest("t-test", 1.0)

    def test_names(self):
        assert ComparatorTest("t-test", 0.05).name == "t-test"
        assert ComparatorTest("perm-score", 0.05, family="logistic").name == "perm-score-logistic"
        assert RankTest("savage", 0.05).name == "rank-savage"


SIZE_TESTS = [
    RankTest("wilcoxon", 0.05),
    RankTest("vdw", 0.05),
    RankTest("normal", 0.1),
    RankTest("savage", 0.1),
    ComparatorTest("t-test", 0.05),
    ComparatorTest("t-test", 0.1),
    ComparatorTest("perm-mean", 0.05),
    ComparatorTest("perm-mean", 0.1),
    ComparatorTest("perm-score", 0.05, family="logistic"),
]


class TestPowerMc:
    def test_min_reps(self):
        with pytest.raises(ValueError):
            power_mc(RankTest("wilcoxon", 0.1), SampleSizes(2, 2), Lehmann(2.0), reps=99)

    def test_standard_error(self):
        est = power_mc(RankTest("wilcoxon", 0.1), SampleSizes(3, 3), Lehmann(2.0), reps=5000, rng=1)
        assert est.std_error == math.sqrt(est.estimate * (1 - est.estimate) / 5000)
        assert est.rejections == round(est.estimate * 5000)

    @pytest.mark.slow
    @pytest.mark.parametrize("test", SIZE_TESTS, ids=lambda t: f"{t.name}-{t.alpha}")
    def test_size_recovery(self, test):
        est = power_mc(test, SampleSizes(4, 5), Shift(0.0, DistributionFamily.NORMAL), reps=10**6, rng=17)
        assert within(est, test.alpha)

    @pytest.mark.parametrize("alpha", [0.05, 0.1])
    def test_mp_size_recovery(self, alpha):
        sz = SampleSizes(4, 4)
        est = power_mc(mp_test(sz, 2.0, alpha), sz, Lehmann(1.0), reps=200_000, rng=8)
        assert within(est, alpha)

    @pytest.mark.parametrize("sizes", [(15, 15), (30, 20)])
    def test_sampled_permutation_size(self, sizes):
        test = ComparatorTest("perm-mean", 0.05)
        est = power_mc(test, SampleSizes(*sizes), Shift(0.0, DistributionFamily.EXPONENTIAL), reps=50_000, rng=3)
        assert within(est, 0.05)

    def test_wilcoxon_two_two(self):
        sz = SampleSizes(2, 2)
        test = RankTest("wilcoxon", 1 / 6)
        est = power_mc(test, sz, Lehmann(2.0), reps=10**6, rng=42)
        assert within(est, 1 / 3)

    @pytest.mark.parametrize(
        "kind,m,n,a,alpha",
        [("vdw", 3, 4, 1.5, 0.1), ("savage", 4, 4, 3.0, 0.05), ("normal", 5, 3, 0.5, 0.1), ("wilcoxon", 6, 6, 2.0, 0.05)],
    )
    def test_exact_agreement(self, kind, m, n, a, alpha):
        sz = SampleSizes(m, n)
        exact = exact_power(critical_value(score_vector(kind, sz.N), sz, alpha), a)
        est = power_mc(RankTest(kind, alpha), sz, Lehmann(a), DistributionFamily.LOGISTIC, reps=200_000, rng=5)
        assert within(est, exact)

    def test_mp_exact_agreement(self):
        sz = SampleSizes(3, 3)
        test = mp_test(sz, 2.0, 0.1)
        est = power_mc(test, sz, Lehmann(2.0), reps=200_000, rng=6)
        assert within(est, exact_power(test, 2.0))

    @pytest.mark.parametrize("family", [DistributionFamily.NORMAL, DistributionFamily.EXPONENTIAL])
    def test_distribution_free_under_lehmann(self, family):
        sz = SampleSizes(5, 5)
        exact = exact_power(critical_value(score_vector("wilcoxon", 10), sz, 0.1), 2.0)
        est = power_mc(RankTest("wilcoxon", 0.1), sz, Lehmann(2.0), family, reps=200_000, rng=9)
        assert within(est, exact)

    def test_rank_decision_invariant_to_family(self):
        # identical uniforms, different F: ranks, hence decisions, coincide
        sz = SampleSizes(5, 6)
        spec = RngSpec(21, chunk_size=3000)
        ref = rejection_indicators(RankTest("vdw", 0.1), sz, Lehmann(1.7), DistributionFamily.UNIFORM, 9000, spec)
        for fam in FAMILIES[1:]:
            got = rejection_indicators(RankTest("vdw", 0.1), sz, Lehmann(1.7), fam, 9000, spec)
            np.testing.assert_array_equal(got, ref)

    def test_reproducible_and_thread_invariant(self):
        sz = SampleSizes(6, 7)
        spec = RngSpec(123, chunk_size=2500)
        args = (ComparatorTest("perm-mean", 0.05), sz, Local(2.0), None)
        one = power_mc(*args, reps=10_000, rng=spec, threads=1)
        again = power_mc(*args, reps=10_000, rng=spec, threads=1)
        many = power_mc(*args, reps=10_000, rng=spec, threads=4)
        assert one == again == many

    def test_chunk_layout_matters_only_through_seeds(self):
        sz = SampleSizes(3, 3)
        a = power_mc(RankTest("wilcoxon", 0.1), sz, Lehmann(2.0), reps=10_000, rng=RngSpec(1, 1000))
        b = power_mc(RankTest("wilcoxon", 0.1), sz, Lehmann(2.0), reps=10_000, rng=RngSpec(1, 1000))
        assert a.estimate == b.estimate

    @pytest.mark.parametrize("m,n", [(2, 3), (4, 4), (6, 6), (5, 6)])
    def test_coupling_monotone_in_a(self, m, n):
        sz = SampleSizes(m, n)
        test = RankTest("wilcoxon", 0.1)
        spec = RngSpec(77, chunk_size=5000)
        rows = [rejection_indicators(test, sz, Lehmann(a), None, 20_000, spec) for a in (1.0, 1.5, 2.0, 3.0)]
        for lo, hi in zip(rows, rows[1:]):
            assert np.all(hi >= lo)  # pathwise, not just on average
        exact = [exact_power(test.at(sz), a) for a in (1.0, 1.5, 2.0, 3.0)]
        assert np.all(np.diff(exact) > 0)


class TestMatchedSampleSize:
    def test_self_deficiency(self):
        test = RankTest("wilcoxon", 0.05)
        rows = matched_sample_size(test, test, [5, 10, 20], Local(2.0), reps=2000, rng=4)
        assert [r.d for r in rows] == [0, 0, 0]
        assert all(r.within_noise for r in rows)
        assert all(r.power_at_k == r.target for r in rows)

    def test_more_efficient_b_needs_fewer(self):
        # the t-test under normal data needs no more observations than Savage scores
        rows = matched_sample_size(
            ComparatorTest("t-test", 0.05), RankTest("savage", 0.05), [20], Local(2.5), reps=20_000, rng=1
        )
        assert rows[0].d <= 0

    def test_less_efficient_b_needs_more(self):
        rows = matched_sample_size(
            RankTest("savage", 0.05), ComparatorTest("t-test", 0.05), [20], Local(2.5), reps=20_000, rng=1
        )
        assert rows[0].d > 0
        assert rows[0].power_at_k >= rows[0].target

    def test_not_bracketed(self):
        with pytest.raises(NotBracketed):
            matched_sample_size(
                RankTest("wilcoxon", 0.001),
                ComparatorTest("t-test", 0.5),
                [10],
                Local(0.5),
                reps=1000,
                rng=0,
                max_factor=2,
            )

    def test_needs_local(self):
        t = RankTest("wilcoxon", 0.05)
        with pytest.raises(TypeError):
            matched_sample_size(t, t, [5], Shift(0.5), reps=1000)

    def test_tolerance_override(self):
        t = RankTest("wilcoxon", 0.05)
        rows = matched_sample_size(
            RankTest("savage", 0.05), t, [10], Local(2.0), target_tolerance=0.0, reps=5000, rng=2
        )
        assert rows[0].within_noise is False or rows[0].power_at_k == rows[0].target
