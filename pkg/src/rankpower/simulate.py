"""Seeded Monte Carlo power estimation and empirical sample-size matching.

Randomness layout
-----------------
Replicates are split into chunks of ``RngSpec.chunk_size`` rows. Every block
of uniforms is drawn from its own generator,
``numpy.random.default_rng([seed, chunk, stream, block])``, so

* results do not depend on how many threads process the chunks, and
* column ``j`` of the X (or Y) sample of replicate ``i`` is the same number
  whatever the sample size, which couples runs at different sizes and
  different alternatives (common random numbers).

All samples are produced by inversion, ``F^{-1}(U)`` for X and
``F^{-1}(V^{1/a})`` or ``F^{-1}(V) + theta`` for Y.
"""

from __future__ import annotations

import enum
import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.optimize import isotonic_regression

from .distributions import (
    Alternative,
    DistributionFamily,
    Lehmann,
    Local,
    Shift,
    student_t_ppf,
)
from .errors import CapExceeded, DuplicateValue, NotBracketed
from .exact import DP_BUDGET, MpTest, RandomizedTest, critical_value
from .ranks import SampleSizes, ScoreKind, ScoreVector, custom_scores, rankset_block, score_vector

STREAM_X, STREAM_Y, STREAM_W, STREAM_PERM = 0, 1, 2, 3
BLOCK_COLS = 64
# rows x permutations evaluated at once in permutation tests
PERM_WORK = 4_000_000


@dataclass(frozen=True)
class RngSpec:
    seed: int
    chunk_size: int = 10_000

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")

    def generator(self, chunk: int, stream: int, block: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, chunk, stream, block])


def _open_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    # shift the 2^-53 lattice by half a step: values lie strictly inside (0, 1)
    return rng.random(shape) + 2.0**-54


def uniform_columns(spec: RngSpec, chunk: int, stream: int, rows: int, ncols: int) -> np.ndarray:
    """Uniforms for ``ncols`` columns; column ``j`` does not depend on ``ncols``."""
    nblocks = -(-ncols // BLOCK_COLS)
    blocks = [
        _open_uniform(spec.generator(chunk, stream, b), (rows, BLOCK_COLS))
        for b in range(nblocks)
    ]
    return np.hstack(blocks)[:, :ncols]


def _theta(alt: Alternative, sizes: SampleSizes) -> float:
    if isinstance(alt, Shift):
        return alt.theta
    if isinstance(alt, Local):
        return alt.theta(sizes.n)
    raise TypeError(f"not a shift alternative: {alt!r}")


def _resolve_family(alt: Alternative, family: DistributionFamily | None) -> DistributionFamily:
    if family is not None:
        return DistributionFamily(family)
    if isinstance(alt, (Shift, Local)):
        return alt.family
    return DistributionFamily.UNIFORM


def samples_from_uniforms(
    u: np.ndarray, v: np.ndarray, alt: Alternative, family: DistributionFamily, sizes: SampleSizes
) -> tuple[np.ndarray, np.ndarray]:
    """Transform uniforms for X (``u``) and Y (``v``) into samples under ``alt``."""
    x = family.ppf(u)
    if isinstance(alt, Lehmann):
        y = family.ppf(v ** (1.0 / alt.a))
    else:
        y = family.ppf(v) + _theta(alt, sizes)
    return x, y


def draw_two_samples(
    sizes: SampleSizes,
    alt: Alternative,
    family: DistributionFamily | None = None,
    rng: np.random.Generator | int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One pair of samples: X iid ``F`` and Y iid ``G`` as dictated by ``alt``."""
    rng = np.random.default_rng(rng)
    fam = _resolve_family(alt, family)
    u = _open_uniform(rng, sizes.m)
    v = _open_uniform(rng, sizes.n)
    return samples_from_uniforms(u, v, alt, fam, sizes)


# ---------------------------------------------------------------------------
# tests
# ---------------------------------------------------------------------------


class ComparatorKind(str, enum.Enum):
    TWO_SAMPLE_T = "t-test"
    PERMUTATION_MEAN = "perm-mean"
    PERMUTATION_SCORE = "perm-score"


# real-valued scores are enumerated exactly up to this many rank sets
RANK_ENUM_LIMIT = 10**6
# DP cells per pass and total cell updates allowed when choosing a lattice
LATTICE_CELLS = DP_BUDGET
LATTICE_OPS = 5 * 10**9
# rounding error sd is 1 / (resolution sqrt(12)) in score units
MIN_RESOLUTION = 64
MAX_RESOLUTION = 1024


@dataclass(frozen=True)
class RankTest:
    """Exact randomized linear rank test, built afresh for each sample size.

    Real-valued scores need the full enumeration of rank sets for their exact
    null law. Beyond ``RANK_ENUM_LIMIT`` rank sets the test instead uses the
    scores rounded to the lattice ``round(resolution * (k(i) - k(1)))``, the
    finest lattice (at most ``MAX_RESOLUTION``) whose integer DP fits the
    work budget. That is again a linear rank test with exact size
    ``alpha``, only with slightly perturbed scores. If even
    ``MIN_RESOLUTION`` does not fit, ``CapExceeded`` is raised.
    ``resolution`` forces a specific lattice.
    """

    kind: ScoreKind
    alpha: float
    conservative: bool = False
    resolution: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ScoreKind(self.kind))
        if self.resolution is not None and self.resolution < 1:
            raise ValueError("resolution must be a positive integer")

    @property
    def name(self) -> str:
        return f"rank-{self.kind.value}"

    def at(self, sizes: SampleSizes) -> RandomizedTest:
        return _cached_rank_test(self.kind, self.alpha, self.conservative, self.resolution, sizes.m, sizes.n)


def lattice_resolution(scores: ScoreVector, sizes: SampleSizes) -> int:
    """Largest integer multiplier whose rounded scores fit the DP budget."""
    shifted = scores.values - scores.values[0]
    top = float(np.sort(shifted)[-sizes.n:].sum())
    cells = min(LATTICE_CELLS, LATTICE_OPS / sizes.N)
    return min(MAX_RESOLUTION, int((cells / (sizes.n + 1) - 1) / max(top, 1e-300)))


def lattice_scores(scores: ScoreVector, resolution: int) -> ScoreVector:
    return custom_scores(np.round(resolution * (scores.values - scores.values[0])))


@functools.lru_cache(maxsize=256)
def _cached_rank_test(
    kind: ScoreKind, alpha: float, conservative: bool, resolution: int | None, m: int, n: int
) -> RandomizedTest:
    sizes = SampleSizes(m, n)
    scores = score_vector(kind, sizes.N)
    if resolution is None and not scores.is_integer and sizes.n_ranksets > RANK_ENUM_LIMIT:
        resolution = lattice_resolution(scores, sizes)
        if resolution < MIN_RESOLUTION:
            raise CapExceeded(
                f"{kind.value} scores at {sizes}: exact null law needs more than the work budget"
            )
    if resolution is not None:
        scores = lattice_scores(scores, resolution)
    return critical_value(scores, sizes, alpha, conservative=conservative)


@dataclass(frozen=True)
class ComparatorTest:
    """Non-rank comparison tests, one-sided for Y larger.

    ``TWO_SAMPLE_T``: pooled-variance Student t. ``PERMUTATION_MEAN``:
    permutation test on ``mean(Y) - mean(X)``. ``PERMUTATION_SCORE``:
    permutation test on ``sum_j psi(Y_j - med)`` where ``psi`` is the location
    score of ``family`` and ``med`` the pooled median; for logistic data this
    is the asymptotically efficient parametric score test.

    Permutation tests enumerate all ``C(N, n)`` splits when that number is at
    most ``perm_cap`` and otherwise compare against ``n_perm`` random splits,
    randomizing on the boundary so that the size is exactly ``alpha`` either
    way.
    """

    kind: ComparatorKind
    alpha: float
    family: DistributionFamily | None = None
    n_perm: int = 999
    perm_cap: int = 20_000

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ComparatorKind(self.kind))
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.kind is ComparatorKind.PERMUTATION_SCORE and self.family is None:
            raise ValueError("score permutation test needs a family")

    @property
    def name(self) -> str:
        if self.kind is ComparatorKind.PERMUTATION_SCORE:
            return f"{self.kind.value}-{DistributionFamily(self.family).value}"
        return self.kind.value


AnyTest = Union[RandomizedTest, MpTest, RankTest, ComparatorTest]


@dataclass
class _ChunkContext:
    spec: RngSpec
    chunk: int
    rows: int


Decider = Callable[[np.ndarray, np.ndarray, _ChunkContext], np.ndarray]


def _check_ties(pooled_sorted: np.ndarray) -> None:
    if np.any(pooled_sorted[:, 1:] == pooled_sorted[:, :-1]):
        raise DuplicateValue("tied values in a simulated sample")


def _y_indicator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    pooled = np.concatenate([x, y], axis=1)
    order = np.argsort(pooled, axis=1)
    _check_ties(np.take_along_axis(pooled, order, axis=1))
    return order >= x.shape[1]


def _rank_decider(test: RandomizedTest) -> Decider:
    scores = test.scores.values
    scale = max(1.0, float(np.abs(scores).max()))
    tol = 0.25 if test.scores.is_integer else 1e-9 * scale * test.sizes.n

    def decide(x, y, ctx):
        stat = _y_indicator(x, y) @ scores
        return test.rejection_prob(stat, tol=tol)

    return decide


def _mp_decider(test: MpTest) -> Decider:
    sizes = test.sizes
    if sizes.N > 62:
        raise ValueError("most powerful rank test lookup limited to N <= 62")
    weights = (np.int64(1) << np.arange(sizes.N, dtype=np.int64))
    table = test.rejection_table()
    keys = np.array(
        sorted(sum(1 << (r - 1) for r in ranks) for ranks in table), dtype=np.int64
    )
    by_key = {sum(1 << (r - 1) for r in ranks): p for ranks, p in table.items()}
    phis = np.array([by_key[int(k)] for k in keys])

    def decide(x, y, ctx):
        codes = _y_indicator(x, y).astype(np.int64) @ weights
        if keys.size == 0:
            return np.zeros(codes.size)
        pos = np.clip(np.searchsorted(keys, codes), 0, keys.size - 1)
        return np.where(keys[pos] == codes, phis[pos], 0.0)

    return decide


def _t_decider(test: ComparatorTest, sizes: SampleSizes) -> Decider:
    if sizes.N < 3:
        raise ValueError("two-sample t test needs m + n >= 3")
    crit = student_t_ppf(1 - test.alpha, sizes.N - 2)
    factor = math.sqrt(1 / sizes.m + 1 / sizes.n)

    def decide(x, y, ctx):
        diff = y.mean(axis=1) - x.mean(axis=1)
        ss = ((x - x.mean(axis=1, keepdims=True)) ** 2).sum(1) + (
            (y - y.mean(axis=1, keepdims=True)) ** 2
        ).sum(1)
        sp = np.sqrt(ss / (sizes.N - 2))
        return (diff / (sp * factor) > crit).astype(float)

    return decide


def _subset_indicators(sizes: SampleSizes, test: ComparatorTest, ctx: _ChunkContext) -> tuple[np.ndarray, bool]:
    """Columns are second-sample indicator vectors of candidate splits."""
    if sizes.n_ranksets <= test.perm_cap:
        block = rankset_block(sizes)
        ind = np.zeros((sizes.N, block.shape[0]))
        ind[block.T - 1, np.arange(block.shape[0])] = 1.0
        return ind, True
    rng = ctx.spec.generator(ctx.chunk, STREAM_PERM, sizes.N)
    keys = rng.random((test.n_perm, sizes.N))
    chosen = np.argsort(keys, axis=1)[:, : sizes.n]
    ind = np.zeros((sizes.N, test.n_perm))
    ind[chosen.T, np.arange(test.n_perm)] = 1.0
    return ind, False


def _perm_decider(test: ComparatorTest, sizes: SampleSizes) -> Decider:
    alpha = test.alpha

    def transform(pooled):
        if test.kind is ComparatorKind.PERMUTATION_MEAN:
            return pooled
        fam = DistributionFamily(test.family)
        med = np.median(pooled, axis=1, keepdims=True)
        return fam.location_score(pooled - med)

    def decide(x, y, ctx):
        pooled = np.concatenate([x, y], axis=1)
        s = transform(pooled)
        observed = s[:, sizes.m :].sum(axis=1)
        ind, exact = _subset_indicators(sizes, test, ctx)
        k = ind.shape[1]
        tol = 1e-10 * np.abs(s).sum(axis=1)
        greater = np.empty(pooled.shape[0])
        ties = np.empty(pooled.shape[0])
        step = max(1, PERM_WORK // k)
        for lo in range(0, pooled.shape[0], step):
            sl = slice(lo, lo + step)
            sums = s[sl] @ ind
            ob = observed[sl, None]
            t = tol[sl, None]
            greater[sl] = (sums > ob + t).sum(axis=1)
            ties[sl] = (np.abs(sums - ob) <= t).sum(axis=1)
        if exact:
            budget = alpha * k
            phi = np.where(
                greater + ties <= budget,
                1.0,
                np.where(greater >= budget, 0.0, (budget - greater) / np.maximum(ties, 1)),
            )
            return np.clip(phi, 0.0, 1.0)
        # observed value ranks uniformly among the k + 1 exchangeable values
        slots = alpha * (k + 1)
        whole = math.floor(slots)
        frac = slots - whole
        full = np.clip(whole - greater, 0, ties + 1)
        edge = ((greater <= whole) & (whole <= greater + ties)).astype(float)
        return (full + frac * edge) / (ties + 1)

    return decide


def make_decider(test: AnyTest, sizes: SampleSizes) -> Decider:
    if isinstance(test, RankTest):
        return _rank_decider(test.at(sizes))
    if isinstance(test, RandomizedTest):
        if test.sizes != sizes:
            raise ValueError(f"test built for {test.sizes}, sampling {sizes}")
        return _rank_decider(test)
    if isinstance(test, MpTest):
        if test.sizes != sizes:
            raise ValueError(f"test built for {test.sizes}, sampling {sizes}")
        return _mp_decider(test)
    if isinstance(test, ComparatorTest):
        if test.kind is ComparatorKind.TWO_SAMPLE_T:
            return _t_decider(test, sizes)
        return _perm_decider(test, sizes)
    raise TypeError(f"unsupported test {test!r}")


# ---------------------------------------------------------------------------
# Monte Carlo power
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerEstimate:
    estimate: float
    std_error: float
    reps: int
    test: str
    alternative: Alternative
    rejections: int = 0


def rejection_indicators(
    test: AnyTest,
    sizes: SampleSizes,
    alt: Alternative,
    family: DistributionFamily | None,
    reps: int,
    rng: RngSpec,
    threads: int = 1,
) -> np.ndarray:
    """Per-replicate rejection indicators, in replicate order."""
    if reps < 1:
        raise ValueError("reps must be positive")
    fam = _resolve_family(alt, family)
    decide = make_decider(test, sizes)
    nchunks = -(-reps // rng.chunk_size)

    def run(chunk: int) -> np.ndarray:
        rows = min(rng.chunk_size, reps - chunk * rng.chunk_size)
        u = uniform_columns(rng, chunk, STREAM_X, rows, sizes.m)
        v = uniform_columns(rng, chunk, STREAM_Y, rows, sizes.n)
        w = _open_uniform(rng.generator(chunk, STREAM_W), rows)
        x, y = samples_from_uniforms(u, v, alt, fam, sizes)
        phi = decide(x, y, _ChunkContext(rng, chunk, rows))
        return w < phi

    if threads <= 1 or nchunks == 1:
        parts = [run(c) for c in range(nchunks)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(nchunks)))
    return np.concatenate(parts)


def power_mc(
    test: AnyTest,
    sizes: SampleSizes,
    alt: Alternative,
    family: DistributionFamily | None = None,
    reps: int = 10_000,
    rng: RngSpec | int = 0,
    threads: int = 1,
) -> PowerEstimate:
    """Monte Carlo rejection rate of ``test`` under ``alt``.

    Boundary randomization is carried out with an independent uniform per
    replicate. The standard error is the binomial one,
    ``sqrt(p (1 - p) / reps)``.
    """
    if reps < 100:
        raise ValueError("need at least 100 replicates")
    spec = rng if isinstance(rng, RngSpec) else RngSpec(int(rng))
    hits = rejection_indicators(test, sizes, alt, family, reps, spec, threads)
    count = int(hits.sum())
    p = count / reps
    return PowerEstimate(p, math.sqrt(p * (1 - p) / reps), reps, test.name, alt, count)


# ---------------------------------------------------------------------------
# empirical sample-size matching
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatchedSize:
    """Outcome of matching test B's power to test A's at one ``n``.

    ``within_noise`` is set when ``|power_B(k) - target| < 2 SE``, i.e. the
    match cannot be told apart from a neighbouring ``k`` at this number of
    replicates. ``k_resolution`` is the paired standard error of the power
    difference divided by the local slope of B's power in ``k``.
    """

    n: int
    k: int
    d: int
    target: float
    power_at_k: float
    std_error: float
    within_noise: bool
    k_resolution: float
    evaluations: dict[int, float] = field(default_factory=dict, repr=False)


def _smoothed(points: dict[int, float], smooth: bool) -> tuple[np.ndarray, np.ndarray]:
    ks = np.array(sorted(points))
    ps = np.array([points[k] for k in ks])
    if smooth and ks.size > 1:
        ps = isotonic_regression(ps, increasing=True).x
    return ks, ps


def matched_sample_size(
    test_b: AnyTest,
    test_a: AnyTest,
    n_grid: Sequence[int],
    alt_local: Local,
    family: DistributionFamily | None = None,
    target_tolerance: float | None = None,
    rng: RngSpec | int = 0,
    *,
    reps: int = 100_000,
    threads: int = 1,
    smooth: bool = True,
    max_factor: int = 64,
    k_min: int = 2,
) -> list[MatchedSize]:
    """Smallest ``k`` at which B on ``(k, k)`` matches A's power on ``(n, n)``.

    The shift is held at ``theta = c / sqrt(n)`` for both tests. All
    evaluations share random numbers, so B's estimated power is computed on
    nested samples as ``k`` varies and on the same data A saw. With
    ``smooth=True`` the evaluated power-vs-``k`` points are replaced by their
    isotonic (nondecreasing) fit before every bisection decision.

    ``target_tolerance`` overrides the ``2 SE`` threshold behind
    ``MatchedSize.within_noise``.

    Raises
    ------
    NotBracketed
        If B's power stays below the target for every ``k <= max_factor * n``.
    """
    if not isinstance(alt_local, Local):
        raise TypeError("matching is defined for Local(c) alternatives")
    spec = rng if isinstance(rng, RngSpec) else RngSpec(int(rng))
    fam = _resolve_family(alt_local, family)
    rows: list[MatchedSize] = []
    for n in n_grid:
        n = int(n)
        shift = Shift(alt_local.theta(n), fam)
        ind_a = rejection_indicators(test_a, SampleSizes(n, n), shift, fam, reps, spec, threads)
        target = float(ind_a.mean())
        indicators: dict[int, np.ndarray] = {}
        power: dict[int, float] = {}

        def evaluate(k: int) -> None:
            if k not in power:
                ind = rejection_indicators(test_b, SampleSizes(k, k), shift, fam, reps, spec, threads)
                indicators[k] = ind
                power[k] = float(ind.mean())

        def bracket() -> tuple[int | None, int | None]:
            ks, ps = _smoothed(power, smooth)
            above = np.flatnonzero(ps >= target)
            if above.size == 0:
                return int(ks[-1]), None
            hi = int(ks[above[0]])
            below = ks[ks < hi]
            return (int(below[-1]) if below.size else None), hi

        start = max(n, k_min)
        evaluate(start)
        step = max(1, n // 8)
        lo, hi = bracket()
        while hi is None:
            nxt = lo + step
            if nxt > max_factor * n:
                raise NotBracketed(f"power of {test_b.name} never reaches {target:.4f} for n={n}")
            evaluate(nxt)
            step *= 2
            lo, hi = bracket()
        while lo is None and hi > k_min:
            evaluate(max(k_min, hi - step))
            step *= 2
            lo, hi = bracket()
        while lo is not None and hi - lo > 1:
            evaluate((lo + hi) // 2)
            lo, hi = bracket()

        k = hi
        ks, ps = _smoothed(power, smooth)
        p_k = float(ps[ks == k][0])
        se = math.sqrt(target * (1 - target) / reps)
        threshold = 2 * se if target_tolerance is None else target_tolerance
        diff = indicators[k].astype(float) - ind_a
        paired_se = float(diff.std(ddof=1) / math.sqrt(reps)) if reps > 1 else float("nan")
        slope = (ps[-1] - ps[0]) / (ks[-1] - ks[0]) if ks.size > 1 else float("nan")
        resolution = paired_se / slope if slope and slope > 0 else float("inf")
        rows.append(
            MatchedSize(
                n=n,
                k=k,
                d=k - n,
                target=target,
                power_at_k=p_k,
                std_error=se,
                within_noise=abs(p_k - target) < threshold,
                k_resolution=float(resolution),
                evaluations=dict(power),
            )
        )
    return rows
