"""Exact laws of linear rank statistics under the null and Lehmann alternatives.

Under ``(F, F^a)`` the rank set of the second sample has the law it has under
``(U, U^a)`` for every continuous ``F``, with

    P_a(r) = (m! n! / N!) * a^n * prod_{k=1}^{N} k / (k + (a - 1) e_k(r)),

where ``e_k(r)`` counts the ranks ``<= k``. Everything here is built either
on enumeration of all ``C(N, n)`` rank sets or, for integer scores, on a
dynamic programme over (position, items taken, score sum).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import CapExceeded, LengthMismatch
from .ranks import (
    DEFAULT_ENUMERATION_CAP,
    RankSet,
    SampleSizes,
    ScoreKind,
    ScoreVector,
    rankset_block,
    score_vector,
)

MERGE_TOL = 1e-12
DEFAULT_CHUNK = 1 << 16
# entries in the (items taken) x (score sum) table before the DP refuses
DP_BUDGET = 2 * 10**7
LOG_SPACE_ABOVE = 50


@dataclass(frozen=True, eq=False)
class Pmf:
    """Distribution on a finite set of statistic values.

    ``exact`` holds rational probabilities when they were obtained from
    integer counts, otherwise ``None``.
    """

    support: np.ndarray
    probs: np.ndarray
    exact: tuple[Fraction, ...] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        s = np.asarray(self.support, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if s.shape != p.shape or s.ndim != 1:
            raise ValueError("support and probs must be 1-d and equally long")
        if np.any(np.diff(s) <= 0):
            raise ValueError("support must be strictly ascending")
        if np.any(p <= 0):
            raise ValueError("probabilities must be positive")
        if abs(math.fsum(p) - 1.0) > 1e-10:
            raise ValueError(f"probabilities sum to {math.fsum(p)!r}")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "probs", p)

    def __len__(self) -> int:
        return self.support.size

    def sf(self) -> np.ndarray:
        """``P(T > support[i])`` for every support point."""
        tail = np.cumsum(self.probs[::-1])[::-1]
        return np.append(tail[1:], 0.0)

    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))


# ---------------------------------------------------------------------------
# rank-set probabilities
# ---------------------------------------------------------------------------


def _log_norm_const(sizes: SampleSizes) -> float:
    return -math.log(math.comb(sizes.N, sizes.n))


def log_rankset_probs(block: np.ndarray, sizes: SampleSizes, a: float) -> np.ndarray:
    """Log Lehmann-alternative probabilities for each row of a rank-set array."""
    if a <= 0:
        raise ValueError("Lehmann exponent must be positive")
    block = np.atleast_2d(block)
    rows = block.shape[0]
    ind = np.zeros((rows, sizes.N), dtype=np.int64)
    np.put_along_axis(ind, block - 1, 1, axis=1)
    e = np.cumsum(ind, axis=1)
    k = np.arange(1, sizes.N + 1, dtype=float)
    terms = np.log(k) - np.log(k + (a - 1.0) * e)
    return _log_norm_const(sizes) + sizes.n * math.log(a) + terms.sum(axis=1)


def rankset_prob_lehmann(r: RankSet | Sequence[int], a: float, sizes: SampleSizes | None = None) -> float:
    """Probability that the second-sample ranks equal ``r`` under ``(F, F^a)``."""
    if not isinstance(r, RankSet):
        if sizes is None:
            raise TypeError("pass a RankSet or give sizes")
        r = RankSet(tuple(r), sizes)
    if a <= 0:
        raise ValueError("Lehmann exponent must be positive")
    sz = r.sizes
    if sz.N > LOG_SPACE_ABOVE:
        return float(np.exp(log_rankset_probs(np.asarray([r.ranks]), sz, a)[0]))
    e = r.counts_below()
    p = a**sz.n / math.comb(sz.N, sz.n)
    for k, ek in enumerate(e, start=1):
        p *= k / (k + (a - 1.0) * ek)
    return p


# ---------------------------------------------------------------------------
# chunked enumeration
# ---------------------------------------------------------------------------


def _chunk_bounds(total: int, chunk_size: int) -> list[tuple[int, int]]:
    return [(s, min(s + chunk_size, total)) for s in range(0, total, chunk_size)]


def map_rankset_chunks(
    sizes: SampleSizes,
    fn: Callable[[np.ndarray], object],
    *,
    cap: int | None = None,
    chunk_size: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> list:
    """Apply ``fn`` to consecutive blocks of rank sets; results in block order."""
    cap = DEFAULT_ENUMERATION_CAP if cap is None else cap
    total = sizes.n_ranksets
    if total > cap:
        raise CapExceeded(f"C({sizes.N}, {sizes.n}) = {total} exceeds cap {cap}")

    def work(bounds: tuple[int, int]) -> object:
        return fn(rankset_block(sizes, bounds[0], bounds[1], cap=cap))

    bounds = _chunk_bounds(total, chunk_size)
    if threads <= 1 or len(bounds) == 1:
        return [work(b) for b in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, bounds))


def _merge_atoms(values: np.ndarray, probs: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(values, kind="stable")
    v = values[order]
    p = probs[order]
    if v.size == 0:
        return v, p
    starts = [0]
    anchor = v[0]
    # group relative to the first value of the group, not the previous one
    for i in range(1, v.size):
        if v[i] - anchor > tol:
            starts.append(i)
            anchor = v[i]
    starts = np.asarray(starts)
    return v[starts], np.add.reduceat(p, starts)


def _merge_atoms_fast(values: np.ndarray, probs: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(values, kind="stable")
    v = values[order]
    p = probs[order]
    gaps = np.diff(v)
    if gaps.size and np.all((gaps == 0) | (gaps > tol)):
        starts = np.concatenate([[0], np.flatnonzero(gaps > tol) + 1])
        return v[starts], np.add.reduceat(p, starts)
    return _merge_atoms(values, probs, tol)


def _statistic_block(block: np.ndarray, scores: ScoreVector) -> np.ndarray:
    return scores.values[block - 1].sum(axis=1)


def _enumerated_pmf(
    scores: ScoreVector,
    sizes: SampleSizes,
    a: float | None,
    *,
    cap: int | None,
    chunk_size: int,
    threads: int,
) -> Pmf:
    _check_lengths(scores, sizes)

    def work(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        vals = _statistic_block(block, scores)
        if a is None:
            pr = np.full(vals.size, 1.0 / sizes.n_ranksets)
        else:
            pr = np.exp(log_rankset_probs(block, sizes, a))
        return _merge_atoms_fast(vals, pr, MERGE_TOL)

    parts = map_rankset_chunks(
        sizes, work, cap=cap, chunk_size=chunk_size, threads=threads
    )
    vals = np.concatenate([p[0] for p in parts])
    prs = np.concatenate([p[1] for p in parts])
    support, probs = _merge_atoms_fast(vals, prs, MERGE_TOL)
    keep = probs > 0
    return Pmf(support[keep], probs[keep] / math.fsum(probs[keep]))


def _check_lengths(scores: ScoreVector, sizes: SampleSizes) -> None:
    if scores.N != sizes.N:
        raise LengthMismatch(f"scores have length {scores.N}, pooled size is {sizes.N}")


# ---------------------------------------------------------------------------
# dynamic programmes for integer scores
# ---------------------------------------------------------------------------


def _integer_offsets(scores: ScoreVector) -> tuple[np.ndarray, int]:
    ints = np.round(scores.values).astype(np.int64)
    low = int(ints.min())
    return ints - low, low


def _dp_width(scores: ScoreVector, sizes: SampleSizes) -> int:
    shifted, _ = _integer_offsets(scores)
    top = np.sort(shifted)[-sizes.n:].sum()
    return int(top) + 1


def null_counts_dp(scores: ScoreVector, sizes: SampleSizes) -> tuple[np.ndarray, np.ndarray]:
    """Number of rank sets attaining each score sum, by dynamic programming.

    Returns ``(values, counts)`` over values with nonzero count. Counts are
    int64 while ``C(N, n) < 2**62`` and float64 beyond.
    """
    _check_lengths(scores, sizes)
    shifted, low = _integer_offsets(scores)
    n = sizes.n
    width = _dp_width(scores, sizes)
    exact = sizes.n_ranksets < 2**62
    dp = np.zeros((n + 1, width), dtype=np.int64 if exact else np.float64)
    dp[0, 0] = 1
    for idx, sc in enumerate(shifted):
        jmax = min(idx + 1, n)
        prev = dp[: jmax, : width - sc].copy()
        dp[1 : jmax + 1, sc:] += prev
    counts = dp[n]
    nz = np.flatnonzero(counts)
    return nz + n * low, counts[nz]


def _next_prime(k: int) -> int:
    def is_prime(v: int) -> bool:
        if v < 2:
            return False
        return all(v % d for d in range(2, math.isqrt(v) + 1))

    while not is_prime(k):
        k += 1
    return k


def _wilcoxon_u_probs(m: int, n: int) -> np.ndarray:
    """Null law of the Mann-Whitney count on ``0..mn`` by Fourier inversion.

    The generating function ``prod_{i=1}^{n} (1 - q^(m+i)) / (1 - q^i)`` is
    evaluated at the ``L``-th roots of unity, ``L`` the smallest prime above
    ``mn``, so no denominator vanishes off ``k = 0``. Each factor reduces to
    a ratio of sines whose arguments are reduced modulo ``2L`` in integer
    arithmetic. Absolute error is of order ``1e-16 sqrt(L)``; this is the
    route for sizes where the exact table does not fit in memory.
    """
    if m < n:
        m, n = n, m
    L = _next_prime(m * n + 1)
    k = np.arange(1, L, dtype=np.int64)
    log_abs = np.zeros(L - 1)
    negative = np.zeros(L - 1, dtype=bool)
    for i in range(1, n + 1):
        num = np.sin(np.pi * ((k * (m + i)) % (2 * L)) / L)
        den = np.sin(np.pi * ((k * i) % (2 * L)) / L)
        ratio = num / den
        negative ^= ratio < 0
        with np.errstate(divide="ignore"):
            log_abs += np.log(np.abs(ratio))
    log_abs -= math.lgamma(m + n + 1) - math.lgamma(m + 1) - math.lgamma(n + 1)
    mag = np.where(negative, -1.0, 1.0) * np.exp(log_abs)
    phase = np.exp(1j * np.pi * ((k * m * n) % (2 * L)) / L)
    phi = np.concatenate([[1.0 + 0j], mag * phase])
    probs = np.fft.fft(phi).real[: m * n + 1] / L
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def null_pmf(
    scores: ScoreVector,
    sizes: SampleSizes,
    *,
    method: str = "auto",
    cap: int | None = None,
    chunk_size: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> Pmf:
    """Exact null law of ``T = sum_j k(R_j)``.

    Each of the ``C(N, n)`` rank sets has probability ``1 / C(N, n)``.

    Parameters
    ----------
    method : {"auto", "dp", "enumerate"}
        ``auto`` uses the dynamic programme for integer scores and
        enumeration otherwise.
    """
    _check_lengths(scores, sizes)
    if method not in ("auto", "dp", "enumerate"):
        raise ValueError(f"unknown method {method!r}")
    use_dp = method == "dp" or (method == "auto" and scores.is_integer)
    if use_dp:
        if not scores.is_integer:
            raise ValueError("dynamic programme needs integer scores")
        return _null_pmf_dp(scores, sizes, cap)
    return _enumerated_pmf(
        scores, sizes, None, cap=cap, chunk_size=chunk_size, threads=threads
    )


def _null_pmf_dp(scores: ScoreVector, sizes: SampleSizes, cap: int | None) -> Pmf:
    width = _dp_width(scores, sizes)
    fits = (sizes.n + 1) * width <= DP_BUDGET
    if fits:
        values, counts = null_counts_dp(scores, sizes)
        total = sizes.n_ranksets
        if counts.dtype == np.int64:
            exact = tuple(Fraction(int(c), total) for c in counts)
            probs = np.array([float(f) for f in exact])
        else:
            exact = None
            probs = counts / counts.sum()
        return Pmf(values.astype(float), probs, exact)
    if scores.kind is ScoreKind.WILCOXON:
        u = _wilcoxon_u_probs(sizes.m, sizes.n)
        # drop Fourier round-off far below anything a test can resolve
        nz = np.flatnonzero(u > 1e-15)
        base = sizes.n * (sizes.n + 1) / 2
        return Pmf(nz + base, u[nz] / u[nz].sum())
    raise CapExceeded(
        f"integer-score table of {(sizes.n + 1) * width} cells exceeds the DP budget"
    )


def _alt_pmf_dp(scores: ScoreVector, sizes: SampleSizes, a: float) -> Pmf:
    shifted, low = _integer_offsets(scores)
    n, N = sizes.n, sizes.N
    width = _dp_width(scores, sizes)
    if (n + 1) * width > DP_BUDGET:
        raise CapExceeded("integer-score table exceeds the DP budget")
    dp = np.zeros((n + 1, width))
    dp[0, 0] = 1.0
    j = np.arange(n + 1, dtype=float)
    for idx, sc in enumerate(shifted):
        k = idx + 1
        jmax = min(k, n)
        prev = dp[:jmax, : width - sc].copy()
        dp[1 : jmax + 1, sc:] += prev
        # rows with j > k are still empty; only j <= k keeps k + (a-1) j > 0
        dp[: jmax + 1] *= (k / (k + (a - 1.0) * j[: jmax + 1]))[:, None]
        peak = dp.max()
        if peak > 0:
            dp /= peak
    row = dp[n]
    nz = np.flatnonzero(row > 0)
    return Pmf((nz + n * low).astype(float), row[nz] / math.fsum(row[nz]))


def alt_pmf(
    scores: ScoreVector,
    sizes: SampleSizes,
    a: float,
    *,
    method: str = "auto",
    cap: int | None = None,
    chunk_size: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> Pmf:
    """Exact law of ``T`` under the Lehmann alternative ``(F, F^a)``.

    ``method="auto"`` enumerates when ``C(N, n)`` is within the cap and falls
    back to the position-by-position programme for integer scores beyond it.
    """
    if a <= 0:
        raise ValueError("Lehmann exponent must be positive")
    _check_lengths(scores, sizes)
    if method not in ("auto", "dp", "enumerate"):
        raise ValueError(f"unknown method {method!r}")
    limit = DEFAULT_ENUMERATION_CAP if cap is None else cap
    if method == "dp" or (
        method == "auto" and scores.is_integer and sizes.n_ranksets > limit
    ):
        if not scores.is_integer:
            raise ValueError("dynamic programme needs integer scores")
        return _alt_pmf_dp(scores, sizes, a)
    return _enumerated_pmf(
        scores, sizes, a, cap=cap, chunk_size=chunk_size, threads=threads
    )


# ---------------------------------------------------------------------------
# randomized tests and power
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RandomizedTest:
    """Reject when ``T > threshold``; reject with probability ``gamma`` at ``T = threshold``."""

    threshold: float
    gamma: float
    alpha: float
    scores: ScoreVector = field(repr=False)
    sizes: SampleSizes
    size: float
    conservative: bool = False

    def rejection_prob(self, values: np.ndarray, tol: float = MERGE_TOL) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        out = np.where(values > self.threshold + tol, 1.0, 0.0)
        return np.where(np.abs(values - self.threshold) <= tol, self.gamma, out)

    @property
    def name(self) -> str:
        return f"rank-{self.scores.kind.value}"


def critical_value(
    scores: ScoreVector,
    sizes: SampleSizes,
    alpha: float,
    *,
    conservative: bool = False,
    pmf: Pmf | None = None,
    cap: int | None = None,
) -> RandomizedTest:
    """Exact level-``alpha`` test rejecting for large ``T``.

    The threshold is the smallest support value ``t`` with ``P0(T > t) <= alpha``
    and ``gamma = (alpha - P0(T > t)) / P0(T = t)``. With ``conservative=True``
    the boundary is never rejected (``gamma = 0``).
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if pmf is None:
        pmf = null_pmf(scores, sizes, cap=cap)
    sf = pmf.sf()
    slack = 1e-13
    idx = int(np.flatnonzero(sf <= alpha + slack)[0])
    t = float(pmf.support[idx])
    gamma = min(max((alpha - sf[idx]) / pmf.probs[idx], 0.0), 1.0)
    if conservative:
        gamma = 0.0
    size = float(sf[idx] + gamma * pmf.probs[idx])
    return RandomizedTest(t, float(gamma), alpha, scores, sizes, size, conservative)


@dataclass(frozen=True, eq=False)
class MpTest:
    """Most powerful rank test against one Lehmann alternative."""

    a: float
    alpha: float
    sizes: SampleSizes
    reject_set: list[RankSet] = field(repr=False)
    boundary_set: list[RankSet] = field(repr=False)
    gamma: float
    size: float

    @property
    def name(self) -> str:
        return f"mp-lehmann-{self.a:g}"

    def rejection_table(self) -> dict[tuple[int, ...], float]:
        """Map rank tuple to rejection probability (absent means 0)."""
        table = {r.ranks: 1.0 for r in self.reject_set}
        table.update({r.ranks: self.gamma for r in self.boundary_set})
        return table


def mp_test(
    sizes: SampleSizes,
    a: float,
    alpha: float,
    *,
    cap: int | None = None,
    conservative: bool = False,
) -> MpTest:
    """Neyman-Pearson rank test of ``a = 1`` against a fixed ``a``.

    Rank sets are ordered by ``P_a(r)`` (the likelihood ratio up to a
    constant, since the null is uniform). Whole classes of tied ``P_a`` are
    accepted or randomized together.
    """
    if a <= 0 or a == 1:
        raise ValueError("need a > 0 and a != 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    block = rankset_block(sizes, cap=cap)
    logp = log_rankset_probs(block, sizes, a)
    order = np.argsort(-logp, kind="stable")
    lp = logp[order]
    breaks = np.flatnonzero(np.diff(lp) < -1e-12) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.append(breaks, lp.size)
    total = sizes.n_ranksets
    budget = alpha * total
    taken = 0
    reject_rows: list[int] = []
    boundary_rows: list[int] = []
    gamma = 0.0
    for s, e in zip(starts, ends):
        cls = e - s
        if taken + cls <= budget + 1e-9:
            reject_rows.extend(order[s:e].tolist())
            taken += cls
            continue
        remaining = budget - taken
        if remaining > 1e-9 and not conservative:
            boundary_rows = order[s:e].tolist()
            gamma = remaining / cls
        break
    size = (taken + gamma * len(boundary_rows)) / total

    def as_sets(rows: list[int]) -> list[RankSet]:
        return [RankSet(tuple(block[i].tolist()), sizes) for i in sorted(rows)]

    return MpTest(a, alpha, sizes, as_sets(reject_rows), as_sets(boundary_rows), gamma, size)


def exact_power(
    test: RandomizedTest | MpTest,
    a: float,
    *,
    cap: int | None = None,
    chunk_size: int = DEFAULT_CHUNK,
    threads: int = 1,
) -> float:
    """Exact rejection probability of ``test`` under ``(F, F^a)``."""
    if a <= 0:
        raise ValueError("Lehmann exponent must be positive")
    if isinstance(test, MpTest):
        sz = test.sizes
        rej = [math.exp(x) for x in _log_probs_of(test.reject_set, sz, a)]
        bnd = [math.exp(x) for x in _log_probs_of(test.boundary_set, sz, a)]
        return math.fsum(rej) + test.gamma * math.fsum(bnd)
    pmf = alt_pmf(
        test.scores, test.sizes, a, cap=cap, chunk_size=chunk_size, threads=threads
    )
    return float(math.fsum(test.rejection_prob(pmf.support) * pmf.probs))


def _log_probs_of(sets: list[RankSet], sizes: SampleSizes, a: float) -> np.ndarray:
    if not sets:
        return np.zeros(0)
    block = np.asarray([r.ranks for r in sets], dtype=np.int64)
    return log_rankset_probs(block, sizes, a)


def lmp_scores(N: int) -> ScoreVector:
    """Scores of the locally most powerful rank test for ``a`` near 1 (Savage scores)."""
    return score_vector(ScoreKind.SAVAGE, N)


def lmp_derivative(r: RankSet) -> float:
    """Closed-form ``d/da log P_a(r)`` at ``a = 1``: ``n - sum_k e_k / k``."""
    e = r.counts_below()
    k = np.arange(1, r.sizes.N + 1)
    return r.sizes.n - math.fsum(e / k)
