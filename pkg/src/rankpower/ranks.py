"""Two-sample rank sets, score functions and linear rank statistics.

A linear rank statistic is ``T = sum_j k(R_j)`` where ``R_1 < ... < R_n`` are
the ranks of the second sample within the pooled sample of size ``N = m + n``
and ``k`` is a nondecreasing score function on ``1..N``.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy import integrate, special

from .errors import CapExceeded, DuplicateValue, LengthMismatch, QuadratureFailure

DEFAULT_ENUMERATION_CAP = 10**8


@dataclass(frozen=True)
class SampleSizes:
    """Sizes of the first (``m``, X) and second (``n``, Y) samples."""

    m: int
    n: int

    def __post_init__(self) -> None:
        if int(self.m) != self.m or int(self.n) != self.n:
            raise ValueError("sample sizes must be integers")
        if self.m < 1 or self.n < 1:
            raise ValueError(f"need m >= 1 and n >= 1, got m={self.m}, n={self.n}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", int(self.n))

    @property
    def N(self) -> int:
        return self.m + self.n

    @property
    def n_ranksets(self) -> int:
        """Number of distinct rank sets, ``C(N, n)``."""
        return math.comb(self.N, self.n)


@dataclass(frozen=True)
class RankSet:
    """Sorted ranks of the second sample within the pooled sample (1-based)."""

    ranks: tuple[int, ...]
    sizes: SampleSizes

    def __post_init__(self) -> None:
        r = tuple(int(v) for v in self.ranks)
        if len(r) != self.sizes.n:
            raise ValueError(f"expected {self.sizes.n} ranks, got {len(r)}")
        if r[0] < 1 or r[-1] > self.sizes.N:
            raise ValueError(f"ranks must lie in [1, {self.sizes.N}]")
        if any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("ranks must be strictly increasing")
        object.__setattr__(self, "ranks", r)

    def __iter__(self) -> Iterator[int]:
        return iter(self.ranks)

    def __len__(self) -> int:
        return len(self.ranks)

    def counts_below(self) -> np.ndarray:
        """``e_k = #{j : r_j <= k}`` for ``k = 1..N``."""
        ind = np.zeros(self.sizes.N, dtype=np.int64)
        ind[np.asarray(self.ranks) - 1] = 1
        return np.cumsum(ind)


class ScoreKind(str, enum.Enum):
    WILCOXON = "wilcoxon"
    VAN_DER_WAERDEN = "vdw"
    NORMAL_EXACT = "normal"
    SAVAGE = "savage"
    CUSTOM = "custom"


BUILTIN_SCORE_KINDS = (
    ScoreKind.WILCOXON,
    ScoreKind.VAN_DER_WAERDEN,
    ScoreKind.NORMAL_EXACT,
    ScoreKind.SAVAGE,
)


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Scores ``k(1), ..., k(N)`` of a linear rank statistic."""

    kind: ScoreKind
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("scores must be a 1-d sequence of length >= 2")
        if not np.all(np.isfinite(v)):
            raise ValueError("scores must be finite")
        if np.any(np.diff(v) < 0):
            raise ValueError("scores must be nondecreasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @property
    def N(self) -> int:
        return self.values.size

    @property
    def is_integer(self) -> bool:
        return bool(np.all(self.values == np.round(self.values))) and bool(
            np.all(np.abs(self.values) < 2**52)
        )

    def affine(self, scale: float, shift: float = 0.0) -> "ScoreVector":
        """Scores ``scale * k + shift``; ``scale`` must be positive."""
        if scale <= 0:
            raise ValueError("scale must be positive")
        return ScoreVector(ScoreKind.CUSTOM, scale * self.values + shift)


def custom_scores(values: Sequence[float]) -> ScoreVector:
    return ScoreVector(ScoreKind.CUSTOM, np.asarray(values, dtype=float))


def ranks_of_second_sample(x: Sequence[float], y: Sequence[float]) -> RankSet:
    """Return the sorted 1-based ranks of ``y`` within the pooled sample.

    Raises
    ------
    DuplicateValue
        If any two pooled values are equal. Ties are not broken or averaged.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    pooled = np.concatenate([x, y])
    order = np.argsort(pooled, kind="stable")
    sorted_vals = pooled[order]
    if np.any(sorted_vals[1:] == sorted_vals[:-1]):
        raise DuplicateValue("pooled sample contains tied values")
    positions = np.flatnonzero(order >= x.size) + 1
    return RankSet(tuple(positions.tolist()), SampleSizes(x.size, y.size))


def _savage(N: int) -> np.ndarray:
    # tail sums H_N - H_{i-1}, accumulated from the top for accuracy
    tail = np.cumsum(1.0 / np.arange(N, 0, -1))[::-1]
    return -tail


def _expected_normal_order_stat(i: int, N: int, tolerance: float) -> float:
    log_coef = (
        math.lgamma(N + 1) - math.lgamma(i) - math.lgamma(N - i + 1)
    )

    def integrand(z: float) -> float:
        log_dens = (
            log_coef
            + (i - 1) * special.log_ndtr(z)
            + (N - i) * special.log_ndtr(-z)
            - 0.5 * z * z
            - 0.5 * math.log(2 * math.pi)
        )
        return z * math.exp(log_dens)

    mode = float(special.ndtri(i / (N + 1)))
    lo, hi = -40.0, 40.0
    val, err = integrate.quad(
        integrand, lo, hi, points=[mode], epsabs=tolerance, epsrel=0.0, limit=500
    )
    if not np.isfinite(val) or err > tolerance:
        raise QuadratureFailure(
            f"E[Z_({i}:{N})] integration error {err:.3g} exceeds {tolerance:.3g}"
        )
    return val


def _normal_exact(N: int, tolerance: float) -> np.ndarray:
    out = np.zeros(N)
    for i in range(N, N // 2, -1):
        out[i - 1] = _expected_normal_order_stat(i, N, tolerance)
        out[N - i] = -out[i - 1]
    if N % 2:
        out[N // 2] = 0.0
    return out


def score_vector(
    kind: ScoreKind | str, N: int, tolerance: float = 1e-9
) -> ScoreVector:
    """Built-in score vector of length ``N``.

    Parameters
    ----------
    kind : ScoreKind or str
        ``wilcoxon`` (k(i) = i), ``vdw`` (van der Waerden, normal quantiles at
        i/(N+1)), ``normal`` (expected normal order statistics) or ``savage``
        (k(i) = -sum_{j=i}^N 1/j).
    N : int
        Pooled sample size, at least 2.
    tolerance : float
        Absolute error bound for quadrature-based scores.
    """
    kind = ScoreKind(kind)
    if N < 2:
        raise ValueError("N must be at least 2")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    i = np.arange(1, N + 1)
    if kind is ScoreKind.WILCOXON:
        values = i.astype(float)
    elif kind is ScoreKind.VAN_DER_WAERDEN:
        values = special.ndtri(i / (N + 1))
    elif kind is ScoreKind.NORMAL_EXACT:
        values = _normal_exact(N, tolerance)
    elif kind is ScoreKind.SAVAGE:
        values = _savage(N)
    else:
        raise ValueError("custom scores need explicit values; use custom_scores()")
    return ScoreVector(kind, values)


def statistic(scores: ScoreVector, r: RankSet) -> float:
    """Linear rank statistic ``sum_j k(r_j)``."""
    if scores.N != r.sizes.N:
        raise LengthMismatch(
            f"scores have length {scores.N} but pooled size is {r.sizes.N}"
        )
    return float(math.fsum(scores.values[k - 1] for k in r.ranks))


def _check_cap(sizes: SampleSizes, cap: int | None) -> None:
    cap = DEFAULT_ENUMERATION_CAP if cap is None else cap
    if sizes.n_ranksets > cap:
        raise CapExceeded(
            f"C({sizes.N}, {sizes.n}) = {sizes.n_ranksets} exceeds cap {cap}"
        )


def enumerate_ranksets(
    sizes: SampleSizes,
    cap: int | None = None,
    start: int = 0,
    stop: int | None = None,
) -> Iterator[RankSet]:
    """Yield every n-subset of ``{1..N}`` once, in lexicographic order.

    ``start``/``stop`` select a half-open range of subset indices so that the
    enumeration can be split across workers.
    """
    _check_cap(sizes, cap)
    combos = itertools.combinations(range(1, sizes.N + 1), sizes.n)
    for c in itertools.islice(combos, start, stop):
        yield RankSet(c, sizes)


def rankset_block(
    sizes: SampleSizes,
    start: int = 0,
    stop: int | None = None,
    cap: int | None = None,
) -> np.ndarray:
    """Rank sets with lexicographic indices in ``[start, stop)`` as an int array.

    Rows are rank sets; this is the vectorised counterpart of
    :func:`enumerate_ranksets`.
    """
    _check_cap(sizes, cap)
    total = sizes.n_ranksets
    stop = total if stop is None else min(stop, total)
    count = max(stop - start, 0)
    combos = itertools.combinations(range(1, sizes.N + 1), sizes.n)
    flat = np.fromiter(
        itertools.chain.from_iterable(itertools.islice(combos, start, stop)),
        dtype=np.int64,
        count=count * sizes.n,
    )
    return flat.reshape(count, sizes.n)
