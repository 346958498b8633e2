"""Efficiency and deficiency calculus on power expansions.

A procedure's power against the contiguous alternative ``theta = c / sqrt(n)``
is modelled as ``p0(c) + p1(c) n^(-1/2) + p2(c) n^(-1)``. Sample sizes are
treated as real numbers: the power of ``B`` at a non-integer ``k`` is the
expansion evaluated at that ``k`` with the rescaled argument
``c' = c (k/n)^(1/2)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy import interpolate, special

from .errors import DegenerateFit, NoSolution, NonFinite, ZeroDerivative

ARE_BOUNDS = (1e-8, 1e8)
ARE_RTOL = 1e-12
POWER_TOL = 1e-10
UNIT_ARE_TOL = 1e-6
GRID_POINTS = 65


def _zero(c: float) -> float:
    return 0.0


class Expansion(Protocol):
    """Anything exposing the three coefficient functions and a domain of ``c``."""

    domain: tuple[float, float]

    def p0(self, c: float) -> float: ...

    def p1(self, c: float) -> float: ...

    def p2(self, c: float) -> float: ...


def _check_grid(p0: Callable[[float], float], domain: tuple[float, float]) -> None:
    lo, hi = domain
    if not lo < hi:
        raise ValueError("domain must be a nonempty interval")
    if math.isfinite(hi):
        grid = np.linspace(lo, hi, GRID_POINTS + 1)[1:]
    else:
        grid = np.geomspace(max(lo, 1e-3), 1e3, GRID_POINTS)
    values = np.array([p0(float(c)) for c in grid])
    if not np.all(np.isfinite(values)):
        raise NonFinite("p0 is not finite on its domain")
    if np.any(values <= 0) or np.any(values >= 1):
        raise ValueError("p0 must lie strictly inside (0, 1) on its domain")
    if np.any(np.diff(values) <= 0):
        raise ValueError("p0 must be strictly increasing on its domain")


@dataclass(frozen=True)
class PowerExpansion:
    """Coefficient functions of a power expansion in ``n^(-1/2)``.

    Parameters
    ----------
    p0, p1, p2 : callable
        Functions of ``c > 0``. ``p0`` must be strictly increasing with
        values in ``(0, 1)``; this is checked on a grid over ``domain``.
    domain : (float, float)
        Interval of ``c`` on which the coefficients are trusted. Root finders
        and derivative stencils never leave it.
    """

    p0: Callable[[float], float]
    p1: Callable[[float], float] = _zero
    p2: Callable[[float], float] = _zero
    domain: tuple[float, float] = (0.0, math.inf)
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))
        if self.check:
            _check_grid(self.p0, self.domain)

    @classmethod
    def from_table(cls, c, p0, p1, p2) -> "PowerExpansion":
        """Monotone cubic (PCHIP) interpolation of tabulated coefficients."""
        c = np.asarray(c, dtype=float)
        order = np.argsort(c)
        c = c[order]
        if c.size < 2 or np.any(np.diff(c) <= 0):
            raise ValueError("table needs at least two distinct c values")
        fns = []
        for col in (p0, p1, p2):
            spline = interpolate.PchipInterpolator(c, np.asarray(col, dtype=float)[order], extrapolate=False)
            fns.append(lambda x, s=spline: float(s(x)))
        return cls(fns[0], fns[1], fns[2], domain=(c[0], c[-1]))

    @classmethod
    def from_csv(cls, path) -> "PowerExpansion":
        """Read a table with header ``c,p0,p1,p2``."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            if header != ["c", "p0", "p1", "p2"]:
                raise ValueError(f"expected header c,p0,p1,p2, got {','.join(header)}")
            rows = [[float(v) for v in row] for row in reader if row and any(v.strip() for v in row)]
        if not rows or any(len(r) != 4 for r in rows):
            raise ValueError("every row needs four numeric fields")
        table = np.array(rows)
        return cls.from_table(*table.T)

    def power(self, c: float, n: float) -> float:
        """Expansion value at local scale ``c`` and real sample size ``n``."""
        return self.p0(c) + self.p1(c) / math.sqrt(n) + self.p2(c) / n


@dataclass(frozen=True)
class GaussianLocalPower:
    """First-order model ``p0(c) = Phi(e c - z_alpha)`` with vanishing corrections.

    The domain stops where ``p0`` comes within about ``1e-9`` of one, so the
    strict-monotonicity contract holds in floating point.
    """

    efficacy: float
    alpha: float

    def __post_init__(self) -> None:
        if not self.efficacy > 0:
            raise ValueError("efficacy must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    @property
    def z_alpha(self) -> float:
        return float(special.ndtri(1 - self.alpha))

    @property
    def domain(self) -> tuple[float, float]:
        return (0.0, (6.0 + max(self.z_alpha, 0.0)) / self.efficacy)

    def p0(self, c: float) -> float:
        return float(special.ndtr(self.efficacy * c - self.z_alpha))

    p1 = staticmethod(_zero)
    p2 = staticmethod(_zero)

    def power(self, c: float, n: float) -> float:
        return self.p0(c)


def _in_domain(x: float, domain: tuple[float, float]) -> bool:
    return domain[0] <= x <= domain[1]


def numeric_derivative(
    f: Callable[[float], float],
    x: float,
    order: int = 1,
    domain: tuple[float, float] = (-math.inf, math.inf),
) -> float:
    """Central finite difference of order 1 or 2.

    Steps are ``1e-6 max(1, |x|)`` for the first derivative and
    ``1e-4 max(1, |x|)`` for the second. When the symmetric stencil would
    leave ``domain`` a one-sided second-order-accurate stencil is used.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    h = (1e-6 if order == 1 else 1e-4) * max(1.0, abs(x))

    def ev(t: float) -> float:
        v = float(f(t))
        if not math.isfinite(v):
            raise NonFinite(f"f({t!r}) is not finite")
        return v

    lo, hi = domain
    if x - h >= lo and x + h <= hi:
        if order == 1:
            return (ev(x + h) - ev(x - h)) / (2 * h)
        return (ev(x + h) - 2 * ev(x) + ev(x - h)) / (h * h)
    s = 1.0 if x - h < lo else -1.0
    if not _in_domain(x + s * 3 * h, domain):
        raise NonFinite("domain too narrow for a difference stencil")
    f0, f1, f2 = ev(x), ev(x + s * h), ev(x + s * 2 * h)
    if order == 1:
        return s * (-3 * f0 + 4 * f1 - f2) / (2 * h)
    f3 = ev(x + s * 3 * h)
    return (2 * f0 - 5 * f1 + 4 * f2 - f3) / (h * h)


def are(A: Expansion, B: Expansion, c: float) -> float:
    """Asymptotic relative efficiency ``E`` solving ``a0(c) = b0(c E^(1/2))``.

    Bisection on ``log E`` over ``[1e-8, 1e8]`` (narrowed so that
    ``c E^(1/2)`` stays in ``B``'s domain).

    Raises
    ------
    NoSolution
        If ``b0`` does not reach ``a0(c)`` anywhere on the search interval.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    target = A.p0(c)
    lo_d, hi_d = B.domain
    lo = math.log(ARE_BOUNDS[0])
    hi = math.log(ARE_BOUNDS[1])
    if lo_d > 0:
        lo = max(lo, 2 * math.log(lo_d / c))
    if math.isfinite(hi_d):
        hi = min(hi, 2 * math.log(hi_d / c))
    if not lo < hi:
        raise NoSolution("search interval for E is empty on the declared domain")

    def g(t: float) -> float:
        return B.p0(c * math.exp(t / 2)) - target

    g_lo, g_hi = g(lo), g(hi)
    if g_lo > 0 or g_hi < 0:
        raise NoSolution(f"b0 does not attain a0({c}) = {target!r} for E in the search interval")
    if g_lo == 0:
        return math.exp(lo)
    if g_hi == 0:
        return math.exp(hi)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0:
            return math.exp(mid)
        if gm < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= ARE_RTOL:
            break
    return math.exp(0.5 * (lo + hi))


def _require_unit_are(A: Expansion, B: Expansion, c: float) -> None:
    e = are(A, B, c)
    if abs(e - 1) > UNIT_ARE_TOL:
        raise ValueError(f"deficiency needs unit efficiency, got E = {e!r}")


@dataclass(frozen=True)
class DeficiencyPoint:
    n: float
    k: float
    d: float
    residual_power: float
    error: str | None = None


@dataclass(frozen=True)
class DeficiencyFit:
    """Deficiencies on a grid and their least-squares fit ``h1 sqrt(n) + h2``."""

    n_grid: np.ndarray
    d_values: np.ndarray
    h1: float
    h2: float
    residual: float
    points: tuple[DeficiencyPoint, ...]

    def predict(self, n) -> np.ndarray:
        return self.h1 * np.sqrt(np.asarray(n, dtype=float)) + self.h2


def solve_matching_size(A: Expansion, B: Expansion, c: float, n: float) -> DeficiencyPoint:
    """Real ``k`` with ``pi_B(k) = pi_A(n)`` at the common alternative ``c / sqrt(n)``.

    Works in ``d = k - n`` so nothing is lost to cancellation at large ``n``.
    The bracket grows geometrically from ``sqrt(n)`` until it straddles the
    target or leaves the admissible range ``0 < k <= 64 n`` with ``c'`` in
    ``B``'s domain; the bracket is then bisected to floating-point width.
    """
    n = float(n)
    target = A.power(c, n)

    def excess(d: float) -> float:
        k = n + d
        cp = c * math.sqrt(1 + d / n)
        if not _in_domain(cp, B.domain):
            raise NoSolution("c' left the domain of B")
        return B.power(cp, k) - target

    def admissible(d: float) -> bool:
        return n + d > 0 and d <= 63 * n and _in_domain(c * math.sqrt(1 + d / n), B.domain)

    try:
        f0 = excess(0.0)
    except NoSolution as exc:
        return DeficiencyPoint(n, math.nan, math.nan, math.nan, type(exc).__name__)
    if f0 == 0:
        return DeficiencyPoint(n, n, 0.0, 0.0)
    step = max(1.0, math.sqrt(n))
    direction = -1.0 if f0 > 0 else 1.0
    lo, f_lo = 0.0, f0
    while True:
        d = direction * step
        if not admissible(d):
            # last attempt at the admissible edge
            edge = -n * (1 - 1e-12) if direction < 0 else 63 * n
            if direction < 0 and B.domain[0] > 0:
                edge = max(edge, n * ((B.domain[0] / c) ** 2 - 1))
            if direction > 0 and math.isfinite(B.domain[1]):
                edge = min(edge, n * ((B.domain[1] / c) ** 2 - 1))
            d = edge
            if d == lo or not admissible(d):
                return DeficiencyPoint(n, math.nan, math.nan, math.nan, "NoSolution")
        fd = excess(d)
        if (fd > 0) != (f_lo > 0) or fd == 0:
            break
        if abs(d) >= 63 * n or d == -n * (1 - 1e-12):
            return DeficiencyPoint(n, math.nan, math.nan, math.nan, "NoSolution")
        lo, f_lo = d, fd
        step *= 2
    a, b = (lo, d) if lo < d else (d, lo)
    fa = excess(a)
    for _ in range(500):
        mid = 0.5 * (a + b)
        if mid == a or mid == b:
            break
        fm = excess(mid)
        if fm == 0:
            a = b = mid
            break
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
    d = 0.5 * (a + b)
    res = excess(d)
    if abs(res) > POWER_TOL:
        return DeficiencyPoint(n, n + d, d, res, "NoSolution")
    return DeficiencyPoint(n, n + d, d, res)


def deficiency_curve(A: Expansion, B: Expansion, c: float, n_grid: Sequence[float]) -> DeficiencyFit:
    """Solve the matching equation on ``n_grid`` and fit ``d_n = h1 sqrt(n) + h2``.

    Points where no solution exists are kept with ``nan`` and an error name.

    Raises
    ------
    DegenerateFit
        If fewer than three grid points were solved.
    """
    _require_unit_are(A, B, c)
    points = tuple(solve_matching_size(A, B, c, n) for n in n_grid)
    n_arr = np.array([p.n for p in points], dtype=float)
    d_arr = np.array([p.d for p in points], dtype=float)
    ok = np.isfinite(d_arr)
    if ok.sum() < 3:
        raise DegenerateFit(f"only {int(ok.sum())} usable grid points")
    design = np.column_stack([np.sqrt(n_arr[ok]), np.ones(ok.sum())])
    (h1, h2), *_ = np.linalg.lstsq(design, d_arr[ok], rcond=None)
    residual = float(np.linalg.norm(design @ np.array([h1, h2]) - d_arr[ok]))
    return DeficiencyFit(n_arr, d_arr, float(h1), float(h2), residual, points)


def deficiency_leading_coeff(A: Expansion, B: Expansion, c: float) -> float:
    """Closed-form ``h1 = 2 (a1(c) - b1(c)) / (c b0'(c))``.

    Raises
    ------
    ZeroDerivative
        If ``|b0'(c)| < 1e-12``.
    """
    slope = numeric_derivative(B.p0, c, 1, B.domain)
    if abs(slope) < 1e-12:
        raise ZeroDerivative(f"b0'({c}) = {slope!r}")
    _require_unit_are(A, B, c)
    return 2 * (A.p1(c) - B.p1(c)) / (c * slope)
