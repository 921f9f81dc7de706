"""Mittag-Leffler functions, one-sided stable laws and the inverse-subordinator density.

E_{a,b}(z) = sum_k z^k / Gamma(a k + b). Small |z| uses the power series with
compensated summation; on the negative axis beyond the series disk the
function is the real integral

    E_{a,b}(-x) = 1/(a pi) int_0^inf c^((1-b)/a) exp(-c^(1/a))
                  * (c sin(pi(1-b)) + x sin(pi(1-b+a))) / (c^2 + 2 c x cos(a pi) + x^2) dc

valid for 0 < a < 1 and b < 1 + a; larger b is reduced with
E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z.
mittag_leffler_mp evaluates the series with mpmath as a reference.

The one-sided stable law Q with E exp(-lam Q) = exp(-lam^a) is handled through
Zolotarev's integral representation and sampled with Kanter's method.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import mpmath
import numpy as np
from scipy import integrate, interpolate, special, stats

from fracspde_lab.fraccalc import adaptive_quad
from fracspde_lab.reports import EstimateReport, ratio_report

logger = logging.getLogger(__name__)

SERIES_RADIUS_CAP = 5.0
POSITIVE_SERIES_LIMIT = 30.0
MAX_SERIES_TERMS = 20000
# the integrand's exp(-c^(1/a)) is below e^-750 past this power
_INTEGRAL_CUTOFF = 750.0

TABLE_S_MIN = 1e-10
TABLE_S_MAX = 1e14
TABLE_NODES_PER_DECADE = 32


def series_radius(alpha: float) -> float:
    """|z| below which the power series is used on the negative axis.

    The largest series term near |z| = R is about exp(R^(1/alpha)); capping it
    at 1e3 keeps the cancellation loss below three digits.
    """
    return min(SERIES_RADIUS_CAP, math.log(1e3) ** alpha)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"Mittag-Leffler alpha must be in (0, 2], got {alpha}")


def _ml_series(alpha: float, beta: float, z: float) -> float:
    """Power series with Kahan compensation; terms built in log space."""
    if z == 0.0:
        return float(special.rgamma(beta))
    log_abs = math.log(abs(z))
    total = 0.0
    comp = 0.0
    small = 0
    for k in range(MAX_SERIES_TERMS):
        arg = alpha * k + beta
        if arg <= 0 and arg == math.floor(arg):
            term = 0.0
        else:
            sign = special.gammasgn(arg) * (1.0 if z > 0 or k % 2 == 0 else -1.0)
            term = float(sign * math.exp(k * log_abs - special.gammaln(arg)))
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        # terms decrease once a k exceeds |z|^(1/a); stop after three tiny ones
        if abs(term) <= 1e-17 * max(abs(total), 1e-300) and alpha * k + beta > 1.0:
            small += 1
            if small >= 3 and k * alpha > abs(z) ** (1.0 / alpha):
                return total
        else:
            small = 0
    raise ArithmeticError(f"Mittag-Leffler series did not converge at z={z}")


def _ml_integral(alpha: float, beta: float, x: float) -> float:
    """E_{alpha,beta}(-x) for x > 0, 0 < alpha < 1, beta < 1 + alpha."""
    p = (1.0 - beta) / alpha
    s1 = math.sin(math.pi * (1.0 - beta))
    s2 = math.sin(math.pi * (1.0 - beta + alpha))
    cos_a = math.cos(alpha * math.pi)

    def integrand(c: float) -> float:
        if c <= 0.0:
            return 0.0
        return (
            c**p
            * math.exp(-(c ** (1.0 / alpha)))
            * (c * s1 + x * s2)
            / (c * c + 2.0 * c * x * cos_a + x * x)
        )

    upper = _INTEGRAL_CUTOFF**alpha
    peak = x * max(-cos_a, 0.0)
    points = [peak] if 0.0 < peak < upper else None
    value, _ = adaptive_quad(
        integrand, 0.0, upper, epsabs=0.0, epsrel=1e-12, limit=500, points=points,
        what=f"Mittag-Leffler integral (alpha={alpha}, beta={beta}, x={x:g})",
    )
    return value / (alpha * math.pi)


def _ml_scalar(alpha: float, beta: float, z: float) -> float:
    if z == 0.0:
        return float(special.rgamma(beta))
    if alpha == 1.0:
        if beta == 1.0:
            return math.exp(z)
        if beta == 2.0:
            return math.expm1(z) / z
        if beta == math.floor(beta) and beta > 2.0:
            return (_ml_scalar(1.0, beta - 1.0, z) - float(special.rgamma(beta - 1.0))) / z
        if abs(z) <= SERIES_RADIUS_CAP:
            return _ml_series(alpha, beta, z)
        raise ValueError(f"E_(1,{beta}) off the series disk is only supported for integer beta")
    if z > 0.0:
        if z > POSITIVE_SERIES_LIMIT:
            raise ValueError(
                f"Mittag-Leffler at z={z} > {POSITIVE_SERIES_LIMIT}: unsupported regime"
            )
        # the value grows like exp(z^(1/alpha))
        if z ** (1.0 / alpha) > 700.0:
            raise ValueError(f"Mittag-Leffler overflow at z={z} (alpha={alpha})")
        return _ml_series(alpha, beta, z)
    if -z <= series_radius(alpha):
        return _ml_series(alpha, beta, z)
    if alpha > 1.0:
        raise ValueError(f"E_(alpha,beta)(z) with alpha={alpha} > 1 only supported for |z| <= 5")
    if beta >= 1.0 + alpha:
        lower = _ml_scalar(alpha, beta - alpha, z)
        return (lower - float(special.rgamma(beta - alpha))) / z
    return _ml_integral(alpha, beta, -z)


def mittag_leffler(alpha: float, beta: float, z: Any) -> Any:
    """Two-parameter Mittag-Leffler function E_{alpha,beta}(z) for real z.

    Supported: any z <= 0 for 0 < alpha <= 1, the series disk otherwise, and
    0 < z <= 30 by the series.
    """
    _check_alpha(alpha)
    if np.ndim(z) == 0:
        return _ml_scalar(alpha, beta, float(z))
    arr = np.asarray(z, dtype=float)
    return np.array([_ml_scalar(alpha, beta, float(v)) for v in arr.ravel()]).reshape(arr.shape)


def mittag_leffler_mp(alpha: float, beta: float, z: float, *, digits: int = 20) -> float:
    """Reference E_{alpha,beta}(z) from the power series in arbitrary precision.

    The working precision covers the largest series term, about
    exp(|z|^(1/alpha)), plus ``digits``; cost grows with that term, so this is
    for oracles at moderate |z| only.
    """
    _check_alpha(alpha)
    x = abs(z)
    growth = x ** (1.0 / alpha) if x > 0 else 0.0
    dps = digits + 10 + int(growth / math.log(10.0))
    # terms peak near k = |z|^(1/alpha) / alpha
    k_min = int(2.0 * growth / alpha) + 10
    with mpmath.workdps(dps):
        zm = mpmath.mpf(z)
        tol = mpmath.mpf(10) ** (-(digits + 5))
        total = mpmath.mpf(0)
        for k in range(MAX_SERIES_TERMS):
            term = zm**k * mpmath.rgamma(alpha * k + beta)
            total += term
            if k >= k_min and abs(term) <= tol * abs(total):
                return float(total)
    raise ArithmeticError(f"reference Mittag-Leffler series did not converge at z={z}")


@dataclass(frozen=True)
class MittagLefflerTable:
    """Vectorized s -> E_{alpha,beta}(-s) for s >= 0.

    A cubic spline in log s of E(-s) (1 + s) covers [TABLE_S_MIN, TABLE_S_MAX];
    below it the Taylor polynomial, above it the three-term asymptotic series.
    """

    alpha: float
    beta: float
    nodes_per_decade: int = TABLE_NODES_PER_DECADE
    _spline: interpolate.CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"table alpha must be in (0, 1], got {self.alpha}")
        decades = math.log10(TABLE_S_MAX / TABLE_S_MIN)
        s = np.logspace(
            math.log10(TABLE_S_MIN),
            math.log10(TABLE_S_MAX),
            int(decades * self.nodes_per_decade) + 1,
        )
        values = np.array([_ml_scalar(self.alpha, self.beta, -v) for v in s]) * (1.0 + s)
        object.__setattr__(self, "_spline", interpolate.CubicSpline(np.log(s), values))

    def __call__(self, s: Any) -> Any:
        arr = np.asarray(s, dtype=float)
        if np.any(arr < 0):
            raise ValueError("MittagLefflerTable evaluates E(-s) for s >= 0 only")
        out = np.empty_like(arr)
        low = arr < TABLE_S_MIN
        high = arr > TABLE_S_MAX
        mid = ~(low | high)
        a, b = self.alpha, self.beta
        if np.any(low):
            sl = arr[low]
            out[low] = (
                special.rgamma(b) - sl * special.rgamma(a + b) + sl**2 * special.rgamma(2 * a + b)
            )
        if np.any(mid):
            sm = arr[mid]
            out[mid] = self._spline(np.log(sm)) / (1.0 + sm)
        if np.any(high):
            sh = arr[high]
            out[high] = sum(
                (-1.0) ** (k - 1) * sh ** (-k) * special.rgamma(b - a * k) for k in range(1, 4)
            )
        if np.ndim(s) == 0:
            return float(out)
        return out


@lru_cache(maxsize=64)
def ml_table(alpha: float, beta: float) -> MittagLefflerTable:
    """Cached MittagLefflerTable for (alpha, beta)."""
    logger.debug("building Mittag-Leffler table alpha=%g beta=%g", alpha, beta)
    return MittagLefflerTable(float(alpha), float(beta))


def verify_ml_decay(
    alpha: float,
    b: float,
    x_max: float = 1e6,
    *,
    points_per_decade: int = 4,
    threshold: float = 0.10,
) -> EstimateReport:
    """sup_x |E_{alpha,b}(-x)| max(1, x) on [0, x_max], then on [0, 10 x_max]."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")

    def samples(upper: float) -> np.ndarray:
        decades = math.log10(upper) + 3.0
        x = np.concatenate(
            [[0.0], np.logspace(-3.0, math.log10(upper), int(decades * points_per_decade) + 1)]
        )
        values = np.asarray(mittag_leffler(alpha, b, -x))
        return np.abs(values) * np.maximum(1.0, x)

    return ratio_report(
        "|E_{alpha,b}(-x)| max(1, x) <= C",
        samples(x_max),
        samples(10.0 * x_max),
        threshold=threshold,
        parameters={"alpha": alpha, "b": b, "x_max": x_max},
    )


def _check_stable_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"stability index must be in (0, 1), got {alpha}")


def _zolotarev_a(alpha: float, u: np.ndarray) -> np.ndarray:
    """A(u) = [sin(a u)^a sin((1-a) u)^(1-a) / sin u]^(1/(1-a)) on (0, pi)."""
    return (
        np.sin(alpha * u) ** alpha * np.sin((1.0 - alpha) * u) ** (1.0 - alpha) / np.sin(u)
    ) ** (1.0 / (1.0 - alpha))


def _zolotarev_scalar(alpha: float, u: float) -> float:
    s = math.sin(u)
    if s <= 0.0:
        return math.inf
    base = math.sin(alpha * u) ** alpha * math.sin((1.0 - alpha) * u) ** (1.0 - alpha) / s
    try:
        return base ** (1.0 / (1.0 - alpha))
    except OverflowError:
        return math.inf


def _stable_tail_series(alpha: float, x: float) -> float:
    total = 0.0
    for k in range(1, 200):
        term = (
            (-1.0) ** (k + 1)
            * math.exp(special.gammaln(alpha * k + 1.0) - special.gammaln(k + 1.0))
            * math.sin(math.pi * alpha * k)
            * x ** (-alpha * k - 1.0)
        )
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return total / math.pi


def one_sided_stable_density(alpha: float, x: Any) -> Any:
    """Density g_alpha of Q_1, where E exp(-lam Q_1) = exp(-lam^alpha)."""
    _check_stable_alpha(alpha)
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("stable density is defined for x > 0")
    out = np.array([_stable_density_scalar(alpha, float(v)) for v in arr.ravel()])
    if np.ndim(x) == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def _stable_density_scalar(alpha: float, x: float) -> float:
    if x ** (-alpha) <= 0.1:
        return max(_stable_tail_series(alpha, x), 0.0)
    scale = x ** (-alpha / (1.0 - alpha))

    def integrand(u: float) -> float:
        a = _zolotarev_scalar(alpha, u)
        if not math.isfinite(a) or a * scale > 745.0:
            return 0.0
        return a * math.exp(-a * scale)

    value, _ = adaptive_quad(
        integrand, 0.0, math.pi, epsabs=0.0, epsrel=1e-11, limit=200,
        what=f"stable density (alpha={alpha}, x={x:g})", strict=False,
    )
    return max(alpha / (1.0 - alpha) * x ** (-1.0 / (1.0 - alpha)) * value / math.pi, 0.0)


def stable_cdf(alpha: float, x: float) -> float:
    """P(Q_1 <= x) = (1/pi) int_0^pi exp(-A(u) x^(-a/(1-a))) du."""
    _check_stable_alpha(alpha)
    if x <= 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    scale = x ** (-alpha / (1.0 - alpha))

    def integrand(u: float) -> float:
        a = _zolotarev_scalar(alpha, u)
        if not math.isfinite(a) or a * scale > 745.0:
            return 0.0
        return math.exp(-a * scale)

    value, _ = adaptive_quad(
        integrand, 0.0, math.pi, epsabs=1e-14, epsrel=1e-11, what="stable cdf", strict=False,
    )
    return min(max(value / math.pi, 0.0), 1.0)


def inverse_subordinator_density(alpha: float, t: float, r: Any) -> Any:
    """Density of R_t = inf{s : Q_s > t}: (t/alpha) r^(-1-1/alpha) g_alpha(t r^(-1/alpha))."""
    _check_stable_alpha(alpha)
    if t <= 0:
        raise ValueError("t must be positive")
    arr = np.asarray(r, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("r must be positive")
    g = np.asarray(one_sided_stable_density(alpha, t * arr ** (-1.0 / alpha)))
    out = (t / alpha) * arr ** (-1.0 - 1.0 / alpha) * g
    if np.ndim(r) == 0:
        return float(out)
    return out


def sample_stable(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Kanter's method: Q_1 = (A(U) / W)^((1-a)/a), U ~ U(0, pi), W ~ Exp(1)."""
    _check_stable_alpha(alpha)
    # (0, pi]: A(0) is a removable 0/0
    u = math.pi * (1.0 - rng.random(size))
    w = rng.exponential(1.0, size)
    return (_zolotarev_a(alpha, u) / w) ** ((1.0 - alpha) / alpha)


def sample_inverse_subordinator(
    alpha: float, t: float, size: int, rng: np.random.Generator
) -> np.ndarray:
    """R_t = (t / Q_1)^alpha, from the self-similarity Q_r = r^(1/alpha) Q_1."""
    if t <= 0:
        raise ValueError("t must be positive")
    return (t / sample_stable(alpha, size, rng)) ** alpha


def chi_square_check(
    samples: np.ndarray,
    density: Callable[[float], float] | None,
    edges: Sequence[float],
    *,
    cdf: Callable[[float], float] | None = None,
) -> float:
    """Chi-square goodness-of-fit p-value of ``samples`` against a law on ``edges``.

    Bin probabilities come from ``cdf`` when given, otherwise from quadrature of
    ``density``. Samples outside the edges are dropped along with the
    matching probability mass.
    """
    edge_arr = np.asarray(edges, dtype=float)
    if edge_arr.ndim != 1 or edge_arr.size < 3 or np.any(np.diff(edge_arr) <= 0):
        raise ValueError("edges must be an increasing sequence with at least 2 bins")
    observed, _ = np.histogram(samples, bins=edge_arr)
    if cdf is not None:
        cdf_values = np.array([cdf(float(e)) for e in edge_arr])
        probs = np.diff(cdf_values)
    elif density is not None:
        probs = np.array(
            [
                integrate.quad(density, float(lo), float(hi), limit=200)[0]
                for lo, hi in zip(edge_arr[:-1], edge_arr[1:], strict=True)
            ]
        )
    else:
        raise ValueError("chi_square_check needs a density or a cdf")
    if np.any(probs <= 0):
        raise ValueError("every bin needs positive probability")
    expected = probs / probs.sum() * observed.sum()
    return float(stats.chisquare(observed, expected).pvalue)
