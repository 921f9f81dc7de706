"""Bernstein functions: catalog, evaluation, inverse, powers, and scaling checks.

A :class:`BernsteinSpec` bundles a closed-form phi with its lower scaling
constants (delta0, kappa0):

    kappa0 (R/r)^delta0 <= phi(R)/phi(r) <= R/r,    0 < r < R.

The upper half is concavity; the lower half is the scaling assumption every
kernel estimate is built on. Catalog entries store delta0/kappa0 rather than
estimating them. For each entry phi(lam)/lam^delta0 is nondecreasing, which
gives kappa0 = 1.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from enum import StrEnum
from itertools import combinations
from typing import Any

import numpy as np
from scipy import integrate, optimize, special

from fracspde_lab.errors import ScalingViolationError
from fracspde_lab.reports import EstimateReport, ratio_report

logger = logging.getLogger(__name__)

LAMBDA_MIN = 1e-30
LAMBDA_MAX = 1e30

# central-difference step (relative to lam) per derivative order
FD_STEPS = {1: 1e-5, 2: 1e-4, 3: 7e-4, 4: 2.5e-3}
MAX_DERIVATIVE_ORDER = 4

EvalFn = Callable[[np.ndarray], np.ndarray]
DerivFn = Callable[[int, np.ndarray], np.ndarray]

_fd_warned: set[str] = set()


class BernsteinName(StrEnum):
    STABLE = "stable"
    SUM_OF_STABLES = "sum_of_stables"
    STABLE_LOG = "stable_log"
    RELATIVISTIC = "relativistic"
    CONJUGATE_GEOMETRIC = "conjugate_geometric"


def _falling(a: float, n: int) -> float:
    """Falling factorial a (a-1) ... (a-n+1)."""
    out = 1.0
    for k in range(n):
        out *= a - k
    return out


def _as_array(lam: Any) -> np.ndarray:
    return np.asarray(lam, dtype=float)


def _check_domain(lam: np.ndarray) -> None:
    if np.any(~np.isfinite(lam)) or np.any(lam < LAMBDA_MIN) or np.any(lam > LAMBDA_MAX):
        bad = lam[(~np.isfinite(lam)) | (lam < LAMBDA_MIN) | (lam > LAMBDA_MAX)]
        raise ValueError(
            f"lambda outside supported domain [{LAMBDA_MIN:g}, {LAMBDA_MAX:g}]: {bad.ravel()[:3]}"
        )


def _restore_shape(value: np.ndarray, like: Any) -> Any:
    if np.ndim(like) == 0:
        return float(value)
    return value


def _central_difference(fn: EvalFn, n: int, lam: np.ndarray) -> np.ndarray:
    """n-th derivative by the second-order central stencil, h = lam * FD_STEPS[n]."""
    h = lam * FD_STEPS[n]
    total = np.zeros_like(lam)
    for k in range(n + 1):
        total += (-1) ** k * special.comb(n, k) * fn(lam + (n / 2 - k) * h)
    return total / h**n


@dataclass(frozen=True)
class BernsteinSpec:
    """Immutable Bernstein function with its scaling constants."""

    name: str
    fn: EvalFn = field(repr=False, compare=False)
    delta0: float
    kappa0: float
    params: Mapping[str, float] = field(default_factory=dict)
    drift: float = 0.0
    closed_deriv: DerivFn | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.delta0 <= 1.0:
            raise ValueError(f"delta0 must be in (0, 1], got {self.delta0}")
        if self.kappa0 <= 0.0:
            raise ValueError(f"kappa0 must be positive, got {self.kappa0}")
        if self.drift < 0.0:
            raise ValueError("drift must be non-negative")

    def __call__(self, lam: Any) -> Any:
        return self.eval(lam)

    def eval(self, lam: Any) -> Any:
        arr = _as_array(lam)
        _check_domain(arr)
        return _restore_shape(self.fn(arr), lam)

    def symbol(self, lam: Any) -> np.ndarray:
        """phi on [0, inf) without the domain clamp; phi(0) = 0.

        Used for multiplier tables where xi = 0 and very large frequencies occur.
        """
        arr = _as_array(lam)
        out = np.zeros_like(arr)
        pos = arr > 0
        out[pos] = self.fn(arr[pos])
        return out

    @property
    def has_closed_derivative(self) -> bool:
        return self.closed_deriv is not None

    def deriv(self, n: int, lam: Any) -> Any:
        if not 1 <= n <= MAX_DERIVATIVE_ORDER:
            raise ValueError(f"derivative order must be 1..{MAX_DERIVATIVE_ORDER}, got {n}")
        arr = _as_array(lam)
        _check_domain(arr)
        if self.closed_deriv is not None:
            return _restore_shape(self.closed_deriv(n, arr), lam)
        if self.name not in _fd_warned:
            _fd_warned.add(self.name)
            logger.warning("%s: no closed-form derivative, using central differences", self.name)
        return _restore_shape(_central_difference(self.fn, n, arr), lam)


def _stable(beta: float) -> BernsteinSpec:
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"stable: beta must be in (0, 1], got {beta}")

    def fn(lam: np.ndarray) -> np.ndarray:
        return lam**beta

    def deriv(n: int, lam: np.ndarray) -> np.ndarray:
        return _falling(beta, n) * lam ** (beta - n)

    return BernsteinSpec(
        name=BernsteinName.STABLE, fn=fn, delta0=beta, kappa0=1.0,
        params={"beta": beta}, closed_deriv=deriv,
    )


def _sum_of_stables(beta1: float, beta2: float) -> BernsteinSpec:
    for b in (beta1, beta2):
        if not 0.0 < b <= 1.0:
            raise ValueError(f"sum_of_stables: exponents must be in (0, 1], got {b}")

    def fn(lam: np.ndarray) -> np.ndarray:
        return lam**beta1 + lam**beta2

    def deriv(n: int, lam: np.ndarray) -> np.ndarray:
        return _falling(beta1, n) * lam ** (beta1 - n) + _falling(beta2, n) * lam ** (beta2 - n)

    return BernsteinSpec(
        name=BernsteinName.SUM_OF_STABLES, fn=fn, delta0=min(beta1, beta2), kappa0=1.0,
        params={"beta1": beta1, "beta2": beta2}, closed_deriv=deriv,
    )


def _stable_log(beta: float, gamma: float) -> BernsteinSpec:
    if not 0.0 < beta < 1.0:
        raise ValueError(f"stable_log: beta must be in (0, 1), got {beta}")
    if not -beta < gamma < 1.0 - beta:
        raise ValueError(f"stable_log: gamma must be in (-beta, 1-beta), got {gamma}")

    def fn(lam: np.ndarray) -> np.ndarray:
        return lam**beta * np.log1p(lam) ** gamma

    # log(1+lam)/lam is decreasing, so a negative gamma costs at most lam^gamma
    return BernsteinSpec(
        name=BernsteinName.STABLE_LOG, fn=fn, delta0=beta + min(gamma, 0.0), kappa0=1.0,
        params={"beta": beta, "gamma": gamma},
    )


def _relativistic(beta: float, m: float) -> BernsteinSpec:
    if not 0.0 < beta < 1.0:
        raise ValueError(f"relativistic: beta must be in (0, 1), got {beta}")
    if m <= 0.0:
        raise ValueError(f"relativistic: mass m must be positive, got {m}")
    shift = m ** (1.0 / beta)

    def fn(lam: np.ndarray) -> np.ndarray:
        # (lam + c)^beta - c^beta without cancellation for lam << c
        return m * np.expm1(beta * np.log1p(lam / shift))

    def deriv(n: int, lam: np.ndarray) -> np.ndarray:
        return _falling(beta, n) * (lam + shift) ** (beta - n)

    return BernsteinSpec(
        name=BernsteinName.RELATIVISTIC, fn=fn, delta0=beta, kappa0=1.0,
        params={"beta": beta, "m": m}, closed_deriv=deriv,
    )


def _conjugate_geometric(beta: float) -> BernsteinSpec:
    if not 0.0 < beta < 2.0:
        raise ValueError(f"conjugate_geometric: beta must be in (0, 2), got {beta}")

    def fn(lam: np.ndarray) -> np.ndarray:
        return lam / np.log1p(lam ** (beta / 2.0))

    return BernsteinSpec(
        name=BernsteinName.CONJUGATE_GEOMETRIC, fn=fn, delta0=1.0 - beta / 2.0, kappa0=1.0,
        params={"beta": beta},
    )


_REQUIRED_PARAMS: dict[BernsteinName, tuple[str, ...]] = {
    BernsteinName.STABLE: ("beta",),
    BernsteinName.SUM_OF_STABLES: ("beta1", "beta2"),
    BernsteinName.STABLE_LOG: ("beta", "gamma"),
    BernsteinName.RELATIVISTIC: ("beta", "m"),
    BernsteinName.CONJUGATE_GEOMETRIC: ("beta",),
}

_BUILDERS: dict[BernsteinName, Callable[..., BernsteinSpec]] = {
    BernsteinName.STABLE: _stable,
    BernsteinName.SUM_OF_STABLES: _sum_of_stables,
    BernsteinName.STABLE_LOG: _stable_log,
    BernsteinName.RELATIVISTIC: _relativistic,
    BernsteinName.CONJUGATE_GEOMETRIC: _conjugate_geometric,
}


def catalog(name: str, params: Mapping[str, float] | None = None) -> BernsteinSpec:
    """Build a catalog Bernstein function by name and parameter map."""
    try:
        key = BernsteinName(name)
    except ValueError:
        known = ", ".join(n.value for n in BernsteinName)
        raise ValueError(f"Unknown Bernstein function {name!r}. Available: {known}")
    given = dict(params or {})
    required = _REQUIRED_PARAMS[key]
    missing = [p for p in required if p not in given]
    extra = [p for p in given if p not in required]
    if missing or extra:
        raise ValueError(
            f"{key.value}: expected parameters {list(required)}, "
            f"missing {missing}, unexpected {extra}"
        )
    return _BUILDERS[key](*(float(given[p]) for p in required))


def custom(
    name: str,
    fn: EvalFn,
    delta0: float,
    kappa0: float,
    deriv: DerivFn | None = None,
    params: Mapping[str, float] | None = None,
) -> BernsteinSpec:
    """Wrap a user-supplied closed-form Bernstein function."""
    return BernsteinSpec(
        name=name, fn=fn, delta0=delta0, kappa0=kappa0,
        params=dict(params or {}), closed_deriv=deriv,
    )


def inverse(phi: BernsteinSpec, y: float, rtol: float = 1e-12) -> float:
    """Return lam with |phi(lam) - y| <= rtol * y.

    Root bracketing expands geometrically, then Brent's method runs in
    log-lam. Since d log phi / d log lam lies in (0, 1], an absolute
    tolerance on log-lam bounds the relative residual in phi.
    """
    if not y > 0.0:
        raise ValueError(f"inverse requires y > 0, got {y}")
    log_y = math.log(y)

    def residual(u: float) -> float:
        return math.log(float(phi.fn(np.asarray(math.exp(u))))) - log_y

    lo_u = hi_u = 0.0
    while residual(lo_u) > 0.0:
        lo_u -= 2.0
        if lo_u < math.log(LAMBDA_MIN):
            raise ValueError(f"phi^-1({y:g}) below lambda domain")
    while residual(hi_u) < 0.0:
        hi_u += 2.0
        if hi_u > math.log(LAMBDA_MAX):
            raise ValueError(f"phi^-1({y:g}) above lambda domain")
    if lo_u == hi_u:
        return math.exp(lo_u)
    root = optimize.brentq(residual, lo_u, hi_u, xtol=0.1 * rtol, rtol=4 * np.finfo(float).eps)
    return math.exp(root)


def inverse_array(phi: BernsteinSpec, y: Any) -> np.ndarray:
    values = np.atleast_1d(np.asarray(y, dtype=float))
    return np.array([inverse(phi, float(v)) for v in values.ravel()]).reshape(values.shape)


def kappa_scale(phi: BernsteinSpec, alpha: float, b: float) -> float:
    """Time extent kappa(b) = phi(b^-2)^(-1/alpha) of a radius-b parabolic cube."""
    if b <= 0.0:
        raise ValueError(f"radius b must be positive, got {b}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    return float(phi(b**-2.0)) ** (-1.0 / alpha)


def power(phi: BernsteinSpec, gamma: float) -> BernsteinSpec:
    """phi^gamma: drift-free Bernstein function with gamma*delta0 and kappa0^gamma."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"power: gamma must be in (0, 1), got {gamma}")
    base = phi

    def fn(lam: np.ndarray) -> np.ndarray:
        return base.fn(lam) ** gamma

    def deriv(n: int, lam: np.ndarray) -> np.ndarray:
        y = base.fn(lam)
        g = [base.deriv(k, lam) for k in range(1, n + 1)]
        f = [_falling(gamma, k) * y ** (gamma - k) for k in range(1, n + 1)]
        # Faa di Bruno for y(lam)^gamma
        if n == 1:
            return f[0] * g[0]
        if n == 2:
            return f[1] * g[0] ** 2 + f[0] * g[1]
        if n == 3:
            return f[2] * g[0] ** 3 + 3 * f[1] * g[0] * g[1] + f[0] * g[2]
        return (
            f[3] * g[0] ** 4
            + 6 * f[2] * g[0] ** 2 * g[1]
            + f[1] * (3 * g[1] ** 2 + 4 * g[0] * g[2])
            + f[0] * g[3]
        )

    params = dict(phi.params)
    params["power"] = params.get("power", 1.0) * gamma
    return BernsteinSpec(
        name=f"{phi.name}^{gamma:g}",
        fn=fn,
        delta0=phi.delta0 * gamma,
        kappa0=phi.kappa0**gamma,
        params=params,
        drift=0.0,
        closed_deriv=deriv if phi.has_closed_derivative else None,
    )


def _log_pairs(lo: float, hi: float, points: int) -> tuple[np.ndarray, np.ndarray]:
    grid = np.logspace(math.log10(lo), math.log10(hi), points)
    pairs = np.array(list(combinations(range(points), 2)))
    return grid[pairs[:, 0]], grid[pairs[:, 1]]


def verify_scaling(
    phi: BernsteinSpec,
    delta0: float | None = None,
    kappa0: float | None = None,
    *,
    lo: float = 1e-6,
    hi: float = 1e6,
    points: int = 49,
    strict: bool = False,
    tolerance: float = 1e-12,
) -> EstimateReport:
    """Check the two-sided scaling sandwich on all log-spaced pairs r < R.

    Samples are max(lower, upper) where lower = kappa0 (R/r)^delta0 / ratio and
    upper = ratio / (R/r); both must stay <= 1.
    """
    if math.log10(hi / lo) < 12.0 - 1e-9:
        raise ValueError("scaling grid must span at least 12 decades")
    d0 = phi.delta0 if delta0 is None else delta0
    k0 = phi.kappa0 if kappa0 is None else kappa0
    r, R = _log_pairs(lo, hi, points)
    ratio = phi.fn(R) / phi.fn(r)
    lower = k0 * (R / r) ** d0 / ratio
    upper = ratio / (R / r)
    worst = np.maximum(lower, upper)
    i_low, i_up = int(np.argmax(lower)), int(np.argmax(upper))
    notes = [
        f"worst lower margin {1 - lower[i_low]:.3e} at r={r[i_low]:.3e}, R={R[i_low]:.3e}",
        f"worst upper margin {1 - upper[i_up]:.3e} at r={r[i_up]:.3e}, R={R[i_up]:.3e}",
    ]
    passed = bool(np.all(np.isfinite(worst)) and np.max(worst) <= 1.0 + tolerance)
    if not passed:
        i = int(np.argmax(worst))
        bound = "lower scaling bound" if lower[i] >= upper[i] else "concavity bound"
        if strict:
            raise ScalingViolationError(float(r[i]), float(R[i]), bound)
        notes.append(f"{bound} violated at r={r[i]:.6g}, R={R[i]:.6g}")
    return EstimateReport(
        inequality="kappa0 (R/r)^delta0 <= phi(R)/phi(r) <= R/r",
        parameters={"phi": phi.name, "delta0": d0, "kappa0": k0, "lo": lo, "hi": hi},
        samples=[float(w) for w in worst],
        supremum=float(np.max(worst)),
        threshold=1.0 + tolerance,
        passed=passed,
        notes=notes,
    )


def estimate_scaling(
    phi: BernsteinSpec, lo: float = 1e-6, hi: float = 1e6, points: int = 121
) -> tuple[float, float]:
    """Heuristic (delta0, kappa0) for a user phi by log-log regression."""
    lam = np.logspace(math.log10(lo), math.log10(hi), points)
    slopes = np.diff(np.log(phi.fn(lam))) / np.diff(np.log(lam))
    delta0 = float(np.clip(np.min(slopes), 1e-6, 1.0))
    r, R = _log_pairs(lo, hi, min(points, 61))
    kappa0 = float(np.min(phi.fn(R) / phi.fn(r) / (R / r) ** delta0))
    logger.warning(
        "%s: scaling constants estimated heuristically (delta0=%.4f, kappa0=%.4f)",
        phi.name, delta0, kappa0,
    )
    return delta0, min(kappa0, 1.0)


def _derivative_ratios(
    phi: BernsteinSpec, n: int, lam: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    dn = np.asarray(phi.deriv(n, lam), dtype=float)
    values = phi.fn(lam)
    return lam**n * np.abs(dn) / values, dn


def verify_derivative_bound(
    phi: BernsteinSpec,
    n_max: int,
    *,
    lo: float = 1e-8,
    hi: float = 1e8,
    per_decade: int = 8,
    threshold: float = 0.10,
) -> list[EstimateReport]:
    """sup over lam of lam^n |phi^(n)(lam)| / phi(lam) for n = 1..n_max.

    Also checks the sign pattern (-1)^n phi^(n) <= 0. Non-finite samples at the
    range ends shrink the range by a decade per side.
    """
    if not 1 <= n_max <= MAX_DERIVATIVE_ORDER:
        raise ValueError(f"n_max must be 1..{MAX_DERIVATIVE_ORDER}, got {n_max}")
    reports = []
    for n in range(1, n_max + 1):
        a, b = lo, hi
        while True:
            decades = math.log10(b / a)
            coarse = np.logspace(math.log10(a), math.log10(b), int(decades * per_decade) + 1)
            fine = np.logspace(math.log10(a), math.log10(b), int(decades * 2 * per_decade) + 1)
            with np.errstate(all="ignore"):
                c_ratio, c_dn = _derivative_ratios(phi, n, coarse)
                f_ratio, _ = _derivative_ratios(phi, n, fine)
            if np.all(np.isfinite(c_ratio)) and np.all(np.isfinite(f_ratio)):
                break
            if decades <= 2.0:
                break
            logger.warning(
                "%s: derivative %d not finite on [%g, %g], shrinking range", phi.name, n, a, b
            )
            a, b = a * 10.0, b / 10.0
        sign_ok = bool(np.all((-1.0) ** n * c_dn <= 1e-6 * phi.fn(coarse) / coarse**n))
        notes = [] if sign_ok else [f"sign pattern (-1)^{n} phi^({n}) <= 0 violated"]
        if not phi.has_closed_derivative:
            notes.append("finite-difference derivative")
        report = ratio_report(
            f"lam^{n} |phi^({n})(lam)| <= C phi(lam)",
            c_ratio,
            f_ratio,
            threshold=threshold,
            parameters={"phi": phi.name, "n": n, "lo": a, "hi": b},
            notes=notes,
        )
        if not sign_ok:
            report.passed = False
        reports.append(report)
    return reports


def phi_tail_integral(phi: BernsteinSpec, lam: float) -> float:
    """int_{1/lam}^inf r^-1 phi(r^-2) dr, computed in u = log r."""
    value, _ = integrate.quad(
        lambda u: float(phi.fn(np.asarray(math.exp(-2.0 * u)))),
        -math.log(lam),
        np.inf,
        limit=200,
        epsabs=0.0,
        epsrel=1e-10,
    )
    return float(value)


def verify_phi_integral(
    phi: BernsteinSpec,
    *,
    lo: float = 1e-4,
    hi: float = 1e4,
    points: int = 17,
    threshold: float = 0.10,
) -> EstimateReport:
    """Ratio of the tail integral of r^-1 phi(r^-2) to phi(lam^2), refinement-checked."""

    def ratios(count: int) -> np.ndarray:
        lams = np.logspace(math.log10(lo), math.log10(hi), count)
        return np.array([phi_tail_integral(phi, lam) / float(phi.fn(lam**2)) for lam in lams])

    return ratio_report(
        "int_{1/lam}^inf r^-1 phi(r^-2) dr <= C phi(lam^2)",
        ratios(points),
        ratios(2 * points - 1),
        threshold=threshold,
        parameters={"phi": phi.name, "lo": lo, "hi": hi},
    )
