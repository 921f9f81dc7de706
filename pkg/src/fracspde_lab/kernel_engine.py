"""Fundamental-solution kernels and their estimates.

Whole-space kernels are radial Fourier inversions of their symbols:

    d = 1:  (1/pi)      int_0^inf cos(xi r) S(xi) dxi
    d = 2:  (1/(2 pi))  int_0^inf xi J0(xi r) S(xi) dxi
    d = 3:  (1/(2 pi^2 r)) int_0^inf xi sin(xi r) S(xi) dxi

Symbols with exponential decay (p and phi(Delta)^gamma p) are cut where
t phi(xi^2) = 40. Mittag-Leffler symbols decay only algebraically; their
oscillatory tails go to QUADPACK's QAWF (d = 1, 3) or to averaged panel sums
between zeros of J0 (d = 2). An inversion whose amplitude does not decay is
refused with DivergentInversionError.

Lattice tables exist for simulation and for the discrete mass identity.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any

import numpy as np
from scipy import special

from fracspde_lab.bernstein import BernsteinSpec, inverse, inverse_array
from fracspde_lab.errors import DivergentInversionError, ParameterWindowError, QuadratureError
from fracspde_lab.fraccalc import adaptive_quad
from fracspde_lab.lattice import SpectralGrid
from fracspde_lab.reports import EstimateReport, ratio_report, tolerance_report
from fracspde_lab.special_fn import inverse_subordinator_density, ml_table
from fracspde_lab.workers import ordered_map

logger = logging.getLogger(__name__)

EXP_CUTOFF = 40.0
LATTICE_TRUNCATION = 1e-12
J0_PANELS = 400
FD_RELATIVE_STEP = 1e-3
MASS_RADIUS_FACTOR = 1e3
R_SAMPLE_POINTS = (1.0, 2.0)


class Route(StrEnum):
    FOURIER = "fourier"
    SUBORDINATION = "subordination"


class DensityMethod(StrEnum):
    RADIAL_QUADRATURE = "radial_quadrature"
    LATTICE_FFT = "lattice_fft"


class KernelKind(StrEnum):
    P = "p"
    Q = "q"
    Q_GAMMA = "q_gamma"


@dataclass(frozen=True)
class FracParams:
    """Exponent bundle (alpha, beta, gamma, kappa) with derived constants."""

    alpha: float
    beta: float
    gamma: float = 0.0
    kappa: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.kappa < 1.0:
            raise ValueError(f"kappa must be in (0, 1), got {self.kappa}")
        if self.alpha - self.beta <= -0.5:
            raise ParameterWindowError(
                "alpha - beta > -1/2",
                f"alpha={self.alpha}, beta={self.beta}: the condition alpha - beta > -1/2 "
                "is needed to make sense of the stochastic term",
            )

    @property
    def excess(self) -> float:
        """(2 beta - 1)^+ / alpha."""
        return max(2.0 * self.beta - 1.0, 0.0) / self.alpha

    @property
    def c0(self) -> float:
        return self.excess + (self.kappa if self.beta == 0.5 else 0.0)

    @property
    def c1(self) -> float:
        return 2.0 - self.excess

    @property
    def theta(self) -> float:
        return min(1.0, self.alpha, 2.0 * (self.alpha - self.beta) + 1.0)

    @property
    def ml_beta(self) -> float:
        """Second Mittag-Leffler index 1 - beta + alpha of the q symbol."""
        return 1.0 - self.beta + self.alpha

    def d0(self, delta0: float) -> float:
        return 2.0 * delta0 * (2.0 - self.excess)

    def with_beta(self, beta: float) -> FracParams:
        return FracParams(self.alpha, beta, self.gamma, self.kappa)


def _radius(x: Any, d: int) -> tuple[float, float]:
    """(|x|, sign) for scalar x in d = 1 or a length-d vector."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.size != d:
        raise ValueError(f"point {x!r} does not have dimension {d}")
    if d == 1:
        return abs(float(arr[0])), (1.0 if arr[0] >= 0 else -1.0)
    return float(np.linalg.norm(arr)), 1.0


def _phi_xi(phi: BernsteinSpec, xi: Any) -> np.ndarray:
    return phi.symbol(np.square(np.asarray(xi, dtype=float)))


def _xi_at_level(phi: BernsteinSpec, level: float) -> float:
    """xi with phi(xi^2) = level."""
    return math.sqrt(inverse(phi, level))


def length_scale(phi: BernsteinSpec, alpha: float, t: float) -> float:
    """l(t) = phi^-1(t^-alpha)^(-1/2), the spatial scale of q(t, .)."""
    return inverse(phi, t**-alpha) ** -0.5


Symbol = Callable[[np.ndarray], np.ndarray]


def _scalar(fn: Symbol) -> Callable[[float], float]:
    return lambda v: float(fn(np.asarray(v)))


def _hankel0(amplitude: Symbol, r: float, xi_max: float | None) -> float:
    """int_0^inf xi J0(xi r) S(xi) dxi by Gauss panels between zeros of J0.

    Without a cutoff the alternating partial sums are accelerated by
    repeated averaging.
    """
    nodes, weights = special.roots_legendre(32)
    if xi_max is None:
        n_panels = J0_PANELS
    else:
        n_panels = max(int(xi_max * r / math.pi) + 2, 4)
    zeros = np.concatenate([[0.0], special.jn_zeros(0, n_panels) / r])
    lo, hi = zeros[:-1, None], zeros[1:, None]
    xi = lo + (hi - lo) * (1 + nodes) / 2
    panels = np.sum((hi - lo) / 2 * weights * xi * special.j0(xi * r) * amplitude(xi), axis=1)
    partial = np.cumsum(panels)
    if xi_max is not None:
        return float(partial[-1])
    tail = partial[-12:]
    while tail.size > 1:
        tail = (tail[1:] + tail[:-1]) / 2
    return float(tail[0])


def _radial_inversion(
    amplitude: Symbol,
    r: float,
    d: int,
    *,
    m: int = 0,
    sign: float = 1.0,
    xi_max: float | None = None,
    xi_split: float | None = None,
    what: str = "kernel",
) -> float:
    """Inverse Fourier transform of a radial symbol at |x| = r (D^m only in d = 1)."""
    if m and d != 1:
        raise ValueError("spatial derivatives are implemented for d = 1")
    scale = abs(float(amplitude(np.asarray(1e-12 if xi_split is None else 0.0))))
    head_end = xi_max if xi_max is not None else xi_split
    if head_end is None:
        raise ValueError("need a cutoff or a split point")
    floor = 1e-15 * max(scale, 1e-300) * head_end

    if d == 2:
        if r == 0.0:
            value = _integrate_radial(lambda v: v * amplitude(v), xi_max, xi_split, floor, what)
        else:
            value = _hankel0(amplitude, r, xi_max)
        return value / (2.0 * math.pi)

    if d == 1:
        power = m
        weight = "sin" if m % 2 else "cos"
        prefactor = (1.0 if m == 0 else -1.0) / math.pi
        if m == 1:
            prefactor *= sign
    else:
        power = 1
        weight = "sin"
        prefactor = 1.0 / (2.0 * math.pi**2 * r) if r > 0 else 1.0 / (2.0 * math.pi**2)

    def amp(v: np.ndarray) -> np.ndarray:
        return np.asarray(v) ** power * amplitude(v)

    if r == 0.0:
        if weight == "sin" and d == 1:
            return 0.0
        extra = 1 if d == 3 else 0
        value = _integrate_radial(
            lambda v: np.asarray(v) ** extra * amp(v), xi_max, xi_split, floor, what
        )
        return prefactor * value

    if xi_max is not None:
        value, _ = adaptive_quad(
            _scalar(amp), 0.0, xi_max, epsabs=floor, epsrel=1e-10, limit=2000,
            weight=weight, wvar=r, what=what,
        )
        return prefactor * value
    assert xi_split is not None
    head, _ = adaptive_quad(
        _scalar(amp), 0.0, xi_split, epsabs=floor, epsrel=1e-10, limit=2000,
        weight=weight, wvar=r, what=what,
    )
    tail, _ = adaptive_quad(
        _scalar(amp), xi_split, math.inf, epsabs=max(1e-10 * abs(head), floor),
        limit=2000, weight=weight, wvar=r, what=f"{what} (tail)",
    )
    return prefactor * (head + tail)


def _integrate_radial(
    fn: Symbol, xi_max: float | None, xi_split: float | None, floor: float, what: str
) -> float:
    if xi_max is not None:
        value, _ = adaptive_quad(_scalar(fn), 0.0, xi_max, epsabs=floor, epsrel=1e-10,
                                 limit=500, what=what)
        return value
    assert xi_split is not None
    head, _ = adaptive_quad(_scalar(fn), 0.0, xi_split, epsabs=floor, epsrel=1e-10,
                            limit=500, what=what)
    tail, _ = adaptive_quad(_scalar(fn), xi_split, math.inf, epsabs=floor, epsrel=1e-10,
                            limit=500, what=f"{what} (tail)")
    return head + tail


def _check_decay(
    amplitude: Symbol, phi: BernsteinSpec, level_scale: float, d: int, m: int,
    at_origin: bool, what: str,
) -> None:
    """Refuse inversions whose radial amplitude does not decay.

    At x != 0 the oscillatory integral needs xi^((d-1)/2 + m) |S| -> 0; at
    x = 0 it needs absolute integrability, i.e. xi^(d + m) |S| -> 0.
    Compared between phi(xi^2) = 1e2 / level_scale and 1e6 / level_scale.
    """
    exponent = d + m if at_origin else (d - 1) / 2.0 + m
    xi1 = _xi_at_level(phi, 1e2 / level_scale)
    xi2 = _xi_at_level(phi, 1e6 / level_scale)
    a1 = xi1**exponent * abs(float(amplitude(np.asarray(xi1))))
    a2 = xi2**exponent * abs(float(amplitude(np.asarray(xi2))))
    if a1 == 0.0 or a2 >= 0.5 * a1:
        where = "at x = 0" if at_origin else "for x != 0"
        raise DivergentInversionError(
            f"Fourier inversion of {what} diverges {where}: xi^{exponent:g} |S(xi)| does not "
            f"decay ({a1:.3g} at xi={xi1:.3g}, {a2:.3g} at xi={xi2:.3g})"
        )


def transition_density_p(
    phi: BernsteinSpec,
    t: float,
    x: Any,
    method: DensityMethod | str = DensityMethod.RADIAL_QUADRATURE,
    *,
    d: int = 1,
    grid: SpectralGrid | None = None,
) -> float:
    """p(t, x) = (2 pi)^-d int exp(i xi.x - t phi(|xi|^2)) dxi."""
    if t <= 0:
        raise ValueError("t must be positive")
    method = DensityMethod(method)

    def symbol(v: np.ndarray) -> np.ndarray:
        return np.exp(-t * _phi_xi(phi, v))

    if method is DensityMethod.LATTICE_FFT:
        if grid is None:
            raise ValueError("lattice_fft needs a grid")
        return _lattice_point_value(symbol(np.sqrt(grid.xi_sq)), grid, x, t, phi)
    r, _ = _radius(x, d)
    xi_max = _xi_at_level(phi, EXP_CUTOFF / t)
    try:
        return _radial_inversion(symbol, r, d, xi_max=xi_max, what=f"p(t={t:g})")
    except QuadratureError as exc:
        raise QuadratureError(
            f"{exc}; integrand decay exp(-t phi(xi^2)) at xi_max={xi_max:.3g} is "
            f"{math.exp(-EXP_CUTOFF):.1e}"
        ) from exc


def _lattice_point_value(
    spectrum: np.ndarray, grid: SpectralGrid, x: Any, t: float, phi: BernsteinSpec
) -> float:
    """(1/L^d) sum_k S(xi_k) exp(i xi_k . x) at an arbitrary point."""
    edge = float(np.exp(-t * phi.symbol(np.asarray(grid.max_xi_sq / grid.dim))))
    if edge > LATTICE_TRUNCATION:
        logger.warning(
            "lattice spectral truncation exp(-t phi(xi_max^2)) = %.2e exceeds %.0e",
            edge, LATTICE_TRUNCATION,
        )
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.size != grid.dim:
        raise ValueError(f"point {x!r} does not have dimension {grid.dim}")
    axes = np.meshgrid(*([grid.wavenumbers] * grid.dim), indexing="ij")
    phase = sum(k * c for k, c in zip(axes, point, strict=True))
    total = np.sum(spectrum * np.cos(phase))
    return float(total) / grid.box_length**grid.dim


def _q_symbol(params: FracParams, phi: BernsteinSpec, t: float, gamma: float) -> Symbol:
    table = ml_table(params.alpha, params.ml_beta)
    sign = -1.0 if gamma > 0 else 1.0
    factor = sign * t ** (params.alpha - params.beta)
    t_alpha = t**params.alpha

    def symbol(v: np.ndarray) -> np.ndarray:
        lam = _phi_xi(phi, v)
        values = factor * np.asarray(table(t_alpha * lam))
        if gamma > 0:
            values = values * lam**gamma
        return values

    return symbol


def q_kernel(
    params: FracParams,
    phi: BernsteinSpec,
    t: float,
    x: Any,
    m: int = 0,
    *,
    gamma: float | None = None,
    d: int = 1,
) -> float:
    """D_x^m q^gamma_{alpha,beta}(t, x) by radial Fourier inversion.

    gamma = 0 gives q_{alpha,beta}; beta = alpha gives the transition density q.
    """
    gamma = params.gamma if gamma is None else gamma
    if t <= 0:
        raise ValueError("t must be positive")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    if m not in (0, 1, 2):
        raise ValueError(f"derivative order must be 0, 1 or 2, got {m}")
    r, sign = _radius(x, d)
    symbol = _q_symbol(params, phi, t, gamma)
    what = f"D^{m} q^{gamma:g}_(alpha={params.alpha:g}, beta={params.beta:g})(t={t:g})"
    level = t**params.alpha
    if r == 0.0 and m == 1:
        return 0.0
    _check_decay(symbol, phi, level, d, m, r == 0.0, what)
    xi_split = _xi_at_level(phi, 10.0 / level)
    return _radial_inversion(symbol, r, d, m=m, sign=sign, xi_split=xi_split, what=what)


def inversion_diverges(
    params: FracParams, phi: BernsteinSpec, m: int, gamma: float, *, d: int = 1
) -> bool:
    """True when D^m q^gamma cannot be inverted at x != 0."""
    try:
        _check_decay(_q_symbol(params, phi, 1.0, gamma), phi, 1.0, d, m, False, "q")
    except DivergentInversionError:
        return True
    return False


def q_kernel_fd(
    params: FracParams,
    phi: BernsteinSpec,
    t: float,
    x: float,
    m: int,
    *,
    gamma: float | None = None,
) -> float:
    """D^m q by centered differences of the m = 0 kernel, step 1e-3 |x| (d = 1)."""
    if x == 0:
        raise ValueError("difference fallback needs x != 0")
    h = FD_RELATIVE_STEP * abs(x)
    plus = q_kernel(params, phi, t, x + h, gamma=gamma)
    minus = q_kernel(params, phi, t, x - h, gamma=gamma)
    if m == 1:
        return (plus - minus) / (2.0 * h)
    if m == 2:
        return (plus - 2.0 * q_kernel(params, phi, t, x, gamma=gamma) + minus) / h**2
    return q_kernel(params, phi, t, x, gamma=gamma)


def fractional_p_kernel(
    phi: BernsteinSpec, gamma: float, t: float, x: Any, m: int = 0, *, d: int = 1
) -> float:
    """phi(Delta)^gamma D^m p(t, x): symbol -phi(|xi|^2)^gamma exp(-t phi)."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    if t <= 0:
        raise ValueError("t must be positive")
    r, sign = _radius(x, d)

    def symbol(v: np.ndarray) -> np.ndarray:
        lam = _phi_xi(phi, v)
        return -(lam**gamma) * np.exp(-t * lam)

    xi_max = _xi_at_level(phi, EXP_CUTOFF / t)
    return _radial_inversion(
        symbol, r, d, m=m, sign=sign, xi_max=xi_max, what=f"phi(Delta)^{gamma:g} D^{m} p"
    )


def p_derivative(phi: BernsteinSpec, t: float, x: float, m: int) -> float:
    """D^m p(t, x) in d = 1."""
    r, sign = _radius(x, 1)

    def symbol(v: np.ndarray) -> np.ndarray:
        return np.exp(-t * _phi_xi(phi, v))

    xi_max = _xi_at_level(phi, EXP_CUTOFF / t)
    return _radial_inversion(symbol, r, 1, m=m, sign=sign, xi_max=xi_max, what=f"D^{m} p")


def subordination_q(alpha: float, phi: BernsteinSpec, t: float, x: Any, *, d: int = 1) -> float:
    """q(t, x) = int_0^inf p(r, x) varphi(t, r) dr, integrated in log r."""
    if t <= 0:
        raise ValueError("t must be positive")
    r_x, _ = _radius(x, d)
    scale = t**alpha
    # below r_lo the neglected mass is O((r_lo / t^alpha)^2) for x != 0
    r_lo = scale * (1e-12 if r_x == 0.0 else 1e-6)
    r_hi = scale * 1e2

    def integrand(u: float) -> float:
        r = math.exp(u)
        p = transition_density_p(phi, r, x, d=d)
        return max(p, 0.0) * inverse_subordinator_density(alpha, t, r) * r

    value, _ = adaptive_quad(
        integrand, math.log(r_lo), math.log(r_hi), epsabs=0.0, epsrel=1e-8, limit=200,
        points=[math.log(scale)], what=f"subordination q(t={t:g})",
    )
    return value


def kernel_mass(
    params: FracParams,
    phi: BernsteinSpec,
    t: float,
    radius: float,
    *,
    gamma: float | None = None,
) -> float:
    """int_{|x| < radius} q^gamma_{alpha,beta}(t, x) dx in d = 1.

    Uses (2/pi) int_0^inf S(xi) sin(xi R) / xi dxi; tends to S(0) as R grows.
    """
    gamma = params.gamma if gamma is None else gamma
    if radius <= 0:
        raise ValueError("radius must be positive")
    symbol = _q_symbol(params, phi, t, gamma)
    level = t**params.alpha
    xi0 = math.pi / radius
    split = max(_xi_at_level(phi, 10.0 / level), xi0)

    def near(v: float) -> float:
        return float(symbol(np.asarray(v))) * radius * float(np.sinc(v * radius / math.pi))

    def amp(v: float) -> float:
        return float(symbol(np.asarray(v))) / v

    what = f"kernel mass (t={t:g}, R={radius:g})"
    head, _ = adaptive_quad(near, 0.0, xi0, epsabs=0.0, epsrel=1e-11, what=what)
    middle = 0.0
    if split > xi0:
        middle, _ = adaptive_quad(amp, xi0, split, epsabs=1e-14 * abs(head), epsrel=1e-10,
                                  limit=5000, weight="sin", wvar=radius, what=what)
    tail, _ = adaptive_quad(amp, split, math.inf, epsabs=max(1e-12 * abs(head), 1e-300),
                            limit=2000, weight="sin", wvar=radius, what=f"{what} (tail)")
    return 2.0 / math.pi * (head + middle + tail)


def small_lambda_power(phi: BernsteinSpec, lam: float) -> tuple[float, float]:
    """(c, nu) with phi(mu) ~ c mu^nu for mu near ``lam``, from a log-slope over [lam/2, 2 lam]."""
    lo, mid, hi = (float(v) for v in phi.symbol(np.array([lam / 2.0, lam, 2.0 * lam])))
    nu = math.log(hi / lo) / math.log(4.0)
    return mid / lam**nu, nu


def mass_tail(params: FracParams, phi: BernsteinSpec, t: float, radius: float) -> float:
    """Leading-order int_{|x| > radius} q_{alpha,beta}(t, x) dx in d = 1.

    Near xi = 0 the symbol is t^(alpha-beta)/Gamma(1+alpha-beta) - A |xi|^s with
    A = c t^(2 alpha-beta)/Gamma(1+2 alpha-beta) and s = 2 nu, where phi(mu) ~ c mu^nu
    at mu = radius^-2. The |xi|^s term gives the density tail
    A Gamma(1+s) sin(pi s/2) / (pi |x|^(1+s)), whose mass beyond the radius is
    2 A Gamma(s) sin(pi s/2) / (pi radius^s). Zero for s = 2.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    c, nu = small_lambda_power(phi, radius**-2)
    s = 2.0 * nu
    amplitude = c * t ** (2.0 * params.alpha - params.beta) * float(
        special.rgamma(1.0 + 2.0 * params.alpha - params.beta)
    )
    return 2.0 * amplitude * math.gamma(s) * math.sin(math.pi * s / 2.0) / (math.pi * radius**s)


def whole_space_mass(
    params: FracParams,
    phi: BernsteinSpec,
    t: float,
    *,
    radius_factor: float = MASS_RADIUS_FACTOR,
) -> float:
    """int q_{alpha,beta}(t, x) dx over R (d = 1): mass inside radius_factor l(t) plus its tail."""
    radius = radius_factor * length_scale(phi, params.alpha, t)
    inside = kernel_mass(params, phi, t, radius, gamma=0.0)
    return inside + mass_tail(params, phi, t, radius)


def mass_target(params: FracParams, t: float) -> float:
    """Signed mass t^(alpha-beta) / Gamma(1 + alpha - beta) of q_{alpha,beta}(t, .)."""
    return t ** (params.alpha - params.beta) * float(special.rgamma(params.ml_beta))


@dataclass(frozen=True)
class KernelTable:
    """Sampled kernel values on (t, x) with the route that produced them.

    Radial tables hold ``values[i, j]`` at (times[i], positions[j]); lattice
    tables hold fields of the grid shape per time.
    """

    kind: KernelKind
    route: Route
    times: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    params: FracParams | None = None
    gamma: float = 0.0
    m: int = 0
    grid: SpectralGrid | None = None

    def discrete_mass(self) -> np.ndarray:
        if self.grid is None:
            raise ValueError("discrete mass needs a lattice table")
        return np.asarray(self.grid.integrate(self.values))

    def columns(self) -> list[str]:
        dim = self.positions.shape[1] if self.positions.ndim == 2 else 1
        axes = ["x", "y", "z"][:dim]
        return ["alpha", "beta", "gamma", "m", "t", *axes, "value", "route"]

    def rows(self) -> Iterator[tuple[Any, ...]]:
        alpha = self.params.alpha if self.params else float("nan")
        beta = self.params.beta if self.params else float("nan")
        pos = self.positions.reshape(len(self.positions), -1)
        flat = self.values.reshape(len(self.times), -1)
        for i, t in enumerate(self.times):
            for j, point in enumerate(pos):
                yield (alpha, beta, self.gamma, self.m, float(t), *map(float, point),
                       float(flat[i, j]), self.route.value)


def build_kernel_table(
    params: FracParams,
    phi: BernsteinSpec,
    times: Sequence[float],
    xs: Sequence[float],
    *,
    route: Route | str = Route.FOURIER,
    m: int = 0,
    gamma: float | None = None,
    threads: int | None = None,
) -> KernelTable:
    """Radial KernelTable of D^m q^gamma (Fourier) or q (subordination), d = 1."""
    route = Route(route)
    gamma = params.gamma if gamma is None else gamma
    if route is Route.SUBORDINATION and (params.beta != params.alpha or gamma or m):
        raise ValueError("the subordination route computes q = q_(alpha,alpha) only")
    pairs = [(float(t), float(x)) for t in times for x in xs]

    def evaluate(pair: tuple[float, float]) -> float:
        t, x = pair
        if route is Route.SUBORDINATION:
            return subordination_q(params.alpha, phi, t, x)
        return q_kernel(params, phi, t, x, m, gamma=gamma)

    values = np.array(ordered_map(evaluate, pairs, threads)).reshape(len(times), len(xs))
    kind = KernelKind.Q_GAMMA if gamma > 0 else KernelKind.Q
    return KernelTable(
        kind=kind, route=route, times=np.asarray(times, dtype=float),
        positions=np.asarray(xs, dtype=float)[:, None], values=values,
        params=params, gamma=gamma, m=m,
    )


def lattice_symbol(
    params: FracParams, phi: BernsteinSpec, grid: SpectralGrid, t: float, gamma: float = 0.0
) -> np.ndarray:
    lam = grid.phi_table(phi)
    table = ml_table(params.alpha, params.ml_beta)
    values = t ** (params.alpha - params.beta) * np.asarray(table(t**params.alpha * lam))
    if gamma > 0:
        values = -values * lam**gamma
    return values


def lattice_kernel_table(
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    times: Sequence[float],
    *,
    gamma: float | None = None,
) -> KernelTable:
    """Periodic q^gamma_{alpha,beta}(t, .) on the lattice; its discrete integral is S(0)."""
    gamma = params.gamma if gamma is None else gamma
    axes = tuple(range(grid.dim))
    fields = [
        np.fft.ifftn(lattice_symbol(params, phi, grid, float(t), gamma), axes=axes).real
        / grid.cell_volume
        for t in times
    ]
    mesh = np.meshgrid(*([grid.centered_coords] * grid.dim), indexing="ij")
    positions = np.stack([a.ravel() for a in mesh], axis=1)
    return KernelTable(
        kind=KernelKind.Q_GAMMA if gamma > 0 else KernelKind.Q,
        route=Route.FOURIER,
        times=np.asarray(times, dtype=float),
        positions=positions,
        values=np.stack(fields),
        params=params,
        gamma=gamma,
        grid=grid,
    )


def verify_mass_identity(
    params: FracParams,
    phi: BernsteinSpec,
    times: Sequence[float],
    *,
    rtol: float = 1e-4,
    radius_factor: float = MASS_RADIUS_FACTOR,
    threads: int | None = None,
) -> EstimateReport:
    """Whole-space signed mass of q_{alpha,beta} in d = 1, tail included, per time."""
    ts = [float(t) for t in times]

    def relative_error(t: float) -> float:
        target = mass_target(params, t)
        mass = whole_space_mass(params, phi, t, radius_factor=radius_factor)
        return abs(mass - target) / abs(target)

    return tolerance_report(
        "int q_{alpha,beta}(t,x) dx = t^(alpha-beta)/Gamma(1+alpha-beta)",
        ordered_map(relative_error, ts, threads),
        rtol,
        parameters={"phi": phi.name, "alpha": params.alpha, "beta": params.beta,
                    "radius_factor": radius_factor},
    )


def mass_identity_grid(
    alphas: Sequence[float], offsets: Sequence[float] = (0.4,), fixed: Sequence[float] = (0.3,)
) -> list[FracParams]:
    """(alpha, beta) pairs with beta in fixed + {alpha} + {alpha + offset}."""
    pairs = []
    for alpha in alphas:
        betas = [*fixed, alpha, *(alpha + o for o in offsets)]
        pairs.extend(FracParams(alpha, beta) for beta in dict.fromkeys(betas))
    return pairs


def verify_mass_sweep(
    phis: Sequence[BernsteinSpec],
    grid_params: Sequence[FracParams],
    times: Sequence[float],
    *,
    rtol: float = 1e-4,
    radius_factor: float = MASS_RADIUS_FACTOR,
    threads: int | None = None,
) -> EstimateReport:
    """One report for the whole-space mass identity over every (phi, alpha, beta, t)."""
    cases = [(phi, p, float(t)) for phi in phis for p in grid_params for t in times]

    def relative_error(case: tuple[BernsteinSpec, FracParams, float]) -> float:
        phi, p, t = case
        target = mass_target(p, t)
        return abs(whole_space_mass(p, phi, t, radius_factor=radius_factor) - target) / abs(target)

    errors = ordered_map(relative_error, cases, threads)
    worst = int(np.argmax(errors))
    phi, p, t = cases[worst]
    return tolerance_report(
        "int q_{alpha,beta}(t,x) dx = t^(alpha-beta)/Gamma(1+alpha-beta)",
        errors,
        rtol,
        parameters={"phi": ",".join(f.name for f in phis), "cases": len(cases),
                    "radius_factor": radius_factor},
        notes=[f"worst case phi={phi.name}, alpha={p.alpha:g}, beta={p.beta:g}, t={t:g}"],
    )


def verify_lattice_mass(
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    times: Sequence[float],
    *,
    rtol: float = 1e-10,
) -> EstimateReport:
    """Discrete integral of the lattice q_{alpha,beta}: the k = 0 coefficient of its transform."""
    table = lattice_kernel_table(params, phi, grid, times, gamma=0.0)
    targets = np.array([mass_target(params, float(t)) for t in times])
    return tolerance_report(
        "sum_x q_{alpha,beta}(t,x) dx^d = t^(alpha-beta)/Gamma(1+alpha-beta) (lattice)",
        np.abs(table.discrete_mass() - targets) / np.abs(targets),
        rtol,
        parameters={"phi": phi.name, "alpha": params.alpha, "beta": params.beta},
        notes=["checks the lattice transform normalization, not the whole-space kernel"],
    )


def verify_symbol_round_trip(
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    t: float,
    *,
    tolerance: float = 1e-12,
) -> EstimateReport:
    """Forward FFT of the lattice kernel reproduces the Mittag-Leffler symbol."""
    table = lattice_kernel_table(params, phi, grid, [t], gamma=0.0)
    axes = tuple(range(grid.dim))
    back = np.fft.fftn(table.values[0], axes=axes) * grid.cell_volume
    symbol = lattice_symbol(params, phi, grid, t)
    scale = float(np.max(np.abs(symbol)))
    return tolerance_report(
        "F(q_{alpha,beta}) = t^(alpha-beta) E_{alpha,1-beta+alpha}(-t^alpha phi)",
        np.abs(back - symbol).ravel() / scale,
        tolerance,
        parameters={"phi": phi.name, "t": t},
    )


def verify_route_agreement(
    alpha: float,
    phi: BernsteinSpec,
    times: Sequence[float],
    xs: Sequence[float],
    *,
    rtol: float = 1e-3,
    threads: int | None = None,
) -> EstimateReport:
    """Fourier q_{alpha,alpha} against the subordination integral."""
    params = FracParams(alpha, alpha)
    pairs = [(float(t), float(x)) for t in times for x in xs]
    notes = []
    usable = []
    for t, x in pairs:
        if x == 0.0:
            try:
                _check_decay(_q_symbol(params, phi, t, 0.0), phi, t**alpha, 1, 0, True, "q")
            except DivergentInversionError:
                notes.append(f"q(t={t:g}, 0) is infinite; excluded")
                continue
        usable.append((t, x))

    def errors(pair: tuple[float, float]) -> float:
        t, x = pair
        fourier = q_kernel(params, phi, t, x)
        sub = subordination_q(alpha, phi, t, x)
        return abs(fourier - sub) / abs(fourier)

    return tolerance_report(
        "q (Fourier) = int p(r,x) varphi(t,r) dr (subordination)",
        ordered_map(errors, usable, threads),
        rtol,
        parameters={"phi": phi.name, "alpha": alpha},
        notes=notes,
    )


@dataclass(frozen=True)
class KernelSweep:
    """Log-spaced (t, x) sweep; refinement inserts the geometric midpoints."""

    t_min: float = 1e-2
    t_max: float = 1e2
    x_min: float = 1e-2
    x_max: float = 1e2
    points_t: int = 5
    points_x: int = 9

    def fine(self) -> tuple[np.ndarray, np.ndarray]:
        t = np.logspace(math.log10(self.t_min), math.log10(self.t_max), 2 * self.points_t - 1)
        x = np.logspace(math.log10(self.x_min), math.log10(self.x_max), 2 * self.points_x - 1)
        return t, x


def _partial_integral(
    phi: BernsteinSpec, lower: float, upper: float, power: float, gamma: float
) -> float:
    """int_lower^upper phi^-1(1/r)^power r^-gamma dr, in u = log r."""

    def integrand(u: float) -> float:
        return inverse(phi, math.exp(-u)) ** power * math.exp((1.0 - gamma) * u)

    value, _ = adaptive_quad(integrand, math.log(lower), math.log(upper), epsabs=0.0,
                             epsrel=1e-8, what="partial bound integral")
    return value


def _sweep_report(
    inequality: str,
    kernel: np.ndarray,
    bound: np.ndarray,
    mask: np.ndarray | None,
    *,
    threshold: float,
    parameters: dict[str, Any],
    notes: Sequence[str] = (),
) -> EstimateReport:
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(kernel) / bound
    full = np.ones_like(ratio, dtype=bool) if mask is None else mask
    coarse = ratio[::2, ::2][full[::2, ::2]]
    fine = ratio[full]
    return ratio_report(inequality, coarse, fine, threshold=threshold, parameters=parameters,
                        notes=notes)


def verify_kernel_bounds(
    params: FracParams,
    phi: BernsteinSpec,
    sweep: KernelSweep,
    orders: Sequence[int] = (0, 1, 2),
    gammas: Sequence[float] = (0.0,),
    *,
    threshold: float = 0.10,
    threads: int | None = None,
) -> list[EstimateReport]:
    """Ratios of |kernel| to every whole-space bound over a (t, x) sweep (d = 1).

    Each ratio field is evaluated on the refined sweep; the base sweep is its
    even-index subgrid. Partial bounds are tested where t^alpha phi(|x|^-2) >= 1.
    """
    d = 1
    t, x = sweep.fine()
    tt, xx = np.meshgrid(t, x, indexing="ij")
    phi_x = np.asarray(phi(xx**-2.0))
    inv_t = inverse_array(phi, 1.0 / t)[:, None]
    regime = tt**params.alpha * phi_x >= 1.0
    if regime.all() or not regime.any():
        raise ValueError("sweep must cover both regimes t^alpha phi(|x|^-2) >< 1")
    base = {"phi": phi.name, "alpha": params.alpha, "beta": params.beta}
    pairs = [(float(a), float(b)) for a in t for b in x]

    def field_of(fn: Callable[[float, float], float]) -> np.ndarray:
        return np.array(ordered_map(lambda pair: fn(*pair), pairs, threads)).reshape(tt.shape)

    reports: list[EstimateReport] = []

    # p and its derivatives
    for m in orders:
        if m == 0:
            values = field_of(lambda a, b: transition_density_p(phi, a, b))
            bound = np.minimum(inv_t ** (d / 2), tt * phi_x / xx**d)
            name = "p(t,x) <= C (phi^-1(1/t)^(d/2) ^ t phi(|x|^-2)/|x|^d)"
        else:
            values = field_of(lambda a, b, m=m: p_derivative(phi, a, b, m))
            bound = sum(
                xx ** (m - 2 * n)
                * np.minimum(inv_t ** (d / 2 + m - n), tt * phi_x / xx ** (d + 2 * (m - n)))
                for n in range(m // 2 + 1)
            )
            name = f"|D^{m} p| <= C sum_n |x|^(m-2n) (phi^-1(1/t)^(d/2+m-n) ^ ...)"
        reports.append(_sweep_report(name, values, bound, None, threshold=threshold,
                                     parameters={**base, "m": m}))
        for gamma in gammas:
            if gamma <= 0:
                continue
            values = field_of(lambda a, b, m=m, g=gamma: fractional_p_kernel(phi, g, a, b, m))
            bound = np.minimum(
                tt**-gamma * inv_t ** ((d + m) / 2), phi_x**gamma / xx ** (d + m)
            )
            reports.append(_sweep_report(
                f"|phi(Delta)^gamma D^{m} p| <= C (t^-gamma phi^-1(1/t)^((d+m)/2) ^ "
                "phi(|x|^-2)^gamma/|x|^(d+m))",
                values, bound, None, threshold=threshold,
                parameters={**base, "m": m, "gamma": gamma},
            ))

    # q_{alpha,beta} and q^gamma
    for gamma in gammas:
        for m in orders:
            notes: list[str] = []
            if m > 0 and inversion_diverges(params, phi, m, gamma):
                notes.append(f"D^{m} by centered differences (step {FD_RELATIVE_STEP:g}|x|)")
                values = field_of(lambda a, b, m=m, g=gamma: q_kernel_fd(params, phi, a, b, m,
                                                                         gamma=g))
            else:
                values = field_of(lambda a, b, m=m, g=gamma: q_kernel(params, phi, a, b, m,
                                                                      gamma=g))
            partial = np.full(tt.shape, np.nan)
            for i, j in zip(*np.nonzero(regime), strict=True):
                partial[i, j] = tt[i, j] ** -params.beta * _partial_integral(
                    phi, 1.0 / phi_x[i, j], 2.0 * tt[i, j] ** params.alpha, (d + m) / 2, gamma
                )
            parameters = {**base, "m": m, "gamma": gamma}
            if gamma == 0:
                whole = tt ** (2 * params.alpha - params.beta) * phi_x / xx ** (d + m)
                label = "q_{alpha,beta}"
                whole_text = "t^(2alpha-beta) phi(|x|^-2)/|x|^(d+m)"
            else:
                whole = tt ** (params.alpha - params.beta) * phi_x**gamma / xx ** (d + m)
                label = "q^gamma_{alpha,beta}"
                whole_text = "t^(alpha-beta) phi(|x|^-2)^gamma/|x|^(d+m)"
            reports.append(_sweep_report(
                f"|D^{m} {label}| <= C {whole_text}", values, whole, None,
                threshold=threshold, parameters=parameters, notes=notes,
            ))
            reports.append(_sweep_report(
                f"|D^{m} {label}| <= C t^-beta int phi^-1(1/r)^((d+m)/2) r^-gamma dr "
                "(t^alpha phi(|x|^-2) >= 1)",
                values, partial, regime, threshold=threshold, parameters=parameters, notes=notes,
            ))

    # whole-space absolute mass
    for gamma in gammas:
        def abs_mass(tv: float, g: float = gamma) -> float:
            return _absolute_mass(params, phi, tv, g)

        masses = np.array(ordered_map(abs_mass, [float(v) for v in t], threads))
        exponent = (1.0 - gamma) * params.alpha - params.beta
        ratio = masses / t**exponent
        label = "q_{alpha,beta}" if gamma == 0 else "q^gamma_{alpha,beta}"
        reports.append(ratio_report(
            f"int |{label}(t,x)| dx <= C t^((1-gamma) alpha - beta)",
            ratio[::2], ratio, threshold=threshold, parameters={**base, "gamma": gamma},
        ))
    return reports


def _absolute_mass(
    params: FracParams, phi: BernsteinSpec, t: float, gamma: float, per_decade: int = 16
) -> float:
    """int |q^gamma(t, x)| dx over l(t) [1e-3, 1e3] (d = 1), trapezoid in log x."""
    ell = length_scale(phi, params.alpha, t)
    x = ell * np.logspace(-3.0, 3.0, 6 * per_decade + 1)
    values = np.array([abs(q_kernel(params, phi, t, float(v), gamma=gamma)) for v in x])
    return float(2.0 * np.trapezoid(values * x, np.log(x)))


def bessel_kernel_R(
    phi: BernsteinSpec,
    gamma: float,
    x: Any,
    *,
    d: int = 1,
    method: str = "time_quadrature",
) -> float:
    """R_{gamma,d}(x) = int_0^inf t^(gamma/2-1) e^-t p(t, x) dt.

    ``method="symbol"`` inverts Gamma(gamma/2) (1 + phi(|xi|^2))^(-gamma/2) instead.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    r, _ = _radius(x, d)
    g2 = gamma / 2.0

    def symbol(v: np.ndarray) -> np.ndarray:
        return special.gamma(g2) * (1.0 + _phi_xi(phi, v)) ** -g2

    if r == 0.0 or method == "symbol":
        _check_decay(symbol, phi, 1.0, d, 0, r == 0.0, f"R_(gamma={gamma:g})")
    if method == "symbol":
        return _radial_inversion(symbol, r, d, xi_split=_xi_at_level(phi, 10.0),
                                 what="R symbol")
    if method != "time_quadrature":
        raise ValueError(f"unknown method {method!r}")

    def integrand(u: float) -> float:
        s = math.exp(u)
        return s**g2 * math.exp(-s) * max(transition_density_p(phi, s, x, d=d), 0.0)

    value, _ = adaptive_quad(integrand, math.log(1e-12), math.log(60.0), epsabs=0.0,
                             epsrel=1e-9, limit=200, what="R time quadrature")
    return value


def r_window_holds(delta0: float, gamma: float, d: int, r: float) -> bool:
    if gamma >= d / delta0:
        return True
    return 2.0 * r < d / (d - delta0 * gamma)


def lattice_R(phi: BernsteinSpec, gamma: float, grid: SpectralGrid) -> np.ndarray:
    symbol = special.gamma(gamma / 2.0) * (1.0 + grid.phi_table(phi)) ** (-gamma / 2.0)
    return np.fft.ifftn(symbol).real / grid.cell_volume


def verify_R_integrability(
    phi: BernsteinSpec,
    gamma: float,
    d: int,
    r: float,
    grid: SpectralGrid,
    *,
    levels: int = 2,
    threshold: float = 0.10,
    mass_tolerance: float = 1e-10,
    cross_tolerance: float = 0.05,
    points: Sequence[float] = R_SAMPLE_POINTS,
) -> list[EstimateReport]:
    """L_{2r} norm of R_{gamma,d} on the lattice under resolution and box refinement.

    The lattice kernel inverts the symbol; it is checked at nodes on the first
    axis against the time-quadrature definition on a grid with half the spacing
    and twice the box.
    """
    if not r_window_holds(phi.delta0, gamma, d, r):
        raise ParameterWindowError(
            "2r < d/(d - delta0 gamma)",
            f"gamma={gamma}, d={d}, delta0={phi.delta0}, 2r={2 * r}",
        )
    grids = [grid]
    for _ in range(levels):
        grids.append(grids[-1].refined())
    norms = [float(g.lp_norm(lattice_R(phi, gamma, g), 2.0 * r)) for g in grids]
    wide = grid.enlarged()
    wide_norm = float(wide.lp_norm(lattice_R(phi, gamma, wide), 2.0 * r))

    check = grid.refined().enlarged()
    kernel = lattice_R(phi, gamma, check)
    errors = []
    notes = []
    for x in points:
        j = int(round(x / check.spacing))
        if not 0 < j < check.points // 4:
            notes.append(f"x={x:g} outside the quarter box; skipped")
            continue
        node = j * check.spacing
        exact = bessel_kernel_R(phi, gamma, node if d == 1 else [node] + [0.0] * (d - 1), d=d)
        lattice_value = float(kernel[(j,) + (0,) * (d - 1)])
        errors.append(abs(lattice_value - exact) / abs(exact))
        notes.append(f"x={node:g}: lattice {lattice_value:.6g}, time quadrature {exact:.6g}")
    if not errors:
        errors.append(math.inf)

    mass_error = abs(float(grid.integrate(lattice_R(phi, gamma, grid))) - special.gamma(gamma / 2))
    parameters = {"phi": phi.name, "gamma": gamma, "d": d, "r": r}
    return [
        ratio_report(
            "R_{gamma,d} in L_{2r}", norms[:-1], norms[1:], threshold=threshold,
            parameters=parameters, notes=["resolution refinement"],
        ),
        ratio_report(
            "R_{gamma,d} in L_{2r}", [norms[0]], [wide_norm], threshold=threshold,
            parameters=parameters, notes=["box refinement"],
        ),
        tolerance_report(
            "R_{gamma,d}(x) = int_0^inf t^(gamma/2-1) e^-t p(t,x) dt", errors, cross_tolerance,
            parameters=parameters, notes=notes,
        ),
        tolerance_report(
            "sum_x R_{gamma,d}(x) dx^d = Gamma(gamma/2) (lattice)",
            [mass_error / special.gamma(gamma / 2.0)],
            mass_tolerance, parameters=parameters,
            notes=["checks the lattice transform normalization"],
        ),
    ]


def p_lebesgue_bound(
    phi: BernsteinSpec,
    times: Sequence[float],
    r: float,
    grid: SpectralGrid,
    *,
    threshold: float = 0.10,
) -> EstimateReport:
    """||p(t,.)||_{2r}^{2r} / phi^-1(1/t)^(d r - d/2) on the lattice and its refinement."""
    if r < 1.0:
        raise ValueError("r must be >= 1")
    d = grid.dim

    def ratios(g: SpectralGrid) -> np.ndarray:
        out = []
        for t in times:
            spectrum = np.exp(-t * g.phi_table(phi))
            kernel = np.fft.ifftn(spectrum).real / g.cell_volume
            norm = float(g.integrate(np.abs(kernel) ** (2 * r)))
            out.append(norm / inverse(phi, 1.0 / t) ** (d * r - d / 2.0))
        return np.array(out)

    return ratio_report(
        "||p(t,.)||_{2r}^{2r} <= C phi^-1(1/t)^(dr - d/2)",
        ratios(grid),
        ratios(grid.refined()),
        threshold=threshold,
        parameters={"phi": phi.name, "r": r, "d": d},
    )
