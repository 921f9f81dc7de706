"""Lattice simulation of the time-fractional stochastic equation

    d_t^alpha u = phi(Delta) u + f + d_t^beta sum_k int g^k dw^k,   u(0) = u0

through its kernel representation. On the periodic lattice every frequency
evolves independently: the noise enters through the kernel
tau^(alpha-beta) E_{alpha,1-beta+alpha}(-tau^alpha lam), the forcing through
tau^(alpha-1) E_{alpha,alpha}(-tau^alpha lam) and the initial data through
E_{alpha,1}(-t^alpha lam), lam = phi(|xi|^2).

Time integrals of these kernels are taken cell by cell with the singular power
absorbed exactly, so the variances below are exact for coefficients that are
constant on time cells.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
from scipy import integrate, signal, special

from fracspde_lab.bernstein import BernsteinSpec
from fracspde_lab.errors import ParameterWindowError, PicardDivergenceError
from fracspde_lab.fraccalc import (
    SampledPath,
    TimeGrid,
    power_cell_integrals,
    rl_integral,
    singular_cell_integrals,
)
from fracspde_lab.kernel_engine import FracParams
from fracspde_lab.lattice import SpectralGrid, trig_basis
from fracspde_lab.reports import EstimateReport, ratio_report, tolerance_report
from fracspde_lab.special_fn import ml_table
from fracspde_lab.workers import ordered_map

logger = logging.getLogger(__name__)

EXACT_STREAM = 1 << 31
PICARD_TOLERANCE = 1e-12
GROWTH_LIMIT = 3

FieldMap = Callable[[np.ndarray], np.ndarray]


def _generator(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream)."""
    return np.random.Generator(np.random.Philox(key=seed + (stream << 64)))


@dataclass(frozen=True)
class NoisePath:
    """Increments dw^k_i ~ N(0, dt) of K independent Wiener processes.

    Mode k of replica r is drawn from its own Philox stream, so any subset of
    modes or replicas can be regenerated without touching the others.
    """

    seed: int
    modes: int
    n_steps: int
    dt: float
    replica: int = 0
    fixed: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.modes < 1 or self.n_steps < 1:
            raise ValueError("modes and n_steps must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.fixed is not None and self.fixed.shape != (self.n_steps, self.modes):
            raise ValueError(f"fixed increments must have shape {(self.n_steps, self.modes)}")

    @classmethod
    def zeros(cls, modes: int, n_steps: int, dt: float) -> NoisePath:
        return cls(0, modes, n_steps, dt, fixed=np.zeros((n_steps, modes)))

    @cached_property
    def increments(self) -> np.ndarray:
        """Array (n_steps, K)."""
        if self.fixed is not None:
            return self.fixed
        scale = math.sqrt(self.dt)
        columns = [
            _generator(self.seed, (self.replica << 32) | k).standard_normal(self.n_steps)
            for k in range(self.modes)
        ]
        return scale * np.stack(columns, axis=1)


def noise_batch(
    seed: int, modes: int, n_steps: int, dt: float, replicas: Sequence[int],
    threads: int | None = None,
) -> np.ndarray:
    """Increments of several replicas, shape (R, n_steps, K)."""
    return np.stack(
        ordered_map(lambda r: NoisePath(seed, modes, n_steps, dt, r).increments, replicas, threads)
    )


@dataclass(frozen=True)
class WhiteNoiseWindow:
    """Admissible exponents for the space-time white-noise equation."""

    d0: float
    k0: float
    s: float
    gamma: float


@dataclass(frozen=True)
class ForcingSpec:
    """Coefficients g^k(t, x) = a_k(t) h(u) psi_k(x) and drift f(t, x) + F(u).

    ``profiles`` has shape (K, *grid.shape). ``mode_xi_sq`` is set when every
    profile is a lattice eigenfunction (trigonometric mode) with that |xi|^2.
    """

    profiles: np.ndarray = field(repr=False)
    amplitude: Callable[[np.ndarray], np.ndarray] | None = None
    drift: Callable[[float], np.ndarray] | None = None
    drift_map: FieldMap | None = None
    noise_map: FieldMap | None = None
    drift_lipschitz: float = 0.0
    noise_lipschitz: float = 0.0
    mode_xi_sq: np.ndarray | None = field(default=None, repr=False)
    window: WhiteNoiseWindow | None = None

    @property
    def modes(self) -> int:
        return int(self.profiles.shape[0])

    @property
    def is_deterministic(self) -> bool:
        return self.noise_map is None

    def amplitudes(self, times: np.ndarray) -> np.ndarray:
        """a_k(t) at ``times``, shape (len(times), K)."""
        if self.amplitude is None:
            return np.ones((len(times), self.modes))
        values = np.asarray(self.amplitude(np.asarray(times)), dtype=float)
        if values.shape != (len(times), self.modes):
            raise ValueError(f"amplitude must return shape {(len(times), self.modes)}")
        return values

    def coefficients(self, times: np.ndarray, state: np.ndarray | None = None) -> np.ndarray:
        """g^k at ``times``, shape (n, K, *shape); ``state`` (n, *shape) feeds h(u)."""
        spread = (...,) + (None,) * (self.profiles.ndim - 1)
        values = self.amplitudes(times)[spread] * self.profiles
        if self.noise_map is not None:
            frozen = np.zeros((len(times),) + self.profiles.shape[1:]) if state is None else state
            values = values * np.asarray(self.noise_map(frozen))[:, None]
        return values

    def drift_values(self, times: np.ndarray, state: np.ndarray | None = None) -> np.ndarray | None:
        if self.drift is None and self.drift_map is None:
            return None
        out = np.zeros((len(times),) + self.profiles.shape[1:])
        if self.drift is not None:
            out += np.stack([np.asarray(self.drift(float(t))) for t in times])
        if self.drift_map is not None:
            out += np.asarray(self.drift_map(np.zeros_like(out) if state is None else state))
        return out

    def shifted(self, points: int) -> ForcingSpec:
        """Same forcing translated by ``points`` lattice cells along the first axis."""
        return ForcingSpec(
            profiles=np.roll(self.profiles, points, axis=1),
            amplitude=self.amplitude,
            mode_xi_sq=None,
        )

    def check_lipschitz(self, rng: np.random.Generator, samples: int = 256,
                        spread: float = 3.0) -> None:
        """Sample pairs and confirm the declared Lipschitz constants."""
        for name, fn, declared in (
            ("drift", self.drift_map, self.drift_lipschitz),
            ("noise", self.noise_map, self.noise_lipschitz),
        ):
            if fn is None:
                continue
            u = spread * rng.standard_normal(samples)
            v = spread * rng.standard_normal(samples)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.abs(np.asarray(fn(u)) - np.asarray(fn(v))) / np.abs(u - v)
            observed = float(np.nanmax(ratio))
            if observed > declared * (1 + 1e-9):
                raise ValueError(
                    f"{name} map has Lipschitz ratio {observed:.4g} above the declared {declared:g}"
                )


def modal_forcing(
    grid: SpectralGrid,
    count: int,
    *,
    scale: float = 1.0,
    amplitude: Callable[[np.ndarray], np.ndarray] | None = None,
) -> ForcingSpec:
    """g^k = scale * eta^k for the first ``count`` trigonometric modes."""
    basis = trig_basis(grid, count)
    return ForcingSpec(
        profiles=scale * basis.functions, amplitude=amplitude, mode_xi_sq=basis.xi_sq,
    )


def bump_forcing(
    grid: SpectralGrid, centers: Sequence[float], width: float, *, scale: float = 1.0
) -> ForcingSpec:
    """One periodized Gaussian bump profile per center (d = 1)."""
    if grid.dim != 1:
        raise ValueError("bump forcing is defined for d = 1")
    x = grid.coords
    profiles = []
    for c in centers:
        offset = (x - c + grid.box_length / 2) % grid.box_length - grid.box_length / 2
        profiles.append(scale * np.exp(-0.5 * (offset / width) ** 2))
    return ForcingSpec(profiles=np.stack(profiles))


@dataclass
class SolutionField:
    """Lattice values u(t_i, x_j) with provenance."""

    times: np.ndarray
    values: np.ndarray = field(repr=False)
    grid: SpectralGrid
    params: FracParams
    scheme: str
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.times),) + self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match times and grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"{self.scheme} produced non-finite values")

    def l2_norms(self) -> np.ndarray:
        return np.sqrt(self.grid.integrate(self.values**2))

    def columns(self) -> list[str]:
        return ["t", *["x", "y", "z"][: self.grid.dim], "value"]

    def rows(self) -> Iterator[tuple[float, ...]]:
        mesh = np.meshgrid(*([self.grid.coords] * self.grid.dim), indexing="ij")
        points = np.stack([a.ravel() for a in mesh], axis=1)
        for t, snapshot in zip(self.times, self.values, strict=True):
            for point, value in zip(points, snapshot.ravel(), strict=True):
                yield (float(t), *map(float, point), float(value))


@dataclass(frozen=True)
class KernelCells:
    """Per-cell moments of the noise kernel k(tau) = tau^(alpha-beta) E(-tau^alpha lam).

    ``second[j, l]`` is int_cell_j k^2 and ``first[j, l]`` int_cell_j k over the
    distinct eigenvalues ``lams``; ``index`` maps lattice frequencies to them.
    """

    lams: np.ndarray
    index: np.ndarray
    first: np.ndarray = field(repr=False)
    second: np.ndarray = field(repr=False)
    h: float

    def euler_weights(self) -> np.ndarray:
        """sign(mean) sqrt(cell variance / h): Euler paths carry the exact cell variances."""
        return np.sign(self.first) * np.sqrt(self.second / self.h)

    def on_lattice(self, table: np.ndarray) -> np.ndarray:
        """Spread (n, L) to (n, *grid.shape)."""
        return table[:, self.index]


def kernel_cells(params: FracParams, lam_values: np.ndarray, h: float, n_cells: int) -> KernelCells:
    exponent = params.alpha - params.beta
    if 2 * exponent <= -1.0:
        raise ParameterWindowError(
            "alpha - beta > -1/2",
            f"tau^(2(alpha-beta)) with alpha-beta={exponent:g} is not integrable at 0",
        )
    lams, index = np.unique(np.asarray(lam_values), return_inverse=True)
    index = index.reshape(np.shape(lam_values))
    table = ml_table(params.alpha, params.ml_beta)

    def kernel(tau: np.ndarray) -> np.ndarray:
        return np.asarray(table(tau[:, None] ** params.alpha * lams[None, :]))

    first = singular_cell_integrals(kernel, exponent, h, n_cells)
    second = singular_cell_integrals(lambda tau: kernel(tau) ** 2, 2 * exponent, h, n_cells)
    return KernelCells(lams=lams, index=index, first=first, second=second, h=h)


def causal_sum(weights: np.ndarray, series: np.ndarray) -> np.ndarray:
    """out[n] = sum_{i<n} weights[n-1-i] * series[i] for n = 0..len(series)."""
    n = series.shape[0]
    conv = signal.fftconvolve(weights[:n], series, axes=0)[:n]
    return np.concatenate([np.zeros((1,) + conv.shape[1:], dtype=conv.dtype), conv])


def _fft(grid: SpectralGrid, values: np.ndarray) -> np.ndarray:
    return np.fft.fftn(values, axes=tuple(range(-grid.dim, 0)))


def _ifft(grid: SpectralGrid, values: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(values, axes=tuple(range(-grid.dim, 0))).real


def convolve_euler(
    forcing: ForcingSpec,
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    noise: NoisePath,
    *,
    state: np.ndarray | None = None,
    cells: KernelCells | None = None,
) -> SolutionField:
    """Left-point stochastic convolution on the time grid.

    Coefficients are evaluated at the left end of each cell: from ``state`` when
    given, otherwise (for u-dependent h) from the path being built.
    """
    n = tgrid.n_steps
    if noise.modes != forcing.modes or noise.n_steps != n:
        raise ValueError("noise path does not match forcing modes or time grid")
    cells = cells or kernel_cells(params, grid.phi_table(phi), tgrid.h, n)
    weights = cells.on_lattice(cells.euler_weights())
    dw = noise.increments
    nodes = tgrid.nodes
    if forcing.noise_map is None or state is not None:
        coeff = forcing.coefficients(nodes[:-1], None if state is None else state[:-1])
        driven = _fft(grid, np.einsum("nk...,nk->n...", coeff, dw))
        values = _ifft(grid, causal_sum(weights, driven))
    else:
        spectra = np.zeros((n + 1,) + grid.shape, dtype=complex)
        driven = np.zeros((n,) + grid.shape, dtype=complex)
        values = np.zeros((n + 1,) + grid.shape)
        for step in range(1, n + 1):
            coeff = forcing.coefficients(nodes[step - 1 : step], values[step - 1 : step])
            driven[step - 1] = _fft(grid, np.einsum("k...,k->...", coeff[0], dw[step - 1]))
            spectra[step] = np.sum(weights[:step][::-1] * driven[:step], axis=0)
            values[step] = _ifft(grid, spectra[step])
    return SolutionField(nodes, values, grid, params, "euler", noise.seed)


def modal_coefficients(
    forcing: ForcingSpec,
    params: FracParams,
    phi: BernsteinSpec,
    tgrid: TimeGrid,
    increments: np.ndarray,
) -> np.ndarray:
    """Euler mode coefficients X_k(t_n) for eigenfunction profiles.

    ``increments`` has shape (R, n, K); the result (R, n+1, K) satisfies
    u(t_n) = sum_k X_k(t_n) psi_k.
    """
    if forcing.mode_xi_sq is None or forcing.noise_map is not None:
        raise ValueError("modal coefficients need deterministic eigenfunction profiles")
    cells = kernel_cells(params, phi.symbol(forcing.mode_xi_sq), tgrid.h, tgrid.n_steps)
    weights = cells.on_lattice(cells.euler_weights())
    driven = forcing.amplitudes(tgrid.nodes[:-1])[None] * increments
    conv = signal.fftconvolve(weights[None], driven, axes=1)[:, : tgrid.n_steps]
    return np.concatenate([np.zeros_like(conv[:, :1]), conv], axis=1)


def stochastic_variance(
    forcing: ForcingSpec,
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    *,
    cells: KernelCells | None = None,
) -> np.ndarray:
    """E |u_hat(t_n, xi)|^2 for deterministic coefficients, shape (n+1, *grid.shape)."""
    if not forcing.is_deterministic:
        raise ValueError("exact variances need deterministic coefficients")
    cells = cells or kernel_cells(params, grid.phi_table(phi), tgrid.h, tgrid.n_steps)
    amp2 = forcing.amplitudes(tgrid.nodes[:-1]) ** 2
    spectra2 = np.abs(_fft(grid, forcing.profiles)) ** 2
    second = cells.on_lattice(cells.second)
    out = np.zeros((tgrid.n_steps + 1,) + grid.shape)
    for k in range(forcing.modes):
        out += causal_sum(second, amp2[:, k][(...,) + (None,) * grid.dim]).real * spectra2[k]
    return out


def expected_l2_energy(variance: np.ndarray, grid: SpectralGrid, weight: Any = 1.0) -> np.ndarray:
    """E ||u(t_n)||^2 from spectral variances (discrete Parseval)."""
    total = np.sum(np.asarray(weight) * variance, axis=tuple(range(-grid.dim, 0)))
    return total * grid.cell_volume / grid.points**grid.dim


@dataclass(frozen=True)
class GaussianLaw:
    """Exact joint law of the lattice field at one time, per noise mode.

    For each mode k the frequency amplitudes X_k(lam) are jointly Gaussian
    across the distinct eigenvalues lam with covariance
    sum_i a_k(t_i)^2 int_cell k_lam k_lam'.
    """

    grid: SpectralGrid
    params: FracParams
    times: np.ndarray
    index: np.ndarray = field(repr=False)
    spectra: np.ndarray = field(repr=False)
    factors: tuple[tuple[np.ndarray, ...], ...] = field(repr=False)

    def sample(self, seed: int, replica: int = 0) -> SolutionField:
        values = []
        for i, per_mode in enumerate(self.factors):
            total = np.zeros(self.grid.shape, dtype=complex)
            for k, factor in enumerate(per_mode):
                rng = _generator(seed, (replica << 32) | EXACT_STREAM | (i << 16) | k)
                amplitudes = factor @ rng.standard_normal(factor.shape[1])
                total += self.spectra[k] * amplitudes[self.index]
            values.append(_ifft(self.grid, total))
        return SolutionField(self.times, np.stack(values), self.grid, self.params,
                             "exact_gaussian", seed)


def gaussian_law(
    forcing: ForcingSpec,
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    steps: Sequence[int],
) -> GaussianLaw:
    """Precompute covariance square roots at time nodes ``steps``."""
    if not forcing.is_deterministic:
        raise ValueError("the exact Gaussian scheme needs deterministic coefficients")
    exponent = 2.0 * (params.alpha - params.beta)
    if exponent <= -1.0:
        raise ParameterWindowError("alpha - beta > -1/2", "noise kernel is not square integrable")
    spectra = _fft(grid, forcing.profiles)
    support = np.any(np.abs(spectra) > 1e-14 * max(float(np.max(np.abs(spectra))), 1e-300), axis=0)
    lam_grid = grid.phi_table(phi)
    lams, index = np.unique(lam_grid, return_inverse=True)
    index = index.reshape(grid.shape)
    active = np.unique(index[support])
    table = ml_table(params.alpha, params.ml_beta)
    n = tgrid.n_steps

    def products(tau: np.ndarray) -> np.ndarray:
        k = np.asarray(table(tau[:, None] ** params.alpha * lams[active][None, :]))
        return k[:, :, None] * k[:, None, :]

    cross = (
        singular_cell_integrals(products, exponent, tgrid.h, n)
        if active.size
        else np.zeros((n, 0, 0))
    )
    amp2 = forcing.amplitudes(tgrid.nodes[:-1]) ** 2
    factors = []
    for step in steps:
        if not 0 <= step <= n:
            raise ValueError(f"time step {step} outside 0..{n}")
        per_mode = []
        for k in range(forcing.modes):
            cov = np.einsum("i,ilm->lm", amp2[:step, k][::-1], cross[:step]) if step else (
                np.zeros((active.size, active.size))
            )
            w, v = np.linalg.eigh(cov)
            full = np.zeros((lams.size, active.size))
            full[active] = v * np.sqrt(np.clip(w, 0.0, None))
            per_mode.append(full)
        factors.append(tuple(per_mode))
    times = tgrid.nodes[list(steps)]
    return GaussianLaw(grid, params, times, index, spectra, tuple(factors))


def convolve_exact_gaussian(
    forcing: ForcingSpec,
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    seed: int,
    *,
    steps: Sequence[int] | None = None,
    replica: int = 0,
) -> SolutionField:
    """One draw of the stochastic convolution at the requested time nodes.

    Each requested time is sampled from its exact marginal law; draws at
    different times are not jointly distributed like a path.
    """
    steps = list(range(tgrid.n_steps + 1)) if steps is None else list(steps)
    return gaussian_law(forcing, params, phi, grid, tgrid, steps).sample(seed, replica)


def frac_deriv_of_ito(
    h: np.ndarray, nu: float, noise: NoisePath, *, dt: float | None = None
) -> np.ndarray:
    """d_t^nu sum_k int_0^t h^k dw^k = (1/Gamma(1-nu)) sum_k int (t-s)^-nu h^k(s) dw^k_s.

    ``h`` has shape (n, K, *trailing), left-point values per cell. Returns the
    path at all n + 1 nodes.
    """
    if nu >= 0.5:
        raise ParameterWindowError("nu < 1/2", f"nu={nu}: (t-s)^(-2 nu) is not integrable")
    h = np.asarray(h, dtype=float)
    n = h.shape[0]
    step = noise.dt if dt is None else dt
    if h.shape[:2] != (n, noise.modes) or noise.n_steps != n:
        raise ValueError("coefficients do not match the noise path")
    weights = np.sqrt(power_cell_integrals(-2.0 * nu, step, n) / step) / special.gamma(1.0 - nu)
    driven = np.einsum("nk...,nk->n...", h, noise.increments)
    weights = weights[(...,) + (None,) * (driven.ndim - 1)]
    return causal_sum(weights, driven).real


def ito_fractional_variance(h: np.ndarray, nu: float, tgrid: TimeGrid) -> np.ndarray:
    """E |d_t^nu int h dw|^2 at the nodes for deterministic h of shape (n, K)."""
    n = tgrid.n_steps
    weights = power_cell_integrals(-2.0 * nu, tgrid.h, n) / special.gamma(1.0 - nu) ** 2
    return causal_sum(weights, np.sum(np.asarray(h) ** 2, axis=1)).real


def verify_ito_fractional_bound(
    h_fn: Callable[[np.ndarray], np.ndarray],
    nu: float,
    tgrid: TimeGrid,
    *,
    threshold: float = 0.10,
) -> EstimateReport:
    """E int_0^t |d^nu int h dw|^2 dr / I_t^(1-2nu) |h|^2 on n and 2n steps."""
    if nu >= 0.5:
        raise ParameterWindowError("nu < 1/2", f"nu={nu}")

    def ratios(grid: TimeGrid) -> np.ndarray:
        h = np.atleast_2d(np.asarray(h_fn(grid.nodes[:-1]), dtype=float).T).T
        variance = ito_fractional_variance(h, nu, grid)
        lhs = integrate.cumulative_trapezoid(variance, grid.nodes, initial=0.0)
        squared = np.sum(np.asarray(h_fn(grid.nodes), dtype=float).reshape(len(grid.nodes), -1)
                         ** 2, axis=1)
        rhs = rl_integral(SampledPath(grid, squared), 1.0 - 2.0 * nu).values
        return lhs[1:] / rhs[1:]

    return ratio_report(
        "E int_0^t |d^nu int h dw|^2 <= C I_t^(1-2nu) |h|^2",
        ratios(tgrid),
        ratios(tgrid.refined()),
        threshold=threshold,
        parameters={"nu": nu, "n_steps": tgrid.n_steps},
    )


def deterministic_response(
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    *,
    u0: np.ndarray | None = None,
    drift: np.ndarray | None = None,
) -> np.ndarray:
    """Solution of d_t^alpha u = phi(Delta) u + f, u(0) = u0, at all nodes.

    ``drift`` holds f at the left ends of the cells, shape (n, *grid.shape).
    """
    n = tgrid.n_steps
    lam = grid.phi_table(phi)
    out = np.zeros((n + 1,) + grid.shape, dtype=complex)
    if u0 is not None:
        relax = ml_table(params.alpha, 1.0)
        t_alpha = tgrid.nodes[(...,) + (None,) * grid.dim] ** params.alpha
        out += np.asarray(relax(t_alpha * lam[None])) * _fft(grid, np.asarray(u0))[None]
    if drift is not None:
        lams, index = np.unique(lam, return_inverse=True)
        table = ml_table(params.alpha, params.alpha)
        cells = singular_cell_integrals(
            lambda tau: np.asarray(table(tau[:, None] ** params.alpha * lams[None, :])),
            params.alpha - 1.0, tgrid.h, n,
        )
        weights = cells[:, index.reshape(grid.shape)]
        out += causal_sum(weights, _fft(grid, np.asarray(drift)[:n]))
    return _ifft(grid, out)


@dataclass
class PicardResult:
    iterates: list[np.ndarray] = field(repr=False)
    differences: list[float]

    @property
    def contraction_ratios(self) -> np.ndarray:
        d = np.asarray(self.differences)
        with np.errstate(divide="ignore", invalid="ignore"):
            return d[1:] / d[:-1]


def _space_time_norm(values: np.ndarray, grid: SpectralGrid, tgrid: TimeGrid) -> float:
    return math.sqrt(tgrid.h * float(np.sum(grid.integrate(values**2))))


def picard_solve(
    forcing: ForcingSpec,
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    noise: NoisePath,
    *,
    u0: np.ndarray | None = None,
    n_iter: int = 10,
) -> PicardResult:
    """Picard iteration u^(n+1) = linear solve with f(u^n), g(u^n) frozen.

    Differences are space-time L2 norms; iteration stops early once a
    difference falls below 1e-12 of ||u^0||.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    cells = kernel_cells(params, grid.phi_table(phi), tgrid.h, tgrid.n_steps)
    nodes = tgrid.nodes

    def linear(state: np.ndarray | None) -> np.ndarray:
        drift = forcing.drift_values(nodes[:-1], None if state is None else state[:-1])
        base = deterministic_response(params, phi, grid, tgrid, u0=u0, drift=drift)
        frozen = np.zeros_like(base) if state is None else state
        noisy = convolve_euler(forcing, params, phi, grid, tgrid, noise, state=frozen,
                               cells=cells)
        return base + noisy.values

    current = linear(None)
    iterates = [current]
    differences: list[float] = []
    scale = _space_time_norm(current, grid, tgrid)
    growth = 0
    for it in range(n_iter):
        nxt = linear(current)
        diff = _space_time_norm(nxt - current, grid, tgrid)
        logger.debug("picard iterate %d: difference %.3e", it + 1, diff)
        if differences and diff > differences[-1]:
            growth += 1
            if growth >= GROWTH_LIMIT:
                raise PicardDivergenceError(
                    f"Picard differences grew on {GROWTH_LIMIT} consecutive iterates "
                    f"(last {diff:.3e}); drift Lipschitz {forcing.drift_lipschitz:g}, "
                    f"noise Lipschitz {forcing.noise_lipschitz:g}"
                )
        else:
            growth = 0
        differences.append(diff)
        iterates.append(nxt)
        current = nxt
        if diff <= PICARD_TOLERANCE * max(scale, 1e-300):
            break
    return PicardResult(iterates, differences)


def white_noise_window(
    params: FracParams, delta0: float, d: int, *, fraction: float = 0.5, margin: float = 0.05
) -> WhiteNoiseWindow:
    """Check the white-noise admissibility window and pick (k0, s, gamma) inside it."""
    if delta0 <= 0.25:
        raise ParameterWindowError("delta0 > 1/4", f"delta0={delta0}")
    beta_max = (1.0 - 1.0 / (4.0 * delta0)) * params.alpha + 0.5
    if params.beta >= beta_max:
        raise ParameterWindowError(
            "beta < (1 - 1/(4 delta0)) alpha + 1/2",
            f"beta={params.beta} >= {beta_max:.6g}",
        )
    d0 = params.d0(delta0)
    if d >= d0:
        raise ParameterWindowError("d < d0", f"d={d}, d0={d0:.6g}")
    lo = d / (2.0 * delta0)
    hi = min(params.c1, d / delta0)
    k0 = lo + fraction * (hi - lo)
    s = 1.1 * d / (2.0 * k0 * delta0 - d)
    gamma = 2.0 - k0 - params.c0 - margin
    return WhiteNoiseWindow(d0=d0, k0=k0, s=s, gamma=gamma)


def white_noise_forcing(
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    count: int,
    *,
    h: FieldMap | None = None,
    lipschitz: float = 0.0,
) -> ForcingSpec:
    """g^k = h(u) eta^k over the first ``count`` orthonormal trigonometric modes."""
    window = white_noise_window(params, phi.delta0, grid.dim)
    basis = trig_basis(grid, count)
    logger.debug("white noise window: %s", window)
    return ForcingSpec(
        profiles=basis.functions,
        noise_map=h,
        noise_lipschitz=lipschitz,
        mode_xi_sq=basis.xi_sq if h is None else None,
        window=window,
    )


def expected_sobolev_energy(
    forcing: ForcingSpec,
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    gamma: float,
) -> float:
    """E ||u(T)||^2 in H^(phi,gamma) for deterministic coefficients."""
    variance = stochastic_variance(forcing, params, phi, grid, tgrid)
    weight = (1.0 + grid.phi_table(phi)) ** gamma
    return float(expected_l2_energy(variance[-1], grid, weight))


def verify_whitenoise_truncation(
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    count: int,
    *,
    tolerance: float = 0.05,
) -> EstimateReport:
    """Relative change of E ||u(T)||^2_{H^(phi,gamma)} from K to 2K modes."""
    small = white_noise_forcing(params, phi, grid, count)
    assert small.window is not None
    gamma = small.window.gamma
    large = white_noise_forcing(params, phi, grid, 2 * count)
    e_small = expected_sobolev_energy(small, params, phi, grid, tgrid, gamma)
    e_large = expected_sobolev_energy(large, params, phi, grid, tgrid, gamma)
    return tolerance_report(
        "E||u||^2_{H^(phi,gamma)} stable under K -> 2K",
        [abs(e_large - e_small) / e_large],
        tolerance,
        parameters={"alpha": params.alpha, "beta": params.beta, "phi": phi.name,
                    "K": count, "gamma": gamma, "k0": small.window.k0},
    )


def verify_solution_space_estimate(
    forcing: ForcingSpec,
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    *,
    threshold: float = 0.10,
) -> EstimateReport:
    """E ||u||^2_{L2(0,t)} <= C int_0^t (t-s)^(theta-1) (||f||^2 + ||g||^2) ds at p = 2."""
    theta = params.theta

    def ratios(tg: TimeGrid) -> np.ndarray:
        nodes = tg.nodes
        variance = expected_l2_energy(stochastic_variance(forcing, params, phi, grid, tg), grid)
        drift = forcing.drift_values(nodes[:-1])
        energy = variance
        f_norm = np.zeros(len(nodes))
        if drift is not None:
            det = deterministic_response(params, phi, grid, tg, drift=drift)
            energy = energy + grid.integrate(det**2)
            f_full = forcing.drift_values(nodes)
            assert f_full is not None
            f_norm = grid.integrate(f_full**2)
        g_norm = np.sum(grid.integrate(forcing.coefficients(nodes) ** 2), axis=1)
        lhs = integrate.cumulative_trapezoid(energy, nodes, initial=0.0)
        rhs = special.gamma(theta) * rl_integral(SampledPath(tg, f_norm + g_norm), theta).values
        return lhs[1:] / rhs[1:]

    return ratio_report(
        "E||u||^2_{L2(t)} <= C int_0^t (t-s)^(theta-1) (||f||^2 + ||g||^2) ds",
        ratios(tgrid),
        ratios(tgrid.refined()),
        threshold=threshold,
        parameters={"alpha": params.alpha, "beta": params.beta, "theta": theta,
                    "phi": phi.name},
    )
