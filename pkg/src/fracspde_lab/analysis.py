"""Discrete maximal and sharp functions and the regularity estimate harness.

Space-time fields are arrays of shape (n_t, N): axis 0 is time on the nodes
of a TimeGrid, axis 1 space on a periodic d = 1 lattice.

Space balls are odd periodic windows of half-width r in {0, 1, 2, 4, ...};
time intervals are windows of 2^j consecutive nodes inside [0, T]. Dyadic
families are comparable to the full families up to a factor 2 in the radius.
Parabolic cubes use the anisotropic time extent kappa(b) = phi(b^-2)^(-1/alpha).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import integrate, special

from fracspde_lab.bernstein import BernsteinSpec, kappa_scale
from fracspde_lab.errors import ParameterWindowError
from fracspde_lab.fraccalc import TimeGrid, singular_cell_integrals
from fracspde_lab.kernel_engine import FracParams
from fracspde_lab.lattice import MultiplierKind, SpectralGrid, apply_multiplier
from fracspde_lab.reports import EstimateReport, ratio_report, tolerance_report
from fracspde_lab.spde_sim import (
    ForcingSpec,
    causal_sum,
    kernel_cells,
    modal_coefficients,
    noise_batch,
)
from fracspde_lab.special_fn import ml_table

logger = logging.getLogger(__name__)


def _space_radii(n: int) -> list[int]:
    radii = [0]
    r = 1
    while 2 * r + 1 <= n:
        radii.append(r)
        r *= 2
    return radii


def _time_lengths(n: int) -> list[int]:
    lengths = []
    length = 1
    while length <= n:
        lengths.append(length)
        length *= 2
    return lengths


def _periodic_windows(values: np.ndarray, r: int) -> np.ndarray:
    """Windows [c - r, c + r] of the last axis, one per center c (wrapping)."""
    padded = np.concatenate([values[..., -r:], values, values[..., :r]], axis=-1) if r else values
    return sliding_window_view(padded, 2 * r + 1, axis=-1)


def _spread_periodic(values: np.ndarray, r: int) -> np.ndarray:
    """out[x] = max over centers c with |c - x| <= r of values[c]."""
    return _periodic_windows(values, r).max(axis=-1) if r else values


def _spread_ending(values: np.ndarray, length: int) -> np.ndarray:
    """out[i] = max over window ends e in [i, i + length - 1] of values[e] (axis 0).

    ``values[e]`` is -inf where no window ends at e.
    """
    if length == 1:
        return values
    tail = np.full((length - 1,) + values.shape[1:], -np.inf)
    return sliding_window_view(np.concatenate([values, tail]), length, axis=0).max(axis=-1)


def _window_means_ending(values: np.ndarray, length: int) -> np.ndarray:
    """Mean over nodes [e - length + 1, e] stored at e; -inf where e < length - 1."""
    means = sliding_window_view(values, length, axis=0).mean(axis=-1)
    head = np.full((length - 1,) + values.shape[1:], -np.inf)
    return np.concatenate([head, means])


def maximal_function(h: np.ndarray, axis: str = "space") -> np.ndarray:
    """Dyadic maximal function of |h| along ``axis`` ("space": last, "time": first)."""
    values = np.abs(np.asarray(h, dtype=float))
    if axis == "space":
        out = np.zeros_like(values)
        for r in _space_radii(values.shape[-1]):
            means = _periodic_windows(values, r).mean(axis=-1)
            out = np.maximum(out, _spread_periodic(means, r))
        return out
    if axis == "time":
        out = np.zeros_like(values)
        for length in _time_lengths(values.shape[0]):
            out = np.maximum(out, _spread_ending(_window_means_ending(values, length), length))
        return out
    raise ValueError(f"axis must be 'space' or 'time', got {axis!r}")


def brute_force_maximal(h: np.ndarray, axis: str = "space") -> np.ndarray:
    """Enumerate every dyadic ball (or interval) and update the points it contains."""
    values = np.abs(np.asarray(h, dtype=float))
    out = np.zeros_like(values)
    if axis == "space":
        n = values.shape[-1]
        for r in _space_radii(n):
            for c in range(n):
                cells = [(c + j) % n for j in range(-r, r + 1)]
                mean = values[..., cells].mean(axis=-1)
                for x in cells:
                    out[..., x] = np.maximum(out[..., x], mean)
        return out
    if axis == "time":
        n = values.shape[0]
        for length in _time_lengths(n):
            for start in range(n - length + 1):
                mean = values[start : start + length].mean(axis=0)
                for i in range(start, start + length):
                    out[i] = np.maximum(out[i], mean)
        return out
    raise ValueError(f"axis must be 'space' or 'time', got {axis!r}")


@dataclass(frozen=True)
class CubeLevel:
    """One radius of the cube family: b, kappa(b) and their lattice extents."""

    b: float
    kappa: float
    time_nodes: int
    half_width: int


@dataclass(frozen=True)
class ParabolicCube:
    """Q_b(s, y) = (s - kappa(b), s] x B_b(y) on the lattice, by node indices."""

    level: CubeLevel
    end: int
    center: int

    def time_indices(self) -> range:
        return range(self.end - self.level.time_nodes + 1, self.end + 1)

    def space_indices(self, n: int) -> list[int]:
        r = self.level.half_width
        return [(self.center + j) % n for j in range(-r, r + 1)]


def dyadic_radii(b_min: float, levels: int) -> list[float]:
    return [b_min * 2.0**j for j in range(levels)]


def cube_family(
    phi: BernsteinSpec,
    alpha: float,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    radii: Sequence[float],
) -> list[CubeLevel]:
    """Resolvable cube levels for physical radii ``radii``.

    kappa(b) is snapped up to whole time cells; levels spanning fewer than two
    cells in either direction, or larger than the grid, are dropped.
    """
    if grid.dim != 1:
        raise ValueError("parabolic cubes are implemented for d = 1")
    n_nodes = tgrid.n_steps + 1
    out = []
    for b in radii:
        kappa = kappa_scale(phi, alpha, b)
        nodes = math.ceil(kappa / tgrid.h - 1e-9) + 1
        half = round(b / grid.spacing)
        if nodes < 3 or half < 1 or nodes > n_nodes or 2 * half + 1 > grid.points:
            logger.debug("dropping cube level b=%g: %d time nodes, half-width %d", b, nodes, half)
            continue
        out.append(CubeLevel(b=b, kappa=kappa, time_nodes=nodes, half_width=half))
    return out


def _cube_statistic(
    values: np.ndarray, level: CubeLevel, statistic: str
) -> np.ndarray:
    """Per-cube mean |v| or mean oscillation at (end, center); -inf where no cube ends."""
    m, r = level.time_nodes, level.half_width
    blocks = sliding_window_view(_periodic_windows(values, r), m, axis=0)
    # blocks: (E, N, 2r+1, m)
    if statistic == "mean":
        stat = np.abs(blocks).mean(axis=(-2, -1))
    else:
        centered = blocks - blocks.mean(axis=(-2, -1), keepdims=True)
        stat = np.abs(centered).mean(axis=(-2, -1))
    head = np.full((m - 1,) + values.shape[1:], -np.inf)
    return np.concatenate([head, stat])


def _cube_sup(values: np.ndarray, levels: Sequence[CubeLevel], statistic: str) -> np.ndarray:
    out = np.zeros_like(values, dtype=float)
    for level in levels:
        stat = _cube_statistic(values, level, statistic)
        spread = _spread_ending(_spread_periodic(stat, level.half_width), level.time_nodes)
        out = np.maximum(out, spread)
    return out


def sharp_function(v: np.ndarray, levels: Sequence[CubeLevel]) -> np.ndarray:
    """v^#(t, x): sup over cubes containing (t, x) of the mean of |v - v_Q| over Q."""
    return _cube_sup(np.asarray(v, dtype=float), levels, "oscillation")


def cube_maximal_function(h: np.ndarray, levels: Sequence[CubeLevel]) -> np.ndarray:
    """sup over cubes containing (t, x) of the mean of |h| over Q."""
    return _cube_sup(np.asarray(h, dtype=float), levels, "mean")


def brute_force_sharp(v: np.ndarray, levels: Sequence[CubeLevel]) -> np.ndarray:
    values = np.asarray(v, dtype=float)
    n_t, n = values.shape
    out = np.zeros_like(values)
    for level in levels:
        for end in range(level.time_nodes - 1, n_t):
            for center in range(n):
                cube = ParabolicCube(level, end, center)
                rows = list(cube.time_indices())
                cols = cube.space_indices(n)
                block = values[np.ix_(rows, cols)]
                osc = float(np.mean(np.abs(block - block.mean())))
                sub = out[np.ix_(rows, cols)]
                out[np.ix_(rows, cols)] = np.maximum(sub, osc)
    return out


def smoothing_field(
    forcing: ForcingSpec,
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
) -> np.ndarray:
    """v(t,x) = (int_0^t sum_k |phi(Delta)^(c1/2) T_(t-s) g^k(s)|^2 ds)^(1/2) at the nodes.

    T_tau has symbol tau^(alpha-beta) E_{alpha,1-beta+alpha}(-tau^alpha lam).
    """
    if not forcing.is_deterministic:
        raise ValueError("the smoothing field needs deterministic coefficients")
    lam = grid.phi_table(phi)
    lifted = lam ** (params.c1 / 2.0)
    table = ml_table(params.alpha, params.ml_beta)
    exponent = 2.0 * (params.alpha - params.beta)
    spectra = np.fft.fft(forcing.profiles, axis=-1)
    amp2 = forcing.amplitudes(tgrid.nodes[:-1]) ** 2
    total = np.zeros((tgrid.n_steps + 1, grid.points))
    for k in range(forcing.modes):
        base = lifted * spectra[k]

        def squared(tau: np.ndarray, base: np.ndarray = base) -> np.ndarray:
            symbol = np.asarray(table(tau[:, None] ** params.alpha * lam[None, :]))
            return np.abs(np.fft.ifft(symbol * base[None, :], axis=-1)) ** 2

        cells = singular_cell_integrals(squared, exponent, tgrid.h, tgrid.n_steps)
        total += causal_sum(cells, amp2[:, k][:, None]).real
    return np.sqrt(np.clip(total, 0.0, None))


def _sharp_ratio(
    forcing_for: Callable[[SpectralGrid], ForcingSpec],
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    radii: Sequence[float],
) -> np.ndarray:
    forcing = forcing_for(grid)
    levels = cube_family(phi, params.alpha, grid, tgrid, radii)
    v = smoothing_field(forcing, params, phi, grid, tgrid)
    sharp = sharp_function(v, levels)
    g2 = np.sum(forcing.coefficients(tgrid.nodes) ** 2, axis=1)
    denominator = np.sqrt(maximal_function(maximal_function(g2, "space"), "time"))
    ratio = np.zeros_like(sharp)
    np.divide(sharp, denominator, out=ratio, where=denominator > 0)
    ratio[(denominator == 0) & (sharp > 0)] = np.inf
    return ratio


def verify_sharp_maximal(
    forcing_for: Callable[[SpectralGrid], ForcingSpec],
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    *,
    b_min: float | None = None,
    levels: int = 6,
    threshold: float = 0.10,
) -> EstimateReport:
    """sup v^# / (M_t M_x |g|^2)^(1/2) on the grid and on its refinement in x and t.

    ``forcing_for`` builds the same physical forcing on any lattice. The
    refined run reuses the physical cube radii resolvable on the base grid.
    """
    if not 0.5 < params.beta < params.alpha + 0.5:
        raise ParameterWindowError(
            "1/2 < beta < alpha + 1/2", f"alpha={params.alpha}, beta={params.beta}"
        )
    b_min = 2.0 * grid.spacing if b_min is None else b_min
    kept = cube_family(phi, params.alpha, grid, tgrid, dyadic_radii(b_min, levels))
    if not kept:
        raise ValueError("no cube level is resolvable on this grid")
    radii = [level.b for level in kept]
    coarse = _sharp_ratio(forcing_for, params, phi, grid, tgrid, radii)
    fine = _sharp_ratio(forcing_for, params, phi, grid.refined(), tgrid.refined(), radii)
    return ratio_report(
        "(T g)^# <= C (M_t M_x |g|^2)^(1/2)",
        coarse,
        fine,
        threshold=threshold,
        parameters={"alpha": params.alpha, "beta": params.beta, "phi": phi.name,
                    "levels": len(radii)},
        notes=[f"cube radii {', '.join(f'{b:.3g}' for b in radii)}"],
    )


def verify_translation_invariance(
    forcing_for: Callable[[SpectralGrid], ForcingSpec],
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    *,
    shift: int | None = None,
    b_min: float | None = None,
    levels: int = 6,
    tolerance: float = 1e-9,
) -> EstimateReport:
    """Ratio field of the forcing moved by ``shift`` cells against the rolled ratio field."""
    shift = grid.points // 4 if shift is None else shift
    b_min = 2.0 * grid.spacing if b_min is None else b_min
    radii = [level.b for level in
             cube_family(phi, params.alpha, grid, tgrid, dyadic_radii(b_min, levels))]
    if not radii:
        raise ValueError("no cube level is resolvable on this grid")
    expected = np.roll(_sharp_ratio(forcing_for, params, phi, grid, tgrid, radii), shift, axis=-1)
    moved = _sharp_ratio(lambda g: forcing_for(g).shifted(shift), params, phi, grid, tgrid, radii)
    finite = expected[np.isfinite(expected)]
    scale = max(float(np.max(np.abs(finite), initial=0.0)), 1e-300)
    with np.errstate(invalid="ignore"):
        errors = np.where(moved == expected, 0.0, np.abs(moved - expected) / scale)
    return tolerance_report(
        "(T g(. - x0))^# / (M_t M_x |g|^2)^(1/2) = shifted ratio field",
        errors,
        tolerance,
        parameters={"alpha": params.alpha, "beta": params.beta, "phi": phi.name,
                    "shift": shift},
    )


def regularity_multiplier(params: FracParams) -> tuple[MultiplierKind, float]:
    """phi(Delta)^(c1/2) for beta > 1/2, (1 - phi(Delta))^((2 - c0)/2) otherwise."""
    if params.beta > 0.5:
        return MultiplierKind.PHI_POWER, params.c1
    return MultiplierKind.BESSEL_PHI_POWER, 2.0 - params.c0


def multiplier_label(kind: MultiplierKind, order: float) -> str:
    if kind is MultiplierKind.PHI_POWER:
        return f"phi(Delta)^({order:g}/2)"
    return f"(1-phi(Delta))^({order:g}/2)"


@dataclass(frozen=True)
class AprioriMoments:
    """Exact and Monte Carlo p-th moments at every node, plus the forcing side."""

    exact: np.ndarray
    mc_mean: np.ndarray
    mc_stderr: np.ndarray
    forcing: np.ndarray


def apriori_moments(
    forcing: ForcingSpec,
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    p: int,
    n_samples: int,
    seed: int,
    *,
    threads: int | None = None,
) -> AprioriMoments:
    """E ||L u(t_n)||_p^p exactly (Gaussian moments) and by Euler Monte Carlo.

    ``n_samples = 0`` skips the Monte Carlo part (its fields are NaN).
    """
    if p < 2 or p % 2:
        raise ValueError(f"p must be an even integer >= 2, got {p}")
    if n_samples and n_samples < 10 * p * p:
        raise ValueError(f"n_samples={n_samples} is too small for p={p} (need >= {10 * p * p})")
    if forcing.mode_xi_sq is None:
        raise ValueError("a priori moments need eigenfunction (trigonometric) forcing")
    kind, order = regularity_multiplier(params)
    lam_k = phi.symbol(forcing.mode_xi_sq)
    if kind is MultiplierKind.PHI_POWER:
        mult = np.where(lam_k > 0, lam_k ** (order / 2.0), 0.0)
    else:
        mult = (1.0 + lam_k) ** (order / 2.0)

    cells = kernel_cells(params, lam_k, tgrid.h, tgrid.n_steps)
    second = cells.on_lattice(cells.second)
    amp2 = forcing.amplitudes(tgrid.nodes[:-1]) ** 2
    variances = causal_sum(second, amp2).real  # (n+1, K)
    profiles = forcing.profiles
    sigma2 = np.einsum("nk,k,kx->nx", variances, mult**2, profiles**2)
    double_factorial = float(special.factorial2(p - 1))
    exact = double_factorial * grid.integrate(sigma2 ** (p // 2))

    g_abs = np.sqrt(np.sum(forcing.coefficients(tgrid.nodes) ** 2, axis=1))
    mc_mean = np.full_like(exact, np.nan)
    mc_stderr = np.full_like(exact, np.nan)
    if n_samples:
        increments = noise_batch(seed, forcing.modes, tgrid.n_steps, tgrid.h,
                                 range(n_samples), threads)
        coeff = modal_coefficients(forcing, params, phi, tgrid, increments)
        fields = np.einsum("rnk,k,kx->rnx", coeff, mult, profiles)
        norms = grid.integrate(np.abs(fields) ** p)
        mc_mean = norms.mean(axis=0)
        mc_stderr = norms.std(axis=0, ddof=1) / math.sqrt(n_samples)
    return AprioriMoments(
        exact=exact,
        mc_mean=mc_mean,
        mc_stderr=mc_stderr,
        forcing=grid.integrate(g_abs**p),
    )


def _time_integrated_ratio(moments: AprioriMoments, tgrid: TimeGrid) -> np.ndarray:
    lhs = integrate.cumulative_trapezoid(moments.exact, tgrid.nodes, initial=0.0)[1:]
    rhs = integrate.cumulative_trapezoid(moments.forcing, tgrid.nodes, initial=0.0)[1:]
    ratio = np.zeros_like(lhs)
    np.divide(lhs, rhs, out=ratio, where=rhs > 0)
    return ratio


def verify_apriori_lp(
    forcing_for: Callable[[SpectralGrid], ForcingSpec],
    params: FracParams,
    phi: BernsteinSpec,
    grid: SpectralGrid,
    tgrid: TimeGrid,
    p: int,
    n_samples: int,
    seed: int,
    *,
    threshold: float = 0.10,
    standard_errors: float = 3.0,
    threads: int | None = None,
) -> list[EstimateReport]:
    """Monte Carlo against exact moments at t = T, and the a priori ratio under N -> 2N.

    The ratio is E int_0^t ||L u||_p^p / int_0^t ||g||_p^p over the nodes t > 0.
    """
    forcing = forcing_for(grid)
    moments = apriori_moments(forcing, params, phi, grid, tgrid, p, n_samples, seed,
                              threads=threads)
    refined_grid = grid.refined()
    refined = apriori_moments(forcing_for(refined_grid), params, phi, refined_grid, tgrid, p,
                              0, seed)
    kind, order = regularity_multiplier(params)
    parameters = {"alpha": params.alpha, "beta": params.beta, "phi": phi.name, "p": p,
                  "operator": kind.value, "order": order, "n_samples": n_samples}
    stderr = moments.mc_stderr[-1]
    gap = abs(moments.mc_mean[-1] - moments.exact[-1])
    z = 0.0 if gap == 0.0 else gap / stderr
    label = multiplier_label(kind, order)
    return [
        tolerance_report(
            f"E||{label} u(T)||_p^p: Monte Carlo within {standard_errors:g} SE of exact",
            [z],
            standard_errors,
            parameters=parameters,
            notes=[f"exact={moments.exact[-1]:.6g}, mc={moments.mc_mean[-1]:.6g} +- {stderr:.3g}"],
        ),
        ratio_report(
            f"E||{label} u||_p^p <= C E||g||_p^p",
            _time_integrated_ratio(moments, tgrid),
            _time_integrated_ratio(refined, tgrid),
            threshold=threshold,
            parameters=parameters,
        ),
    ]


def sobolev_phi_norm(
    u: np.ndarray, grid: SpectralGrid, phi: BernsteinSpec, gamma: float, p: float = 2.0
) -> float:
    """||(1 - phi(Delta))^(gamma/2) u||_{L_p}."""
    lifted = apply_multiplier(u, grid, phi, MultiplierKind.BESSEL_PHI_POWER, gamma)
    return float(grid.lp_norm(lifted, p))


def sobolev_equivalence_ratio(
    u: np.ndarray, grid: SpectralGrid, phi: BernsteinSpec, gamma: float, p: float = 2.0
) -> float:
    """||u||_{H^(phi,gamma)_p} / (||u||_p + ||phi(Delta)^(gamma/2) u||_p), gamma >= 0."""
    if gamma < 0:
        raise ValueError("the equivalence is stated for gamma >= 0")
    top = sobolev_phi_norm(u, grid, phi, gamma, p)
    homogeneous = apply_multiplier(u, grid, phi, MultiplierKind.PHI_POWER, gamma)
    bottom = float(grid.lp_norm(u, p)) + float(grid.lp_norm(homogeneous, p))
    return top / bottom


def interpolation_check(
    u: np.ndarray,
    grid: SpectralGrid,
    phi: BernsteinSpec,
    nu1: float,
    nu2: float,
    nu3: float,
    eps: float,
    p: float = 2.0,
) -> float:
    """Smallest N(eps) with ||u||_nu2 <= eps ||u||_nu3 + N(eps) ||u||_nu1 on ``u``."""
    if not nu1 < nu2 < nu3:
        raise ValueError("need nu1 < nu2 < nu3")
    n1, n2, n3 = (sobolev_phi_norm(u, grid, phi, nu, p) for nu in (nu1, nu2, nu3))
    return max(0.0, (n2 - eps * n3) / n1)
