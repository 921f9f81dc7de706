"""Registry of verification suites, grouped by CLI subcommand.

A suite turns an ExperimentConfig into a list of EstimateReports and may
attach CSV artifacts to the run context; the CLI writes them afterwards.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any

import numpy as np
from scipy import special

from fracspde_lab.analysis import (
    CubeLevel,
    brute_force_maximal,
    brute_force_sharp,
    interpolation_check,
    maximal_function,
    sharp_function,
    sobolev_equivalence_ratio,
    verify_apriori_lp,
    verify_sharp_maximal,
    verify_translation_invariance,
)
from fracspde_lab.bernstein import (
    BernsteinName,
    BernsteinSpec,
    catalog,
    verify_derivative_bound,
    verify_phi_integral,
    verify_scaling,
)
from fracspde_lab.config import ExperimentConfig, ToleranceConfig
from fracspde_lab.fraccalc import SampledPath, TimeGrid, rl_integral, verify_lp_boundedness
from fracspde_lab.kernel_engine import (
    FracParams,
    KernelSweep,
    Route,
    build_kernel_table,
    mass_identity_grid,
    p_lebesgue_bound,
    r_window_holds,
    transition_density_p,
    verify_kernel_bounds,
    verify_lattice_mass,
    verify_mass_identity,
    verify_mass_sweep,
    verify_R_integrability,
    verify_route_agreement,
    verify_symbol_round_trip,
)
from fracspde_lab.lattice import SpectralGrid
from fracspde_lab.reports import EstimateReport, ratio_report, tolerance_report
from fracspde_lab.spde_sim import (
    ForcingSpec,
    NoisePath,
    bump_forcing,
    convolve_euler,
    convolve_exact_gaussian,
    expected_l2_energy,
    gaussian_law,
    kernel_cells,
    modal_forcing,
    picard_solve,
    stochastic_variance,
    verify_ito_fractional_bound,
    verify_solution_space_estimate,
    verify_whitenoise_truncation,
    white_noise_window,
)
from fracspde_lab.special_fn import (
    chi_square_check,
    inverse_subordinator_density,
    sample_inverse_subordinator,
    sample_stable,
    stable_cdf,
    verify_ml_decay,
)
from fracspde_lab.workers import ordered_map

logger = logging.getLogger(__name__)

SUBCOMMANDS = (
    "kernel-table",
    "verify-bounds",
    "simulate",
    "regularity-report",
    "sharp-report",
    "picard",
    "whitenoise",
)

FRACCALC_STEPS = 4096
FRACCALC_TOLERANCE = 1e-6
DENSITY_ATOL = 1e-15
CHI_SQUARE_LEVEL = 0.01
PICARD_LIPSCHITZ = 0.1
PICARD_RATIO = 0.5
ITO_ORDERS = (0.1, 0.3, 0.45)
MASS_ALPHAS = (0.5, 0.9)
MASS_TIMES = (0.1, 1.0, 10.0)


@dataclass
class Artifact:
    name: str
    columns: list[str]
    rows: list[Sequence[Any]] = field(repr=False)


@dataclass
class RunContext:
    """Objects derived from one config, built lazily, plus collected artifacts."""

    config: ExperimentConfig
    artifacts: list[Artifact] = field(default_factory=list)

    @property
    def seed(self) -> int:
        return self.config.noise.seed

    @property
    def threads(self) -> int:
        return self.config.threads

    @property
    def tolerances(self) -> ToleranceConfig:
        return self.config.tolerances

    @cached_property
    def phi(self) -> BernsteinSpec:
        return self.config.bernstein.build()

    @cached_property
    def params(self) -> FracParams:
        p = self.config.frac_params
        return FracParams(p.alpha, p.beta, p.gamma, p.kappa)

    @cached_property
    def grid(self) -> SpectralGrid:
        g = self.config.grid
        return SpectralGrid(g.dim, g.box_length, g.points)

    @cached_property
    def tgrid(self) -> TimeGrid:
        return TimeGrid(self.config.grid.t_end, self.config.grid.n_steps)

    def add_artifact(
        self, name: str, columns: Sequence[str], rows: Iterable[Sequence[Any]]
    ) -> None:
        self.artifacts.append(Artifact(name, list(columns), list(rows)))


Runner = Callable[[RunContext], list[EstimateReport]]


@dataclass(frozen=True)
class Suite:
    name: str
    subcommand: str
    description: str
    runner: Runner = field(repr=False)


def _first_axis(grid: SpectralGrid) -> np.ndarray:
    """Coordinate of the first axis broadcast to the grid shape."""
    return np.meshgrid(*([grid.coords] * grid.dim), indexing="ij")[0]


# kernel-table


def _kernel_table(ctx: RunContext) -> list[EstimateReport]:
    sweep = ctx.config.sweep
    times = np.geomspace(sweep.t_min, sweep.t_max, sweep.points_t)
    xs = np.geomspace(sweep.x_min, sweep.x_max, sweep.points_x)
    table = build_kernel_table(ctx.params, ctx.phi, times, xs, route=Route.FOURIER,
                               threads=ctx.threads)
    ctx.add_artifact("kernel_table.csv", table.columns(), table.rows())
    return [
        ratio_report(
            "q^gamma_{alpha,beta}(t,x) finite on the table",
            table.values.ravel(),
            parameters={"phi": ctx.phi.name, "alpha": ctx.params.alpha,
                        "beta": ctx.params.beta, "gamma": ctx.params.gamma},
        )
    ]


def _mass_identity(ctx: RunContext) -> list[EstimateReport]:
    rtol = ctx.tolerances.mass_rtol
    reference = (catalog(BernsteinName.STABLE, {"beta": 1.0}),
                 catalog(BernsteinName.STABLE, {"beta": 0.5}))
    return [
        verify_mass_sweep(reference, mass_identity_grid(MASS_ALPHAS), MASS_TIMES, rtol=rtol,
                          threads=ctx.threads),
        verify_mass_identity(ctx.params, ctx.phi, MASS_TIMES, rtol=rtol, threads=ctx.threads),
        verify_lattice_mass(ctx.params, ctx.phi, ctx.grid, MASS_TIMES),
        verify_symbol_round_trip(ctx.params, ctx.phi, ctx.grid, 1.0),
    ]


def _route_agreement(ctx: RunContext) -> list[EstimateReport]:
    return [
        verify_route_agreement(ctx.params.alpha, ctx.phi, (0.5, 1.0), (0.0, 0.5, 1.0, 2.0),
                               rtol=ctx.tolerances.route_rtol, threads=ctx.threads)
    ]


def gaussian_density(t: float, x: np.ndarray) -> np.ndarray:
    return np.exp(-(x**2) / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)


def cauchy_density(t: float, x: np.ndarray) -> np.ndarray:
    return t / (math.pi * (t**2 + x**2))


def _transition_density(ctx: RunContext) -> list[EstimateReport]:
    """Radial quadrature of p against the heat and Cauchy kernels (d = 1)."""
    cases = (
        (catalog(BernsteinName.STABLE, {"beta": 1.0}), gaussian_density, 1e-6, "Gaussian"),
        (catalog(BernsteinName.STABLE, {"beta": 0.5}), cauchy_density, 1e-5, "Cauchy"),
    )
    xs = np.linspace(0.0, 10.0, 21)
    reports = []
    for phi, exact_fn, rtol, label in cases:
        errors = []
        for t in (0.5, 1.0, 2.0):
            exact = exact_fn(t, xs)
            atol = DENSITY_ATOL * float(exact[0])
            values = np.array(ordered_map(lambda x, t=t, phi=phi: transition_density_p(phi, t, x),
                                          [float(x) for x in xs], ctx.threads))
            errors.extend(np.maximum(np.abs(values - exact) - atol, 0.0) / exact)
        reports.append(tolerance_report(
            f"p(t,x) = {label} kernel", errors, rtol,
            parameters={"phi": phi.name, "beta": phi.params["beta"]},
        ))
    return reports


# verify-bounds


def _bernstein_scaling(ctx: RunContext) -> list[EstimateReport]:
    return [verify_scaling(ctx.phi)]


def _derivative_bound(ctx: RunContext) -> list[EstimateReport]:
    return verify_derivative_bound(ctx.phi, 4, threshold=ctx.tolerances.refinement_drift)


def _phi_integral(ctx: RunContext) -> list[EstimateReport]:
    return [verify_phi_integral(ctx.phi, threshold=ctx.tolerances.refinement_drift)]


def _ml_decay(ctx: RunContext) -> list[EstimateReport]:
    alpha = ctx.params.alpha
    return [
        verify_ml_decay(alpha, b, threshold=ctx.tolerances.refinement_drift)
        for b in sorted({1.0, ctx.params.ml_beta, alpha})
    ]


def kernel_gammas(config: ExperimentConfig, params: FracParams) -> list[float]:
    """Configured gammas plus c1/2 when requested; c1/2 >= 1 is left out."""
    gammas = list(config.sweep.gammas)
    if config.sweep.include_half_c1:
        half = params.c1 / 2.0
        if half >= 1.0:
            logger.info("skipping gamma = c1/2 = %g: q^gamma needs gamma < 1", half)
        elif half not in gammas:
            gammas.append(half)
    return gammas


def _kernel_bounds(ctx: RunContext) -> list[EstimateReport]:
    s = ctx.config.sweep
    sweep = KernelSweep(s.t_min, s.t_max, s.x_min, s.x_max, s.points_t, s.points_x)
    return verify_kernel_bounds(
        ctx.params, ctx.phi, sweep, s.orders, kernel_gammas(ctx.config, ctx.params),
        threshold=ctx.tolerances.refinement_drift, threads=ctx.threads,
    )


def _r_integrability(ctx: RunContext) -> list[EstimateReport]:
    """A bounded kernel in L_2 and a singular one in L_1 (where the norm is its mass)."""
    d = ctx.grid.dim
    delta0 = ctx.phi.delta0
    reports = []
    for gamma, r in ((1.2 * d / delta0, 1.0), (0.5 * d / delta0, 0.5)):
        if not r_window_holds(delta0, gamma, d, r):
            logger.info("skipping R integrability at gamma=%g, r=%g: outside window", gamma, r)
            continue
        reports.extend(verify_R_integrability(ctx.phi, gamma, d, r, ctx.grid,
                                              threshold=ctx.tolerances.refinement_drift,
                                              cross_tolerance=ctx.tolerances.kernel_cross_rtol))
    return reports


def _p_lebesgue(ctx: RunContext) -> list[EstimateReport]:
    return [
        p_lebesgue_bound(ctx.phi, (0.5, 1.0, 2.0), r, ctx.grid,
                         threshold=ctx.tolerances.refinement_drift)
        for r in (1.0, 2.0)
    ]


# simulate


def _z_score(samples: np.ndarray, exact: float) -> tuple[float, float, float]:
    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1)) / math.sqrt(len(samples))
    gap = abs(mean - exact)
    return (0.0 if gap == 0.0 else gap / stderr), mean, stderr


def _exact_gaussian(ctx: RunContext) -> list[EstimateReport]:
    grid, tgrid = ctx.grid, ctx.tgrid
    forcing = modal_forcing(grid, ctx.config.noise.modes)
    field_path = convolve_exact_gaussian(forcing, ctx.params, ctx.phi, grid, tgrid, ctx.seed)
    ctx.add_artifact("field.csv", field_path.columns(), field_path.rows())

    law = gaussian_law(forcing, ctx.params, ctx.phi, grid, tgrid, [tgrid.n_steps])
    energies = np.array(ordered_map(
        lambda r: float(law.sample(ctx.seed, r).l2_norms()[0] ** 2),
        range(ctx.config.noise.n_samples), ctx.threads,
    ))
    variance = stochastic_variance(forcing, ctx.params, ctx.phi, grid, tgrid)
    exact = float(expected_l2_energy(variance[-1], grid))
    z, mean, stderr = _z_score(energies, exact)
    sigma = ctx.tolerances.standard_errors
    return [tolerance_report(
        f"E||u(T)||_2^2: exact-Gaussian samples within {sigma:g} SE of the isometry value",
        [z], sigma,
        parameters={"alpha": ctx.params.alpha, "beta": ctx.params.beta, "phi": ctx.phi.name,
                    "n_samples": len(energies)},
        notes=[f"exact={exact:.6g}, mc={mean:.6g} +- {stderr:.3g}"],
    )]


def _euler_consistency(ctx: RunContext) -> list[EstimateReport]:
    grid, tgrid = ctx.grid, ctx.tgrid
    modes = ctx.config.noise.modes
    forcing = modal_forcing(grid, modes)
    cells = kernel_cells(ctx.params, grid.phi_table(ctx.phi), tgrid.h, tgrid.n_steps)

    def energy(replica: int) -> float:
        noise = NoisePath(ctx.seed, modes, tgrid.n_steps, tgrid.h, replica)
        path = convolve_euler(forcing, ctx.params, ctx.phi, grid, tgrid, noise, cells=cells)
        return float(path.l2_norms()[-1] ** 2)

    energies = np.array(ordered_map(energy, range(ctx.config.noise.n_samples), ctx.threads))
    variance = stochastic_variance(forcing, ctx.params, ctx.phi, grid, tgrid, cells=cells)
    exact = float(expected_l2_energy(variance[-1], grid))
    z, mean, stderr = _z_score(energies, exact)
    sigma = ctx.tolerances.standard_errors
    return [tolerance_report(
        f"E||u(T)||_2^2: Euler paths within {sigma:g} SE of the isometry value",
        [z], sigma,
        parameters={"alpha": ctx.params.alpha, "beta": ctx.params.beta, "phi": ctx.phi.name,
                    "n_samples": len(energies)},
        notes=[f"exact={exact:.6g}, mc={mean:.6g} +- {stderr:.3g}"],
    )]


def _fraccalc_identities(ctx: RunContext) -> list[EstimateReport]:
    alpha = ctx.params.alpha
    grid = TimeGrid(1.0, FRACCALC_STEPS)
    t = grid.nodes
    square = SampledPath.from_function(grid, lambda s: s**2)
    a, b = alpha, 0.5 * (1.0 - alpha) + 0.1
    semigroup = rl_integral(rl_integral(square, b), a).values - rl_integral(square, a + b).values
    power_errors = []
    for k in (1, 2):
        path = SampledPath.from_function(grid, lambda s, k=k: s**k)
        exact = special.gamma(k + 1) / special.gamma(k + 1 + alpha) * t ** (k + alpha)
        power_errors.extend(np.abs(rl_integral(path, alpha).values - exact))
    parameters = {"alpha": alpha, "n_steps": FRACCALC_STEPS}
    return [
        tolerance_report("I^a I^b f = I^(a+b) f", np.abs(semigroup), FRACCALC_TOLERANCE,
                         parameters={**parameters, "a": a, "b": b}),
        tolerance_report("I^alpha t^k = k!/Gamma(k+1+alpha) t^(k+alpha)", power_errors,
                         FRACCALC_TOLERANCE, parameters=parameters),
        verify_lp_boundedness(lambda s: np.cos(3.0 * s) + s, alpha, 2.0,
                              threshold=ctx.tolerances.refinement_drift),
    ]


def _ito_fractional(ctx: RunContext) -> list[EstimateReport]:
    def h_fn(s: np.ndarray) -> np.ndarray:
        return np.stack([1.0 + s, np.cos(2.0 * math.pi * s)], axis=1)

    return [
        verify_ito_fractional_bound(h_fn, nu, ctx.tgrid, threshold=ctx.tolerances.refinement_drift)
        for nu in ITO_ORDERS
    ]


# regularity-report


def _apriori(p: int) -> Runner:
    def run(ctx: RunContext) -> list[EstimateReport]:
        n_samples = ctx.config.noise.n_samples
        if n_samples < 10 * p * p:
            logger.warning("raising n_samples from %d to %d for p=%d", n_samples, 10 * p * p, p)
            n_samples = 10 * p * p
        modes = ctx.config.noise.modes
        return verify_apriori_lp(
            lambda g: modal_forcing(g, modes), ctx.params, ctx.phi, ctx.grid, ctx.tgrid, p,
            n_samples, ctx.seed, threshold=ctx.tolerances.refinement_drift,
            standard_errors=ctx.tolerances.standard_errors, threads=ctx.threads,
        )

    return run


def _solution_space(ctx: RunContext) -> list[EstimateReport]:
    grid = ctx.grid
    x = _first_axis(grid)
    bump = np.exp(-((x - grid.box_length / 2) ** 2))
    forcing = replace(modal_forcing(grid, ctx.config.noise.modes),
                      drift=lambda t: math.cos(t) * bump)
    return [verify_solution_space_estimate(forcing, ctx.params, ctx.phi, grid, ctx.tgrid,
                                           threshold=ctx.tolerances.refinement_drift)]


def smooth_profile(grid: SpectralGrid, count: int = 8) -> np.ndarray:
    """sum_k k^-2 cos(2 pi k x / L + k) along the first axis."""
    x = _first_axis(grid)
    return sum(
        k**-2.0 * np.cos(2.0 * math.pi * k * x / grid.box_length + k) for k in range(1, count + 1)
    )


def _sobolev_equivalence(ctx: RunContext) -> list[EstimateReport]:
    phi = ctx.phi

    def ratios(grid: SpectralGrid) -> list[float]:
        u = smooth_profile(grid)
        out = []
        for gamma in (0.5, 1.0, 2.0):
            ratio = sobolev_equivalence_ratio(u, grid, phi, gamma)
            out.extend([ratio, 1.0 / ratio])
        return out

    def constants(grid: SpectralGrid) -> list[float]:
        return [interpolation_check(smooth_profile(grid), grid, phi, 0.0, 1.0, 2.0, 0.1)]

    drift = ctx.tolerances.refinement_drift
    fine = ctx.grid.refined()
    return [
        ratio_report("||u||_{H^(phi,gamma)} ~ ||u|| + ||phi(Delta)^(gamma/2) u||",
                     ratios(ctx.grid), ratios(fine), threshold=drift,
                     parameters={"phi": phi.name}),
        ratio_report("||u||_(H^phi,1) <= eps ||u||_(H^phi,2) + N(eps) ||u||_(H^phi,0)",
                     constants(ctx.grid), constants(fine), threshold=drift,
                     parameters={"phi": phi.name, "eps": 0.1}),
    ]


# sharp-report


def _sharp_maximal(ctx: RunContext) -> list[EstimateReport]:
    modes = ctx.config.noise.modes

    def modal(g: SpectralGrid) -> ForcingSpec:
        return modal_forcing(g, modes)

    def bumps(g: SpectralGrid) -> ForcingSpec:
        length = g.box_length
        return bump_forcing(g, (0.25 * length, 0.75 * length), 0.05 * length)

    phis = [ctx.phi]
    heat = catalog(BernsteinName.STABLE, {"beta": 1.0})
    if ctx.phi.name != heat.name or ctx.phi.params != heat.params:
        phis.append(heat)
    reports = []
    for phi in phis:
        for label, forcing_for in (("modal", modal), ("bumps", bumps)):
            report = verify_sharp_maximal(forcing_for, ctx.params, phi, ctx.grid, ctx.tgrid,
                                          threshold=ctx.tolerances.refinement_drift)
            report.parameters["forcing"] = label
            reports.append(report)
    reports.append(verify_translation_invariance(bumps, ctx.params, ctx.phi, ctx.grid, ctx.tgrid))
    return reports


def _oracle_equivalence(ctx: RunContext) -> list[EstimateReport]:
    rng = np.random.default_rng(ctx.seed)
    h = rng.standard_normal((8, 8))
    levels = [CubeLevel(1.0, 0.5, 3, 1), CubeLevel(2.0, 1.0, 5, 2)]
    gaps = [
        np.max(np.abs(maximal_function(h, axis) - brute_force_maximal(h, axis)))
        for axis in ("space", "time")
    ]
    gaps.append(np.max(np.abs(sharp_function(h, levels) - brute_force_sharp(h, levels))))
    reports = [tolerance_report("dyadic maximal and sharp functions = exhaustive enumeration",
                                gaps, 1e-12, parameters={"shape": "8x8"})]

    alpha = ctx.params.alpha
    size = ctx.config.noise.n_samples
    probs = np.linspace(0.05, 0.95, 11)
    stable = sample_stable(alpha, size, rng)
    inverse = sample_inverse_subordinator(alpha, 1.0, size, rng)
    checks = (
        ("Q_1 samples ~ one-sided stable law",
         chi_square_check(stable, None, np.quantile(stable, probs),
                          cdf=lambda x: stable_cdf(alpha, x))),
        ("R_1 samples ~ inverse subordinator density",
         chi_square_check(inverse, lambda r: inverse_subordinator_density(alpha, 1.0, r),
                          np.quantile(inverse, probs))),
    )
    for name, p_value in checks:
        reports.append(EstimateReport(
            inequality=f"{name} (chi-square p > {CHI_SQUARE_LEVEL:g})",
            parameters={"alpha": alpha, "n_samples": size},
            samples=[p_value],
            supremum=p_value,
            threshold=CHI_SQUARE_LEVEL,
            passed=p_value > CHI_SQUARE_LEVEL,
        ))
    return reports


# picard


def _picard_contraction(ctx: RunContext) -> list[EstimateReport]:
    grid, tgrid = ctx.grid, ctx.tgrid
    lip = PICARD_LIPSCHITZ
    forcing = replace(
        modal_forcing(grid, ctx.config.noise.modes),
        drift_map=lambda u: lip * np.sin(u),
        noise_map=lambda u: 1.0 + lip * np.cos(u),
        drift_lipschitz=lip,
        noise_lipschitz=lip,
        mode_xi_sq=None,
    )
    forcing.check_lipschitz(np.random.default_rng(ctx.seed))
    x = _first_axis(grid)
    u0 = np.exp(-((x - grid.box_length / 2) ** 2))
    noise = NoisePath(ctx.seed, forcing.modes, tgrid.n_steps, tgrid.h)
    result = picard_solve(forcing, ctx.params, ctx.phi, grid, tgrid, noise, u0=u0, n_iter=10)
    ctx.add_artifact("picard.csv", ["iterate", "difference"],
                     [(i + 1, d) for i, d in enumerate(result.differences)])
    ratios = result.contraction_ratios[1:]
    return [tolerance_report(
        f"||u^(n+1) - u^n|| <= {PICARD_RATIO:g} ||u^n - u^(n-1)|| from iterate 3",
        ratios[np.isfinite(ratios)], PICARD_RATIO,
        parameters={"lipschitz": lip, "iterates": len(result.differences)},
    )]


# whitenoise


def _whitenoise_window(ctx: RunContext) -> list[EstimateReport]:
    d = ctx.grid.dim
    window = white_noise_window(ctx.params, ctx.phi.delta0, d)
    return [tolerance_report(
        "d < d0", [d / window.d0], 1.0,
        parameters={"alpha": ctx.params.alpha, "beta": ctx.params.beta, "d": d,
                    "delta0": ctx.phi.delta0},
        notes=[f"d0={window.d0:.6g}, k0={window.k0:.6g}, s={window.s:.6g}, "
               f"gamma={window.gamma:.6g}"],
    )]


def _whitenoise_truncation(ctx: RunContext) -> list[EstimateReport]:
    return [verify_whitenoise_truncation(ctx.params, ctx.phi, ctx.grid, ctx.tgrid,
                                         ctx.config.noise.modes,
                                         tolerance=ctx.tolerances.truncation_drift)]


_SUITE_LIST = [
    Suite("kernel-table", "kernel-table", "radial table of q^gamma over the sweep",
          _kernel_table),
    Suite("mass-identity", "kernel-table", "whole-space and lattice mass of q, symbol round trip",
          _mass_identity),
    Suite("route-agreement", "kernel-table", "Fourier against subordination for q_{a,a}",
          _route_agreement),
    Suite("transition-density", "kernel-table", "p against Gaussian and Cauchy kernels",
          _transition_density),
    Suite("bernstein-scaling", "verify-bounds", "two-sided scaling of phi", _bernstein_scaling),
    Suite("derivative-bound", "verify-bounds", "lam^n |phi^(n)| / phi for n <= 4",
          _derivative_bound),
    Suite("phi-integral", "verify-bounds", "tail integral of r^-1 phi(r^-2)", _phi_integral),
    Suite("ml-decay", "verify-bounds", "Mittag-Leffler decay on the negative axis", _ml_decay),
    Suite("kernel-bounds", "verify-bounds", "pointwise and mass bounds for p and q",
          _kernel_bounds),
    Suite("r-integrability", "verify-bounds", "Bessel-type kernel R in L_2r", _r_integrability),
    Suite("p-lebesgue", "verify-bounds", "L_2r norms of p", _p_lebesgue),
    Suite("exact-gaussian", "simulate", "exact-law sampler against the isometry",
          _exact_gaussian),
    Suite("euler-consistency", "simulate", "Euler paths against the isometry",
          _euler_consistency),
    Suite("fraccalc-identities", "simulate", "semigroup and power rule of I^alpha",
          _fraccalc_identities),
    Suite("ito-fractional", "simulate", "fractional derivative of Ito integrals",
          _ito_fractional),
    Suite("apriori-p2", "regularity-report", "p = 2 moments and a priori ratio", _apriori(2)),
    Suite("apriori-p4", "regularity-report", "p = 4 moments and a priori ratio", _apriori(4)),
    Suite("solution-space", "regularity-report", "theta-weighted L_2 estimate",
          _solution_space),
    Suite("sobolev-equivalence", "regularity-report", "H^(phi,gamma) norm equivalence",
          _sobolev_equivalence),
    Suite("sharp-maximal", "sharp-report", "sharp vs maximal function, translation invariance",
          _sharp_maximal),
    Suite("oracle-equivalence", "sharp-report", "brute-force and density oracles",
          _oracle_equivalence),
    Suite("picard-contraction", "picard", "Picard differences contract", _picard_contraction),
    Suite("whitenoise-window", "whitenoise", "admissible white-noise exponents",
          _whitenoise_window),
    Suite("whitenoise-truncation", "whitenoise", "energy stable under K -> 2K",
          _whitenoise_truncation),
]

SUITES: dict[str, Suite] = {suite.name: suite for suite in _SUITE_LIST}


def get_suite(name: str) -> Suite:
    """Return the suite registered under ``name``.

    Raises ValueError if the suite name is not recognized.
    """
    if name not in SUITES:
        available = ", ".join(sorted(SUITES))
        raise ValueError(f"Unknown suite: {name!r}. Available suites: {available}")
    return SUITES[name]


def suites_for(subcommand: str, selected: Sequence[str] = ()) -> list[Suite]:
    """Suites of ``subcommand`` in registry order, narrowed to ``selected`` when given."""
    if subcommand not in SUBCOMMANDS:
        raise ValueError(
            f"Unknown subcommand: {subcommand!r}. Available subcommands: {', '.join(SUBCOMMANDS)}"
        )
    wanted = set(selected)
    return [
        s for s in _SUITE_LIST
        if s.subcommand == subcommand and (not wanted or s.name in wanted)
    ]
