"""Tests for maximal and sharp functions and the regularity harness."""

import math

import numpy as np
import pytest

from fracspde_lab.analysis import (
    CubeLevel,
    ParabolicCube,
    apriori_moments,
    brute_force_maximal,
    brute_force_sharp,
    cube_family,
    cube_maximal_function,
    dyadic_radii,
    interpolation_check,
    maximal_function,
    multiplier_label,
    regularity_multiplier,
    sharp_function,
    smoothing_field,
    sobolev_equivalence_ratio,
    sobolev_phi_norm,
    verify_apriori_lp,
    verify_sharp_maximal,
    verify_translation_invariance,
)
from fracspde_lab.errors import ParameterWindowError
from fracspde_lab.fraccalc import TimeGrid
from fracspde_lab.kernel_engine import FracParams
from fracspde_lab.lattice import MultiplierKind, SpectralGrid
from fracspde_lab.spde_sim import (
    ForcingSpec,
    bump_forcing,
    expected_l2_energy,
    modal_forcing,
    stochastic_variance,
)

HANDMADE_LEVELS = [CubeLevel(1.0, 0.5, 3, 1), CubeLevel(2.0, 1.0, 5, 2)]


@pytest.fixture
def random_field():
    return np.random.default_rng(2024).standard_normal((8, 8))


@pytest.fixture
def circle():
    return SpectralGrid(1, 2.0 * math.pi, 32)


class TestMaximalFunction:
    @pytest.mark.parametrize("axis", ["space", "time"])
    def test_matches_brute_force(self, axis):
        h = np.random.default_rng(5).standard_normal((9, 16))
        np.testing.assert_allclose(maximal_function(h, axis), brute_force_maximal(h, axis))

    def test_dominates_modulus(self, random_field):
        assert np.all(maximal_function(random_field) >= np.abs(random_field) - 1e-15)

    def test_constant(self):
        np.testing.assert_allclose(maximal_function(np.full((4, 8), -2.0), "time"), 2.0)

    def test_spike_spreads(self):
        h = np.zeros(16)
        h[0] = 3.0
        out = maximal_function(h)
        assert out[0] == 3.0
        # radius-1 ball around 1 holds the spike: mean 1
        assert out[1] == pytest.approx(1.0)
        assert out[15] == pytest.approx(1.0)

    def test_axis_checked(self, random_field):
        with pytest.raises(ValueError, match="axis must be"):
            maximal_function(random_field, "diagonal")
        with pytest.raises(ValueError, match="axis must be"):
            brute_force_maximal(random_field, "diagonal")


class TestCubes:
    def test_dyadic_radii(self):
        assert dyadic_radii(0.5, 3) == [0.5, 1.0, 2.0]

    def test_family(self, heat, small_grid):
        # kappa(b) = phi(b^-2)^(-1/alpha) = b^4 for alpha = 1/2
        levels = cube_family(heat, 0.5, small_grid, TimeGrid(1.0, 16), [0.5, 0.6, 1.0, 1.2])
        assert [lv.b for lv in levels] == [0.6, 1.0]
        assert levels[0].time_nodes == 4
        assert levels[0].half_width == 2
        assert levels[1].time_nodes == 17
        assert levels[1].kappa == pytest.approx(1.0)

    def test_family_only_one_dimension(self, heat, short_tgrid):
        with pytest.raises(ValueError, match="d = 1"):
            cube_family(heat, 0.5, SpectralGrid(2, 1.0, 8), short_tgrid, [0.5])

    def test_cube_indices(self):
        cube = ParabolicCube(CubeLevel(1.0, 0.5, 3, 1), end=4, center=0)
        assert list(cube.time_indices()) == [2, 3, 4]
        assert cube.space_indices(8) == [7, 0, 1]


class TestSharpFunction:
    def test_matches_brute_force(self, random_field):
        np.testing.assert_allclose(
            sharp_function(random_field, HANDMADE_LEVELS),
            brute_force_sharp(random_field, HANDMADE_LEVELS),
            atol=1e-14,
        )

    def test_constant_has_no_oscillation(self):
        np.testing.assert_allclose(sharp_function(np.full((8, 8), 5.0), HANDMADE_LEVELS), 0.0)

    def test_cube_maximal_of_constant(self):
        out = cube_maximal_function(np.full((8, 8), -1.5), HANDMADE_LEVELS)
        np.testing.assert_allclose(out, 1.5)

    def test_sharp_below_twice_maximal(self, random_field):
        sharp = sharp_function(random_field, HANDMADE_LEVELS)
        maximal = cube_maximal_function(random_field, HANDMADE_LEVELS)
        assert np.all(sharp <= 2.0 * maximal + 1e-12)


class TestSmoothingField:
    def test_shape_and_sign(self, params, small_grid, heat, short_tgrid):
        forcing = modal_forcing(small_grid, 3)
        v = smoothing_field(forcing, params, heat, small_grid, short_tgrid)
        assert v.shape == (17, 32)
        assert np.all(v >= 0)
        assert not v[0].any()
        assert v[-1].max() > 0

    def test_needs_deterministic_coefficients(self, params, small_grid, heat, short_tgrid):
        forcing = ForcingSpec(profiles=np.ones((1, 32)), noise_map=np.cos)
        with pytest.raises(ValueError, match="deterministic coefficients"):
            smoothing_field(forcing, params, heat, small_grid, short_tgrid)


class TestSharpMaximal:
    def test_beta_window(self, heat, small_grid, short_tgrid):
        with pytest.raises(ParameterWindowError) as excinfo:
            verify_sharp_maximal(lambda g: modal_forcing(g, 3), FracParams(0.8, 0.4), heat,
                                 small_grid, short_tgrid)
        assert excinfo.value.inequality == "1/2 < beta < alpha + 1/2"

    def test_smoothing_field_follows_shift(self, params, heat, small_grid, short_tgrid):
        forcing = bump_forcing(small_grid, [2.0], 0.4)
        v = smoothing_field(forcing, params, heat, small_grid, short_tgrid)
        moved = smoothing_field(forcing.shifted(5), params, heat, small_grid, short_tgrid)
        np.testing.assert_allclose(moved, np.roll(v, 5, axis=-1), rtol=0.0,
                                   atol=1e-12 * np.max(v))

    def test_ratio_field_follows_shift(self, params, heat, small_grid, short_tgrid):
        report = verify_translation_invariance(
            lambda g: bump_forcing(g, [2.0, 5.0], 0.4), params, heat, small_grid, short_tgrid,
            shift=5,
        )
        assert report.passed, report.supremum
        assert report.parameters["shift"] == 5
        assert len(report.samples) == 17 * 32

    @pytest.mark.slow
    def test_bounded_under_refinement(self, params, heat):
        grid = SpectralGrid(1, 8.0, 32)
        tgrid = TimeGrid(1.0, 32)
        report = verify_sharp_maximal(
            lambda g: bump_forcing(g, [2.0, 6.0], 0.4), params, heat, grid, tgrid
        )
        assert math.isfinite(report.supremum)
        assert report.refined_supremum is not None


class TestApriori:
    def test_multiplier_choice(self):
        assert regularity_multiplier(FracParams(0.8, 0.7)) == (MultiplierKind.PHI_POWER, 1.5)
        kind, order = regularity_multiplier(FracParams(0.6, 0.4))
        assert kind is MultiplierKind.BESSEL_PHI_POWER
        assert order == pytest.approx(2.0)

    def test_exact_second_moment_matches_lattice(self, params, small_grid, heat, short_tgrid):
        forcing = modal_forcing(small_grid, 5)
        moments = apriori_moments(forcing, params, heat, small_grid, short_tgrid, 2, 0, 1)
        variance = stochastic_variance(forcing, params, heat, small_grid, short_tgrid)
        weight = small_grid.phi_table(heat) ** params.c1
        expected = expected_l2_energy(variance, small_grid, weight)
        np.testing.assert_allclose(moments.exact, expected, rtol=1e-8, atol=1e-14)
        assert np.all(np.isnan(moments.mc_mean))

    @pytest.mark.parametrize("p,n_samples", [(2, 300), (4, 400)])
    def test_monte_carlo_agrees(self, params, small_grid, heat, short_tgrid, p, n_samples):
        forcing = modal_forcing(small_grid, 3)
        moments = apriori_moments(forcing, params, heat, small_grid, short_tgrid, p,
                                  n_samples, 17, threads=1)
        gap = abs(moments.mc_mean[-1] - moments.exact[-1])
        assert gap < 4.0 * moments.mc_stderr[-1]

    def test_forcing_side(self, params, small_grid, heat, short_tgrid):
        # |g|^2 = sum of squared orthonormal modes; the constant mode alone gives 1/L
        forcing = modal_forcing(small_grid, 1)
        moments = apriori_moments(forcing, params, heat, small_grid, short_tgrid, 2, 0, 1)
        np.testing.assert_allclose(moments.forcing, 1.0)

    def test_argument_checks(self, params, small_grid, heat, short_tgrid):
        forcing = modal_forcing(small_grid, 2)
        with pytest.raises(ValueError, match="even integer"):
            apriori_moments(forcing, params, heat, small_grid, short_tgrid, 3, 0, 1)
        with pytest.raises(ValueError, match="too small for p=4"):
            apriori_moments(forcing, params, heat, small_grid, short_tgrid, 4, 100, 1)
        with pytest.raises(ValueError, match="eigenfunction"):
            apriori_moments(bump_forcing(small_grid, [1.0], 0.3), params, heat, small_grid,
                            short_tgrid, 2, 0, 1)

    def test_verify_second_moment(self, params, small_grid, heat, short_tgrid):
        reports = verify_apriori_lp(lambda g: modal_forcing(g, 3), params, heat, small_grid,
                                    short_tgrid, 2, 200, 5, threads=1)
        assert len(reports) == 2
        assert reports[1].passed
        assert reports[1].drift < 1e-6
        assert reports[1].inequality == "E||phi(Delta)^(1.5/2) u||_p^p <= C E||g||_p^p"

    def test_multiplier_label(self):
        assert multiplier_label(MultiplierKind.PHI_POWER, 1.5) == "phi(Delta)^(1.5/2)"
        assert multiplier_label(MultiplierKind.BESSEL_PHI_POWER, 2.0) == "(1-phi(Delta))^(2/2)"

    def test_report_names_bessel_operator(self, small_grid, heat, short_tgrid):
        # beta <= 1/2: (1 - phi(Delta))^((2 - c0)/2) with c0 = 0
        reports = verify_apriori_lp(lambda g: modal_forcing(g, 3), FracParams(0.6, 0.4), heat,
                                    small_grid, short_tgrid, 2, 50, 5, threads=1)
        assert reports[0].inequality.startswith("E||(1-phi(Delta))^(2/2) u(T)||_p^p")
        assert reports[1].inequality == "E||(1-phi(Delta))^(2/2) u||_p^p <= C E||g||_p^p"
        assert reports[0].parameters["operator"] == "bessel_phi_power"

    @pytest.mark.slow
    @pytest.mark.parametrize(("alpha", "beta"), [(0.9, 0.8), (0.6, 0.7)])
    def test_second_moment_at_reference_points(self, small_grid, heat, short_tgrid, alpha, beta):
        reports = verify_apriori_lp(lambda g: modal_forcing(g, 4), FracParams(alpha, beta), heat,
                                    small_grid, short_tgrid, 2, 1000, 42, standard_errors=3.0,
                                    threads=1)
        assert reports[0].parameters["n_samples"] == 1000
        assert reports[0].passed, reports[0].notes


class TestSobolev:
    def test_norm_of_a_mode(self, circle, heat):
        u = np.cos(circle.coords)
        expected = 2.0 ** 0.75 * math.sqrt(math.pi)
        assert sobolev_phi_norm(u, circle, heat, 1.5) == pytest.approx(expected)

    def test_equivalence_ratio(self, circle, heat):
        u = np.cos(circle.coords)
        assert sobolev_equivalence_ratio(u, circle, heat, 2.0) == pytest.approx(1.0)
        with pytest.raises(ValueError, match="gamma >= 0"):
            sobolev_equivalence_ratio(u, circle, heat, -1.0)

    def test_interpolation(self, circle, heat):
        u = np.cos(circle.coords)
        assert interpolation_check(u, circle, heat, 0.0, 1.0, 2.0, 0.1) == pytest.approx(
            math.sqrt(2.0) - 0.2
        )
        assert interpolation_check(u, circle, heat, 0.0, 1.0, 2.0, 10.0) == 0.0
        with pytest.raises(ValueError, match="nu1 < nu2 < nu3"):
            interpolation_check(u, circle, heat, 1.0, 0.0, 2.0, 0.1)
