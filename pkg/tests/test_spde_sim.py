"""Tests for noise paths, stochastic convolutions and the Picard solver."""

import math

import numpy as np
import pytest
from scipy import special

from fracspde_lab.errors import ParameterWindowError, PicardDivergenceError
from fracspde_lab.fraccalc import TimeGrid, power_cell_integrals
from fracspde_lab.kernel_engine import FracParams
from fracspde_lab.lattice import SpectralGrid
from fracspde_lab.special_fn import mittag_leffler
from fracspde_lab.spde_sim import (
    ForcingSpec,
    NoisePath,
    PicardResult,
    SolutionField,
    bump_forcing,
    causal_sum,
    convolve_euler,
    convolve_exact_gaussian,
    deterministic_response,
    expected_l2_energy,
    frac_deriv_of_ito,
    gaussian_law,
    ito_fractional_variance,
    kernel_cells,
    modal_coefficients,
    modal_forcing,
    noise_batch,
    picard_solve,
    stochastic_variance,
    verify_ito_fractional_bound,
    verify_solution_space_estimate,
    verify_whitenoise_truncation,
    white_noise_forcing,
    white_noise_window,
)


def noise_for(forcing, tgrid, seed=11, replica=0):
    return NoisePath(seed, forcing.modes, tgrid.n_steps, tgrid.h, replica)


class TestNoisePath:
    def test_shape_and_scale(self):
        noise = NoisePath(3, modes=2, n_steps=20000, dt=0.01)
        assert noise.increments.shape == (20000, 2)
        assert np.mean(noise.increments**2) == pytest.approx(0.01, rel=0.05)

    def test_reproducible(self):
        a = NoisePath(5, 3, 10, 0.1).increments
        b = NoisePath(5, 3, 10, 0.1).increments
        np.testing.assert_array_equal(a, b)

    def test_modes_are_independent_streams(self):
        wide = NoisePath(5, 3, 10, 0.1).increments
        narrow = NoisePath(5, 2, 10, 0.1).increments
        np.testing.assert_array_equal(wide[:, :2], narrow)

    def test_replicas_differ(self):
        a = NoisePath(5, 1, 10, 0.1, replica=0).increments
        b = NoisePath(5, 1, 10, 0.1, replica=1).increments
        assert not np.array_equal(a, b)

    def test_batch(self):
        batch = noise_batch(5, 2, 10, 0.1, [0, 1, 2], threads=2)
        assert batch.shape == (3, 10, 2)
        np.testing.assert_array_equal(batch[1], NoisePath(5, 2, 10, 0.1, 1).increments)

    def test_zeros(self):
        assert not NoisePath.zeros(2, 4, 0.25).increments.any()

    def test_validation(self):
        with pytest.raises(ValueError, match="must be >= 1"):
            NoisePath(0, 0, 4, 0.1)
        with pytest.raises(ValueError, match="dt must be positive"):
            NoisePath(0, 1, 4, 0.0)
        with pytest.raises(ValueError, match="fixed increments"):
            NoisePath(0, 1, 4, 0.1, fixed=np.zeros((3, 1)))


class TestForcing:
    def test_modal_profiles(self, small_grid):
        forcing = modal_forcing(small_grid, 3, scale=2.0)
        assert forcing.modes == 3
        assert forcing.is_deterministic
        np.testing.assert_allclose(forcing.profiles[0], 2.0 / math.sqrt(8.0))

    def test_bumps(self, small_grid):
        forcing = bump_forcing(small_grid, [2.0, 6.0], 0.4, scale=3.0)
        assert forcing.profiles.shape == (2, 32)
        assert forcing.profiles[0, 8] == pytest.approx(3.0)
        assert forcing.mode_xi_sq is None

    def test_bumps_only_in_one_dimension(self):
        with pytest.raises(ValueError, match="d = 1"):
            bump_forcing(SpectralGrid(2, 1.0, 8), [0.5], 0.1)

    def test_shifted(self, small_grid):
        forcing = bump_forcing(small_grid, [2.0], 0.4)
        moved = forcing.shifted(4)
        np.testing.assert_array_equal(moved.profiles[0], np.roll(forcing.profiles[0], 4))

    def test_amplitude_shape_checked(self, small_grid):
        forcing = modal_forcing(small_grid, 2, amplitude=lambda t: np.ones((len(t), 3)))
        with pytest.raises(ValueError, match="amplitude must return shape"):
            forcing.amplitudes(np.zeros(4))

    def test_coefficients_follow_noise_map(self, small_grid):
        forcing = ForcingSpec(profiles=np.ones((1, 32)), noise_map=lambda u: 1.0 + u)
        state = np.full((2, 32), 2.0)
        np.testing.assert_allclose(forcing.coefficients(np.zeros(2), state), 3.0)
        np.testing.assert_allclose(forcing.coefficients(np.zeros(2)), 1.0)

    def test_drift_values(self, small_grid):
        forcing = ForcingSpec(
            profiles=np.ones((1, 32)),
            drift=lambda t: np.full(32, t),
            drift_map=lambda u: 2.0 * u,
        )
        out = forcing.drift_values(np.array([0.5]), np.ones((1, 32)))
        np.testing.assert_allclose(out, 2.5)
        assert modal_forcing(small_grid, 1).drift_values(np.zeros(2)) is None

    def test_lipschitz_check(self):
        forcing = ForcingSpec(
            profiles=np.ones((1, 4)), drift_map=lambda u: 0.1 * np.sin(u), drift_lipschitz=0.1
        )
        forcing.check_lipschitz(np.random.default_rng(0))
        loose = ForcingSpec(
            profiles=np.ones((1, 4)), drift_map=lambda u: 0.1 * np.sin(u), drift_lipschitz=0.05
        )
        with pytest.raises(ValueError, match="above the declared"):
            loose.check_lipschitz(np.random.default_rng(0))


class TestKernelCells:
    def test_causal_sum(self):
        out = causal_sum(np.array([1.0, 2.0, 3.0]), np.ones(3))
        np.testing.assert_allclose(out, [0.0, 1.0, 3.0, 6.0])

    def test_zero_frequency_is_power(self, params):
        cells = kernel_cells(params, np.array([0.0]), 0.1, 5)
        expected = power_cell_integrals(0.1, 0.1, 5) / special.gamma(1.1)
        np.testing.assert_allclose(cells.first[:, 0], expected, rtol=1e-12)
        expected2 = power_cell_integrals(0.2, 0.1, 5) / special.gamma(1.1) ** 2
        np.testing.assert_allclose(cells.second[:, 0], expected2, rtol=1e-12)

    def test_euler_weights_carry_variance(self, params):
        cells = kernel_cells(params, np.array([0.0, 1.0, 4.0]), 0.05, 8)
        np.testing.assert_allclose(cells.euler_weights() ** 2 * cells.h, cells.second)

    def test_lattice_index(self, params, small_grid, half_stable):
        lam = small_grid.phi_table(half_stable)
        cells = kernel_cells(params, lam, 0.1, 4)
        assert cells.on_lattice(cells.first).shape == (4, 32)
        assert len(cells.lams) == 17


class TestSolutionField:
    def test_shape_checked(self, params, small_grid):
        with pytest.raises(ValueError, match="does not match"):
            SolutionField(np.zeros(3), np.zeros((2, 32)), small_grid, params, "euler")

    def test_non_finite_rejected(self, params, small_grid):
        values = np.zeros((1, 32))
        values[0, 3] = np.inf
        with pytest.raises(ValueError, match="non-finite"):
            SolutionField(np.zeros(1), values, small_grid, params, "euler")

    def test_rows(self, params, small_grid):
        field = SolutionField(np.array([0.0, 1.0]), np.ones((2, 32)), small_grid, params, "euler")
        assert field.columns() == ["t", "x", "value"]
        rows = list(field.rows())
        assert len(rows) == 64
        assert rows[33] == (1.0, 0.25, 1.0)
        np.testing.assert_allclose(field.l2_norms(), math.sqrt(8.0))


class TestEuler:
    def test_brownian_constant_mode(self, small_grid, heat, short_tgrid):
        # alpha = beta and the constant mode give u = W_t / sqrt(L)
        params = FracParams(0.5, 0.5)
        forcing = modal_forcing(small_grid, 1)
        noise = noise_for(forcing, short_tgrid)
        field = convolve_euler(forcing, params, heat, small_grid, short_tgrid, noise)
        walk = np.concatenate([[0.0], np.cumsum(noise.increments[:, 0])])
        np.testing.assert_allclose(field.values[:, 0], walk / math.sqrt(8.0), atol=1e-12)

    def test_zero_noise(self, params, small_grid, heat, short_tgrid):
        forcing = modal_forcing(small_grid, 2)
        noise = NoisePath.zeros(2, short_tgrid.n_steps, short_tgrid.h)
        field = convolve_euler(forcing, params, heat, small_grid, short_tgrid, noise)
        assert not field.values.any()

    def test_linear_in_forcing(self, params, small_grid, half_stable, short_tgrid):
        first = bump_forcing(small_grid, [2.0, 5.0], 0.4)
        second = ForcingSpec(profiles=modal_forcing(small_grid, 2, scale=0.7).profiles)
        both = ForcingSpec(profiles=first.profiles + second.profiles)
        noise = noise_for(first, short_tgrid)
        fields = [
            convolve_euler(g, params, half_stable, small_grid, short_tgrid, noise).values
            for g in (first, second, both)
        ]
        np.testing.assert_allclose(fields[2], fields[0] + fields[1], rtol=0.0,
                                   atol=1e-12 * np.max(np.abs(fields[2])))

    def test_noise_must_match(self, params, small_grid, heat, short_tgrid):
        forcing = modal_forcing(small_grid, 2)
        noise = NoisePath(1, 3, short_tgrid.n_steps, short_tgrid.h)
        with pytest.raises(ValueError, match="does not match forcing"):
            convolve_euler(forcing, params, heat, small_grid, short_tgrid, noise)

    def test_modal_coefficients_agree(self, params, small_grid, half_stable, short_tgrid):
        forcing = modal_forcing(small_grid, 5)
        noise = noise_for(forcing, short_tgrid)
        field = convolve_euler(forcing, params, half_stable, small_grid, short_tgrid, noise)
        coeffs = modal_coefficients(forcing, params, half_stable, short_tgrid,
                                    noise.increments[None])
        rebuilt = np.einsum("nk,kx->nx", coeffs[0], forcing.profiles)
        np.testing.assert_allclose(field.values, rebuilt, atol=1e-10)

    def test_modal_needs_eigenfunctions(self, params, small_grid, heat, short_tgrid):
        forcing = bump_forcing(small_grid, [1.0], 0.3)
        with pytest.raises(ValueError, match="eigenfunction profiles"):
            modal_coefficients(forcing, params, heat, short_tgrid, np.zeros((1, 16, 1)))

    def test_state_dependent_noise(self, params, small_grid, heat, short_tgrid):
        forcing = ForcingSpec(profiles=modal_forcing(small_grid, 1).profiles,
                              noise_map=lambda u: 1.0 + 0.0 * u)
        plain = modal_forcing(small_grid, 1)
        noise = noise_for(plain, short_tgrid)
        a = convolve_euler(forcing, params, heat, small_grid, short_tgrid, noise)
        b = convolve_euler(plain, params, heat, small_grid, short_tgrid, noise)
        np.testing.assert_allclose(a.values, b.values, atol=1e-12)

    def test_energy_matches_variance(self, params, small_grid, half_stable, short_tgrid):
        forcing = modal_forcing(small_grid, 3)
        variance = stochastic_variance(forcing, params, half_stable, small_grid, short_tgrid)
        expected = expected_l2_energy(variance[-1], small_grid)
        energies = np.array([
            convolve_euler(forcing, params, half_stable, small_grid, short_tgrid,
                           noise_for(forcing, short_tgrid, replica=r)).l2_norms()[-1] ** 2
            for r in range(300)
        ])
        stderr = energies.std(ddof=1) / math.sqrt(energies.size)
        assert abs(energies.mean() - expected) < 5.0 * stderr


class TestVariance:
    def test_brownian_energy(self, small_grid, heat, short_tgrid):
        params = FracParams(0.5, 0.5)
        variance = stochastic_variance(modal_forcing(small_grid, 1), params, heat, small_grid,
                                       short_tgrid)
        energy = expected_l2_energy(variance, small_grid)
        np.testing.assert_allclose(energy, short_tgrid.nodes, atol=1e-12)

    def test_needs_deterministic_coefficients(self, params, small_grid, heat, short_tgrid):
        forcing = ForcingSpec(profiles=np.ones((1, 32)), noise_map=np.cos)
        with pytest.raises(ValueError, match="deterministic coefficients"):
            stochastic_variance(forcing, params, heat, small_grid, short_tgrid)


class TestExactGaussian:
    def test_reproducible(self, params, small_grid, heat, short_tgrid):
        forcing = modal_forcing(small_grid, 2)
        a = convolve_exact_gaussian(forcing, params, heat, small_grid, short_tgrid, 3)
        b = convolve_exact_gaussian(forcing, params, heat, small_grid, short_tgrid, 3)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.scheme == "exact_gaussian"
        assert not a.values[0].any()

    def test_selected_steps(self, params, small_grid, heat, short_tgrid):
        forcing = modal_forcing(small_grid, 2)
        field = convolve_exact_gaussian(forcing, params, heat, small_grid, short_tgrid, 3,
                                        steps=[8, 16])
        np.testing.assert_allclose(field.times, [0.5, 1.0])

    def test_step_range(self, params, small_grid, heat, short_tgrid):
        with pytest.raises(ValueError, match="outside 0..16"):
            gaussian_law(modal_forcing(small_grid, 1), params, heat, small_grid, short_tgrid,
                         [17])

    def test_energy_matches_variance(self, params, small_grid, half_stable, short_tgrid):
        forcing = modal_forcing(small_grid, 3)
        law = gaussian_law(forcing, params, half_stable, small_grid, short_tgrid, [16])
        variance = stochastic_variance(forcing, params, half_stable, small_grid, short_tgrid)
        expected = expected_l2_energy(variance[-1], small_grid)
        energies = np.array([law.sample(21, r).l2_norms()[0] ** 2 for r in range(400)])
        stderr = energies.std(ddof=1) / math.sqrt(energies.size)
        assert abs(energies.mean() - expected) < 5.0 * stderr


class TestItoFractional:
    def test_order_zero_is_ito_integral(self):
        noise = NoisePath(4, 1, 32, 1.0 / 32)
        path = frac_deriv_of_ito(np.ones((32, 1)), 0.0, noise)
        walk = np.concatenate([[0.0], np.cumsum(noise.increments[:, 0])])
        np.testing.assert_allclose(path, walk, atol=1e-12)

    def test_variance_closed_form(self):
        # E |d^nu W_t|^2 = t^(1-2nu) / ((1-2nu) Gamma(1-nu)^2)
        nu = 0.3
        tgrid = TimeGrid(1.0, 64)
        variance = ito_fractional_variance(np.ones((64, 1)), nu, tgrid)
        t = tgrid.nodes
        expected = t ** (1 - 2 * nu) / ((1 - 2 * nu) * special.gamma(1 - nu) ** 2)
        np.testing.assert_allclose(variance, expected, rtol=1e-10, atol=1e-14)

    def test_order_window(self):
        noise = NoisePath(4, 1, 8, 0.1)
        with pytest.raises(ParameterWindowError):
            frac_deriv_of_ito(np.ones((8, 1)), 0.5, noise)

    def test_shape_checked(self):
        with pytest.raises(ValueError, match="do not match the noise path"):
            frac_deriv_of_ito(np.ones((8, 2)), 0.2, NoisePath(4, 1, 8, 0.1))

    @pytest.mark.parametrize("nu", [0.1, 0.3, 0.45])
    def test_bound(self, nu):
        report = verify_ito_fractional_bound(lambda t: np.ones_like(t), nu, TimeGrid(1.0, 64))
        assert report.passed
        assert report.supremum < 10.0


class TestDeterministicResponse:
    def test_constant_initial_data(self, params, small_grid, heat, short_tgrid):
        u0 = np.full(small_grid.shape, 2.0)
        out = deterministic_response(params, heat, small_grid, short_tgrid, u0=u0)
        np.testing.assert_allclose(out, 2.0, atol=1e-12)

    def test_relaxation_of_a_mode(self, params, heat, short_tgrid):
        grid = SpectralGrid(1, 2.0 * math.pi, 16)
        out = deterministic_response(params, heat, grid, short_tgrid, u0=np.cos(grid.coords))
        decay = mittag_leffler(params.alpha, 1.0, -(short_tgrid.nodes**params.alpha))
        np.testing.assert_allclose(out[:, 0], decay, rtol=1e-6)

    def test_constant_drift(self, params, small_grid, heat, short_tgrid):
        drift = np.ones((short_tgrid.n_steps,) + small_grid.shape)
        out = deterministic_response(params, heat, small_grid, short_tgrid, drift=drift)
        expected = short_tgrid.nodes**params.alpha / special.gamma(1.0 + params.alpha)
        np.testing.assert_allclose(out[:, 5], expected, rtol=1e-10, atol=1e-14)


class TestPicard:
    def test_contraction_ratios(self):
        result = PicardResult(iterates=[], differences=[1.0, 0.1, 0.01])
        np.testing.assert_allclose(result.contraction_ratios, [0.1, 0.1])

    def test_additive_noise_is_a_fixed_point(self, params, small_grid, heat, short_tgrid):
        forcing = modal_forcing(small_grid, 2)
        result = picard_solve(forcing, params, heat, small_grid, short_tgrid,
                              noise_for(forcing, short_tgrid), n_iter=5)
        assert result.differences == [0.0]
        assert len(result.iterates) == 2

    def test_lipschitz_contraction(self, params, small_grid, heat, short_tgrid):
        x = small_grid.coords
        forcing = ForcingSpec(
            profiles=modal_forcing(small_grid, 2).profiles,
            drift_map=lambda u: 0.1 * np.sin(u),
            noise_map=lambda u: 1.0 + 0.1 * np.cos(u),
            drift_lipschitz=0.1,
            noise_lipschitz=0.1,
        )
        u0 = np.exp(-((x - 4.0) ** 2))
        result = picard_solve(forcing, params, heat, small_grid, short_tgrid,
                              noise_for(forcing, short_tgrid), u0=u0, n_iter=6)
        assert len(result.differences) >= 3
        assert np.all(result.contraction_ratios[1:] <= 0.5)

    def test_divergence(self, params, small_grid, heat, short_tgrid):
        forcing = ForcingSpec(profiles=np.zeros((1, 32)), drift_map=lambda u: 200.0 * u,
                              drift_lipschitz=200.0)
        with pytest.raises(PicardDivergenceError, match="grew on 3 consecutive"):
            picard_solve(forcing, params, heat, small_grid, short_tgrid,
                         noise_for(forcing, short_tgrid), u0=np.ones(32), n_iter=10)

    def test_iterations_positive(self, params, small_grid, heat, short_tgrid):
        forcing = modal_forcing(small_grid, 1)
        with pytest.raises(ValueError, match="n_iter"):
            picard_solve(forcing, params, heat, small_grid, short_tgrid,
                         noise_for(forcing, short_tgrid), n_iter=0)


class TestWhiteNoise:
    def test_window(self, heat):
        window = white_noise_window(FracParams(0.9, 0.1), heat.delta0, 1)
        assert window.d0 == pytest.approx(4.0)
        assert window.k0 == pytest.approx(0.75)
        assert window.s == pytest.approx(2.2)
        assert window.gamma == pytest.approx(1.2)

    def test_delta0_too_small(self):
        with pytest.raises(ParameterWindowError) as excinfo:
            white_noise_window(FracParams(0.9, 0.1), 0.25, 1)
        assert excinfo.value.inequality == "delta0 > 1/4"

    def test_beta_too_large(self, heat):
        with pytest.raises(ParameterWindowError, match="beta < "):
            white_noise_window(FracParams(0.5, 0.9), heat.delta0, 1)

    def test_dimension_too_large(self, half_stable):
        with pytest.raises(ParameterWindowError) as excinfo:
            white_noise_window(FracParams(0.8, 0.7), half_stable.delta0, 2)
        assert excinfo.value.inequality == "d < d0"

    def test_forcing_is_orthonormal_modes(self, heat):
        grid = SpectralGrid(1, 2.0 * math.pi, 32)
        forcing = white_noise_forcing(FracParams(0.9, 0.1), heat, grid, 5)
        assert forcing.window is not None
        np.testing.assert_allclose(forcing.mode_xi_sq, [0.0, 1.0, 1.0, 4.0, 4.0])

    def test_truncation_stable(self, heat):
        grid = SpectralGrid(1, 2.0 * math.pi, 256)
        report = verify_whitenoise_truncation(FracParams(0.9, 0.1), heat, grid,
                                              TimeGrid(1.0, 16), 64)
        assert report.passed, report.samples


class TestSolutionSpace:
    def test_modal_forcing(self, params, small_grid, heat, short_tgrid):
        forcing = modal_forcing(small_grid, 3)
        report = verify_solution_space_estimate(forcing, params, heat, small_grid, short_tgrid)
        assert report.passed
        assert math.isfinite(report.supremum)
