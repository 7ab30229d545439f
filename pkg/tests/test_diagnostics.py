import types

import numpy as np
import pytest

from shockld.diagnostics import (analytic_center_law,
                                 analytic_exit_log_probability,
                                 analytic_exit_probability, center_series,
                                 fit_scaling, transition_margin_ok,
                                 wave_center, wave_centers)
from shockld.grid import WaveSpec, sample_profile
from shockld.montecarlo import sample_terminal_states
from shockld.noise import build_noise_model, total_covariance_mass
from shockld.optimize import RareEventSpec, linear_shift_path


class TestWaveCenter:
    def test_zero_at_reference(self, wave, table1_grid):
        ref = sample_profile(wave, table1_grid)
        assert wave_center(ref, ref, wave, table1_grid.dx) == 0.0

    def test_recovers_shift(self, wave, table1_grid):
        ref = sample_profile(wave, table1_grid)
        shifted = sample_profile(wave, table1_grid, shift=5.0)
        c = wave_center(shifted, ref, wave, table1_grid.dx)
        assert abs(c - 5.0) <= 2 * table1_grid.dx

    def test_additivity_per_cell(self, wave, table1_grid):
        ref = sample_profile(wave, table1_grid)
        bumped = ref.copy()
        bumped[17] += 0.3
        c = wave_center(bumped, ref, wave, table1_grid.dx)
        assert c == pytest.approx(0.3 * table1_grid.dx / wave.jump, abs=1e-15)

    def test_equal_states_error(self, table1_grid):
        flat = types.SimpleNamespace(u_minus=1.0, u_plus=1.0)
        with pytest.raises(ValueError):
            wave_center(np.ones(table1_grid.M), np.ones(table1_grid.M), flat,
                        table1_grid.dx)

    def test_series_starts_at_zero(self, wave, table1_grid):
        scen = RareEventSpec("displacement", wave, x0=5.0)
        path = linear_shift_path(scen, table1_grid)
        ref = sample_profile(wave, table1_grid)
        cs = center_series(path, ref)
        assert cs.centers[0] == 0.0
        assert cs.times[-1] == pytest.approx(table1_grid.T)
        # shifted-profile slices track the imposed shift
        assert abs(cs.centers[-1] - 5.0) <= 2 * table1_grid.dx


class TestCenterLaw:
    def test_zero_time(self, exp_model, table1_grid, wave):
        mean, var = analytic_center_law(0.1, 0.0, exp_model, table1_grid.dx, wave)
        assert mean == 0.0 and var == 0.0

    def test_moving_frame_mean_is_zero(self, exp_model, table1_grid, wave):
        mean, _ = analytic_center_law(0.1, 1.0, exp_model, table1_grid.dx, wave)
        assert mean == pytest.approx(0.0, abs=1e-12)

    def test_lab_frame_mean_advances(self, table1_grid):
        lab = WaveSpec(2.0, 1.0, 1.0, gamma=0.0)
        model = build_noise_model("identity", table1_grid)
        mean, _ = analytic_center_law(0.1, 2.0, model, table1_grid.dx, lab)
        assert mean == pytest.approx(3.0)

    def test_eps_scaling(self, exp_model, table1_grid, wave):
        _, v1 = analytic_center_law(0.1, 1.0, exp_model, table1_grid.dx, wave)
        _, v2 = analytic_center_law(0.2, 1.0, exp_model, table1_grid.dx, wave)
        assert v2 == pytest.approx(4.0 * v1, rel=1e-14)

    def test_variance_matches_simulation(self, wave, table1_grid, exp_model):
        # moderate-size empirical check; the full 1e5-sample version runs in
        # the acceptance suite
        scen = RareEventSpec("displacement", wave, x0=5.0)
        term = sample_terminal_states(scen, exp_model, 0.1, 20_000, seed=2718)
        ref = sample_profile(wave, table1_grid)
        centers = wave_centers(term, ref, wave, table1_grid.dx)
        _, var = analytic_center_law(0.1, table1_grid.T, exp_model,
                                     table1_grid.dx, wave)
        assert abs(centers.var() - var) / var < 0.07


class TestExitProbability:
    def test_half_at_zero_threshold(self, exp_model, table1_grid, wave):
        p = analytic_exit_probability(0.0, 1.0, 0.1, exp_model,
                                      table1_grid.dx, wave)
        assert p == 0.5

    def test_vanishes_at_infinity(self, exp_model, table1_grid, wave):
        assert analytic_exit_probability(1e6, 1.0, 0.1, exp_model,
                                         table1_grid.dx, wave) == 0.0

    def test_monotone_in_threshold_and_noise(self, exp_model, table1_grid, wave):
        args = (1.0, 0.1, exp_model, table1_grid.dx, wave)
        ps = [analytic_exit_probability(x0, *args) for x0 in (1.0, 2.0, 4.0)]
        assert ps[0] > ps[1] > ps[2] > 0
        p_small = analytic_exit_probability(2.0, 1.0, 0.05, exp_model,
                                            table1_grid.dx, wave)
        p_large = analytic_exit_probability(2.0, 1.0, 0.2, exp_model,
                                            table1_grid.dx, wave)
        assert p_small < ps[1] < p_large

    def test_small_noise_log_asymptotics(self, exp_model, table1_grid, wave):
        # eps^2 log P -> -x0^2 jump^2 / (2 T dx sum C) as eps -> 0
        x0, T, eps = 1.0, 1.0, 1e-3
        logp = analytic_exit_log_probability(x0, T, eps, exp_model,
                                             table1_grid.dx, wave)
        mass = table1_grid.dx * float(exp_model.C.sum())
        limit = -x0 ** 2 * wave.jump ** 2 / (2 * T * mass)
        # residual relative deviation ~ eps^2 log(1/eps) from the tail prefactor
        assert eps ** 2 * logp == pytest.approx(limit, rel=2e-2)

    def test_log_and_plain_forms_agree(self, exp_model, table1_grid, wave):
        p = analytic_exit_probability(2.0, 1.0, 0.15, exp_model,
                                      table1_grid.dx, wave)
        logp = analytic_exit_log_probability(2.0, 1.0, 0.15, exp_model,
                                             table1_grid.dx, wave)
        assert np.log(p) == pytest.approx(logp, rel=1e-12)

    def test_mass_relation_to_quadrature(self, exp_model, table1_grid):
        # the center law uses dx * sum C = quadrature mass / dx
        mass = total_covariance_mass(exp_model, table1_grid.dx)
        assert table1_grid.dx * float(exp_model.C.sum()) == pytest.approx(
            mass / table1_grid.dx, rel=1e-14)


class TestFitScaling:
    def test_exact_quadratic(self):
        xs = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
        coeffs, r2 = fit_scaling(xs, 2.0 * xs ** 2, "quadratic")
        assert coeffs[0] == pytest.approx(2.0, abs=1e-12)
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_exact_reciprocal(self):
        xs = np.array([1.0, 2.0, 4.0, 5.0])
        coeffs, r2 = fit_scaling(xs, 3.0 / xs, "reciprocal")
        assert coeffs[0] == pytest.approx(3.0, abs=1e-12)
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_exact_linear_with_offset(self):
        xs = np.array([1.0, 2.0, 3.0, 4.0])
        coeffs, r2 = fit_scaling(xs, 0.5 * xs + 2.0, "linear")
        assert coeffs[0] == pytest.approx(0.5, abs=1e-12)
        assert coeffs[1] == pytest.approx(2.0, abs=1e-12)
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            fit_scaling([1.0, 2.0], [1.0, 2.0], "linear")

    def test_degenerate_design(self):
        with pytest.raises(ValueError, match="degenerate"):
            fit_scaling([2.0, 2.0, 2.0], [1.0, 2.0, 3.0], "quadratic")

    def test_unknown_form(self):
        with pytest.raises(ValueError):
            fit_scaling([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], "cubic")


class TestMarginCheck:
    def test_center_of_domain_ok(self, table1_grid, wave):
        assert transition_margin_ok(0.0, table1_grid, wave)
        assert transition_margin_ok(5.0, table1_grid, wave)

    def test_near_boundary_flagged(self, table1_grid, wave):
        assert not transition_margin_ok(19.0, table1_grid, wave)
        assert not transition_margin_ok(-14.0, table1_grid, wave)


class TestNoiselessCenterDrift:
    def test_stays_within_two_cells(self, wave, table1_grid, identity_model):
        from shockld.fluxes import FixedStates, euler_step
        ref = sample_profile(wave, table1_grid)
        bc = FixedStates(wave.u_minus, wave.u_plus)
        q = ref.copy()
        worst = 0.0
        for n in range(table1_grid.N):
            q = euler_step(q, table1_grid, wave, bc, n=n)
            worst = max(worst, abs(wave_center(q, ref, wave, table1_grid.dx)))
        assert worst <= 2 * table1_grid.dx
