import numpy as np
import pytest

from shockld.fluxes import FixedStates, drift, euler_step
from shockld.grid import SpaceTimeGrid, WaveSpec, sample_profile
from shockld.noise import build_noise_model, unwhiten
from shockld.optimize import (RareEventSpec, _scaffold, free_mask,
                              linear_interpolation_path)
from shockld.rate import (PathMatrix, discrete_lower_bound, forcing_from_path,
                          frozen_drift_rate, rate, rate_and_gradient,
                          rate_gradient, residual, residuals)


def noiseless_path(grid, wave, q0):
    bc = FixedStates(wave.u_minus, wave.u_plus)
    rows = [q0]
    for n in range(grid.N):
        rows.append(euler_step(rows[-1], grid, wave, bc, n=n))
    return PathMatrix(np.stack(rows), grid, wave)


def perturbed_path(scen, grid, rng, amp=0.03):
    q = _scaffold(scen, grid, free_terminal=False)
    mask = free_mask(scen, grid, free_terminal=False)
    base = linear_interpolation_path(scen, grid).q
    q[mask] = base[mask] + amp * rng.standard_normal(int(mask.sum()))
    return PathMatrix(q, grid, scen.wave)


@pytest.fixture
def single_step_setup():
    # one step, two interior cells, dx = 0.5, dt = 0.05
    grid = SpaceTimeGrid.from_spacing(0.0, 2.0, 0.5, 0.05, 0.05)
    wave = WaveSpec(2.0, 1.0, 1.0, gamma=1.5)
    model = build_noise_model("identity", grid)
    q = np.full((2, 4), 1.5)
    q[1, 1] += 0.1  # residual (0.1/dt, 0) = (2, 0)
    return PathMatrix(q, grid, wave), model


class TestResidual:
    def test_zero_on_noiseless_trajectory(self, table1_grid, wave):
        q0 = sample_profile(wave, table1_grid)
        path = noiseless_path(table1_grid, wave, q0)
        assert np.max(np.abs(residuals(path))) < 1e-12

    def test_single_perturbation_arithmetic(self, single_step_setup):
        path, _ = single_step_setup
        assert np.allclose(residual(path, 0), [2.0, 0.0], atol=1e-12)

    def test_step_index_bounds(self, single_step_setup):
        path, _ = single_step_setup
        with pytest.raises(ValueError):
            residual(path, 1)

    def test_affine_in_next_slice(self, table1_grid, wave):
        rng = np.random.default_rng(10)
        scen = RareEventSpec("displacement", wave, x0=5.0)
        a = perturbed_path(scen, table1_grid, rng)
        b = a.copy()
        b.q[3] = a.q[3] + 0.1 * rng.standard_normal(table1_grid.M)
        mid = a.copy()
        mid.q[3] = 0.5 * (a.q[3] + b.q[3])
        # paths share slice 2; residual at n=2 is affine in slice 3
        assert np.allclose(residual(mid, 2),
                           0.5 * (residual(a, 2) + residual(b, 2)), atol=1e-12)


class TestRate:
    def test_zero_iff_deterministic(self, table1_grid, wave, identity_model):
        q0 = sample_profile(wave, table1_grid)
        path = noiseless_path(table1_grid, wave, q0)
        assert rate(path, identity_model) < 1e-24
        bumped = path.copy()
        bumped.q[2, 10] += 1e-3
        assert rate(bumped, identity_model) > 0

    def test_single_step_value(self, single_step_setup):
        path, model = single_step_setup
        assert rate(path, model) == pytest.approx(0.05, abs=1e-15)

    def test_sigma_doubling_quarters_the_rate(self, table1_grid, wave):
        rng = np.random.default_rng(11)
        scen = RareEventSpec("displacement", wave, x0=5.0)
        path = perturbed_path(scen, table1_grid, rng)
        m1 = build_noise_model("exponential", table1_grid, sigma=1.0, l_c=5.0)
        m2 = build_noise_model("exponential", table1_grid, sigma=2.0, l_c=5.0)
        assert rate(path, m2) == pytest.approx(rate(path, m1) / 4.0, rel=1e-14)


class TestRateGradient:
    def test_zero_at_deterministic_path(self, table1_grid, wave, exp_model):
        q0 = sample_profile(wave, table1_grid)
        path = noiseless_path(table1_grid, wave, q0)
        _, grad = rate_and_gradient(path, exp_model)
        assert np.max(np.abs(grad)) < 1e-10

    @pytest.mark.parametrize("noise_kind", ["identity", "exponential"])
    def test_matches_central_differences(self, table1_grid, wave, noise_kind):
        model = build_noise_model(noise_kind, table1_grid, sigma=1.0, l_c=5.0) \
            if noise_kind == "exponential" else build_noise_model("identity", table1_grid)
        rng = np.random.default_rng(12)
        scen = RareEventSpec("displacement", wave, x0=5.0)
        path = perturbed_path(scen, table1_grid, rng)
        _, grad = rate_and_gradient(path, model)
        scale = np.max(np.abs(grad))
        for _ in range(30):
            n = int(rng.integers(1, table1_grid.N))
            m = int(rng.integers(1, table1_grid.M - 1))
            h = 1e-6
            qp, qm = path.q.copy(), path.q.copy()
            qp[n, m] += h
            qm[n, m] -= h
            fd = (rate(PathMatrix(qp, table1_grid, wave), model)
                  - rate(PathMatrix(qm, table1_grid, wave), model)) / (2 * h)
            assert abs(fd - grad[n, m]) <= 1e-5 * max(abs(fd), 1e-3 * scale)

    def test_locality_of_terminal_perturbation(self, table1_grid, wave,
                                               identity_model):
        rng = np.random.default_rng(13)
        scen = RareEventSpec("displacement", wave, x0=5.0)
        path = perturbed_path(scen, table1_grid, rng)
        _, g0 = rate_and_gradient(path, identity_model)
        m = 30
        N = table1_grid.N
        path.q[N, m] += 0.01
        _, g1 = rate_and_gradient(path, identity_model)
        changed = np.argwhere(np.abs(g1 - g0) > 1e-14)
        for n, j in changed:
            assert n in (N - 1, N)
            assert abs(j - m) <= 1

    def test_free_mask_selection(self, table1_grid, wave, identity_model):
        rng = np.random.default_rng(14)
        scen = RareEventSpec("displacement", wave, x0=5.0)
        path = perturbed_path(scen, table1_grid, rng)
        mask = free_mask(scen, table1_grid, free_terminal=False)
        g = rate_gradient(path, identity_model, mask)
        _, full = rate_and_gradient(path, identity_model)
        assert np.array_equal(g, full[mask])


class TestForcingFromPath:
    def test_zero_for_deterministic(self, table1_grid, wave, exp_model):
        q0 = sample_profile(wave, table1_grid)
        path = noiseless_path(table1_grid, wave, q0)
        assert np.max(np.abs(forcing_from_path(path, exp_model))) < 1e-13

    def test_replay_reproduces_interior(self, table1_grid, wave, exp_model):
        rng = np.random.default_rng(15)
        scen = RareEventSpec("displacement", wave, x0=5.0)
        path = perturbed_path(scen, table1_grid, rng)
        h = forcing_from_path(path, exp_model)
        tilt = unwhiten(exp_model, h)
        bc = FixedStates(wave.u_minus, wave.u_plus)
        q = path.q[0].copy()
        for n in range(table1_grid.N):
            q = euler_step(q, table1_grid, wave, bc, forcing=tilt[n], n=n)
            assert np.max(np.abs(q[1:-1] - path.q[n + 1, 1:-1])) < 1e-12

    def test_rate_identity(self, table1_grid, wave, exp_model):
        rng = np.random.default_rng(16)
        scen = RareEventSpec("displacement", wave, x0=5.0)
        path = perturbed_path(scen, table1_grid, rng)
        h = forcing_from_path(path, exp_model)
        lhs = table1_grid.dx / (2 * table1_grid.dt) * float(np.sum(h * h))
        assert lhs == pytest.approx(rate(path, exp_model), rel=1e-12)


class TestDiscreteLowerBound:
    def test_zero_for_deterministic(self, table1_grid, wave, exp_model):
        q0 = sample_profile(wave, table1_grid)
        path = noiseless_path(table1_grid, wave, q0)
        assert discrete_lower_bound(path, exp_model) < 1e-24

    def test_single_step_value(self, single_step_setup):
        path, model = single_step_setup
        assert discrete_lower_bound(path, model) == pytest.approx(0.025, abs=1e-15)
        assert discrete_lower_bound(path, model) <= rate(path, model)

    @pytest.mark.parametrize("noise_kind", ["identity", "exponential"])
    def test_never_exceeds_rate(self, table1_grid, wave, noise_kind):
        model = build_noise_model(noise_kind, table1_grid, sigma=1.0, l_c=5.0) \
            if noise_kind == "exponential" else build_noise_model("identity", table1_grid)
        scen = RareEventSpec("displacement", wave, x0=5.0)
        rng = np.random.default_rng(17)
        for _ in range(20):
            path = perturbed_path(scen, table1_grid, rng,
                                  amp=float(rng.uniform(0.005, 0.1)))
            assert discrete_lower_bound(path, model) <= rate(path, model) + 1e-12


class TestFrozenDriftRate:
    def test_exactly_quadratic_midpoint(self, table1_grid, wave, identity_model):
        rng = np.random.default_rng(18)
        scen = RareEventSpec("displacement", wave, x0=5.0)
        center = perturbed_path(scen, table1_grid, rng)
        b0 = drift(center.q[0], table1_grid, wave)
        for _ in range(20):
            pa = center.copy()
            pb = center.copy()
            pa.q += 0.01 * rng.standard_normal(pa.q.shape)
            pb.q += 0.01 * rng.standard_normal(pb.q.shape)
            mid = PathMatrix(0.5 * (pa.q + pb.q), table1_grid, wave)
            fa = frozen_drift_rate(pa, identity_model, b0)
            fb = frozen_drift_rate(pb, identity_model, b0)
            fm = frozen_drift_rate(mid, identity_model, b0)
            assert fm <= 0.5 * (fa + fb) + 1e-12
