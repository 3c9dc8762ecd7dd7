from dataclasses import replace

import numpy as np
import pytest

from burgersbench import qtn
from burgersbench.classical import (
    FdOperators,
    clip_to_horizon,
    explicit_rk4_step,
    reference_solution,
    run_explicit,
)
from burgersbench.core import (
    SimConfig,
    VelocityField,
    cfl_timestep,
    initial_condition,
    make_grid,
    relative_l2_error,
)
from burgersbench.mps import TruncationPolicy, mps_from_vector, mps_to_vector
from burgersbench.qtn import (
    EntanglementOverflowError,
    qtn_depth_proxy,
    qtn_init,
    qtn_operators,
    qtn_rhs,
    qtn_rk4_step,
    qtn_run,
)

EXACT = TruncationPolicy.exact()


def dense_rhs(u, nu, grid):
    ops = FdOperators(grid)
    return -u * ops.gradient(u) + nu * ops.diffusion(u)


class TestRhs:
    def test_constant_periodic_is_zero(self):
        grid = make_grid(32, periodic=True)
        u = mps_from_vector(np.full(32, 0.8))
        out = mps_to_vector(qtn_rhs(u, 0.01, qtn_operators(grid), EXACT))
        assert np.max(np.abs(out)) <= 1e-9

    def test_linear_ramp_interior(self):
        grid = make_grid(32)
        x = grid.coords
        out = mps_to_vector(qtn_rhs(mps_from_vector(x), 0.01, qtn_operators(grid), EXACT))
        np.testing.assert_allclose(out[1:-1], -x[1:-1], atol=1e-10)

    def test_random_against_dense(self):
        grid = make_grid(32)
        u = np.random.default_rng(0).standard_normal(32)
        out = mps_to_vector(qtn_rhs(mps_from_vector(u), 0.02, qtn_operators(grid), EXACT))
        expected = dense_rhs(u, 0.02, grid)
        assert np.linalg.norm(out - expected) <= 1e-10 * np.linalg.norm(expected)


class TestStep:
    def test_fixed_point(self):
        u0 = VelocityField(make_grid(16), np.full(16, 0.4))
        qs = qtn_init(u0, 0.01, EXACT, (0.4, 0.4))
        out = qtn_rk4_step(qs, 1e-3)
        np.testing.assert_allclose(out.field().values, 0.4, atol=1e-10)

    def test_ten_steps_match_dense_rk4(self):
        cfg = SimConfig()
        grid = make_grid(32)
        u = initial_condition("step", grid, cfg)
        qs = qtn_init(u, cfg.viscosity, EXACT, (1.0, 0.0))
        for _ in range(10):
            dt = cfl_timestep(u, cfg.viscosity, cfg.cfl_coefficient)
            u = explicit_rk4_step(u, dt, cfg.viscosity, (1.0, 0.0))
            qs = qtn_rk4_step(qs, dt)
            assert relative_l2_error(qs.field(), u)[0] <= 1e-8

    def test_telemetry_shape(self):
        cfg = SimConfig(total_time=0.02)
        policy = TruncationPolicy(chi_max=3)
        _, telemetry = qtn_run(cfg, 64, policy)
        times = [r.time for r in telemetry]
        assert times[0] == 0.0 and np.all(np.diff(times) > 0)
        assert times[-1] == pytest.approx(0.02, abs=1e-14)
        assert all(max(r.bond_dims) <= 3 for r in telemetry)
        dropped = [r.discarded_weight for r in telemetry]
        assert np.all(np.diff(dropped) >= 0)

    def test_overflow_guard(self, monkeypatch):
        monkeypatch.setattr(qtn, "BOND_HARD_CAP", 3)
        u0 = initial_condition("step", make_grid(32), SimConfig())
        qs = qtn_init(u0, 0.01, TruncationPolicy(chi_max=4), (1.0, 0.0))
        with pytest.raises(EntanglementOverflowError, match="hard cap"):
            qtn_rk4_step(qs, 1e-3)


class TestRun:
    def test_zero_horizon(self):
        cfg = SimConfig(total_time=0.0)
        u, telemetry = qtn_run(cfg, 16)
        expected = initial_condition("step", make_grid(16), cfg)
        np.testing.assert_array_equal(u.values, expected.values)
        assert len(telemetry) == 1

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            qtn_run(SimConfig(), 24)

    def test_exact_policy_matches_dense_trajectory(self):
        cfg = SimConfig(total_time=0.05)
        trajectory = []
        run_explicit(cfg, 64, callback=lambda u, t, dt: trajectory.append(u))
        u = initial_condition("step", make_grid(64), cfg)
        qs = qtn_init(u, cfg.viscosity, EXACT, (1.0, 0.0))
        for dense in trajectory:
            dt = cfl_timestep(qs.field(), cfg.viscosity, cfg.cfl_coefficient)
            qs = qtn_rk4_step(qs, clip_to_horizon(dt, cfg.total_time - qs.t))
            assert relative_l2_error(qs.field(), dense)[0] <= 1e-8

    def test_large_viscosity_sine(self):
        # C=0.5 stays inside the RK4 diffusive stability limit (~0.69) and keeps
        # the run to ~1600 steps; a 512-node reference is resolved at nu=0.5
        cfg = SimConfig(ic_kind="sine", viscosity=0.5, cfl_coefficient=0.5)
        u, _ = qtn_run(cfg, 128)
        ref = reference_solution(cfg, 128, n_ref=512)
        assert relative_l2_error(u, ref)[0] <= 1e-3

    def test_low_chi_is_worse(self):
        cfg = SimConfig()
        ref = reference_solution(cfg, 128)
        low, _ = qtn_run(cfg, 128, TruncationPolicy(chi_max=2), dt_max=0.005)
        high, _ = qtn_run(cfg, 128, TruncationPolicy(chi_max=16), dt_max=0.005)
        assert relative_l2_error(low, ref)[0] > relative_l2_error(high, ref)[0]

    def test_mass_change_matches_boundary_inflow(self):
        # pinned u_L=1, u_R=0 feed mass at rate (u_L^2 - u_R^2) / 2
        cfg = SimConfig()
        _, telemetry = qtn_run(cfg, 64, dt_max=0.005)
        gained = telemetry[-1].conservation.mass - telemetry[0].conservation.mass
        inflow = 0.5 * cfg.total_time
        assert abs(gained - inflow) / inflow < 0.05

    def test_periodic_problem(self):
        cfg = replace(SimConfig(ic_kind="sine", total_time=0.02), periodic=True)
        u, _ = qtn_run(cfg, 32, EXACT)
        dense = run_explicit(cfg, 32)
        assert relative_l2_error(u, dense)[0] <= 1e-8


class TestDepthProxy:
    @pytest.mark.parametrize("n, depth", [(128, 1408), (4, 44)])
    def test_values(self, n, depth):
        assert qtn_depth_proxy(n) == depth

    def test_paper_endpoint(self):
        assert abs(qtn_depth_proxy(128) - 1400) / 1400 < 0.01

    @pytest.mark.parametrize("n", [0, 1])
    def test_rejects_degenerate(self, n):
        with pytest.raises(ValueError):
            qtn_depth_proxy(n)
