"""Time stepping against discrete closed forms and energy audits.

Oracle: for the undamped system M u'' + K u = 0 started on a mass-
orthonormalized stiffness eigenvector phi (frequency omega), the
average-acceleration scheme reproduces exactly

    u(t_n) = cos(Omega t_n) phi,   v(t_n) = -omega sin(Omega t_n) phi,

with the discrete frequency Omega = (2/dt) atan(omega dt / 2).  The
eigenpair comes from a dense generalized eigensolve, independent of the
marching code.
"""

import numpy as np
import pytest
import scipy.linalg

from crackdyn import (CrackSchedule, Tensor4Field, Workspace,
                      apriori_bound_audit, discrete_wnorm, energy_audit,
                      solve_elastodynamics, sup_product_distance,
                      uniform_bound)
from crackdyn.assembly import lift_dirichlet

from conftest import bar_scenario, growing_scenario, static_scenario


def free_eigenpair(workspace, space, tensor, mode):
    K = workspace.stiffness(space, tensor, "main").toarray()
    M = workspace.mass(space).toarray()
    free = space.free_dofs
    w2, vecs = scipy.linalg.eigh(K[np.ix_(free, free)],
                                 M[np.ix_(free, free)])
    phi = np.zeros(space.n_dofs)
    phi[free] = vecs[:, mode]
    return float(np.sqrt(w2[mode])), phi


class TestDiscreteEigenmode:
    @pytest.mark.parametrize("mode", [0, 2])
    def test_bar_mode_matches_closed_form(self, mode):
        config = bar_scenario()
        ws = Workspace(config)
        space = ws.space_at(0.0)
        omega, phi = free_eigenpair(ws, space, config.elastic, mode)
        dt, n_steps = 0.005, 100
        traj = solve_elastodynamics(ws, config.elastic, dt, n_steps,
                                    uD_exprs=config.uD_exprs, u0_vec=phi)
        big_omega = (2.0 / dt) * np.arctan(omega * dt / 2.0)
        for k in range(n_steps + 1):
            t = traj.times[k]
            np.testing.assert_allclose(traj.u[k], np.cos(big_omega * t) * phi,
                                       rtol=0, atol=1e-9)
            np.testing.assert_allclose(
                traj.v[k], -omega * np.sin(big_omega * t) * phi,
                rtol=0, atol=1e-8)

    def test_discrete_frequency_lags_continuous(self):
        """The scheme's period error is visible and matches atan exactly."""
        config = bar_scenario()
        ws = Workspace(config)
        space = ws.space_at(0.0)
        omega, phi = free_eigenpair(ws, space, config.elastic, 3)
        dt = 0.02
        big_omega = (2.0 / dt) * np.arctan(omega * dt / 2.0)
        assert big_omega < omega  # strictly, for this mode and dt
        traj = solve_elastodynamics(ws, config.elastic, dt, 50,
                                    uD_exprs=config.uD_exprs, u0_vec=phi)
        t = traj.times[-1]
        np.testing.assert_allclose(traj.u[-1], np.cos(big_omega * t) * phi,
                                   rtol=0, atol=1e-9)
        # the continuous phase would be visibly wrong by comparison
        assert np.abs(traj.u[-1] - np.cos(omega * t) * phi).max() > 1e-3


class TestEnergy:
    def test_free_oscillation_conserves_energy(self):
        config = static_scenario(f_exprs=None)
        ws = Workspace(config)
        traj = solve_elastodynamics(ws, config.elastic, 0.01, 50,
                                    uD_exprs=config.uD_exprs,
                                    u0_exprs=config.u0_exprs)
        rep = energy_audit(traj, ws, config.elastic)
        e0 = rep.kinetic[0] + rep.elastic[0]
        assert e0 > 1e-3
        assert rep.drift <= 1e-10 * e0
        assert rep.ok

    def test_forced_growing_crack_energy_inequality(self):
        config = growing_scenario()
        ws = Workspace(config)
        traj = solve_elastodynamics(ws, config.elastic, config.dt,
                                    config.n_steps,
                                    f_exprs=config.f_exprs,
                                    uD_exprs=config.uD_exprs,
                                    u0_exprs=config.u0_exprs)
        assert len({sp.n_dofs for sp in traj.spaces}) > 1  # releases ran
        rep = energy_audit(traj, ws, config.elastic, f_exprs=config.f_exprs)
        assert rep.ok, float(np.max(rep.slack))

    def test_release_does_not_inject_energy(self):
        """Unforced run across releases: energy can only go down."""
        config = growing_scenario(f_exprs=None)
        ws = Workspace(config)
        traj = solve_elastodynamics(ws, config.elastic, config.dt,
                                    config.n_steps,
                                    uD_exprs=config.uD_exprs,
                                    u0_exprs=config.u0_exprs)
        rep = energy_audit(traj, ws, config.elastic)
        total = rep.kinetic + rep.elastic
        assert np.max(total - total[0]) <= 1e-10 * total[0]


class TestBoundaryAndInvariance:
    def test_dirichlet_values_exact_at_constrained_dofs(self):
        config = static_scenario(uD_exprs=("0.1*sin(t)", "0.05*t"))
        ws = Workspace(config)
        traj = solve_elastodynamics(ws, config.elastic, 0.01, 20,
                                    uD_exprs=config.uD_exprs,
                                    u0_exprs=config.u0_exprs)
        for k in range(traj.n_nodes):
            sp = traj.spaces[k]
            mask = sp.dirichlet_dof_mask
            want = lift_dirichlet(sp, config.uD_exprs, t=traj.times[k])
            np.testing.assert_allclose(traj.u[k][mask], want[mask],
                                       rtol=0, atol=1e-12)

    def test_rigid_translation_is_stationary(self):
        config = static_scenario(u0_exprs=("1", "2"), uD_exprs=("1", "2"),
                                 f_exprs=None)
        ws = Workspace(config)
        traj = solve_elastodynamics(ws, config.elastic, 0.01, 50,
                                    uD_exprs=config.uD_exprs,
                                    u0_exprs=config.u0_exprs)
        for k in (0, 25, 50):
            nodal = traj.u[k].reshape(-1, 2)
            np.testing.assert_allclose(nodal[:, 0], 1.0, rtol=0, atol=1e-12)
            np.testing.assert_allclose(nodal[:, 1], 2.0, rtol=0, atol=1e-12)
            np.testing.assert_allclose(traj.v[k], 0.0, rtol=0, atol=1e-12)

    def test_zero_data_yields_exact_zeros(self):
        config = bar_scenario(u0_exprs=None)
        ws = Workspace(config)
        traj = solve_elastodynamics(ws, config.elastic, 0.01, 20,
                                    uD_exprs=config.uD_exprs)
        assert all(np.all(traj.u[k] == 0.0) for k in range(traj.n_nodes))
        assert all(np.all(traj.v[k] == 0.0) for k in range(traj.n_nodes))

    def test_superposition(self, rng):
        config = bar_scenario()
        ws = Workspace(config)
        space = ws.space_at(0.0)
        a = rng.standard_normal(space.n_dofs)
        b = rng.standard_normal(space.n_dofs)
        a[space.dirichlet_dof_mask] = 0.0
        b[space.dirichlet_dof_mask] = 0.0
        run = lambda u0: solve_elastodynamics(
            ws, config.elastic, 0.01, 30, uD_exprs=config.uD_exprs, u0_vec=u0)
        ta, tb, tc = run(a), run(b), run(a + 2.0 * b)
        scale = max(np.abs(tc.u[-1]).max(), 1.0)
        for k in (10, 30):
            np.testing.assert_allclose(
                tc.u[k], ta.u[k] + 2.0 * tb.u[k], rtol=0, atol=1e-9 * scale)


class TestRestartParity:
    def test_chunked_run_matches_monolithic(self):
        config = growing_scenario()
        ws = Workspace(config)
        tensor = config.operative_tensor()
        kwargs = dict(f_exprs=config.f_exprs, uD_exprs=config.uD_exprs,
                      viscosity=config.viscous)
        full = solve_elastodynamics(ws, tensor, config.dt, 40, step0=0,
                                    u0_exprs=config.u0_exprs, **kwargs)
        first = solve_elastodynamics(ws, tensor, config.dt, 20, step0=0,
                                     u0_exprs=config.u0_exprs, **kwargs)
        second = solve_elastodynamics(ws, tensor, config.dt, 20, step0=20,
                                      u0_vec=first.u[-1], v0_vec=first.v[-1],
                                      memory_value0=first.memory_values[-1],
                                      **kwargs)
        np.testing.assert_array_equal(second.times, full.times[20:])
        scale = 1.0 + np.abs(full.u[-1]).max()
        np.testing.assert_allclose(second.u[-1], full.u[-1],
                                   rtol=0, atol=1e-10 * scale)
        np.testing.assert_allclose(second.v[-1], full.v[-1],
                                   rtol=0, atol=1e-9 * scale)
        np.testing.assert_allclose(second.memory_values[-1],
                                   full.memory_values[-1],
                                   rtol=0, atol=1e-10)


class TestAudits:
    def test_apriori_ratio_invariant_under_data_scaling(self):
        config = bar_scenario(u0_exprs=None,
                              u1_exprs=("sin(pi*x)",),
                              f_exprs=("cos(t)*x",))
        scaled = bar_scenario(u0_exprs=None,
                              u1_exprs=("10*sin(pi*x)",),
                              f_exprs=("10*cos(t)*x",))
        reports = []
        for cfg in (config, scaled):
            ws = Workspace(cfg)
            traj = solve_elastodynamics(ws, cfg.elastic, 0.01, 50,
                                        f_exprs=cfg.f_exprs,
                                        uD_exprs=cfg.uD_exprs,
                                        u1_exprs=cfg.u1_exprs)
            reports.append(apriori_bound_audit(traj, ws,
                                               f_exprs=cfg.f_exprs))
        assert not reports[0].vacuous
        assert reports[0].ratio > 0.0
        assert reports[1].sup_norm == pytest.approx(
            10.0 * reports[0].sup_norm, rel=1e-6)
        assert reports[1].ratio == pytest.approx(reports[0].ratio, rel=1e-6)

    def test_apriori_vacuous_with_zero_data(self):
        config = bar_scenario(u0_exprs=None)
        ws = Workspace(config)
        traj = solve_elastodynamics(ws, config.elastic, 0.01, 10,
                                    uD_exprs=config.uD_exprs)
        rep = apriori_bound_audit(traj, ws)
        assert rep.vacuous

    def test_trajectory_norms_and_distances(self):
        config = growing_scenario()
        ws = Workspace(config)
        traj = solve_elastodynamics(ws, config.elastic, config.dt, 50,
                                    f_exprs=config.f_exprs,
                                    uD_exprs=config.uD_exprs,
                                    u0_exprs=config.u0_exprs)
        assert discrete_wnorm(ws, traj) > 0.0
        assert discrete_wnorm(ws, traj, traj) == 0.0
        assert sup_product_distance(ws, traj, traj) == 0.0
        assert uniform_bound(ws, traj) > 0.0

        other_ws = ws.with_schedule(CrackSchedule.linear(0.5, 0.0))
        other = solve_elastodynamics(other_ws, config.elastic, config.dt, 50,
                                     f_exprs=config.f_exprs,
                                     uD_exprs=config.uD_exprs,
                                     u0_exprs=config.u0_exprs)
        d_ab = discrete_wnorm(ws, traj, other)
        d_ba = discrete_wnorm(ws, other, traj)
        assert d_ab > 0.0
        assert d_ab == pytest.approx(d_ba, rel=1e-12)

        short = solve_elastodynamics(ws, config.elastic, 0.02, 25,
                                     f_exprs=config.f_exprs,
                                     uD_exprs=config.uD_exprs,
                                     u0_exprs=config.u0_exprs)
        with pytest.raises(ValueError):
            discrete_wnorm(ws, traj, short)
