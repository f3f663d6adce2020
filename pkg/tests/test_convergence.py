"""Perturbed-scenario sequences and the stability experiment."""

import numpy as np
import pytest

from crackdyn import (CrackSchedule, Tensor4Field,
                      TrajectoryState, Workspace, build_sequence,
                      fixedpoint_convergence_check, run_convergence)
from crackdyn.convergence import ConvergenceReport, SequenceError
from crackdyn.tensors import apply_tensor

from conftest import bar_scenario, growing_scenario, static_scenario


def snapped_static(**overrides):
    """Static base whose tip sits on a mesh vertex: the 1/n tip offsets
    all round away, so member distances are pure tensor/data responses."""
    return static_scenario(**overrides)


class TestBuildSequence:
    def test_member_metadata_and_decay(self):
        base = growing_scenario()
        seq = build_sequence(base)
        assert [m.n for m in seq.members] == [1, 2, 4, 8]
        for m in seq.members:
            assert m.delta == pytest.approx(0.1 / m.n)
            assert m.eps == pytest.approx(1e-9 / m.n)
            assert m.config.name == f"growing-n{m.n}"
            assert m.config.schedule.tip(0.0) == pytest.approx(
                0.25 + 0.1 / m.n)
            assert m.config.h == base.h
            assert m.config.crack_points == base.crack_points
        assert seq.cert.ok and seq.cert.alpha0 > 0.0

    def test_member_tensors_are_base_plus_scaled_perturbation(self, rng):
        base = growing_scenario()
        seq = build_sequence(base)
        A = rng.standard_normal((3, 2, 2))
        for m in seq.members:
            want = apply_tensor(base.elastic, A) \
                + m.eps * apply_tensor(seq.perturbation, A)
            np.testing.assert_allclose(apply_tensor(m.config.elastic, A),
                                       want, rtol=1e-12)

    def test_member_data_scaled_pointwise(self):
        base = growing_scenario()
        seq = build_sequence(base)
        m = seq.members[1]
        x, y, t = 0.3, 0.7, 0.2
        base_val = base.f_exprs[0](x=x, y=y, t=t)
        np.testing.assert_allclose(m.config.f_exprs[0](x=x, y=y, t=t),
                                   base_val * (1.0 + m.eps), rtol=1e-12)
        # the zero component stays syntactically zero
        assert m.config.uD_exprs[0].is_zero()

    def test_needs_at_least_three_members(self):
        with pytest.raises(SequenceError):
            build_sequence(growing_scenario(), ns=(1, 2))
        with pytest.raises(SequenceError):
            build_sequence(growing_scenario(), ns=(1, -2, 4))

    def test_coercivity_loss_names_the_member(self):
        bad = Tensor4Field.isotropic(2, -3.0, -1.5)
        with pytest.raises(SequenceError, match="n=1"):
            build_sequence(growing_scenario(), data_eps=1.0,
                           perturbation=bad)

    def test_table_schedule_offsets_and_none_schedule(self):
        base = growing_scenario(
            schedule=CrackSchedule.from_table([(0.0, 0.25), (1.0, 0.4)]))
        seq = build_sequence(base)
        assert seq.members[0].config.schedule.tip(0.0) == pytest.approx(0.35)
        assert seq.members[0].config.schedule.tip(1.0) == pytest.approx(0.5)

        bar = bar_scenario()          # schedule is None: nothing to offset
        bar_seq = build_sequence(bar)
        assert all(m.config.schedule is None for m in bar_seq.members)
        assert bar_seq.perturbation.dim == 1


class TestReports:
    def test_convergence_report_properties(self):
        rep = ConvergenceReport(ns=(1, 2, 4), sup_dist=(3.0, 2.0, 2.0),
                                w_dist=(2.5, 1.5, 1.0),
                                uniform=(5.0, 4.0, 3.0),
                                base_uniform=6.0, base_norm=2.0)
        assert rep.nonincreasing
        assert rep.bound_constant == 6.0
        assert rep.rows()[1] == (2, 2.0, 1.5, 4.0)
        worse = ConvergenceReport(ns=(1, 2), sup_dist=(1.0, 2.0),
                                  w_dist=(1.0, 1.0), uniform=(1.0, 1.0),
                                  base_uniform=1.0, base_norm=1.0)
        assert not worse.nonincreasing


class TestRunConvergence:
    def test_zero_perturbation_members_reproduce_the_base(self):
        base = snapped_static(T=0.2)
        ws = Workspace(base)
        seq = build_sequence(base, tip_offset=0.0, data_eps=0.0)
        rep = run_convergence(ws, seq)
        assert rep.base_norm > 0.0
        assert max(rep.sup_dist) <= 1e-14 * max(rep.base_norm, 1.0)
        assert rep.nonincreasing

    def test_distances_decay_and_stay_uniformly_bounded(self):
        base = snapped_static(T=0.2)
        ws = Workspace(base)
        rep = run_convergence(ws, build_sequence(base))
        assert rep.nonincreasing
        assert rep.sup_dist[0] > 0.0
        assert rep.sup_dist[-1] <= 0.5 * rep.sup_dist[0]
        assert all(u <= rep.bound_constant for u in rep.uniform)
        assert np.isfinite(rep.bound_constant)


class TestMapCheck:
    def test_map_distances_decay_linearly_on_snapped_base(self):
        base = snapped_static(T=0.3)
        ws = Workspace(base)
        seq = build_sequence(base)
        rep = fixedpoint_convergence_check(ws, seq)
        d = rep.distances
        assert all(b < a for a, b in zip(d, d[1:]))
        assert rep.decay_factor >= 4.0
        assert rep.rows()[0][0] == 1

    def test_zero_probe_isolates_data_response(self):
        base = snapped_static(T=0.3)
        ws = Workspace(base)
        seq = build_sequence(base)
        times = base.dt * np.arange(base.n_steps + 1)
        spaces = [ws.space_at(t) for t in times]
        zero = TrajectoryState(
            times=times, spaces=spaces,
            u=[np.zeros(sp.n_dofs) for sp in spaces],
            v=[np.zeros(sp.n_dofs) for sp in spaces],
            grads=np.zeros((len(times), ws.mesh.n_cells, 2, 2)))
        rep = fixedpoint_convergence_check(ws, seq, probe=zero)
        assert all(x > 0.0 for x in rep.distances)
        assert rep.decay_factor >= 4.0
