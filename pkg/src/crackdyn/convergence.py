"""Continuous-dependence experiment: perturbed cracks, tensors, data.

A sequence of scenarios indexed by n perturbs the base scenario with
amplitudes decaying like 1/n: the crack-tip schedule is offset by
delta0/n (perturbed tips snap to mesh vertices, so every member's
crack is a sub-seam of one master seam and trajectories compare in a
common space), both material tensors gain eps0/n times a fixed
positive perturbation, and the data expressions are scaled by
(1 + eps0/n).  Solving every member and measuring distances to the
base solution realizes the stability statement as a table; the map
check compares each member's solution map to the base map on a single
probe iterate, which isolates the mechanism the stability proof rests
on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import viscoelastic
from .elastodynamics import (discrete_wnorm, sup_product_distance,
                             uniform_bound)
from .expressions import Expression
from .geometry import CrackSchedule
from .tensors import Tensor4Field, certify_coercivity, sum_tensors


class SequenceError(ValueError):
    """A perturbed member fails validation; names the member index."""


def _offset_schedule(schedule, delta):
    if schedule is None or delta == 0.0:
        return schedule
    if schedule.kind == "linear":
        return CrackSchedule.linear(schedule.s0 + delta, schedule.speed)
    table = schedule.table.copy()
    table[:, 1] = table[:, 1] + delta
    return CrackSchedule.from_table(table)


def _scale_exprs(exprs, eps):
    """Scale every expression by (1 + eps); handles nested tables."""
    if exprs is None or eps == 0.0:
        return exprs
    out = []
    for e in exprs:
        if e is None:
            out.append(None)
        elif isinstance(e, (tuple, list)):
            out.append(_scale_exprs(e, eps))
        elif e.is_zero():
            out.append(e)
        else:
            out.append(Expression(f"({e.source})*(1+{eps!r})"))
    return tuple(out)


@dataclass
class SequenceMember:
    n: int
    eps: float
    delta: float
    config: object


@dataclass
class SequenceCert:
    """Uniform-hypothesis record shared by every member."""

    alpha0: float
    sup_bound: float

    @property
    def ok(self):
        return self.alpha0 > 0.0 and np.isfinite(self.sup_bound)


@dataclass
class ScenarioSequence:
    base: object
    members: list
    perturbation: Tensor4Field
    cert: SequenceCert


def build_sequence(base, ns=None, tip_offset=None, data_eps=None,
                   perturbation=None):
    """Perturbed scenario family with 1/n decay; validates each member.

    Every member keeps the base mesh, path, and solver settings.  The
    shared coercivity constant (the minimum over members and both
    tensors) and the shared sup bound are certified and returned; a
    member that loses coercivity or monotonicity raises SequenceError
    naming its index.
    """
    ns = tuple(base.sequence_n if ns is None else ns)
    if len(ns) < 3:
        raise SequenceError("need at least 3 sequence members")
    if any(n <= 0 for n in ns):
        raise SequenceError("sequence indices must be positive")
    tip_offset = base.tip_offset if tip_offset is None else tip_offset
    data_eps = base.data_eps if data_eps is None else data_eps
    if perturbation is None:
        perturbation = Tensor4Field.isotropic(base.dim, 1.0, 0.5)

    alpha0 = np.inf
    sup_bound = 0.0
    for tensor in (base.elastic, base.viscous):
        cert = certify_coercivity(tensor)
        alpha0 = min(alpha0, cert.alpha0)
        sup_bound = max(sup_bound, cert.sup_bound)

    members = []
    for n in ns:
        eps = data_eps / n
        delta = tip_offset / n
        try:
            schedule = _offset_schedule(base.schedule, delta)
        except ValueError as exc:
            raise SequenceError(f"member n={n}: {exc}") from exc
        elastic = sum_tensors(base.elastic, perturbation.scaled(eps))
        viscous = sum_tensors(base.viscous, perturbation.scaled(eps))
        for label, tensor in (("elastic", elastic), ("viscous", viscous)):
            cert = certify_coercivity(tensor)
            if not cert.ok:
                raise SequenceError(
                    f"member n={n}: perturbed {label} tensor loses "
                    f"coercivity (alpha0 = {cert.alpha0:.3e})")
            alpha0 = min(alpha0, cert.alpha0)
            sup_bound = max(sup_bound, cert.sup_bound)
        cfg = base.with_changes(
            name=f"{base.name}-n{n}", schedule=schedule,
            elastic=elastic, viscous=viscous,
            f_exprs=_scale_exprs(base.f_exprs, eps),
            F_exprs=_scale_exprs(base.F_exprs, eps),
            u0_exprs=_scale_exprs(base.u0_exprs, eps),
            u1_exprs=_scale_exprs(base.u1_exprs, eps),
            uD_exprs=_scale_exprs(base.uD_exprs, eps))
        members.append(SequenceMember(n=n, eps=eps, delta=delta, config=cfg))
    return ScenarioSequence(base=base, members=members,
                            perturbation=perturbation,
                            cert=SequenceCert(alpha0=float(alpha0),
                                              sup_bound=float(sup_bound)))


@dataclass
class ConvergenceReport:
    """Distance table of the member solutions against the base solution."""

    ns: tuple
    sup_dist: tuple
    w_dist: tuple
    uniform: tuple
    base_uniform: float
    base_norm: float

    @property
    def bound_constant(self):
        return max(self.uniform + (self.base_uniform,))

    @property
    def nonincreasing(self):
        return all(b <= a for a, b in zip(self.sup_dist, self.sup_dist[1:]))

    def rows(self):
        return [(n, s, w, u) for n, s, w, u in
                zip(self.ns, self.sup_dist, self.w_dist, self.uniform)]


def run_convergence(workspace, sequence):
    """Solve base and members; measure distances in the common spaces.

    Members run through the same fixed-point solver on schedule views
    of the shared workspace, so equal crack extents reuse identical
    space objects and the per-node comparisons embed smaller spaces
    into larger ones by tied values.
    """
    base_traj = viscoelastic.solve_fixedpoint(
        workspace, sequence.base).trajectory
    sup_d = []
    w_d = []
    uni = []
    for member in sequence.members:
        view = workspace.with_schedule(member.config.schedule)
        try:
            traj = viscoelastic.solve_fixedpoint(
                view, member.config).trajectory
        except Exception as exc:
            raise RuntimeError(f"member n={member.n} failed: {exc}") from exc
        sup_d.append(sup_product_distance(workspace, traj, base_traj))
        w_d.append(discrete_wnorm(workspace, traj, base_traj))
        uni.append(uniform_bound(workspace, traj))
    return ConvergenceReport(
        ns=tuple(m.n for m in sequence.members),
        sup_dist=tuple(sup_d), w_dist=tuple(w_d), uniform=tuple(uni),
        base_uniform=uniform_bound(workspace, base_traj),
        base_norm=discrete_wnorm(workspace, base_traj))


@dataclass
class MapCheckReport:
    """Distances of the member solution maps to the base map on a probe."""

    ns: tuple
    distances: tuple

    @property
    def decay_factor(self):
        first = self.distances[0]
        last = self.distances[-1]
        return first / max(last, 1e-300)

    def rows(self):
        return list(zip(self.ns, self.distances))


def fixedpoint_convergence_check(workspace, sequence, probe=None):
    """Apply each member's solution map to one probe; distances to base.

    The probe defaults to a seeded random iterate on the base grid.  A
    probe of zero isolates the pure data-perturbation response of the
    maps.
    """
    base = sequence.base
    times = base.dt * np.arange(base.n_steps + 1)
    if probe is None:
        rng = np.random.default_rng(base.seed + 2)
        probe = viscoelastic.random_trajectory(workspace, times, rng)
    g_base = viscoelastic.apply_solution_map(workspace, base, probe)
    dists = []
    for member in sequence.members:
        view = workspace.with_schedule(member.config.schedule)
        g_n = viscoelastic.apply_solution_map(view, member.config, probe)
        dists.append(discrete_wnorm(workspace, g_n, g_base))
    return MapCheckReport(ns=tuple(m.n for m in sequence.members),
                          distances=tuple(dists))
