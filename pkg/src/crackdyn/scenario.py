"""Scenario bundle, runtime workspace, and scenario-level validation.

A ScenarioConfig collects everything one run needs: domain and mesh
size, crack path and schedule, the two material tensors, data
expressions, time discretization, solver knobs and experiment
parameters.  The Workspace realizes it: mesh, snapped path, and caches
of broken spaces and assembled matrices keyed by crack extent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry
from .expressions import Expression
from .geometry import (CrackSchedule, Domain1D, Domain2D, build_mesh,
                       build_broken_space, rounded_extent, snap_path)
from .tensors import Tensor4Field, certify_coercivity, sum_tensors


def _as_expression(e):
    if e is None or isinstance(e, Expression):
        return e
    return Expression(str(e))


def _coerce_exprs(exprs):
    """Normalize an expression table: strings become Expressions."""
    if exprs is None:
        return None
    return tuple(
        tuple(_as_expression(e) for e in entry)
        if isinstance(entry, (tuple, list)) else _as_expression(entry)
        for entry in exprs)


@dataclass
class ScenarioConfig:
    """Full description of one simulation scenario."""

    name: str = "scenario"
    domain: object = field(default_factory=Domain2D)
    h: float = 0.125
    crack_points: object = None            # polyline (2D) or break x (1D)
    schedule: object = None
    elastic: object = None
    viscous: object = None
    f_exprs: tuple = None
    F_exprs: tuple = None
    u0_exprs: tuple = None
    u1_exprs: tuple = None
    uD_exprs: tuple = None
    T: float = 1.0
    dt: float = 0.01
    cg_tol: float = 1e-12
    cg_max_iter: int = 50000
    picard_tol: float = 1e-10
    picard_max_iter: int = 200
    subintervals: object = "auto"
    h15_policy: str = "warn"               # warn | strict | off
    horizons: tuple = (0.25, 0.5, 1.0, 2.0)
    sequence_n: tuple = (1, 2, 4, 8)
    tip_offset: float = 0.1
    data_eps: float = 1e-9
    seed: int = 1234

    def __post_init__(self):
        if self.elastic is None:
            self.elastic = Tensor4Field.isotropic(self.domain.dim, 2.0, 1.0)
        if self.viscous is None:
            self.viscous = Tensor4Field.isotropic(self.domain.dim, 0.5, 0.25)
        for name in ("f_exprs", "F_exprs", "u0_exprs", "u1_exprs",
                     "uD_exprs"):
            setattr(self, name, _coerce_exprs(getattr(self, name)))
        self._operative = None

    @property
    def dim(self):
        return self.domain.dim

    @property
    def n_steps(self):
        n = round(self.T / self.dt)
        if abs(n * self.dt - self.T) > 1e-9 * max(self.T, 1.0):
            raise ValueError("T must be an integer multiple of dt")
        return int(n)

    def operative_tensor(self):
        """The tensor driving the instantaneous response: elastic + viscous.

        Cached so repeated solves share one object (matrix caches key on
        tensor identity); treat configs as immutable and derive variants
        with with_changes.
        """
        if self._operative is None:
            self._operative = sum_tensors(self.elastic, self.viscous)
        return self._operative

    def with_changes(self, **kw):
        return replace(self, **kw)


class Workspace:
    """Mesh, snapped crack, and per-extent space/matrix caches.

    Spaces are cached by rounded crack extent, so equal extents always
    return the identical object; matrices are cached per space and
    checked against the tensor object identity.
    """

    def __init__(self, config):
        self.config = config
        self.domain = config.domain
        self.schedule = config.schedule
        self.mesh = build_mesh(config.domain, config.h)
        self.snapped = None
        if config.crack_points is not None:
            if config.domain.dim == 2:
                path = geometry.CrackPath(config.crack_points, config.schedule)
                self.snapped = snap_path(self.mesh, config.domain, path)
            else:
                self.snapped = self._break_vertex(float(
                    np.ravel(config.crack_points)[0]))
        self._spaces = {}
        self._mass = {}
        self._stiff = {}

    def _break_vertex(self, x_break):
        xs = self.mesh.vertices[:, 0]
        idx = int(np.argmin(np.abs(xs - x_break)))
        if abs(xs[idx] - x_break) > 1e-9 * max(1.0, abs(x_break)):
            raise ValueError("1D break point is not a mesh vertex")
        if idx in (0, self.mesh.n_vertices - 1):
            raise ValueError("1D break point must be interior")
        return idx

    # ----- spaces -----

    def extent_at(self, t, schedule=None):
        sched = self.schedule if schedule is None else schedule
        if self.snapped is None or sched is None:
            return 0.0
        s = sched.tip(t)
        if self.mesh.dim == 1:
            return 1.0 if s > 0.0 else 0.0
        return rounded_extent(self.snapped, s)

    def space_for_extent(self, s):
        key = round(float(s), 12)
        if key not in self._spaces:
            self._spaces[key] = build_broken_space(
                self.mesh, self.domain, self.snapped, s)
        return self._spaces[key]

    def space_at(self, t, schedule=None):
        return self.space_for_extent(self.extent_at(t, schedule))

    def with_schedule(self, schedule):
        """A view sharing all caches but advancing a different schedule."""
        return _ScheduleView(self, schedule)

    # ----- matrices -----

    def mass(self, space):
        from . import assembly
        key = id(space)
        if key not in self._mass:
            self._mass[key] = assembly.assemble_mass(space)
        return self._mass[key]

    def stiffness(self, space, tensor, tag):
        from . import assembly
        key = (id(space), tag)
        hit = self._stiff.get(key)
        if hit is not None and hit[0] is tensor:
            return hit[1]
        mat = assembly.assemble_stiffness(space, tensor)
        self._stiff[key] = (tensor, mat)
        return mat


class _ScheduleView:
    """Workspace proxy with an overriding crack schedule."""

    def __init__(self, workspace, schedule):
        self._ws = workspace
        self.schedule = schedule

    def __getattr__(self, name):
        return getattr(self._ws, name)

    def extent_at(self, t, schedule=None):
        sched = self.schedule if schedule is None else schedule
        return self._ws.extent_at(t, sched)

    def space_at(self, t, schedule=None):
        return self._ws.space_for_extent(self.extent_at(t, schedule))

    def with_schedule(self, schedule):
        return _ScheduleView(self._ws, schedule)


# ---------- Validation ----------

@dataclass
class ValidationIssue:
    level: str           # "error" | "warning" | "info"
    code: str
    message: str


@dataclass
class ValidationReport:
    issues: list

    @property
    def errors(self):
        return [i for i in self.issues if i.level == "error"]

    @property
    def ok(self):
        return not self.errors

    def add(self, level, code, message):
        self.issues.append(ValidationIssue(level, code, message))


def validate_scenario(config, check_speed=True, korn_kwargs=None):
    """Run the scenario validators; returns a ValidationReport.

    Checks: tensor symmetry and coercivity for both tensors, crack
    geometry and schedule admissibility, boundary-data consistency,
    and (for a moving straight crack, when check_speed) the motion
    consistency and the crack-speed bound against the estimated Korn
    constant.  The h15 policy decides whether a speed violation is an
    error or a warning.
    """
    rep = ValidationReport(issues=[])

    cert_e = certify_coercivity(config.elastic)
    cert_v = certify_coercivity(config.viscous)
    for label, cert in (("elastic", cert_e), ("viscous", cert_v)):
        if not cert.symmetric:
            rep.add("error", "tensor-symmetry",
                    f"{label} tensor is not symmetric "
                    f"(defect {cert.symmetry_defect:.3e})")
        elif not cert.coercive:
            rep.add("error", "tensor-coercivity",
                    f"{label} tensor is not coercive "
                    f"(alpha0 = {cert.alpha0:.3e})")
        else:
            rep.add("info", "tensor-ok",
                    f"{label} tensor: alpha0 = {cert.alpha0:.6g}, "
                    f"sup bound = {cert.sup_bound:.6g}")

    if config.uD_exprs is not None and not config.domain.dirichlet:
        nonzero = any(e is not None and not e.is_zero()
                      for e in config.uD_exprs)
        if nonzero:
            rep.add("error", "dirichlet-data",
                    "boundary displacement prescribed but every boundary "
                    "edge is traction-only")

    ws = None
    try:
        ws = Workspace(config)
    except ValueError as exc:
        rep.add("error", "geometry", str(exc))

    if ws is not None and ws.snapped is not None and config.schedule \
            is not None and config.dim == 2:
        s_end = config.schedule.tip(config.T)
        if s_end > ws.snapped.length + 1e-12:
            rep.add("error", "schedule-range",
                    f"scheduled tip {s_end:.6g} exceeds path length "
                    f"{ws.snapped.length:.6g}")
        if config.schedule.tip(0.0) < 0:
            rep.add("error", "schedule-range", "negative initial extent")

    moving = (config.schedule is not None
              and config.schedule.tip(config.T)
              > config.schedule.tip(0.0) + 1e-15)
    if (check_speed and ws is not None and ws.snapped is not None
            and config.dim == 2 and moving and rep.ok):
        alpha0 = min(cert_e.alpha0, cert_v.alpha0)
        korn_kwargs = korn_kwargs or {}
        full = ws.space_for_extent(ws.snapped.length)
        korn = geometry.estimate_korn_constant(full, **korn_kwargs)
        rep.add("info", "korn",
                f"Korn constant estimate {korn.value:.6g} "
                f"({korn.iterations} iterations)")
        threshold = alpha0 / korn.value
        # sampled check on the constructed motion when one exists; the
        # schedule's Lipschitz rate is the fallback (for the stretch
        # family the two coincide at the tip), so a fast crack cannot
        # dodge the check by defeating the construction
        srep = None
        if not ws.snapped.straight:
            rep.add("warning", "motion",
                    "no constructive motion for a non-straight path; "
                    "speed checked against the schedule rate")
        else:
            try:
                motion = geometry.stretch_motion(
                    config.domain, ws.snapped, config.schedule, config.T)
            except ValueError as exc:
                rep.add("warning", "motion",
                        f"could not build a stretch motion ({exc}); "
                        f"speed checked against the schedule rate")
            else:
                mrep = geometry.check_motion_consistency(
                    motion, ws.snapped, config.schedule, config.domain,
                    config.T)
                if not mrep.ok:
                    rep.add("error", "motion",
                            "constructed motion fails consistency checks")
                srep = geometry.check_speed_condition(
                    motion, alpha0, korn.value, config.T,
                    ws.mesh.vertices)
        if srep is not None:
            vmax_sq, passed = srep.max_speed_sq, srep.passed
        else:
            vmax_sq = config.schedule.lipschitz(config.T) ** 2
            passed = vmax_sq < threshold
        if passed:
            rep.add("info", "crack-speed",
                    f"speed bound holds: max speed^2 = "
                    f"{vmax_sq:.6g} < {threshold:.6g}")
        elif config.h15_policy != "off":
            level = "error" if config.h15_policy == "strict" else "warning"
            rep.add(level, "crack-speed",
                    f"crack speed bound violated: max speed^2 = "
                    f"{vmax_sq:.6g} >= {threshold:.6g}")
    return rep
