"""Fixed-point solution of the problem with exponential memory.

Two routes compute the viscoelastic evolution.  The monolithic route
marches Newmark once with the memory recursion treated implicitly.
The fixed-point route iterates the solution map: feed the memory
integral of the previous iterate in as a matrix load, solve the
memory-free problem, repeat until the space-time distance between
iterates drops below tolerance.  At convergence the two routes satisfy
the identical discrete system.

The fixed-point route works on subintervals.  The memory accumulated
on finished subintervals is carried forward as a single per-cell field
whose influence decays exponentially, so each subinterval sees a
closed problem.  When the iteration contracts too slowly, the interval
count doubles and the run restarts (contraction improves linearly with
shorter horizons).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import assembly, memory as memory_mod
from .elastodynamics import (TrajectoryState, discrete_wnorm,
                             solve_elastodynamics)

_RATIO_LIMIT = 0.9
_NORM_FLOOR = 1e-300


class ContractionError(RuntimeError):
    """The Picard iteration is not contracting fast enough."""


def _data_kwargs(config):
    return dict(f_exprs=config.f_exprs, F_exprs=config.F_exprs,
                uD_exprs=config.uD_exprs)


def solve_monolithic(workspace, config):
    """One Newmark march with the implicit memory recursion."""
    return solve_elastodynamics(
        workspace, config.operative_tensor(), config.dt, config.n_steps,
        step0=0, u0_exprs=config.u0_exprs, u1_exprs=config.u1_exprs,
        viscosity=config.viscous, cg_tol=config.cg_tol,
        cg_max_iter=config.cg_max_iter, **_data_kwargs(config))


def matrix_load_table(traj, config):
    """Total per-cell matrix load along a trajectory: data F plus memory.

    This is the load the energy audit must see for a run whose memory
    field was folded into the march, so the audited balance matches the
    memory-free system the trajectory actually solves.
    """
    mesh = traj.spaces[0].mesh
    out = np.zeros((traj.n_nodes, mesh.n_cells, mesh.dim, mesh.dim))
    if config.F_exprs is not None:
        for k in range(traj.n_nodes):
            out[k] = assembly.evaluate_at_cells(
                traj.spaces[k], config.F_exprs, traj.times[k])
    if traj.memory_values is not None:
        out += traj.memory_values
    return out


def _solve_with_tables(workspace, config, tables, n_steps, step0,
                       u0_vec=None, v0_vec=None, with_data=True):
    kwargs = _data_kwargs(config) if with_data else {}
    if step0 == 0 and u0_vec is None and with_data:
        kwargs.update(u0_exprs=config.u0_exprs, u1_exprs=config.u1_exprs)
    return solve_elastodynamics(
        workspace, config.operative_tensor(), config.dt, n_steps,
        step0=step0, u0_vec=u0_vec, v0_vec=v0_vec,
        extra_cell_load=tables, cg_tol=config.cg_tol,
        cg_max_iter=config.cg_max_iter, **kwargs)


def apply_solution_map(workspace, config, w, carry=None, step0=0,
                       u0_vec=None, v0_vec=None, with_data=True):
    """One application of the solution map to the iterate w.

    The memory integral of w's gradient history (seeded with the
    carried-in value from earlier subintervals) becomes a matrix load;
    the memory-free problem is then solved on w's time grid.
    """
    tables = memory_mod.apply_T(config.viscous, w.grads, w.times,
                                value0=carry)
    return _solve_with_tables(workspace, config, tables, w.n_nodes - 1,
                              step0, u0_vec=u0_vec, v0_vec=v0_vec,
                              with_data=with_data)


def _zero_grads(workspace, n_nodes):
    mesh = workspace.mesh
    return np.zeros((n_nodes, mesh.n_cells, mesh.dim, mesh.dim))


@dataclass
class IntervalReport:
    """Per-subinterval record of the Picard iteration.

    defects lists the successive-iterate distances in order; rho is the
    largest successive quotient observed (0.0 for a one-shot interval).
    """

    t_start: float
    t_end: float
    iters: int
    defect: float
    rho: float
    defects: tuple = ()


@dataclass
class FixedPointResult:
    trajectory: TrajectoryState
    intervals: list
    n_subintervals: int
    restarts: int

    @property
    def total_iters(self):
        return sum(r.iters for r in self.intervals)


def _picard_interval(workspace, config, carry, step0, n_steps,
                     u0_vec, v0_vec, initial_rng=None):
    """Iterate the solution map on one subinterval until it settles.

    The starting iterate solves with the decaying carry field alone
    (or, with initial_rng, is random noise), so the default start is
    already exact whenever the unknown generates no memory (zero data,
    or vanishing viscous tensor).  Convergence is relative to the
    largest iterate norm seen, which keeps the test meaningful when
    the iterates decay toward the zero solution.  Raises
    ContractionError when a defect ratio reaches the limit or the
    iteration cap is hit.
    """
    times = config.dt * (step0 + np.arange(n_steps + 1))
    if initial_rng is not None:
        w = random_trajectory(workspace, times, initial_rng)
    else:
        tables0 = memory_mod.apply_T(
            config.viscous, _zero_grads(workspace, n_steps + 1),
            times, value0=carry)
        w = _solve_with_tables(workspace, config, tables0, n_steps, step0,
                               u0_vec=u0_vec, v0_vec=v0_vec)
    scale = discrete_wnorm(workspace, w)
    defects = []
    rho = 0.0
    for m in range(1, config.picard_max_iter + 1):
        w_new = apply_solution_map(workspace, config, w, carry=carry,
                                   step0=step0, u0_vec=u0_vec,
                                   v0_vec=v0_vec)
        defect = discrete_wnorm(workspace, w_new, w)
        scale = max(scale, discrete_wnorm(workspace, w_new))
        if defects and defects[-1] > 0.0:
            ratio = defect / defects[-1]
            rho = max(rho, ratio)
            if defect > config.picard_tol * max(scale, _NORM_FLOOR) \
                    and ratio >= _RATIO_LIMIT:
                raise ContractionError(
                    f"defect ratio {ratio:.3f} at iteration {m} "
                    f"(subinterval starting at t = {config.dt * step0:g})")
        defects.append(defect)
        if defect <= config.picard_tol * max(scale, _NORM_FLOOR):
            return w_new, m, rho, tuple(defects)
        w = w_new
    raise ContractionError(
        f"no convergence in {config.picard_max_iter} iterations "
        f"(subinterval starting at t = {config.dt * step0:g})")


def _concat_pieces(pieces):
    times = np.concatenate([pieces[0].times]
                           + [p.times[1:] for p in pieces[1:]])
    spaces = list(pieces[0].spaces)
    u = list(pieces[0].u)
    v = list(pieces[0].v)
    for p in pieces[1:]:
        spaces.extend(p.spaces[1:])
        u.extend(p.u[1:])
        v.extend(p.v[1:])
    grads = np.concatenate([pieces[0].grads]
                           + [p.grads[1:] for p in pieces[1:]])
    mems = np.concatenate([pieces[0].memory_values]
                          + [p.memory_values[1:] for p in pieces[1:]])
    return TrajectoryState(times=times, spaces=spaces, u=u, v=v,
                           grads=grads, memory_values=mems)


def _run_chunked(workspace, config, k, initial_rng=None):
    n_total = config.n_steps
    base, rem = divmod(n_total, k)
    sizes = [base + 1] * rem + [base] * (k - rem)
    pieces = []
    intervals = []
    carry = None
    step0 = 0
    u0_vec = None
    v0_vec = None
    for n in sizes:
        w, iters, rho, defects = _picard_interval(
            workspace, config, carry, step0, n, u0_vec, v0_vec,
            initial_rng=initial_rng)
        tables = memory_mod.apply_T(config.viscous, w.grads, w.times,
                                    value0=carry)
        w.memory_values = tables
        intervals.append(IntervalReport(
            t_start=float(w.times[0]), t_end=float(w.times[-1]),
            iters=iters, defect=defects[-1] if defects else 0.0,
            rho=rho, defects=defects))
        pieces.append(w)
        carry = tables[-1]
        u0_vec = w.u[-1]
        v0_vec = w.v[-1]
        step0 += n
    return pieces, intervals


def solve_fixedpoint(workspace, config, initial_rng=None):
    """Picard solution over [0, T], subdividing on slow contraction.

    With subintervals = "auto" the run starts on one interval and
    doubles the interval count whenever the iteration stalls; an
    integer pins the count (stalls then propagate as ContractionError).
    initial_rng replaces the default starting iterate with seeded
    noise on every subinterval — the converged result must not depend
    on it beyond the iteration tolerance.
    """
    n_total = config.n_steps
    if config.subintervals == "auto":
        k = 1
        auto = True
    else:
        k = int(config.subintervals)
        if not 1 <= k <= n_total:
            raise ValueError("subinterval count must be in [1, n_steps]")
        auto = False
    restarts = 0
    while True:
        try:
            pieces, intervals = _run_chunked(workspace, config, k,
                                             initial_rng=initial_rng)
        except ContractionError:
            if not auto or k >= n_total:
                raise
            k = min(2 * k, n_total)
            restarts += 1
            continue
        return FixedPointResult(trajectory=_concat_pieces(pieces),
                                intervals=intervals, n_subintervals=k,
                                restarts=restarts)


# ---------- Contraction measurement ----------

def random_trajectory(workspace, times, rng, schedule=None):
    """Random iterate on a time grid: free-dof noise with matching grads.

    Constrained dofs stay zero, and the stored gradients are the actual
    gradients of the nodal field, so the iterate looks like a genuine
    candidate trajectory.
    """
    spaces = []
    u = []
    v = []
    grads = []
    for t in times:
        sp = workspace.space_at(t, schedule) if schedule is not None \
            else workspace.space_at(t)
        uk = rng.standard_normal(sp.n_dofs)
        vk = rng.standard_normal(sp.n_dofs)
        mask = sp.dirichlet_dof_mask
        uk[mask] = 0.0
        vk[mask] = 0.0
        spaces.append(sp)
        u.append(uk)
        v.append(vk)
        grads.append(assembly.cell_gradients(sp, uk))
    return TrajectoryState(times=np.asarray(times, dtype=float),
                           spaces=spaces, u=u, v=v,
                           grads=np.stack(grads))


@dataclass
class ContractionSample:
    horizon: float
    rho: float
    n_steps: int


def linear_map(workspace, config, w):
    """The data-free part of the solution map (zero loads, zero start)."""
    tables = memory_mod.apply_T(config.viscous, w.grads, w.times)
    return _solve_with_tables(workspace, config, tables, w.n_nodes - 1,
                              step0=0, with_data=False)


def measure_contraction(workspace, config, horizons=None, seed=None):
    """Sampled Lipschitz factor of the solution map per time horizon.

    For each horizon, two random iterates are pushed through the
    data-free solution map; rho is the ratio of output to input
    space-time distance.  Returns ContractionSample rows in horizon
    order, deterministic for a fixed seed.
    """
    horizons = config.horizons if horizons is None else horizons
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    out = []
    for horizon in horizons:
        n = round(horizon / config.dt)
        if n < 1 or abs(n * config.dt - horizon) > 1e-9 * max(horizon, 1.0):
            raise ValueError(
                f"horizon {horizon:g} is not a multiple of dt = "
                f"{config.dt:g}")
        times = config.dt * np.arange(n + 1)
        w1 = random_trajectory(workspace, times, rng)
        w2 = random_trajectory(workspace, times, rng)
        g1 = linear_map(workspace, config, w1)
        g2 = linear_map(workspace, config, w2)
        denom = discrete_wnorm(workspace, w1, w2)
        numer = discrete_wnorm(workspace, g1, g2)
        if denom <= _NORM_FLOOR:
            raise RuntimeError("degenerate contraction sample")
        out.append(ContractionSample(horizon=float(horizon),
                                     rho=numer / denom, n_steps=n))
    return out


# ---------- Uniqueness probe ----------

@dataclass
class UniquenessProbe:
    """Decay of solution-map iterates toward the zero solution."""

    start_norm: float
    final_norm: float
    iterations: int
    converged: bool

    @property
    def reduction(self):
        return self.final_norm / max(self.start_norm, _NORM_FLOOR)


def uniqueness_probe(workspace, config, n_random=3, target=1e-10,
                     max_iter=200):
    """Iterate the data-free map from random starts; all must reach zero.

    With zero data the only fixed point is the zero trajectory, so the
    iterates' norms must decay below target * start norm.  Returns one
    probe per random start, plus a leading probe from the zero start
    (which stays identically zero).
    """
    n = config.n_steps
    times = config.dt * np.arange(n + 1)
    rng = np.random.default_rng(config.seed + 1)
    zero = TrajectoryState(
        times=times, spaces=[workspace.space_at(t) for t in times],
        u=[np.zeros(workspace.space_at(t).n_dofs) for t in times],
        v=[np.zeros(workspace.space_at(t).n_dofs) for t in times],
        grads=_zero_grads(workspace, n + 1))
    probes = []
    starts = [zero] + [random_trajectory(workspace, times, rng)
                       for _ in range(n_random)]
    for w0 in starts:
        start_norm = discrete_wnorm(workspace, w0)
        goal = target * max(start_norm, 1.0)
        w = w0
        norm = start_norm
        iters = 0
        while norm > goal and iters < max_iter:
            w = linear_map(workspace, config, w)
            norm = discrete_wnorm(workspace, w)
            iters += 1
        probes.append(UniquenessProbe(start_norm=start_norm,
                                      final_norm=norm, iterations=iters,
                                      converged=norm <= goal))
    return probes
