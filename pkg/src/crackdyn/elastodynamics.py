"""Newmark time stepping on a growing-crack space family.

The stepper advances M u'' + K u = load on the broken P1 spaces of a
prescribed crack, with the average-acceleration Newmark scheme
(beta = 1/4, gamma = 1/2).  At a time node where the discrete crack
extent grows, the state is transferred by the nested-space inclusion
(newly duplicated nodes inherit the tied value and velocity, so the
displacement field is unchanged as a function and the transfer is
energy-neutral), and the matrices are reassembled on the larger space.

With a viscosity tensor the stepper also carries the exponential
memory integral and treats it implicitly: the trapezoid half-weight of
the unknown strain moves into an augmented stiffness
K - (dt/2) K_V, the rest of the memory enters the load.  Dirichlet
values are enforced exactly through the predictor inversion
a_c = (u_D(t_{k+1}) - predictor)/(beta dt^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import assembly, memory as memory_mod
from .geometry import space_inclusion_map, prolong

_BETA = 0.25
_GAMMA = 0.5


@dataclass
class TrajectoryState:
    """A discrete trajectory: dofs, velocities, gradients per time node.

    spaces[k] is the broken space the node-k vectors live in; grads
    holds the per-cell displacement gradient Du (full matrix), which is
    well-defined across releases because the cell set never changes.
    memory_values is present for runs that carried the memory integral.
    """

    times: np.ndarray
    spaces: list
    u: list
    v: list
    grads: np.ndarray
    memory_values: np.ndarray = None

    @property
    def n_nodes(self):
        return len(self.times)

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])


class _MatrixCache:
    """Per-space assembled matrices for one solve."""

    def __init__(self, workspace):
        self.ws = workspace
        self._local = {}

    def mass(self, space):
        return self.ws.mass(space)

    def stiffness(self, space, tensor, tag):
        return self.ws.stiffness(space, tensor, tag)

    def effective(self, space, tensor, tag, dt, viscosity=None):
        key = (id(space), tag, dt)
        if key not in self._local:
            K = self.stiffness(space, tensor, tag)
            if viscosity is not None:
                K = K - 0.5 * dt * self.stiffness(space, viscosity, "visc")
            A = (self.mass(space) + _BETA * dt * dt * K).tocsr()
            free = space.free_dofs
            self._local[key] = (K, A, A[free][:, free].tocsr())
        return self._local[key]


def _node_values(space, exprs, t):
    if exprs is None:
        return np.zeros((space.n_nodes, space.dim))
    return assembly.evaluate_at_nodes(space, exprs, t=t)


def _cell_values(space, exprs, t):
    if exprs is None:
        return np.zeros((space.mesh.n_cells, space.dim, space.dim))
    return assembly.evaluate_at_cells(space, exprs, t=t)


def solve_elastodynamics(workspace, tensor, dt, n_steps, t0=0.0,
                         step0=None,
                         f_exprs=None, F_exprs=None, uD_exprs=None,
                         u0_exprs=None, u1_exprs=None,
                         u0_vec=None, v0_vec=None,
                         extra_cell_load=None, viscosity=None,
                         memory_value0=None,
                         cg_tol=1e-12, cg_max_iter=50000):
    """Newmark solve over n_steps uniform steps starting at t0.

    When step0 is given, node times are dt * (step0 + k), which keeps
    them bit-identical with a single run over the full grid (a restart
    at t0 = step0 * dt reproduces the same floats).  Initial data comes
    from u0_exprs/u1_exprs or, for a restart, from the dof vectors
    u0_vec/v0_vec in the space at t0.  extra_cell_load is a per-node
    per-cell matrix load added to F (shape
    (n_steps+1, n_cells, dim, dim)); viscosity switches on the
    implicit memory term with optional carried-in integral
    memory_value0.  Returns a TrajectoryState.
    """
    ws = workspace
    cache = _MatrixCache(ws)
    if step0 is not None:
        times = dt * (step0 + np.arange(n_steps + 1))
    else:
        times = t0 + dt * np.arange(n_steps + 1)
    space = ws.space_at(times[0])
    dim = space.dim

    u = np.zeros(space.n_dofs) if u0_vec is None else \
        np.array(u0_vec, dtype=float)
    v = np.zeros(space.n_dofs) if v0_vec is None else \
        np.array(v0_vec, dtype=float)
    if u0_vec is None and u0_exprs is not None:
        u = _node_values(space, u0_exprs, times[0]).reshape(-1)
    if v0_vec is None and u1_exprs is not None:
        v = _node_values(space, u1_exprs, times[0]).reshape(-1)
    # boundary values win at constrained dofs
    if uD_exprs is not None:
        mask = space.dirichlet_dof_mask
        u[mask] = assembly.lift_dirichlet(space, uD_exprs, t=times[0])[mask]

    grads0 = assembly.cell_gradients(space, u)
    acc = None
    if viscosity is not None:
        acc = memory_mod.init_memory(viscosity, grads0,
                                     value0=memory_value0)

    K, A_eff, A_ff = cache.effective(space, tensor, "main", dt,
                                     viscosity=viscosity)
    M = cache.mass(space)

    def load_vector(space_k, k, mem_cells=None):
        b = assembly.assemble_body_load(
            space_k, _node_values(space_k, f_exprs, times[k]))
        F_cells = _cell_values(space_k, F_exprs, times[k])
        if extra_cell_load is not None:
            F_cells = F_cells + extra_cell_load[k]
        if mem_cells is not None:
            F_cells = F_cells + mem_cells
        b += assembly.assemble_matrix_load(space_k, F_cells)
        return b

    def boundary_accel(space_k, k):
        if uD_exprs is None:
            return np.zeros(space_k.n_dofs)
        t = times[k]
        lift_p = assembly.lift_dirichlet(space_k, uD_exprs, t=t + dt)
        lift_0 = assembly.lift_dirichlet(space_k, uD_exprs, t=t)
        lift_m = assembly.lift_dirichlet(space_k, uD_exprs, t=t - dt)
        return (lift_p - 2.0 * lift_0 + lift_m) / (dt * dt)

    # consistent initial acceleration from the balance at t0
    mem0 = acc.value if acc is not None else None
    b0 = load_vector(space, 0, mem_cells=mem0)
    K_bal = K if viscosity is None else cache.stiffness(space, tensor, "main")
    a = boundary_accel(space, 0)
    free = space.free_dofs
    rhs0 = b0 - K_bal @ u - M @ a
    a[free] = assembly.cg_solve(M[free][:, free].tocsr(), rhs0[free],
                                tol=cg_tol, max_iter=cg_max_iter)

    us = [u]
    vs = [v]
    grads = [grads0]
    mems = [acc.value.copy()] if acc is not None else None

    warm = None
    for k in range(n_steps):
        t_new = times[k + 1]
        space_new = ws.space_at(t_new)
        if space_new is not space:
            parent = space_inclusion_map(space, space_new)
            u = prolong(parent, u, dim)
            v = prolong(parent, v, dim)
            a = prolong(parent, a, dim)
            space = space_new
            K, A_eff, A_ff = cache.effective(space, tensor, "main", dt,
                                             viscosity=viscosity)
            M = cache.mass(space)
            free = space.free_dofs
            warm = None

        u_pred = u + dt * v + dt * dt * (0.5 - _BETA) * a
        v_pred = v + dt * (1.0 - _GAMMA) * a

        a_new = np.zeros(space.n_dofs)
        if uD_exprs is not None:
            mask = space.dirichlet_dof_mask
            lift = assembly.lift_dirichlet(space, uD_exprs, t=t_new)
            a_new[mask] = (lift[mask] - u_pred[mask]) / (_BETA * dt * dt)

        mem_known = None
        if acc is not None:
            decay = np.exp(-dt)
            mem_known = decay * acc.value + 0.5 * dt * decay * \
                acc.last_applied
        b = load_vector(space, k + 1, mem_cells=mem_known)

        rhs = b - K @ u_pred - A_eff @ a_new
        a_new[free] = assembly.cg_solve(A_ff, rhs[free], x0=warm,
                                        tol=cg_tol, max_iter=cg_max_iter)
        warm = a_new[free].copy()

        u = u_pred + _BETA * dt * dt * a_new
        v = v_pred + _GAMMA * dt * a_new
        a = a_new
        g = assembly.cell_gradients(space, u)
        if acc is not None:
            memory_mod.step_memory(acc, g, dt)
            mems.append(acc.value.copy())
        us.append(u)
        vs.append(v)
        grads.append(g)

    spaces = [ws.space_at(t) for t in times]
    return TrajectoryState(times=times, spaces=spaces, u=us, v=vs,
                           grads=np.stack(grads),
                           memory_values=(np.stack(mems)
                                          if mems is not None else None))


# ---------- Energy accounting ----------

@dataclass
class EnergyReport:
    """Discrete energy balance along a trajectory.

    slack[k] = E_k - E_0 - W_k must stay below tol_energy; drift is
    max |E_k - E_0| (meaningful for unforced runs).
    """

    times: np.ndarray
    kinetic: np.ndarray
    elastic: np.ndarray
    work: np.ndarray
    slack: np.ndarray
    tol_energy: float

    @property
    def ok(self):
        return bool(np.max(self.slack) <= self.tol_energy)

    @property
    def drift(self):
        total = self.kinetic + self.elastic
        return float(np.max(np.abs(total - total[0])))


def energy_audit(traj, workspace, tensor, f_exprs=None, F_table=None,
                 tol_energy=None):
    """Energy inequality audit: E(t) <= E(0) + W(t) + tol.

    F_table is the full per-cell matrix load at each node (expressions
    already evaluated, transfer/memory terms included), shape
    (nt, n_cells, dim, dim) or None.  The work integrals use the
    trapezoid rule; the default tolerance scales as
    (1e-8 + dt^2) * (E_0 + max|W| + 1).
    """
    nt = traj.n_nodes
    dt = traj.dt
    vol = traj.spaces[0].mesh.cell_volumes
    kinetic = np.empty(nt)
    elastic = np.empty(nt)
    for k in range(nt):
        sp = traj.spaces[k]
        M = workspace.mass(sp)
        K = workspace.stiffness(sp, tensor, "main")
        kinetic[k] = 0.5 * traj.v[k] @ (M @ traj.v[k])
        elastic[k] = 0.5 * traj.u[k] @ (K @ traj.u[k])

    strains = 0.5 * (traj.grads + np.swapaxes(traj.grads, -1, -2))
    f_terms = np.zeros(nt)
    if f_exprs is not None:
        for k in range(nt):
            sp = traj.spaces[k]
            b = assembly.assemble_body_load(
                sp, assembly.evaluate_at_nodes(sp, f_exprs, t=traj.times[k]))
            f_terms[k] = b @ traj.v[k]

    work = np.zeros(nt)
    if F_table is None:
        F_table = np.zeros_like(strains)
    FE = np.einsum("n,knij,knij->k", vol, F_table, strains)
    for k in range(nt - 1):
        dW = 0.5 * dt * (f_terms[k] + f_terms[k + 1])
        dF = F_table[k + 1] - F_table[k]
        avgE = 0.5 * (strains[k] + strains[k + 1])
        dW -= np.einsum("n,nij,nij->", vol, dF, avgE)
        work[k + 1] = work[k] + dW
    work += FE - FE[0]

    e0 = kinetic[0] + elastic[0]
    slack = kinetic + elastic - e0 - work
    if tol_energy is None:
        tol_energy = (1e-8 + dt * dt) * (e0 + np.max(np.abs(work)) + 1.0)
    return EnergyReport(times=traj.times, kinetic=kinetic, elastic=elastic,
                        work=work, slack=slack, tol_energy=float(tol_energy))


@dataclass
class AprioriReport:
    """Trajectory sup norm against the data functional it is bounded by."""

    sup_norm: float
    data_norm: float

    @property
    def vacuous(self):
        """Zero data bounds nothing; the ratio is meaningless then."""
        return self.data_norm == 0.0

    @property
    def ratio(self):
        return self.sup_norm / max(self.data_norm, 1e-300)


def apriori_bound_audit(traj, workspace, f_exprs=None, F_table=None):
    """Empirical constant in the a-priori bound for zero u0, zero u_D.

    data_norm = (1 + T) * (|u1| + sup|F| + sqrt(T)(|dF/dt|_L2 + |f|_L2)).
    """
    nt = traj.n_nodes
    T = float(traj.times[-1] - traj.times[0])
    dt = traj.dt
    vol = traj.spaces[0].mesh.cell_volumes

    sup_v = 0.0
    sup_vel = 0.0
    for k in range(nt):
        sp = traj.spaces[k]
        M = workspace.mass(sp)
        g = traj.grads[k]
        sup_v = max(sup_v, float(np.sqrt(
            traj.u[k] @ (M @ traj.u[k])
            + np.einsum("n,nij,nij->", vol, g, g))))
        sup_vel = max(sup_vel, float(np.sqrt(traj.v[k] @ (M @ traj.v[k]))))
    sup_norm = sup_v + sup_vel

    sp0 = traj.spaces[0]
    M0 = workspace.mass(sp0)
    u1_norm = float(np.sqrt(traj.v[0] @ (M0 @ traj.v[0])))

    F_sup = 0.0
    Fdot_l2_sq = 0.0
    if F_table is not None:
        norms = np.sqrt(np.einsum("n,knij,knij->k", vol, F_table, F_table))
        F_sup = float(norms.max())
        rates = np.diff(F_table, axis=0) / dt
        Fdot_l2_sq = float(np.einsum("n,knij,knij->", vol, rates, rates) * dt)

    f_l2_sq = 0.0
    if f_exprs is not None:
        w = memory_mod.trapezoid_weights(traj.times)
        for k in range(nt):
            sp = traj.spaces[k]
            fv = assembly.evaluate_at_nodes(sp, f_exprs, t=traj.times[k])
            M = workspace.mass(sp)
            flat = fv.reshape(-1)
            f_l2_sq += w[k] * float(flat @ (M @ flat))

    data_norm = (1.0 + T) * (u1_norm + F_sup + np.sqrt(T) * (
        np.sqrt(Fdot_l2_sq) + np.sqrt(f_l2_sq)))
    return AprioriReport(sup_norm=sup_norm, data_norm=data_norm)


# ---------- Space-time norms ----------

def _pair_in_union(workspace, sp_a, u_a, sp_b, u_b):
    """Embed two dof vectors into the union space; returns (space, a, b)."""
    if sp_a is sp_b:
        return sp_a, u_a, u_b
    if sp_a.s_open >= sp_b.s_open:
        fine, coarse, uf, uc = sp_a, sp_b, u_a, u_b
        swap = False
    else:
        fine, coarse, uf, uc = sp_b, sp_a, u_b, u_a
        swap = True
    union = workspace.space_for_extent(fine.s_open)
    pc = space_inclusion_map(coarse, union)
    uc_f = prolong(pc, uc, union.dim)
    if union is not fine:
        pf = space_inclusion_map(fine, union)
        uf = prolong(pf, uf, union.dim)
    return (union, uc_f, uf) if swap else (union, uf, uc_f)


def node_distance_sq(workspace, traj_a, traj_b, k):
    """Squared product-norm distance |du|^2 + |dDu|^2 + |dv|^2 at node k."""
    sp, ua, ub = _pair_in_union(workspace, traj_a.spaces[k], traj_a.u[k],
                                traj_b.spaces[k], traj_b.u[k])
    _, va, vb = _pair_in_union(workspace, traj_a.spaces[k], traj_a.v[k],
                               traj_b.spaces[k], traj_b.v[k])
    M = workspace.mass(sp)
    du = ua - ub
    dv = va - vb
    dg = traj_a.grads[k] - traj_b.grads[k]
    vol = sp.mesh.cell_volumes
    return (float(du @ (M @ du))
            + float(np.einsum("n,nij,nij->", vol, dg, dg))
            + float(dv @ (M @ dv)))


def discrete_wnorm(workspace, traj_a, traj_b=None):
    """Space-time norm of a trajectory triple (u, Du, u') or a difference.

    Trapezoid in time of the squared product norm, square-rooted.
    Trajectories must share their time grid; nodes with different crack
    extents are compared in the union space (tied-value embedding).
    """
    if traj_b is not None and not np.allclose(traj_a.times, traj_b.times,
                                              rtol=0.0, atol=1e-12):
        raise ValueError("trajectories live on different time grids")
    w = memory_mod.trapezoid_weights(traj_a.times)
    total = 0.0
    for k in range(traj_a.n_nodes):
        if traj_b is None:
            sp = traj_a.spaces[k]
            M = workspace.mass(sp)
            vol = sp.mesh.cell_volumes
            g = traj_a.grads[k]
            d2 = (float(traj_a.u[k] @ (M @ traj_a.u[k]))
                  + float(np.einsum("n,nij,nij->", vol, g, g))
                  + float(traj_a.v[k] @ (M @ traj_a.v[k])))
        else:
            d2 = node_distance_sq(workspace, traj_a, traj_b, k)
        total += w[k] * d2
    return float(np.sqrt(total))


def sup_product_distance(workspace, traj_a, traj_b):
    """Max over time nodes of the product-norm distance."""
    return float(np.sqrt(max(
        node_distance_sq(workspace, traj_a, traj_b, k)
        for k in range(traj_a.n_nodes))))


def uniform_bound(workspace, traj):
    """sup_t |u| + sup_t |Du| + sup_t |u'| (the equiboundedness value)."""
    su = sg = sv = 0.0
    for k in range(traj.n_nodes):
        sp = traj.spaces[k]
        M = workspace.mass(sp)
        vol = sp.mesh.cell_volumes
        g = traj.grads[k]
        su = max(su, float(np.sqrt(traj.u[k] @ (M @ traj.u[k]))))
        sg = max(sg, float(np.sqrt(np.einsum("n,nij,nij->", vol, g, g))))
        sv = max(sv, float(np.sqrt(traj.v[k] @ (M @ traj.v[k]))))
    return su + sg + sv
