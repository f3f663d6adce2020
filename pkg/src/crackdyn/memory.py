"""Exponential-kernel memory integrals over strain histories.

The memory term is value(t) = int_0^t exp(tau - t) V E(u)(tau) dtau,
held as per-cell symmetric matrices.  Because the kernel is an
exponential, one step advances the whole integral exactly:

    value(t + dt) = exp(-dt) * value(t)
                    + int_t^{t+dt} exp(tau - t - dt) V E(u)(tau) dtau

and the remaining short integral is closed with the trapezoid rule.
The decay factor is exact, so the recursion reproduces the composite
trapezoid quadrature of the full convolution to roundoff; the direct
quadrature is kept alongside as the oracle route and is never replaced
by the recursion in checks that compare the two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import Tensor4Field, apply_tensor, symmetrize
from . import assembly


@dataclass
class MemoryAccumulator:
    """Running memory integral for one strain history.

    value is the integral up to the current time, last_applied the
    integrand V E(u) at the current time (needed by the trapezoid
    step), k the step index.
    """

    viscosity: Tensor4Field
    value: np.ndarray
    last_applied: np.ndarray
    k: int = 0

    def copy(self):
        return MemoryAccumulator(self.viscosity, self.value.copy(),
                                 self.last_applied.copy(), self.k)


def init_memory(viscosity, strain0, value0=None):
    """Accumulator at t = 0 for initial strain strain0 (ne, d, d).

    value0 seeds the integral with already-accumulated history (used
    when a solve restarts mid-interval); default zero.
    """
    applied = apply_tensor(viscosity, symmetrize(strain0))
    value = np.zeros_like(applied) if value0 is None else \
        np.array(value0, dtype=float)
    return MemoryAccumulator(viscosity, value, applied, 0)


def step_memory(acc, strain_new, dt):
    """Advance the accumulator by one step of size dt.

    strain_new is the strain field at the new time; the previous
    integrand is taken from the accumulator.  Returns acc (mutated).
    """
    applied_new = apply_tensor(acc.viscosity, symmetrize(strain_new))
    decay = np.exp(-dt)
    acc.value = decay * acc.value + 0.5 * dt * (
        decay * acc.last_applied + applied_new)
    acc.last_applied = applied_new
    acc.k += 1
    return acc


def eval_memory_direct(viscosity, strains, times, index):
    """Direct trapezoid quadrature of the memory integral at times[index].

    strains has shape (nt, ne, d, d); full-history cost.  This is the
    oracle route for the recursion.
    """
    index = int(index)
    if index == 0:
        return np.zeros_like(np.asarray(strains[0], dtype=float))
    t_k = times[index]
    total = np.zeros_like(np.asarray(strains[0], dtype=float))
    for j in range(index):
        dt = times[j + 1] - times[j]
        f0 = np.exp(times[j] - t_k) * apply_tensor(
            viscosity, symmetrize(strains[j]))
        f1 = np.exp(times[j + 1] - t_k) * apply_tensor(
            viscosity, symmetrize(strains[j + 1]))
        total += 0.5 * dt * (f0 + f1)
    return total


def apply_T(viscosity, w2_history, times, value0=None):
    """Memory transfer of a gradient history: per-node memory fields.

    w2_history holds full (not necessarily symmetric) matrices, shape
    (nt, ne, d, d); the viscosity acts through the symmetrizer.
    Returns an array of the same shape: entry k is the integral up to
    times[k], computed by the exact-decay recursion.  value0 seeds the
    history carried in from an earlier interval.
    """
    w2_history = np.asarray(w2_history, dtype=float)
    out = np.empty_like(w2_history)
    acc = init_memory(viscosity, w2_history[0], value0=value0)
    out[0] = acc.value
    for k in range(1, w2_history.shape[0]):
        step_memory(acc, w2_history[k], times[k] - times[k - 1])
        out[k] = acc.value
    return out


# ---------- Norm bound suite ----------

def _field_norm(volumes, field):
    """L2(domain) norm of a per-cell matrix field."""
    return float(np.sqrt(np.einsum("n,nij,nij->", volumes, field, field)))


def trapezoid_weights(times):
    """Composite trapezoid weights for a (possibly nonuniform) grid."""
    w = np.zeros(len(times))
    dts = np.diff(times)
    w[:-1] += 0.5 * dts
    w[1:] += 0.5 * dts
    return w


@dataclass
class BoundCheck:
    label: str
    lhs: float
    rhs: float

    @property
    def ok(self):
        return self.lhs <= self.rhs * (1.0 + 1e-8)


@dataclass
class MemoryBoundReport:
    """Discrete verification of the memory-operator norm bounds."""

    checks: tuple

    @property
    def ok(self):
        return all(c.ok for c in self.checks)


def memory_norm_bounds(space, viscosity, times, u_history, v_history=None,
                       w2_history=None, w3_history=None):
    """Check the four memory norm bounds on a discrete trajectory.

    u_history: (nt, n_dofs) displacement dofs on a fixed space;
    v_history: optional velocities (defaults to zero).  The first two
    checks bound the memory of E(u) by T * |V| * (sup-V-norm of u plus
    sup of |v|); the last two bound the transfer of the triple
    (u, Du, v) (or the supplied w2/w3 histories) in the space-time norm.
    """
    vol = space.mesh.cell_volumes
    M = assembly.assemble_mass(space)
    nt = len(times)
    T = float(times[-1] - times[0])
    vsup = viscosity.sup_norm()

    u_history = np.asarray(u_history, dtype=float)
    if v_history is None:
        v_history = np.zeros_like(u_history)
    grads = np.stack([assembly.cell_gradients(space, u_history[k])
                      for k in range(nt)])
    if w2_history is None:
        w2_history = grads
    if w3_history is None:
        w3_history = v_history

    # trajectory sup norm: sup_t sqrt(|u|^2 + |Du|^2) + sup_t |v|
    vnorms = np.array([
        np.sqrt(u_history[k] @ (M @ u_history[k])
                + np.einsum("n,nij,nij->", vol, grads[k], grads[k]))
        for k in range(nt)])
    vel_norms = np.array([np.sqrt(v_history[k] @ (M @ v_history[k]))
                          for k in range(nt)])
    u_sup = float(vnorms.max() + vel_norms.max())

    mem = apply_T(viscosity, grads, times)
    mem_sup = max(_field_norm(vol, mem[k]) for k in range(nt))
    c1 = BoundCheck("memory sup bound", mem_sup, T * vsup * u_sup)

    # derivative identity: d/dt value = V E u - value
    weights = trapezoid_weights(times)
    deriv_sq = 0.0
    for k in range(nt):
        d = apply_tensor(viscosity, symmetrize(grads[k])) - mem[k]
        deriv_sq += weights[k] * _field_norm(vol, d) ** 2
    c2 = BoundCheck("memory derivative bound", np.sqrt(deriv_sq),
                    (np.sqrt(T) + T * np.sqrt(T)) * vsup * u_sup)

    # transfer bounds against the space-time norm of the triple
    w2_history = np.asarray(w2_history, dtype=float)
    w3_history = np.asarray(w3_history, dtype=float)
    wnorm_sq = 0.0
    for k in range(nt):
        wnorm_sq += weights[k] * (
            u_history[k] @ (M @ u_history[k])
            + np.einsum("n,nij,nij->", vol, w2_history[k], w2_history[k])
            + w3_history[k] @ (M @ w3_history[k]))
    wnorm = float(np.sqrt(wnorm_sq))

    trans = apply_T(viscosity, w2_history, times)
    trans_sup = max(_field_norm(vol, trans[k]) for k in range(nt))
    c3 = BoundCheck("transfer sup bound", trans_sup,
                    np.sqrt(T) * vsup * wnorm)

    dtrans_sq = 0.0
    for k in range(nt):
        d = apply_tensor(viscosity, symmetrize(w2_history[k])) - trans[k]
        dtrans_sq += weights[k] * _field_norm(vol, d) ** 2
    c4 = BoundCheck("transfer derivative bound", np.sqrt(dtrans_sq),
                    (1.0 + T) * vsup * wnorm)

    return MemoryBoundReport(checks=(c1, c2, c3, c4))
