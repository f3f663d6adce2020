"""Vector P1 assembly on broken spaces, and the linear solver.

Element integrals are exact at the chosen data resolution: stiffness
uses one-point quadrature (strains and tensors are piecewise constant),
the mass matrix is the exact P1 formula, body loads integrate the P1
interpolant of f exactly, and matrix loads (F, E(phi)) use per-cell
constant F.  Matrices are scipy CSR with summed, sorted duplicates, so
assembly is deterministic.

All dof vectors are interleaved: dof = node * dim + component.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .tensors import sym_basis, sym_dim


class SolverError(RuntimeError):
    """A linear or nonlinear solve failed to converge."""


def cell_dof_table(space):
    """Per-cell dof ids, corner-major: (n_cells, (dim+1)*dim)."""
    dim = space.dim
    comp = np.arange(dim)
    return (space.cell_nodes[:, :, None] * dim + comp).reshape(
        space.mesh.n_cells, -1)


def _scatter(space, k_elem):
    """Sum per-cell dense blocks (ne, nd, nd) into a global CSR matrix."""
    dofs = cell_dof_table(space)
    nd = dofs.shape[1]
    rows = np.repeat(dofs, nd, axis=1).ravel()
    cols = np.tile(dofs, (1, nd)).ravel()
    mat = sp.coo_matrix((k_elem.ravel(), (rows, cols)),
                        shape=(space.n_dofs, space.n_dofs)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble_mass(space):
    """Exact P1 mass matrix (density 1), vector-valued."""
    dim = space.dim
    nc = dim + 1
    scalar = (np.ones((nc, nc)) + np.eye(nc))
    scalar /= 12.0 if dim == 2 else 6.0
    block = np.kron(scalar, np.eye(dim))
    k_elem = space.mesh.cell_volumes[:, None, None] * block[None]
    return _scatter(space, k_elem)


def strain_basis_coords(space):
    """ONB coordinates of the corner strain basis, (ne, nd, m).

    Row (i, a) holds sym(e_a outer grad_i) for corner i, component a.
    """
    dim = space.dim
    grads = space.mesh.grads                       # (ne, nc, dim)
    basis = sym_basis(dim)                         # (m, d, d)
    ne, nc, _ = grads.shape
    outer = np.zeros((ne, nc, dim, dim, dim))
    for a in range(dim):
        outer[:, :, a, a, :] = grads
    sym = 0.5 * (outer + np.swapaxes(outer, -1, -2))
    coords = np.einsum("ncaij,mij->ncam", sym, basis)
    return coords.reshape(ne, nc * dim, sym_dim(dim))


def assemble_stiffness(space, tensor):
    """Stiffness for a material tensor acting on symmetric gradients."""
    P = strain_basis_coords(space)
    mats = tensor.matrix
    if tensor.homogeneous:
        TP = np.einsum("ij,nkj->nki", mats, P)
    else:
        if mats.shape[0] != space.mesh.n_cells:
            raise ValueError("tensor field does not match the mesh")
        TP = np.einsum("nij,nkj->nki", mats, P)
    k_elem = np.einsum("n,nim,njm->nij", space.mesh.cell_volumes, P, TP)
    return _scatter(space, k_elem)


def assemble_strain_gram(space):
    """Gram matrix of symmetric gradients: v^T S v = int |Eu|^2."""
    from .tensors import Tensor4Field
    return assemble_stiffness(space, Tensor4Field.identity(space.dim))


def assemble_gradient_gram(space):
    """Gram matrix of full gradients: v^T G v = int |Du|^2."""
    dim = space.dim
    grads = space.mesh.grads
    scalar = np.einsum("nia,nja->nij", grads, grads)
    block = np.einsum("nij,ab->niajb", scalar, np.eye(dim))
    nd = (dim + 1) * dim
    k_elem = space.mesh.cell_volumes[:, None, None] * \
        block.reshape(-1, nd, nd)
    return _scatter(space, k_elem)


def assemble_body_load(space, node_values):
    """Load vector of (f, phi) with f the P1 interpolant of node_values.

    node_values has shape (n_nodes, dim).  Equals M @ f for the vector
    mass matrix M, assembled element-wise.
    """
    dim = space.dim
    nc = dim + 1
    vol = space.mesh.cell_volumes
    f_cells = node_values[space.cell_nodes]        # (ne, nc, dim)
    scalar = (np.ones((nc, nc)) + np.eye(nc))
    scalar /= 12.0 if dim == 2 else 6.0
    contrib = np.einsum("n,ij,nja->nia", vol, scalar, f_cells)
    out = np.zeros(space.n_dofs)
    np.add.at(out.reshape(-1, dim), space.cell_nodes.ravel(),
              contrib.reshape(-1, dim))
    return out


def assemble_matrix_load(space, cell_matrices):
    """Load vector of (F, E(phi)) with per-cell constant matrices F."""
    P = strain_basis_coords(space)                 # (ne, nd, m)
    basis = sym_basis(space.dim)
    coords = np.einsum("nij,mij->nm",
                       np.asarray(cell_matrices, dtype=float), basis)
    contrib = np.einsum("n,nkm,nm->nk", space.mesh.cell_volumes, P, coords)
    dofs = cell_dof_table(space)
    out = np.zeros(space.n_dofs)
    np.add.at(out, dofs.ravel(), contrib.ravel())
    return out


def cell_gradients(space, u):
    """Per-cell displacement gradient Du, shape (ne, dim, dim)."""
    dim = space.dim
    nodes = np.asarray(u, dtype=float).reshape(-1, dim)
    u_cells = nodes[space.cell_nodes]              # (ne, nc, dim)
    return np.einsum("nka,nkb->nab", u_cells, space.mesh.grads)


def evaluate_at_nodes(space, exprs, t=0.0):
    """Evaluate per-component expressions at node coordinates.

    exprs is a sequence of dim Expression objects (or None for zero).
    Duplicated seam nodes share coordinates and therefore values.
    """
    coords = space.node_coords
    out = np.zeros((space.n_nodes, space.dim))
    y = coords[:, 1] if space.dim == 2 else 0.0
    for a, ex in enumerate(exprs):
        if ex is None:
            continue
        out[:, a] = ex(x=coords[:, 0], y=y, t=t)
    return out


def evaluate_at_cells(space, exprs, t=0.0):
    """Evaluate a dim x dim expression table at cell centroids.

    exprs is a nested sequence exprs[i][j] (None entries are zero);
    returns (ne, dim, dim).
    """
    dim = space.dim
    cent = space.mesh.vertices[space.mesh.cells].mean(axis=1)
    out = np.zeros((space.mesh.n_cells, dim, dim))
    y = cent[:, 1] if dim == 2 else 0.0
    for i in range(dim):
        for j in range(dim):
            ex = exprs[i][j]
            if ex is None:
                continue
            out[:, i, j] = ex(x=cent[:, 0], y=y, t=t)
    return out


def lift_dirichlet(space, uD_exprs, t=0.0):
    """Dirichlet lift: boundary values at constrained dofs, zero inside."""
    values = evaluate_at_nodes(space, uD_exprs, t=t)
    lift = np.zeros(space.n_dofs)
    mask = space.dirichlet_node_mask
    lift.reshape(-1, space.dim)[mask] = values[mask]
    return lift


def cg_solve(A, b, x0=None, tol=1e-12, max_iter=50000):
    """Jacobi-preconditioned conjugate gradients for SPD systems.

    Terminates when ||r|| <= tol * ||b||; raises SolverError past
    max_iter.  A zero right-hand side returns the zero vector.
    """
    b = np.asarray(b, dtype=float)
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros_like(b)
    diag = A.diagonal().copy()
    diag[diag <= 0.0] = 1.0
    inv_diag = 1.0 / diag

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    if np.linalg.norm(r) <= tol * b_norm:
        return x
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for _ in range(max_iter):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol * b_norm:
            return x
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"CG did not reach {tol:g} relative residual in {max_iter} "
        f"iterations (residual {np.linalg.norm(r) / b_norm:.3e})")


def constrained_solve(A, b, space, lift=None, x0=None, tol=1e-12,
                      max_iter=50000):
    """Solve A u = b with Dirichlet values from lift on constrained dofs.

    Returns the full vector; free dofs solved by CG on the free block.
    """
    free = space.free_dofs
    u = np.zeros(space.n_dofs) if lift is None else np.array(lift, dtype=float)
    rhs = b - A @ u
    A_ff = A[free][:, free]
    x0_f = None if x0 is None else np.asarray(x0)[free]
    u[free] = cg_solve(A_ff, rhs[free], x0=x0_f, tol=tol, max_iter=max_iter)
    return u
