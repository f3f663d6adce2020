"""Fourth-order material tensor fields.

A material tensor maps symmetric d x d matrices to symmetric d x d
matrices, linearly, at every point of the domain.  Fields here are
piecewise constant over mesh cells (or spatially homogeneous), and each
pointwise map is stored as its matrix in an orthonormal basis of the
symmetric matrices, so symmetry of the map is symmetry of the matrix
and coercivity is an eigenvalue bound.

Basis for d = 2 (Frobenius-orthonormal):

    B1 = [[1,0],[0,0]]   B2 = [[0,0],[0,1]]   B3 = [[0,1],[1,0]]/sqrt(2)

For d = 1 the symmetric matrices are scalars and the representation is
a single coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_PROBE_SEED = 42
_N_RANDOM_PROBES = 8


def sym_basis(dim):
    """Orthonormal basis of symmetric dim x dim matrices, shape (m, dim, dim)."""
    if dim == 1:
        return np.ones((1, 1, 1))
    if dim == 2:
        r = 1.0 / np.sqrt(2.0)
        return np.array([
            [[1.0, 0.0], [0.0, 0.0]],
            [[0.0, 0.0], [0.0, 1.0]],
            [[0.0, r], [r, 0.0]],
        ])
    raise ValueError(f"unsupported dimension {dim}")


def sym_dim(dim):
    """Dimension of the symmetric-matrix space: dim*(dim+1)//2."""
    return dim * (dim + 1) // 2


def to_sym_coords(A, dim):
    """Coordinates of symmetric matrices A (..., d, d) in the orthonormal basis."""
    return np.einsum("...ij,kij->...k", np.asarray(A, dtype=float), sym_basis(dim))


def from_sym_coords(coords, dim):
    """Inverse of to_sym_coords: (..., m) -> (..., d, d)."""
    return np.einsum("...k,kij->...ij", np.asarray(coords, dtype=float), sym_basis(dim))


def symmetrize(A):
    """Symmetric part of matrices with shape (..., d, d)."""
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


class Tensor4Field:
    """Piecewise-constant fourth-order tensor field.

    Parameters
    ----------
    matrix : ndarray
        Shape (m, m) for a homogeneous field or (n_cells, m, m) for a
        piecewise-constant one, where m = dim*(dim+1)//2.  Entry [i, j]
        is (T B_j) : B_i in the orthonormal symmetric basis.
    dim : int
        Spatial dimension, 1 or 2.
    """

    def __init__(self, matrix, dim):
        matrix = np.asarray(matrix, dtype=float)
        m = sym_dim(dim)
        if matrix.shape == (m, m):
            pass
        elif matrix.ndim == 3 and matrix.shape[1:] == (m, m):
            pass
        else:
            raise ValueError(
                f"matrix shape {matrix.shape} incompatible with dim {dim}")
        self.matrix = matrix
        self.dim = dim

    @property
    def homogeneous(self):
        return self.matrix.ndim == 2

    @property
    def n_cells(self):
        return None if self.homogeneous else self.matrix.shape[0]

    @classmethod
    def isotropic(cls, dim, lam, mu):
        """The map A -> lam*tr(A)*I + 2*mu*A."""
        m = sym_dim(dim)
        basis = sym_basis(dim)
        traces = np.einsum("kii->k", basis)
        mat = 2.0 * mu * np.eye(m) + lam * np.outer(traces, traces)
        return cls(mat, dim)

    @classmethod
    def identity(cls, dim):
        """The identity map on symmetric matrices."""
        return cls(np.eye(sym_dim(dim)), dim)

    def scaled(self, factor):
        return Tensor4Field(factor * self.matrix, self.dim)

    def cellwise(self, n_cells):
        """View of this field with an explicit cell axis of length n_cells."""
        if self.homogeneous:
            return Tensor4Field(
                np.broadcast_to(self.matrix, (n_cells,) + self.matrix.shape).copy(),
                self.dim)
        if self.n_cells != n_cells:
            raise ValueError(
                f"field has {self.n_cells} cells, mesh has {n_cells}")
        return self

    def sup_norm(self):
        """sup over cells of the operator norm of the pointwise map."""
        if self.homogeneous:
            return float(np.linalg.norm(self.matrix, ord=2))
        return float(max(np.linalg.norm(m, ord=2) for m in self.matrix))

    def __repr__(self):
        kind = "homogeneous" if self.homogeneous else f"{self.n_cells} cells"
        return f"Tensor4Field(dim={self.dim}, {kind})"


def apply_tensor(field, A):
    """Apply the tensor field to symmetric matrices.

    A has shape (d, d) or (n, d, d); a piecewise field requires the
    batched form with n equal to its cell count and applies cell k's map
    to A[k].  Returns matrices of the same shape as A.
    """
    A = np.asarray(A, dtype=float)
    coords = to_sym_coords(A, field.dim)
    if field.homogeneous:
        out = coords @ field.matrix.T
    else:
        if A.ndim != 3 or A.shape[0] != field.n_cells:
            raise ValueError(
                f"batch shape {A.shape} does not match {field.n_cells} cells")
        out = np.einsum("nij,nj->ni", field.matrix, coords)
    return from_sym_coords(out, field.dim)


@dataclass
class ExtendedTensor:
    """A tensor field acting on full matrices through the symmetrizer.

    The extension vanishes on antisymmetric input and agrees with the
    base field on symmetric input.
    """

    base: Tensor4Field

    @property
    def dim(self):
        return self.base.dim

    def sup_norm(self):
        return self.base.sup_norm()


def apply_extended(extended, A):
    """Apply an ExtendedTensor to full (not necessarily symmetric) matrices."""
    return apply_tensor(extended.base, symmetrize(A))


def sum_tensors(a, b):
    """Pointwise sum of two tensor fields on the same cells."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if not (a.homogeneous or b.homogeneous) and a.n_cells != b.n_cells:
        raise ValueError(f"cell count mismatch: {a.n_cells} vs {b.n_cells}")
    return Tensor4Field(a.matrix + b.matrix, a.dim)


# ---------- Certification ----------

def _probe_matrices(dim):
    """Canonical symmetric basis plus seeded random symmetric matrices."""
    probes = [b for b in sym_basis(dim)]
    rng = np.random.default_rng(_PROBE_SEED)
    for _ in range(_N_RANDOM_PROBES):
        raw = rng.standard_normal((dim, dim))
        probes.append(0.5 * (raw + raw.T))
    return probes


@dataclass
class CoercivityCert:
    """Outcome of symmetry and coercivity certification of a tensor field.

    alpha0 is the smallest eigenvalue of the pointwise map over all
    cells (the coercivity constant when positive), sup_bound the largest
    operator norm, symmetry_defect the worst |TA:B - A:TB| over the
    probe set relative to probe scale.
    """

    dim: int
    alpha0: float
    sup_bound: float
    symmetric: bool
    symmetry_defect: float

    @property
    def coercive(self):
        return self.alpha0 > 0.0

    @property
    def ok(self):
        return self.symmetric and self.coercive


def certify_coercivity(field, sym_tol=1e-10):
    """Certify pointwise symmetry and coercivity of a tensor field.

    Symmetry is checked as TA:B = A:TB over the canonical symmetric
    basis extended with 8 seeded random symmetric matrices; coercivity
    as the smallest eigenvalue of the matrix representation in the
    orthonormal symmetric basis, exact at the piecewise-constant level.
    """
    probes = _probe_matrices(field.dim)
    mats = field.matrix if not field.homogeneous else field.matrix[None]

    defect = 0.0
    for A in probes:
        a = to_sym_coords(A, field.dim)
        for B in probes:
            b = to_sym_coords(B, field.dim)
            scale = max(np.linalg.norm(a) * np.linalg.norm(b), 1e-30)
            lhs = np.einsum("nij,j,i->n", mats, a, b)
            rhs = np.einsum("nij,j,i->n", mats, b, a)
            defect = max(defect, float(np.max(np.abs(lhs - rhs))) / scale)
    symmetric = defect <= sym_tol

    if symmetric:
        eigs = np.linalg.eigvalsh(mats)
        alpha0 = float(eigs[..., 0].min())
        sup_bound = float(np.abs(eigs).max())
    else:
        # no coercivity claim without symmetry; still report bounds
        sym_part = 0.5 * (mats + np.swapaxes(mats, -1, -2))
        alpha0 = float(np.linalg.eigvalsh(sym_part)[..., 0].min())
        sup_bound = float(max(np.linalg.norm(m, ord=2) for m in mats))

    return CoercivityCert(dim=field.dim, alpha0=alpha0, sup_bound=sup_bound,
                          symmetric=symmetric, symmetry_defect=defect)
