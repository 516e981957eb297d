"""Conforming P1 discretisation of the bilinear form on a sublevel domain.

Degrees of freedom are the interior vertices of the domain; boundary values
are eliminated, which realises the zero-trace space. Contributions to
each entry are reduced in a canonical order so the matrices do not depend on
the order in which triangles are visited, and the matrix of a subdomain is
bitwise the principal submatrix of the matrix of any larger domain.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from . import kernels
from .operators import check_ellipticity


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ElementData:
    """Per-triangle local matrices for one (surface, operator) pair."""

    ka: np.ndarray  # gradient term
    kc: np.ndarray  # c-weighted mass
    me: np.ndarray  # mass
    c_tri: np.ndarray


def element_data(surface, spec):
    if spec.vertex_count != surface.vertex_count:
        raise AssemblyError("operator and surface vertex counts differ")
    tri = surface.triangles
    a_tri = spec.a_field[tri].mean(axis=1)
    c_tri = spec.c_field[tri].mean(axis=1)
    e1, e2 = surface.triangle_edge_vectors
    ka, me = kernels.element_matrices(e1, e2, a_tri, surface.triangle_area_scale)
    kc = c_tri[:, None, None] * me
    return ElementData(ka, kc, me, c_tri)


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    stiffness: sparse.csr_matrix
    mass: sparse.csr_matrix
    stiffness_grad: sparse.csr_matrix
    dof_map: np.ndarray
    domain: object
    constraint_vector: Optional[np.ndarray] = None
    spectral_floor: float = 0.0

    @property
    def dof_count(self):
        return len(self.dof_map)

    @property
    def constrained(self):
        return self.constraint_vector is not None

    @cached_property
    def mass_lu(self):
        return spla.splu(self.mass.tocsc())

    @cached_property
    def _minv_w(self):
        return self.mass_lu.solve(self.constraint_vector)

    def project(self, u):
        """M-orthogonal projection onto the mean-zero subspace (identity if unconstrained)."""
        u = np.asarray(u, dtype=np.float64)
        if not self.constrained:
            return u.copy()
        w = self.constraint_vector
        y = self._minv_w
        coef = (w @ u) / (w @ y)
        return u - np.multiply.outer(y, coef) if u.ndim == 2 else u - y * coef

    def project_dual(self, r):
        """Transpose of :meth:`project`, applied to residual (dual) vectors."""
        r = np.asarray(r, dtype=np.float64)
        if not self.constrained:
            return r.copy()
        w = self.constraint_vector
        y = self._minv_w
        coef = (y @ r) / (w @ y)
        return r - np.multiply.outer(w, coef) if r.ndim == 2 else r - w * coef

    def projector_matrix(self):
        """Dense projector; intended for small systems and tests."""
        return self.project(np.eye(self.dof_count))

    def constraint_basis(self):
        """Dense M-orthonormal basis of the admissible subspace."""
        n = self.dof_count
        if n > 5000:
            raise AssemblyError("dense constraint basis requested for a large system")
        if not self.constrained:
            q = np.eye(n)
        else:
            w = self.constraint_vector
            # Euclidean orthonormal complement of w via QR, then M-orthonormalise
            full = np.linalg.qr(np.column_stack([w, np.eye(n)[:, : n - 1]]))[0]
            q = full[:, 1:]
        gram = q.T @ (self.mass @ q)
        chol = np.linalg.cholesky(gram)
        return np.linalg.solve(chol, q.T).T

    def with_diagonal_shift(self, dofs, weights):
        """Copy with ``weights`` added to the stiffness diagonal at ``dofs``."""
        d = np.zeros(self.dof_count)
        d[np.asarray(dofs, dtype=np.int64)] = weights
        k = (self.stiffness + sparse.diags(d)).tocsr()
        k.sort_indices()
        return AssembledSystem(k, self.mass, self.stiffness_grad, self.dof_map, self.domain,
                               self.constraint_vector, self.spectral_floor)

    def permuted(self, perm):
        """Same system with DOFs renumbered so that new dof ``i`` is old ``perm[i]``."""
        perm = np.asarray(perm)
        take = lambda a: a[perm][:, perm].tocsr()
        w = None if self.constraint_vector is None else self.constraint_vector[perm]
        return AssembledSystem(take(self.stiffness), take(self.mass), take(self.stiffness_grad),
                               self.dof_map[perm], self.domain, w, self.spectral_floor)


def _reduce(rows, cols, vals_list, n):
    """Sum duplicate (row, col) entries in a canonical order.

    Within each entry the contributions are added in ascending order of
    value, so the result depends only on the multiset of contributions and
    not on triangle labels or the order in which triangles were visited.
    """
    out = []
    for vals in vals_list:
        order = np.lexsort((vals, cols, rows))
        r_s, c_s = rows[order], cols[order]
        new = np.ones(len(r_s), dtype=bool)
        new[1:] = (r_s[1:] != r_s[:-1]) | (c_s[1:] != c_s[:-1])
        starts = np.flatnonzero(new)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(r_s[starts], minlength=n), out=indptr[1:])
        data = kernels.segment_sum(vals[order], starts)
        out.append(sparse.csr_matrix((data, c_s[starts], indptr), shape=(n, n)))
    return out


def assemble(surface, domain, spec, elements=None):
    """Stiffness and mass matrices of ``spec`` on ``domain`` with zero boundary values.

    Parameters
    ----------
    surface : TriangulatedSurface
    domain : SublevelDomain
    spec : OperatorSpec
    elements : ElementData, optional
        Precomputed local matrices (reused across a sweep).

    Raises
    ------
    AssemblyError
        If the domain has no interior vertex or the operator is not
        strongly elliptic.
    """
    ell = check_ellipticity(spec)
    if not ell.ok:
        raise AssemblyError(f"operator not strongly elliptic (alpha={ell.alpha:g} at vertex {ell.worst_vertex})")
    dofs = np.asarray(domain.interior_vertices, dtype=np.int64)
    n = len(dofs)
    if n == 0:
        raise AssemblyError("domain below first spectral threshold: no interior vertex")
    el = elements if elements is not None else element_data(surface, spec)
    tri_ids = np.asarray(domain.active_triangles, dtype=np.int64)
    tri = surface.triangles[tri_ids]
    vdof = np.full(surface.vertex_count, -1, dtype=np.int64)
    vdof[dofs] = np.arange(n)
    local = vdof[tri]
    li = np.repeat(local, 3, axis=1).ravel()
    lj = np.tile(local, (1, 3)).ravel()
    keep = (li >= 0) & (lj >= 0)
    ka = el.ka[tri_ids].reshape(-1)[keep]
    kc = el.kc[tri_ids].reshape(-1)[keep]
    me = el.me[tri_ids].reshape(-1)[keep]
    k_grad, k_c, mass = _reduce(li[keep], lj[keep], [ka, kc, me], n)
    stiffness = (k_grad + k_c).tocsr()
    stiffness.sort_indices()

    constraint = None
    if spec.constraint == "volume_constrained":
        lumped = np.bincount(tri.ravel(), weights=el.me[tri_ids].sum(axis=2).ravel(),
                             minlength=surface.vertex_count)
        constraint = lumped[dofs]
    floor = float(el.c_tri[tri_ids].min()) if len(tri_ids) else 0.0
    return AssembledSystem(stiffness, mass, k_grad, dofs, domain, constraint, floor)


def bilinear_form(system, u, v):
    """``u^T K v``, symmetrised so that swapping the arguments is exact."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != (system.dof_count,) or v.shape != (system.dof_count,):
        raise AssemblyError(f"vectors must have length {system.dof_count}")
    k = system.stiffness
    return 0.5 * (float(u @ (k @ v)) + float(v @ (k @ u)))


def jacobi_residual(system, u):
    """Dual-norm residual ``|K u|_{M^-1} / |u|_M``; zero exactly for Jacobi fields.

    In volume-constrained mode the residual is taken modulo the constraint
    multiplier.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (system.dof_count,):
        raise AssemblyError(f"vector must have length {system.dof_count}")
    unorm2 = float(u @ (system.mass @ u))
    if not unorm2 > 0:
        raise AssemblyError("jacobi_residual of the zero vector")
    r = system.project_dual(system.stiffness @ u)
    return float(np.sqrt(max(r @ system.mass_lu.solve(r), 0.0) / unorm2))


def export_matrix_market(system, prefix):
    """Write ``<prefix>_K.mtx`` and ``<prefix>_M.mtx`` in coordinate format."""
    from scipy.io import mmwrite

    mmwrite(f"{prefix}_K.mtx", system.stiffness, symmetry="symmetric")
    mmwrite(f"{prefix}_M.mtx", system.mass, symmetry="symmetric")
