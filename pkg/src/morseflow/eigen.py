"""Smallest eigenpairs of the pencil (K, M) and min-max checks.

The sparse path is shift-invert Lanczos (ARPACK) around a shift placed left
of the spectrum. The shift comes from an element-wise lower bound: each
local pencil ``(Ka_T + c_T M_T, M_T)`` has smallest eigenvalue ``c_T``
(constants span the kernel of ``Ka_T``), hence ``lambda_1 >= min_T c_T``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
import scipy.linalg as sla
from scipy import sparse
from scipy.sparse import linalg as spla

logger = logging.getLogger(__name__)

CLUSTER_TOL = 1e-6
DENSE_LIMIT = 300
MAX_ITER = 500


class EigenError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual_norms: np.ndarray
    k_requested: int
    k_converged: int

    @property
    def converged(self):
        return self.k_converged >= self.k_requested

    def __len__(self):
        return len(self.eigenvalues)

    def clusters(self, cluster_tol=CLUSTER_TOL):
        """Group indices whose eigenvalues agree within ``cluster_tol * max(1, |lambda|)``."""
        groups = []
        for i, lam in enumerate(self.eigenvalues):
            if groups and abs(lam - self.eigenvalues[groups[-1][-1]]) <= cluster_tol * max(1.0, abs(lam)):
                groups[-1].append(i)
            else:
                groups.append([i])
        return groups


def _admissible_dim(system):
    return system.dof_count - (1 if system.constrained else 0)


def _dense(system, k):
    K = system.stiffness.toarray()
    if system.constrained:
        B = system.constraint_basis()
        vals, Y = sla.eigh(B.T @ K @ B)
        vecs = B @ Y
    else:
        vals, vecs = sla.eigh(K, system.mass.toarray())
    return vals[:k], vecs[:, :k]


def _shift(system):
    floor = system.spectral_floor
    return floor - 1e-2 * max(1.0, abs(floor))


def _ritz(system, V):
    K, M = system.stiffness, system.mass
    kr = V.T @ (K @ V)
    mr = V.T @ (M @ V)
    kr = 0.5 * (kr + kr.T)
    mr = 0.5 * (mr + mr.T)
    vals, Y = sla.eigh(kr, mr)
    return vals, V @ Y


def smallest_eigenpairs(system, k, tol=1e-12, seed=0, guard=2, maxiter=MAX_ITER):
    """The ``k`` smallest eigenpairs of ``K u = lambda M u`` on the admissible space.

    Parameters
    ----------
    system : AssembledSystem
    k : int
        Number of eigenpairs; at most the admissible dimension.
    tol : float
        Relative ARPACK tolerance.
    seed : int
        Seeds the Lanczos start vector, making the result deterministic.
    guard : int
        Extra pairs computed internally so that clusters at the cut are resolved.

    Returns
    -------
    EigenResult
        Eigenvalues ascending, eigenvectors M-orthonormal. If the iteration
        cap is hit the converged part is returned with ``k_converged < k``.
    """
    k = int(k)
    ndim = _admissible_dim(system)
    if k < 1:
        raise EigenError("k must be >= 1")
    if k > ndim:
        raise EigenError(f"k={k} exceeds the number of degrees of freedom ({ndim})")
    if not tol > 0:
        raise EigenError("tol must be positive")
    n = system.dof_count
    kk = min(k + guard, ndim)
    k_conv = k
    if n <= DENSE_LIMIT or kk >= ndim - 1:
        vals, vecs = _dense(system, kk)
    else:
        vals, vecs, k_conv = _arpack(system, kk, tol, seed, maxiter)
        k_conv = min(k_conv, k)
        if len(vals):
            vals, vecs = _ritz(system, vecs)
    vals = np.asarray(vals[:k], dtype=np.float64)
    vecs = np.asarray(vecs[:, :k], dtype=np.float64)
    # fix sign for reproducibility: largest-magnitude entry positive
    if vecs.size:
        piv = np.argmax(np.abs(vecs), axis=0)
        vecs = vecs * np.sign(vecs[piv, np.arange(vecs.shape[1])])
    res = system.project_dual(system.stiffness @ vecs - (system.mass @ vecs) * vals)
    res_norms = np.linalg.norm(res, axis=0) if vecs.size else np.zeros(0)
    return EigenResult(vals, vecs, res_norms, k, min(k_conv, len(vals)))


def _arpack(system, kk, tol, seed, maxiter):
    K, M = system.stiffness, system.mass
    n = system.dof_count
    sigma = _shift(system)
    shifted = (K - sigma * M).tocsc()
    if system.constrained:
        w = system.constraint_vector[:, None]
        bordered = sparse.bmat([[shifted, sparse.csc_matrix(w)], [sparse.csc_matrix(w.T), None]]).tocsc()
        lu = spla.splu(bordered)

        def solve(y):
            return lu.solve(np.append(np.ravel(y), 0.0))[:n]
    else:
        lu = spla.splu(shifted)

        def solve(y):
            return lu.solve(np.ravel(y))

    opinv = spla.LinearOperator((n, n), matvec=solve, dtype=np.float64)
    v0 = system.project(np.random.default_rng(seed).standard_normal(n))
    ncv = min(n, max(2 * kk + 1, kk + 16))
    try:
        vals, vecs = spla.eigsh(K, k=kk, M=M, sigma=sigma, which="LM", OPinv=opinv,
                                v0=v0, tol=tol, ncv=ncv, maxiter=maxiter * kk)
        nconv = kk
    except spla.ArpackNoConvergence as exc:
        logger.warning("eigensolver did not converge: %d of %d pairs", len(exc.eigenvalues), kk)
        vals, vecs = exc.eigenvalues, exc.eigenvectors
        nconv = len(vals)
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    if nconv < kk:
        # partial results are only trustworthy as a contiguous low block
        nconv = len(vals)
    return vals, vecs, nconv


def rayleigh_quotient(system, u):
    """``u^T K u / u^T M u``."""
    u = np.asarray(u, dtype=np.float64)
    den = float(u @ (system.mass @ u))
    if not den > 0:
        raise EigenError("rayleigh_quotient of the zero vector")
    return float(u @ (system.stiffness @ u)) / den


@dataclass
class MinmaxReport:
    tol: float
    trials: int
    violations: List[tuple] = field(default_factory=list)
    attained: List[tuple] = field(default_factory=list)
    min_margin: List[float] = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations and all(ok for _, _, ok in self.attained)


def _max_rayleigh(system, V):
    kr = V.T @ (system.stiffness @ V)
    mr = V.T @ (system.mass @ V)
    return float(sla.eigh(0.5 * (kr + kr.T), 0.5 * (mr + mr.T), eigvals_only=True)[-1])


def _smoother(system):
    """``q -> (K - sigma M)^{-1} M q`` projected, pulling vectors toward the low spectrum."""
    n = system.dof_count
    shifted = (system.stiffness - _shift(system) * system.mass).tocsc()
    if system.constrained:
        w = system.constraint_vector[:, None]
        lu = spla.splu(sparse.bmat([[shifted, sparse.csc_matrix(w)], [sparse.csc_matrix(w.T), None]]).tocsc())

        def apply(q):
            rhs = np.vstack([system.mass @ q, np.zeros((1, q.shape[1]))])
            return lu.solve(rhs)[:n]
    else:
        lu = spla.splu(shifted)

        def apply(q):
            return lu.solve(system.mass @ q)
    return apply


def minmax_verify(system, result, trials, seed=0, tol=None):
    """Check ``lambda_k = min over k-dim V of max Rayleigh(V)`` on random subspaces.

    For every k up to ``len(result)`` the maximum Rayleigh quotient over
    ``trials`` random k-dimensional subspaces must not fall below
    ``lambda_k - tol``, and the span of the first k eigenvectors must attain
    ``lambda_k`` within ``tol``. Even-numbered trials use unstructured
    Gaussian subspaces; odd-numbered ones are smoothed by one to three
    inverse-iteration steps so that they come close to the minimising
    subspace. A violation means the eigensolver missed a lower eigenvalue.
    """
    if trials < 1:
        raise EigenError("trials must be >= 1")
    lam = result.eigenvalues
    if tol is None:
        tol = 1e-8 * max(1.0, float(np.max(np.abs(lam))))
    rng = np.random.default_rng(seed)
    n = system.dof_count
    smooth = _smoother(system) if n > 1 else None
    report = MinmaxReport(tol=tol, trials=trials)
    for k in range(1, len(lam) + 1):
        best = np.inf
        for trial in range(trials):
            V = rng.standard_normal((n, k))
            if trial % 2 and smooth is not None:
                for _ in range(1 + (trial // 2) % 3):
                    V = smooth(V)
                    V /= np.linalg.norm(V, axis=0)
            V = system.project(V)
            top = _max_rayleigh(system, V)
            best = min(best, top - lam[k - 1])
            if top < lam[k - 1] - tol:
                report.violations.append((k, trial, top, float(lam[k - 1])))
        report.min_margin.append(best)
        top = _max_rayleigh(system, result.eigenvectors[:, :k])
        report.attained.append((k, top, abs(top - lam[k - 1]) <= tol))
    return report
