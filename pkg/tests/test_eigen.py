import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st
from scipy import sparse
from scipy.special import jn_zeros

import morseflow.eigen as eigen_mod
from morseflow.assembly import AssembledSystem, assemble
from morseflow.eigen import EigenError, minmax_verify, rayleigh_quotient, smallest_eigenpairs
from morseflow.operators import make_operator
from morseflow.surface import build_surface, sublevel_domain


def _system(kind, res, dims, op="laplacian", **kw):
    s = build_surface(kind, res, dims)
    dom = sublevel_domain(s, np.zeros(s.vertex_count), 1.0)
    return assemble(s, dom, make_operator(op, s, **kw))


def _raw(K, M, w=None):
    K, M = sparse.csr_matrix(K), sparse.csr_matrix(M)
    n = K.shape[0]
    return AssembledSystem(K, M, K, np.arange(n), None, w, float(-abs(K).max() / M.diagonal().min()))


def test_one_by_one():
    res = smallest_eigenpairs(_raw([[3.0]], [[2.0]]), 1)
    assert res.eigenvalues[0] == pytest.approx(1.5, rel=1e-15)
    assert res.eigenvectors[0, 0] ** 2 * 2.0 == pytest.approx(1.0)


def test_errors():
    sys_ = _raw(np.eye(3), np.eye(3))
    with pytest.raises(EigenError):
        smallest_eigenpairs(sys_, 4)
    with pytest.raises(EigenError):
        smallest_eigenpairs(sys_, 0)
    with pytest.raises(EigenError):
        smallest_eigenpairs(sys_, 1, tol=0.0)


@pytest.fixture(scope="module")
def square32():
    return _system("rectangle", 32, [1, 1])


def test_square_spectrum_and_cluster(square32):
    res = smallest_eigenpairs(square32, 6)
    ref = np.pi ** 2 * np.array([2, 5, 5, 8, 10, 10])
    assert np.allclose(res.eigenvalues, ref, rtol=2e-2)
    # the diagonal split breaks the exact lambda_2 = lambda_3 degeneracy at O(h^2)
    assert abs(res.eigenvalues[2] / res.eigenvalues[1] - 1) < 1e-2
    assert res.clusters(cluster_tol=1e-2) == [[0], [1, 2], [3], [4, 5]]
    assert res.clusters() == [[0], [1], [2], [3], [4], [5]]
    assert res.converged


def test_disk_bessel():
    res = smallest_eigenpairs(_system("disk", 32, [1.0]), 1)
    assert res.eigenvalues[0] == pytest.approx(jn_zeros(0, 1)[0] ** 2, rel=2e-2)


def test_sparse_path_matches_dense_oracle(square32):
    res = smallest_eigenpairs(square32, 8)
    dense = sla.eigh(square32.stiffness.toarray(), square32.mass.toarray(), eigvals_only=True)[:8]
    assert np.allclose(res.eigenvalues, dense, rtol=1e-10)
    V = res.eigenvectors
    assert np.max(np.abs(V.T @ square32.mass @ V - np.eye(8))) < 1e-10
    knorm = sla.norm(square32.stiffness.toarray(), 1)
    mnorm = sla.norm(square32.mass.toarray(), 1)
    assert np.all(res.residual_norms <= 1e-10 * (knorm + np.abs(res.eigenvalues) * mnorm))


def test_deterministic(square32):
    a = smallest_eigenpairs(square32, 5, seed=7)
    b = smallest_eigenpairs(square32, 5, seed=7)
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
    assert a.eigenvectors.tobytes() == b.eigenvectors.tobytes()


def test_renumbering_invariance(square32):
    perm = np.random.default_rng(3).permutation(square32.dof_count)
    a = smallest_eigenpairs(square32, 6)
    b = smallest_eigenpairs(square32.permuted(perm), 6)
    assert np.allclose(a.eigenvalues, b.eigenvalues, rtol=1e-8)


def test_constrained_matches_dense(monkeypatch):
    sys_ = _system("rectangle", 24, [1, 1.2], constraint="volume_constrained")
    sparse_res = smallest_eigenpairs(sys_, 5)
    monkeypatch.setattr(eigen_mod, "DENSE_LIMIT", 10 ** 6)
    dense_res = smallest_eigenpairs(sys_, 5)
    assert np.allclose(sparse_res.eigenvalues, dense_res.eigenvalues, rtol=1e-9)
    assert np.allclose(sys_.constraint_vector @ sparse_res.eigenvectors, 0, atol=1e-10)
    plain = smallest_eigenpairs(_system("rectangle", 24, [1, 1.2]), 6).eigenvalues
    # one constraint: interlacing lambda_i <= mu_i <= lambda_{i+1}
    assert np.all(plain[:5] <= sparse_res.eigenvalues * (1 + 1e-10))
    assert np.all(sparse_res.eigenvalues <= plain[1:6] * (1 + 1e-10))


def test_partial_convergence_reported(square32):
    res = smallest_eigenpairs(square32, 6, maxiter=1, tol=1e-15)
    assert res.k_converged <= res.k_requested
    assert len(res.eigenvalues) == res.k_converged or res.converged


@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_random_pencils_against_scipy(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    K = A @ A.T - n * np.eye(n)
    B = rng.standard_normal((n, n))
    M = B @ B.T + n * np.eye(n)
    k = int(rng.integers(1, n + 1))
    res = smallest_eigenpairs(_raw(K, M), k)
    assert np.allclose(res.eigenvalues, sla.eigh(K, M, eigvals_only=True)[:k], rtol=1e-9, atol=1e-9)


def test_rayleigh_quotient(square32):
    res = smallest_eigenpairs(square32, 2)
    u1, u2 = res.eigenvectors.T
    assert rayleigh_quotient(square32, u1) == pytest.approx(res.eigenvalues[0], rel=1e-12)
    assert rayleigh_quotient(square32, u1 + u2) == pytest.approx(res.eigenvalues.mean(), rel=1e-10)
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert rayleigh_quotient(square32, rng.standard_normal(square32.dof_count)) >= res.eigenvalues[0] - 1e-10
    with pytest.raises(EigenError):
        rayleigh_quotient(square32, np.zeros(square32.dof_count))


def test_rayleigh_stationary_at_eigenvector(square32):
    res = smallest_eigenpairs(square32, 3)
    rng = np.random.default_rng(2)
    eps = 1e-5
    for u in res.eigenvectors.T:
        d = rng.standard_normal(len(u))
        d /= np.sqrt(d @ square32.mass @ d)
        g = (rayleigh_quotient(square32, u + eps * d) - rayleigh_quotient(square32, u - eps * d)) / (2 * eps)
        assert abs(g) < 1e-6 * max(1.0, res.eigenvalues[-1])


def test_minmax_verify(square32):
    res = smallest_eigenpairs(square32, 4)
    rep = minmax_verify(square32, res, trials=10, seed=1)
    assert rep.ok and not rep.violations
    assert all(abs(v - lam) <= rep.tol for (_, v, _), lam in zip(rep.attained, res.eigenvalues))
    with pytest.raises(EigenError):
        minmax_verify(square32, res, trials=0)


def test_minmax_detects_missing_eigenvalue(square32):
    res = smallest_eigenpairs(square32, 3)
    # pretend the solver skipped lambda_1
    from morseflow.eigen import EigenResult

    fake = EigenResult(res.eigenvalues[1:], res.eigenvectors[:, 1:], res.residual_norms[1:], 2, 2)
    rep = minmax_verify(square32, fake, trials=50, seed=0)
    assert not rep.ok


def test_minmax_full_space():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((5, 5))
    sys_ = _raw(A @ A.T, np.eye(5))
    res = smallest_eigenpairs(sys_, 5)
    rep = minmax_verify(sys_, res, trials=5)
    assert rep.ok
    assert rep.min_margin[-1] == pytest.approx(0.0, abs=1e-10)
