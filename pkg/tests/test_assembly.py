import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import sparse

from morseflow.assembly import (
    AssemblyError,
    assemble,
    bilinear_form,
    export_matrix_market,
    jacobi_residual,
)
from morseflow.eigen import smallest_eigenpairs
from morseflow.operators import make_operator
from morseflow.surface import SublevelDomain, build_surface, morse_function, stretch_metric, sublevel_domain


def _full(surface):
    return sublevel_domain(surface, np.zeros(surface.vertex_count), 1.0)


def test_five_point_stencil_oracle():
    # right-triangle P1 Laplacian on a uniform grid is the 5-point stencil
    n = 6
    s = build_surface("rectangle", n, [1, 1])
    sys_ = assemble(s, _full(s), make_operator("laplacian", s))
    m = n - 1
    one = sparse.eye(m)
    t = sparse.diags([-1, 2, -1], [-1, 0, 1], shape=(m, m))
    stencil = (sparse.kron(one, t) + sparse.kron(t, one)).toarray()
    assert np.allclose(sys_.stiffness.toarray(), stencil, atol=1e-14)
    h2 = (1 / n) ** 2
    mass = sys_.mass.toarray()
    assert np.allclose(np.diag(mass), h2 / 2)
    off = mass - np.diag(np.diag(mass))
    assert np.allclose(off[off != 0], h2 / 12)
    assert np.all((off != 0).sum(axis=1) <= 6)


def test_single_interior_vertex():
    s = build_surface("rectangle", 4, [1, 1])
    h, _ = morse_function(s, s.nearest_vertex([0.5, 0.5]), 0.0)
    # smallest t whose domain contains the star of the centre
    t = np.sort(h.values)[9] + 1e-12
    dom = sublevel_domain(s, h, t)
    sys_ = assemble(s, dom, make_operator("laplacian", s))
    assert sys_.dof_count == 1 and sys_.stiffness[0, 0] > 0


def test_empty_interior_raises():
    s = build_surface("rectangle", 4, [1, 1])
    h, _ = morse_function(s, 12, 0.0)
    with pytest.raises(AssemblyError, match="below first spectral threshold"):
        assemble(s, sublevel_domain(s, h, 0.01), make_operator("laplacian", s))


def test_ellipticity_failure_raises():
    s = build_surface("rectangle", 4, [1, 1])
    a = np.broadcast_to(np.diag([1.0, -1.0]), (s.vertex_count, 2, 2))
    spec = make_operator("custom", s, a_field=a, c_field=0.0)
    with pytest.raises(AssemblyError, match="elliptic"):
        assemble(s, _full(s), spec)


def test_square_first_eigenvalue():
    s = build_surface("rectangle", 64, [1, 1])
    sys_ = assemble(s, _full(s), make_operator("laplacian", s))
    res = smallest_eigenpairs(sys_, 1)
    assert res.eigenvalues[0] == pytest.approx(2 * np.pi ** 2, rel=1e-2)
    u = res.eigenvectors[:, 0]
    assert bilinear_form(sys_, u, u) / (u @ sys_.mass @ u) == pytest.approx(2 * np.pi ** 2, rel=1e-2)


@pytest.fixture(scope="module")
def filtration():
    s = build_surface("rectangle", 12, [1, 1.3])
    h, _ = morse_function(s, s.nearest_vertex([0.3, 0.6]), 0.05, seed=2)
    a = np.random.default_rng(0).standard_normal((s.vertex_count, 2, 2))
    a = a @ a.transpose(0, 2, 1) + np.eye(2)
    c = np.random.default_rng(1).standard_normal(s.vertex_count)
    return s, h, make_operator("custom", s, a_field=a, c_field=c)


@given(st.floats(0.05, 1.5), st.floats(0.05, 1.5))
def test_galerkin_nesting_bitwise(filtration, t1, t2):
    s, h, spec = filtration
    lo, hi = sorted([t1, t2])
    d, dd = sublevel_domain(s, h, lo), sublevel_domain(s, h, hi)
    if d.dof_count == 0:
        return
    a, b = assemble(s, d, spec), assemble(s, dd, spec)
    pos = np.searchsorted(b.dof_map, a.dof_map)
    assert np.array_equal(b.dof_map[pos], a.dof_map)
    for m_small, m_big in [(a.stiffness, b.stiffness), (a.mass, b.mass)]:
        sub = m_big[pos][:, pos].tocsr()
        sub.sort_indices()
        m_small = m_small.tocsr()
        m_small.sort_indices()
        assert np.array_equal(sub.indptr, m_small.indptr)
        assert np.array_equal(sub.indices, m_small.indices)
        assert sub.data.tobytes() == m_small.data.tobytes()


def test_independent_of_triangle_order(filtration):
    s, h, spec = filtration
    dom = sublevel_domain(s, h, 0.6)
    perm = np.random.default_rng(5).permutation(dom.active_triangles)
    shuffled = SublevelDomain(dom.t, dom.active_vertices, perm, dom.boundary_edges, dom.interior_vertices,
                              dom.edge_count)
    a, b = assemble(s, dom, spec), assemble(s, shuffled, spec)
    assert a.stiffness.data.tobytes() == b.stiffness.data.tobytes()
    assert a.mass.data.tobytes() == b.mass.data.tobytes()


@given(st.integers(0, 2**32 - 1))
def test_bilinear_form_symmetric_and_bounded(filtration, seed):
    s, h, spec = filtration
    sys_ = assemble(s, _full(s), spec)
    lap = assemble(s, _full(s), make_operator("laplacian", s))
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, sys_.dof_count))
    assert bilinear_form(sys_, u, v) == bilinear_form(sys_, v, u)
    alpha = np.linalg.eigvalsh(spec.a_field)[:, 0].min()
    lower = alpha * (u @ lap.stiffness @ u) - np.abs(spec.c_field).max() * (u @ sys_.mass @ u)
    assert bilinear_form(sys_, u, u) >= lower - 1e-9 * abs(lower)


def test_matrices_symmetric_positive(filtration):
    s, h, spec = filtration
    sys_ = assemble(s, _full(s), spec)
    assert (sys_.stiffness != sys_.stiffness.T).nnz == 0
    assert (sys_.mass != sys_.mass.T).nnz == 0
    assert np.linalg.eigvalsh(sys_.mass.toarray())[0] > 0


def test_bilinear_form_shift_identity():
    s = build_surface("disk", 8, [1])
    lap = assemble(s, _full(s), make_operator("laplacian", s))
    sh = assemble(s, _full(s), make_operator("shifted_laplacian", s, c0=7.5))
    u = np.random.default_rng(0).standard_normal(lap.dof_count)
    assert bilinear_form(sh, u, u) == pytest.approx(bilinear_form(lap, u, u) - 7.5 * (u @ lap.mass @ u), rel=1e-13)
    with pytest.raises(AssemblyError):
        bilinear_form(sh, u[:-1], u[:-1])


def test_conformal_factor_scales_mass_only():
    s = build_surface("rectangle", 8, [1, 1])
    t = stretch_metric(s, 0.3, 10.0)
    a = assemble(s, _full(s), make_operator("laplacian", s))
    b = assemble(t, _full(t), make_operator("laplacian", t))
    assert np.allclose(a.stiffness.toarray(), b.stiffness.toarray(), atol=1e-13)
    assert b.mass.sum() > a.mass.sum()


def test_volume_constraint_projector():
    s = build_surface("rectangle", 10, [1, 1])
    sys_ = assemble(s, _full(s), make_operator("laplacian", s, constraint="volume_constrained"))
    n = sys_.dof_count
    assert np.allclose(sys_.constraint_vector, (1 / 10) ** 2)
    Q = sys_.projector_matrix()
    M = sys_.mass.toarray()
    assert np.max(np.abs(Q @ Q - Q)) < 1e-12
    assert np.max(np.abs(M @ Q - (M @ Q).T)) < 1e-12
    ones = np.ones(n)
    # constants carry nonzero mean, so they are not admissible
    assert abs(sys_.constraint_vector @ ones) > 0
    assert np.linalg.norm(Q @ ones - ones) > 0.5 * np.linalg.norm(ones)
    assert np.allclose(sys_.constraint_vector @ Q, 0, atol=1e-14)
    B = sys_.constraint_basis()
    assert B.shape == (n, n - 1)
    assert np.allclose(B.T @ M @ B, np.eye(n - 1), atol=1e-10)
    assert np.allclose(sys_.constraint_vector @ B, 0, atol=1e-12)


def test_jacobi_residual():
    s = build_surface("rectangle", 16, [1, 1])
    lap = assemble(s, _full(s), make_operator("laplacian", s))
    res = smallest_eigenpairs(lap, 3)
    for lam, u in zip(res.eigenvalues, res.eigenvectors.T):
        assert jacobi_residual(lap, u) == pytest.approx(abs(lam), rel=1e-8)
    # shifting by lambda_1 turns the first eigenvector into a Jacobi field
    sh = assemble(s, _full(s), make_operator("shifted_laplacian", s, c0=res.eigenvalues[0]))
    assert jacobi_residual(sh, res.eigenvectors[:, 0]) < 1e-8
    u = np.random.default_rng(1).standard_normal(lap.dof_count)
    assert jacobi_residual(lap, u) >= res.eigenvalues[0] * (1 - 1e-10)
    with pytest.raises(AssemblyError):
        jacobi_residual(lap, np.zeros(lap.dof_count))


def test_export_matrix_market(tmp_path):
    from scipy.io import mmread

    s = build_surface("rectangle", 6, [1, 1])
    sys_ = assemble(s, _full(s), make_operator("laplacian", s))
    export_matrix_market(sys_, str(tmp_path / "sq"))
    k = mmread(str(tmp_path / "sq_K.mtx"))
    assert np.allclose(k.toarray(), sys_.stiffness.toarray())
