import json
import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from morseflow.assembly import jacobi_residual
from morseflow.eigen import smallest_eigenpairs
from morseflow.flow import (
    Crossing,
    Filtration,
    FlowError,
    GridPolicy,
    SpectralSample,
    SweepReport,
    check_monotonicity,
    continuity_report,
    morse_index_direct,
    morse_index_summed,
    nullity_of_sample,
    run_sweep,
)
from morseflow.operators import cmc_cylinder_stability, make_operator
from morseflow.surface import build_surface, morse_function


def _sample(t, lam):
    lam = np.asarray(lam, dtype=float)
    return SpectralSample(t, lam, nullity_of_sample(lam, 1e-6), 1, 10)


def _report(samples, crossings=(), b=1.0):
    return SweepReport(list(samples), list(crossings), 0, 0, [], [], len(samples[0].eigenvalues), (0.0, b),
                       1e-6, 1e-8)


def test_nullity_examples():
    assert nullity_of_sample(np.array([-3, 1e-9, 2]), 1e-6) == 1
    assert nullity_of_sample(np.array([-3, -1, 2]), 1e-6) == 0
    assert nullity_of_sample(np.array([-1e-8, 1e-8, 5]), 1e-6) == 2
    with pytest.raises(FlowError):
        nullity_of_sample(np.array([1.0]), 0.0)


def test_index_direct():
    assert morse_index_direct(_sample(1, [1, 2, 3]), 1e-6) == 0
    assert morse_index_direct(_sample(1, [-2, -1, 3]), 1e-6) == 2
    with pytest.raises(FlowError, match="k too small"):
        morse_index_direct(_sample(1, [-2, -1]), 1e-6)


def test_index_summed():
    s = [_sample(0.5, [1.0]), _sample(1.0, [2.0])]
    assert morse_index_summed(_report(s)) == 0
    crossings = [Crossing(1, (0.1, 0.2), 0.15, 2, True, 0.0, (1, 2)),
                 Crossing(3, (0.9, 1.0), 1.0, 1, True, 0.0, (3,)),
                 Crossing(4, (0.9, 1.0), 0.99, 1, True, 0.0, (4,), endpoint=True)]
    assert morse_index_summed(_report(s, crossings)) == 2
    with pytest.raises(FlowError, match="unrefined"):
        morse_index_summed(_report(s, [Crossing(1, (0.1, 0.2), 0.15, 1, False)]))


def test_monotonicity_reversed_order_flags_every_pair():
    s = [_sample(t, [10 - t, 20 - t]) for t in np.linspace(0, 1, 5)]
    assert check_monotonicity(_report(s)) == []
    rev = _report(s[::-1])
    flagged = check_monotonicity(rev)
    assert len(flagged) == 2 * 4
    with pytest.raises(FlowError):
        check_monotonicity(SweepReport([], [], 0, 0, [], [], 1, (0, 1), 1e-6, 1e-8))


@pytest.fixture(scope="module")
def square16():
    s = build_surface("rectangle", 16, [1, 1])
    h, cat = morse_function(s, s.nearest_vertex([0.5, 0.5]), 0.01, seed=0)
    return s, h, cat


def test_square_sweep_index(square16):
    s, h, cat = square16
    r = run_sweep(s, h, cat, make_operator("shifted_laplacian", s, c0=25.0), 3, grid=GridPolicy(16, 4))
    assert r.index_direct == r.index_summed == 1
    assert r.monotonicity_violations == []
    assert r.crossings_per_branch == [1, 0, 0]
    assert all(c.refined and abs(c.residual) <= r.null_tol for c in r.crossings)
    ts = [x.t for x in r.samples]
    assert ts == sorted(ts) and ts[-1] == r.t_range[1]


def test_crossing_is_a_jacobi_field(square16):
    s, h, cat = square16
    spec = make_operator("shifted_laplacian", s, c0=25.0)
    r = run_sweep(s, h, cat, spec, 3, grid=GridPolicy(16, 4))
    (c,) = r.crossings
    sys_ = Filtration(s, h, spec, 3, 1e-12, 0).system(c.t_star)
    res = smallest_eigenpairs(sys_, 1)
    assert jacobi_residual(sys_, res.eigenvectors[:, 0]) <= r.null_tol


def test_no_crossing_below_first_eigenvalue(square16):
    s, h, cat = square16
    r = run_sweep(s, h, cat, make_operator("shifted_laplacian", s, c0=5.0), 2, grid=GridPolicy(8, 2))
    assert r.index_direct == r.index_summed == 0 and r.crossings == []


def test_endpoint_kernel_is_excluded(square16):
    s, h, cat = square16
    lap = make_operator("laplacian", s)
    lam1 = Filtration(s, h, lap, 1, 1e-12, 0).eigenvalues(10.0)[0][0]
    r = run_sweep(s, h, cat, make_operator("shifted_laplacian", s, c0=lam1), 2, grid=GridPolicy(8, 2))
    assert r.samples[-1].nullity == 1
    assert any("nullity at endpoint" in f for f in r.flags)
    assert r.index_direct == 0 and r.index_summed == 0


def test_k_too_small(square16):
    s, h, cat = square16
    with pytest.raises(FlowError, match="k too small"):
        run_sweep(s, h, cat, make_operator("shifted_laplacian", s, c0=60.0), 1, grid=GridPolicy(4, 0))


def test_threads_and_determinism(square16):
    s, h, cat = square16
    spec = make_operator("shifted_laplacian", s, c0=25.0)
    a = run_sweep(s, h, cat, spec, 2, grid=GridPolicy(12, 3), threads=1)
    b = run_sweep(s, h, cat, spec, 2, grid=GridPolicy(12, 3), threads=4)
    assert a.to_json() == b.to_json()
    doc = json.loads(a.to_json())
    assert set(doc) >= {"samples", "crossings", "indices", "moduli"}
    lines = a.to_csv().splitlines()
    assert lines[0] == "t,k,lambda,nullity,euler_char"
    assert len(lines) == 1 + 2 * len(a.samples)


def test_plateau_sweep_has_zero_modulus(square16):
    s, h, cat = square16
    top = float(h.values.max())
    spec = make_operator("laplacian", s)
    reps = [run_sweep(s, h, cat, spec, 2, t_range=(top + 0.01, top + 0.02), grid=GridPolicy(n, 0))
            for n in (4, 8)]
    c = continuity_report(reps)
    assert c.modulus == [0.0, 0.0] and c.decreasing
    with pytest.raises(FlowError):
        continuity_report(reps[:1])


def test_empty_samples_are_skipped(square16, caplog):
    s, h, cat = square16
    with caplog.at_level(logging.INFO, logger="morseflow.flow"):
        r = run_sweep(s, h, cat, make_operator("laplacian", s), 1, t_range=(1e-6, None), grid=GridPolicy(64, 0))
    assert "sample skipped" in caplog.text
    assert len(r.samples) < 65
    with pytest.raises(FlowError):
        run_sweep(s, h, cat, make_operator("laplacian", s), 1, t_range=(0.0, None))


@given(st.floats(0.01, 0.6), st.floats(0.0, 0.05))
def test_relaxed_branches_are_monotone(square16, t, dt):
    s, h, _ = square16
    f = Filtration(s, h, make_operator("shifted_laplacian", s, c0=10.0), 3, 1e-12, 0)
    a, b = f.eigenvalues(t), f.eigenvalues(t + dt)
    if a is None or b is None:
        return
    fa, fb = a[0], b[0]
    ok = np.isfinite(fb)
    assert np.all(fb[ok] <= fa[ok] + 1e-8 * np.maximum(1, np.abs(fa[ok])))


def test_relaxed_branches_are_continuous_at_vertex_values(square16):
    s, h, _ = square16
    f = Filtration(s, h, make_operator("laplacian", s), 2, 1e-12, 0)
    for tau in f.tau[60:200:20]:
        at = f.eigenvalues(tau)[0]
        after = f.eigenvalues(tau + 1e-9 * (f.tau[1] - f.tau[0]))[0]
        assert np.allclose(at, after, rtol=1e-5)


def test_cmc_volume_constrained_counts_agree(cylinder16):
    s, h, cat = cylinder16
    spec = cmc_cylinder_stability(1 / (2 * np.pi), s, constraint="volume_constrained")
    r = run_sweep(s, h, cat, spec, 6, t_range=(0.02, None), grid=GridPolicy(16, 3))
    assert r.index_direct == r.index_summed
    assert r.monotonicity_violations == []
    plain = run_sweep(s, h, cat, cmc_cylinder_stability(1 / (2 * np.pi), s), 6, t_range=(0.02, None),
                      grid=GridPolicy(16, 3))
    # one linear constraint lowers the index by at most one
    assert plain.index_direct - 1 <= r.index_direct <= plain.index_direct
