"""Eigenvalue branches along a sublevel filtration and the Morse index count.

On a fixed mesh the raw sublevel domain only changes when ``t`` passes a
vertex value, so raw branches are step functions of ``t``. Between two
consecutive vertex values ``tau_j < tau_{j+1}`` the sampled system is the
larger domain ``D(tau_{j+1}+)`` with the newly admitted degrees of freedom
held down by a diagonal penalty ``kappa_i (1 - theta) / theta``, where
``theta = (t - tau_j) / (tau_{j+1} - tau_j)``. As ``theta -> 0`` this
recovers the smaller domain and at ``theta = 1`` it is the larger one, so
every branch is continuous and non-increasing in ``t`` and a zero crossing
can be located by root finding.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .assembly import AssemblyError, assemble, element_data
from .eigen import smallest_eigenpairs
from .surface import _values, sublevel_domain

logger = logging.getLogger(__name__)

_BIG = 1e300


class FlowError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridPolicy:
    """Base grid intervals and depth of dyadic refinement near special values."""

    base: int = 64
    refine_depth: int = 8


@dataclass(frozen=True)
class Tolerances:
    """``None`` means relative to ``scale = max(1, |lambda_k(b)|)``."""

    null_tol: Optional[float] = None
    mono_tol: Optional[float] = None
    eig_tol: float = 1e-12
    null_rel: float = 1e-6
    mono_rel: float = 1e-8


@dataclass(frozen=True, eq=False)
class SpectralSample:
    t: float
    eigenvalues: np.ndarray
    nullity: int
    euler_characteristic: int
    dof_count: int
    converged: bool = True

    def to_dict(self):
        return {
            "t": self.t,
            "eigenvalues": [_finite_or_none(x) for x in self.eigenvalues],
            "nullity": self.nullity,
            "euler_characteristic": self.euler_characteristic,
            "dof_count": self.dof_count,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class Crossing:
    branch: int  # 1-based, lowest branch of the group
    bracket: Tuple[float, float]
    t_star: float
    multiplicity: int
    refined: bool = True
    residual: float = 0.0
    branches: Tuple[int, ...] = ()
    endpoint: bool = False  # branch ends inside the null band: kernel at b, not counted

    def to_dict(self):
        return {"branch": self.branch, "branches": list(self.branches or (self.branch,)),
                "bracket": list(self.bracket), "t_star": self.t_star, "endpoint": self.endpoint,
                "multiplicity": self.multiplicity, "refined": self.refined, "residual": self.residual}


@dataclass(eq=False)
class SweepReport:
    samples: List[SpectralSample]
    crossings: List[Crossing]
    index_direct: int
    index_summed: int
    max_jump: List[float]
    monotonicity_violations: List[Tuple[int, float]]
    k: int
    t_range: Tuple[float, float]
    null_tol: float
    mono_tol: float
    catalog_values: List[float] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)
    crossings_per_branch: List[int] = field(default_factory=list)

    @property
    def ok(self):
        return (self.index_direct == self.index_summed and not self.monotonicity_violations
                and all(c.refined for c in self.crossings) and all(s.converged for s in self.samples))

    def to_dict(self):
        return {
            "k": self.k,
            "t_range": list(self.t_range),
            "tolerances": {"null_tol": self.null_tol, "mono_tol": self.mono_tol},
            "indices": {"index_direct": self.index_direct, "index_summed": self.index_summed},
            "catalog_values": self.catalog_values,
            "crossings": [c.to_dict() for c in self.crossings],
            "crossings_per_branch": self.crossings_per_branch,
            "moduli": {"max_jump": self.max_jump},
            "monotonicity_violations": [list(v) for v in self.monotonicity_violations],
            "flags": self.flags,
            "samples": [s.to_dict() for s in self.samples],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=False) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "k", "lambda", "nullity", "euler_char"])
        for s in self.samples:
            for i, lam in enumerate(s.eigenvalues, start=1):
                w.writerow([repr(s.t), i, repr(float(lam)) if np.isfinite(lam) else "inf",
                            s.nullity, s.euler_characteristic])
        return buf.getvalue()


def _finite_or_none(x):
    x = float(x)
    return x if math.isfinite(x) else None


def nullity_of_sample(sample, null_tol):
    """Number of eigenvalues in ``[-null_tol, null_tol]``."""
    if not null_tol > 0:
        raise FlowError("null_tol must be positive")
    lam = sample.eigenvalues if hasattr(sample, "eigenvalues") else sample
    return int(np.count_nonzero(np.abs(np.asarray(lam, dtype=np.float64)) <= null_tol))


def morse_index_direct(sample, null_tol):
    """Negative eigenvalue count of the final sample.

    Raises
    ------
    FlowError
        If even the last computed eigenvalue is negative, since the index may
        then exceed the number of computed branches.
    """
    lam = np.asarray(sample.eigenvalues, dtype=np.float64)
    if not getattr(sample, "converged", True):
        raise FlowError("final sample did not converge")
    if len(lam) and lam[-1] < -null_tol:
        raise FlowError("k too small: index may exceed computed branches")
    return int(np.count_nonzero(lam < -null_tol))


def morse_index_summed(report):
    """Sum of crossing multiplicities with ``t* < b``.

    Crossings flagged ``endpoint`` (the branch ends within ``null_tol`` of
    zero) belong to the kernel at ``b`` and are excluded.
    """
    bad = [c for c in report.crossings if not c.refined and not c.endpoint]
    if bad:
        raise FlowError(f"unrefined sign change on branch {bad[0].branch} in {bad[0].bracket}")
    b = report.t_range[1]
    return int(sum(c.multiplicity for c in report.crossings if c.t_star < b and not c.endpoint))


def _branch_matrix(samples):
    return np.array([s.eigenvalues for s in samples], dtype=np.float64).reshape(len(samples), -1)


def check_monotonicity(report, mono_tol=None):
    """Every ``(branch, t_i)`` with ``lambda(t_{i+1}) > lambda(t_i) + mono_tol``.

    Samples are taken in the order stored in the report.
    """
    if not report.samples:
        raise FlowError("empty report")
    tol = report.mono_tol if mono_tol is None else mono_tol
    lam = _branch_matrix(report.samples)
    if len(lam) < 2:
        return []
    a, b = lam[:-1], lam[1:]
    with np.errstate(invalid="ignore"):
        bad = np.isfinite(b) & (b > a + tol)
    ts = [s.t for s in report.samples]
    return [(int(k) + 1, float(ts[i])) for i, k in zip(*np.nonzero(bad))]


def _max_jumps(samples, window=None):
    if window is not None:
        lo, hi = window
        samples = [s for s in samples if lo <= s.t <= hi]
    lam = _branch_matrix(samples)
    if len(lam) < 2:
        return [0.0] * lam.shape[1]
    d = np.abs(np.diff(lam, axis=0))
    d[~np.isfinite(d)] = 0.0
    return [float(x) for x in d.max(axis=0)]


@dataclass
class ContinuityReport:
    levels: List[int]
    window: Optional[Tuple[float, float]]
    max_jump: List[List[float]]  # per level, per branch
    modulus: List[float]  # per level, max over branches
    decreasing: bool  # every branch strictly decreasing across levels

    def to_dict(self):
        return {"levels": self.levels, "window": None if self.window is None else list(self.window),
                "max_jump": self.max_jump, "modulus": self.modulus, "decreasing": self.decreasing}


def continuity_report(reports, window=None):
    """Per-branch maximal jumps across sweeps at increasing grid refinement.

    Parameters
    ----------
    reports : sequence of SweepReport
        Sweeps of one filtration ordered from coarse to fine.
    window : (float, float), optional
        Restrict to samples with ``t`` inside the window.
    """
    if len(reports) < 2:
        raise FlowError("continuity_report needs at least two refinement levels")
    jumps = [_max_jumps(r.samples, window) for r in reports]
    nb = min(len(j) for j in jumps)
    jumps = [j[:nb] for j in jumps]
    arr = np.array(jumps)
    decreasing = bool(np.all(np.diff(arr, axis=0) < 0) or np.all(arr == 0))
    levels = [len(r.samples) for r in reports]
    return ContinuityReport(levels, window, jumps, [float(max(j, default=0.0)) for j in jumps], decreasing)


def _group_values(h, rel=1e-12):
    """Distinct values of ``h``, merging rounding-level ties.

    Each group is represented by its largest member, so the domain just above
    a representative contains the whole group.
    """
    v = np.unique(h)
    tol = rel * max(1.0, float(v[-1] - v[0]))
    last = np.append(np.diff(v) > tol, True)
    return v[last]


class Filtration:
    """Relaxed systems ``t -> (K(t), M)`` for one surface, field and operator.

    Assembled domains are cached per vertex value, so repeated evaluation
    (root finding, refinement) only pays for the eigensolve.
    """

    def __init__(self, surface, h, spec, k, eig_tol, seed):
        self.surface = surface
        self.h = _values(h)
        self.spec = spec
        self.k = k
        self.eig_tol = eig_tol
        self.seed = seed
        self.tau = _group_values(self.h)
        self.elements = element_data(surface, spec)
        self._systems = {}

    def _system(self, j):
        # domain containing every vertex with h <= tau[j]
        if j not in self._systems:
            dom = sublevel_domain(self.surface, self.h, np.nextafter(self.tau[j], np.inf))
            try:
                sys_ = assemble(self.surface, dom, self.spec, self.elements)
            except AssemblyError:
                sys_ = None
            self._systems[j] = sys_
        return self._systems[j]

    def system(self, t):
        j = int(np.searchsorted(self.tau, t, side="left")) - 1
        if j < 0:
            return None
        hi = self._system(min(j + 1, len(self.tau) - 1))
        if j + 1 >= len(self.tau) or hi is None:
            return self._system(j)
        lo = self._system(j)
        theta = (t - self.tau[j]) / (self.tau[j + 1] - self.tau[j])
        if theta >= 1.0:
            return hi
        if lo is None:
            new = np.arange(hi.dof_count)
        else:
            new = np.flatnonzero(~np.isin(hi.dof_map, lo.dof_map))
        if len(new) == 0:
            return hi
        if theta <= 0.0:
            return lo
        kappa = hi.stiffness_grad.diagonal()[new]
        return hi.with_diagonal_shift(new, kappa * (1.0 - theta) / theta)

    def eigenvalues(self, t):
        """Padded eigenvalues, dof count and convergence flag, or None if empty."""
        sys_ = self.system(t)
        if sys_ is None:
            return None
        ndim = sys_.dof_count - (1 if sys_.constrained else 0)
        kk = min(self.k, ndim)
        if kk < 1:
            return None
        res = smallest_eigenpairs(sys_, kk, tol=self.eig_tol, seed=self.seed)
        lam = np.full(self.k, np.inf)
        lam[: len(res)] = res.eigenvalues
        return lam, sys_.dof_count, res.converged

    def sample(self, t, null_tol):
        out = self.eigenvalues(t)
        if out is None:
            logger.info("t=%r: domain has no degrees of freedom, sample skipped", t)
            return None
        lam, ndof, conv = out
        chi = sublevel_domain(self.surface, self.h, t).euler_characteristic
        nul = nullity_of_sample(lam, null_tol)
        return SpectralSample(float(t), lam, nul, int(chi), int(ndof), bool(conv))


def _dyadic(center, step, depth, lo, hi):
    pts = [center]
    for level in range(1, depth + 1):
        d = step / 2 ** level
        pts += [center - d, center + d]
    return [p for p in pts if lo <= p <= hi]


def run_sweep(surface, h, catalog, spec, k, t_range=(None, None), grid=GridPolicy(),
              tolerances=Tolerances(), seed=0, threads=1):
    """Sample ``lambda_1..lambda_k`` along ``D(t)`` and count zero crossings.

    Parameters
    ----------
    surface, h, catalog
        Surface, Morse function and its critical catalog.
    spec : OperatorSpec
    k : int
        Number of branches followed. Must cover every negative eigenvalue
        at the end of the sweep.
    t_range : (float or None, float or None)
        Start and end ``b``. The start defaults to the first vertex value
        above the base point, the end to just above ``max(h)`` so the last
        sample is the whole surface.
    threads : int
        Samples are evaluated by a thread pool; the report does not depend on
        the completion order.

    Returns
    -------
    SweepReport
    """
    if k < 1:
        raise FlowError("k must be >= 1")
    if grid.base < 1 or grid.refine_depth < 0:
        raise FlowError("grid.base must be >= 1 and refine_depth >= 0")
    hv = _values(h)
    filt = Filtration(surface, hv, spec, k, tolerances.eig_tol, seed)
    tau = filt.tau
    a, b = t_range
    if b is None:
        b = float(np.nextafter(tau[-1], np.inf) + 1e-9 * max(1.0, float(tau[-1] - tau[0])))
    if a is None:
        a = float(tau[1]) if len(tau) > 1 else float(b)
    a, b = float(a), float(b)
    if not a < b:
        raise FlowError(f"empty t range [{a}, {b}]")
    cat_values = [float(v) for v in catalog.values]
    if a <= cat_values[0]:
        raise FlowError("t range must start above the first critical value")
    flags = []

    final = filt.eigenvalues(b)
    if final is None:
        raise FlowError("final domain has no degrees of freedom")
    lam_k = final[0][np.isfinite(final[0])][-1]
    scale = max(1.0, abs(float(lam_k)))
    null_tol = tolerances.null_tol if tolerances.null_tol is not None else tolerances.null_rel * scale
    mono_tol = tolerances.mono_tol if tolerances.mono_tol is not None else tolerances.mono_rel * scale
    if lam_k < -null_tol:
        raise FlowError("k too small: index may exceed computed branches")

    step = (b - a) / grid.base
    ts = set(np.linspace(a, b, grid.base + 1).tolist())
    for tj in cat_values:
        if a < tj < b:
            ts.update(_dyadic(tj, step, grid.refine_depth, a, b))
    samples = _evaluate(filt, sorted(ts), null_tol, threads)

    # locate sign changes on each branch and refine them
    crossings = []
    extra = set()
    lam = _branch_matrix(samples)
    for i in range(k):
        col = lam[:, i]
        pos = col > 0
        for s in np.flatnonzero(pos[:-1] & ~pos[1:]):
            t_lo, t_hi = samples[s].t, samples[s + 1].t
            cr = _refine(filt, i, t_lo, t_hi, null_tol)
            crossings.append(cr)
            extra.update(_dyadic(cr.t_star, step, grid.refine_depth, a, b))
        if len(col) and col[0] <= 0:
            flags.append(f"branch {i + 1} non-positive at t={a!r}: crossing before the sweep start")
    crossings = _merge(crossings, filt, null_tol)
    lam_b = final[0]
    crossings = [replace(c, endpoint=bool(all(lam_b[j - 1] >= -null_tol for j in c.branches)))
                 for c in crossings]
    extra.difference_update(s.t for s in samples)
    if extra:
        samples = sorted(samples + _evaluate(filt, sorted(extra), null_tol, threads), key=lambda s: s.t)

    per_branch = [sum(1 for c in crossings if i + 1 in c.branches) for i in range(k)]
    final_sample = samples[-1]
    if final_sample.t != b:
        raise FlowError("internal: final sample missing")
    if final_sample.nullity:
        flags.append(f"nullity at endpoint: {final_sample.nullity} eigenvalue(s) within null_tol at t=b")
    if not all(s.converged for s in samples):
        flags.append("partial eigensolver convergence at some samples")
    report = SweepReport(samples, crossings, morse_index_direct(final_sample, null_tol), 0,
                         _max_jumps(samples), [], k, (a, b), null_tol, mono_tol, cat_values, flags,
                         per_branch)
    report.monotonicity_violations = check_monotonicity(report)
    report.index_summed = morse_index_summed(report)
    return report


def _evaluate(filt, ts, null_tol, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(lambda t: filt.sample(t, null_tol), ts))
    else:
        out = [filt.sample(t, null_tol) for t in ts]
    return [s for s in out if s is not None]


def _refine(filt, i, t_lo, t_hi, null_tol):
    def f(t):
        out = filt.eigenvalues(t)
        if out is None:
            return _BIG
        v = out[0][i]
        return v if np.isfinite(v) else _BIG

    f_lo, f_hi = f(t_lo), f(t_hi)
    if f_hi == 0.0:
        t_star = t_hi
    else:
        t_star = brentq(f, t_lo, t_hi, xtol=4 * np.finfo(float).eps * abs(t_hi), rtol=4 * np.finfo(float).eps,
                        maxiter=200)
    val = f(t_star)
    if abs(val) > null_tol:
        # the root lies between two adjacent floats; pick the closer side
        other = np.nextafter(t_star, t_hi if val > 0 else t_lo)
        if abs(f(other)) < abs(val):
            t_star, val = float(other), f(other)
    refined = abs(val) <= null_tol
    if not refined:
        logger.warning("branch %d: crossing in [%r, %r] not resolved (|lambda|=%g)", i + 1, t_lo, t_hi, abs(val))
    return Crossing(i + 1, (float(t_lo), float(t_hi)), float(t_star), 1, bool(refined), float(abs(val)), (i + 1,))


def _merge(crossings, filt, null_tol):
    """Group crossings that share a root and set multiplicity to the nullity there."""
    crossings = sorted(crossings, key=lambda c: (c.t_star, c.branch))
    out = []
    group = []
    for c in crossings + [None]:
        if group and (c is None or c.t_star != group[0].t_star):
            lam = filt.eigenvalues(group[0].t_star)[0]
            nul = nullity_of_sample(lam, null_tol)
            first = group[0]
            if nul != len(group):
                logger.info("crossing at t=%r: %d branches, nullity %d", first.t_star, len(group), nul)
            out.append(Crossing(first.branch, first.bracket, first.t_star, len(group),
                                all(g.refined for g in group), max(g.residual for g in group),
                                tuple(g.branch for g in group)))
            group = []
        if c is not None:
            group.append(c)
    return out
