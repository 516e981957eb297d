"""Discrete 2-manifolds, Morse functions and sublevel-set domains.

A :class:`TriangulatedSurface` stores 2D parameter coordinates together with
an intrinsic metric (edge lengths, optionally modified by a conformal
factor). Periodic identifications are stored in quotient form: vertices that
are glued across a seam are a single vertex, and edge vectors are recovered
with the minimum-image convention.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from . import kernels

logger = logging.getLogger(__name__)

SURFACE_KINDS = ("rectangle", "cylinder", "flat_torus", "disk")


class SurfaceError(ValueError):
    pass


@dataclass(frozen=True)
class Identification:
    """Seam gluing of the parameter domain.

    ``kind`` is one of ``"none"``, ``"periodic_x"`` (cylinder) or
    ``"periodic_xy"`` (flat torus).
    """

    kind: str = "none"
    period_x: Optional[float] = None
    period_y: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("none", "periodic_x", "periodic_xy"):
            raise SurfaceError(f"unknown identification {self.kind!r}")
        if self.kind in ("periodic_x", "periodic_xy") and not (self.period_x and self.period_x > 0):
            raise SurfaceError("periodic identification needs a positive period_x")
        if self.kind == "periodic_xy" and not (self.period_y and self.period_y > 0):
            raise SurfaceError("periodic_xy identification needs a positive period_y")

    def wrap(self, d):
        """Minimum-image representative of displacement vectors ``d``."""
        d = np.array(d, dtype=np.float64, copy=True)
        if self.kind in ("periodic_x", "periodic_xy"):
            d[..., 0] -= self.period_x * np.round(d[..., 0] / self.period_x)
        if self.kind == "periodic_xy":
            d[..., 1] -= self.period_y * np.round(d[..., 1] / self.period_y)
        return d


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _unique_edges(triangles):
    n = int(triangles.max()) + 1
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e = np.sort(e, axis=1)
    keys = np.unique(e[:, 0] * n + e[:, 1])
    return np.stack([keys // n, keys % n], axis=1)


@dataclass(frozen=True, eq=False)
class TriangulatedSurface:
    """Immutable triangle mesh with an intrinsic metric.

    Use :meth:`from_mesh` to build one from positions and triangles; the
    edge list and lengths are derived there.
    """

    positions: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_lengths: np.ndarray
    identification: Identification = field(default_factory=Identification)
    conformal_factor: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "positions", _frozen(self.positions, np.float64))
        object.__setattr__(self, "triangles", _frozen(self.triangles, np.int64))
        object.__setattr__(self, "edges", _frozen(self.edges, np.int64))
        object.__setattr__(self, "edge_lengths", _frozen(self.edge_lengths, np.float64))
        if self.conformal_factor is not None:
            object.__setattr__(self, "conformal_factor", _frozen(self.conformal_factor, np.float64))
        self._validate()

    # -- construction -----------------------------------------------------
    @classmethod
    def from_mesh(cls, positions, triangles, identification=None, conformal_factor=None):
        positions = np.asarray(positions, dtype=np.float64)
        triangles = np.asarray(triangles, dtype=np.int64)
        ident = identification or Identification()
        edges = _unique_edges(triangles)
        d = ident.wrap(positions[edges[:, 1]] - positions[edges[:, 0]])
        lengths = np.hypot(d[:, 0], d[:, 1])
        if conformal_factor is not None:
            s = np.sqrt(np.asarray(conformal_factor, dtype=np.float64))
            lengths = lengths * 0.5 * (s[edges[:, 0]] + s[edges[:, 1]])
        return cls(positions, triangles, edges, lengths, ident, conformal_factor)

    def _validate(self):
        n = self.vertex_count
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise SurfaceError("positions must have shape (n, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3 or len(self.triangles) == 0:
            raise SurfaceError("triangles must have shape (m, 3), m >= 1")
        if self.triangles.min() < 0 or self.triangles.max() >= n:
            raise SurfaceError("triangle index out of range")
        if len(self.edge_lengths) != len(self.edges):
            raise SurfaceError("one length per edge required")
        if not np.all(self.edge_lengths > 0):
            raise SurfaceError("edge lengths must be strictly positive")
        if self.conformal_factor is not None:
            cf = self.conformal_factor
            if cf.shape != (n,) or not np.all(cf > 0):
                raise SurfaceError("conformal_factor must be positive, one per vertex")
        l01, l12, l20 = self.triangle_edge_lengths.T
        slack = 1e-12 * (l01 + l12 + l20)
        if np.any(l01 + l12 <= l20 - slack) or np.any(l12 + l20 <= l01 - slack) or np.any(l20 + l01 <= l12 - slack):
            raise SurfaceError("triangle inequality violated")
        e1, e2 = self.triangle_edge_vectors
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0):
            bad = np.flatnonzero(det <= 0)[:5].tolist()
            raise SurfaceError(f"triangles not positively oriented or degenerate: {bad}")
        # each directed edge at most once: orientable 2-manifold
        directed = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        keys = directed[:, 0] * n + directed[:, 1]
        if len(np.unique(keys)) != len(keys):
            raise SurfaceError("inconsistent orientation or non-manifold edge")
        if np.any(self.edge_triangle_count > 2):
            raise SurfaceError("non-manifold edge with more than two triangles")
        used = np.zeros(n, dtype=bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            raise SurfaceError("isolated vertices present")
        self.vertex_links  # raises on non-manifold vertices
        ncomp, _ = csgraph.connected_components(self.adjacency, directed=False)
        if ncomp != 1:
            raise SurfaceError(f"surface has {ncomp} connected components")

    # -- basic counts -----------------------------------------------------
    @property
    def vertex_count(self):
        return len(self.positions)

    @property
    def triangle_count(self):
        return len(self.triangles)

    @property
    def edge_count(self):
        return len(self.edges)

    @property
    def euler_characteristic(self):
        return self.vertex_count - self.edge_count + self.triangle_count

    # -- derived topology ---------------------------------------------------
    @cached_property
    def triangle_edges(self):
        """Edge index of (t0,t1), (t1,t2), (t2,t0) for every triangle."""
        n = self.vertex_count
        ekeys = self.edges[:, 0] * n + self.edges[:, 1]
        out = np.empty(self.triangles.shape, dtype=np.int64)
        for j in range(3):
            a = self.triangles[:, j]
            b = self.triangles[:, (j + 1) % 3]
            out[:, j] = np.searchsorted(ekeys, np.minimum(a, b) * n + np.maximum(a, b))
        return out

    @cached_property
    def edge_triangle_count(self):
        return np.bincount(self.triangle_edges.ravel(), minlength=self.edge_count)

    @cached_property
    def boundary_edge_mask(self):
        return self.edge_triangle_count == 1

    @cached_property
    def boundary_vertex_mask(self):
        mask = np.zeros(self.vertex_count, dtype=bool)
        mask[self.edges[self.boundary_edge_mask].ravel()] = True
        return mask

    @cached_property
    def adjacency(self):
        n = self.vertex_count
        e = self.edges
        return sparse.csr_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n))

    @cached_property
    def vertex_links(self):
        """Ordered vertex links as ``(ptr, idx, closed)`` in CSR layout."""
        n = self.vertex_count
        succ = [dict() for _ in range(n)]
        for a, b, c in self.triangles.tolist():
            succ[a][b] = c
            succ[b][c] = a
            succ[c][a] = b
        ptr = np.zeros(n + 1, dtype=np.int64)
        idx = []
        closed = np.zeros(n, dtype=bool)
        for v in range(n):
            nxt = succ[v]
            heads = set(nxt) - set(nxt.values())
            if len(heads) > 1:
                raise SurfaceError(f"vertex {v} has a disconnected link (non-manifold)")
            start = heads.pop() if heads else min(nxt)
            chain = [start]
            cur = start
            while cur in nxt:
                cur = nxt[cur]
                if cur == start:
                    closed[v] = True
                    break
                chain.append(cur)
                if len(chain) > len(nxt) + 1:
                    raise SurfaceError(f"vertex {v} has a malformed link")
            expected = len(nxt) if closed[v] else len(nxt) + 1
            if len(chain) != expected:
                raise SurfaceError(f"vertex {v} link is not a single cycle or path")
            idx.extend(chain)
            ptr[v + 1] = len(idx)
        return ptr, np.asarray(idx, dtype=np.int64), closed

    @cached_property
    def triangle_edge_vectors(self):
        """Unwrapped parameter-space vectors ``p1 - p0`` and ``p2 - p0``."""
        p = self.positions
        t = self.triangles
        e1 = self.identification.wrap(p[t[:, 1]] - p[t[:, 0]])
        e2 = self.identification.wrap(p[t[:, 2]] - p[t[:, 0]])
        return e1, e2

    @cached_property
    def triangle_edge_lengths(self):
        """Intrinsic lengths of (t0,t1), (t1,t2), (t2,t0) per triangle."""
        return self.edge_lengths[self.triangle_edges]

    @cached_property
    def triangle_area_scale(self):
        """Conformal area multiplier per triangle (vertex average)."""
        if self.conformal_factor is None:
            return np.ones(self.triangle_count)
        return self.conformal_factor[self.triangles].mean(axis=1)

    @cached_property
    def min_edge_length(self):
        return float(self.edge_lengths.min())

    def nearest_vertex(self, point):
        d = self.identification.wrap(self.positions - np.asarray(point, dtype=np.float64))
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    # -- geodesic graph -------------------------------------------------------
    @cached_property
    def _geodesic_graph(self):
        # nodes: vertices, then one midpoint per edge; all 15 pairs inside each
        # triangle are connected with their straight-line intrinsic distance
        n, m = self.vertex_count, self.triangle_count
        l01, l12, l20 = self.triangle_edge_lengths.T
        x2 = (l01 ** 2 + l20 ** 2 - l12 ** 2) / (2.0 * l01)
        y2 = np.sqrt(np.maximum(l20 ** 2 - x2 ** 2, 0.0))
        zero = np.zeros(m)
        pts = np.stack([
            np.stack([zero, zero], 1),
            np.stack([l01, zero], 1),
            np.stack([x2, y2], 1),
        ], axis=1)
        mids = 0.5 * (pts + np.roll(pts, -1, axis=1))
        local = np.concatenate([pts, mids], axis=1)
        ids = np.concatenate([self.triangles, n + self.triangle_edges], axis=1)
        ii, jj = np.triu_indices(6, k=1)
        w = np.linalg.norm(local[:, ii] - local[:, jj], axis=2).ravel()
        a = ids[:, ii].ravel()
        b = ids[:, jj].ravel()
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        nn = n + self.edge_count
        order = np.lexsort((w, hi, lo))
        lo, hi, w = lo[order], hi[order], w[order]
        first = np.ones(len(lo), dtype=bool)
        first[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
        lo, hi, w = lo[first], hi[first], w[first]
        return sparse.csr_matrix((np.r_[w, w], (np.r_[lo, hi], np.r_[hi, lo])), shape=(nn, nn))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per vertex of ``surface``."""

    values: np.ndarray
    surface: TriangulatedSurface

    def __post_init__(self):
        v = _frozen(self.values, np.float64)
        if v.shape != (self.surface.vertex_count,):
            raise SurfaceError("scalar field length must equal vertex_count")
        if not np.all(np.isfinite(v)):
            raise SurfaceError("scalar field values must be finite")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)


def _values(h):
    return np.asarray(getattr(h, "values", h), dtype=np.float64)


@dataclass(frozen=True)
class CriticalPoint:
    vertex: int
    value: float
    kind: str  # minimum | saddle | maximum
    index: int
    multiplicity: int = 1


@dataclass(frozen=True)
class CriticalCatalog:
    entries: tuple
    base_point: int

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def values(self):
        return np.array([e.value for e in self.entries])

    def of_kind(self, kind):
        return [e for e in self.entries if e.kind == kind]

    @property
    def alternating_sum(self):
        return sum((-1) ** e.index * e.multiplicity for e in self.entries)


@dataclass(frozen=True, eq=False)
class SublevelDomain:
    """The vertex-induced sublevel set ``{h < t}``."""

    t: float
    active_vertices: np.ndarray
    active_triangles: np.ndarray
    boundary_edges: np.ndarray
    interior_vertices: np.ndarray
    edge_count: int

    @property
    def euler_characteristic(self):
        return len(self.active_vertices) - self.edge_count + len(self.active_triangles)

    @property
    def is_empty(self):
        return len(self.active_vertices) == 0

    @property
    def dof_count(self):
        return len(self.interior_vertices)


# ---------------------------------------------------------------------------
# builders


def build_surface(kind, resolution, dimensions):
    """Structured triangulation of a rectangle, cylinder, flat torus or disk.

    ``resolution`` is the number of cells along the first dimension; the
    second dimension gets a proportional count so cells stay near-square.
    For ``disk`` it is the number of concentric rings and ``dimensions`` is
    ``[radius]``.
    """
    if kind not in SURFACE_KINDS:
        raise SurfaceError(f"unknown surface kind {kind!r}")
    if int(resolution) != resolution or resolution < 4:
        raise SurfaceError("resolution must be an integer >= 4")
    resolution = int(resolution)
    dims = [float(d) for d in np.atleast_1d(dimensions)]
    if not dims or any(not np.isfinite(d) or d <= 0 for d in dims):
        raise SurfaceError("dimensions must be positive")
    if kind == "disk":
        return _build_disk(resolution, dims[0])
    if len(dims) != 2:
        raise SurfaceError(f"{kind} needs two dimensions")
    width, height = dims
    nx = resolution
    ny = max(4, int(round(resolution * height / width)))
    wrap_x = kind in ("cylinder", "flat_torus")
    wrap_y = kind == "flat_torus"
    cols = nx if wrap_x else nx + 1
    rows = ny if wrap_y else ny + 1
    xs = np.arange(cols) * (width / nx)
    ys = np.arange(rows) * (height / ny)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    positions = np.stack([gx.ravel(), gy.ravel()], axis=1)

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    i, j = i.ravel(), j.ravel()
    ip = (i + 1) % cols
    jp = (j + 1) % rows
    a = j * cols + i
    b = j * cols + ip
    c = jp * cols + ip
    d = jp * cols + i
    triangles = np.stack([np.stack([a, b, c], 1), np.stack([a, c, d], 1)], axis=1).reshape(-1, 3)

    if kind == "rectangle":
        ident = Identification()
    elif kind == "cylinder":
        ident = Identification("periodic_x", width)
    else:
        ident = Identification("periodic_xy", width, height)
    return TriangulatedSurface.from_mesh(positions, triangles, ident)


def _build_disk(rings, radius):
    # ring r has 6r points; consecutive rings are zipped by angle
    pts = [np.zeros((1, 2))]
    angles = [np.zeros(1)]
    offsets = [0]
    for r in range(1, rings + 1):
        k = 6 * r
        th = 2.0 * np.pi * np.arange(k) / k
        rad = radius * r / rings
        pts.append(np.stack([rad * np.cos(th), rad * np.sin(th)], 1))
        angles.append(th)
        offsets.append(offsets[-1] + len(pts[-2]))
    tris = []
    for r in range(1, rings + 1):
        inner, outer = offsets[r - 1], offsets[r]
        n_in, n_out = len(angles[r - 1]), len(angles[r])
        if r == 1:
            for q in range(n_out):
                tris.append((0, outer + q, outer + (q + 1) % n_out))
            continue
        th_in = np.append(angles[r - 1], 2.0 * np.pi)
        th_out = np.append(angles[r], 2.0 * np.pi)
        p = q = 0
        while p < n_in or q < n_out:
            if q < n_out and (p >= n_in or th_out[q + 1] <= th_in[p + 1]):
                tris.append((inner + p % n_in, outer + q, outer + (q + 1) % n_out))
                q += 1
            else:
                tris.append((inner + p % n_in, outer + (q % n_out), inner + (p + 1) % n_in))
                p += 1
    return TriangulatedSurface.from_mesh(np.concatenate(pts), np.asarray(tris), Identification())


# ---------------------------------------------------------------------------
# metric and Morse function


def _dijkstra(surface, sources):
    graph = surface._geodesic_graph
    ncomp, labels = csgraph.connected_components(graph, directed=False)
    if ncomp != 1:
        src_label = labels[sources[0]]
        other = np.flatnonzero(labels[: surface.vertex_count] != src_label)
        raise SurfaceError(
            f"surface is disconnected: component {int(labels[other[0]])} "
            f"(e.g. vertex {int(other[0])}) is unreachable from vertex {int(sources[0])}"
        )
    d = csgraph.dijkstra(graph, directed=False, indices=np.asarray(sources), min_only=True)
    return d[: surface.vertex_count]


def geodesic_distance(surface, source):
    """Graph geodesic distance from ``source`` on the once-subdivided mesh.

    Edge midpoints are added as extra nodes and every pair of nodes inside a
    triangle is joined, which gives 12 directions per vertex instead of 6.
    """
    if not 0 <= int(source) < surface.vertex_count:
        raise SurfaceError(f"source vertex {source} out of range")
    return ScalarField(_dijkstra(surface, [int(source)]), surface)


def boundary_distance(surface):
    """Distance from every vertex to the surface boundary."""
    bverts = np.flatnonzero(surface.boundary_vertex_mask)
    if len(bverts) == 0:
        raise SurfaceError("surface has no boundary")
    return ScalarField(_dijkstra(surface, bverts), surface)


def _classify(surface, h):
    rank = np.empty(len(h), dtype=np.int64)
    rank[np.lexsort((np.arange(len(h)), h))] = np.arange(len(h))
    ptr, idx, closed = surface.vertex_links
    runs, n_lower = kernels.lower_link_runs(rank, ptr, idx, closed)
    degree = np.diff(ptr)
    interior = closed.astype(bool)
    is_min = n_lower == 0
    is_max = interior & (n_lower == degree)
    is_saddle = ~is_min & ~is_max & (runs >= 2)
    entries = []
    for v in np.flatnonzero(is_min | is_max | is_saddle):
        if is_min[v]:
            entries.append(CriticalPoint(int(v), float(h[v]), "minimum", 0))
        elif is_max[v]:
            entries.append(CriticalPoint(int(v), float(h[v]), "maximum", 2))
        else:
            entries.append(CriticalPoint(int(v), float(h[v]), "saddle", 1, int(runs[v] - 1)))
    entries.sort(key=lambda e: (e.value, rank[e.vertex]))
    return entries


def morse_function(surface, p0, perturbation_scale=0.0, seed=0, max_retries=16):
    """Squared distance from ``p0`` plus a small seeded perturbation.

    Returns the field and its catalog of lower-star critical points. The
    perturbation is non-negative and vanishes at ``p0`` so that ``p0``
    stays the global minimum with value 0.

    Raises
    ------
    SurfaceError
        If two critical values still coincide after ``max_retries``
        perturbation attempts.
    """
    if perturbation_scale < 0:
        raise SurfaceError("perturbation_scale must be >= 0")
    p0 = int(p0)
    dist = geodesic_distance(surface, p0).values
    base = dist ** 2
    amp = perturbation_scale * surface.min_edge_length ** 2
    for attempt in range(max_retries + 1):
        ss = np.random.SeedSequence([int(seed), attempt])
        noise = np.random.default_rng(ss).uniform(0.0, 1.0, surface.vertex_count)
        noise[p0] = 0.0
        h = base + amp * noise
        entries = _classify(surface, h)
        vals = np.array([e.value for e in entries])
        span = max(float(h.max() - h.min()), 1e-300)
        if len(vals) < 2 or np.min(np.diff(vals)) > 1e-12 * span:
            break
        if amp == 0.0:
            raise SurfaceError("critical values coincide and perturbation_scale is 0")
        logger.debug("critical values coincide (attempt %d), reseeding", attempt)
    else:
        raise SurfaceError(f"could not separate critical values after {max_retries} retries")
    if entries[0].vertex != p0:
        raise SurfaceError("base point is not the lowest critical point")
    return ScalarField(h, surface), CriticalCatalog(tuple(entries), p0)


def sublevel_domain(surface, h, t):
    """Vertex-induced sublevel set ``{v : h(v) < t}``.

    A triangle is active when all three of its vertices are. Interior
    vertices (the Dirichlet degrees of freedom) are active vertices whose
    whole star is active and which do not lie on the surface boundary.
    """
    hv = _values(h)
    t = float(t)
    active = hv < t
    tri_active = active[surface.triangles].all(axis=1)
    edge_active = active[surface.edges].all(axis=1)
    active_tri_per_edge = np.bincount(surface.triangle_edges[tri_active].ravel(), minlength=surface.edge_count)
    boundary_edges = np.flatnonzero(edge_active & (active_tri_per_edge == 1))
    # a vertex is interior iff none of its incident triangles is inactive
    touched = np.zeros(surface.vertex_count, dtype=bool)
    touched[surface.triangles[~tri_active].ravel()] = True
    interior = active & ~touched & ~surface.boundary_vertex_mask
    return SublevelDomain(
        t=t,
        active_vertices=_frozen(np.flatnonzero(active), np.int64),
        active_triangles=_frozen(np.flatnonzero(tri_active), np.int64),
        boundary_edges=_frozen(boundary_edges, np.int64),
        interior_vertices=_frozen(np.flatnonzero(interior), np.int64),
        edge_count=int(edge_active.sum()),
    )


def euler_characteristic(domain):
    """V - E + F over the active simplices of ``domain``."""
    return domain.euler_characteristic


def stretch_metric(surface, band_width, strength):
    """Conformally stretch the metric inside a band around the boundary.

    Inside ``{zeta < band_width}``, zeta the distance to the boundary, the
    metric is multiplied by ``strength * (zeta - band_width)**2 + 1``; edge
    lengths scale by the mean square-root factor of their endpoints.
    """
    if band_width <= 0:
        raise SurfaceError("band width must be positive")
    if strength < 0:
        raise SurfaceError("strength must be >= 0")
    zeta = boundary_distance(surface).values
    factor = np.where(zeta < band_width, strength * (zeta - band_width) ** 2 + 1.0, 1.0)
    if surface.conformal_factor is not None:
        factor = factor * surface.conformal_factor
    return TriangulatedSurface.from_mesh(surface.positions, surface.triangles, surface.identification, factor)


# ---------------------------------------------------------------------------
# OFF import / export

_IDENT_KINDS = {"none": 0, "periodic_x": 1, "periodic_xy": 2}


def write_off(surface, path):
    """Write ASCII OFF; seam identification goes in a trailing ``# IDENT`` line.

    Grammar of the trailer (one item per line)::

        # IDENT none
        # IDENT periodic_x <period_x>
        # IDENT periodic_xy <period_x> <period_y>
        # CONFORMAL <f_0> <f_1> ... <f_{n-1}>      (optional)
    """
    lines = ["OFF", f"{surface.vertex_count} {surface.triangle_count} {surface.edge_count}"]
    lines += [f"{x!r} {y!r} 0.0" for x, y in surface.positions.tolist()]
    lines += [f"3 {a} {b} {c}" for a, b, c in surface.triangles.tolist()]
    ident = surface.identification
    tail = ["# IDENT", ident.kind]
    if ident.kind != "none":
        tail.append(repr(float(ident.period_x)))
    if ident.kind == "periodic_xy":
        tail.append(repr(float(ident.period_y)))
    lines.append(" ".join(tail))
    if surface.conformal_factor is not None:
        lines.append("# CONFORMAL " + " ".join(repr(float(f)) for f in surface.conformal_factor))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_off(path):
    """Read a surface written by :func:`write_off` (or any planar OFF)."""
    with open(path) as fh:
        raw = fh.read().splitlines()
    comments = [ln.strip() for ln in raw if ln.strip().startswith("#")]
    body = [ln.split("#", 1)[0].split() for ln in raw]
    body = [tok for tok in body if tok]
    if not body or body[0][0] != "OFF":
        raise SurfaceError("not an OFF file")
    header = body[1] if len(body[0]) == 1 else body[0][1:]
    start = 2 if len(body[0]) == 1 else 1
    nv, nf = int(header[0]), int(header[1])
    verts = np.array([[float(x) for x in row[:2]] for row in body[start:start + nv]])
    faces = []
    for row in body[start + nv:start + nv + nf]:
        if int(row[0]) != 3:
            raise SurfaceError("only triangular faces are supported")
        faces.append([int(x) for x in row[1:4]])
    ident = Identification()
    conformal = None
    for c in comments:
        tok = c.lstrip("#").split()
        if not tok:
            continue
        if tok[0] == "IDENT":
            if len(tok) < 2 or tok[1] not in _IDENT_KINDS:
                raise SurfaceError(f"malformed IDENT line: {c!r}")
            periods = [float(x) for x in tok[2:]]
            if len(periods) != _IDENT_KINDS[tok[1]]:
                raise SurfaceError(f"IDENT {tok[1]} expects {_IDENT_KINDS[tok[1]]} period(s)")
            ident = Identification(tok[1], *periods)
        elif tok[0] == "CONFORMAL":
            conformal = np.array([float(x) for x in tok[1:]])
    return TriangulatedSurface.from_mesh(verts, np.asarray(faces), ident, conformal)
