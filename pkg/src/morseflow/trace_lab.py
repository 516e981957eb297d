"""Boundary mollification and cut-off near a Lipschitz graph in the plane.

The region is ``U = {(x, r) : u(x) < r < v(x)}`` over a 1D grid. Near the
graph of ``u`` a smooth function ``w`` sitting between ``u + delta`` and
``u + 3 delta`` is built by mollifying ``u + 2 delta``, and from it a cut-off
``eta`` vanishing on ``{r < u + delta}`` and equal to one above
``u + 4 delta``. Multiplying by ``eta`` approximates a function with zero
trace on the graph by functions vanishing near it; the approximation error
in ``W^{1,2}`` tends to zero only when the trace is zero.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np


class TraceError(ValueError):
    pass


TUBE_FACTOR = 4.0
SLOPE_ALLOWANCE = 1e-8
ETA0_MAX_SLOPE = 1.5


@dataclass(frozen=True, eq=False)
class LipschitzTriple:
    """Uniform grid ``x``, lower graph ``u_graph``, upper graph ``v_graph``.

    ``L0`` is a Lipschitz constant of ``u``; ``r_resolution`` is the number of
    grid points across a tube.
    """

    x: np.ndarray
    u_graph: np.ndarray
    v_graph: np.ndarray
    L0: float
    r_resolution: int = 65

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        u = np.asarray(self.u_graph, dtype=np.float64)
        v = np.asarray(self.v_graph, dtype=np.float64)
        if x.ndim != 1 or len(x) < 3 or u.shape != x.shape or v.shape != x.shape:
            raise TraceError("x, u_graph, v_graph must be 1D arrays of equal length >= 3")
        dx = np.diff(x)
        if not np.all(dx > 0) or not np.allclose(dx, dx[0], rtol=1e-9, atol=0):
            raise TraceError("x must be a uniform increasing grid")
        if not self.L0 > 0:
            raise TraceError("L0 must be positive")
        # adjacent pairs suffice by the triangle inequality
        if np.any(np.abs(np.diff(u)) > self.L0 * dx * (1 + 1e-12)):
            raise TraceError("u_graph is not L0-Lipschitz")
        if not np.all(v > u):
            raise TraceError("v_graph must lie strictly above u_graph")
        if self.r_resolution < 3:
            raise TraceError("r_resolution must be >= 3")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u_graph", u)
        object.__setattr__(self, "v_graph", v)

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])


def make_triple(case, n=1601, L0=1.0, r_resolution=65, height=1.0):
    """Triple on ``[0, 1]`` for ``case`` in {'constant', 'linear', 'corner'}."""
    x = np.linspace(0.0, 1.0, n)
    if case == "constant":
        u = np.zeros(n)
    elif case == "linear":
        u = L0 * x
    elif case == "corner":
        u = L0 * np.abs(x - 0.5)
    else:
        raise TraceError(f"unknown boundary case {case!r}")
    return LipschitzTriple(x, u, u + height, float(L0), int(r_resolution))


def bump_weights(alpha, dx):
    """Normalised samples of ``(1 - (x/alpha)^2)^3`` on ``|x| <= alpha``."""
    m = int(np.floor(alpha / dx * (1 + 1e-12)))
    s = np.arange(-m, m + 1) * dx / alpha
    w = np.clip(1.0 - s ** 2, 0.0, None) ** 3
    return w / w.sum()


def _odd_extend(f, m):
    # reflection through the endpoint values keeps Lipschitz constants and linear functions
    left = 2 * f[0] - f[m:0:-1]
    right = 2 * f[-1] - f[-2:-m - 2:-1]
    return np.concatenate([left, f, right])


def mollify_boundary(triple, delta):
    """``w = (u + 2 delta) * phi_alpha`` with ``alpha = delta / L0``.

    Raises
    ------
    TraceError
        If the bump radius is below two grid spacings or wider than the grid.
    """
    if not delta > 0:
        raise TraceError("delta must be positive")
    alpha = delta / triple.L0
    dx = triple.dx
    if alpha < 2 * dx * (1 - 1e-12):
        raise TraceError(f"under-resolved: alpha={alpha:g} below two grid spacings ({2 * dx:g})")
    weights = bump_weights(alpha, dx)
    m = len(weights) // 2
    if m >= len(triple.x):
        raise TraceError("grid too coarse for this delta")
    ubar = triple.u_graph + 2 * delta
    return np.convolve(_odd_extend(ubar, m), weights, mode="valid")


def lipschitz_bound_check(w, L0, grid):
    """Largest finite-difference slope of ``w``; should not exceed ``L0`` up to SLOPE_ALLOWANCE."""
    w = np.asarray(w, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    return float(np.max(np.abs(np.diff(w) / np.diff(grid))))


def eta0(s):
    """``0`` for ``s <= 0``, ``3 s^2 - 2 s^3`` on ``[0, 1]``, ``1`` beyond."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def cutoff_constant(L0):
    return 2.0 * ETA0_MAX_SLOPE ** 2 * (1.0 + L0 ** 2)


@dataclass(frozen=True, eq=False)
class TubularField:
    """Values on the sheared grid ``(x_i, u(x_i) + s_j)``, ``0 <= s_j <= 4 delta``."""

    values: np.ndarray
    s: np.ndarray
    delta: float
    grad_sq: np.ndarray  # finite-difference |D eta|^2 on cells

    @property
    def sup_grad_sq_times_delta_sq(self):
        return float(self.grad_sq.max() * self.delta ** 2)


def _tube_s(triple, delta):
    return np.linspace(0.0, TUBE_FACTOR * delta, triple.r_resolution)


def _forward_gradients(triple, s, func):
    """Forward differences of ``func(i, r)`` along r and along x at fixed r.

    ``func(idx, r)`` evaluates at grid columns ``idx`` (array) and heights
    ``r`` (array broadcast against ``idx[:, None]``).
    """
    u = triple.u_graph
    idx = np.arange(len(u))
    r = u[:, None] + s[None, :]
    g = func(idx, r)
    gr = np.diff(g, axis=1) / np.diff(s)[None, :]
    # x-difference at fixed r: re-evaluate the same heights in the next column
    g_next = func(idx[1:], r[:-1])
    gx = (g_next - g[:-1]) / triple.dx
    return g, gr, gx


def build_cutoff(triple, w, delta):
    """``eta(x, r) = eta0((r - w(x)) / delta)`` on the tube of width ``4 delta``.

    Raises
    ------
    TraceError
        If ``w`` is not within ``delta`` of ``u + 2 delta``, i.e. was built for
        another delta.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != triple.u_graph.shape:
        raise TraceError("w does not match the grid")
    dev = np.max(np.abs(w - (triple.u_graph + 2 * delta)))
    if dev > delta * (1 + 1e-9):
        raise TraceError(f"w does not belong to delta={delta:g} (deviation {dev:g})")
    s = _tube_s(triple, delta)

    def eta(idx, r):
        return eta0((r - w[idx][:, None]) / delta)

    values, gr, gx = _forward_gradients(triple, s, eta)
    grad_sq = gr[:-1] ** 2 + gx[:, :-1] ** 2
    return TubularField(values, s, float(delta), grad_sq)


@dataclass(frozen=True)
class DecayRow:
    delta: float
    norm: float
    sup_grad_eta_sq_times_delta_sq: float


@dataclass(frozen=True)
class DecayTable:
    rows: List[DecayRow]
    trace_sup: float  # max |f| on the graph of u

    @property
    def norms(self):
        return np.array([r.norm for r in self.rows])

    @property
    def strictly_decreasing(self):
        return bool(np.all(np.diff(self.norms) < 0))

    @property
    def floor(self):
        return float(self.norms.min())

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["delta", "norm", "sup_grad_eta_sq_times_delta_sq"])
        for r in self.rows:
            wr.writerow([repr(r.delta), repr(r.norm), repr(r.sup_grad_eta_sq_times_delta_sq)])
        return buf.getvalue()


def _trap_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def w12_norm_tube(triple, s, g, gr, gx):
    """Discrete ``W^{1,2}`` norm on the tube (shear map has unit Jacobian)."""
    ds = float(s[1] - s[0])
    wx = _trap_weights(len(triple.x), triple.dx)
    ws = _trap_weights(len(s), ds)
    l2 = np.einsum("i,j,ij->", wx, ws, g ** 2)
    # differences live on cells: rectangle rule across the difference direction
    dr = np.einsum("i,j,ij->", wx, np.full(len(s) - 1, ds), gr ** 2)
    dxn = np.einsum("i,j,ij->", np.full(len(triple.x) - 1, triple.dx), ws, gx ** 2)
    return float(np.sqrt(l2 + dr + dxn))


def decay_experiment(triple, f: Callable, deltas: Sequence[float]):
    """``||f - f eta||_{W^{1,2}}`` for each ``delta``.

    ``f - f eta`` vanishes above ``u + 4 delta``, so the norm is evaluated on
    the tube only.

    Parameters
    ----------
    triple : LipschitzTriple
    f : callable
        ``f(x, r)`` evaluated on arrays.
    deltas : sequence of float
        Strictly decreasing.
    """
    deltas = [float(d) for d in deltas]
    if not deltas or any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise TraceError("deltas must be a non-empty strictly decreasing sequence")
    x = triple.x
    trace_sup = float(np.max(np.abs(f(x, triple.u_graph))))
    rows = []
    for delta in deltas:
        w = mollify_boundary(triple, delta)
        eta = build_cutoff(triple, w, delta)
        s = eta.s

        def g(idx, r, w=w, delta=delta):
            return f(x[idx][:, None], r) * (1.0 - eta0((r - w[idx][:, None]) / delta))

        vals, gr, gx = _forward_gradients(triple, s, g)
        rows.append(DecayRow(delta, w12_norm_tube(triple, s, vals, gr, gx), eta.sup_grad_sq_times_delta_sq))
    return DecayTable(rows, trace_sup)


def halving(delta0, halvings):
    """``delta0, delta0/2, ...`` with ``halvings`` halvings."""
    return [delta0 / 2 ** i for i in range(halvings + 1)]
