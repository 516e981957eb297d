"""Pure numpy implementations of the hot kernels.

These mirror the compiled routines in ``_kernels.pyx`` one for one and are
used whenever the extension is unavailable.
"""
import numpy as np

_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


def element_matrices(e1, e2, a_tri, area_scale):
    """P1 gradient stiffness and consistent mass on every triangle.

    Parameters
    ----------
    e1, e2 : ndarray, shape (m, 2)
        Edge vectors ``p1 - p0`` and ``p2 - p0`` of each triangle.
    a_tri : ndarray, shape (m, 2, 2)
        Triangle-averaged coefficient tensor.
    area_scale : ndarray, shape (m,)
        Multiplier applied to the area in the mass term (conformal factor).

    Returns
    -------
    ka, me : ndarray, shape (m, 3, 3)
    """
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * det
    g1 = np.stack([e2[:, 1], -e2[:, 0]], axis=1) / det[:, None]
    g2 = np.stack([-e1[:, 1], e1[:, 0]], axis=1) / det[:, None]
    g0 = -(g1 + g2)
    grads = np.stack([g0, g1, g2], axis=1)
    ka = area[:, None, None] * np.einsum("mid,mde,mje->mij", grads, a_tri, grads)
    # mirror the upper triangle so the local matrix is exactly symmetric
    lower = np.tril_indices(3, -1)
    ka[:, lower[0], lower[1]] = ka[:, lower[1], lower[0]]
    me = (area * area_scale)[:, None, None] * _MASS_REF
    return ka, me


def lower_link_runs(rank, link_ptr, link_idx, link_closed):
    """Count lower-link components of every vertex.

    ``rank`` is a total order on the vertices; a neighbour is lower when its
    rank is smaller. Links are stored as ordered cycles (``link_closed``) or
    paths in CSR form.

    Returns
    -------
    runs : ndarray of int
        Number of maximal runs of lower neighbours along the link.
    n_lower : ndarray of int
        Number of lower neighbours.
    """
    n = len(link_ptr) - 1
    runs = np.zeros(n, dtype=np.int64)
    n_lower = np.zeros(n, dtype=np.int64)
    for v in range(n):
        nbrs = link_idx[link_ptr[v]:link_ptr[v + 1]]
        lower = rank[nbrs] < rank[v]
        n_lower[v] = lower.sum()
        if len(nbrs) == 0:
            continue
        prev = np.empty_like(lower)
        prev[1:] = lower[:-1]
        prev[0] = lower[-1] if link_closed[v] else False
        runs[v] = np.count_nonzero(lower & ~prev)
    return runs, n_lower


def segment_sum(values, starts):
    """Sum ``values`` over consecutive segments beginning at ``starts``.

    Each segment is accumulated strictly left to right, so the result is
    bitwise reproducible and matches the compiled loop.
    """
    starts = np.asarray(starts, dtype=np.int64)
    lengths = np.diff(np.append(starts, len(values)))
    out = np.zeros(len(starts), dtype=np.float64)
    if len(starts) == 0:
        return out
    for j in range(int(lengths.max())):
        live = lengths > j
        out[live] += values[starts[live] + j]
    return out
