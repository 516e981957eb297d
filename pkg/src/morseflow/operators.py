"""Coefficient data for self-adjoint strongly elliptic operators.

An operator ``L u = -div(a grad u) + c u`` is stored by its vertex samples of
the symmetric tensor ``a`` and the scalar ``c``. The constraint flag selects
either the plain Dirichlet problem or the volume-constrained one, where test
functions are restricted to zero mean.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

CONSTRAINTS = ("dirichlet", "volume_constrained")
OPERATOR_KINDS = ("laplacian", "shifted_laplacian", "custom", "cmc_cylinder_stability")


class OperatorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    a_field: np.ndarray  # (n, 2, 2)
    c_field: np.ndarray  # (n,)
    constraint: str = "dirichlet"

    def __post_init__(self):
        a = np.array(self.a_field, dtype=np.float64, copy=True)
        c = np.array(self.c_field, dtype=np.float64, copy=True)
        if a.ndim != 3 or a.shape[1:] != (2, 2):
            raise OperatorError("a_field must have shape (n, 2, 2)")
        if c.shape != (a.shape[0],):
            raise OperatorError("c_field must have one value per vertex")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c))):
            raise OperatorError("coefficients must be finite")
        if self.constraint not in CONSTRAINTS:
            raise OperatorError(f"unknown constraint {self.constraint!r}")
        bad = np.flatnonzero(a[:, 0, 1] != a[:, 1, 0])
        if len(bad):
            raise OperatorError(f"a(v) not symmetric at vertices {bad[:10].tolist()}")
        a.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "a_field", a)
        object.__setattr__(self, "c_field", c)

    @property
    def vertex_count(self):
        return len(self.c_field)


class Ellipticity(NamedTuple):
    alpha: float
    ok: bool
    worst_vertex: int


def _identity(n):
    return np.broadcast_to(np.eye(2), (n, 2, 2)).copy()


def make_operator(kind, surface, c0=None, a_field=None, c_field=None, constraint="dirichlet"):
    """Build an :class:`OperatorSpec` on ``surface``.

    ``shifted_laplacian`` with shift ``c0`` stores ``c = -c0``, i.e. the
    operator is ``-Laplace - c0``.
    """
    n = surface.vertex_count
    if kind == "laplacian":
        return OperatorSpec(_identity(n), np.zeros(n), constraint)
    if kind == "shifted_laplacian":
        if c0 is None:
            raise OperatorError("shifted_laplacian needs c0")
        return OperatorSpec(_identity(n), np.full(n, -float(c0)), constraint)
    if kind == "custom":
        if a_field is None or c_field is None:
            raise OperatorError("custom operator needs a_field and c_field")
        a = np.asarray(a_field, dtype=np.float64)
        if a.shape == (2, 2):
            a = np.broadcast_to(a, (n, 2, 2))
        c = np.asarray(c_field, dtype=np.float64)
        if c.ndim == 0:
            c = np.full(n, float(c))
        if len(a) != n or len(c) != n:
            raise OperatorError(f"custom fields must match vertex_count={n}")
        return OperatorSpec(a, c, constraint)
    raise OperatorError(f"unknown operator kind {kind!r}")


def check_ellipticity(spec):
    """Smallest eigenvalue of ``a(v)`` over all vertices.

    Returns an :class:`Ellipticity` tuple; ``ok`` is False when the value is
    not positive. Never raises on failure so callers can report it.
    """
    eig = np.linalg.eigvalsh(spec.a_field)[:, 0]
    v = int(np.argmin(eig))
    alpha = float(eig[v])
    return Ellipticity(alpha, alpha > 0.0, v)


def cmc_cylinder_stability(radius, surface, constraint="dirichlet"):
    """Stability operator ``-Laplace - |B|^2`` of the round cylinder.

    The principal curvatures are ``1/radius`` and 0, so ``|B|^2 = 1/radius**2``.
    ``surface`` must be a cylinder of circumference ``2*pi*radius``.
    """
    if not radius > 0:
        raise OperatorError("radius must be positive")
    ident = surface.identification
    if ident.kind != "periodic_x":
        raise OperatorError("cmc_cylinder_stability needs a cylinder surface")
    if not np.isclose(ident.period_x, 2.0 * np.pi * radius, rtol=1e-9, atol=0.0):
        raise OperatorError(
            f"cylinder circumference {ident.period_x} does not match 2*pi*r = {2 * np.pi * radius}"
        )
    n = surface.vertex_count
    return OperatorSpec(_identity(n), np.full(n, -1.0 / radius ** 2), constraint)
