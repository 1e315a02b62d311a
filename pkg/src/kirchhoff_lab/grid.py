"""Uniform tensor grids on an interval or rectangle, with Dirichlet bookkeeping.

Only interior nodes carry unknowns.  Boundary values enter as a *trace*: a
single constant, or one constant per face ordered ``(x_lo, x_hi)`` in 1D and
``(x_lo, x_hi, y_lo, y_hi)`` in 2D.  Arrays are stored with ``ij`` indexing,
so a 2D field has shape ``(nx, ny)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Sequence, Union

import numpy as np

from .errors import GridMismatchError, InvalidDomainError

Trace = Union[float, Sequence[float]]


@dataclass(frozen=True)
class Grid:
    """Interior nodes of ``(0, L_x)`` or ``(0, L_x) x (0, L_y)``."""

    dim: int
    extents: tuple
    n: tuple

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidDomainError(f"dim must be 1 or 2, got {self.dim}")
        extents = tuple(float(e) for e in np.atleast_1d(self.extents))
        n = tuple(int(k) for k in np.atleast_1d(self.n))
        if len(extents) != self.dim or len(n) != self.dim:
            raise InvalidDomainError("extents and n need one entry per axis")
        if any(not np.isfinite(e) or e <= 0 for e in extents):
            raise InvalidDomainError(f"extents must be positive, got {extents}")
        if any(k < 3 for k in n):
            raise InvalidDomainError(f"need at least 3 interior nodes per axis, got {n}")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "n", n)

    @property
    def h(self) -> tuple:
        return tuple(e / (k + 1) for e, k in zip(self.extents, self.n))

    @property
    def shape(self) -> tuple:
        return self.n

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def measure(self) -> float:
        """Lebesgue measure of the domain."""
        return float(np.prod(self.extents))

    def axis_coords(self, axis: int) -> np.ndarray:
        h = self.h[axis]
        return h * np.arange(1, self.n[axis] + 1)

    def coords(self) -> tuple:
        """Per-axis coordinate arrays broadcast to ``shape``."""
        return tuple(np.meshgrid(*(self.axis_coords(a) for a in range(self.dim)), indexing="ij"))

    @cached_property
    def _points(self) -> np.ndarray:
        pts = np.stack(self.coords(), axis=-1)
        pts.flags.writeable = False
        return pts

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (dim,)``."""
        return self._points

    def center_index(self) -> tuple:
        """Index of the node nearest the domain center."""
        return tuple(int(np.argmin(np.abs(self.axis_coords(a) - 0.5 * self.extents[a]))) for a in range(self.dim))

    def field(self, values, boundary: Trace = 0.0) -> "ScalarField":
        return ScalarField(self, values, boundary)

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape))

    def sample(self, func, boundary: Trace = 0.0) -> "ScalarField":
        """Evaluate ``func(*coords)`` at the nodes."""
        return ScalarField(self, np.broadcast_to(func(*self.coords()), self.shape), boundary)


def build_grid(dim: int, extents, n) -> Grid:
    return Grid(dim, tuple(np.atleast_1d(extents)), tuple(np.atleast_1d(n)))


def _face_values(boundary: Trace, dim: int) -> tuple:
    faces = np.atleast_1d(np.asarray(boundary, dtype=float))
    if faces.size == 1:
        return (float(faces[0]),) * (2 * dim)
    if faces.size != 2 * dim:
        raise InvalidDomainError(f"boundary trace needs 1 or {2 * dim} values, got {faces.size}")
    return tuple(float(v) for v in faces)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values on a grid plus the boundary trace."""

    grid: Grid
    values: np.ndarray
    boundary: Trace = 0.0
    faces: tuple = field(init=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise InvalidDomainError("field values must be finite")
        values.flags.writeable = False
        faces = _face_values(self.boundary, self.grid.dim)
        if not all(np.isfinite(faces)):
            raise InvalidDomainError("boundary trace must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "faces", faces)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values, self.boundary)

    def padded(self, axis=None) -> np.ndarray:
        """Values with one ghost layer holding the trace.

        With ``axis`` given, only that axis is padded, which is what the
        edge differences along that axis need.
        """
        axes = range(self.grid.dim) if axis is None else (axis,)
        out = self.values
        for a in axes:
            lo, hi = self.faces[2 * a], self.faces[2 * a + 1]
            ghost_shape = list(out.shape)
            ghost_shape[a] = 1
            out = np.concatenate([np.full(ghost_shape, lo), out, np.full(ghost_shape, hi)], axis=a)
        return out

    @property
    def zero_trace(self) -> bool:
        return all(v == 0.0 for v in self.faces)


@dataclass(frozen=True, eq=False)
class VectorField:
    """``dim`` components per node, shape ``grid.shape + (dim,)``."""

    grid: Grid
    components: np.ndarray

    def __post_init__(self):
        comps = np.array(self.components, dtype=float).reshape(self.grid.shape + (self.grid.dim,))
        if not np.all(np.isfinite(comps)):
            raise InvalidDomainError("vector field components must be finite")
        comps.flags.writeable = False
        object.__setattr__(self, "components", comps)

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.components**2, axis=-1))


def _check_same_grid(*fields):
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError("fields live on different grids")
    return grid


def neg_laplacian_values(u: ScalarField) -> np.ndarray:
    """Raw array form of :func:`apply_neg_laplacian`."""
    p = u.padded(axis=0)
    h = u.grid.h
    out = (2.0 * p[1:-1] - p[:-2] - p[2:]) / h[0] ** 2
    if u.grid.dim == 2:
        p = u.padded(axis=1)
        out = out + (2.0 * p[:, 1:-1] - p[:, :-2] - p[:, 2:]) / h[1] ** 2
    return out


def apply_neg_laplacian(u: ScalarField) -> ScalarField:
    """Second-order 3-point / 5-point stencil of -Laplace at every interior node."""
    return ScalarField(u.grid, neg_laplacian_values(u), 0.0)


def gradient_values(u: ScalarField) -> np.ndarray:
    """Central differences, with the trace standing in for boundary neighbours."""
    comps = []
    for a in range(u.grid.dim):
        p = u.padded(axis=a)
        lo = [slice(None)] * u.grid.dim
        hi = [slice(None)] * u.grid.dim
        lo[a] = slice(None, -2)
        hi[a] = slice(2, None)
        comps.append((p[tuple(hi)] - p[tuple(lo)]) / (2.0 * u.grid.h[a]))
    return np.stack(comps, axis=-1)


def node_gradient(u: ScalarField) -> VectorField:
    return VectorField(u.grid, gradient_values(u))


def energy_product(u: ScalarField, w: ScalarField) -> float:
    """Discrete Dirichlet form: cell volume times the sum of edge-difference products.

    Every edge of the grid is used, including the ones touching the boundary,
    so for zero-trace fields this equals ``cellvol * sum(u * (-Lap w))``.
    """
    grid = _check_same_grid(u, w)
    total = 0.0
    for a in range(grid.dim):
        du = np.diff(u.padded(axis=a), axis=a) / grid.h[a]
        dw = np.diff(w.padded(axis=a), axis=a) / grid.h[a]
        total += float(np.sum(du * dw))
    return total * grid.cell_volume


class FieldNorms(NamedTuple):
    sup_norm: float
    grad_sup_norm: float
    h1_seminorm_sq: float
    l1_norm: float


def field_norms(u: ScalarField) -> FieldNorms:
    grad = gradient_values(u)
    return FieldNorms(
        sup_norm=float(np.max(np.abs(u.values))),
        grad_sup_norm=float(np.max(np.sqrt(np.sum(grad**2, axis=-1)))),
        h1_seminorm_sq=energy_product(u, u),
        l1_norm=float(np.sum(np.abs(u.values)) * u.grid.cell_volume),
    )


def integrate(values, grid: Grid) -> float:
    """Nodal sum times cell volume."""
    return float(np.sum(values) * grid.cell_volume)


def write_field_csv(u: ScalarField, path) -> Path:
    """Write ``x,u`` or ``x,y,u`` rows; in 2D y is the outer loop, x the inner."""
    path = Path(path)
    coords = u.grid.coords()
    if u.grid.dim == 1:
        header = "x,u"
        cols = [coords[0], u.values]
    else:
        header = "x,y,u"
        cols = [c.T for c in coords] + [u.values.T]
    table = np.column_stack([np.ravel(c) for c in cols])
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header=header, comments="")
    return path


def read_field_csv(path, boundary: Trace = 0.0) -> ScalarField:
    """Inverse of :func:`write_field_csv`; the grid is recovered from the coordinates."""
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header not in (["x", "u"], ["x", "y", "u"]):
        raise InvalidDomainError(f"{path}: unrecognised field header {header}")
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    dim = len(header) - 1
    axes = [np.unique(table[:, a]) for a in range(dim)]
    n = [len(ax) for ax in axes]
    extents = [ax[0] * (k + 1) for ax, k in zip(axes, n)]
    grid = build_grid(dim, extents, n)
    if table.shape[0] != grid.size:
        raise InvalidDomainError(f"{path}: expected {grid.size} rows, got {table.shape[0]}")
    values = table[:, -1]
    if dim == 2:
        values = values.reshape(n[1], n[0]).T
    return ScalarField(grid, values, boundary)
