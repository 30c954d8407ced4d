"""Uniform-grid fields and second-order finite-difference operators.

Every audit in the package measures residuals with these operators, so they
are deliberately plain: central differences in the interior, second-order
one-sided stencils at clamped boundaries and wrap-around on periodic axes.

Node layout: a grid with ``dims[k]`` nodes along axis ``k``. On a periodic
axis node ``i`` sits at ``origin + i*h`` and the period is ``dims[k]*h``; on a
clamped axis the first and last nodes are the boundary, so the axis spans
``(dims[k]-1)*h``. Arrays use ``indexing='ij'`` (axis 0 is x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .errors import FieldError

PERIODIC = "periodic"
CLAMPED = "clamped"
_BOUNDARIES = (PERIODIC, CLAMPED)

__all__ = [
    "PERIODIC",
    "CLAMPED",
    "GridSpec",
    "ScalarField",
    "VectorField",
    "diff",
    "diff2",
    "gradient",
    "divergence",
    "curl",
    "vector_laplacian",
    "LaplacianIdentityResult",
    "check_laplacian_identity",
    "observed_orders",
    "interpolate",
    "write_field",
    "read_field",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform structured grid in 2 or 3 dimensions.

    Parameters
    ----------
    dims : sequence of int
        Nodes per axis, each at least 4.
    spacing : sequence of float
        Node spacing per axis (m).
    origin : sequence of float, optional
        Position of node ``(0, 0[, 0])``. Defaults to the zero vector.
    boundary : sequence of str, optional
        ``"periodic"`` or ``"clamped"`` per axis. Defaults to all periodic.
    """

    dims: tuple
    spacing: tuple
    origin: tuple = None
    boundary: tuple = None

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        ndim = len(dims)
        if ndim not in (2, 3):
            raise FieldError(f"grid must be 2D or 3D, got {ndim} axes")
        spacing = _per_axis(self.spacing, ndim, "spacing", float)
        origin = _per_axis(
            (0.0,) * ndim if self.origin is None else self.origin, ndim, "origin", float
        )
        boundary = _per_axis(
            (PERIODIC,) * ndim if self.boundary is None else self.boundary,
            ndim,
            "boundary",
            str,
        )
        if any(n < 4 for n in dims):
            raise FieldError(f"every axis needs at least 4 nodes, got {dims}")
        if not all(math.isfinite(h) and h > 0 for h in spacing):
            raise FieldError(f"spacing must be positive and finite, got {spacing}")
        if not all(math.isfinite(o) for o in origin):
            raise FieldError(f"origin must be finite, got {origin}")
        for b in boundary:
            if b not in _BOUNDARIES:
                raise FieldError(f"unknown boundary flag {b!r}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "boundary", boundary)

    @classmethod
    def box(cls, dims, lower, upper, boundary=PERIODIC):
        """Grid covering ``[lower, upper]`` per axis.

        Periodic axes treat ``upper`` as the image of ``lower`` (it is not a
        node); clamped axes put nodes on both ends.
        """
        dims = tuple(int(n) for n in dims)
        ndim = len(dims)
        lower = _per_axis(lower, ndim, "lower", float)
        upper = _per_axis(upper, ndim, "upper", float)
        if isinstance(boundary, str):
            boundary = (boundary,) * ndim
        spacing = []
        for n, lo, hi, b in zip(dims, lower, upper, boundary):
            if hi <= lo:
                raise FieldError(f"empty extent [{lo}, {hi}]")
            spacing.append((hi - lo) / (n if b == PERIODIC else n - 1))
        return cls(dims, tuple(spacing), lower, tuple(boundary))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def periodic(self, axis: int) -> bool:
        return self.boundary[axis] == PERIODIC

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.dims[axis])

    def coords(self) -> tuple:
        """Node coordinate arrays, each shaped like ``dims``."""
        return tuple(
            np.meshgrid(*(self.axis_coords(k) for k in range(self.ndim)), indexing="ij")
        )

    def upper(self, axis: int) -> float:
        """Largest coordinate inside the domain along ``axis``."""
        n = self.dims[axis] if self.periodic(axis) else self.dims[axis] - 1
        return self.origin[axis] + n * self.spacing[axis]

    def contains(self, point) -> bool:
        """Whether ``point`` lies inside the domain (periodic axes always do)."""
        for k in range(self.ndim):
            if self.periodic(k):
                continue
            if not self.origin[k] <= point[k] <= self.upper(k):
                return False
        return True

    def refined(self) -> "GridSpec":
        """Same domain with half the spacing."""
        dims = tuple(
            2 * n if b == PERIODIC else 2 * (n - 1) + 1
            for n, b in zip(self.dims, self.boundary)
        )
        spacing = tuple(h / 2 for h in self.spacing)
        return GridSpec(dims, spacing, self.origin, self.boundary)


def _per_axis(value, ndim, name, kind):
    if isinstance(value, (str, int, float)):
        value = (value,) * ndim
    value = tuple(kind(v) for v in value)
    if len(value) != ndim:
        raise FieldError(f"{name} needs {ndim} entries, got {len(value)}")
    return value


def _frozen_values(values, shape, what) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.size != int(np.prod(shape)):
        raise FieldError(f"{what}: expected {int(np.prod(shape))} values, got {arr.size}")
    arr = arr.reshape(shape)
    bad = ~np.isfinite(arr)
    if bad.any():
        loc = tuple(int(i) for i in np.argwhere(bad)[0])
        raise FieldError(f"{what}: non-finite value {arr[loc]} at index {loc}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScalarField:
    """One real value per grid node; ``unit`` is metadata only."""

    grid: GridSpec
    values: np.ndarray
    unit: str = ""

    def __post_init__(self):
        object.__setattr__(
            self, "values", _frozen_values(self.values, self.grid.dims, "ScalarField")
        )

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable, unit: str = "") -> "ScalarField":
        vals = np.broadcast_to(np.asarray(fn(*grid.coords()), dtype=float), grid.dims)
        return cls(grid, vals, unit)

    def __add__(self, other):
        return ScalarField(self.grid, self.values + other.values, self.unit)

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - other.values, self.unit)

    def __mul__(self, scale):
        return ScalarField(self.grid, self.values * scale, self.unit)

    __rmul__ = __mul__


@dataclass(frozen=True)
class VectorField:
    """A real vector per grid node, stored as ``values[component, *dims]``.

    A field may carry more components than the grid has axes (a 2D grid with a
    third component); derivatives along missing axes are zero.
    """

    grid: GridSpec
    values: np.ndarray
    unit: str = "m/s"

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        ncomp = arr.shape[0] if arr.ndim > 0 else 0
        if ncomp < self.grid.ndim or ncomp > 3:
            raise FieldError(
                f"VectorField on a {self.grid.ndim}D grid needs {self.grid.ndim} to 3 "
                f"components, got {ncomp}"
            )
        object.__setattr__(
            self,
            "values",
            _frozen_values(arr, (ncomp,) + self.grid.dims, "VectorField"),
        )

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable, unit: str = "m/s") -> "VectorField":
        comps = fn(*grid.coords())
        vals = np.stack([np.broadcast_to(np.asarray(c, dtype=float), grid.dims) for c in comps])
        return cls(grid, vals, unit)

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]

    def component(self, i: int) -> np.ndarray:
        if i < self.ncomp:
            return self.values[i]
        return np.zeros(self.grid.dims)

    def lifted(self) -> "VectorField":
        """Three-component copy (zero-padded)."""
        if self.ncomp == 3:
            return self
        return VectorField(self.grid, np.stack([self.component(i) for i in range(3)]), self.unit)

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values**2, axis=0))

    def __add__(self, other):
        a, b = _match_components(self, other)
        return VectorField(self.grid, a + b, self.unit)

    def __sub__(self, other):
        a, b = _match_components(self, other)
        return VectorField(self.grid, a - b, self.unit)

    def __mul__(self, scale):
        return VectorField(self.grid, self.values * scale, self.unit)

    __rmul__ = __mul__


def _match_components(u: VectorField, v: VectorField):
    n = max(u.ncomp, v.ncomp)
    return (
        np.stack([u.component(i) for i in range(n)]),
        np.stack([v.component(i) for i in range(n)]),
    )


# -- array-level stencils ---------------------------------------------------


def diff(a: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    """First derivative along ``axis`` with second-order stencils."""
    if periodic:
        return (np.roll(a, -1, axis) - np.roll(a, 1, axis)) / (2.0 * h)
    if a.shape[axis] < 3:
        raise FieldError("clamped derivative needs at least 3 nodes")
    return np.gradient(a, h, axis=axis, edge_order=2)


def diff2(a: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    """Second derivative along ``axis``; 4-point one-sided rows at clamped ends."""
    if periodic:
        return (np.roll(a, -1, axis) - 2.0 * a + np.roll(a, 1, axis)) / (h * h)
    n = a.shape[axis]
    if n < 4:
        raise FieldError("clamped second derivative needs at least 4 nodes")
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = a[2:] - 2.0 * a[1:-1] + a[:-2]
    out[0] = 2.0 * a[0] - 5.0 * a[1] + 4.0 * a[2] - a[3]
    out[-1] = 2.0 * a[-1] - 5.0 * a[-2] + 4.0 * a[-3] - a[-4]
    return np.moveaxis(out / (h * h), 0, axis)


def _d(grid: GridSpec, a: np.ndarray, axis: int) -> np.ndarray:
    if axis >= grid.ndim:
        return np.zeros_like(a)
    return diff(a, axis, grid.spacing[axis], grid.periodic(axis))


# -- field operators ----------------------------------------------------------


def gradient(s: ScalarField) -> VectorField:
    g = s.grid
    return VectorField(g, np.stack([_d(g, s.values, k) for k in range(g.ndim)]))


def divergence(v: VectorField) -> ScalarField:
    g = v.grid
    out = np.zeros(g.dims)
    for k in range(min(v.ncomp, g.ndim)):
        out += _d(g, v.values[k], k)
    return ScalarField(g, out)


def curl(v: VectorField) -> VectorField:
    """Curl of a 3-component field; 2D inputs are lifted with a zero z-part."""
    g = v.grid
    u, w, q = (v.component(i) for i in range(3))
    return VectorField(
        g,
        np.stack(
            [
                _d(g, q, 1) - _d(g, w, 2),
                _d(g, u, 2) - _d(g, q, 0),
                _d(g, w, 0) - _d(g, u, 1),
            ]
        ),
    )


def vector_laplacian(v: VectorField) -> VectorField:
    g = v.grid
    out = np.zeros_like(v.values)
    for i in range(v.ncomp):
        for k in range(g.ndim):
            out[i] += diff2(v.values[i], k, g.spacing[k], g.periodic(k))
    return VectorField(g, out)


@dataclass(frozen=True)
class LaplacianIdentityResult:
    max: float
    l2: float
    residual: VectorField = field(repr=False)


def check_laplacian_identity(v: VectorField) -> LaplacianIdentityResult:
    """Residual of ``lap v - (grad div v - curl curl v)``.

    ``l2`` is the root-mean-square of the pointwise residual magnitude.
    """
    lhs = vector_laplacian(v.lifted())
    rhs = gradient(divergence(v)).lifted() - curl(curl(v))
    r = lhs - rhs
    mag = r.magnitude()
    return LaplacianIdentityResult(float(mag.max()), float(np.sqrt(np.mean(mag**2))), r)


def observed_orders(errors: Sequence[float], ratio: float = 2.0) -> list:
    """Convergence orders ``log(e_k / e_{k+1}) / log(ratio)`` between levels."""
    e = np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return list(np.log(e[:-1] / e[1:]) / math.log(ratio))


# -- sampling -----------------------------------------------------------------


def interpolate(f, points) -> np.ndarray:
    """Multilinear interpolation of a scalar or vector field at ``points``.

    Periodic axes wrap; clamped axes clamp to the end nodes, so callers must
    check ``grid.contains`` first if extrapolation matters. Returns an array
    of shape ``(npoints,)`` for scalars and ``(npoints, ncomp)`` for vectors.
    """
    g = f.grid
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    idx = np.empty((g.ndim, pts.shape[0]))
    for k in range(g.ndim):
        s = (pts[:, k] - g.origin[k]) / g.spacing[k]
        if g.periodic(k):
            s = np.mod(s, g.dims[k])
        else:
            s = np.clip(s, 0.0, g.dims[k] - 1)
        idx[k] = s
    # grid-wrap handles the periodic cell between the last node and the first
    mode = "grid-wrap" if all(g.periodic(k) for k in range(g.ndim)) else "nearest"
    if isinstance(f, ScalarField):
        return _map(f.values, idx, g, mode)
    return np.stack([_map(f.values[i], idx, g, mode) for i in range(f.ncomp)], axis=1)


def _map(a, idx, g, mode):
    if mode == "grid-wrap" or not any(g.periodic(k) for k in range(g.ndim)):
        return ndimage.map_coordinates(a, idx, order=1, mode=mode)
    # mixed boundaries: pad the periodic axes by one wrapped layer
    pad = [(0, 1) if g.periodic(k) else (0, 0) for k in range(g.ndim)]
    return ndimage.map_coordinates(np.pad(a, pad, mode="wrap"), idx, order=1, mode="nearest")


# -- snapshot files -------------------------------------------------------------

_MAGIC = "# nsaudit field v1"


def write_field(f, path) -> None:
    """Write a field snapshot.

    Layout: a text header (``kind``, ``ncomp``, ``dims``, ``spacing``,
    ``origin``, ``boundary``, ``unit``, optional ``meta`` lines) then ``data``
    and one line per node in row-major order, components separated by spaces.
    Floats use 17 significant digits so a read round-trips bit-identically.
    """
    g = f.grid
    vector = isinstance(f, VectorField)
    ncomp = f.ncomp if vector else 1
    lines = [
        _MAGIC,
        f"kind {'vector' if vector else 'scalar'}",
        f"ncomp {ncomp}",
        "dims " + " ".join(str(n) for n in g.dims),
        "spacing " + " ".join(_fmt(h) for h in g.spacing),
        "origin " + " ".join(_fmt(o) for o in g.origin),
        "boundary " + " ".join(g.boundary),
        f"unit {f.unit}",
        "data",
    ]
    vals = f.values.reshape(ncomp, -1).T if vector else f.values.reshape(-1, 1)
    lines.extend(" ".join(_fmt(x) for x in row) for row in vals)
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path):
    """Inverse of :func:`write_field`."""
    text = Path(path).read_text().splitlines()
    if not text or text[0] != _MAGIC:
        raise FieldError(f"{path}: not an nsaudit field file")
    header = {}
    i = 1
    while text[i] != "data":
        key, _, rest = text[i].partition(" ")
        header[key] = rest
        i += 1
    ncomp = int(header["ncomp"])
    grid = GridSpec(
        [int(n) for n in header["dims"].split()],
        [float(x) for x in header["spacing"].split()],
        [float(x) for x in header["origin"].split()],
        header["boundary"].split(),
    )
    rows = np.array([[float(x) for x in ln.split()] for ln in text[i + 1 :] if ln.strip()])
    if rows.shape != (grid.size, ncomp):
        raise FieldError(f"{path}: expected {grid.size}x{ncomp} values, got {rows.shape}")
    unit = header.get("unit", "")
    if header["kind"] == "vector":
        return VectorField(grid, rows.T.reshape((ncomp,) + grid.dims), unit)
    return ScalarField(grid, rows[:, 0].reshape(grid.dims), unit)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")
