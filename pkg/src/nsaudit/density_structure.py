"""Linear density, surface density and their extraction along streamtubes.

A streamtube is carried as a centreline plus one cross-section area per
station. For a divergence-free field the volumetric flux through a tube is
constant, so the area at a station is ``flux / |u|`` and the linear density is
``rho * area`` along the unit tangent.

Station surface density is taken as ``rho`` times the thickness of the slab
that crosses the station in a reference time ``slab_time`` (``|u| *
slab_time``). With that reading ``rho_S * |rho_L| = rho**2 * flux *
slab_time`` along every tube.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, FieldError, GeometryError
from .fields import VectorField, ScalarField, divergence, interpolate


@dataclass(frozen=True)
class DensityStructure:
    """Density triple of one station: ``rho_L`` (kg/m, vector), ``rho_S``
    (kg/m^2) and bulk ``rho`` (kg/m^3)."""

    rho_L: np.ndarray
    rho_S: float
    rho: float

    def __post_init__(self):
        vec = np.array(self.rho_L, dtype=float).reshape(-1)
        if vec.size == 2:
            vec = np.append(vec, 0.0)
        vec.setflags(write=False)
        object.__setattr__(self, "rho_L", vec)
        if not self.rho > 0:
            raise DomainError(f"rho must be positive, got {self.rho}")
        if self.rho_S < 0:
            raise DomainError(f"rho_S must be non-negative, got {self.rho_S}")

    @property
    def rho_L_magnitude(self) -> float:
        return float(np.linalg.norm(self.rho_L))


@dataclass(frozen=True)
class TubeDecomposition:
    """``m`` tubes of lengths ``tube_lengths`` and ``m`` slabs of areas
    ``slab_areas`` sharing a total mass ``total_mass``; each tube and each
    slab carries ``total_mass / m``."""

    total_mass: float
    m: int
    tube_lengths: np.ndarray
    slab_areas: np.ndarray

    def __post_init__(self):
        L = np.array(self.tube_lengths, dtype=float).reshape(-1)
        S = np.array(self.slab_areas, dtype=float).reshape(-1)
        if self.m < 1:
            raise DomainError(f"need at least one tube, got m={self.m}")
        if L.size != self.m or S.size != self.m:
            raise DomainError(f"expected {self.m} lengths and areas, got {L.size} and {S.size}")
        if np.any(L <= 0) or np.any(S <= 0):
            raise DomainError("tube lengths and slab areas must be positive")
        if not self.total_mass > 0:
            raise DomainError("total mass must be positive")
        L.setflags(write=False)
        S.setflags(write=False)
        object.__setattr__(self, "tube_lengths", L)
        object.__setattr__(self, "slab_areas", S)

    @property
    def element_mass(self) -> float:
        return self.total_mass / self.m

    def rho_L(self, j: int) -> float:
        """Linear density magnitude of tube ``j``."""
        return self.element_mass / self.tube_lengths[j]


def rho_S_of_slab(decomp: TubeDecomposition, i: int) -> float:
    return decomp.element_mass / decomp.slab_areas[i]


def consistent_decomposition(volume: float, rho: float, m: int, slab_area: float | None = None):
    """Decomposition meeting the density theorem's premises exactly.

    The product ``(rho_S)_i |rho_L|_j`` equals ``(M/m)^2 / (S_i L_j)``; it is
    the same for every pair and equal to ``2 M rho / m^2`` only if every
    ``S_i L_j`` is ``M / (2 rho) = V / 2``. That geometric condition is what
    this builder enforces (and what :func:`product_invariant` reports).
    """
    if not (volume > 0 and rho > 0):
        raise DomainError("volume and rho must be positive")
    S = slab_area if slab_area is not None else volume ** (2.0 / 3.0)
    L = volume / (2.0 * S)
    return TubeDecomposition(rho * volume, m, np.full(m, L), np.full(m, S))


@dataclass(frozen=True)
class ProductVerdict:
    passed: bool
    products: np.ndarray = field(repr=False)
    ratio: float
    expected: float
    value_error: float
    implied_area_length: float
    reason: str = ""


def product_invariant(decomp: TubeDecomposition, rho: float, tol: float = 1e-12) -> ProductVerdict:
    """Check ``|rho_S rho_L| = 2 M rho / m^2`` over every slab/tube pair.

    PASS needs the max/min pair ratio within ``1 + tol`` and the common value
    within ``tol`` (relative) of ``2 M rho / m^2``.
    """
    if decomp.m < 1:
        raise DomainError("empty decomposition")
    mass = decomp.element_mass
    rho_S = mass / decomp.slab_areas
    rho_L = mass / decomp.tube_lengths
    products = np.outer(rho_S, rho_L)
    ratio = float(products.max() / products.min())
    expected = 2.0 * decomp.total_mass * rho / decomp.m**2
    value_error = float(np.max(np.abs(products - expected)) / expected)
    reasons = []
    if not ratio - 1.0 < tol:
        reasons.append(f"pair products not constant (max/min = {ratio:.6g})")
    if not value_error < tol:
        reasons.append(f"common value off 2M*rho/m^2 by {value_error:.3g} (relative)")
    return ProductVerdict(
        passed=not reasons,
        products=products,
        ratio=ratio,
        expected=expected,
        value_error=value_error,
        implied_area_length=decomp.total_mass / (2.0 * rho),
        reason="; ".join(reasons),
    )


# -- streamtubes -----------------------------------------------------------------


@dataclass(frozen=True)
class StreamTube:
    """Discretized tube: centreline points, station areas, bulk density.

    ``speeds``, ``pressures`` and ``slab_time`` are optional extraction data;
    ``reason`` records why integration stopped.
    """

    points: np.ndarray
    areas: np.ndarray
    rho: float
    speeds: np.ndarray | None = None
    pressures: np.ndarray | None = None
    slab_time: float = 1.0
    reason: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        areas = np.array(self.areas, dtype=float).reshape(-1)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise GeometryError("a tube needs at least 2 stations")
        if areas.size != pts.shape[0]:
            raise GeometryError("one area per station required")
        if np.any(areas <= 0):
            raise GeometryError("station areas must be positive")
        if not self.rho > 0:
            raise DomainError("rho must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "areas", areas)
        if self.arclength()[-1] <= 0:
            raise GeometryError("tube has zero arclength")

    @property
    def n_stations(self) -> int:
        return self.points.shape[0]

    def arclength(self) -> np.ndarray:
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def mass(self) -> float:
        """Mass carried: ``rho`` times the trapezoidal tube volume."""
        s = self.arclength()
        return float(self.rho * np.sum(0.5 * (self.areas[1:] + self.areas[:-1]) * np.diff(s)))

    def reversed(self) -> "StreamTube":
        flip = (lambda a: None if a is None else a[::-1].copy())
        return StreamTube(
            self.points[::-1].copy(),
            self.areas[::-1].copy(),
            self.rho,
            flip(self.speeds),
            flip(self.pressures),
            self.slab_time,
            self.reason,
        )

    def tangent(self, k: int) -> np.ndarray:
        p = self.points
        n = self.n_stations
        if not 0 <= k < n:
            raise IndexError(f"station {k} out of range 0..{n - 1}")
        if n == 2:
            d = p[1] - p[0]
        elif k == 0:
            d = -3 * p[0] + 4 * p[1] - p[2]
        elif k == n - 1:
            d = 3 * p[-1] - 4 * p[-2] + p[-3]
        else:
            d = p[k + 1] - p[k - 1]
        norm = np.linalg.norm(d)
        if not norm > 0:
            raise GeometryError(f"degenerate tangent at station {k} (repeated points)")
        return d / norm

    def rho_S(self, k: int) -> float:
        if self.speeds is None:
            raise GeometryError("station surface density needs the station speed")
        return float(self.rho * self.speeds[k] * self.slab_time)

    def density_structure(self, k: int) -> DensityStructure:
        rho_S = self.rho_S(k) if self.speeds is not None else 0.0
        return DensityStructure(rho_L_at_station(self, k), rho_S, self.rho)

    def density_structures(self) -> list:
        return [self.density_structure(k) for k in range(self.n_stations)]


def rho_L_at_station(t: StreamTube, k: int) -> np.ndarray:
    """``rho * area`` along the unit centreline tangent at station ``k``."""
    return t.rho * t.areas[k] * t.tangent(k)


def extract_density_structure(
    v: VectorField,
    rho: float,
    seeds: Sequence,
    flux: float,
    *,
    pressure: ScalarField | None = None,
    ds: float | None = None,
    max_stations: int = 2000,
    stagnation: float = 1e-9,
    max_divergence: float | None = None,
    slab_time: float = 1.0,
) -> list:
    """Trace one tube per seed through ``v``.

    Centrelines follow ``dx/ds = u/|u|`` with classical RK4 in arclength and
    multilinear interpolation. A tube stops with reason ``"stagnation"`` when
    ``|u|`` drops below ``stagnation``, ``"exit"`` when a stage leaves the
    domain and ``"length"`` at ``max_stations``.
    """
    if not (rho > 0 and flux > 0):
        raise DomainError("rho and flux must be positive")
    g = v.grid
    if max_divergence is not None:
        div = float(np.max(np.abs(divergence(v).values)))
        if div > max_divergence:
            raise FieldError(f"field divergence {div:.3g} exceeds {max_divergence:.3g}")
    step = ds if ds is not None else 0.5 * min(g.spacing)
    dim = g.ndim
    tubes = []
    for seed in seeds:
        x = np.zeros(dim)
        x[:] = np.asarray(seed, dtype=float)[:dim]
        if not g.contains(x):
            raise DomainError(f"seed {tuple(x)} lies outside the domain")
        pts, speeds = [], []
        reason = "length"
        while len(pts) < max_stations:
            u = interpolate(v, x)[0][:dim]
            speed = float(np.linalg.norm(u))
            if speed < stagnation:
                reason = "stagnation"
                break
            pts.append(x.copy())
            speeds.append(speed)
            x_next, why = _rk4_step(v, x, step, dim, stagnation)
            if x_next is None:
                reason = why
                break
            x = x_next
        if len(pts) < 2:
            raise GeometryError(f"tube from seed {tuple(seed)} has fewer than 2 stations ({reason})")
        pts = np.array(pts)
        speeds = np.array(speeds)
        P = interpolate(pressure, pts) if pressure is not None else None
        tubes.append(StreamTube(pts, flux / speeds, rho, speeds, P, slab_time, reason))
    return tubes


def _direction(v, x, dim, stagnation):
    """Unit velocity at ``x``, or the reason the tube must stop there."""
    if not v.grid.contains(x):
        return None, "exit"
    u = interpolate(v, x)[0][:dim]
    n = np.linalg.norm(u)
    if n < stagnation:
        return None, "stagnation"
    return u / n, ""


def _rk4_step(v, x, h, dim, stagnation):
    k1, why = _direction(v, x, dim, stagnation)
    if k1 is None:
        return None, why
    k2, why = _direction(v, x + 0.5 * h * k1, dim, stagnation)
    if k2 is None:
        return None, why
    k3, why = _direction(v, x + 0.5 * h * k2, dim, stagnation)
    if k3 is None:
        return None, why
    k4, why = _direction(v, x + h * k3, dim, stagnation)
    if k4 is None:
        return None, why
    x_new = x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    if not v.grid.contains(x_new):
        return None, "exit"
    return x_new, ""


TUBE_COLUMNS = (
    "tube",
    "station",
    "arclength",
    "x",
    "y",
    "z",
    "tx",
    "ty",
    "tz",
    "area",
    "rho_L",
    "rho_S",
    "speed",
    "pressure",
)


def tube_rows(tubes: Sequence[StreamTube]):
    """Per-station records in :data:`TUBE_COLUMNS` order.

    Positions and tangents are padded to three components; ``rho_S``,
    ``speed`` and ``pressure`` are ``nan`` when the tube lacks that data.
    """
    for i, t in enumerate(tubes):
        s = t.arclength()
        for k in range(t.n_stations):
            pos = np.zeros(3)
            pos[: t.points.shape[1]] = t.points[k]
            tan = np.zeros(3)
            tan[: t.points.shape[1]] = t.tangent(k)
            yield (
                i,
                k,
                s[k],
                *pos,
                *tan,
                t.areas[k],
                float(np.linalg.norm(rho_L_at_station(t, k))),
                t.rho_S(k) if t.speeds is not None else math.nan,
                t.speeds[k] if t.speeds is not None else math.nan,
                t.pressures[k] if t.pressures is not None else math.nan,
            )


def write_tubes_csv(tubes: Sequence[StreamTube], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TUBE_COLUMNS)
        for row in tube_rows(tubes):
            w.writerow([row[0], row[1]] + [format(float(x), ".17g") for x in row[2:]])
