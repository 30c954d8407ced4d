"""Closed-form flows and structural laws used as audit oracles.

Pipe Poiseuille profile and its curvature constant, the bent-tube angular
velocity, the two-region vortex curvature law, plus exact flows the reference
solver and the tube extractor are checked against (Taylor-Green vortex, plane
channel, radial sink).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError
from .fields import CLAMPED, PERIODIC, GridSpec, ScalarField, VectorField


@dataclass(frozen=True)
class PoiseuilleParams:
    """Pressure drop ``P_L`` (Pa) over length ``L`` (m), viscosity ``mu``
    (Pa s) and distance ``R`` (m) from the max-speed line to the wall."""

    P_L: float
    mu: float
    L: float
    R: float

    def __post_init__(self):
        if not (self.mu > 0 and self.L > 0 and self.R > 0):
            raise DomainError(f"need mu, L, R > 0, got mu={self.mu}, L={self.L}, R={self.R}")


@dataclass(frozen=True)
class VortexParams:
    k_mu: float
    R: float
    r0: float = 0.0
    x0: float = 0.0

    def __post_init__(self):
        if not self.R > 0:
            raise DomainError(f"vortex radius must be positive, got {self.R}")
        if self.r0 < 0:
            raise DomainError(f"r0 must be non-negative, got {self.r0}")
        if not abs(self.x0) < self.R:
            raise DomainError(f"|x0| must be below R, got x0={self.x0}, R={self.R}")


@dataclass(frozen=True)
class TaylorGreenParams:
    nu: float
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.nu > 0:
            raise DomainError(f"nu must be positive, got {self.nu}")


def poiseuille_speed(p: PoiseuilleParams, r):
    """``P_L (R^2 - r^2) / (4 mu L)``; accepts scalars or arrays."""
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(r) > p.R):
        raise DomainError(f"|r| exceeds R={p.R}")
    u = p.P_L * (p.R**2 - r**2) / (4.0 * p.mu * p.L)
    return float(u) if u.ndim == 0 else u


def poiseuille_curvature(p: PoiseuilleParams) -> float:
    """``-d^2u/dr^2`` of the pipe profile, ``P_L / (2 mu L)``, for every r."""
    return p.P_L / (2.0 * p.mu * p.L)


def bent_tube_angular_velocity(p: PoiseuilleParams, r0: float, sign: int, r):
    """Angular velocity about the bend centre, ``u(r) / (r0 + sign*r)``."""
    if sign not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign}")
    r = np.asarray(r, dtype=float)
    arm = r0 + sign * r
    if np.any(arm <= 0):
        raise DomainError("r0 + sign*r must be positive (gyration centre reached)")
    w = poiseuille_speed(p, r) / arm
    return float(w) if np.ndim(w) == 0 else w


def vortex_curvature(p: VortexParams, r):
    """``d^2 omega / dr^2`` under the two-region vortex law.

    Outer region (``r > x0``): ``k_mu R^2 / r^3``. Inner region (``r <= x0``):
    zero. ``r = 0`` is the pole of the outer law and raises.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r == 0):
        raise SingularityError("vortex curvature law has a pole at r = 0")
    if np.any(np.abs(r) > p.R):
        raise DomainError(f"|r| exceeds vortex radius R={p.R}")
    out = np.where(r > p.x0, p.k_mu * p.R**2 / r**3, 0.0)
    return float(out) if out.ndim == 0 else out


# -- oracle flows ---------------------------------------------------------------


def periodic_box(n: int) -> GridSpec:
    return GridSpec.box((n, n), (0.0, 0.0), (2 * math.pi, 2 * math.pi), PERIODIC)


def taylor_green(p: TaylorGreenParams, t: float, grid: GridSpec | int = 64) -> VectorField:
    """Decaying Taylor-Green vortex sampled on ``grid`` (or an n x n box)."""
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t}")
    g = periodic_box(grid) if isinstance(grid, int) else grid
    decay = p.amplitude * math.exp(-2.0 * p.nu * t)
    return VectorField.from_function(
        g, lambda x, y: (decay * np.sin(x) * np.cos(y), -decay * np.cos(x) * np.sin(y))
    )


def taylor_green_pressure(
    p: TaylorGreenParams, t: float, rho: float = 1.0, grid: GridSpec | int = 64
) -> ScalarField:
    g = periodic_box(grid) if isinstance(grid, int) else grid
    amp = rho * p.amplitude**2 / 4.0 * math.exp(-4.0 * p.nu * t)
    return ScalarField.from_function(g, lambda x, y: amp * (np.cos(2 * x) + np.cos(2 * y)), "Pa")


def taylor_green_energy(p: TaylorGreenParams, t: float, rho: float = 1.0) -> float:
    """Domain mean of ``rho |u|^2 / 2``."""
    return rho * p.amplitude**2 / 4.0 * math.exp(-4.0 * p.nu * t)


def plane_channel_speed(G: float, mu: float, R: float, y):
    """Plane-channel Poiseuille profile ``G (R^2 - y^2) / (2 mu)``."""
    y = np.asarray(y, dtype=float)
    u = G * (R**2 - y**2) / (2.0 * mu)
    return float(u) if u.ndim == 0 else u


def plane_channel_curvature(G: float, mu: float) -> float:
    return G / mu


@dataclass(frozen=True)
class SinkFlow:
    """Two-dimensional point sink ``u = -q (x - x_a) / |x - x_a|^2``.

    Away from the apex the field is divergence- and curl-free; streamlines are
    rays converging on the apex and the speed ``q / r`` rises along them, the
    wedge/converging-channel case. Pressure follows Bernoulli:
    ``P = p_inf - rho |u|^2 / 2``.
    """

    q: float = 1.0
    apex: tuple = (0.0, 0.0)
    rho: float = 1.0
    p_inf: float = 0.0

    def velocity(self, x, y):
        dx, dy = x - self.apex[0], y - self.apex[1]
        r2 = dx * dx + dy * dy
        return -self.q * dx / r2, -self.q * dy / r2

    def speed(self, x, y):
        return self.q / np.hypot(x - self.apex[0], y - self.apex[1])

    def pressure(self, x, y):
        return self.p_inf - 0.5 * self.rho * self.speed(x, y) ** 2

    def grid(self, n: int = 128, lower=(1.0, -0.5), upper=(2.0, 0.5)) -> GridSpec:
        return GridSpec.box((n, n), lower, upper, CLAMPED)

    def sample(self, grid: GridSpec) -> tuple:
        return (
            VectorField.from_function(grid, self.velocity),
            ScalarField.from_function(grid, self.pressure, "Pa"),
        )
