"""Evaluator for the claimed parametric velocity formula.

    u = (1/omega0) [P_L (theta1/|rho_L| - theta2/rho_S) - vartheta mu_rot] - theta3

split as ``u = u_L + u_0`` with ``u_0 = -theta3``, together with its regime
classification (poles at ``|rho_L| = 0`` and ``rho_S = 0``), the finite
stop-time expression for unforced flow and the density-chain check.

Units are SI throughout and the formula is applied verbatim; nothing here
checks that it is dimensionally consistent or that it solves the momentum
equation. Those are audit questions, answered in :mod:`nsaudit.claims_audit`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .config import load_config
from .density_structure import DensityStructure
from .errors import ConfigError, DomainError, SingularityError


def _vec3(v) -> np.ndarray:
    a = np.zeros(3)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size > 3:
        raise DomainError(f"expected at most 3 components, got {v.size}")
    a[: v.size] = v
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SolutionParams:
    """Coefficients of the parametric formula.

    Attributes
    ----------
    omega0 : float
        Natural oscillation frequency of the medium (rad/s).
    P_L : float
        Pressure drop over the segment (Pa).
    theta1 : array (3,)
        Tube taper vector dS/dL (m).
    theta2 : array (3,)
        Tube direction with magnitude 1/2.
    vartheta : float
        Kinematic viscosity (m^2/s).
    mu_rot : array (3,)
        Vortex-viscosity vector (1/(m s)).
    theta3 : array (3,)
        Pressure-change velocity (m/s).
    L : float, optional
        Segment length (m); only needed for ``kappa``.
    """

    omega0: float
    P_L: float = 0.0
    theta1: np.ndarray = (0.0, 0.0, 0.0)
    theta2: np.ndarray = (0.5, 0.0, 0.0)
    vartheta: float = 0.0
    mu_rot: np.ndarray = (0.0, 0.0, 0.0)
    theta3: np.ndarray = (0.0, 0.0, 0.0)
    L: float | None = None

    def __post_init__(self):
        for name in ("theta1", "theta2", "mu_rot", "theta3"):
            object.__setattr__(self, name, _vec3(getattr(self, name)))
        if not self.omega0 > 0:
            raise DomainError(f"omega0 must be positive, got {self.omega0}")
        if self.vartheta < 0:
            raise DomainError(f"vartheta must be non-negative, got {self.vartheta}")
        if not math.isclose(float(np.linalg.norm(self.theta2)), 0.5, rel_tol=1e-12):
            raise DomainError(f"|theta2| must be 1/2, got {np.linalg.norm(self.theta2)}")
        if self.L is not None and not self.L > 0:
            raise DomainError(f"L must be positive, got {self.L}")

    @property
    def kappa(self) -> float:
        """Vortex resistance ``P_L / (2 L)`` (Pa/m)."""
        if self.L is None:
            raise DomainError("kappa needs the segment length L")
        return self.P_L / (2.0 * self.L)

    def replace(self, **changes) -> "SolutionParams":
        from dataclasses import replace

        return replace(self, **changes)


def theta2_along(direction) -> np.ndarray:
    """Half-length vector along ``direction``."""
    d = _vec3(direction)
    n = np.linalg.norm(d)
    if not n > 0:
        raise DomainError("direction must be non-zero")
    return 0.5 * d / n


def theta3_from_dP_du(zeta, dP_du: float, rho: float) -> np.ndarray:
    """``zeta * (dP/du) / rho``."""
    return _vec3(np.asarray(zeta, dtype=float) * dP_du / rho)


def theta3_from_dP_dL(zeta, dP_dL: float, rho: float, omega0: float) -> np.ndarray:
    """``zeta * (dP/dL) / (rho * omega0)``; agrees with the du form when
    ``dP/du = (dP/dL) / omega0``."""
    return _vec3(np.asarray(zeta, dtype=float) * dP_dL / (rho * omega0))


# -- regimes --------------------------------------------------------------------


class Regime(str, Enum):
    LAMINAR = "Laminar"
    TURBULENCE_ONSET = "TurbulenceOnset"
    SHOCK_ONSET = "ShockOnset"


@dataclass(frozen=True)
class RegimeThresholds:
    rho_L: float = 1e-9
    rho_S: float = 1e-9

    def __post_init__(self):
        if not (self.rho_L > 0 and self.rho_S > 0):
            raise DomainError("regime thresholds must be strictly positive")


@dataclass(frozen=True)
class RegimeVerdict:
    regime: Regime
    quantity: str = ""
    value: float = math.nan
    offending: tuple = ()

    @property
    def laminar(self) -> bool:
        return self.regime is Regime.LAMINAR


def classify_regime(ds: DensityStructure, thresholds: RegimeThresholds | None = None) -> RegimeVerdict:
    """Turbulence onset when ``|rho_L|`` falls to its threshold, shock onset
    when ``rho_S`` does. If both do, turbulence is reported first and both
    quantities are listed in ``offending``."""
    th = thresholds or RegimeThresholds()
    offending = []
    mag = ds.rho_L_magnitude
    if mag <= th.rho_L:
        offending.append(("rho_L", mag))
    if ds.rho_S <= th.rho_S:
        offending.append(("rho_S", ds.rho_S))
    if not offending:
        return RegimeVerdict(Regime.LAMINAR)
    name, value = offending[0]
    regime = Regime.TURBULENCE_ONSET if name == "rho_L" else Regime.SHOCK_ONSET
    return RegimeVerdict(regime, name, value, tuple(offending))


# -- the formula -----------------------------------------------------------------


def split_velocity(p: SolutionParams, ds: DensityStructure, thresholds: RegimeThresholds | None = None):
    """Return ``(u_L, u_0)``; raises :class:`SingularityError` off the laminar regime."""
    verdict = classify_regime(ds, thresholds)
    if not verdict.laminar:
        raise SingularityError(
            f"{verdict.regime.value}: {verdict.quantity} = {verdict.value:.3g}", verdict
        )
    bracket = p.P_L * (p.theta1 / ds.rho_L_magnitude - p.theta2 / ds.rho_S) - p.vartheta * p.mu_rot
    u_L = bracket / p.omega0
    u_0 = -p.theta3
    return u_L, u_0


def evaluate_velocity(p: SolutionParams, ds: DensityStructure, thresholds: RegimeThresholds | None = None):
    u_L, u_0 = split_velocity(p, ds, thresholds)
    return u_L + u_0


def velocity_terms(p: SolutionParams, ds: DensityStructure) -> dict:
    """Each additive contribution to the velocity, for term-by-term checks."""
    w = 1.0 / p.omega0
    return {
        "taper": w * p.P_L * p.theta1 / ds.rho_L_magnitude,
        "direction": -w * p.P_L * p.theta2 / ds.rho_S,
        "viscous": -w * p.vartheta * p.mu_rot,
        "pressure": -p.theta3,
    }


# Every term reduces to m/s with the documented parameter units:
#   Pa * m / (kg/m) / (1/s), Pa / (kg/m^2) / (1/s), (m^2/s) * (1/(m s)) / (1/s).
VELOCITY_UNITS = {"taper": "m/s", "direction": "m/s", "viscous": "m/s", "pressure": "m/s"}


# -- finite stop time --------------------------------------------------------------


@dataclass(frozen=True)
class DecayTime:
    t0: float
    stopped: bool
    singular: bool
    interpretation: str = (
        "t0 = |dP/du| / (rho * vartheta * |mu_rot|) - 1/omega0, magnitudes taken along zeta"
    )
    zeta: tuple = ()


def decay_time(p: SolutionParams, rho: float, dP_du: float, zeta=(1.0, 0.0, 0.0)) -> DecayTime:
    """Finite stop time for unforced flow (``P_L = 0``, ``dP/du <= 0``).

    A zero ``vartheta * |mu_rot|`` is reported as ``singular`` with an
    infinite ``t0``; a non-positive result is reported as ``stopped``.
    """
    if p.P_L != 0:
        raise DomainError("stop time is defined for the unforced case P_L = 0")
    if dP_du > 0:
        raise DomainError(f"stop time needs dP/du <= 0, got {dP_du}")
    if not rho > 0:
        raise DomainError("rho must be positive")
    z = _vec3(zeta)
    zn = float(np.linalg.norm(z))
    if not zn > 0:
        raise DomainError("zeta must be non-zero")
    drag = p.vartheta * float(np.linalg.norm(p.mu_rot))
    if drag == 0:
        return DecayTime(math.inf, False, True, zeta=tuple(z / zn))
    t0 = abs(dP_du) / (rho * drag) - 1.0 / p.omega0
    return DecayTime(t0, t0 <= 0, False, zeta=tuple(z / zn))


# -- density chain -----------------------------------------------------------------


@dataclass(frozen=True)
class ChainState:
    speed: float
    rho_S: float
    rho_L: float
    pressure: float


@dataclass(frozen=True)
class ChainVerdict:
    passed: bool
    pair: int | None = None
    quantity: str = ""
    detail: str = ""
    states: tuple = field(default=(), repr=False)


def bernoulli_chain_audit(states: Sequence, rtol: float = 0.0) -> ChainVerdict:
    """Check the density chain along an ordered sequence of states.

    Speed and ``rho_S`` must move together; ``|rho_L|`` and pressure must move
    against speed. Changes no larger than ``rtol`` times the local magnitude
    count as flat, and a flat speed step requires every other quantity to be
    flat as well. Returns the first violating adjacent pair.
    """
    st = [s if isinstance(s, ChainState) else ChainState(*map(float, s)) for s in states]
    if len(st) < 2:
        raise DomainError("the chain check needs at least 2 states")

    def trend(a, b):
        if abs(b - a) <= rtol * max(abs(a), abs(b)):
            return 0
        return 1 if b > a else -1

    for k in range(len(st) - 1):
        a, b = st[k], st[k + 1]
        du = trend(a.speed, b.speed)
        expected = {"rho_S": du, "rho_L": -du, "pressure": -du}
        for name, want in expected.items():
            got = trend(getattr(a, name), getattr(b, name))
            if got != want and not (want == 0 and got == 0):
                detail = (
                    f"speed {a.speed:.6g} -> {b.speed:.6g}, "
                    f"{name} {getattr(a, name):.6g} -> {getattr(b, name):.6g}"
                )
                return ChainVerdict(False, k, name, detail, tuple(st))
    return ChainVerdict(True, states=tuple(st))


# -- configuration -----------------------------------------------------------------

_PARAM_KEYS = ("omega0", "P_L", "theta1", "theta2", "vartheta", "mu_rot", "theta3", "L")


def params_from_config(cfg: dict) -> SolutionParams:
    """Build :class:`SolutionParams` from a parsed ``[solution]`` section."""
    sec = cfg.get("solution", {})
    if "omega0" not in sec:
        raise ConfigError("[solution] needs omega0")
    return SolutionParams(**{k: sec[k] for k in _PARAM_KEYS if k in sec})


def thresholds_from_config(cfg: dict) -> RegimeThresholds:
    return RegimeThresholds(**cfg.get("regime", {}))


def load_params(path) -> SolutionParams:
    return params_from_config(load_config(path))
