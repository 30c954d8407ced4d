"""Small 2D incompressible Navier-Stokes solver used as a trusted oracle.

Collocated grid, explicit Euler for advection (skew-symmetric form) and
diffusion, then an exact discrete projection onto the null space of the
divergence operator ``D`` used by :func:`nsaudit.fields.divergence`::

    u = u* - D^T psi,    (D D^T) psi = D u*,    p = -(rho/dt) psi

``D D^T`` is singular but the right-hand side lies in its range, so plain
conjugate gradients converges; ``psi`` is warm-started from the previous
pressure, which keeps restarts from a snapshot bit-identical.

Two cases are supported: a doubly periodic box and a plane channel
(periodic in x, no-slip walls at the first and last y nodes).
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .analytic_flows import TaylorGreenParams, periodic_box, taylor_green
from .errors import CFLError, ConfigError, DomainError, PoissonError, SteadyStateError
from .fields import (
    CLAMPED,
    PERIODIC,
    GridSpec,
    ScalarField,
    VectorField,
    diff,
    diff2,
    divergence,
    interpolate,
    read_field,
    write_field,
)

PERIODIC_BOX = "periodic"
CHANNEL = "channel"

CFL_MAX = 0.5
POISSON_RTOL = 1e-10
DIV_TOL = 1e-8


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``forcing`` is a constant body force per unit mass ``(fx, fy)`` in m/s^2.
    """

    grid: GridSpec
    nu: float
    rho: float = 1.0
    dt: float = 0.01
    forcing: tuple = (0.0, 0.0)
    bc: str = PERIODIC_BOX
    poisson_maxiter: int = 20000

    def __post_init__(self):
        object.__setattr__(self, "forcing", tuple(float(f) for f in self.forcing))
        if self.grid.ndim != 2:
            raise DomainError("the reference solver is 2D only")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if self.nu < 0:
            raise DomainError(f"nu must be non-negative, got {self.nu}")
        if not self.rho > 0:
            raise DomainError(f"rho must be positive, got {self.rho}")
        if len(self.forcing) != 2:
            raise DomainError("forcing needs 2 components")
        want = {PERIODIC_BOX: (PERIODIC, PERIODIC), CHANNEL: (PERIODIC, CLAMPED)}
        if self.bc not in want:
            raise DomainError(f"unknown boundary condition {self.bc!r}")
        if tuple(self.grid.boundary) != want[self.bc]:
            raise DomainError(f"bc {self.bc!r} needs grid boundaries {want[self.bc]}")

    @property
    def mu(self) -> float:
        return self.rho * self.nu

    @classmethod
    def periodic(cls, n: int, nu: float, dt: float, rho: float = 1.0, forcing=(0.0, 0.0)):
        """``n x n`` box of side 2 pi."""
        return cls(periodic_box(n), nu, rho, dt, forcing, PERIODIC_BOX)

    @classmethod
    def channel(
        cls, nx: int, ny: int, nu: float, dt: float, G: float,
        rho: float = 1.0, half_width: float = 1.0, length: float = 2.0,
    ):
        """Channel ``y in [-R, R]`` driven by the pressure gradient ``G`` (Pa/m),
        applied as the body force ``G / rho``."""
        grid = GridSpec.box((nx, ny), (0.0, -half_width), (length, half_width), (PERIODIC, CLAMPED))
        return cls(grid, nu, rho, dt, (G / rho, 0.0), CHANNEL)


@dataclass(frozen=True)
class SolverState:
    t: float
    velocity: VectorField
    pressure: ScalarField
    step: int = 0


def initial_state(config: SolverConfig, velocity: VectorField | None = None) -> SolverState:
    g = config.grid
    v = velocity if velocity is not None else VectorField(g, np.zeros((2,) + g.dims))
    if v.grid != g or v.ncomp != 2:
        raise DomainError("initial velocity must be a 2-component field on the config grid")
    vals = v.values.copy()
    if config.bc == CHANNEL:
        vals[:, :, 0] = vals[:, :, -1] = 0.0
    return SolverState(0.0, VectorField(g, vals), ScalarField(g, np.zeros(g.dims), "Pa"))


def taylor_green_state(config: SolverConfig, amplitude: float = 1.0) -> SolverState:
    if config.bc != PERIODIC_BOX:
        raise DomainError("Taylor-Green needs the periodic box")
    v = taylor_green(TaylorGreenParams(max(config.nu, 1e-300), amplitude), 0.0, config.grid)
    return initial_state(config, v)


def kinetic_energy(state: SolverState, rho: float = 1.0) -> float:
    """Grid mean of ``rho |u|^2 / 2`` (J/m^3)."""
    return float(np.mean(0.5 * rho * np.sum(state.velocity.values**2, axis=0)))


# -- discrete operators ---------------------------------------------------------


class _Operators:
    def __init__(self, config: SolverConfig):
        g = config.grid
        nx, ny = g.dims
        mats = []
        for axis, n in enumerate(g.dims):
            eye = np.eye(n)
            mats.append(sp.csr_matrix(diff(eye, 0, g.spacing[axis], g.periodic(axis))))
        Dx = sp.kron(mats[0], sp.identity(ny), format="csr")
        Dy = sp.kron(sp.identity(nx), mats[1], format="csr")
        if config.bc == CHANNEL:
            mask = np.ones(g.dims, dtype=bool)
            mask[:, 0] = mask[:, -1] = False
        else:
            mask = np.ones(g.dims, dtype=bool)
        self.mask = mask
        cols = np.flatnonzero(mask.ravel())
        self.D = sp.hstack([Dx[:, cols], Dy[:, cols]], format="csr")
        self.DT = self.D.T.tocsr()
        self.A = (self.D @ self.DT).tocsr()
        self.n_unknown = cols.size

    def pack(self, values: np.ndarray) -> np.ndarray:
        return np.concatenate([values[0][self.mask], values[1][self.mask]])

    def unpack(self, vec: np.ndarray, shape) -> np.ndarray:
        out = np.zeros((2,) + shape)
        k = self.n_unknown
        out[0][self.mask] = vec[:k]
        out[1][self.mask] = vec[k:]
        return out


@functools.lru_cache(maxsize=16)
def _operators(config: SolverConfig) -> _Operators:
    return _Operators(config)


def stable_dt(config: SolverConfig, max_speed: float) -> float:
    """Largest dt allowed by the advective (CFL) and diffusive limits."""
    h = min(config.grid.spacing)
    limits = [math.inf]
    if max_speed > 0:
        limits.append(CFL_MAX * h / max_speed)
    if config.nu > 0:
        limits.append(0.5 / (config.nu * sum(1.0 / s**2 for s in config.grid.spacing)))
    return min(limits)


def _tendency(config: SolverConfig, u: np.ndarray) -> np.ndarray:
    g = config.grid
    h = g.spacing
    per = [g.periodic(0), g.periodic(1)]
    out = np.empty_like(u)
    for i in range(2):
        adv = np.zeros(g.dims)
        for j in range(2):
            adv += u[j] * diff(u[i], j, h[j], per[j]) + diff(u[j] * u[i], j, h[j], per[j])
        lap = diff2(u[i], 0, h[0], per[0]) + diff2(u[i], 1, h[1], per[1])
        out[i] = -0.5 * adv + config.nu * lap + config.forcing[i]
    return out


def step(state: SolverState, config: SolverConfig) -> SolverState:
    """Advance one time step; see the module docstring for the scheme."""
    g = config.grid
    u = state.velocity.values
    umax = float(np.sqrt(np.max(np.sum(u**2, axis=0))))
    need = stable_dt(config, umax)
    if config.dt > need:
        raise CFLError(f"dt={config.dt:.3g} exceeds the stable limit {need:.3g}", need)

    ops = _operators(config)
    star = u + config.dt * _tendency(config, u)
    ustar = ops.pack(star)
    rhs = ops.D @ ustar
    x0 = -(config.dt / config.rho) * state.pressure.values.ravel()
    bnorm = float(np.linalg.norm(rhs))
    # the residual is the post-step divergence, so it also gets an absolute
    # floor on the scale of max|u|/h; below it the right-hand side is round-off
    floor = POISSON_RTOL * float(np.max(np.abs(ustar), initial=0.0)) / min(g.spacing)
    goal = max(POISSON_RTOL * bnorm, floor)
    if bnorm <= floor:
        psi = np.zeros_like(rhs)
    else:
        # the previous pressure is a good guess unless the flow has decayed so far
        # that its rounding floor exceeds the new right-hand side
        if float(np.linalg.norm(rhs - ops.A @ x0)) >= bnorm:
            x0 = np.zeros_like(rhs)
        psi, info = cg(ops.A, rhs, x0=x0, rtol=POISSON_RTOL, atol=floor, maxiter=config.poisson_maxiter)
        res = float(np.linalg.norm(rhs - ops.A @ psi))
        if info != 0 and res > 10 * goal:
            raise PoissonError(f"pressure solve stalled at relative residual {res / bnorm:.3g}", res / bnorm)
    new = ops.unpack(ustar - ops.DT @ psi, g.dims)
    p = -(config.rho / config.dt) * psi.reshape(g.dims)
    return SolverState(
        (state.step + 1) * config.dt,
        VectorField(g, new),
        ScalarField(g, p, "Pa"),
        state.step + 1,
    )


def max_divergence(state: SolverState) -> float:
    return float(np.max(np.abs(divergence(state.velocity).values)))


def divergence_bound(state: SolverState) -> float:
    """The post-step contract ``DIV_TOL * max|u| / h``."""
    g = state.velocity.grid
    umax = float(np.max(state.velocity.magnitude()))
    return DIV_TOL * max(umax, 1e-300) / min(g.spacing)


# -- runs ------------------------------------------------------------------------


@dataclass
class RunResult:
    state: SolverState
    t: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    max_speed: list = field(default_factory=list)
    probes: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    probe_points: tuple = ()

    def columns(self) -> list:
        cols = ["t", "energy", "max_speed"]
        for k in range(len(self.probe_points)):
            cols += [f"probe{k}_u", f"probe{k}_v"]
        return cols

    def rows(self) -> list:
        out = []
        for i in range(len(self.t)):
            row = [self.t[i], self.energy[i], self.max_speed[i]]
            for pu in self.probes[i]:
                row.extend(pu)
            out.append(row)
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            for row in self.rows():
                w.writerow([format(float(x), ".17g") for x in row])


def _record(res: RunResult, state: SolverState, config: SolverConfig):
    res.t.append(state.t)
    res.energy.append(kinetic_energy(state, config.rho))
    res.max_speed.append(float(np.max(state.velocity.magnitude())))
    if res.probe_points:
        res.probes.append([tuple(v) for v in interpolate(state.velocity, res.probe_points)])
    else:
        res.probes.append([])


def run(
    config: SolverConfig,
    t_end: float,
    probes: Sequence = (),
    state: SolverState | None = None,
    snapshot_dir=None,
    snapshot_every: int = 0,
    check_divergence: bool = False,
) -> RunResult:
    """Advance to ``t_end`` and record the energy / max-speed / probe series.

    The step count is ``round(t_end / dt)``; times are ``step * dt`` so the
    series is identical whether or not the run was restarted.
    """
    if not t_end > 0:
        raise DomainError(f"t_end must be positive, got {t_end}")
    state = state if state is not None else initial_state(config)
    pts = tuple(tuple(map(float, p)) for p in probes)
    for p in pts:
        if not config.grid.contains(p):
            raise DomainError(f"probe {p} lies outside the grid")
    res = RunResult(state, probe_points=pts)
    last = int(round(t_end / config.dt))
    _record(res, state, config)
    if snapshot_dir is not None and snapshot_every:
        Path(snapshot_dir).mkdir(parents=True, exist_ok=True)
    while state.step < last:
        state = step(state, config)
        if check_divergence and max_divergence(state) > divergence_bound(state):
            raise PoissonError(
                f"divergence {max_divergence(state):.3g} above bound at step {state.step}",
                max_divergence(state),
            )
        _record(res, state, config)
        if snapshot_dir is not None and snapshot_every and state.step % snapshot_every == 0:
            res.snapshots.append(save_snapshot(state, snapshot_dir))
    res.state = state
    return res


def save_snapshot(state: SolverState, directory) -> Path:
    d = Path(directory)
    stem = d / f"snap_{state.step:07d}"
    write_field(state.velocity, stem.with_suffix(".velocity"))
    write_field(state.pressure, stem.with_suffix(".pressure"))
    stem.with_suffix(".step").write_text(f"{state.step}\n")
    return stem


def load_snapshot(stem, config: SolverConfig) -> SolverState:
    stem = Path(stem)
    v = read_field(stem.with_suffix(".velocity"))
    p = read_field(stem.with_suffix(".pressure"))
    n = int(stem.with_suffix(".step").read_text().split()[0])
    if v.grid != config.grid:
        raise DomainError("snapshot grid does not match the config")
    return SolverState(n * config.dt, v, p, n)


def run_to_steady(
    config: SolverConfig,
    state: SolverState | None = None,
    window: int = 100,
    rtol: float = 1e-8,
    max_steps: int = 200_000,
) -> SolverState:
    """Step until the velocity changes by less than ``rtol`` (relative, max
    norm) over ``window`` steps."""
    state = state if state is not None else initial_state(config)
    ref = state.velocity.values
    while state.step < max_steps:
        for _ in range(window):
            state = step(state, config)
        cur = state.velocity.values
        scale = float(np.max(np.abs(cur)))
        if scale > 0 and float(np.max(np.abs(cur - ref))) <= rtol * scale:
            return state
        ref = cur
    raise SteadyStateError(f"no steady state after {state.step} steps (window {window}, rtol {rtol})")


def config_from(cfg: dict) -> tuple:
    """Build ``(SolverConfig, case, extras)`` from a parsed ``[solver]`` section."""
    s = dict(cfg.get("solver", {}))
    case = s.pop("case", "taylor-green")
    try:
        if case == "taylor-green":
            n = s.pop("n", 64)
            conf = SolverConfig.periodic(n, s.pop("nu", 0.1), s.pop("dt", 0.01), s.pop("rho", 1.0))
        elif case == "channel":
            conf = SolverConfig.channel(
                s.pop("nx", 16), s.pop("ny", 21), s.pop("nu", 1.0), s.pop("dt", 0.002),
                s.pop("G", 1.0), s.pop("rho", 1.0), s.pop("half_width", 1.0), s.pop("length", 2.0),
            )
        else:
            raise ConfigError(f"unknown solver case {case!r}")
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    return conf, case, s
