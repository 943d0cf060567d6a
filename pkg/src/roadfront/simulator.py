"""Explicit finite-difference integration of the field-road systems.

The half-plane is truncated to the strip [-X, X] x [0, Y].  The field density
v lives on the vertex grid (rows j = 0..ny for y_j = j dy, columns i for
x_i = -X + i dx), the road density u on the row y = 0.  One step is forward
Euler for

    v_t = d Lap v + f(v) + I0            in the strip
    -d v_y = mu u - nu v                 at y = 0 (ghost row)
    u_t = D J u + nu v(., 0) - mu u - q u_x   on the road

Under the time-step bound of ``GridSpec.stable_dt`` every update is a convex
combination with nonnegative weights, so the scheme is monotone and keeps
u, v >= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dispersion import ModelParams, c_field
from .errors import CflViolation, NonFinite, NotConverged, SupportTouchesBoundary
from .kernel import apply_J

CFL_SAFETY = 0.9
X_BOUNDARIES = ("neumann", "periodic")
Y_TOPS = ("dirichlet0", "neumann")


@dataclass(frozen=True)
class GridSpec:
    X: float = 300.0
    Y: float = 15.0
    dx: float = 0.25
    dy: float = 0.25
    dt: float | None = None
    x_boundary: str = "neumann"
    y_top: str = "dirichlet0"

    def __post_init__(self):
        for key in ("X", "Y", "dx", "dy"):
            if not getattr(self, key) > 0:
                raise ValueError(f"grid {key} must be positive, got {getattr(self, key)}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"grid dt must be positive, got {self.dt}")
        if self.x_boundary not in X_BOUNDARIES:
            raise ValueError(f"x_boundary must be one of {X_BOUNDARIES}, got {self.x_boundary!r}")
        if self.y_top not in Y_TOPS:
            raise ValueError(f"y_top must be one of {Y_TOPS}, got {self.y_top!r}")

    @property
    def nx(self) -> int:
        n = int(round(2 * self.X / self.dx))
        # the periodic grid drops the duplicate endpoint x = X
        return n if self.x_boundary == "periodic" else n + 1

    @property
    def ny(self) -> int:
        """Index of the top row; the field has ny + 1 rows."""
        return int(round(self.Y / self.dy))

    @property
    def x(self) -> np.ndarray:
        return -self.X + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.dy * np.arange(self.ny + 1)

    def field_rate(self, params: ModelParams) -> float:
        d = params.d
        return (2 * d / self.dx**2 + 2 * d / self.dy**2 + 2 * params.nu / self.dy
                + params.f.max_decay())

    def line_rate(self, params: ModelParams) -> float:
        return params.D + params.mu + abs(params.q) / self.dx

    def stable_dt(self, params: ModelParams) -> float:
        """Largest step keeping the scheme monotone, times the safety factor."""
        return CFL_SAFETY / max(self.field_rate(params), self.line_rate(params))

    def resolve_dt(self, params: ModelParams) -> float:
        return self.stable_dt(params) if self.dt is None else self.dt


@dataclass
class SimState:
    t: float
    u: np.ndarray
    v: np.ndarray
    params: ModelParams
    grid: GridSpec
    dt: float
    source: np.ndarray | None = None
    model: str = "invasion"
    steps: int = 0

    def copy(self) -> "SimState":
        return SimState(self.t, self.u.copy(), self.v.copy(), self.params, self.grid, self.dt,
                        None if self.source is None else self.source.copy(), self.model, self.steps)

    def row(self, y: float) -> int:
        return min(int(round(y / self.grid.dy)), self.grid.ny)

    @property
    def limit_v(self) -> float:
        """Level the field settles to behind the front."""
        return self.params.f.v_star()

    @property
    def limit_u(self) -> float:
        return self.params.nu / self.params.mu * self.limit_v


@dataclass(frozen=True)
class BumpSpec:
    """Flat-topped disk of height ``height`` and radius ``radius`` with a cos^2 edge."""

    height: float = 1.0
    radius: float = 2.0
    x0: float = 0.0
    y0: float = 4.0
    taper: float = 0.5  # fraction of the radius used by the smooth edge

    def sample(self, grid: GridSpec) -> np.ndarray:
        X, Y = np.meshgrid(grid.x, grid.y)
        r = np.hypot(X - self.x0, Y - self.y0)
        w = self.taper * self.radius
        r1 = self.radius - w
        out = np.zeros_like(r)
        out[r <= r1] = 1.0
        edge = (r > r1) & (r < self.radius)
        out[edge] = np.cos(0.5 * np.pi * (r[edge] - r1) / w) ** 2 if w > 0 else 0.0
        return self.height * out

    def mass(self) -> float:
        w = self.taper * self.radius
        r1 = self.radius - w
        return self.height * math.pi * (r1 * r1 + w * r1 + 2 * w * w * (0.25 - 1 / math.pi**2))

    def check_support(self, grid: GridSpec):
        margin = 5 * max(grid.dx, grid.dy)
        gaps = {
            "left": self.x0 - self.radius + grid.X,
            "right": grid.X - (self.x0 + self.radius),
            "road": self.y0 - self.radius,
            "top": grid.Y - (self.y0 + self.radius),
        }
        for side, gap in gaps.items():
            if self.height != 0 and gap < margin:
                raise SupportTouchesBoundary(
                    f"bump support comes within {gap:.3g} of the {side} edge (need >= {margin:.3g})")


def _check_dt(grid: GridSpec, params: ModelParams, dt: float):
    limit = grid.stable_dt(params) / CFL_SAFETY
    if dt > limit * (1 + 1e-12):
        raise CflViolation(f"dt={dt:.6g} exceeds the monotone-scheme bound {limit:.6g}")


def _check_setup(grid: GridSpec, params: ModelParams, dt: float):
    _check_dt(grid, params, dt)
    if params.D > 0:
        params.kernel.weights(grid.dx)  # raises UnderresolvedKernel


def init_invasion(grid: GridSpec, params: ModelParams, v0: BumpSpec | None = None) -> SimState:
    """u = 0 and v = compact bump."""
    v0 = v0 or BumpSpec()
    v0.check_support(grid)
    dt = grid.resolve_dt(params)
    _check_setup(grid, params, dt)
    v = v0.sample(grid)
    if grid.y_top == "dirichlet0":
        v[-1] = 0.0
    return SimState(0.0, np.zeros(grid.nx), v, params, grid, dt, model="invasion")


def init_sirt(grid: GridSpec, params: ModelParams, I0: BumpSpec | None = None,
              model: str = "sirt") -> SimState:
    """Zero cumulative densities with the compact infected source I0."""
    I0 = I0 or BumpSpec()
    I0.check_support(grid)
    dt = grid.resolve_dt(params)
    _check_setup(grid, params, dt)
    v = np.zeros((grid.ny + 1, grid.nx))
    src = I0.sample(grid)
    if not src.any():
        src = None
    return SimState(0.0, np.zeros(grid.nx), v, params, grid, dt, source=src, model=model)


def _pad_x(a: np.ndarray, boundary: str) -> np.ndarray:
    if boundary == "periodic":
        return np.concatenate([a[..., -1:], a, a[..., :1]], axis=-1)
    return np.concatenate([a[..., 1:2], a, a[..., -2:-1]], axis=-1)


def step(state: SimState) -> SimState:
    """Advance one explicit Euler step in place."""
    g, p, dt = state.grid, state.params, state.dt
    _check_dt(g, p, dt)
    u, v = state.u, state.v
    d = p.d

    rows = v.shape[0] if g.y_top == "neumann" else v.shape[0] - 1
    ghost_low = v[1] + (2 * g.dy / d) * (p.mu * u - p.nu * v[0])
    if g.y_top == "neumann":
        ghost_high = v[-2]
        vy = np.concatenate([ghost_low[None], v, ghost_high[None]], axis=0)
    else:
        vy = np.concatenate([ghost_low[None], v], axis=0)
    vx = _pad_x(v[:rows], g.x_boundary)
    vc = v[:rows]
    lap = ((vx[:, 2:] + vx[:, :-2]) - 2 * vc) / g.dx**2 \
        + ((vy[2:rows + 2] + vy[:rows]) - 2 * vc) / g.dy**2
    rhs = d * lap + p.f(vc)
    if state.source is not None:
        rhs = rhs + state.source[:rows]

    du = p.nu * v[0] - p.mu * u
    if p.D > 0:
        du = du + p.D * apply_J(p.kernel, u, g.dx, g.x_boundary)
    if p.q != 0:
        up = _pad_x(u, g.x_boundary) if g.x_boundary == "periodic" else np.concatenate([u[:1], u, u[-1:]])
        if p.q > 0:
            grad = (u - up[:-2]) / g.dx
        else:
            grad = (up[2:] - u) / g.dx
        du = du - p.q * grad

    v_new = v.copy()
    v_new[:rows] = vc + dt * rhs
    u_new = u + dt * du
    if not (np.isfinite(v_new).all() and np.isfinite(u_new).all()):
        raise NonFinite(f"non-finite value at t={state.t + dt:.6g}")
    state.v = v_new
    state.u = u_new
    state.steps += 1
    state.t = state.steps * dt
    return state


@dataclass
class Snapshot:
    t: float
    u: np.ndarray
    traces: dict[float, np.ndarray]
    v_max: float
    mass_u: float
    mass_v: float


@dataclass
class Trajectory:
    x: np.ndarray
    probe_y: tuple[float, ...]
    snapshots: list[Snapshot] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def trace(self, probe_y: float) -> np.ndarray:
        """Stacked v(., probe_y) over snapshots (rows = times)."""
        return np.array([s.traces[probe_y] for s in self.snapshots])

    def line(self) -> np.ndarray:
        return np.array([s.u for s in self.snapshots])


def snapshot(state: SimState, probe_y) -> Snapshot:
    g = state.grid
    traces = {y: state.v[state.row(y)].copy() for y in probe_y}
    return Snapshot(state.t, state.u.copy(), traces, float(state.v.max()),
                    float(state.u.sum() * g.dx), float(state.v.sum() * g.dx * g.dy))


def run(state: SimState, t_end: float, snapshot_every: float, probe_y=(0.0,),
        callback=None) -> Trajectory:
    """Step until t_end, recording snapshots every ``snapshot_every`` time units.

    The initial state is always the first snapshot.
    """
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    probe_y = tuple(float(y) for y in probe_y)
    traj = Trajectory(state.grid.x.copy(), probe_y)
    traj.snapshots.append(snapshot(state, probe_y))
    n_steps = int(round(t_end / state.dt))
    every = max(1, int(round(snapshot_every / state.dt)))
    for n in range(1, n_steps + 1):
        step(state)
        if n % every == 0 or n == n_steps:
            traj.snapshots.append(snapshot(state, probe_y))
            if callback is not None:
                callback(state)
    return traj


@dataclass
class SteadyState:
    u: np.ndarray
    v: np.ndarray
    t: float
    converged: bool
    exit: str
    changes: np.ndarray  # sup-norm change per step, sampled every ``record_every`` steps
    state: SimState


def steady_state(state: SimState, tol: float = 1e-8, t_max: float = 1e3, strict: bool = True,
                 record_every: int = 10) -> SteadyState:
    """Step until the per-step sup change is at most tol * dt, or t_max is reached.

    With ``strict`` a run that hits t_max raises NotConverged carrying the state.
    """
    changes = []
    n_max = int(round(t_max / state.dt))
    exit_reason = "t_max"
    for n in range(n_max):
        u_old, v_old = state.u, state.v
        step(state)
        change = max(np.abs(state.u - u_old).max(), np.abs(state.v - v_old).max())
        if n % record_every == 0:
            changes.append(change)
        if change <= tol * state.dt:
            changes.append(change)
            exit_reason = "tol"
            break
    result = SteadyState(state.u.copy(), state.v.copy(), state.t, exit_reason == "tol", exit_reason,
                         np.array(changes), state)
    if strict and not result.converged:
        raise NotConverged(f"steady state not reached by t={state.t:.6g}", state)
    return result


def default_extent(params: ModelParams, t_end: float) -> tuple[float, float]:
    """Default strip size: X = max(300 L, 40 c_K t_end), Y = 12 sqrt(d / |f'(0)|).

    For R0 < 1 the height is stretched by sqrt(1 / (1 - R0)) since vertical
    tails thicken as R0 approaches 1.
    """

    fp = abs(params.fprime0)
    X = max(300.0 * params.L, 40.0 * c_field(params) * t_end) if params.fprime0 > 0 else 300.0 * params.L
    Y = 12.0 * math.sqrt(params.d / fp)
    f = params.f
    R0 = getattr(f, "R0", None)
    if R0 is not None and R0 < 1:
        Y *= math.sqrt(1.0 / (1.0 - R0))
    return X, Y
