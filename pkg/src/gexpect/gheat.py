"""Explicit monotone finite differences for the 1-D G-heat equation.

    du/dt = G(u_xx),  u(0, x) = phi(x),  G(a) = 1/2 (s_max^2 a^+ - s_min^2 a^-)

One step is u <- u + dt * G(D2 u) with the central second difference D2.
Under dt <= h^2 / s_max^2 each new value is a nondecreasing function of the
three old ones, which gives the discrete comparison principle.  The second
difference is taken as zero at both boundary nodes, so the boundary values
never move (linear extrapolation); domains are sized so this is harmless.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import ConfigurationError, InputError, NumericalFailure
from .gfunction import Interval1D, MatrixList, degeneracy_report
from .payoff import Payoff, as_payoff

logger = logging.getLogger(__name__)

DEFAULT_CFL = 0.9
WIDTH_SIGMAS = 8.0


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    nx: int
    t_end: float
    nt: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ConfigurationError("need x_min < x_max")
        if self.nx < 3:
            raise ConfigurationError("need at least 3 space nodes")
        if self.t_end <= 0:
            raise ConfigurationError("t_end must be positive")
        if self.nt < 1:
            raise ConfigurationError("need at least one time step")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dt(self) -> float:
        return self.t_end / self.nt

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @classmethod
    def with_cfl(cls, x_min, x_max, nx, t_end, sigma_max, cfl=DEFAULT_CFL) -> "Grid1D":
        """Smallest nt satisfying dt <= cfl * h^2 / sigma_max^2."""
        h = (x_max - x_min) / (nx - 1)
        return cls(x_min, x_max, nx, t_end, cfl_steps(t_end, h, sigma_max, cfl))

    def check_cfl(self, sigma_max: float, cfl: float = DEFAULT_CFL) -> None:
        if not 0 < cfl <= 1:
            raise ConfigurationError(f"cfl factor must lie in (0, 1], got {cfl}")
        limit = cfl * self.h**2 / sigma_max**2
        if self.dt > limit * (1 + 1e-12):
            raise ConfigurationError(f"CFL violated: dt={self.dt:.3e} > {limit:.3e} (cfl={cfl})")

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "nx": self.nx, "t_end": self.t_end, "nt": self.nt}


def cfl_steps(t: float, h: float, sigma_max: float, cfl: float = DEFAULT_CFL) -> int:
    if not 0 < cfl <= 1:
        raise ConfigurationError(f"cfl factor must lie in (0, 1], got {cfl}")
    return max(1, math.ceil(t * sigma_max**2 / (cfl * h * h) - 1e-9))


@dataclass
class GridSolution:
    grid: Grid1D
    values: np.ndarray
    snapshot_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    snapshots: np.ndarray | None = None
    warnings: list = field(default_factory=list)

    def at(self, x) -> np.ndarray | float:
        out = np.interp(x, self.grid.x, self.values)
        return float(out) if np.ndim(out) == 0 else out


def as_interval(theta) -> Interval1D:
    if isinstance(theta, Interval1D):
        return theta
    if isinstance(theta, MatrixList) and theta.dim == 1:
        s = np.abs(theta.matrices[:, 0, 0])
        return Interval1D(float(s.min()), float(s.max()))
    raise InputError("the PDE solver needs a 1-D volatility interval")


def initial_values(phi, x: np.ndarray) -> np.ndarray:
    if isinstance(phi, np.ndarray):
        if phi.shape[-1] != x.size:
            raise InputError("initial data length does not match the grid")
        return np.array(phi, dtype=float)
    p = as_payoff(phi)
    fn = p if p is not None else phi
    if not callable(fn):
        raise InputError("phi must be a payoff expression, a callable or an array")
    return np.asarray(fn(x), dtype=float) * np.ones_like(x)


def gheat_steps(u0: np.ndarray, theta: Interval1D, h: float, dt: float, nt: int) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(step, u)`` after every explicit step; the last axis is space.

    ``u`` is updated in place between yields.  Pure elementwise work per step,
    so results do not depend on how the node update is vectorised.
    """
    u = np.array(u0, dtype=float)
    up = 0.5 * dt / (h * h) * theta.sigma_max**2
    dn = 0.5 * dt / (h * h) * theta.sigma_min**2
    for m in range(1, nt + 1):
        d2 = u[..., 2:] - 2.0 * u[..., 1:-1] + u[..., :-2]
        u[..., 1:-1] += up * np.maximum(d2, 0.0) - dn * np.maximum(-d2, 0.0)
        if not np.isfinite(u).all():
            raise NumericalFailure(f"non-finite value after step {m}", step=m)
        yield m, u


def solve_gheat(phi, theta, grid: Grid1D, *, cfl: float = DEFAULT_CFL,
                snapshot_times: Sequence[float] | None = None,
                callback: Callable[[int, np.ndarray], None] | None = None) -> GridSolution:
    """u(t_end, .) on ``grid``; optionally keep slices near ``snapshot_times``."""
    theta = as_interval(theta)
    grid.check_cfl(theta.sigma_max, cfl)
    notes = []
    nondeg, _ = degeneracy_report(theta)
    if not nondeg:
        notes.append("degenerate G (sigma_min = 0): no smoothing in the sigma_min regime")
        logger.warning(notes[-1])
    x = grid.x
    u = initial_values(phi, x)
    if snapshot_times is not None:
        wanted = set()
        for t in snapshot_times:
            if not -1e-12 <= t <= grid.t_end + 1e-12:
                raise InputError(f"snapshot time {t} outside [0, {grid.t_end}]")
            wanted.add(int(round(t / grid.dt)))
        steps = sorted(wanted)
        snap_times = np.array([s * grid.dt for s in steps])
        snaps = np.empty((len(steps), grid.nx))
        pos = {s: i for i, s in enumerate(steps)}
        if 0 in pos:
            snaps[pos[0]] = u
    else:
        snap_times, snaps, pos = np.empty(0), None, {}
    if callback is not None:
        callback(0, u)
    for m, cur in gheat_steps(u, theta, grid.h, grid.dt, grid.nt):
        if m in pos:
            snaps[pos[m]] = cur
        if callback is not None:
            callback(m, cur)
        u = cur
    return GridSolution(grid, np.array(u), snap_times, snaps, notes)


def payoff_hint(phi) -> float:
    p = as_payoff(phi)
    return p.support_hint() if p is not None else 0.0


def centred_axis(center: float, t: float, sigma_max: float, hint: float, nx: int,
                 width: float | None = None) -> np.ndarray:
    """Odd-sized symmetric axis around ``center`` of half-width 8 s_max sqrt(t) + hint."""
    if nx % 2 == 0:
        nx += 1
    w = width if width is not None else WIDTH_SIGMAS * sigma_max * math.sqrt(t) + hint
    if w <= 0:
        w = 1.0
    return np.linspace(center - w, center + w, nx)


def g_normal_expectation(phi, theta, t: float, x: float = 0.0, *, nx: int = 2001, cfl: float = DEFAULT_CFL,
                         width: float | None = None) -> float:
    """E[phi(x + sqrt(t) B_1)] for G-normal B_1, read off the PDE solution at x."""
    theta = as_interval(theta)
    if t < 0:
        raise InputError("t must be nonnegative")
    axis = centred_axis(x, t, theta.sigma_max, payoff_hint(phi), nx, width)
    if t == 0:
        return float(initial_values(phi, np.array([x]))[0])
    grid = Grid1D.with_cfl(axis[0], axis[-1], axis.size, t, theta.sigma_max, cfl)
    sol = solve_gheat(phi, theta, grid, cfl=cfl)
    return float(sol.values[axis.size // 2])


@dataclass
class MeanCertainty:
    mean_upper: float       # E[clamp(B_t)]
    mean_of_negative: float  # E[-clamp(B_t)]
    variance_upper: float   # E[min(B_t^2, K^2)]
    variance_lower: float   # -E[-min(B_t^2, K^2)]
    cap: float

    def as_tuple(self) -> tuple:
        return (self.mean_upper, self.mean_of_negative, self.variance_upper, self.variance_lower)


def mean_certainty_checks(theta, t: float, *, K: float | None = None, nx: int = 2001) -> MeanCertainty:
    """Zero mean from both sides and the variance envelope [s_min^2 t, s_max^2 t]."""
    theta = as_interval(theta)
    if t == 0:
        return MeanCertainty(0.0, 0.0, 0.0, 0.0, 0.0)
    K = K if K is not None else WIDTH_SIGMAS * theta.sigma_max * math.sqrt(t)
    K = float(K)
    clamp = Payoff.parse(f"clamp(x1, {-K!r}, {K!r})")
    nclamp = Payoff.parse(f"-clamp(x1, {-K!r}, {K!r})")
    sq = Payoff.parse(f"sqcap(x1, {K!r})")
    nsq = Payoff.parse(f"-sqcap(x1, {K!r})")
    vals = [g_normal_expectation(p, theta, t, 0.0, nx=nx) for p in (clamp, nclamp, sq, nsq)]
    return MeanCertainty(vals[0], vals[1], vals[2], -vals[3], K)


@dataclass
class ConvergenceTable:
    rows: list
    differences: list
    ratios: list
    passed: bool


def convergence_study(phi, theta, base_grid: Grid1D, refinements: int, *, probes: Sequence[float] = (0.0,),
                      cfl: float = DEFAULT_CFL) -> ConvergenceTable:
    """Halve h ``refinements`` times; successive probe differences must shrink after the first."""
    theta = as_interval(theta)
    rows = []
    nx = base_grid.nx
    for level in range(refinements + 1):
        h = (base_grid.x_max - base_grid.x_min) / (nx - 1)
        nt = max(cfl_steps(base_grid.t_end, h, theta.sigma_max, cfl), base_grid.nt if level == 0 else 1)
        grid = Grid1D(base_grid.x_min, base_grid.x_max, nx, base_grid.t_end, nt)
        sol = solve_gheat(phi, theta, grid, cfl=cfl)
        rows.append({"nx": nx, "h": grid.h, "dt": grid.dt, "values": [sol.at(p) for p in probes]})
        nx = 2 * (nx - 1) + 1
    diffs = [max(abs(a - b) for a, b in zip(r1["values"], r0["values"])) for r0, r1 in zip(rows, rows[1:])]
    ratios = [(d0 / d1 if d1 > 0 else math.inf) for d0, d1 in zip(diffs, diffs[1:])]
    passed = all(d1 <= d0 or d1 <= 1e-14 for d0, d1 in zip(diffs, diffs[1:]))
    return ConvergenceTable(rows, diffs, ratios, passed)
