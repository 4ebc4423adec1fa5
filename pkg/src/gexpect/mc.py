"""Volatility-controlled paths B_t = int_0^t theta_s dW_s and their payoff values.

Euler steps dB = sigma(t, B_t) sqrt(dt) xi with xi from :mod:`gexpect.rng`.
Path ``i`` draws from stream ``i`` (or ``i // 2`` with the sign flipped on odd
``i`` when antithetic), so any chunking or worker count gives the same bits.
Per-path results are assembled in path order before any reduction.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cylinder import CylinderPayoff, Resolution, evaluate_cylinder
from .errors import ConfigurationError, InputError
from .gheat import DEFAULT_CFL, Grid1D, as_interval, centred_axis, solve_gheat
from .rng import normal_block

CHUNK = 8192


class Policy:
    label = "policy"

    def sigma(self, t: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sigmas(self) -> list:
        """Every volatility value the policy can take."""
        raise NotImplementedError

    def validate(self, theta) -> None:
        theta = as_interval(theta)
        bad = [s for s in self.sigmas() if not theta.contains(s)]
        if bad:
            raise ConfigurationError(f"{self.label}: volatilities {bad} outside [{theta.sigma_min}, {theta.sigma_max}]")


@dataclass
class Constant(Policy):
    value: float

    @property
    def label(self):
        return f"const:{self.value:g}"

    def sigma(self, t, x):
        return np.full(x.shape, float(self.value))

    def sigmas(self):
        return [float(self.value)]


@dataclass
class PiecewiseConstant(Policy):
    """``sigmas[j]`` on [breakpoints[j-1], breakpoints[j]); one more sigma than breakpoints."""

    breakpoints: Sequence[float]
    values: Sequence[float]

    def __post_init__(self):
        self.breakpoints = [float(b) for b in self.breakpoints]
        self.values = [float(s) for s in self.values]
        if len(self.values) != len(self.breakpoints) + 1:
            raise ConfigurationError("need exactly one more sigma than breakpoints")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise ConfigurationError("breakpoints must increase")

    @property
    def label(self):
        return "piecewise:" + "/".join(f"{s:g}" for s in self.values)

    def sigma(self, t, x):
        j = int(np.searchsorted(self.breakpoints, t, side="right"))
        return np.full(x.shape, self.values[j])

    def sigmas(self):
        return list(self.values)


@dataclass
class StateSwitch(Policy):
    """``inside`` while |B_t| < threshold, ``outside`` otherwise (a feedback control)."""

    threshold: float
    inside: float
    outside: float

    @property
    def label(self):
        return f"switch:{self.threshold:g}:{self.inside:g}/{self.outside:g}"

    def sigma(self, t, x):
        return np.where(np.abs(x) < self.threshold, self.inside, self.outside)

    def sigmas(self):
        return [float(self.inside), float(self.outside)]


@dataclass
class BangBangFromSolution(Policy):
    """sigma_max where the stored solution is locally convex, sigma_min elsewhere.

    ``snapshots[j]`` is u(taus[j], x_grid); at simulation time t the slice with
    remaining time T - t closest to it is used.
    """

    x_grid: np.ndarray
    taus: np.ndarray
    snapshots: np.ndarray
    sigma_min: float
    sigma_max: float
    horizon: float
    label: str = "bangbang"
    _d2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.snapshots is None or len(self.taus) == 0:
            raise ConfigurationError("bang-bang policy needs stored snapshots")
        taus = np.asarray(self.taus, dtype=float)
        step = np.max(np.diff(taus)) if taus.size > 1 else self.horizon
        if taus[0] > step + 1e-12 or taus[-1] < self.horizon - step - 1e-12:
            raise ConfigurationError(f"snapshots cover [{taus[0]}, {taus[-1]}], need [0, {self.horizon}]")
        u = np.asarray(self.snapshots, dtype=float)
        d2 = np.zeros_like(u)
        d2[:, 1:-1] = u[:, 2:] - 2.0 * u[:, 1:-1] + u[:, :-2]
        self.taus = taus
        self._d2 = d2

    def sigma(self, t, x):
        tau = self.horizon - t
        j = int(np.argmin(np.abs(self.taus - tau)))
        convex = np.interp(x, self.x_grid, self._d2[j]) >= 0.0
        return np.where(convex, self.sigma_max, self.sigma_min)

    def sigmas(self):
        return [self.sigma_min, self.sigma_max]


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    dt_sim: float
    seed: int = 0
    antithetic: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ConfigurationError("need at least one path")
        if not self.dt_sim > 0:
            raise ConfigurationError("dt_sim must be positive")
        if self.antithetic and self.n_paths % 2:
            raise ConfigurationError("antithetic sampling needs an even number of paths")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    def check_times(self, times: Sequence[float]) -> None:
        durations = np.diff(np.concatenate([[0.0], times]))
        if self.dt_sim > durations.min() / 10 * (1 + 1e-9):
            raise ConfigurationError(
                f"dt_sim={self.dt_sim} exceeds a tenth of the shortest increment {durations.min()}"
            )

    def to_dict(self) -> dict:
        return {"n_paths": self.n_paths, "dt_sim": self.dt_sim, "seed": self.seed,
                "antithetic": self.antithetic, "workers": self.workers}


def time_grid(times: Sequence[float], dt_sim: float) -> tuple[np.ndarray, list]:
    """Simulation grid hitting every payoff time; returns (grid, indices of the payoff times)."""
    grid = [0.0]
    marks = []
    prev = 0.0
    for t in times:
        m = max(1, math.ceil((t - prev) / dt_sim - 1e-9))
        grid.extend(prev + (t - prev) * np.arange(1, m + 1) / m)
        grid[-1] = t
        marks.append(len(grid) - 1)
        prev = t
    return np.asarray(grid), marks


def _streams(paths: np.ndarray, antithetic: bool) -> tuple[np.ndarray, np.ndarray]:
    if antithetic:
        return paths // 2, np.where(paths % 2 == 1, -1.0, 1.0)
    return paths, np.ones(paths.size)


def _run_chunk(policy: Policy, grid: np.ndarray, keep: list, paths: np.ndarray, cfg: SimConfig) -> np.ndarray:
    streams, signs = _streams(paths, cfg.antithetic)
    n_steps = grid.size - 1
    z = normal_block(cfg.seed, streams.astype(np.uint64), n_steps) * signs[:, None]
    x = np.zeros(paths.size)
    out = np.empty((paths.size, len(keep)))
    where = {k: j for j, k in enumerate(keep)}
    if 0 in where:
        out[:, where[0]] = x
    for k in range(n_steps):
        dt = grid[k + 1] - grid[k]
        x = x + policy.sigma(grid[k], x) * math.sqrt(dt) * z[:, k]
        if k + 1 in where:
            out[:, where[k + 1]] = x
    return out


def _simulate(policy: Policy, grid: np.ndarray, keep: list, cfg: SimConfig) -> np.ndarray:
    chunks = [np.arange(a, min(a + CHUNK, cfg.n_paths)) for a in range(0, cfg.n_paths, CHUNK)]
    if cfg.workers == 1 or len(chunks) == 1:
        parts = [_run_chunk(policy, grid, keep, c, cfg) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(lambda c: _run_chunk(policy, grid, keep, c, cfg), chunks))
    return np.concatenate(parts)


def simulate_paths(policy: Policy, times: Sequence[float], cfg: SimConfig, theta=None) -> np.ndarray:
    """Increments B_t1, B_t2 - B_t1, ... per path, shape (n_paths, len(times))."""
    times = [float(t) for t in times]
    if not times or times[0] <= 0 or any(b <= a for a, b in zip(times, times[1:])):
        raise InputError("times must be positive and strictly increasing")
    cfg.check_times(times)
    if theta is not None:
        policy.validate(theta)
    grid, marks = time_grid(times, cfg.dt_sim)
    levels = _simulate(policy, grid, marks, cfg)
    return np.diff(np.concatenate([np.zeros((cfg.n_paths, 1)), levels], axis=1), axis=1)


def sample_paths(policy: Policy, cfg: SimConfig, level: int, horizon: float = 1.0, theta=None) -> np.ndarray:
    """Whole paths on the dyadic grid of 2^level steps over [0, horizon]; dt_sim is ignored."""
    if level < 1:
        raise InputError("level must be >= 1")
    if theta is not None:
        policy.validate(theta)
    grid = horizon * np.arange(2**level + 1) / 2**level
    return _simulate(policy, grid, list(range(grid.size)), cfg)


@dataclass
class MCEstimate:
    mean: float
    std_error: float
    n_paths: int
    label: str = ""


def estimate(values: np.ndarray, antithetic: bool, label: str = "") -> MCEstimate:
    """Mean and standard error; antithetic pairs are averaged first."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if n and np.all(v == v[0]):
        return MCEstimate(float(v[0]), 0.0, n, label)
    samples = v.reshape(-1, 2).mean(axis=1) if antithetic else v
    mean = float(np.sum(samples) / samples.size)
    se = float(np.std(samples, ddof=1) / math.sqrt(samples.size)) if samples.size > 1 else math.inf
    return MCEstimate(mean, se, n, label)


def payoff_samples(policy: Policy, cp: CylinderPayoff, cfg: SimConfig, theta=None) -> np.ndarray:
    inc = simulate_paths(policy, cp.times, cfg, theta)
    return np.asarray(cp.payoff(*inc.T), dtype=float) * np.ones(cfg.n_paths)


def policy_value(policy: Policy, cp: CylinderPayoff, cfg: SimConfig, theta=None) -> MCEstimate:
    return estimate(payoff_samples(policy, cp, cfg, theta), cfg.antithetic, policy.label)


def lower_bound_expectation(policies: Sequence[Policy], cp: CylinderPayoff, cfg: SimConfig,
                            theta=None) -> tuple[MCEstimate, list]:
    """Best policy value; a lower bound on the sublinear expectation up to MC error."""
    if not policies:
        raise InputError("need at least one policy")
    table = [policy_value(p, cp, cfg, theta) for p in policies]
    best = table[0]
    for e in table[1:]:
        if e.mean > best.mean:
            best = e
    return best, table


@dataclass
class BangBangResult:
    mc: MCEstimate
    pde: float
    gap: float
    tolerance: float
    passed: bool

    def as_tuple(self) -> tuple:
        return (self.mc, self.pde, self.gap)


def bang_bang_policy(cp: CylinderPayoff, theta, dt_sim: float, *, nx: int = 2001,
                     cfl: float = DEFAULT_CFL) -> tuple[BangBangFromSolution, float]:
    """Solve the G-heat equation once, keeping a slice for every simulation step."""
    theta = as_interval(theta)
    if cp.n != 1:
        raise InputError("the bang-bang reference solution needs a single payoff time")
    horizon = cp.times[0]
    axis = centred_axis(0.0, horizon, theta.sigma_max, cp.payoff.support_hint(), nx)
    grid = Grid1D.with_cfl(axis[0], axis[-1], axis.size, horizon, theta.sigma_max, cfl)
    sim_grid, _ = time_grid([horizon], dt_sim)
    taus = horizon - sim_grid
    sol = solve_gheat(cp.payoff, theta, grid, cfl=cfl, snapshot_times=np.clip(taus, 0.0, horizon))
    policy = BangBangFromSolution(grid.x, sol.snapshot_times, sol.snapshots, theta.sigma_min, theta.sigma_max,
                                  horizon)
    return policy, float(sol.values[axis.size // 2])


def bang_bang_value(cp: CylinderPayoff, theta, cfg: SimConfig, *, nx: int = 2001,
                    scheme_tolerance: float = 5e-2) -> BangBangResult:
    theta = as_interval(theta)
    policy, pde = bang_bang_policy(cp, theta, cfg.dt_sim, nx=nx)
    mc = policy_value(policy, cp, cfg, theta)
    gap = mc.mean - pde
    tol = 3.0 * mc.std_error + scheme_tolerance
    return BangBangResult(mc, pde, gap, tol, bool(abs(gap) <= tol))


def pde_value(cp: CylinderPayoff, theta, resolution: Resolution | None = None) -> float:
    return evaluate_cylinder(cp, theta, resolution)


@dataclass
class MomentCheck:
    estimate: float
    bound: float
    holds: bool
    std_error: float = 0.0

    def as_tuple(self) -> tuple:
        return (self.estimate, self.bound, self.holds)


def moment_bound_check(policy: Policy, s: float, t: float, cfg: SimConfig, theta) -> MomentCheck:
    """E[|B_t - B_s|^4] against 3 sigma_max^4 (t - s)^2.

    ``dt_sim`` is shrunk if needed so both [0, s] and [s, t] get ten steps.
    """
    theta = as_interval(theta)
    if not 0 <= s <= t:
        raise InputError("need 0 <= s <= t")
    if t == s:
        return MomentCheck(0.0, 0.0, True)
    times = [s, t] if s > 0 else [t]
    shortest = min(np.diff(np.concatenate([[0.0], times])))
    run = cfg if cfg.dt_sim <= shortest / 10 else SimConfig(cfg.n_paths, shortest / 10, cfg.seed,
                                                             cfg.antithetic, cfg.workers)
    inc = simulate_paths(policy, times, run, theta)[:, -1]
    est = estimate(inc**4, run.antithetic, policy.label)
    bound = 3.0 * theta.sigma_max**4 * (t - s) ** 2
    rel = est.std_error / est.mean if est.mean > 0 else 0.0
    return MomentCheck(est.mean, bound, bool(est.mean <= bound * (1 + 4 * rel)), est.std_error)


def variance_check(policy: Policy, t: float, cfg: SimConfig, theta) -> tuple[float, float, bool]:
    """Sample variance of B_t with its standard error, inside [s_min^2 t, s_max^2 t] +- 4 SE."""
    theta = as_interval(theta)
    b = simulate_paths(policy, [t], cfg, theta)[:, 0]
    var = float(np.var(b, ddof=1))
    m4 = float(np.mean((b - b.mean()) ** 4))
    se = math.sqrt(max(m4 - var**2, 0.0) / b.size)
    ok = theta.sigma_min**2 * t - 4 * se <= var <= theta.sigma_max**2 * t + 4 * se
    return var, se, bool(ok)
