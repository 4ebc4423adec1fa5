"""Cylinder payoffs phi(B_t1, B_t2 - B_t1, ..., B_tn - B_tn-1) by backward reduction.

The last increment is integrated out first: for every node of the prefix grid
(x1, ..., x_{k-1}) a G-heat solve over t_k - t_{k-1} runs along the x_k axis,
starting from the already reduced function, and the value at x_k = 0 becomes
the new terminal data one level down.  Every axis is odd-sized and centred at
0, so "the value at increment 0" is always a grid node and no interpolation
between prefix nodes is ever needed.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError
from .gheat import DEFAULT_CFL, as_interval, centred_axis, cfl_steps, gheat_steps
from .payoff import BinOp, Payoff, Var, as_payoff, substitute

MAX_INCREMENTS = 3
# default nodes per axis by number of axes; keeps (nx)^n * nt at desk scale
AUTO_NX = {1: 2001, 2: 401, 3: 101, 4: 41}


@dataclass(frozen=True)
class CylinderPayoff:
    times: tuple
    payoff: Payoff

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if not times:
            raise InputError("need at least one payoff time")
        if times[0] <= 0 or any(b <= a for a, b in zip(times, times[1:])):
            raise InputError(f"times must be positive and strictly increasing, got {times}")
        p = as_payoff(self.payoff, len(times))
        if p is None:
            raise InputError("payoff must be an expression string or a Payoff")
        if p.arity != len(times):
            raise InputError(f"payoff arity {p.arity} does not match {len(times)} times")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "payoff", p)

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def durations(self) -> tuple:
        return tuple(b - a for a, b in zip((0.0,) + self.times, self.times))

    def __call__(self, *xs):
        return self.payoff(*xs)


@dataclass(frozen=True)
class Resolution:
    """Grid controls: shared ``nx`` with an optional per-axis override.

    ``nx=None`` picks a size from the number of axes (see ``AUTO_NX``).
    """

    nx: int | None = None
    cfl: float = DEFAULT_CFL
    nx_per_axis: tuple | None = None
    workers: int = 1

    def axis_nx(self, k: int, n_axes: int = 1) -> int:
        if self.nx_per_axis:
            nx = self.nx_per_axis[k]
        else:
            nx = self.nx if self.nx is not None else AUTO_NX[n_axes]
        if nx < 3:
            raise ConfigurationError("need at least 3 nodes per axis")
        return nx

    def to_dict(self) -> dict:
        return {"nx": self.nx, "cfl": self.cfl, "nx_per_axis": list(self.nx_per_axis) if self.nx_per_axis else None,
                "workers": self.workers}


@dataclass
class CylinderResult:
    value: float
    axes: list
    steps: list
    h: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def tolerance_scale(self) -> float:
        """max(h, dt) over every axis; multiply by a Lipschitz constant for a tolerance."""
        return max(max(self.h), max(self.dt))

    def manifest(self) -> dict:
        return {"value": self.value, "nx": [a.size for a in self.axes], "h": self.h, "dt": self.dt,
                "nt": self.steps, "half_widths": [float(a[-1]) for a in self.axes], "seconds": self.seconds}


def _axes(cp: CylinderPayoff, sigma_max: float, res: Resolution) -> list:
    hint = cp.payoff.support_hint()
    return [centred_axis(0.0, t, sigma_max, hint, res.axis_nx(k, cp.n)) for k, t in enumerate(cp.times)]


def _solve_rows(u: np.ndarray, theta, h: float, dt: float, nt: int, workers: int) -> np.ndarray:
    """Run the G-heat steps on every row of ``u`` (last axis is space).

    Rows are independent and the update is elementwise, so splitting them over
    threads gives bitwise the same numbers as one batched call.
    """
    flat = u.reshape(-1, u.shape[-1])
    rows = flat.shape[0]

    def run(block):
        out = block
        for _, out in gheat_steps(block, theta, h, dt, nt):
            pass
        return np.array(out)

    if workers <= 1 or rows < 2 * workers:
        return run(flat).reshape(u.shape)
    chunks = np.array_split(np.arange(rows), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda idx: run(flat[idx]), chunks))
    return np.concatenate(parts).reshape(u.shape)


def reduce_cylinder(cp: CylinderPayoff, theta, resolution: Resolution | None = None) -> CylinderResult:
    theta = as_interval(theta)
    res = resolution or Resolution()
    if cp.n > MAX_INCREMENTS:
        raise ConfigurationError(f"at most {MAX_INCREMENTS} increments are supported, got {cp.n}")
    return _reduce(cp, theta, res)


def _reduce(cp: CylinderPayoff, theta, res: Resolution) -> CylinderResult:
    start = time.perf_counter()
    axes = _axes(cp, theta.sigma_max, res)
    mesh = np.meshgrid(*axes, indexing="ij")
    u = np.asarray(cp.payoff(*mesh), dtype=float) * np.ones(mesh[0].shape)
    hs, dts, nts = [0.0] * cp.n, [0.0] * cp.n, [0] * cp.n
    for k in range(cp.n - 1, -1, -1):
        axis = axes[k]
        h = (axis[-1] - axis[0]) / (axis.size - 1)
        tau = cp.durations[k]
        nt = cfl_steps(tau, h, theta.sigma_max, res.cfl)
        dt = tau / nt
        u = _solve_rows(u, theta, h, dt, nt, res.workers)
        u = u[..., axis.size // 2]
        hs[k], dts[k], nts[k] = float(h), float(dt), nt
    value = float(u)
    return CylinderResult(value, axes, nts, hs, dts, time.perf_counter() - start)


def evaluate_cylinder(cp: CylinderPayoff, theta, resolution: Resolution | None = None) -> float:
    return reduce_cylinder(cp, theta, resolution).value


def split_payoff(cp: CylinderPayoff, split_point: float) -> CylinderPayoff:
    """Insert a time that the payoff ignores: the old increment becomes a sum of two."""
    times = cp.times
    if split_point <= 0 or split_point in times or split_point >= times[-1]:
        raise InputError(f"split point {split_point} must lie strictly between 0 and the last time, off the grid")
    k = next(i for i, t in enumerate(times) if t > split_point)  # 0-based increment being split
    n = cp.n
    mapping = {j: Var(j + 1) for j in range(k + 2, n + 1)}
    mapping[k + 1] = BinOp("+", Var(k + 1), Var(k + 2))
    expr = substitute(cp.payoff.expr, mapping)
    new_times = times[:k] + (split_point,) + times[k:]
    return CylinderPayoff(new_times, Payoff(expr, n + 1))


@dataclass
class DPPCheck:
    direct: float
    split: float
    tolerance: float
    passed: bool

    def as_tuple(self) -> tuple:
        return (self.direct, self.split)


def dpp_consistency_check(cp: CylinderPayoff, theta, split_point: float,
                          resolution: Resolution | None = None) -> DPPCheck:
    """Direct value against the value with an extra, ignored intermediate time.

    The split run may use one more axis than the direct run, so it is allowed
    to reach ``MAX_INCREMENTS + 1`` axes.
    """
    theta = as_interval(theta)
    res = resolution or Resolution()
    if cp.n > MAX_INCREMENTS:
        raise ConfigurationError(f"at most {MAX_INCREMENTS} increments are supported, got {cp.n}")
    split_cp = split_payoff(cp, split_point)
    if res.nx_per_axis:
        k = next(i for i, t in enumerate(cp.times) if t > split_point)
        per = tuple(res.nx_per_axis)
        res_split = Resolution(res.nx, res.cfl, per[:k] + (per[k],) + per[k:], res.workers)
    else:
        res_split = res
    direct = _reduce(cp, theta, res)
    split = _reduce(split_cp, theta, res_split)
    scale = max(direct.tolerance_scale, split.tolerance_scale)
    tol = 3.0 * scale * cp.payoff.lipschitz()
    gap = abs(direct.value - split.value)
    return DPPCheck(direct.value, split.value, tol, bool(gap <= tol or math.isclose(gap, 0.0, abs_tol=1e-12)))
