"""Dyadic Hoelder statistics for sampled paths on [0, 1].

    M(alpha) = max_{s != t dyadic} |X_t - X_s| / |t - s|^alpha

At level L the pairs are grouped by lag: with maxinc[d] the largest increment
over lag d, M(alpha) = max_d maxinc[d] / (d 2^-L)^alpha, exact and shared by
every alpha.  Above ``EXACT_LEVEL`` the chaining bound over adjacent dyadic
increments is reported instead, with the mode recorded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError

EXACT_LEVEL = 12
GROWTH_LIMIT = 0.10


@dataclass(frozen=True, eq=False)
class SampledPath:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise InputError("a sampled path is one-dimensional")
        level = _level(v.size)
        if level < 2:
            raise InputError("need dyadic level >= 2 (at least 5 points)")
        if not np.all(np.isfinite(v)):
            raise InputError("path values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def level(self) -> int:
        return _level(self.values.size)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) / (self.values.size - 1)

    def coarsen(self, level: int) -> "SampledPath":
        if not 2 <= level <= self.level:
            raise InputError(f"cannot coarsen level {self.level} to {level}")
        return SampledPath(self.values[:: 2 ** (self.level - level)])

    @classmethod
    def from_function(cls, fn, level: int) -> "SampledPath":
        t = np.arange(2**level + 1) / 2**level
        return cls(np.asarray(fn(t), dtype=float) * np.ones_like(t))


def _level(n_points: int) -> int:
    n = n_points - 1
    if n < 1 or n & (n - 1):
        raise InputError(f"path needs 2^L + 1 points, got {n_points}")
    return n.bit_length() - 1


def _as_matrix(paths) -> np.ndarray:
    if isinstance(paths, SampledPath):
        return paths.values[None, :]
    if isinstance(paths, np.ndarray) and paths.ndim in (1, 2):
        m = np.atleast_2d(np.asarray(paths, dtype=float))
    else:
        rows = [p.values if isinstance(p, SampledPath) else np.asarray(p, dtype=float) for p in paths]
        if not rows:
            raise InputError("need at least one path")
        if len({r.size for r in rows}) != 1:
            raise InputError("paths must share one level")
        m = np.vstack(rows)
    _level(m.shape[1])
    return m


def lag_maxima(paths) -> np.ndarray:
    """maxinc[:, d] = max_i |X_{i+d} - X_i| for d = 1 .. 2^L (column 0 is zero)."""
    x = _as_matrix(paths)
    n = x.shape[1] - 1
    out = np.zeros((x.shape[0], n + 1))
    for d in range(1, n + 1):
        out[:, d] = np.max(np.abs(x[:, d:] - x[:, :-d]), axis=1)
    return out


def _exact_m(maxinc: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    n = maxinc.shape[1] - 1
    lags = np.arange(1, n + 1) / n
    scale = lags[None, :] ** -alphas[:, None]          # (alphas, lags)
    return np.max(maxinc[:, None, 1:] * scale[None, :, :], axis=2)  # (paths, alphas)


def _chaining_m(x: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    level = _level(x.shape[1])
    best = np.zeros((x.shape[0], alphas.size))
    for j in range(1, level + 1):
        sub = x[:, :: 2 ** (level - j)]
        adj = np.max(np.abs(np.diff(sub, axis=1)), axis=1)
        best = np.maximum(best, adj[:, None] * (2.0 ** (j * alphas))[None, :])
    return best * (2.0 / (1.0 - 2.0 ** -alphas))[None, :]


def _check_alphas(alphas) -> np.ndarray:
    a = np.atleast_1d(np.asarray(alphas, dtype=float))
    if np.any(a < 0) or np.any(a >= 1):
        raise InputError("alpha must lie in [0, 1)")
    return a


def holder_matrix(paths, alphas) -> tuple[np.ndarray, str]:
    """M for every (path, alpha) and the mode used ("exact" or "chaining")."""
    x = _as_matrix(paths)
    a = _check_alphas(alphas)
    if _level(x.shape[1]) <= EXACT_LEVEL:
        return _exact_m(lag_maxima(x), a), "exact"
    return _chaining_m(x, a), "chaining"


@dataclass
class HolderStatistic:
    alpha: float
    M: float
    level: int
    mode: str = "exact"


def holder_statistic(path: SampledPath, alpha: float) -> HolderStatistic:
    if not isinstance(path, SampledPath):
        path = SampledPath(path)
    m, mode = holder_matrix(path, [alpha])
    return HolderStatistic(float(alpha), float(m[0, 0]), path.level, mode)


@dataclass
class KolmogorovRow:
    alpha: float
    level: int
    mean_mp: float


@dataclass
class KolmogorovReport:
    p: float
    epsilon: float
    window: float  # alphas below epsilon / p are covered by the continuity theorem
    rows: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    growth: dict = field(default_factory=dict)
    mode: str = "exact"
    note: str = "heuristic: 'stable' means E[M^p] grew by less than 10% per dyadic level"

    def verdict(self, alpha: float) -> str:
        return self.verdicts[float(alpha)]


def kolmogorov_report(paths, p: float, epsilon: float, alphas: Sequence[float], d: int = 1) -> KolmogorovReport:
    """Mean of M^p over the paths at levels L-2, L-1, L; 'stable' or 'diverging' per alpha."""
    if d != 1:
        raise InputError("only one-parameter paths (d = 1) are supported")
    if p <= 0 or epsilon <= 0:
        raise InputError("p and epsilon must be positive")
    x = _as_matrix(paths)
    level = _level(x.shape[1])
    if level < 4:
        raise InputError("need level >= 4 to compare three levels")
    a = _check_alphas(alphas)
    if np.any(a <= 0):
        raise InputError("alphas must be positive")
    report = KolmogorovReport(float(p), float(epsilon), float(epsilon / p))
    means = {}
    for lv in (level - 2, level - 1, level):
        m, mode = holder_matrix(x[:, :: 2 ** (level - lv)], a)
        report.mode = mode
        means[lv] = np.mean(m**p, axis=0)
        for k, al in enumerate(a):
            report.rows.append(KolmogorovRow(float(al), lv, float(means[lv][k])))
    for k, al in enumerate(a):
        seq = [means[lv][k] for lv in (level - 2, level - 1, level)]
        growth = [(b / a_ - 1.0) if a_ > 0 else (0.0 if b == 0 else math.inf) for a_, b in zip(seq, seq[1:])]
        report.growth[float(al)] = growth
        report.verdicts[float(al)] = "stable" if all(g < GROWTH_LIMIT for g in growth) else "diverging"
    return report


def moment_exponent_fit(paths, p: float, lags: Sequence[int] | None = None) -> tuple[float, float]:
    """Fit E|X_t - X_s|^p ~ c |t - s|^e over dyadic lags; returns (c, e).

    ``paths`` is one ensemble (2-D array or list of paths) or a list of
    ensembles; per lag the largest ensemble mean is used (an upper moment).
    """
    if p <= 0:
        raise InputError("p must be positive")
    ensembles = _ensembles(paths)
    n = ensembles[0].shape[1] - 1
    if any(e.shape[1] - 1 != n for e in ensembles):
        raise InputError("ensembles must share one level")
    if lags is None:
        lags = [2**j for j in range(_level(n + 1) + 1)]
    lags = sorted({int(d) for d in lags if 1 <= int(d) <= n})
    if len(lags) < 3:
        raise InputError("need at least 3 lags for the fit")
    moments = []
    for d in lags:
        moments.append(max(float(np.mean(np.abs(e[:, d:] - e[:, :-d]) ** p)) for e in ensembles))
    moments = np.asarray(moments)
    if np.any(moments <= 0):
        raise InputError("zero increments: the exponent is undefined")
    dt = np.asarray(lags, dtype=float) / n
    slope, intercept = np.polyfit(np.log(dt), np.log(moments), 1)
    return float(math.exp(intercept)), float(slope)


def _ensembles(paths) -> list:
    if isinstance(paths, np.ndarray):
        return [np.atleast_2d(paths).astype(float)]
    if isinstance(paths, SampledPath):
        return [paths.values[None, :]]
    items = list(paths)
    if items and (isinstance(items[0], np.ndarray) and items[0].ndim == 2 or isinstance(items[0], (list, tuple))
                  and items[0] and isinstance(items[0][0], SampledPath)):
        return [_as_matrix(e) for e in items]
    return [_as_matrix(items)]
