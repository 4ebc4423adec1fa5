"""The generator G(A) = 1/2 sup_{gamma in Theta} tr[gamma gamma^T A].

Two uncertainty sets are supported: a 1-D volatility interval, where the sup
has the closed form 1/2 (s_max^2 a^+ - s_min^2 a^-), and a finite list of
d x d matrices, where it is a max over the list.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

SYM_TOL = 1e-12


@dataclass(frozen=True)
class Interval1D:
    sigma_min: float
    sigma_max: float

    def __post_init__(self):
        lo, hi = float(self.sigma_min), float(self.sigma_max)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise InputError("interval bounds must be finite")
        if lo < 0 or hi <= 0 or lo > hi:
            raise InputError(f"need 0 <= sigma_min <= sigma_max, sigma_max > 0; got [{lo}, {hi}]")
        object.__setattr__(self, "sigma_min", lo)
        object.__setattr__(self, "sigma_max", hi)

    @property
    def dim(self) -> int:
        return 1

    def contains(self, sigma, tol: float = 1e-12) -> bool:
        s = np.asarray(sigma, dtype=float)
        return bool(np.all((s >= self.sigma_min - tol) & (s <= self.sigma_max + tol)))


@dataclass(frozen=True, eq=False)
class MatrixList:
    matrices: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=float)
        if m.ndim == 2:
            m = m[None]
        if m.ndim != 3 or m.shape[0] == 0 or m.shape[1] != m.shape[2] or m.shape[1] < 1:
            raise InputError("need a nonempty list of square d x d matrices")
        if not np.all(np.isfinite(m)):
            raise InputError("matrix entries must be finite")
        m.setflags(write=False)
        object.__setattr__(self, "matrices", m)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]


ThetaSet = Interval1D | MatrixList


def _as_sym(theta, A) -> np.ndarray:
    a = np.atleast_2d(np.asarray(A, dtype=float))
    if a.shape != (theta.dim, theta.dim):
        raise InputError(f"matrix shape {a.shape} does not match Theta dimension {theta.dim}")
    if not np.all(np.isfinite(a)):
        raise InputError("matrix entries must be finite")
    if np.max(np.abs(a - a.T), initial=0.0) > SYM_TOL:
        raise InputError("matrix is not symmetric")
    return a


def g_scalar(theta: Interval1D, a):
    """Vectorised 1-D generator, ``a`` any array of second derivatives."""
    a = np.asarray(a, dtype=float)
    return 0.5 * (theta.sigma_max**2 * np.maximum(a, 0.0) - theta.sigma_min**2 * np.maximum(-a, 0.0))


def g_value(theta: ThetaSet, A) -> float:
    a = _as_sym(theta, A)
    if isinstance(theta, Interval1D):
        return float(g_scalar(theta, a[0, 0]))
    gg = np.einsum("kij,klj->kil", theta.matrices, theta.matrices)
    return float(0.5 * np.max(np.einsum("kij,ji->k", gg, a)))


def degeneracy_report(theta: ThetaSet) -> tuple[bool, float]:
    """``(nondegenerate, beta)`` with G(A) - G(B) >= beta tr[A - B] for A >= B."""
    if isinstance(theta, Interval1D):
        beta = 0.5 * theta.sigma_min**2
    else:
        gg = np.einsum("kij,klj->kil", theta.matrices, theta.matrices)
        beta = 0.5 * float(np.min(np.linalg.eigvalsh(gg)))
        beta = max(beta, 0.0)
    return beta > 0, beta


def sample_interval(theta: Interval1D, samples: int) -> MatrixList:
    """Represent an interval as 1x1 matrices on a uniform grid of ``samples`` points."""
    if samples < 2:
        raise InputError("need at least two samples")
    s = np.linspace(theta.sigma_min, theta.sigma_max, samples)
    return MatrixList(s[:, None, None])


def theta_from_config(doc: dict) -> ThetaSet:
    """``{kind = "interval", min, max}`` or ``{kind = "matrices", data = [...]}``."""
    kind = doc.get("kind")
    if kind == "interval":
        return Interval1D(doc["min"], doc["max"])
    if kind == "matrices":
        return MatrixList(doc["data"])
    raise InputError(f"unknown theta kind {kind!r}")


def theta_to_config(theta: ThetaSet) -> dict:
    if isinstance(theta, Interval1D):
        return {"kind": "interval", "min": theta.sigma_min, "max": theta.sigma_max}
    return {"kind": "matrices", "data": theta.matrices.tolist()}
