"""Upper expectations and capacities over finite families of probability measures.

A :class:`FiniteModel` is a finite sample space with a finite list of
probability vectors.  Everything here is a max over that list:

    upper_expectation(X) = max_P  sum_i P_i X_i
    capacity(A)          = max_P  P(A)

Models built from integers, :class:`fractions.Fraction` or strings such as
``"1/3"`` are kept in exact rational arithmetic; anything else is float64.
The infinite counterexample families (``exm2``, ``exm3``) are handled by
truncation plus a symbolic tail computed with sympy, see :class:`ModelFamily`.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Integral, Rational
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InputError, PreconditionError

SUM_TOL = 1e-12
_EXACT_ENUM_LIMIT = 20


def _exact_entry(v):
    if type(v) is Fraction:
        return v
    if isinstance(v, bool):
        return None
    if isinstance(v, (Integral, Fraction)):
        return Fraction(v)
    if isinstance(v, Rational):
        return Fraction(int(v.numerator), int(v.denominator))
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except ValueError:
            return None
    return None


def _coerce(values) -> np.ndarray:
    """Object array of Fractions when every entry is rational, else float64."""
    if isinstance(values, np.ndarray) and values.dtype.kind == "f":
        return values
    arr = np.asarray(values, dtype=object)
    flat = [_exact_entry(v) for v in arr.ravel()]
    if flat and all(v is not None for v in flat):
        out = np.empty(arr.shape, dtype=object)
        out.ravel()[:] = flat
        return out
    try:
        return np.asarray(arr, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"non-numeric entries: {exc}") from None


def _is_exact(arr: np.ndarray) -> bool:
    return arr.dtype == object


def _to_float(arr: np.ndarray) -> np.ndarray:
    if not _is_exact(arr):
        return arr
    # int / int rounds correctly and skips the slow Rational.__float__ path
    flat = [v.numerator / v.denominator for v in arr.ravel()]
    return np.array(flat, dtype=float).reshape(arr.shape)


def as_number(v):
    """Collapse exact results to ``int``/``Fraction`` and floats to ``float``."""
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else v
    if isinstance(v, (Integral,)):
        return int(v)
    return float(v)


@dataclass(frozen=True, eq=False)
class FiniteModel:
    """Finite sample space plus a finite family of probability vectors.

    ``values`` optionally attaches a real number to every point (the examples
    use ``X(n) = n``); ``metric`` optionally gives a point-distance function
    used by the quasi-continuity check.
    """

    points: tuple
    measures: np.ndarray
    labels: tuple = ()
    values: np.ndarray | None = None
    metric: Callable | None = None

    def __post_init__(self):
        points = tuple(self.points)
        if not points:
            raise InputError("model needs at least one point")
        if len(set(points)) != len(points):
            raise InputError("duplicate point labels")
        measures = _coerce(self.measures)
        if measures.ndim == 1:
            measures = measures[None, :]
        if measures.ndim != 2 or measures.shape[0] == 0:
            raise InputError("need a non-empty list of measure vectors")
        if measures.shape[1] != len(points):
            raise InputError(
                f"measure vectors have length {measures.shape[1]}, model has {len(points)} points"
            )
        fm = _to_float(measures)
        object.__setattr__(self, "_float", fm)
        if not np.all(np.isfinite(fm)):
            raise InputError("measure entries must be finite")
        if np.any(fm < 0):
            raise InputError("measure entries must be nonnegative")
        # nonzero pattern per measure; exact sums only touch these entries
        support = tuple(np.flatnonzero(r != 0) for r in fm)
        for k, row in enumerate(measures):
            total = sum(row[support[k]]) if _is_exact(measures) else float(np.sum(row))
            if abs(float(total) - 1.0) > SUM_TOL:
                raise InputError(f"measure {k} sums to {float(total)!r}, not 1")
        labels = tuple(self.labels) or tuple(f"P{k + 1}" for k in range(measures.shape[0]))
        if len(labels) != measures.shape[0]:
            raise InputError("one label per measure required")
        values = self.values
        if values is not None:
            values = _coerce(values)
            if values.shape != (len(points),):
                raise InputError("values must have one entry per point")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "measures", measures)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(points)})
        object.__setattr__(self, "_support", support)
        object.__setattr__(self, "_scaled", _integer_rows(measures, support) if _is_exact(measures) else None)

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_measures(self) -> int:
        return self.measures.shape[0]

    @property
    def exact(self) -> bool:
        return _is_exact(self.measures)

    def index(self, label) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise InputError(f"unknown point label {label!r}") from None

    def indicator(self, event: Iterable) -> np.ndarray:
        mask = np.zeros(self.n_points, dtype=bool)
        for label in event:
            mask[self.index(label)] = True
        return mask

    def point_capacities(self) -> np.ndarray:
        return self._float.max(axis=0)

    def variable(self, fn: Callable | None = None) -> np.ndarray:
        """Random variable ``fn(value)`` over the attached point values (identity by default)."""
        base = self.values if self.values is not None else _coerce(list(self.points))
        if fn is None:
            return base
        return _coerce([fn(v) for v in base])


def _integer_rows(measures: np.ndarray, support: tuple):
    """Each exact row as int64 numerators over one denominator, if that fits."""
    out = []
    for row, sup in zip(measures, support):
        vals = row[sup]
        den = math.lcm(*(v.denominator for v in vals)) if len(vals) else 1
        nums = [v.numerator * (den // v.denominator) for v in vals]
        if sum(abs(n) for n in nums) >= 2**62:
            return None
        full = np.zeros(row.size, dtype=np.int64)
        full[sup] = nums
        out.append((den, full))
    return out


def _variable(model: FiniteModel, X) -> np.ndarray:
    x = X if isinstance(X, np.ndarray) and X.dtype == object else _coerce(X)
    if x.shape != (model.n_points,):
        raise InputError(f"variable has shape {x.shape}, model has {model.n_points} points")
    if not np.all(np.isfinite(_to_float(x))):
        raise InputError("random variable entries must be finite")
    return x


def _dot_all(model: FiniteModel, x: np.ndarray) -> list:
    """E_P[x] for every measure, exact when both sides are rational."""
    if model.exact and _is_exact(x):
        if model._scaled is not None:
            xden = math.lcm(*(v.denominator for v in x))
            xi = np.array([v.numerator * (xden // v.denominator) for v in x], dtype=object)
            # Python-int dot on the sparse support: exact, no overflow
            return [Fraction(int(np.dot(nums[sup].astype(object), xi[sup])), den * xden)
                    for (den, nums), sup in zip(model._scaled, model._support)]
        return [sum((row[i] * x[i] for i in sup), Fraction(0)) for row, sup in zip(model.measures, model._support)]
    return list(model._float @ _to_float(x))


def expectations(model: FiniteModel, X) -> list:
    """Linear expectation of X under each measure of the model."""
    return [as_number(v) for v in _dot_all(model, _variable(model, X))]


def upper_expectation(model: FiniteModel, X, *, witness: bool = False):
    """max_P E_P[X].  With ``witness=True`` also return the lowest-index maximiser."""
    vals = _dot_all(model, _variable(model, X))
    best = 0
    for k in range(1, len(vals)):
        if vals[k] > vals[best]:
            best = k
    value = as_number(vals[best])
    return (value, model.labels[best]) if witness else value


def lower_expectation(model: FiniteModel, X):
    return as_number(-_exact_or_float(upper_expectation(model, _neg(_variable(model, X)))))


def _exact_or_float(v):
    return v if isinstance(v, (int, Fraction)) else float(v)


def _neg(x: np.ndarray) -> np.ndarray:
    if _is_exact(x):
        out = np.empty_like(x)
        out[:] = [-v for v in x]
        return out
    return -x


def capacity(model: FiniteModel, event: Iterable):
    """c(A) = max_P P(A) for a set of point labels."""
    return capacity_of_mask(model, model.indicator(event))


def capacity_of_mask(model: FiniteModel, mask: np.ndarray):
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return 0
    if model.exact and model._scaled is not None:
        return as_number(max(Fraction(int(nums[mask].sum()), den) for den, nums in model._scaled))
    if model.exact:
        return as_number(max(sum((row[i] for i in sup if mask[i]), Fraction(0))
                             for row, sup in zip(model.measures, model._support)))
    return float(model._float[:, mask].sum(axis=1).max())


def _abs_pow(x: np.ndarray, p) -> np.ndarray:
    if _is_exact(x) and float(p) == int(p):
        out = np.empty_like(x)
        out[:] = [abs(v) ** int(p) for v in x]
        return out
    return np.abs(_to_float(x)) ** float(p)


def _abs(x: np.ndarray) -> np.ndarray:
    return np.abs(x) if not _is_exact(x) else np.array([abs(v) for v in x], dtype=object)


def tail_functional(model: FiniteModel, X, p, n, *, inclusive: bool = False):
    """sup_P E_P[|X|^p 1{|X| > n}];  ``inclusive=True`` switches the indicator to >=."""
    if p <= 0:
        raise InputError("p must be positive")
    if n < 0:
        raise InputError("threshold n must be nonnegative")
    x = _variable(model, X)
    a = _abs(x)
    mask = np.array([v >= n if inclusive else v > n for v in a], dtype=bool)
    powered = _abs_pow(x, p)
    if _is_exact(powered):
        powered = np.array([v if m else Fraction(0) for v, m in zip(powered, mask)], dtype=object)
    else:
        powered = np.where(mask, powered, 0.0)
    return upper_expectation(model, powered)


def scaled_capacity_decay(model: FiniteModel, X, n):
    """n * c({|X| >= n})."""
    x = _variable(model, X)
    mask = np.array([v >= n for v in _abs(x)], dtype=bool)
    c = capacity_of_mask(model, mask)
    if isinstance(c, (int, Fraction)) and _exact_entry(n) is not None:
        return as_number(Fraction(n) * c)
    return float(n) * float(c)


# -- membership diagnostics -------------------------------------------------


@dataclass
class MembershipReport:
    p: float
    norm_p: float
    in_Lp: bool
    in_Lp_b: bool
    in_Lp_c: bool
    tail_values: list = field(default_factory=list)
    quasi_continuous: bool = True
    witnesses: list = field(default_factory=list)

    def __post_init__(self):
        # in_Lp_c => in_Lp_b => in_Lp
        assert not self.in_Lp_c or self.in_Lp_b
        assert not self.in_Lp_b or self.in_Lp


def discontinuity_witnesses(model: FiniteModel, X, metric, delta_metric: float, lipschitz: float) -> list:
    """Pairs of points closer than ``delta_metric`` whose values jump by more than ``lipschitz * d``."""
    x = _to_float(_variable(model, X))
    pts = model.points
    out = []
    for i, j in itertools.combinations(range(len(pts)), 2):
        d = float(metric(pts[i], pts[j]))
        if d < delta_metric and abs(x[i] - x[j]) > lipschitz * d:
            out.append((pts[i], pts[j]))
    return out


def is_quasi_continuous(model: FiniteModel, X, metric=None, *, delta_metric: float = 0.1,
                        lipschitz: float = 1.0) -> tuple[bool, list]:
    """Finite proxy for quasi-continuity.

    Every finite set is open here, and the minimum over covering sets is attained,
    so "for every eps there is O with c(O) < eps" reduces to: every discontinuity
    witness has at least one polar endpoint.  Returns ``(verdict, uncovered witnesses)``.
    """
    metric = metric if metric is not None else model.metric
    if metric is None:
        return True, []
    witnesses = discontinuity_witnesses(model, X, metric, delta_metric, lipschitz)
    caps = model.point_capacities()
    polar = {model.points[i] for i in np.flatnonzero(caps == 0)}
    uncovered = [w for w in witnesses if w[0] not in polar and w[1] not in polar]
    return not uncovered, uncovered


def _thresholds(max_abs: float) -> list:
    ns = [0.0]
    n = 1.0
    while True:
        ns.append(n)
        if n > max_abs:
            return ns
        n *= 2


def membership_report(model: FiniteModel, X, p, metric=None, *, delta_metric: float = 0.1,
                      lipschitz: float = 1.0) -> MembershipReport:
    """Membership of X in L^p, L^p_b, L^p_c for a single finite model.

    On one finite model the tail vanishes once n exceeds max |X| over points of
    positive capacity, so ``in_Lp_b`` is decided exactly; for the infinite
    families use :func:`family_membership`.
    """
    if p <= 0:
        raise InputError("p must be positive")
    x = _variable(model, X)
    moment = upper_expectation(model, _abs_pow(x, p))
    norm = float(moment) ** (1.0 / p)
    caps = model.point_capacities()
    charged = _to_float(_abs(x))[caps > 0]
    max_abs = float(charged.max()) if charged.size else 0.0
    tails = [(n, tail_functional(model, x, p, n)) for n in _thresholds(max_abs)]
    in_lp = math.isfinite(norm)
    in_lp_b = in_lp and float(tails[-1][1]) == 0.0
    qc, uncovered = is_quasi_continuous(model, x, metric, delta_metric=delta_metric, lipschitz=lipschitz)
    return MembershipReport(
        p=float(p), norm_p=norm, in_Lp=in_lp, in_Lp_b=in_lp_b, in_Lp_c=in_lp_b and qc,
        tail_values=tails, quasi_continuous=qc, witnesses=uncovered,
    )


# -- example families ------------------------------------------------------


def exm2(N: int) -> FiniteModel:
    """P_1 = delta_1;  P_n{1} = 1 - 1/n, P_n{n} = 1/n  for n = 2..N, on points 1..N."""
    if N < 2:
        raise InputError("exm2 needs N >= 2")
    rows = []
    for n in range(1, N + 1):
        row = [Fraction(0)] * N
        if n == 1:
            row[0] = Fraction(1)
        else:
            row[0] = 1 - Fraction(1, n)
            row[n - 1] = Fraction(1, n)
        rows.append(row)
    pts = tuple(range(1, N + 1))
    return FiniteModel(pts, rows, tuple(f"P{n}" for n in range(1, N + 1)), values=list(pts))


def exm3(N: int) -> FiniteModel:
    """P_1 = delta_1;  P_n{1} = 1 - 1/n^2, P_n{kn} = 1/n^3 (k = 1..n)  for n = 2..N."""
    if N < 2:
        raise InputError("exm3 needs N >= 2")
    support = sorted({1} | {k * n for n in range(2, N + 1) for k in range(1, n + 1)})
    idx = {v: i for i, v in enumerate(support)}
    rows = []
    for n in range(1, N + 1):
        row = [Fraction(0)] * len(support)
        if n == 1:
            row[0] = Fraction(1)
        else:
            row[0] = 1 - Fraction(1, n * n)
            for k in range(1, n + 1):
                row[idx[k * n]] += Fraction(1, n ** 3)
        rows.append(row)
    return FiniteModel(tuple(support), rows, tuple(f"P{n}" for n in range(1, N + 1)), values=support)


def _abs_metric(a, b) -> float:
    return abs(float(a) - float(b))


def exm1(M: int) -> FiniteModel:
    """Grid {0, 1/M, ..., 1} carrying every Dirac measure, metric |x - y|."""
    if M < 2:
        raise InputError("exm1 needs M >= 2")
    pts = tuple(Fraction(k, M) for k in range(M + 1))
    rows = np.eye(M + 1, dtype=int).tolist()
    return FiniteModel(pts, rows, tuple(f"delta_{k}/{M}" for k in range(M + 1)),
                       values=list(pts), metric=_abs_metric)


def exm1_indicator(model: FiniteModel) -> np.ndarray:
    """Indicator of the grid point closest to 1/2 (an interior point)."""
    vals = _to_float(model.values)
    x = np.zeros(model.n_points, dtype=int)
    x[int(np.argmin(np.abs(vals - 0.5)))] = 1
    return _coerce(x.tolist())


def _exm2_term(n, f):
    return (1 - 1 / n) * f(1) + f(n) / n


def _exm3_term(n, f):
    import sympy

    k = sympy.Symbol("k", integer=True, positive=True)
    return (1 - 1 / n**2) * f(1) + sympy.summation(f(k * n), (k, 1, n)) / n**3


@dataclass(frozen=True)
class ModelFamily:
    """A countable measure family, truncated at parameter ``N``.

    ``expectation_term(n, f)`` returns the sympy expression for E_{P_n}[f(X)]
    (X the attached point value); it supplies the closed-form tail over the
    measures dropped by truncation.
    """

    name: str
    build: Callable[[int], FiniteModel]
    variable: Callable[[FiniteModel], np.ndarray]
    sizes: tuple = (8, 16, 32, 64)
    expectation_term: Callable | None = None


def _identity_variable(model: FiniteModel) -> np.ndarray:
    return model.variable()


def model_family(name: str) -> ModelFamily:
    if name == "exm2":
        return ModelFamily("exm2", exm2, _identity_variable, expectation_term=_exm2_term)
    if name == "exm3":
        return ModelFamily("exm3", exm3, _identity_variable, expectation_term=_exm3_term)
    if name == "exm1":
        return ModelFamily("exm1", exm1, exm1_indicator)
    raise InputError(f"unknown example family {name!r}")


def _sympy_to_number(v):
    import sympy

    if v is sympy.oo:
        return math.inf
    if v.is_Rational:
        return as_number(Fraction(int(v.p), int(v.q)))
    return float(v)


def family_upper_expectation(family: ModelFamily, f: Callable | None = None, *, size: int | None = None):
    """sup over the whole (untruncated) family of E_P[f(X)].

    The truncated model gives the max over n <= N exactly; the dropped measures
    contribute at most lim_n E_{P_n}[f(X)] provided that sequence is eventually
    monotone, which holds for the polynomial f used with exm2/exm3.
    """
    import sympy

    f = f or (lambda k: k)
    size = size or max(family.sizes)
    model = family.build(size)
    finite = upper_expectation(model, model.variable(f))
    if family.expectation_term is None:
        return finite
    n = sympy.Symbol("n", integer=True, positive=True)
    lim = sympy.limit(family.expectation_term(n, f), n, sympy.oo)
    lim = _sympy_to_number(lim)
    return finite if finite >= lim else lim


@dataclass
class FamilyMembership:
    family: str
    p: float
    sizes: tuple
    in_Lp: bool
    in_Lp_b: bool
    in_Lp_c: bool
    stable: bool
    per_size: list = field(default_factory=list)


def _stabilised(flags: Sequence[bool]) -> tuple[bool, bool]:
    last3 = flags[-3:]
    return flags[-1], all(v == last3[0] for v in last3)


def family_membership(family: ModelFamily, p, *, delta_metric: float = 0.1, lipschitz: float = 1.0,
                      decay_ratio: float = 0.75) -> FamilyMembership:
    """Limit verdicts over truncation sizes.

    At size N the tail is "vanishing" if tail(N/2) is zero or at most
    ``decay_ratio`` * tail(N/4): thresholds grow with N, so a tail that
    stays put (exm2: identically 1) is flagged.  The verdict must be constant
    over the last three sizes to count as stabilised.
    """
    if p <= 0:
        raise InputError("p must be positive")
    rows = []
    for N in family.sizes:
        model = family.build(N)
        x = family.variable(model)
        t_hi = float(tail_functional(model, x, p, Fraction(N, 2)))
        t_lo = float(tail_functional(model, x, p, Fraction(N, 4)))
        vanishing = t_hi == 0.0 or t_hi <= decay_ratio * t_lo
        qc, _ = is_quasi_continuous(model, x, delta_metric=delta_metric, lipschitz=lipschitz)
        rows.append({"N": N, "tail_N/4": t_lo, "tail_N/2": t_hi, "vanishing": vanishing, "qc": qc})
    lp_b, stable_b = _stabilised([r["vanishing"] for r in rows])
    qc, stable_c = _stabilised([r["qc"] for r in rows])
    if family.expectation_term is not None:
        power = int(p) if float(p) == int(p) else p
        in_lp = math.isfinite(float(family_upper_expectation(family, lambda k: k ** power)))
    else:
        in_lp = True
    lp_b = lp_b and in_lp
    return FamilyMembership(family.name, float(p), tuple(family.sizes), in_lp, lp_b, lp_b and qc,
                            stable_b and stable_c, rows)


# -- inequality and property suites -----------------------------------------


@dataclass
class CheckRow:
    name: str
    lhs: object
    rhs: object
    passed: bool
    detail: str = ""


@dataclass
class SuiteReport:
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def add(self, name, lhs, rhs, passed, detail=""):
        self.rows.append(CheckRow(name, lhs, rhs, bool(passed), detail))

    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]


def markov_bound_check(model: FiniteModel, X, p, alpha):
    """c(|X| > alpha) <= E[|X|^p] / alpha^p.  Returns ``(lhs, rhs, holds)``."""
    if alpha <= 0 or p <= 0:
        raise InputError("alpha and p must be positive")
    x = _variable(model, X)
    lhs = capacity_of_mask(model, np.array([v > alpha for v in _abs(x)], dtype=bool))
    moment = upper_expectation(model, _abs_pow(x, p))
    if isinstance(moment, (int, Fraction)) and _exact_entry(alpha) is not None and float(p) == int(p):
        rhs = as_number(Fraction(moment) / Fraction(alpha) ** int(p))
    else:
        rhs = float(moment) / float(alpha) ** float(p)
    return lhs, rhs, float(lhs) <= float(rhs) + 1e-12


def choquet_suite(model: FiniteModel, events: Sequence[Iterable]) -> SuiteReport:
    """Range, monotonicity, subadditivity and continuity from below on the given events."""
    report = SuiteReport()
    masks = [model.indicator(e) for e in events]
    caps = [capacity_of_mask(model, m) for m in masks]
    tol = 1e-12
    for k, c in enumerate(caps):
        report.add(f"range[{k}]", c, "[0,1]", -tol <= float(c) <= 1 + tol)
    report.add("empty", capacity_of_mask(model, np.zeros(model.n_points, bool)), 0, True)
    report.add("whole", capacity_of_mask(model, np.ones(model.n_points, bool)), 1,
               abs(float(capacity_of_mask(model, np.ones(model.n_points, bool))) - 1) <= tol)
    M = np.array(masks, dtype=bool).reshape(len(masks), model.n_points)
    fcaps = np.array([float(c) for c in caps])
    bad = None
    for i in range(len(masks)):
        subset = np.all(M[i] <= M, axis=1)
        subset[i] = False
        hits = np.flatnonzero(subset & (fcaps[i] > fcaps + tol))
        if hits.size:
            bad = (i, int(hits[0]))
            break
    report.add("monotone", "c(A)<=c(B) for A<=B", "", bad is None,
               "" if bad is None else f"events {bad[0]} subset of {bad[1]}")
    if masks:
        union = np.logical_or.reduce(masks)
        c_union = capacity_of_mask(model, union)
        total = sum(float(c) for c in caps)
        report.add("subadditive", c_union, total, float(c_union) <= total + tol)
    # float screen of every pair union; the measures are exact, so float error is ~1e-16
    P = model._float
    bad = None
    for i in range(len(masks) - 1):
        unions = M[i] | M[i + 1:]
        cu = (unions @ P.T).max(axis=1)
        hits = np.flatnonzero(cu > fcaps[i] + fcaps[i + 1:] + tol)
        if hits.size:
            bad = (i, i + 1 + int(hits[0]))
            break
    report.add("subadditive_pairs", "", "", bad is None, "" if bad is None else f"events {bad}")
    for start, stop in _nested_runs(masks):
        run = caps[start:stop]
        increasing = all(float(a) <= float(b) + tol for a, b in zip(run, run[1:]))
        c_union = capacity_of_mask(model, np.logical_or.reduce(masks[start:stop]))
        ok = increasing and abs(float(run[-1]) - float(c_union)) <= tol
        report.add(f"continuity_from_below[{start}:{stop}]", run[-1], c_union, ok,
                   "" if ok else "capacities not increasing to the union")
    return report


def _nested_runs(masks: list) -> list:
    runs, start = [], 0
    for k in range(1, len(masks) + 1):
        if k == len(masks) or not np.all(masks[k - 1] <= masks[k]):
            if k - start >= 2:
                runs.append((start, k))
            start = k
    return runs


@dataclass
class BorelCantelliReport:
    capacities: list
    convergent: bool
    block_sums: list
    tail_sums: list
    limsup_capacities: list
    passed: bool
    reason: str = ""

    @property
    def limsup_capacity(self):
        return self.limsup_capacities[-1] if self.limsup_capacities else 0


def borel_cantelli_check(model, events, horizon: int | None = None, *, ratio: float = 0.75) -> BorelCantelliReport:
    """Decay of c(U_{n>=k} A_n) against the tail of sum c(A_n).

    ``model`` may be a :class:`FiniteModel` or a :class:`ModelFamily` (its
    largest truncation is used); ``events`` is a list of point sets for
    n = 1, 2, ... or a callable ``n -> set`` evaluated up to ``horizon``.
    Convergence of the capacity series is judged on complete dyadic blocks
    [2^j, 2^(j+1)): the last block sum must be at most ``ratio`` times the one
    before (Cauchy condensation), otherwise a precondition violation is reported.
    """
    if isinstance(model, ModelFamily):
        model = model.build(max(model.sizes))
    if callable(events):
        if horizon is None:
            raise InputError("horizon required when events is a callable")
        events = [events(n) for n in range(1, horizon + 1)]
    events = list(events)[: horizon or None]
    masks = [model.indicator(e) for e in events]
    caps = [float(capacity_of_mask(model, m)) for m in masks]
    H = len(caps)
    blocks = []
    j = 0
    while 2 ** (j + 1) - 1 <= H:
        blocks.append(sum(caps[2**j - 1: 2 ** (j + 1) - 1]))
        j += 1
    tail_zero = all(c == 0 for c in caps[H // 2:]) if H else True
    if tail_zero:
        convergent, remainder, reason = True, 0.0, ""
    elif len(blocks) < 2:
        convergent, remainder, reason = False, math.inf, "horizon too short for a convergence test"
    elif blocks[-2] > 0 and blocks[-1] <= ratio * blocks[-2]:
        r = blocks[-1] / blocks[-2]
        convergent, remainder, reason = True, blocks[-1] * r / (1 - r), ""
    else:
        convergent, remainder, reason = False, math.inf, "capacity series does not converge (dyadic blocks not decaying)"
    tails = [sum(caps[k:]) + remainder for k in range(H)]
    limsup = [float(capacity_of_mask(model, np.logical_or.reduce(masks[k:]))) for k in range(H)]
    passed = convergent and all(l <= 10 * t + 1e-12 for l, t in zip(limsup, tails))
    return BorelCantelliReport(caps, convergent, blocks, tails, limsup, passed, reason)


@dataclass
class UniformIntegrabilityReport:
    epsilon: float
    delta: float
    threshold: float
    worst: float
    verified: bool
    mode: str
    events_checked: int


def uniform_integrability_check(model, X=None, epsilon: float = 0.1, *, seed: int = 0,
                                n_random: int = 10_000) -> UniformIntegrabilityReport:
    """Constructive delta with E[|X| 1_A] <= eps whenever c(A) <= delta.

    delta = eps / (2N) for the smallest N with tail(|X|, N) <= eps/2, then
    verified by enumerating events (exhaustive up to 2^20 subsets, otherwise
    per-measure greedy worst events plus random ones).
    """
    if epsilon <= 0:
        raise InputError("epsilon must be positive")
    if isinstance(model, ModelFamily):
        verdict = family_membership(model, 1)
        if not verdict.in_Lp_b:
            raise PreconditionError(f"X is not in L^1_b for family {model.name}")
        model = model.build(max(model.sizes))
        X = model.variable() if X is None else X
    x = _to_float(_variable(model, X))
    a = np.abs(x)
    if not np.any(a > 0):
        return verify_uniform_integrability(model, x, epsilon, 1.0, seed=seed, n_random=n_random,
                                            threshold=0.0)
    threshold = None
    for n in np.unique(a[a > 0]):
        if float(tail_functional(model, x, 1, float(n))) <= epsilon / 2:
            threshold = float(n)
            break
    delta = epsilon / (2 * threshold)
    return verify_uniform_integrability(model, x, epsilon, delta, seed=seed, n_random=n_random,
                                        threshold=threshold)


def verify_uniform_integrability(model: FiniteModel, X, epsilon: float, delta: float, *, seed: int = 0,
                                 n_random: int = 10_000, threshold: float = math.nan) -> UniformIntegrabilityReport:
    x = np.abs(_to_float(_variable(model, X)))
    P = model._float
    n = model.n_points
    worst, checked = 0.0, 0
    if n <= _EXACT_ENUM_LIMIT:
        mode = "exhaustive"
        weights = 1 << np.arange(n, dtype=np.int64)
        chunk = 1 << 16
        for lo in range(0, 1 << n, chunk):
            codes = np.arange(lo, min(lo + chunk, 1 << n), dtype=np.int64)
            bits = ((codes[:, None] & weights[None, :]) != 0).astype(float)
            caps = (bits @ P.T).max(axis=1)
            vals = (bits @ (P * x).T).max(axis=1)
            ok = caps <= delta + 1e-15
            checked += int(ok.sum())
            if ok.any():
                worst = max(worst, float(vals[ok].max()))
    else:
        mode = "greedy+random"
        order = np.argsort(-x, kind="stable")
        candidates = []
        for _ in range(P.shape[0]):
            mask = np.zeros(n, bool)
            for i in order:
                mask[i] = True
                if P[:, mask].sum(axis=1).max() > delta + 1e-15:
                    mask[i] = False
            candidates.append(mask)
        rng = np.random.default_rng(seed)
        small = P.max(axis=0) <= delta
        for _ in range(n_random):
            candidates.append(small & (rng.random(n) < rng.random()))
        for mask in candidates:
            if P[:, mask].sum(axis=1).max() <= delta + 1e-15:
                checked += 1
                worst = max(worst, float((P[:, mask] @ x[mask]).max()) if mask.any() else 0.0)
    return UniformIntegrabilityReport(epsilon, delta, threshold, worst, worst <= epsilon + 1e-12, mode, checked)


@dataclass
class MonotoneConvergenceReport:
    values: list
    nonincreasing: bool
    limit_value: object
    gap: float
    converged: bool


def monotone_convergence_check(model: FiniteModel, sequence: Sequence, limit=None, *,
                               tol: float = 1e-9) -> MonotoneConvergenceReport:
    """E[X_n] decreases to E[X] when X_n decreases to X quasi-surely."""
    xs = [_variable(model, X) for X in sequence]
    if not xs:
        raise InputError("empty sequence")
    charged = model.point_capacities() > 0
    for k in range(1, len(xs)):
        prev, cur = _to_float(xs[k - 1]), _to_float(xs[k])
        bad = np.flatnonzero(charged & (cur > prev))
        if bad.size:
            raise PreconditionError(
                f"sequence increases at index {k}, point {model.points[int(bad[0])]!r}"
            )
    values = [upper_expectation(model, x) for x in xs]
    if limit is None:
        limit_x = np.minimum.reduce([_to_float(x) for x in xs])
    else:
        limit_x = _variable(model, limit)
    limit_value = upper_expectation(model, limit_x)
    nonincreasing = all(float(b) <= float(a) + 1e-12 for a, b in zip(values, values[1:]))
    gap = float(values[-1]) - float(limit_value)
    return MonotoneConvergenceReport(values, nonincreasing, limit_value, gap, nonincreasing and abs(gap) <= tol)


# -- random models, config and reports ---------------------------------------


def random_model(rng: np.random.Generator, n_points: int, n_measures: int, *,
                 polar_fraction: float = 0.0, sparsity: float = 0.3) -> FiniteModel:
    """Random float model; a ``polar_fraction`` of points carries no mass under any measure."""
    P = rng.dirichlet(np.ones(n_points), size=n_measures)
    P = P * (rng.random(P.shape) >= sparsity)
    polar = rng.random(n_points) < polar_fraction
    P[:, polar] = 0.0
    for row in P:
        if row.sum() == 0:
            row[rng.integers(n_points)] = 1.0
    P = P / P.sum(axis=1, keepdims=True)
    return FiniteModel(tuple(range(n_points)), P)


def load_discrete_config(doc: dict) -> tuple[FiniteModel, dict]:
    """Model and named variables from a parsed config document.

    Expected keys: ``points`` (list), ``measures`` (table label -> vector or
    list of vectors), optional ``values`` and ``variables`` (table name -> vector).
    Entries may be numbers or rational strings like ``"1/3"``.
    """
    if "points" not in doc or "measures" not in doc:
        raise InputError("config needs 'points' and 'measures'")
    meas = doc["measures"]
    if isinstance(meas, dict):
        labels, rows = tuple(meas), list(meas.values())
    else:
        labels, rows = (), list(meas)
    model = FiniteModel(tuple(doc["points"]), rows, labels, values=doc.get("values"))
    variables = {name: _variable(model, vec) for name, vec in doc.get("variables", {}).items()}
    return model, variables


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_csv(rows: Sequence[CheckRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "lhs", "rhs", "pass"])
    for r in rows:
        w.writerow([r.name, _fmt(r.lhs), _fmt(r.rhs), "true" if r.passed else "false"])
    return buf.getvalue()


def report_summary(rows: Sequence[CheckRow]) -> str:
    lines = []
    for r in rows:
        mark = "PASS" if r.passed else "FAIL"
        extra = f"  ({r.detail})" if r.detail else ""
        lines.append(f"[{mark}] {r.name}: {_fmt(r.lhs)} vs {_fmt(r.rhs)}{extra}")
    n_fail = sum(not r.passed for r in rows)
    lines.append(f"{len(rows) - n_fail}/{len(rows)} checks passed")
    return "\n".join(lines)
