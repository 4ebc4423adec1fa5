from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gexpect.cylinder import (
    CylinderPayoff,
    Resolution,
    dpp_consistency_check,
    evaluate_cylinder,
    reduce_cylinder,
    split_payoff,
)
from gexpect.errors import ConfigurationError, InputError
from gexpect.gfunction import Interval1D
from gexpect.gheat import g_normal_expectation
from gexpect.payoff import Payoff, evaluate

THETA = Interval1D(1.0, 2.0)
QUAD_SQ_S2 = 3.9102399338112255  # E min(4 Z^2, 25), see tests/oracles.py


def test_single_time_matches_gheat_bitwise():
    cp = CylinderPayoff((1.0,), "sqcap(x1, 5)")
    assert evaluate_cylinder(cp, THETA) == g_normal_expectation("sqcap(x, 5)", THETA, 1.0)


def test_gaussian_case_depends_on_sum_only():
    cp = CylinderPayoff((0.5, 1.0), "sqcap(x1 + x2, 5)")
    assert evaluate_cylinder(cp, Interval1D(2.0, 2.0)) == pytest.approx(QUAD_SQ_S2, abs=5e-3)


def test_separable_payoff_adds_up():
    cp = CylinderPayoff((0.5, 1.0), "sqcap(x1, 5) + sqcap(x2, 5)")
    one = g_normal_expectation("sqcap(x, 5)", THETA, 0.5)
    assert evaluate_cylinder(cp, THETA) == pytest.approx(2 * one, abs=5e-3)


def test_increment_independence_of_later_constant():
    cp = CylinderPayoff((0.5, 1.0), "sqcap(x1, 5) + 3")
    one = g_normal_expectation("sqcap(x, 5)", THETA, 0.5, nx=401)
    assert evaluate_cylinder(cp, THETA) == pytest.approx(one + 3, abs=1e-9)


def test_workers_are_bitwise_neutral():
    cp = CylinderPayoff((0.3, 0.6, 1.0), "sqcap(x1 + x2 - x3, 5)")
    res = Resolution(nx=41)
    base = reduce_cylinder(cp, THETA, res)
    par = reduce_cylinder(cp, THETA, Resolution(nx=41, workers=4))
    assert base.value == par.value
    assert base.manifest()["nx"] == [41, 41, 41]


def test_resolution_defaults_and_overrides():
    assert Resolution().axis_nx(0, 2) == 401
    assert Resolution(nx_per_axis=(11, 21)).axis_nx(1, 2) == 21
    with pytest.raises(ConfigurationError):
        Resolution(nx=2).axis_nx(0)
    out = reduce_cylinder(CylinderPayoff((0.5, 1.0), "x1 + x2"), THETA, Resolution(nx_per_axis=(21, 31)))
    assert [a.size for a in out.axes] == [21, 31]
    assert out.tolerance_scale == max(out.h + out.dt)


def test_validation():
    for times in [(), (0.0, 1.0), (1.0, 0.5), (0.5, 0.5)]:
        with pytest.raises(InputError):
            CylinderPayoff(times, "x1")
    with pytest.raises(InputError):
        CylinderPayoff((0.5, 1.0), Payoff.parse("x1", 1))
    with pytest.raises(InputError):
        CylinderPayoff((0.5, 1.0), "x3")
    with pytest.raises(InputError):
        CylinderPayoff((1.0,), 3.0)
    with pytest.raises(ConfigurationError):
        reduce_cylinder(CylinderPayoff((0.2, 0.4, 0.6, 0.8), "x1 + x2 + x3 + x4"), THETA)


def test_split_payoff_rewrites_increments():
    cp = CylinderPayoff((0.5, 1.0), "sqcap(x1 + 2 * x2, 5)")
    sp = split_payoff(cp, 0.75)
    assert sp.times == (0.5, 0.75, 1.0)
    assert evaluate(sp.payoff.expr, [1.0, 0.25, 0.5]) == evaluate(cp.payoff.expr, [1.0, 0.75])
    sp = split_payoff(cp, 0.25)
    assert evaluate(sp.payoff.expr, [0.1, 0.2, 0.3]) == pytest.approx(evaluate(cp.payoff.expr, [0.3, 0.3]))
    for bad in (0.0, 0.5, 1.0, 1.5):
        with pytest.raises(InputError):
            split_payoff(cp, bad)


def test_dpp_check():
    chk = dpp_consistency_check(CylinderPayoff((1.0,), "sqcap(x1, 5)"), THETA, 0.5)
    assert chk.passed and abs(chk.direct - chk.split) < 1e-3
    chk = dpp_consistency_check(CylinderPayoff((1.0,), "3"), THETA, 0.5)
    assert chk.as_tuple() == (3.0, 3.0) and chk.passed
    chk = dpp_consistency_check(CylinderPayoff((0.5, 1.0), "clamp(x1 - x2, -2, 2)"), THETA, 0.75,
                                Resolution(nx_per_axis=(41, 41)))
    assert chk.passed


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.5, 6), st.floats(-1, 1))
def test_sublinear_invariants(a1, a2, cap, frac):
    # constants no larger than the cap keep the automatic axis width unchanged
    c = frac * cap
    times, res = (0.5, 1.0), Resolution(nx=31)
    f = f"sqcap({a1!r} * x1 + {a2!r} * x2, {cap!r})"
    g = f"clamp(x1 - x2, {-cap!r}, {cap!r})"

    def E(src):
        return evaluate_cylinder(CylinderPayoff(times, src), THETA, res)

    ef, eg = E(f), E(g)
    tol = 1e-9 * (1 + cap * cap)
    assert E(f"{f} + {c!r}") == pytest.approx(ef + c, abs=tol)
    assert -E(f"-({f})") <= ef + tol
    assert E(f"{f} + {g}") <= ef + eg + tol
    assert E(f"max({f}, {g})") >= max(ef, eg) - tol
    assert 0 - tol <= ef <= cap * cap + tol
    assert E(repr(c)) == c
