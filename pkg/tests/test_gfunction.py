from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gexpect.errors import InputError
from gexpect.gfunction import (
    Interval1D,
    MatrixList,
    degeneracy_report,
    g_scalar,
    g_value,
    sample_interval,
    theta_from_config,
    theta_to_config,
)

reals = st.floats(-50, 50, allow_nan=False)
sigmas = st.tuples(st.floats(0, 3), st.floats(0.01, 3)).map(lambda p: (min(p), max(p)))


def loop_g(mats, A):
    """Independent oracle: explicit max of 1/2 tr(g g^T A)."""
    best = -np.inf
    for g in mats:
        best = max(best, 0.5 * float(np.trace(g @ g.T @ A)))
    return best


@st.composite
def sym_matrices(draw, d):
    m = np.array(draw(st.lists(reals, min_size=d * d, max_size=d * d))).reshape(d, d)
    return (m + m.T) / 2


@st.composite
def matrix_lists(draw, d):
    k = draw(st.integers(1, 4))
    flat = draw(st.lists(st.floats(-3, 3), min_size=k * d * d, max_size=k * d * d))
    return MatrixList(np.array(flat).reshape(k, d, d))


def test_closed_form_values():
    th = Interval1D(1.0, 2.0)
    assert g_value(th, [[1.0]]) == 2.0
    assert g_value(th, [[-1.0]]) == -0.5
    assert g_value(th, [[0.0]]) == 0.0
    np.testing.assert_array_equal(g_scalar(th, [2.0, -2.0]), [4.0, -1.0])


def test_matrix_list_identity():
    th = MatrixList(np.eye(2)[None])
    assert g_value(th, np.diag([1.0, 3.0])) == 2.0


def test_input_validation():
    for lo, hi in [(-1, 1), (2, 1), (0, 0), (0, np.inf)]:
        with pytest.raises(InputError):
            Interval1D(lo, hi)
    with pytest.raises(InputError):
        g_value(Interval1D(1, 2), [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(InputError):
        g_value(MatrixList(np.eye(2)[None]), [[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(InputError):
        g_value(MatrixList(np.eye(2)[None]), [[np.nan, 0.0], [0.0, 1.0]])
    with pytest.raises(InputError):
        MatrixList(np.zeros((0, 2, 2)))
    with pytest.raises(InputError):
        MatrixList(np.zeros((1, 2, 3)))
    with pytest.raises(InputError):
        theta_from_config({"kind": "ball"})


def test_degeneracy():
    assert degeneracy_report(Interval1D(1.0, 2.0)) == (True, 0.5)
    assert degeneracy_report(Interval1D(0.0, 2.0)) == (False, 0.0)
    ok, beta = degeneracy_report(MatrixList([np.eye(2), 2 * np.eye(2)]))
    assert ok and beta == pytest.approx(0.5)
    ok, _ = degeneracy_report(MatrixList([np.diag([1.0, 0.0])]))
    assert not ok


def test_config_roundtrip():
    for th in (Interval1D(0.5, 1.5), MatrixList([np.eye(2), np.diag([2.0, 1.0])])):
        back = theta_from_config(theta_to_config(th))
        assert type(back) is type(th)
        if isinstance(th, Interval1D):
            assert back == th
        else:
            np.testing.assert_array_equal(back.matrices, th.matrices)


@settings(max_examples=200, deadline=None)
@given(sigmas, reals, reals, st.floats(0, 10))
def test_interval_axioms(sig, a, b, lam):
    th = Interval1D(*sig)
    G = lambda v: g_value(th, [[v]])  # noqa: E731
    if a >= b:
        assert G(a) >= G(b)
        assert G(a) - G(b) >= 0.5 * th.sigma_min**2 * (a - b) - 1e-9 * (1 + abs(a) + abs(b))
    assert G(a + b) <= G(a) + G(b) + 1e-9 * (1 + abs(a) + abs(b))
    assert G(lam * a) == pytest.approx(lam * G(a), rel=1e-12, abs=1e-12)
    assert G(a) == pytest.approx(0.5 * max(th.sigma_max**2 * a, th.sigma_min**2 * a), rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(sigmas, reals, st.integers(2, 9))
def test_sampled_interval_agrees(sig, a, samples):
    th = Interval1D(*sig)
    assert g_value(sample_interval(th, samples), [[a]]) == pytest.approx(g_value(th, [[a]]), rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 3).flatmap(lambda d: st.tuples(matrix_lists(d), sym_matrices(d), sym_matrices(d))),
       st.floats(0, 5))
def test_matrix_list_axioms(args, lam):
    th, A, B = args
    tol = 1e-9 * (1 + np.abs(A).sum() + np.abs(B).sum()) * (1 + np.abs(th.matrices).max() ** 2)
    assert g_value(th, A) == pytest.approx(loop_g(th.matrices, A), abs=tol)
    assert g_value(th, A + B) <= g_value(th, A) + g_value(th, B) + tol
    assert g_value(th, lam * A) == pytest.approx(lam * g_value(th, A), abs=tol * (1 + lam))
    psd = B @ B.T / (1 + np.abs(B).max())
    assert g_value(th, A + psd) >= g_value(th, A) - tol
    _, beta = degeneracy_report(th)
    assert g_value(th, A + psd) - g_value(th, A) >= beta * np.trace(psd) - tol * (1 + np.trace(psd))
