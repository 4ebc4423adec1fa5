"""Acceptance criteria, each run at its stated tolerance and runtime budget.

Every test prints one ``[PASS]``/``[FAIL]`` line (also collected in the
terminal summary).  Failing criteria fail honestly; see the notes in
README.md for the ones that cannot hold as stated.
"""

from __future__ import annotations

import itertools
import json
import time
from fractions import Fraction

import numpy as np
import sympy  # noqa: F401  (one-time import kept out of the criterion 1 timer)

from gexpect import upper_core as uc
from gexpect.cli import main
from gexpect.cylinder import CylinderPayoff, dpp_consistency_check, evaluate_cylinder
from gexpect.gfunction import Interval1D
from gexpect.gheat import Grid1D, centred_axis, g_normal_expectation, gheat_steps, initial_values
from gexpect.mc import (
    Constant,
    PiecewiseConstant,
    SimConfig,
    StateSwitch,
    bang_bang_policy,
    bang_bang_value,
    lower_bound_expectation,
    moment_bound_check,
    sample_paths,
)
from gexpect.payoff import Payoff
from gexpect.regularity import kolmogorov_report, moment_exponent_fit

THETA = Interval1D(1.0, 2.0)
MIXED = "sqcap(x1, 5) - sqcap(x1 - 1, 5)"

# Frozen reference values from tests/oracles.py (scipy quadrature).
QUAD_SQ_S2 = 3.9102399338112255      # E min(4 Z^2, 25)
QUAD_SQ_S1 = 0.9999988920708637      # E min(Z^2, 25)
QUAD_SQ_S15_T05 = 1.1249946528705363  # E min(1.125 Z^2, 25)


def _rel(a, b):
    return abs(a - b) / abs(b)


def random_payoff(rng: np.random.Generator, arity: int = 1, depth: int = 3) -> str:
    """Random expression in the payoff language over x1..x{arity}."""
    def leaf():
        if rng.random() < 0.7:
            return f"x{rng.integers(1, arity + 1)}"
        return repr(round(float(rng.uniform(-3, 3)), 3))

    def node(d):
        if d == 0:
            return leaf()
        kind = rng.integers(0, 8)
        a = node(d - 1)
        if kind == 0:
            return f"({a} + {node(d - 1)})"
        if kind == 1:
            return f"({a} - {node(d - 1)})"
        if kind == 2:
            return f"{round(float(rng.uniform(-2, 2)), 3)!r} * ({a})"
        if kind == 3:
            return f"min({a}, {node(d - 1)})"
        if kind == 4:
            return f"max({a}, {node(d - 1)})"
        if kind == 5:
            return f"abs({a})"
        if kind == 6:
            lo = round(float(rng.uniform(-4, 0)), 3)
            return f"clamp({a}, {lo!r}, {lo + round(float(rng.uniform(0.5, 6)), 3)!r})"
        return f"sqcap({a}, {round(float(rng.uniform(0.5, 5)), 3)!r})"

    return node(depth)


# -- 1 ----------------------------------------------------------------------------


def test_criterion_1_discrete_exactness(verdict):
    start = time.perf_counter()
    fam2, fam3 = uc.model_family("exm2"), uc.model_family("exm3")
    m2, m3 = fam2.build(64), fam3.build(64)
    x2, x3 = fam2.variable(m2), fam3.variable(m3)
    problems = []
    up2 = uc.family_upper_expectation(fam2)
    if up2 != 2:
        problems.append(f"exm2 E|X|={up2}")
    bad_tails = [n for n in range(2, 64) if uc.tail_functional(m2, x2, 1, n) != 1]
    if bad_tails:
        problems.append(f"exm2 tails != 1 at n={bad_tails}")
    up3 = uc.family_upper_expectation(fam3)
    if up3 != Fraction(25, 16):
        problems.append(f"exm3 E|X|={up3}")
    for n in (2, 4, 8):
        scaled = uc.scaled_capacity_decay(m3, x3, n)
        if scaled != Fraction(1, n):
            problems.append(f"exm3 n*c(X>=n)={scaled} != 1/{n} at n={n}")
        tail = uc.tail_functional(m3, x3, 1, n, inclusive=True)
        if tail != Fraction(1, 2) + Fraction(1, 2 * n):
            problems.append(f"exm3 E[X 1(X>=n)]={tail} at n={n}")
    elapsed = time.perf_counter() - start
    if elapsed >= 1.0:
        problems.append(f"runtime {elapsed:.2f}s >= 1s")
    detail = "; ".join(problems) if problems else "all exact"
    verdict(1, "discrete exactness", not problems, f"{detail} ({elapsed:.2f}s)")


# -- 2 ----------------------------------------------------------------------------


def test_criterion_2_sublinearity_suite(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(20240601)
    worst, oracle_gap, count = 0.0, 0.0, 0
    for _ in range(1000):
        n, k = int(rng.integers(2, 12)), int(rng.integers(1, 6))
        model = uc.random_model(rng, n, k, polar_fraction=0.2)
        rows = [list(map(float, r)) for r in model.measures]
        X, Y = rng.uniform(-10, 10, n), rng.uniform(-10, 10, n)
        lam, c = float(rng.uniform(0, 5)), float(rng.uniform(-5, 5))
        E = lambda v: float(uc.upper_expectation(model, v))  # noqa: E731
        ex, ey = E(X), E(Y)
        brute = max(sum(p * v for p, v in zip(r, X)) for r in rows)
        oracle_gap = max(oracle_gap, abs(ex - brute))
        worst = max(worst,
                    max(0.0, E(np.minimum(X, Y)) - ex),            # monotonicity (min(X,Y) <= X)
                    abs(E(X + c) - (ex + c)),                       # constant preserving
                    max(0.0, E(X + Y) - ex - ey),                   # subadditivity
                    abs(E(lam * X) - lam * ex))                     # positive homogeneity
        count += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and oracle_gap <= 1e-12 and elapsed < 10
    verdict(2, "sublinearity suite", ok,
            f"{count} models, worst axiom violation {worst:.1e}, oracle gap {oracle_gap:.1e} ({elapsed:.2f}s)")


# -- 3 ----------------------------------------------------------------------------


def _decaying_model(rng, n):
    """Random model whose point masses decay geometrically, so c({j}) is summable."""
    k = int(rng.integers(1, 5))
    q = float(rng.uniform(0.4, 0.8))
    P = rng.dirichlet(np.ones(n), size=k) * q ** np.arange(n)[None, :]
    P /= P.sum(axis=1, keepdims=True)
    return uc.FiniteModel(tuple(range(n)), P)


def test_criterion_3_capacity_suite(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    failures = []
    for i in range(200):
        n = int(rng.integers(3, 10))
        model = uc.random_model(rng, n, int(rng.integers(1, 5)), polar_fraction=0.2)
        pts = list(model.points)
        events = [list(s) for r in range(n + 1) for s in itertools.combinations(pts, r)]
        if not uc.choquet_suite(model, events).passed:
            failures.append(f"choquet model {i}")
        X = rng.integers(-6, 7, n)
        for p, alpha in ((1, 1.5), (2, 2.0), (0.5, 3.0)):
            if not uc.markov_bound_check(model, X, p, alpha)[2]:
                failures.append(f"markov model {i}")
        dec = _decaying_model(rng, 32)
        if not uc.borel_cantelli_check(dec, [[j] for j in range(32)]).passed:
            failures.append(f"borel-cantelli model {i}")
        base = rng.integers(0, 5, n)
        bump = rng.integers(0, 5, n)
        seq = [base + np.maximum(bump - j, 0) for j in range(6)]
        mc = uc.monotone_convergence_check(model, seq)
        if not (mc.nonincreasing and mc.converged):
            failures.append(f"monotone model {i}")
    # the worked examples
    m2 = uc.exm2(64)
    x2 = m2.variable()
    if not uc.choquet_suite(m2, [list(m2.points)[:k] for k in range(65)]).passed:
        failures.append("choquet exm2")
    lhs, rhs, ok = uc.markov_bound_check(m2, x2, 1, 3)
    if not (ok and lhs <= Fraction(2, 3)):
        failures.append("markov exm2")
    if uc.borel_cantelli_check(m2, [[j] for j in range(2, 65)]).convergent:
        failures.append("borel-cantelli exm2 divergence not flagged")
    seq = [m2.variable(lambda k, n=n: min(max(k - n, 0), 1)) for n in range(1, 9)]
    if uc.monotone_convergence_check(m2, seq).values != [Fraction(1, n + 1) for n in range(1, 9)]:
        failures.append("monotone exm2")
    m3 = uc.exm3(16)
    if not uc.markov_bound_check(m3, m3.variable(), 1, 3)[2]:
        failures.append("markov exm3")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 30
    verdict(3, "capacity suite", ok, f"{'; '.join(failures) or '200 models + examples pass'} ({elapsed:.2f}s)")


# -- 4 ----------------------------------------------------------------------------


def test_criterion_4_pde_envelope(verdict):
    start = time.perf_counter()
    v_sq = g_normal_expectation("sqcap(x1, 5)", THETA, 1.0, nx=2001)
    v_neg = g_normal_expectation("-sqcap(x1, 5)", THETA, 1.0, nx=2001)
    singles = [(g_normal_expectation("sqcap(x1, 5)", Interval1D(s, s), t, nx=2001), ref)
               for s, t, ref in ((2.0, 1.0, QUAD_SQ_S2), (1.0, 1.0, QUAD_SQ_S1), (1.5, 0.5, QUAD_SQ_S15_T05))]
    elapsed = time.perf_counter() - start
    r_sq, r_neg = _rel(v_sq, QUAD_SQ_S2), _rel(v_neg, -QUAD_SQ_S1)
    r_single = max(_rel(v, ref) for v, ref in singles)
    ok = r_sq <= 5e-3 and r_neg <= 5e-3 and r_single <= 5e-3 and elapsed < 60
    verdict(4, "PDE envelope", ok,
            f"sqcap {v_sq:.6f} vs sigma=2 quadrature {QUAD_SQ_S2:.6f} rel {r_sq:.2e}; "
            f"-sqcap {v_neg:.6f} vs sigma=1 rel {r_neg:.2e}; singletons rel {r_single:.2e} ({elapsed:.2f}s)")


# -- 5 ----------------------------------------------------------------------------


def test_criterion_5_scheme_properties(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    corpus = [random_payoff(rng) for _ in range(50)]
    axis = centred_axis(0.0, 1.0, THETA.sigma_max, 6.0, 401)
    grid = Grid1D.with_cfl(axis[0], axis[-1], axis.size, 1.0, THETA.sigma_max)
    x = grid.x
    failures, checked = [], 0
    for i, src in enumerate(corpus):
        phi = initial_values(Payoff.parse(src), x)
        psi = initial_values(Payoff.parse(corpus[(i + 1) % len(corpus)]), x)
        c = float(rng.uniform(-3, 3))
        stack = np.vstack([phi, psi, np.maximum(phi, psi), phi + np.abs(psi), phi + c, -phi])
        lo, hi = phi.min(), phi.max()
        tol = 1e-9 * (1 + np.abs(stack).max())
        for step, u in gheat_steps(stack, THETA, grid.h, grid.dt, grid.nt):
            checked += 1
            f, g, fg, fabs, fc, neg = u
            if np.any(fg < np.maximum(f, g) - tol) or np.any(fabs < f - tol):
                failures.append(f"monotonicity payoff {i} step {step}")
            if np.any(f < lo - tol) or np.any(f > hi + tol):
                failures.append(f"maximum principle payoff {i} step {step}")
            if np.max(np.abs(fc - f - c)) > tol:
                failures.append(f"translation payoff {i} step {step}")
            if np.any(f + neg < -tol):
                failures.append(f"E[phi] + E[-phi] < 0 payoff {i} step {step}")
            if failures:
                break
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 120
    verdict(5, "scheme properties", ok,
            f"{'; '.join(failures[:3]) or f'50 payoffs, {checked} time steps checked'} ({elapsed:.2f}s)")


# -- 6 ----------------------------------------------------------------------------


def test_criterion_6_dpp_consistency(verdict):
    start = time.perf_counter()
    two = evaluate_cylinder(CylinderPayoff((0.5, 1.0), "sqcap(x1 + x2, 5)"), THETA)
    one = evaluate_cylinder(CylinderPayoff((1.0,), "sqcap(x1, 5)"), THETA)
    gap = abs(two - one)
    rng = np.random.default_rng(6)
    failures = []
    for i in range(20):
        n = int(rng.integers(1, 3))
        times = tuple(sorted(round(float(t), 3) for t in rng.uniform(0.2, 1.0, n)))
        if n == 2 and times[1] - times[0] < 0.1:
            times = (times[0], times[0] + 0.2)
        cut = round(float(rng.uniform(0.05, 0.95)) * times[-1], 3)
        if cut in times:
            cut += 0.01
        chk = dpp_consistency_check(CylinderPayoff(times, random_payoff(rng, n, 2)), THETA, cut)
        if not chk.passed:
            failures.append(f"payoff {i}: {chk.direct:.5f} vs {chk.split:.5f} tol {chk.tolerance:.3g}")
    elapsed = time.perf_counter() - start
    ok = gap <= 3e-2 and not failures and elapsed < 300
    verdict(6, "DPP consistency", ok,
            f"two-step {two:.6f} vs one-step {one:.6f} gap {gap:.1e}; "
            f"{'; '.join(failures) or '20 random split checks pass'} ({elapsed:.2f}s)")


# -- 7 ----------------------------------------------------------------------------


def test_criterion_7_control_representation(verdict):
    start = time.perf_counter()
    cp = CylinderPayoff((1.0,), MIXED)
    cfg = SimConfig(200_000, 0.01, seed=17, antithetic=True, workers=4)
    bb = bang_bang_value(cp, THETA, cfg)
    sets = [
        [Constant(1.0), Constant(2.0)],
        [PiecewiseConstant([0.5], [2.0, 1.0]), PiecewiseConstant([0.5], [1.0, 2.0])],
        [StateSwitch(1.0, 2.0, 1.0), StateSwitch(0.5, 1.0, 2.0), StateSwitch(2.0, 1.5, 1.0)],
    ]
    worst = -np.inf
    for policies in sets:
        best, _ = lower_bound_expectation(policies, cp, cfg, THETA)
        worst = max(worst, best.mean - (bb.pde + 3 * best.std_error + 5e-2))
    elapsed = time.perf_counter() - start
    ok = bb.passed and worst <= 0 and elapsed < 300
    verdict(7, "control representation", ok,
            f"bang-bang {bb.mc.mean:.5f} +- {bb.mc.std_error:.1e} vs PDE {bb.pde:.5f} (gap {bb.gap:.1e}, "
            f"tol {bb.tolerance:.3g}); finite sets max excess over PDE+3SE+5e-2 {worst:.3g} ({elapsed:.2f}s)")


# -- 8 ----------------------------------------------------------------------------


def test_criterion_8_tightness_moment_bound(verdict):
    start = time.perf_counter()
    policy_bb, _ = bang_bang_policy(CylinderPayoff((1.0,), MIXED), THETA, 0.005)
    policies = [Constant(2.0), StateSwitch(0.5, 2.0, 1.0), policy_bb]
    pairs = [(0.0, 0.1), (0.0, 0.5), (0.0, 1.0), (0.1, 0.3), (0.2, 0.9), (0.3, 0.4), (0.4, 0.8), (0.5, 0.6),
             (0.5, 1.0), (0.7, 0.95)]
    failures, worst = [], 0.0
    for pol in policies:
        for s, t in pairs:
            chk = moment_bound_check(pol, s, t, SimConfig(20_000, 0.005, seed=8), THETA)
            worst = max(worst, chk.estimate / chk.bound)
            if not chk.holds:
                failures.append(f"{pol.label} ({s},{t}): {chk.estimate:.4g} > {chk.bound:.4g}")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 120
    verdict(8, "tightness moment bound", ok,
            f"{'; '.join(failures) or '30 (s,t,policy) cases hold'}, max ratio {worst:.3f} ({elapsed:.2f}s)")


# -- 9 ----------------------------------------------------------------------------


def test_criterion_9_kolmogorov_window(verdict):
    start = time.perf_counter()
    policy, _ = bang_bang_policy(CylinderPayoff((1.0,), MIXED), THETA, 1.0 / 256)
    paths = sample_paths(policy, SimConfig(512, 2.0**-12, seed=9, workers=4), 12, 1.0, THETA)
    rep = kolmogorov_report(paths, 4.0, 1.0, [0.2, 0.6])
    _, exponent = moment_exponent_fit(paths, 4.0)
    elapsed = time.perf_counter() - start
    ok = (rep.verdict(0.2) == "stable" and rep.verdict(0.6) == "diverging" and 1.9 <= exponent <= 2.1
          and elapsed < 180)
    verdict(9, "Kolmogorov window", ok,
            f"alpha=0.2 {rep.verdict(0.2)}, alpha=0.6 {rep.verdict(0.6)}, exponent {exponent:.4f} "
            f"[{rep.mode}] ({elapsed:.2f}s)")


# -- 10 ---------------------------------------------------------------------------


def test_criterion_10_reproducibility(verdict, tmp_path, capsys):
    start = time.perf_counter()
    runs = {
        "mc": ["mc", "--policy", "const:1.5", "--policy", "switch:0.5:2:1", "--paths", "20000", "--dt-sim", "0.05",
               "--antithetic", "--seed", "3", "--workers", "2"],
        "cylinder": ["cylinder", "--times", "0.3,0.6,1", "--payoff", "sqcap(x1+x2-x3,5)", "--workers", "2"],
        "holder": ["holder", "--policy", "switch:0.5:2:1", "--paths", "64", "--level", "8", "--seed", "5"],
        "gheat": ["gheat", "--nx", "801"],
        "discrete": ["discrete", "--example", "exm2", "--check", "upper"],
        "payoff": ["payoff", "certify", "sqcap(x1+x2,5)", "--box", "-3,3"],
    }
    mismatches = []
    for name, argv in runs.items():
        out = tmp_path / name
        main(argv + ["--out-dir", str(out)])
        manifest = out / f"{name}-manifest.json"
        json.loads(manifest.read_text())
        for workers in (1, 3, 8):
            code = main(["replay", str(manifest), "--workers", str(workers), "--out-dir", str(tmp_path / "replay")])
            if code != 0:
                mismatches.append(f"{name} workers={workers}")
    capsys.readouterr()
    elapsed = time.perf_counter() - start
    ok = not mismatches
    verdict(10, "reproducibility", ok,
            f"{'; '.join(mismatches) or '6 commands x 3 worker counts replay bitwise'} ({elapsed:.2f}s)")
