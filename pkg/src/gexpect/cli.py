"""``gexpect`` command line.

Every subcommand resolves its settings as flags > config file > defaults,
runs, prints a short human summary and writes a JSON run manifest holding the
resolved settings and every numeric result.  ``gexpect replay MANIFEST`` runs
the same settings again and compares the results bit for bit.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
from fractions import Fraction
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__
from .cylinder import CylinderPayoff, Resolution, dpp_consistency_check, reduce_cylinder
from .errors import GExpectError, PreconditionError
from .gfunction import Interval1D, theta_from_config
from .gheat import DEFAULT_CFL, Grid1D, as_interval, centred_axis, payoff_hint, solve_gheat
from .mc import (
    BangBangFromSolution,
    Constant,
    PiecewiseConstant,
    SimConfig,
    StateSwitch,
    bang_bang_policy,
    lower_bound_expectation,
    policy_value,
    sample_paths,
)
from .payoff import Payoff, certify
from .regularity import kolmogorov_report, moment_exponent_fit
from . import upper_core as uc

logger = logging.getLogger("gexpect")

COMMON_DEFAULTS = {"seed": 0, "out_dir": "gexpect-out"}

DEFAULTS = {
    "discrete": {"example": "exm2", "check": ["all"], "size": 64, "model": None},
    "gheat": {"theta_min": 1.0, "theta_max": 2.0, "payoff": "sqcap(x1,5)", "t": 1.0, "x": 0.0,
              "nx": 2001, "cfl": DEFAULT_CFL, "domain_width": None, "dump": False},
    "cylinder": {"theta_min": 1.0, "theta_max": 2.0, "payoff": "sqcap(x1+x2,5)", "times": [0.5, 1.0],
                 "nx": None, "cfl": DEFAULT_CFL, "workers": 1, "split": None},
    "mc": {"theta_min": 1.0, "theta_max": 2.0, "payoff": "sqcap(x1,5)-sqcap(x1-1,5)", "times": [1.0],
           "policy": ["bangbang"], "paths": 20000, "dt_sim": 0.01, "antithetic": False, "workers": 1,
           "dump_paths": 0, "pde": False, "nx": 2001, "scheme_tolerance": 5e-2},
    "holder": {"theta_min": 1.0, "theta_max": 2.0, "paths": 512, "level": 12, "alpha": [0.2, 0.45, 0.6],
               "p": 4.0, "epsilon": 1.0, "policy": "bangbang", "payoff": "sqcap(x1,5)-sqcap(x1-1,5)",
               "workers": 1},
    "payoff": {"action": "certify", "expr": None, "box": [-10.0, 10.0], "samples": 10000, "arity": None},
}

# options whose value may legitimately start with '-' (negative numbers, lists)
_VALUE_FLAGS = {"--box", "--x", "--times", "--alpha", "--payoff", "--theta-min", "--theta-max", "--split"}


class UsageError(GExpectError):
    pass


# -- small parsers -------------------------------------------------------------


def _floats(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma separated list of numbers, got {text!r}") from None


def parse_policy(text: str, theta: Interval1D) -> object:
    """``const:S`` | ``piecewise:B1,B2:S1,S2,S3`` | ``switch:THR:IN:OUT``; ``bangbang`` is built elsewhere."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "const":
            return Constant(float(rest))
        if kind == "piecewise":
            b, s = rest.split(":")
            return PiecewiseConstant(_floats(b), _floats(s))
        if kind == "switch":
            thr, a, c = rest.split(":")
            return StateSwitch(float(thr), float(a), float(c))
    except ValueError:
        pass
    raise UsageError(f"cannot parse policy {text!r}")


def _json_value(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {str(k): _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def _theta(cfg: dict) -> Interval1D:
    return Interval1D(cfg["theta_min"], cfg["theta_max"])


def _out(cfg: dict) -> Path:
    d = Path(cfg["out_dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


# -- subcommands -----------------------------------------------------------------
# Each takes the resolved config and returns (results, output files, ok, text).


def _row(name, lhs, rhs, passed, detail=""):
    return uc.CheckRow(name, lhs, rhs, bool(passed), detail)


def _claimed_rows(example: str, checks: set, size: int) -> list:
    rows = []
    fam = uc.model_family(example)
    model = fam.build(size)
    x = fam.variable(model)
    want = lambda name: "all" in checks or name in checks  # noqa: E731
    if want("upper"):
        value = uc.family_upper_expectation(fam) if example != "exm1" else uc.upper_expectation(model, x)
        ref = {"exm2": 2, "exm3": Fraction(25, 16), "exm1": 1}[example]
        rows.append(_row("upper", value, ref, value == ref))
    if want("tails") and example == "exm2":
        for n in range(2, size):
            v = uc.tail_functional(model, x, 1, n)
            rows.append(_row(f"tail[n={n}]", v, 1, v == 1))
    if want("tails") and example == "exm3":
        for n in (2, 4, 8):
            v = uc.tail_functional(model, x, 1, n, inclusive=True)
            ref = Fraction(1, 2) + Fraction(1, 2 * n)
            rows.append(_row(f"tail_ge[n={n}]", v, ref, v == ref))
    if want("scaled") and example == "exm3":
        for n in (2, 4, 8):
            v = uc.scaled_capacity_decay(model, x, n)
            rows.append(_row(f"n_capacity[n={n}]", v, Fraction(1, n), v == Fraction(1, n),
                             "claimed 1/n; enumeration gives the lhs"))
    if want("capacity") and example == "exm2":
        rows.append(_row("capacity[{1}]", uc.capacity(model, [1]), 1, uc.capacity(model, [1]) == 1))
        for m in range(2, size + 1):
            c = uc.capacity(model, [m])
            rows.append(_row(f"capacity[{{{m}}}]", c, Fraction(1, m), c == Fraction(1, m)))
    if want("markov") and example in ("exm2", "exm3"):
        lhs = uc.capacity_of_mask(model, np.array([float(v) > 3 for v in x]))
        rhs = uc.as_number(Fraction(uc.family_upper_expectation(fam)) / 3)
        rows.append(_row("markov[p=1,alpha=3]", lhs, rhs, float(lhs) <= float(rhs) + 1e-12))
    if want("membership"):
        m = uc.family_membership(fam, 1)
        expect = {"exm2": (True, False, False), "exm3": (True, False, False), "exm1": (True, True, False)}[example]
        got = (m.in_Lp, m.in_Lp_b, m.in_Lp_c)
        rows.append(_row("membership[Lp,Lp_b,Lp_c]", list(got), list(expect), got == expect and m.stable,
                         "" if m.stable else "verdict not stabilised"))
    if want("choquet"):
        pts = list(model.points)
        step = max(1, len(pts) // 32)
        events = [[], pts] + [pts[:k] for k in range(1, len(pts) + 1, step)]
        rep = uc.choquet_suite(model, events)
        rows.append(_row("choquet", len(rep.failures()), 0, rep.passed))
    if want("borel-cantelli") and example == "exm2":
        div = uc.borel_cantelli_check(model, [[n] for n in range(2, size + 1)])
        rows.append(_row("borel_cantelli[A_n={n}]", "divergent" if not div.convergent else "convergent",
                         "divergent", not div.convergent, div.reason))
        sq = [[n * n] for n in range(2, int(math.isqrt(size)) + 1)]
        sq += [[] for _ in range(len(sq))]
        rep = uc.borel_cantelli_check(model, sq)
        rows.append(_row("borel_cantelli[A_n={n^2}]", rep.limsup_capacity, rep.tail_sums[-1] * 10, rep.passed))
    if want("monotone") and example == "exm2":
        seq = [model.variable(lambda k, n=n: min(max(k - n, 0), 1)) for n in range(1, 9)]
        rep = uc.monotone_convergence_check(model, seq)
        expected = [Fraction(1, n + 1) for n in range(1, 9)]
        rows.append(_row("monotone_convergence", rep.values[-1], expected[-1],
                         rep.nonincreasing and list(rep.values) == expected))
    if want("ui"):
        try:
            rep = uc.uniform_integrability_check(fam, epsilon=0.5)
            rows.append(_row("uniform_integrability", rep.worst, rep.epsilon, rep.verified, f"delta={rep.delta}"))
        except PreconditionError as exc:
            rows.append(_row("uniform_integrability", "n/a", "n/a", example in ("exm2", "exm3"), str(exc)))
    return rows


def _model_rows(path: str) -> list:
    doc = _load_toml(path)
    model, variables = uc.load_discrete_config(doc)
    rows = []
    for name, x in variables.items():
        value, label = uc.upper_expectation(model, x, witness=True)
        rows.append(_row(f"upper[{name}]", value, label, True))
    rep = uc.choquet_suite(model, [[p] for p in model.points] + [list(model.points)])
    rows.append(_row("choquet", len(rep.failures()), 0, rep.passed))
    return rows


def cmd_discrete(cfg: dict):
    checks = set(cfg["check"])
    if cfg.get("model"):
        rows = _model_rows(cfg["model"])
        tag = Path(cfg["model"]).stem
    else:
        if cfg["example"] not in ("exm1", "exm2", "exm3"):
            raise UsageError(f"unknown example {cfg['example']!r}")
        rows = _claimed_rows(cfg["example"], checks, int(cfg["size"]))
        tag = cfg["example"]
    if not rows:
        raise UsageError(f"no checks selected for {tag}: {sorted(checks)}")
    path = _out(cfg) / f"discrete-{tag}.csv"
    path.write_text(uc.report_csv(rows))
    results = {r.name: {"lhs": _json_value(r.lhs), "rhs": _json_value(r.rhs), "pass": r.passed} for r in rows}
    return results, [str(path)], all(r.passed for r in rows), uc.report_summary(rows)


def cmd_gheat(cfg: dict):
    theta = _theta(cfg)
    phi = Payoff.parse(cfg["payoff"])
    t, x = float(cfg["t"]), float(cfg["x"])
    axis = centred_axis(x, t, theta.sigma_max, payoff_hint(phi), int(cfg["nx"]), cfg["domain_width"])
    grid = Grid1D.with_cfl(axis[0], axis[-1], axis.size, t, theta.sigma_max, cfg["cfl"])
    sol = solve_gheat(phi, theta, grid, cfl=cfg["cfl"])
    value = float(sol.values[axis.size // 2])
    outputs = []
    if cfg["dump"]:
        path = _out(cfg) / "gheat-solution.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "u"])
            w.writerows(zip(grid.x.tolist(), sol.values.tolist()))
        outputs.append(str(path))
    results = {"value": value, "grid": grid.to_dict(), "warnings": sol.warnings}
    return results, outputs, True, repr(value)


def cmd_cylinder(cfg: dict):
    theta = _theta(cfg)
    times = _floats(cfg["times"])
    cp = CylinderPayoff(tuple(times), Payoff.parse(cfg["payoff"], len(times)))
    res = Resolution(cfg["nx"], cfg["cfl"], None, int(cfg["workers"]))
    out = reduce_cylinder(cp, theta, res)
    info = out.manifest()
    info.pop("seconds")
    results = {"value": out.value, "grid": info}
    ok, text = True, repr(out.value)
    if cfg["split"] is not None:
        chk = dpp_consistency_check(cp, theta, float(cfg["split"]), res)
        results["dpp"] = {"direct": chk.direct, "split": chk.split, "tolerance": chk.tolerance, "pass": chk.passed}
        ok = chk.passed
        text += f"\ndpp: direct={chk.direct!r} split={chk.split!r} tol={chk.tolerance:.3g} {'PASS' if ok else 'FAIL'}"
    return results, [], ok, text


def _build_policies(cfg: dict, theta: Interval1D, cp: CylinderPayoff | None, dt: float):
    policy_texts = cfg["policy"] if isinstance(cfg["policy"], list) else [cfg["policy"]]
    out, pde = [], None
    for text in policy_texts:
        if text == "bangbang":
            if cp is None or cp.n != 1:
                raise UsageError("bangbang needs a single payoff time")
            pol, pde = bang_bang_policy(cp, theta, dt, nx=int(cfg.get("nx", 2001)))
            out.append(pol)
        else:
            pol = parse_policy(text, theta)
            pol.validate(theta)
            out.append(pol)
    return out, pde


def cmd_mc(cfg: dict):
    theta = _theta(cfg)
    times = _floats(cfg["times"])
    cp = CylinderPayoff(tuple(times), Payoff.parse(cfg["payoff"], len(times)))
    sim = SimConfig(int(cfg["paths"]), float(cfg["dt_sim"]), int(cfg["seed"]), bool(cfg["antithetic"]),
                    int(cfg["workers"]))
    policies, pde = _build_policies(cfg, theta, cp, sim.dt_sim)
    best, table = lower_bound_expectation(policies, cp, sim, theta)
    if cfg["pde"] and pde is None:
        from .cylinder import evaluate_cylinder

        pde = evaluate_cylinder(cp, theta)
    results = {"estimates": [{"policy": e.label, "mean": e.mean, "std_error": e.std_error, "n_paths": e.n_paths}
                             for e in table],
               "best": {"policy": best.label, "mean": best.mean, "std_error": best.std_error}}
    lines = [f"{e.label}: {e.mean!r} +- {e.std_error:.3g}" for e in table]
    ok = True
    if pde is not None:
        tol = 3 * best.std_error + float(cfg["scheme_tolerance"])
        gap = best.mean - pde
        bang = any(isinstance(p, BangBangFromSolution) for p in policies)
        ok = abs(gap) <= tol if bang else gap <= tol
        results["pde"] = {"value": pde, "gap": gap, "tolerance": tol, "pass": ok}
        lines.append(f"pde: {pde!r}  gap={gap:.4g}  tol={tol:.3g}  {'PASS' if ok else 'FAIL'}")
        if not bang:
            lines.append("(finite policy set: the MC value is a lower bound)")
    outputs = []
    k = int(cfg["dump_paths"])
    if k > 0:
        horizon = times[-1]
        level = max(1, math.ceil(math.log2(horizon / sim.dt_sim)))
        paths = sample_paths(policies[0], SimConfig(k, sim.dt_sim, sim.seed, False, 1), level, horizon)
        path = _out(cfg) / "mc-paths.csv"
        grid = horizon * np.arange(paths.shape[1]) / (paths.shape[1] - 1)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"path{i}" for i in range(k)])
            w.writerows(np.column_stack([grid, paths.T]).tolist())
        outputs.append(str(path))
    return results, outputs, ok, "\n".join(lines)


def cmd_holder(cfg: dict):
    theta = _theta(cfg)
    level = int(cfg["level"])
    sim = SimConfig(int(cfg["paths"]), 2.0**-level, int(cfg["seed"]), False, int(cfg["workers"]))
    if cfg["policy"] == "bangbang":
        cp = CylinderPayoff((1.0,), Payoff.parse(cfg["payoff"]))
        policy, _ = bang_bang_policy(cp, theta, 1.0 / 256)
    else:
        policy = parse_policy(cfg["policy"], theta)
    paths = sample_paths(policy, sim, level, 1.0, theta)
    alphas = _floats(cfg["alpha"])
    rep = kolmogorov_report(paths, float(cfg["p"]), float(cfg["epsilon"]), alphas)
    c_hat, e_hat = moment_exponent_fit(paths, float(cfg["p"]))
    path = _out(cfg) / "holder.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "level", "mean_M_p", "verdict"])
        for r in rep.rows:
            w.writerow([r.alpha, r.level, repr(r.mean_mp), rep.verdict(r.alpha)])
    results = {"rows": [[r.alpha, r.level, r.mean_mp] for r in rep.rows],
               "verdicts": {repr(a): v for a, v in rep.verdicts.items()},
               "window": rep.window, "mode": rep.mode, "exponent_fit": [c_hat, e_hat]}
    lines = [f"alpha={a:g}: {v}  (growth {', '.join(f'{g:.1%}' for g in rep.growth[a])})"
             for a, v in rep.verdicts.items()]
    lines.append(f"window alpha < {rep.window:g}; moment exponent fit {e_hat:.4f} (c={c_hat:.4g})")
    lines.append(rep.note)
    return results, [str(path)], True, "\n".join(lines)


def cmd_payoff(cfg: dict):
    if cfg["action"] != "certify":
        raise UsageError(f"unknown payoff action {cfg['action']!r}")
    if not cfg["expr"]:
        raise UsageError("payoff certify needs an expression")
    box = _floats(cfg["box"])
    if len(box) != 2:
        raise UsageError("--box takes lo,hi")
    arity = cfg["arity"]
    if arity is None:
        from .payoff import max_variable, parse

        arity = max(max_variable(parse(cfg["expr"], 3)), 1)
    cert = certify(Payoff.parse(cfg["expr"], int(arity)), box, int(cfg["samples"]), seed=int(cfg["seed"]))
    results = {"bound_estimate": cert.bound_estimate, "lipschitz_estimate": cert.lipschitz_estimate,
               "structural_lipschitz": cert.structural_lipschitz, "structural_bound": cert.structural_bound,
               "box": cert.box}
    text = (f"bound {cert.bound_estimate:g} (structural {cert.structural_bound:g})\n"
            f"lipschitz {cert.lipschitz_estimate:g} (structural {cert.structural_lipschitz:g})")
    return results, [], True, text


COMMANDS = {"discrete": cmd_discrete, "gheat": cmd_gheat, "cylinder": cmd_cylinder, "mc": cmd_mc,
            "holder": cmd_holder, "payoff": cmd_payoff}


# -- config resolution and manifests ------------------------------------------------


def _load_toml(path: str) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"bad TOML in {path}: {exc}") from None


def _config_layer(doc: dict, command: str) -> dict:
    """Top-level keys plus a ``[command]`` table; ``theta = {...}`` maps to theta_min/max."""
    layer = {k: v for k, v in doc.items() if not isinstance(v, dict) or k == "theta"}
    layer.update(doc.get(command, {}))
    theta = layer.pop("theta", None)
    if theta is not None:
        th = as_interval(theta_from_config(theta))
        layer["theta_min"], layer["theta_max"] = th.sigma_min, th.sigma_max
    return {k.replace("-", "_"): v for k, v in layer.items()}


def resolve(command: str, flags: dict, config_path: str | None) -> dict:
    cfg = dict(COMMON_DEFAULTS)
    cfg.update(DEFAULTS[command])
    if config_path:
        layer = _config_layer(_load_toml(config_path), command)
        unknown = set(layer) - set(cfg) - {"config"}
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(layer)
    cfg.update(flags)
    for key in ("times", "alpha", "box"):
        if key in cfg and isinstance(cfg[key], str):
            cfg[key] = _floats(cfg[key])
    return cfg


def _versions() -> dict:
    out = {"gexpect": __version__, "python": platform.python_version()}
    for pkg in ("numpy", "sympy"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def run(command: str, cfg: dict, argv: list | None = None) -> tuple[int, dict]:
    start = time.perf_counter()
    results, outputs, ok, text = COMMANDS[command](cfg)
    elapsed = time.perf_counter() - start
    manifest = {
        "command": command,
        "argv": argv or [],
        "config": _json_value(cfg),
        "seed": cfg["seed"],
        "versions": _versions(),
        "timings": {"seconds": elapsed},
        "outputs": outputs,
        "results": _json_value(results),
        "passed": ok,
    }
    path = _out(cfg) / f"{command}-manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    manifest["outputs"].append(str(path))
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(text)
    print(f"manifest: {path}")
    return (0 if ok else 1), manifest


def replay(manifest_path: str, workers: int | None = None, out_dir: str | None = None) -> tuple[int, dict]:
    """Rerun a manifest's resolved config; 0 if every result matches bit for bit."""
    try:
        old = json.loads(Path(manifest_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest {manifest_path}: {exc}") from None
    command = old.get("command")
    if command not in COMMANDS:
        raise UsageError(f"manifest has unknown command {command!r}")
    cfg = dict(old["config"])
    if workers is not None and "workers" in cfg:
        cfg["workers"] = workers
    if out_dir is not None:
        cfg["out_dir"] = out_dir
    results, _, _, _ = COMMANDS[command](cfg)
    new = _json_value(results)
    same = json.dumps(new, sort_keys=True) == json.dumps(old["results"], sort_keys=True)
    diffs = [] if same else _diff(old["results"], new)
    print("replay: identical" if same else "replay: MISMATCH\n" + "\n".join(diffs[:20]))
    return (0 if same else 1), {"identical": same, "differences": diffs}


def _diff(a, b, path="results") -> list:
    if isinstance(a, dict) and isinstance(b, dict):
        out = []
        for k in sorted(set(a) | set(b)):
            out += _diff(a.get(k), b.get(k), f"{path}.{k}")
        return out
    if isinstance(a, list) and isinstance(b, list) and len(a) == len(b):
        out = []
        for i, (x, y) in enumerate(zip(a, b)):
            out += _diff(x, y, f"{path}[{i}]")
        return out
    return [] if a == b else [f"{path}: {a!r} != {b!r}"]


# -- argument parsing -------------------------------------------------------------


def _global_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="RNG seed (default 0)")
    p.add_argument("--out-dir", dest="out_dir", default=argparse.SUPPRESS, help="where CSV/JSON artifacts go")
    p.add_argument("--config", default=argparse.SUPPRESS, help="TOML config file (flags override it)")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def _theta_flags(p):
    p.add_argument("--theta-min", dest="theta_min", type=float, default=argparse.SUPPRESS)
    p.add_argument("--theta-max", dest="theta_max", type=float, default=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parent = _global_parent()
    parser = argparse.ArgumentParser(prog="gexpect", parents=[parent],
                                     description="Sublinear expectations: finite models, G-heat PDE, "
                                                 "cylinder payoffs and controlled Monte Carlo.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    d = sub.add_parser("discrete", parents=[parent], help="finite-model capacity and expectation checks")
    d.add_argument("--example", choices=["exm1", "exm2", "exm3"], default=S)
    d.add_argument("--check", action="append", default=S,
                   choices=["all", "upper", "tails", "scaled", "capacity", "markov", "membership", "choquet",
                            "borel-cantelli", "monotone", "ui"])
    d.add_argument("--size", type=int, default=S, help="truncation parameter N (default 64)")
    d.add_argument("--model", default=S, help="TOML file with points, measures and variables")

    g = sub.add_parser("gheat", parents=[parent], help="G-heat equation value at one point")
    _theta_flags(g)
    g.add_argument("--payoff", default=S)
    g.add_argument("--t", type=float, default=S)
    g.add_argument("--x", type=float, default=S)
    g.add_argument("--nx", type=int, default=S)
    g.add_argument("--cfl", type=float, default=S)
    g.add_argument("--domain-width", dest="domain_width", type=float, default=S, help="half-width override")
    g.add_argument("--dump", action="store_true", default=S, help="write the (x, u) profile as CSV")

    c = sub.add_parser("cylinder", parents=[parent], help="cylinder payoff by backward reduction")
    _theta_flags(c)
    c.add_argument("--times", default=S, help="comma separated increasing times")
    c.add_argument("--payoff", default=S)
    c.add_argument("--nx", type=int, default=S)
    c.add_argument("--cfl", type=float, default=S)
    c.add_argument("--workers", type=int, default=S)
    c.add_argument("--split", type=float, default=S, help="also run the split-time consistency check")

    m = sub.add_parser("mc", parents=[parent], help="controlled Monte Carlo")
    _theta_flags(m)
    m.add_argument("--policy", action="append", default=S,
                   help="bangbang | const:S | piecewise:B1,..:S1,.. | switch:THR:IN:OUT (repeatable)")
    m.add_argument("--payoff", default=S)
    m.add_argument("--times", default=S)
    m.add_argument("--paths", type=int, default=S)
    m.add_argument("--dt-sim", dest="dt_sim", type=float, default=S)
    m.add_argument("--antithetic", action="store_true", default=S)
    m.add_argument("--workers", type=int, default=S)
    m.add_argument("--dump-paths", dest="dump_paths", type=int, default=S)
    m.add_argument("--pde", action="store_true", default=S, help="also compute the PDE cross value")
    m.add_argument("--nx", type=int, default=S)

    h = sub.add_parser("holder", parents=[parent], help="dyadic Hoelder statistics of simulated paths")
    _theta_flags(h)
    h.add_argument("--paths", type=int, default=S)
    h.add_argument("--level", type=int, default=S)
    h.add_argument("--alpha", default=S, help="comma separated exponents")
    h.add_argument("--p", type=float, default=S)
    h.add_argument("--epsilon", type=float, default=S)
    h.add_argument("--policy", default=S)
    h.add_argument("--workers", type=int, default=S)

    pay = sub.add_parser("payoff", parents=[parent], help="payoff expression tools")
    pay.add_argument("action", choices=["certify"])
    pay.add_argument("expr")
    pay.add_argument("--box", default=S, help="lo,hi applied to every variable")
    pay.add_argument("--samples", type=int, default=S)
    pay.add_argument("--arity", type=int, default=S)

    r = sub.add_parser("replay", parents=[parent], help="rerun a manifest and compare results bitwise")
    r.add_argument("manifest")
    r.add_argument("--workers", type=int, default=None)
    return parser


def _fix_negative_values(argv: list) -> list:
    """Glue ``--box -10,10`` into ``--box=-10,10`` so argparse keeps the value."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and len(argv[i + 1]) > 1 \
                and (argv[i + 1][1].isdigit() or argv[i + 1][1] == "."):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv: list | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(_fix_negative_values(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = vars(ns)
    command = flags.pop("command")
    logging.basicConfig(level=logging.INFO if flags.pop("verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if command == "replay":
            code, _ = replay(flags["manifest"], flags.get("workers"), flags.get("out_dir"))
            return code
        config_path = flags.pop("config", None)
        cfg = resolve(command, flags, config_path)
        code, _ = run(command, cfg, argv)
        return code
    except GExpectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
