"""Command-line interface: classify / simulate / coercivity / steer / examples.

Exit codes encode the classification trichotomy so batch studies can branch
on them: 0 linear test holds, 10 invariant manifold, 20 drift (including the
order-0 nonlinear drift), 2 input error.  simulate exits 30 on divergence,
coercivity exits 11 on manifold-class input, steer exits 21 when the Kalman
condition fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys as _sys
from fractions import Fraction
from typing import Dict, List, Optional

import numpy as np

from . import ratlin
from .brunovsky import build_transform, prepare
from .coercivity import ManifoldClassRejected, build_problem, estimate_tstar
from .examples import (
    SystemFileError,
    example_doc,
    example_names,
    example_system,
    load_system,
)
from .lie_analysis import (
    Classification,
    ControlSystem,
    build_report,
    classify,
    compute_s2,
    extract_quadratic_data,
)
from .linsynth import SingularGramian, hum_control, verify_steering
from .manifold import build_m2
from .polyfield import DegreeCapExceeded, format_rational
from .simulate import (
    ControlSignal,
    DivergenceError,
    bump_family,
    drift_series,
    integrate,
    manifold_residual_sup,
    norms,
    primitives,
    skewed_profile,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_MANIFOLD = 10
EXIT_COERCIVITY_MANIFOLD = 11
EXIT_DRIFT = 20
EXIT_KALMAN_FAILS = 21
EXIT_DIVERGENCE = 30


def _rat_vec(v) -> List[str]:
    return [format_rational(Fraction(x)) for x in v]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def analysis_report(sys_: ControlSystem, coercivity_grid: int = 64,
                    coercivity_tmax: float = 5.0) -> Dict:
    """Full machine-readable classification report for one system."""
    report = build_report(extract_quadratic_data(sys_))
    cls = classify(sys_, report)
    s2 = compute_s2(report)
    doc: Dict = {
        "name": sys_.name,
        "n": sys_.n,
        "kind": sys_.kind,
        "gamma": sys_.gamma,
        "classification": {
            "verdict": cls.verdict,
            "d": cls.d,
            "k": cls.k,
            "d_k": _rat_vec(cls.d_k) if cls.d_k is not None else None,
            "d0": _rat_vec(cls.d0) if cls.d0 is not None else None,
            "s2_in_s1": cls.s2_in_s1,
        },
        "kalman": report.kalman,
        "s1_basis": [_rat_vec(v) for v in report.s1_basis],
        "s2_basis": [_rat_vec(v) for v in s2],
        "norm_threshold": cls.smallness,
    }
    if report.d >= 1:
        tr = build_transform(report)
        doc["brunovsky"] = {
            "alpha": _rat_vec(tr.alpha),
            "beta": _rat_vec(tr.beta),
            "already_prepared": tr.is_identity,
        }
        m2 = build_m2(report)
        from .examples import records_from_component

        doc["manifold"] = {
            "note": "second-order local approximation around the origin",
            "diag_coeffs": [_rat_vec(v) for v in m2.diag_coeffs],
            "cross_coeffs": [
                {"i": i, "j": j, "vec": _rat_vec(v)} for (i, j, v) in m2.cross_coeffs
            ],
            "q_polynomial": [
                records_from_component(p) for p in m2.q_polynomial().components
            ],
        }
    else:
        doc["brunovsky"] = None
        doc["manifold"] = None
    if cls.verdict in (Classification.VERDICT_DRIFT, Classification.VERDICT_DRIFT0):
        problem = build_problem(sys_)
        rep = estimate_tstar(problem, T_max=coercivity_tmax, N=coercivity_grid, sweep_points=24)
        doc["coercivity_summary"] = {
            "status": rep.status,
            "tstar_est": rep.tstar_est,
            "tstar_err": rep.tstar_err,
            "grid_N": rep.grid_N,
            "T_max": rep.T_max,
        }
    else:
        doc["coercivity_summary"] = {"status": "not_applicable"}
    doc["exit_code"] = exit_code_for(cls)
    return doc


def exit_code_for(cls: Classification) -> int:
    if cls.verdict == Classification.VERDICT_LINEAR:
        return EXIT_OK
    if cls.verdict == Classification.VERDICT_MANIFOLD:
        return EXIT_MANIFOLD
    return EXIT_DRIFT


def report_to_json(doc: Dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load_from_args(args) -> ControlSystem:
    if getattr(args, "example", None):
        return example_system(args.example)
    if getattr(args, "system", None):
        with open(args.system, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SystemFileError(f"{args.system}: invalid JSON at line {exc.lineno}: {exc.msg}")
        return load_system(doc)
    raise SystemFileError("provide --system FILE or --example NAME")


def _write_or_print(text: str, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        _sys.stdout.write(text)


def parse_control_spec(spec: str, T: float, dt: float) -> ControlSignal:
    spec = spec.strip()
    N = max(64, int(round(T / dt)))
    if spec.startswith("csv:"):
        data = np.loadtxt(spec[4:], delimiter=",", skiprows=1, ndmin=2)
        return ControlSignal.from_samples(data[:, 0], data[:, 1], provenance=spec)
    name, _, inner = spec.partition("(")
    if not inner.endswith(")"):
        raise ValueError(f"malformed control spec {spec!r}")
    parts = [p for p in inner[:-1].split(",") if p.strip()]
    if name == "bump":
        a, b, amp = (float(p) for p in parts)
        return bump_family(T, (a, b), amplitude=amp, N=N)
    if name == "sinusoid":
        freq, amp = (float(p) for p in parts)
        return ControlSignal.sinusoid(T, freq, amp, N=N)
    if name == "dilation":
        korder = int(parts[0].replace("phi_", ""))
        lam, mu = float(parts[1]), float(parts[2])
        prof = skewed_profile(korder)
        t = np.linspace(0.0, T, N + 1)
        vals = lam * mu**korder * prof(mu * t)
        return ControlSignal.from_samples(t, vals, provenance=spec)
    raise ValueError(f"unknown control spec {spec!r}")


def _trajectory_csv(traj) -> str:
    n = traj.n
    head = "t," + ",".join(f"x{i + 1}" for i in range(n)) + ",u"
    lines = [head]
    uvals = traj.control(traj.t)
    for i, t in enumerate(traj.t):
        row = [_fmt(t)] + [_fmt(v) for v in traj.states[i]] + [_fmt(float(uvals[i]))]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_classify(args) -> int:
    sys_ = _load_from_args(args)
    doc = analysis_report(sys_)
    _write_or_print(report_to_json(doc), args.out)
    return doc["exit_code"]


def cmd_examples(args) -> int:
    if args.action == "list":
        for name in example_names():
            _sys.stdout.write(name + "\n")
        return EXIT_OK
    doc = example_doc(args.name)
    _write_or_print(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    sys_ = _load_from_args(args)
    u = parse_control_spec(args.control, args.T, args.dt)
    outdir = args.out or "."
    os.makedirs(outdir, exist_ok=True)
    try:
        traj = integrate(sys_, [0.0] * sys_.n, u, args.dt)
    except DivergenceError as exc:
        _sys.stderr.write(f"divergence: {exc}\n")
        return EXIT_DIVERGENCE
    with open(os.path.join(outdir, "trajectory.csv"), "w", encoding="utf-8") as fh:
        fh.write(_trajectory_csv(traj))
    report = build_report(extract_quadratic_data(sys_))
    cls = classify(sys_, report)
    lines = ["t,value"]
    if report.d >= 1:
        m2 = build_m2(report)
        if cls.d_k is not None:
            series = drift_series(traj, cls, m2)
            kind = "drift"
        else:
            pperp = np.asarray(ratlin.to_float(m2.Pperp))
            g2f = m2.g2_float()
            series = np.linalg.norm(traj.states @ pperp.T - g2f(traj.states), axis=1)
            kind = "residual"
        for t, v in zip(traj.t, series):
            lines.append(f"{_fmt(t)},{_fmt(float(v))}")
        with open(os.path.join(outdir, f"{kind}_series.csv"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    rep = norms(u, m_max=min(3, (len(u.t) - 1) // 2), k_max=max(2, cls.k or 2))
    with open(os.path.join(outdir, "norms.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(rep.as_dict(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_coercivity(args) -> int:
    sys_ = _load_from_args(args)
    try:
        problem = build_problem(sys_)
    except ManifoldClassRejected as exc:
        _sys.stderr.write(f"{exc}\n")
        return EXIT_COERCIVITY_MANIFOLD
    rep = estimate_tstar(problem, T_max=args.Tmax, N=args.grid)
    outdir = args.out or "."
    os.makedirs(outdir, exist_ok=True)
    lines = ["t,lambda_min"]
    for t, lam in zip(rep.sweep_t, rep.sweep_lambda):
        lines.append(f"{_fmt(t)},{_fmt(lam)}")
    with open(os.path.join(outdir, "coercivity.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    doc = {
        "tstar_est": rep.tstar_est,
        "tstar_err": rep.tstar_err,
        "status": rep.status,
        "grid_N": rep.grid_N,
        "T_max": rep.T_max,
        "crossings": list(rep.crossings),
        "drift_order_k": problem.k,
        "constrained_final_traces": [j for j in range(problem.k + 1, problem.d + 1)],
    }
    with open(os.path.join(outdir, "coercivity.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _sys.stdout.write(f"{rep.status}: tstar_est={rep.tstar_est}\n")
    return EXIT_OK


def cmd_steer(args) -> int:
    sys_ = _load_from_args(args)
    qd = extract_quadratic_data(sys_)
    report = build_report(qd)
    if not report.kalman:
        comp = ratlin.orthogonal_complement(report.s1_basis, sys_.n)
        dirs = "; ".join(str([format_rational(x) for x in v]) for v in comp)
        _sys.stderr.write(
            f"Kalman rank condition fails (d={report.d} < n={sys_.n}); "
            f"unreachable directions: {dirs}\n"
        )
        return EXIT_KALMAN_FAILS
    H0 = np.asarray(ratlin.to_float(qd.H0))
    b = np.asarray(ratlin.to_float(list(qd.b)))
    x_from = np.asarray([float(v) for v in args.x_from.split(",")])
    x_to = np.asarray([float(v) for v in args.x_to.split(",")])
    if len(x_from) != sys_.n or len(x_to) != sys_.n:
        raise SystemFileError("endpoint dimension mismatch")
    try:
        u = hum_control(H0, b, x_from, x_to, args.T, args.epsilon)
    except SingularGramian as exc:
        _sys.stderr.write(f"{exc}\n")
        return EXIT_KALMAN_FAILS
    err = verify_steering(H0, b, u, x_from, x_to)
    outdir = args.out or "."
    os.makedirs(outdir, exist_ok=True)
    lines = ["t,u"] + [f"{_fmt(t)},{_fmt(v)}" for t, v in zip(u.t, u.values)]
    with open(os.path.join(outdir, "control.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    _sys.stdout.write(f"steering error |y(T) - target| = {err:.3e}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quadctrl", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_source(p):
        p.add_argument("--system", help="path to a JSON system file")
        p.add_argument("--example", help="name of a built-in example")

    p = sub.add_parser("classify", help="run the quadratic alternative classification")
    add_source(p)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("simulate", help="integrate a trajectory and export CSV series")
    add_source(p)
    p.add_argument("--control", required=True,
                   help="bump(a,b,amp) | sinusoid(freq,amp) | csv:PATH | dilation(phi_k,lam,mu)")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--out", help="output directory")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("coercivity", help="estimate the coercivity time T*")
    add_source(p)
    p.add_argument("--Tmax", type=float, default=5.0)
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--out", help="output directory")
    p.set_defaults(fn=cmd_coercivity)

    p = sub.add_parser("steer", help="HUM steering for the linearized system")
    add_source(p)
    p.add_argument("--from", dest="x_from", required=True, help="comma-separated start state")
    p.add_argument("--to", dest="x_to", required=True, help="comma-separated target state")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--out", help="output directory")
    p.set_defaults(fn=cmd_steer)

    p = sub.add_parser("examples", help="list or dump built-in example systems")
    p.add_argument("action", choices=["list", "dump"])
    p.add_argument("name", nargs="?", help="example name (for dump)")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_examples)

    ap.add_argument("--seed", type=int, default=0, help="seed for randomized subroutines")
    ap.add_argument("--tol", type=float, default=1e-9, help="generic numeric tolerance")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "examples" and args.action == "dump" and not args.name:
        ap.error("dump needs an example name")
    try:
        return args.fn(args)
    except (SystemFileError, FileNotFoundError, KeyError, ValueError, DegreeCapExceeded) as exc:
        _sys.stderr.write(f"input error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
