"""Command-line front end.

Exit codes: 0 success, 1 identity/lemma threshold breach, 2 bad input or
I/O failure (parse, validation, hypothesis (H), problem size), 3 solver
did not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import deltacalc as dc
from .errors import DeltaVarError, HypothesisViolation, ProblemSizeError
from .problemfile import ProblemFileSyntaxError, build_scale, load_problem
from .timescale import TimeScale
from .variational import (
    el_residual,
    fundamental_lemma_probe,
    solve,
    trajectory,
)

EXIT_OK, EXIT_BREACH, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2, 3

THRESHOLDS = {
    "transfor": 1e-12,
    "product_rule": 1e-12,
    "by_parts_1": 1e-10,
    "by_parts_2": 1e-10,
    "commutation": 1e-12,
}
LEMMA_TOL = 1e-10


class InputError(Exception):
    """Raised inside commands for conditions that map to exit code 2."""


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def trajectory_csv(y: dc.GridFunction) -> str:
    rows = [(i, _fmt(t), _fmt(v)) for i, t, v in zip(range(y.lo, y.hi + 1), y.times, y.values)]
    return _csv_text(("index", "t", "y"), rows)


def read_trajectory(path, scale: TimeScale) -> dc.GridFunction:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if len(rows) != len(scale):
        raise InputError(
            f"{path}: {len(rows)} trajectory rows but the scale has {len(scale)} points"
        )
    try:
        idx = [int(r["index"]) for r in rows]
        t = np.array([float(r["t"]) for r in rows])
        y = np.array([float(r["y"]) for r in rows])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: expected columns index,t,y ({exc})") from exc
    if idx != list(range(len(scale))):
        raise InputError(f"{path}: indices must run 0..{scale.N} in order")
    if np.max(np.abs(t - scale.points)) > 1e-9 * (scale.b - scale.a):
        raise InputError(f"{path}: t column does not match the problem's time scale")
    return trajectory(scale, y)


def cmd_solve(args, out) -> int:
    problem, opts = load_problem(args.problem)
    method = args.method or opts.method
    max_iters = opts.max_iters if args.max_iters is None else args.max_iters
    y, report = solve(problem, method=method, grad_tol=opts.grad_tol, max_iters=max_iters)
    _write_text(args.out, trajectory_csv(y))
    _write_text(args.report, json.dumps(report.as_dict(), indent=2) + "\n")
    status = "converged" if report.converged else "NOT converged"
    print(
        f"{status} after {report.iterations} iterations: J = {_fmt(report.functional_value)}, "
        f"|grad| = {report.grad_norm:.3e}, max|EL residual| = {report.max_el_residual:.3e}",
        file=out,
    )
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_residual(args, out) -> int:
    problem, _ = load_problem(args.problem)
    y = read_trajectory(args.traj, problem.scale)
    res = el_residual(problem, y)
    rows = [(i, _fmt(t), _fmt(v)) for i, t, v in zip(range(res.lo, res.hi + 1), res.times, res.values)]
    _write_text(args.out, _csv_text(("index", "t", "residual"), rows))
    print(f"max |residual| = {_fmt(np.max(np.abs(res.values)))}", file=out)
    return EXIT_OK


def identity_residuals(scale: TimeScale, rng: np.random.Generator) -> dict:
    f = dc.GridFunction(scale, 0, scale.N, rng.standard_normal(len(scale)))
    g = dc.GridFunction(scale, 0, scale.N, rng.standard_normal(len(scale)))
    return {
        "transfor": dc.check_transfor(f),
        "product_rule": dc.check_product_rule(f, g),
        "by_parts_1": dc.check_by_parts(f, g, 1),
        "by_parts_2": dc.check_by_parts(f, g, 2),
        "commutation": dc.check_commutation(f),
    }


def run_verify(scale: TimeScale, trials: int, seed: int, out=sys.stdout) -> int:
    """Seeded identity trials; trial k draws from default_rng(seed + k)."""
    worst = {name: 0.0 for name in THRESHOLDS}
    failures = []
    for k in range(trials):
        res = identity_residuals(scale, np.random.default_rng(seed + k))
        for name, value in res.items():
            worst[name] = max(worst[name], value)
            if not value <= THRESHOLDS[name]:
                failures.append((name, seed + k, value))
    print(f"{'identity':<14}{'max residual':>14}{'threshold':>12}  status", file=out)
    for name, tol in THRESHOLDS.items():
        status = "pass" if worst[name] <= tol else "FAIL"
        print(f"{name:<14}{worst[name]:>14.3e}{tol:>12.0e}  {status}", file=out)
    for name, trial_seed, value in failures:
        print(f"FAIL {name} trial seed {trial_seed}: residual {value:.3e}", file=out)
    return EXIT_BREACH if failures else EXIT_OK


def _scale_from_flags(args) -> TimeScale:
    given = [k for k in ("uniform", "qscale", "explicit") if getattr(args, k) is not None]
    if args.problem is not None:
        if given:
            raise InputError("give either a problem file or one scale flag, not both")
        return load_problem(args.problem)[0].scale
    if len(given) != 1:
        raise InputError("give a problem file or exactly one of --uniform/--qscale/--explicit")
    kind = given[0]
    v = getattr(args, kind)
    if kind == "uniform":
        sec = {"kind": kind, "a": v[0], "b": v[1], "n": v[2]}
    elif kind == "qscale":
        sec = {"kind": kind, "t0": v[0], "q": v[1], "k": v[2]}
    else:
        sec = {"kind": kind, "points": v}
    for key in ("n", "k"):
        if key in sec:
            if not float(sec[key]).is_integer():
                raise InputError(f"--{kind}: {key} must be an integer")
            sec[key] = int(sec[key])
    return build_scale(sec)


def cmd_verify(args, out) -> int:
    if args.trials < 1:
        raise InputError("--trials must be at least 1")
    return run_verify(_scale_from_flags(args), args.trials, args.seed, out)


def cmd_lemma(args, out) -> int:
    problem, _ = load_problem(args.problem)
    scale, r = problem.scale, problem.r
    top = scale.N - 2 * r
    values = np.zeros(top + 1) if args.zero else np.random.default_rng(args.seed).standard_normal(top + 1)
    probe = fundamental_lemma_probe(scale, r, dc.GridFunction(scale, 0, top, values))
    off_diag = probe.matrix - np.diag(np.diag(probe.matrix))
    diag_ok = not np.any(off_diag) and np.all(np.diag(probe.matrix) > 0)
    print(f"pairings: {len(probe.pairings)} bumps on indices {r}..{scale.N - r}", file=out)
    print(f"pairing matrix diagonal with positive entries: {'yes' if diag_ok else 'no'}", file=out)
    print(f"all pairings zero: {'yes' if not np.any(probe.pairings) else 'no'}", file=out)
    print(f"kernel trivial: {'yes' if probe.kernel_trivial else 'no'}", file=out)
    print(f"reconstruction error = {_fmt(probe.reconstruction_error)}", file=out)
    ok = probe.reconstruction_error <= LEMMA_TOL and probe.kernel_trivial and diag_ok
    return EXIT_OK if ok else EXIT_BREACH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deltavar",
        description="Higher-order calculus of variations on affine-jump time scales.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="minimise the functional by direct transcription")
    p.add_argument("problem")
    p.add_argument("--out", required=True, help="trajectory CSV (index,t,y)")
    p.add_argument("--report", required=True, help="report JSON")
    p.add_argument("--method", choices=("sd", "cg", "newton"), help="override solver.method")
    p.add_argument("--max-iters", type=int, help="override solver.max_iters")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("residual", help="Euler-Lagrange residual of a trajectory")
    p.add_argument("problem")
    p.add_argument("--traj", required=True, help="trajectory CSV written by 'solve'")
    p.add_argument("--out", required=True, help="residual CSV (index,t,residual)")
    p.set_defaults(func=cmd_residual)

    p = sub.add_parser("verify", help="seeded checks of the delta-calculus identities")
    p.add_argument("problem", nargs="?")
    p.add_argument("--uniform", nargs=3, type=float, metavar=("A", "B", "N"))
    p.add_argument("--qscale", nargs=3, type=float, metavar=("T0", "Q", "K"))
    p.add_argument("--explicit", nargs="+", type=float, metavar="T")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("lemma", help="probe the fundamental lemma with a seeded f")
    p.add_argument("problem")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero", action="store_true", help="probe with f identically zero")
    p.set_defaults(func=cmd_lemma)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args, out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except ProblemFileSyntaxError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
    except HypothesisViolation as exc:
        print(f"hypothesis (H) violation: {exc}", file=sys.stderr)
    except ProblemSizeError as exc:
        print(f"problem-size error: {exc}", file=sys.stderr)
    except DeltaVarError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
