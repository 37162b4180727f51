"""Problem files: a TOML subset with [scale], [problem], [boundary], [solver]."""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ExprSyntaxError, HypothesisViolation, ValidationError
from .lagrangian import parse
from .optimize import METHODS
from .timescale import TimeScale, make_explicit, make_qscale, make_uniform
from .variational import VariationalProblem

SCALE_KINDS = {
    "uniform": (make_uniform, ("a", "b", "n")),
    "qscale": (make_qscale, ("t0", "q", "k")),
    "explicit": (make_explicit, ("points",)),
}


class ProblemFileError(ValidationError):
    """Bad problem file; ``key`` names the offending ``section.key``."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


class ProblemFileSyntaxError(ProblemFileError):
    pass


class ProblemFileHypothesisError(ProblemFileError, HypothesisViolation):
    pass


@dataclass(frozen=True)
class SolverOptions:
    method: str = "cg"
    grad_tol: float = 1e-10
    max_iters: int = 100_000


def _section(doc: dict, name: str, required: bool = True) -> dict:
    sec = doc.get(name)
    if sec is None:
        if required:
            raise ProblemFileError(name, "missing section")
        return {}
    if not isinstance(sec, dict):
        raise ProblemFileError(name, "expected a [section]")
    return sec


def _number(sec: dict, section: str, key: str, integer: bool = False):
    key_path = f"{section}.{key}"
    if key not in sec:
        raise ProblemFileError(key_path, "missing key")
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ProblemFileError(key_path, f"expected a number, got {v!r}")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ProblemFileError(key_path, f"expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _numbers(sec: dict, section: str, key: str) -> list[float]:
    key_path = f"{section}.{key}"
    if key not in sec:
        raise ProblemFileError(key_path, "missing key")
    v = sec[key]
    if not isinstance(v, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
    ):
        raise ProblemFileError(key_path, f"expected a flat list of numbers, got {v!r}")
    return [float(x) for x in v]


def _reject_unknown(sec: dict, section: str, allowed) -> None:
    for key in sec:
        if key not in allowed:
            raise ProblemFileError(f"{section}.{key}", "unknown key")


def build_scale(sec: dict) -> TimeScale:
    kind = sec.get("kind")
    if kind not in SCALE_KINDS:
        raise ProblemFileError(
            "scale.kind", f"expected one of {', '.join(SCALE_KINDS)}, got {kind!r}"
        )
    factory, keys = SCALE_KINDS[kind]
    _reject_unknown(sec, "scale", ("kind",) + keys)
    if kind == "explicit":
        args = [_numbers(sec, "scale", "points")]
    else:
        args = [_number(sec, "scale", k, integer=(k in ("n", "k"))) for k in keys]
    try:
        return factory(*args)
    except HypothesisViolation as exc:
        raise ProblemFileHypothesisError("scale", str(exc)) from exc
    except ValidationError as exc:
        raise ProblemFileError("scale", str(exc)) from exc


def parse_problem(text: str) -> tuple[VariationalProblem, SolverOptions]:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ProblemFileSyntaxError("", f"cannot parse problem file: {exc}") from exc

    _reject_unknown(doc, "", ("scale", "problem", "boundary", "solver"))
    scale = build_scale(_section(doc, "scale"))

    prob = _section(doc, "problem")
    _reject_unknown(prob, "problem", ("order", "lagrangian"))
    order = _number(prob, "problem", "order", integer=True)
    if order < 1:
        raise ProblemFileError("problem.order", f"must be a positive integer, got {order}")
    src = prob.get("lagrangian")
    if not isinstance(src, str):
        raise ProblemFileError("problem.lagrangian", "expected a quoted expression")
    try:
        lagrangian = parse(src)
    except ExprSyntaxError as exc:
        raise ProblemFileError("problem.lagrangian", str(exc)) from exc
    if lagrangian.max_var > order:
        raise ProblemFileError(
            "problem.lagrangian", f"uses u{lagrangian.max_var} but order is {order}"
        )

    bnd = _section(doc, "boundary")
    _reject_unknown(bnd, "boundary", ("left", "right"))
    bcs = {}
    for side in ("left", "right"):
        vals = _numbers(bnd, "boundary", side)
        if len(vals) != order:
            raise ProblemFileError(
                f"boundary.{side}", f"needs {order} values for order {order}, got {len(vals)}"
            )
        bcs[side] = vals

    sol = _section(doc, "solver", required=False)
    _reject_unknown(sol, "solver", ("method", "grad_tol", "max_iters"))
    defaults = SolverOptions()
    method = sol.get("method", defaults.method)
    if method not in METHODS:
        raise ProblemFileError("solver.method", f"expected one of {', '.join(METHODS)}, got {method!r}")
    grad_tol = _number(sol, "solver", "grad_tol") if "grad_tol" in sol else defaults.grad_tol
    if not grad_tol > 0:
        raise ProblemFileError("solver.grad_tol", "must be positive")
    max_iters = (
        _number(sol, "solver", "max_iters", integer=True) if "max_iters" in sol else defaults.max_iters
    )
    if max_iters < 0:
        raise ProblemFileError("solver.max_iters", "must be non-negative")

    problem = VariationalProblem(scale, order, lagrangian, bcs["left"], bcs["right"])
    return problem, SolverOptions(method, grad_tol, max_iters)


def load_problem(path) -> tuple[VariationalProblem, SolverOptions]:
    return parse_problem(Path(path).read_text())
