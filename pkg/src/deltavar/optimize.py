"""Unconstrained gradient minimisers with a backtracking Armijo line search."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DeltaVarError, SolverDivergenceError, ValidationError

log = logging.getLogger(__name__)

METHODS = ("sd", "cg", "newton")

INITIAL_STEP = 1.0
SHRINK = 0.5
ARMIJO = 1e-4
MAX_SHRINKS = 80
# function values this close (relative) count as equal when the
# directional derivative confirms progress
F_SLACK = 1e-13


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    converged: bool

    @property
    def grad_norm(self) -> float:
        return float(np.max(np.abs(self.grad))) if self.grad.size else 0.0


def _safe(fun, grad, x):
    try:
        f = fun(x)
    except (DeltaVarError, ArithmeticError):
        return np.nan, None
    if not np.isfinite(f):
        return f, None
    g = grad(x)
    if not np.all(np.isfinite(g)):
        return np.nan, None
    return f, g


def line_search(fun, grad, x, f0, g0, d, step=INITIAL_STEP):
    """Backtrack from ``step`` by SHRINK until sufficient decrease.

    Near the rounding floor of f the plain Armijo test cannot resolve the
    decrease, so a trial is also accepted when f has not grown beyond
    F_SLACK and the directional derivative has dropped in magnitude.
    """
    slope = float(g0 @ d)
    saw_finite = False
    for _ in range(MAX_SHRINKS):
        xt = x + step * d
        ft, gt = _safe(fun, grad, xt)
        if gt is not None:
            saw_finite = True
            if ft <= f0 + ARMIJO * step * slope:
                return step, xt, ft, gt
            if ft <= f0 + F_SLACK * (1.0 + abs(f0)) and abs(float(gt @ d)) < 0.9 * abs(slope):
                return step, xt, ft, gt
        step *= SHRINK
    if not saw_finite:
        raise SolverDivergenceError("line search produced only non-finite trial points")
    return None


def _curvature_step(grad, x, g, d):
    """Secant estimate of the exact line-search step along d."""
    dn = float(np.max(np.abs(d)))
    scale = max(1.0, float(np.max(np.abs(x)))) if x.size else 1.0
    eps = 1e-6 * scale / dn
    gd = grad(x + eps * d)
    curv = float((gd - g) @ d) / eps
    if not np.isfinite(curv) or curv <= 0:
        return INITIAL_STEP
    return -float(g @ d) / curv


def _fd_hessian(grad, x):
    n = x.size
    H = np.empty((n, n))
    for j in range(n):
        h = 1e-5 * max(1.0, abs(x[j]))
        e = np.zeros(n)
        e[j] = h
        H[:, j] = (grad(x + e) - grad(x - e)) / (2 * h)
    return 0.5 * (H + H.T)


def ulp_polish(grad, x, g, grad_tol, budget=4000):
    """Greedy +-1 ulp moves around the worst gradient entry.

    Once an iterate sits on the floating-point lattice next to the true
    stationary point, the attainable gradient values are quantised; this
    searches nearby lattice points for one whose sup-norm is within tol.
    """
    def key(v):
        return float(np.max(np.abs(v))), float(v @ v)

    best = key(g)
    evals = 0
    while best[0] > grad_tol and evals < budget:
        m = int(np.argmax(np.abs(g)))
        trials = []
        for j in range(max(0, m - 2), min(x.size, m + 3)):
            for direction in (np.inf, -np.inf):
                xt = x.copy()
                xt[j] = np.nextafter(x[j], direction)
                gt = grad(xt)
                evals += 1
                if np.all(np.isfinite(gt)):
                    trials.append((key(gt), xt, gt))
        if not trials:
            break
        k, xt, gt = min(trials, key=lambda c: c[0])
        if k >= best:
            k, xt, gt = min(trials, key=lambda c: (c[0][1], c[0][0]))
            if k[1] >= best[1]:
                break
        best, x, g = k, xt, gt
    return x, g


def minimize(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0,
    method: str = "cg",
    grad_tol: float = 1e-10,
    max_iters: int = 100_000,
    patience: int | None = None,
) -> MinimizeResult:
    """Minimise ``fun`` from ``x0``; converged means sup|grad| <= grad_tol.

    The main iteration stops early once the best gradient norm has not
    improved for ``patience`` iterations (default 5 for Newton, otherwise
    max(100, 5n)); a
    lattice polish then tries to close the last few ulps.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if not grad_tol > 0 or int(max_iters) != max_iters or max_iters < 0:
        raise ValidationError("grad_tol must be positive and max_iters a non-negative integer")
    x = np.array(x0, dtype=float)
    f, g = _safe(fun, grad, x)
    if g is None:
        raise SolverDivergenceError("objective is not finite at the starting point")
    if x.size == 0:
        return MinimizeResult(x, f, g, 0, True)
    if patience is None:
        patience = 5 if method == "newton" else max(100, 5 * x.size)

    d = -g
    restarted = False
    best, since_best = np.inf, 0
    it = 0
    while np.max(np.abs(g)) > grad_tol and it < max_iters:
        if method == "newton":
            try:
                d = np.linalg.solve(_fd_hessian(grad, x), -g)
            except np.linalg.LinAlgError:
                d = -g
            if not float(g @ d) < 0:
                d = -g
            step = INITIAL_STEP
        elif method == "cg":
            if not float(g @ d) < 0:
                d = -g
            step = _curvature_step(grad, x, g, d)
        else:
            d = -g
            step = INITIAL_STEP

        found = line_search(fun, grad, x, f, g, d, step)
        if found is None:
            if method != "sd" and not restarted:
                restarted = True
                d = -g
                if method == "newton":
                    method = "sd"
                continue
            log.debug("line search stalled at iteration %d, |g| = %.3e", it, np.max(np.abs(g)))
            break
        restarted = False
        _, x_new, f_new, g_new = found
        if method == "cg":
            beta = max(0.0, float(g_new @ (g_new - g)) / float(g @ g))
            d = -g_new + beta * d
        x, f, g = x_new, f_new, g_new
        it += 1

        gn = float(np.max(np.abs(g)))
        if gn < best * (1 - 1e-3):
            best, since_best = gn, 0
        else:
            since_best += 1
            if since_best >= patience:
                log.debug("no progress for %d iterations, |g| = %.3e", patience, gn)
                break

    if np.max(np.abs(g)) > grad_tol and it > 0:
        x, g = ulp_polish(grad, x, g, grad_tol)
        f = fun(x)

    converged = bool(np.max(np.abs(g)) <= grad_tol)
    return MinimizeResult(x, float(f), g, it, converged)
