"""Higher-order variational problems on (H)-time scales.

Problem: minimise

    J[y] = sum_{k=0}^{N-r} mu(t_k) L(t_k, u_0(k), ..., u_r(k)),
    u_i = y^{sigma^{r-i} Delta^i},

with y, y^Delta, ..., y^{Delta^{r-1}} fixed at t_0 and at t_{N-r+1}.
The free unknowns are y(t_r), ..., y(t_{N-r}).

The Euler-Lagrange residual is

    R = sum_i (-1)^i a1^{-i(i-1)/2} (L_{u_i})^{Delta^i}   on indices 0..N-2r,

and mu(t_j) R(t_j) equals the first variation along the unit bump at j+r.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .deltacalc import GridFunction, compose_sigma_delta, delta_derivative_n
from .errors import ProblemSizeError, ValidationError
from .lagrangian import LagrangianExpr, parse
from .timescale import TimeScale


@dataclass(frozen=True, eq=False)
class VariationalProblem:
    scale: TimeScale
    r: int
    lagrangian: LagrangianExpr
    left_bc: tuple
    right_bc: tuple

    def __post_init__(self):
        if isinstance(self.lagrangian, str):
            object.__setattr__(self, "lagrangian", parse(self.lagrangian))
        if int(self.r) != self.r or self.r < 1:
            raise ValidationError(f"order must be a positive integer, got {self.r}")
        object.__setattr__(self, "r", int(self.r))
        for name in ("left_bc", "right_bc"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != self.r:
                raise ValidationError(
                    f"{name} needs {self.r} values for order {self.r}, got {len(vals)}"
                )
            if not all(np.isfinite(vals)):
                raise ValidationError(f"{name} values must be finite")
            object.__setattr__(self, name, vals)
        if self.lagrangian.max_var > self.r:
            raise ValidationError(
                f"lagrangian uses u{self.lagrangian.max_var} but order is {self.r}"
            )
        if self.scale.N < 2 * self.r:
            raise ProblemSizeError(
                f"order {self.r} needs top index N >= {2 * self.r}, got N = {self.scale.N}"
            )

    @property
    def N(self) -> int:
        return self.scale.N

    @property
    def free(self) -> slice:
        """Slice of free indices r..N-r."""
        return slice(self.r, self.N - self.r + 1)

    @property
    def n_free(self) -> int:
        return self.N - 2 * self.r + 1

    @cached_property
    def stencils(self) -> np.ndarray:
        """C[i, k, l]: u_i(k) = sum_l C[i, k, l] * y(k + l), l = 0..r."""
        n, r = self.N + 1, self.r
        m = n - r
        eye = np.eye(n)
        C = np.zeros((r + 1, m, r + 1))
        for i in range(r + 1):
            D = _compose_columns(eye, self.scale.graininess, r - i, i)
            for l in range(r + 1):
                C[i, :, l] = D[np.arange(m), np.arange(m) + l]
        C.setflags(write=False)
        return C


def _compose_columns(Y: np.ndarray, mu: np.ndarray, shift: int, order: int) -> np.ndarray:
    """Apply y -> y^{sigma^shift Delta^order} to each column of Y."""
    Z = Y[shift:]
    for _ in range(order):
        Z = (Z[1:] - Z[:-1]) / mu[: Z.shape[0] - 1, None]
    return Z


def trajectory(scale: TimeScale, values) -> GridFunction:
    return GridFunction(scale, 0, scale.N, values)


def _full(p: VariationalProblem, y: GridFunction) -> GridFunction:
    if y.scale is not p.scale:
        raise ValidationError("trajectory lives on a different time scale")
    if (y.lo, y.hi) != (0, p.N):
        raise ValidationError(f"trajectory must cover indices 0..{p.N}")
    return y


def boundary_pin(p: VariationalProblem) -> tuple[np.ndarray, np.ndarray]:
    """Values forced at indices 0..r-1 (left) and N-r+1..N (right).

    Each block solves the triangular system y^{Delta^j}(anchor) = bc[j],
    j = 0..r-1, one new point per order.
    """
    mu = p.scale.graininess
    r = p.r

    def solve_block(anchor: int, bc: tuple) -> np.ndarray:
        vals = np.zeros(r)
        for j in range(r):
            window = mu[anchor : anchor + j]
            vals[j] = 0.0
            partial = _delta_at(vals[: j + 1], window, j)
            unit = np.zeros(j + 1)
            unit[j] = 1.0
            coef = _delta_at(unit, window, j)
            vals[j] = (bc[j] - partial) / coef
        return vals

    return solve_block(0, p.left_bc), solve_block(p.N - r + 1, p.right_bc)


def _delta_at(v: np.ndarray, mu: np.ndarray, j: int) -> float:
    for _ in range(j):
        v = (v[1:] - v[:-1]) / mu[: v.size - 1]
    return float(v[0])


def assemble(p: VariationalProblem, free_values) -> GridFunction:
    """Full trajectory from the free values y(t_r..t_{N-r})."""
    free_values = np.asarray(free_values, dtype=float)
    if free_values.shape != (p.n_free,):
        raise ValidationError(f"expected {p.n_free} free values, got {free_values.shape}")
    left, right = boundary_pin(p)
    return trajectory(p.scale, np.concatenate([left, free_values, right]))


def slot_values(p: VariationalProblem, y: GridFunction) -> np.ndarray:
    """Rows u_0..u_r on indices 0..N-r; u_i = y^{sigma^{r-i} Delta^i}."""
    _full(p, y)
    return np.stack([compose_sigma_delta(y, p.r - i, i).values for i in range(p.r + 1)])


def _window(p: VariationalProblem):
    m = p.N - p.r + 1
    return p.scale.points[:m], p.scale.graininess[:m]


def functional_value(p: VariationalProblem, y: GridFunction) -> float:
    t, mu = _window(p)
    return float(np.dot(mu, p.lagrangian.evaluate_grid(t, slot_values(p, y))))


def lagrangian_partials(p: VariationalProblem, y: GridFunction) -> tuple[np.ndarray, np.ndarray]:
    """L and (L_{u_0}, ..., L_{u_r}) sampled along y on indices 0..N-r."""
    t, _ = _window(p)
    return p.lagrangian.partials_grid(t, slot_values(p, y), p.r)


def admissible_variation_basis(p: VariationalProblem) -> list[GridFunction]:
    basis = []
    for m in range(p.r, p.N - p.r + 1):
        e = np.zeros(p.N + 1)
        e[m] = 1.0
        basis.append(trajectory(p.scale, e))
    return basis


def first_variation(p: VariationalProblem, y: GridFunction, eta: GridFunction) -> float:
    """d/de J[y + e*eta] at e = 0, summed slot by slot."""
    _, G = lagrangian_partials(p, y)
    _, mu = _window(p)
    H = slot_values(p, _full(p, eta))
    return float(np.dot(mu, np.sum(G * H, axis=0)))


def gradient(p: VariationalProblem, y: GridFunction) -> np.ndarray:
    """dJ/dy(t_m) for every grid index m, assembled over the slot stencils."""
    _, G = lagrangian_partials(p, y)
    _, mu = _window(p)
    C = p.stencils
    W = mu * G
    m = W.shape[1]
    grad = np.zeros(p.N + 1)
    for l in range(p.r + 1):
        grad[l : l + m] += np.sum(W * C[:, :, l], axis=0)
    return grad


def el_coefficients(r: int, a1: float) -> np.ndarray:
    i = np.arange(r + 1)
    return (-1.0) ** i * (1.0 / a1) ** (i * (i - 1) // 2)


def el_residual(p: VariationalProblem, y: GridFunction) -> GridFunction:
    _, G = lagrangian_partials(p, y)
    top = p.N - 2 * p.r
    coef = el_coefficients(p.r, p.scale.a1)
    total = np.zeros(top + 1)
    for i in range(p.r + 1):
        Gi = GridFunction(p.scale, 0, p.N - p.r, G[i])
        total += coef[i] * delta_derivative_n(Gi, i).values[: top + 1]
    return GridFunction(p.scale, 0, top, total)


def weak_norm(y: GridFunction, r: int) -> float:
    """Sum over i of sup |y^{sigma^i Delta^{r-i}}| on T^{k^r}."""
    if len(y) < r + 1:
        raise ProblemSizeError(f"weak norm of order {r} needs {r + 1} points")
    return float(
        sum(np.max(np.abs(compose_sigma_delta(y, i, r - i).values)) for i in range(r + 1))
    )


@dataclass
class LemmaProbe:
    pairings: np.ndarray  # P_m for bumps m = r..N-r
    matrix: np.ndarray  # pairing of the unit f at j with the bump at m
    kernel_trivial: bool
    reconstructed: GridFunction
    reconstruction_error: float


def fundamental_lemma_probe(scale: TimeScale, r: int, f: GridFunction) -> LemmaProbe:
    """Pair f against sigma^r-shifted admissible bumps and invert the pairing."""
    top = scale.N - 2 * r
    if top < 0:
        raise ProblemSizeError(f"order {r} needs top index N >= {2 * r}, got {scale.N}")
    if f.scale is not scale or (f.lo, f.hi) != (0, top):
        raise ValidationError(f"f must live on indices 0..{top} of the given scale")

    def pair(values: np.ndarray, m: int) -> float:
        eta = np.zeros(scale.N + 1)
        eta[m] = 1.0
        shifted = compose_sigma_delta(trajectory(scale, eta), r, 0).values[: top + 1]
        integrand = GridFunction(scale, 0, top, values * shifted)
        return float(np.dot(scale.graininess[: top + 1], integrand.values))

    bumps = range(r, scale.N - r + 1)
    pairings = np.array([pair(f.values, m) for m in bumps])
    eye = np.eye(top + 1)
    matrix = np.array([[pair(eye[j], m) for j in range(top + 1)] for m in bumps])
    recon = pairings / scale.graininess[: top + 1]
    all_zero = bool(np.all(pairings == 0.0))
    f_zero = bool(np.all(f.values == 0.0))
    return LemmaProbe(
        pairings=pairings,
        matrix=matrix,
        kernel_trivial=all_zero == f_zero,
        reconstructed=GridFunction(scale, 0, top, recon),
        reconstruction_error=float(np.max(np.abs(recon - f.values))),
    )


@dataclass
class SolveReport:
    functional_value: float
    iterations: int
    converged: bool
    grad_norm: float
    max_el_residual: float

    def as_dict(self) -> dict:
        return {
            "functional_value": self.functional_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
            "max_el_residual": self.max_el_residual,
        }


def initial_guess(p: VariationalProblem) -> np.ndarray:
    """Free values on the straight line between the two pinned blocks."""
    left, right = boundary_pin(p)
    t = p.scale.points
    i0, i1 = p.r - 1, p.N - p.r + 1
    w = (t[p.free] - t[i0]) / (t[i1] - t[i0])
    return left[-1] + w * (right[0] - left[-1])


def solve(
    p: VariationalProblem,
    method: str = "cg",
    grad_tol: float = 1e-10,
    max_iters: int = 100_000,
    x0=None,
) -> tuple[GridFunction, SolveReport]:
    """Minimise J over the free values by direct transcription."""
    from .optimize import minimize

    x0 = initial_guess(p) if x0 is None else np.asarray(x0, dtype=float)
    res = minimize(
        lambda x: functional_value(p, assemble(p, x)),
        lambda x: gradient(p, assemble(p, x))[p.free],
        x0,
        method=method,
        grad_tol=grad_tol,
        max_iters=max_iters,
    )
    y = assemble(p, res.x)
    report = SolveReport(
        functional_value=res.fun,
        iterations=res.iterations,
        converged=res.converged,
        grad_norm=res.grad_norm,
        max_el_residual=float(np.max(np.abs(el_residual(p, y).values))),
    )
    return y, report
