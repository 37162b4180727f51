"""Finite time scales whose forward jump is affine: sigma(t) = a1*t + a0.

Points are addressed by index. ``sigma`` and ``rho`` clamp at the two ends,
so sigma(N) = N and rho(0) = 0, and the graininess at the top point is zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisViolation, ProblemSizeError, ValidationError

# relative tolerance for the affine-jump check, scaled by b - a
H_TOL = 1e-9
MIN_POINTS = 3


@dataclass(frozen=True, eq=False)
class TimeScale:
    points: np.ndarray
    a1: float
    a0: float
    _mu: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1:
            raise ValidationError("time scale points must be a flat list")
        if pts.size < MIN_POINTS:
            raise ValidationError(
                f"a time scale needs at least {MIN_POINTS} points, got {pts.size}"
            )
        if not np.all(np.isfinite(pts)):
            raise ValidationError("time scale points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ValidationError("time scale points must be strictly ascending")
        if not self.a1 > 0:
            raise HypothesisViolation(f"jump slope a1 must be positive, got {self.a1}")
        tol = H_TOL * (pts[-1] - pts[0])
        predicted = self.a1 * pts[:-1] + self.a0
        bad = np.flatnonzero(np.abs(pts[1:] - predicted) > tol)
        if bad.size:
            i = int(bad[0])
            raise HypothesisViolation(
                f"sigma({pts[i]!r}) = {pts[i + 1]!r} but a1*t + a0 = {predicted[i]!r}"
            )
        pts.setflags(write=False)
        mu = np.append(np.diff(pts), 0.0)
        mu.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "a1", float(self.a1))
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "_mu", mu)

    @property
    def N(self) -> int:
        """Index of the top point b."""
        return self.points.size - 1

    def __len__(self) -> int:
        return self.points.size

    @property
    def a(self) -> float:
        return float(self.points[0])

    @property
    def b(self) -> float:
        return float(self.points[-1])

    @property
    def graininess(self) -> np.ndarray:
        """mu at every index, with mu(b) = 0."""
        return self._mu

    def t(self, i: int) -> float:
        return float(self.points[self._check(i)])

    def _check(self, i: int) -> int:
        if not 0 <= i <= self.N:
            raise IndexError(f"index {i} outside 0..{self.N}")
        return int(i)

    def sigma(self, i: int) -> int:
        return min(self._check(i) + 1, self.N)

    def rho(self, i: int) -> int:
        return max(self._check(i) - 1, 0)

    def mu(self, i: int) -> float:
        return float(self._mu[self._check(i)])

    def sigma_n(self, i: int, n: int) -> int:
        if n < 0:
            raise ValidationError("jump power must be non-negative")
        return min(self._check(i) + n, self.N)

    def rho_n(self, i: int, n: int) -> int:
        if n < 0:
            raise ValidationError("jump power must be non-negative")
        return max(self._check(i) - n, 0)

    def truncate_k(self, n: int) -> range:
        """Index range of T^{k^n}: each truncation drops the top point."""
        if n < 0:
            raise ValidationError("truncation order must be non-negative")
        if n > self.N:
            raise ProblemSizeError(
                f"T^(k^{n}) is empty on a scale with top index {self.N}"
            )
        return range(0, self.N - n + 1)

    def mu_ratio_residual(self) -> float:
        """max |mu(t_{i+1}) - a1*mu(t_i)| over i <= N-2, relative to max |t|.

        Graininess is a difference of stored points, so its rounding error
        scales with the point magnitudes rather than with mu itself.
        """
        if self.N < 2:
            return 0.0
        mu = self._mu[:-1]
        err = np.max(np.abs(mu[1:] - self.a1 * mu[:-1]))
        return float(err / np.max(np.abs(self.points)))


def make_uniform(a: float, b: float, n: int) -> TimeScale:
    """Uniform grid a + i*(b-a)/n, i = 0..n."""
    if not a < b:
        raise ValidationError(f"need a < b, got a={a}, b={b}")
    if int(n) != n or n < 2:
        raise ValidationError(f"uniform scale needs n >= 2 intervals, got {n}")
    n = int(n)
    h = (b - a) / n
    pts = a + np.arange(n + 1) * h
    pts[-1] = b
    return TimeScale(pts, 1.0, h)


def make_qscale(t0: float, q: float, k: int) -> TimeScale:
    """Geometric grid t0*q^i, i = 0..k."""
    if not t0 > 0:
        raise ValidationError(f"q-scale start must be positive, got {t0}")
    if not q > 1:
        raise ValidationError(f"q-scale ratio must exceed 1, got {q}")
    if int(k) != k or k < 2:
        raise ValidationError(f"q-scale needs k >= 2 steps, got {k}")
    pts = t0 * np.power(float(q), np.arange(int(k) + 1))
    return TimeScale(pts, q, 0.0)


def make_explicit(points) -> TimeScale:
    """Fit a1, a0 from the first two gaps and validate the rest against them."""
    pts = np.asarray(list(points), dtype=float)
    if pts.size < MIN_POINTS:
        raise ValidationError(
            f"a time scale needs at least {MIN_POINTS} points, got {pts.size}"
        )
    if np.any(np.diff(pts) <= 0):
        raise ValidationError("time scale points must be strictly ascending")
    a1 = (pts[2] - pts[1]) / (pts[1] - pts[0])
    a0 = pts[1] - a1 * pts[0]
    return TimeScale(pts, a1, a0)
