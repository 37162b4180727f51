"""Delta derivatives, delta integrals and sigma/Delta compositions on grids.

A ``GridFunction`` carries values on a contiguous index window ``lo..hi`` of a
``TimeScale``. Every point below the top of a finite (H)-grid is
right-scattered, so the delta derivative is exactly the forward difference
quotient and the delta integral is the mu-weighted left-endpoint sum.

The identity checks return residuals normalised as ``abs / (1 + magnitude)``,
where magnitude is the largest absolute value among the compared terms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ProblemSizeError, ValidationError
from .timescale import TimeScale


@dataclass(frozen=True, eq=False)
class GridFunction:
    scale: TimeScale
    lo: int
    hi: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if not 0 <= self.lo <= self.hi <= self.scale.N:
            raise ValidationError(
                f"window {self.lo}..{self.hi} outside 0..{self.scale.N}"
            )
        if vals.shape != (self.hi - self.lo + 1,):
            raise ValidationError(
                f"expected {self.hi - self.lo + 1} values for window "
                f"{self.lo}..{self.hi}, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValidationError("grid function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "hi", int(self.hi))
        object.__setattr__(self, "values", vals)

    @classmethod
    def sample(cls, scale: TimeScale, fn: Callable, lo: int = 0, hi: int | None = None):
        """Tabulate ``fn`` (vectorised over a numpy array of times) on a window."""
        hi = scale.N if hi is None else hi
        t = scale.points[lo : hi + 1]
        return cls(scale, lo, hi, np.broadcast_to(fn(t), t.shape))

    def __len__(self) -> int:
        return self.hi - self.lo + 1

    @property
    def times(self) -> np.ndarray:
        return self.scale.points[self.lo : self.hi + 1]

    @property
    def mu(self) -> np.ndarray:
        return self.scale.graininess[self.lo : self.hi + 1]

    def __call__(self, i: int) -> float:
        if not self.lo <= i <= self.hi:
            raise IndexError(f"index {i} outside window {self.lo}..{self.hi}")
        return float(self.values[i - self.lo])

    def restrict(self, lo: int, hi: int) -> "GridFunction":
        if not self.lo <= lo <= hi <= self.hi:
            raise ValidationError(
                f"cannot restrict {self.lo}..{self.hi} to {lo}..{hi}"
            )
        return GridFunction(self.scale, lo, hi, self.values[lo - self.lo : hi - self.lo + 1])

    def _binary(self, other, op):
        if isinstance(other, GridFunction):
            _same_scale(self, other)
            lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
            a = self.restrict(lo, hi).values
            b = other.restrict(lo, hi).values
            return GridFunction(self.scale, lo, hi, op(a, b))
        return GridFunction(self.scale, self.lo, self.hi, op(self.values, float(other)))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.scale, self.lo, self.hi, -self.values)


def _same_scale(f: GridFunction, g: GridFunction) -> None:
    if f.scale is not g.scale:
        raise ValidationError("grid functions live on different time scales")


def _shared(f: GridFunction, g: GridFunction) -> tuple[GridFunction, GridFunction]:
    _same_scale(f, g)
    lo, hi = max(f.lo, g.lo), min(f.hi, g.hi)
    if lo > hi:
        raise ValidationError("grid functions have disjoint windows")
    return f.restrict(lo, hi), g.restrict(lo, hi)


def _rel(residual: float, *terms) -> float:
    mag = max((float(np.max(np.abs(x))) if np.size(x) else 0.0) for x in terms)
    return float(residual) / (1.0 + mag)


def delta_derivative(f: GridFunction) -> GridFunction:
    """Forward difference quotient (f(sigma(t)) - f(t)) / mu(t) on lo..hi-1."""
    if len(f) < 2:
        raise ProblemSizeError("delta derivative needs at least two points")
    v = f.values
    mu = f.scale.graininess[f.lo : f.hi]
    return GridFunction(f.scale, f.lo, f.hi - 1, (v[1:] - v[:-1]) / mu)


def delta_derivative_n(f: GridFunction, k: int) -> GridFunction:
    if k < 0:
        raise ValidationError("derivative order must be non-negative")
    if len(f) < k + 1:
        raise ProblemSizeError(
            f"order-{k} delta derivative needs {k + 1} points, window has {len(f)}"
        )
    for _ in range(k):
        f = delta_derivative(f)
    return f


def shift_sigma(f: GridFunction, i: int = 1) -> GridFunction:
    """f composed with sigma^i; the clamped top point is dropped from the window."""
    if i < 0:
        raise ValidationError("shift must be non-negative")
    if len(f) < i + 1:
        raise ProblemSizeError(f"sigma^{i} shift needs {i + 1} points, window has {len(f)}")
    return GridFunction(f.scale, f.lo, f.hi - i, f.values[i:])


def compose_sigma_delta(y: GridFunction, i: int, j: int) -> GridFunction:
    """y^{sigma^i Delta^j}: shift by sigma^i first, then delta-differentiate j times.

    The order matters off the unit grid, where (y^sigma)^Delta = a1 (y^Delta)^sigma.
    """
    if len(y) < i + j + 1:
        raise ProblemSizeError(
            f"y^(sigma^{i} Delta^{j}) needs {i + j + 1} points, window has {len(y)}"
        )
    return delta_derivative_n(shift_sigma(y, i), j)


def compose_delta_sigma(y: GridFunction, j: int, i: int) -> GridFunction:
    """(y^{Delta^j})^{sigma^i}: differentiate first, then shift."""
    if len(y) < i + j + 1:
        raise ProblemSizeError(
            f"y^(Delta^{j} sigma^{i}) needs {i + j + 1} points, window has {len(y)}"
        )
    return shift_sigma(delta_derivative_n(y, j), i)


def delta_integral(f: GridFunction, start: int, stop: int) -> float:
    """Integral of f over [t_start, t_stop): sum of mu(t_i) f(t_i), i < stop."""
    if not f.lo <= start <= stop <= f.hi:
        raise ValidationError(
            f"integration range {start}..{stop} outside window {f.lo}..{f.hi}"
        )
    mu = f.scale.graininess[start:stop]
    return float(np.dot(mu, f.values[start - f.lo : stop - f.lo]))


def check_transfor(f: GridFunction) -> float:
    """Residual of f^sigma = f + mu f^Delta."""
    fs = shift_sigma(f, 1)
    fd = delta_derivative(f)
    base = f.values[:-1]
    res = np.abs(fs.values - base - fd.mu * fd.values)
    return _rel(np.max(res), f.values, fd.mu * fd.values)


def check_product_rule(f: GridFunction, g: GridFunction) -> float:
    """Residual of both forms of (fg)^Delta; the larger of the two."""
    f, g = _shared(f, g)
    if len(f) < 2:
        raise ProblemSizeError("product rule needs at least two shared points")
    lhs = delta_derivative(f * g).values
    fd, gd = delta_derivative(f).values, delta_derivative(g).values
    fs, gs = shift_sigma(f).values, shift_sigma(g).values
    fv, gv = f.values[:-1], g.values[:-1]
    t1, t2 = fd * gs, fv * gd
    t3, t4 = fd * gv, fs * gd
    res = max(np.max(np.abs(lhs - t1 - t2)), np.max(np.abs(lhs - t3 - t4)))
    return _rel(res, lhs, t1, t2, t3, t4)


def check_by_parts(f: GridFunction, g: GridFunction, form: int = 1) -> float:
    """Residual of delta integration by parts over the full shared window.

    form 1: int f^sigma g^Delta = [fg] - int f^Delta g
    form 2: int f g^Delta       = [fg] - int f^Delta g^sigma
    """
    f, g = _shared(f, g)
    if len(f) < 2:
        raise ProblemSizeError("integration by parts needs at least two shared points")
    lo, hi = f.lo, f.hi
    mu = f.scale.graininess[lo:hi]
    fd, gd = delta_derivative(f).values, delta_derivative(g).values
    if form == 1:
        lhs_integrand = shift_sigma(f).values * gd
        rhs_integrand = fd * g.values[:-1]
    elif form == 2:
        lhs_integrand = f.values[:-1] * gd
        rhs_integrand = fd * shift_sigma(g).values
    else:
        raise ValidationError(f"integration by parts form must be 1 or 2, got {form}")
    lhs = float(np.dot(mu, lhs_integrand))
    rhs_int = float(np.dot(mu, rhs_integrand))
    boundary = f.values[-1] * g.values[-1] - f.values[0] * g.values[0]
    res = abs(lhs - boundary + rhs_int)
    return _rel(res, lhs, boundary, rhs_int, mu * lhs_integrand, mu * rhs_integrand)


def check_commutation(f: GridFunction) -> float:
    """Residual of f^{sigma Delta} = a1 f^{Delta sigma} on T^{k^2}."""
    if len(f) < 3:
        raise ProblemSizeError("commutation check needs at least three points")
    sd = compose_sigma_delta(f, 1, 1).values
    ds = f.scale.a1 * compose_delta_sigma(f, 1, 1).values
    return _rel(np.max(np.abs(sd - ds)), sd, ds)
