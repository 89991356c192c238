"""Numerical kernels: rootfinding, quadrature, grid primitives, RK4, differences."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import BracketError, NonFiniteError, SubdivisionLimitError

__all__ = [
    "GridFunction",
    "Tolerance",
    "DEFAULT_TOL",
    "find_root_bracketed",
    "integrate_adaptive",
    "cumulative_integral",
    "ode_advance",
    "derivative_fd",
]


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.abs_tol + self.rel_tol <= 0:
            raise ValueError("abs_tol + rel_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")

    def bound(self, scale):
        return max(self.abs_tol, self.rel_tol * abs(scale))


DEFAULT_TOL = Tolerance()


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples ``ys`` of a real function at abscissae ``xs`` on ``[0, xs[-1]]``.

    Arrays are copied and made read-only on construction.
    """

    xs: np.ndarray = field()
    ys: np.ndarray = field()

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float)
        ys = np.array(self.ys, dtype=float)
        if xs.ndim != 1 or ys.shape != xs.shape:
            raise ValueError("xs and ys must be 1-d and of equal length")
        if len(xs) < 2:
            raise ValueError("a GridFunction needs at least two points")
        if xs[0] != 0.0:
            raise ValueError("grid must start at 0")
        if not np.all(np.diff(xs) > 0):
            raise ValueError("grid must be strictly increasing")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("grid values must be finite")
        xs.flags.writeable = False
        ys.flags.writeable = False
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @classmethod
    def uniform(cls, x_max, n, func=None):
        xs = np.linspace(0.0, x_max, n)
        ys = np.zeros(n) if func is None else np.array([func(x) for x in xs])
        return cls(xs, ys)

    def with_values(self, ys):
        return GridFunction(self.xs, ys)

    def __call__(self, x):
        return np.interp(x, self.xs, self.ys)

    def __len__(self):
        return len(self.xs)

    def sup_norm(self):
        return float(np.max(np.abs(self.ys)))


def _checked(value, where):
    value = float(value)
    if not math.isfinite(value):
        raise NonFiniteError(f"non-finite value {value!r} at {where}")
    return value


def find_root_bracketed(
        f: Callable[[float], float],
        lo: float,
        hi: float,
        tol: Tolerance = DEFAULT_TOL,
        fprime: Optional[Callable[[float], float]] = None,
) -> float:
    """Root of ``f`` inside ``[lo, hi]`` by safeguarded Newton (or secant) steps.

    A step that leaves the current bracket, or fails to halve it fast enough,
    is replaced by bisection, so any bracket with a sign change converges.

    Raises:
        BracketError: ``f(lo)`` and ``f(hi)`` have the same strict sign.
        NonFiniteError: ``f`` returned NaN or infinity.
    """
    if lo > hi:
        lo, hi = hi, lo
    flo = _checked(f(lo), lo)
    fhi = _checked(f(hi), hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo}, {fhi}")

    # orient so that f(neg) < 0 < f(pos)
    neg, pos = (lo, hi) if flo < 0 else (hi, lo)
    x = 0.5 * (lo + hi)
    fx = _checked(f(x), x)
    x_prev, f_prev = neg, (flo if neg == lo else fhi)
    dx_old = dx = hi - lo
    for _ in range(tol.max_iter):
        if fx == 0.0:
            return x
        if fx < 0:
            neg = x
        else:
            pos = x
        left, right = min(neg, pos), max(neg, pos)

        if fprime is not None:
            slope = _checked(fprime(x), x)
        elif x != x_prev:
            slope = (fx - f_prev) / (x - x_prev)
        else:
            slope = 0.0
        fast = slope != 0.0 and left < x - fx / slope < right
        if fast and abs(fx / slope) <= 0.5 * abs(dx_old):
            dx_old, dx = dx, fx / slope
            x_new = x - dx
        else:
            dx_old = dx = 0.5 * (right - left)
            x_new = left + dx
        x_prev, f_prev = x, fx
        x = x_new
        fx = _checked(f(x), x)
        if abs(dx) <= tol.bound(x) or (right - left) <= tol.bound(x):
            break
    return min(max(x, lo), hi)


def integrate_adaptive(
        f: Callable[[float], float],
        a: float,
        b: float,
        tol: Tolerance = DEFAULT_TOL,
        max_depth: int = 40,
        max_intervals: int = 200_000,
) -> float:
    """Adaptive Simpson quadrature of ``f`` over ``[a, b]``.

    The tolerance is max(abs_tol, rel_tol * |I|), shared among subintervals in
    proportion to their width. Evaluation order is fixed, so results are
    deterministic.

    Raises:
        NonFiniteError: a sample of ``f`` is NaN or infinite.
        SubdivisionLimitError: ``max_depth`` or ``max_intervals`` was reached;
            the exception carries the best estimate.
    """
    if a > b:
        raise ValueError("integrate_adaptive requires a <= b")
    if a == b:
        return 0.0

    def ev(x):
        return _checked(f(x), x)

    fa, fm, fb = ev(a), ev(0.5 * (a + b)), ev(b)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    target = tol.bound(whole)
    total_width = b - a

    # explicit stack keeps evaluation order deterministic and avoids recursion limits
    stack = [(a, b, fa, fm, fb, whole, 0)]
    total = 0.0
    count = 0
    limit_hit = False
    while stack:
        lo, hi, flo, fmid, fhi, est, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = ev(lm), ev(rm)
        left = (mid - lo) / 6.0 * (flo + 4 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4 * frm + fhi)
        delta = left + right - est
        local_tol = target * (hi - lo) / total_width
        count += 1
        if abs(delta) <= 15 * local_tol or hi - lo <= 4 * np.spacing(max(abs(lo), abs(hi))):
            total += left + right + delta / 15.0
        elif depth >= max_depth or count >= max_intervals:
            limit_hit = True
            total += left + right + delta / 15.0
        else:
            stack.append((mid, hi, fmid, frm, fhi, right, depth + 1))
            stack.append((lo, mid, flo, flm, fmid, left, depth + 1))
    if limit_hit:
        raise SubdivisionLimitError("adaptive Simpson subdivision limit reached", total)
    return total


def cumulative_integral(g: GridFunction, method: str = "trapezoid") -> GridFunction:
    """Running integral x_k -> int_0^{x_k} g on the grid of ``g``.

    ``"trapezoid"`` is the composite trapezoid rule; its primitive is
    nondecreasing whenever ``g >= 0``.

    ``"cbrt"`` integrates a degree-9 interpolating spline in s = x**(1/3)
    against dx = 3 s^2 ds.
    Volume-parametrised sphere quantities (the profiles and every Q_n) are
    smooth in s but only Hölder-1/3 in x at the origin, so this route recovers
    high order there. Monotonicity is not guaranteed for rough data.
    """
    xs, ys = g.xs, g.ys
    if method == "trapezoid":
        out = np.empty_like(ys)
        out[0] = 0.0
        np.cumsum(0.5 * np.diff(xs) * (ys[1:] + ys[:-1]), out=out[1:])
        return GridFunction(xs, out)
    if method == "cbrt":
        degree = min(9, len(xs) - 1 - (len(xs) % 2 == 1))
        if degree < 3:
            return cumulative_integral(g, "trapezoid")
        s = np.cbrt(xs)
        spline = make_interp_spline(s, 3.0 * s * s * ys, k=degree)
        prim = spline.antiderivative()(s)
        prim -= prim[0]
        prim[0] = 0.0
        return GridFunction(xs, prim)
    raise ValueError(f"unknown method {method!r}")


def ode_advance(
        rhs: Callable[[float, np.ndarray], np.ndarray],
        state: Sequence[float],
        t: float,
        dt: float,
) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step.

    ``dt == 0`` returns a copy of ``state`` without evaluating ``rhs``.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    y = np.array(state, dtype=float)
    if dt == 0:
        return y

    def rate(tt, yy):
        k = np.asarray(rhs(tt, yy), dtype=float)
        if not np.all(np.isfinite(k)):
            raise NonFiniteError(f"non-finite rate at t={tt}")
        return k

    k1 = rate(t, y)
    k2 = rate(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rate(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rate(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def derivative_fd(f: Callable[[float], float], x: float, h: float) -> float:
    """Central difference (f(x+h) - f(x-h)) / (2h)."""
    if h <= 0:
        raise ValueError("h must be positive")
    fp = _checked(f(x + h), x + h)
    fm = _checked(f(x - h), x - h)
    return (fp - fm) / (2.0 * h)
