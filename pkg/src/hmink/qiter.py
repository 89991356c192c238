"""Iteration Q_1 -> Q_2 -> ... toward the total-mean-curvature profile.

    Q_1(x)     = sqrt(16 pi eta - 2 a eta^2)
    Q_{n+1}(x) = sqrt(16 pi eta - 2 a eta^2 - 4 a int_0^x Q_n)
    P_n(x)     = -4 a int_0^x Q_n

For a < 0 the sequence increases pointwise to xi; for a = 0 it is stationary.

Grid integrals use the cube-root spline rule of ``cumulative_integral``, which
resolves the x^(1/3) behaviour at the origin. During the iteration the integral
is split as HO(Q_1) + trapezoid(Q_n - Q_1): the trapezoid weights are positive,
so the computed sequence is monotone in floating point exactly as the exact
one is, while the singular part is still integrated to high order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .numerics import GridFunction, cumulative_integral
from .profiles import SpaceForm, eta, eta_array, xi_array

__all__ = [
    "IterationConfig",
    "IterationReport",
    "q1",
    "q1_grid",
    "base_radicand",
    "next_q",
    "p_from_q",
    "fixed_point_residual",
    "xi_grid",
    "run_iteration",
    "GRID_METHOD",
]

GRID_METHOD = "cbrt"


@dataclass(frozen=True)
class IterationConfig:
    sf: SpaceForm = field(default_factory=lambda: SpaceForm(-1.0))
    x_max: float = 50.0
    n_points: int = 2001
    sup_tol: float = 1e-4
    max_n: int = 100

    def __post_init__(self):
        if not self.x_max > 0:
            raise ValueError("x_max must be positive")
        if self.n_points < 16:
            raise ValueError("n_points must be at least 16")
        if not self.sup_tol > 0:
            raise ValueError("sup_tol must be positive")
        if self.max_n < 1:
            raise ValueError("max_n must be at least 1")

    def grid(self):
        return np.linspace(0.0, self.x_max, self.n_points)


@dataclass
class IterationReport:
    config: IterationConfig
    xi: GridFunction
    iterates: List[GridFunction] = field(default_factory=list)
    gaps: List[float] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    converged: bool = False
    n_final: int = 0

    def to_dict(self):
        return {
            "a": self.config.sf.a,
            "x_max": self.config.x_max,
            "n_points": self.config.n_points,
            "gaps": [float(g) for g in self.gaps],
            "residuals": [float(r) for r in self.residuals],
            "converged": bool(self.converged),
            "n_final": int(self.n_final),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x"] + [f"q{k + 1}" for k in range(len(self.iterates))] + ["xi"])
        cols = [self.xi.xs] + [q.ys for q in self.iterates] + [self.xi.ys]
        for row in zip(*cols):
            writer.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()


def _sf(sf):
    return sf if isinstance(sf, SpaceForm) else SpaceForm(sf)


def base_radicand(eta_values, sf):
    """16 pi eta - 2 a eta^2, the Q-independent part of every radicand."""
    e = np.asarray(eta_values, dtype=float)
    return 16 * np.pi * e - 2 * _sf(sf).a * e * e


def q1(x, sf):
    """First iterate; coincides with xi when a = 0."""
    sf = _sf(sf)
    e = eta(x, sf)
    return math.sqrt(16 * math.pi * e - 2 * sf.a * e * e)


def q1_grid(xs, sf):
    return GridFunction(xs, np.sqrt(base_radicand(eta_array(xs, sf), sf)))


def xi_grid(xs, sf):
    return GridFunction(xs, xi_array(xs, sf))


def p_from_q(Q: GridFunction, sf, reference: Optional[GridFunction] = None) -> GridFunction:
    """x -> -4 a int_0^x Q on the grid of Q.

    With ``reference`` the integral is split into a high-order part on the
    reference and a trapezoid part on ``Q - reference``.
    """
    sf = _sf(sf)
    if sf.a == 0.0:
        return Q.with_values(np.zeros(len(Q)))
    if reference is None:
        prim = cumulative_integral(Q, GRID_METHOD).ys
    else:
        prim = (_primitive_cached(reference)
                + cumulative_integral(Q.with_values(Q.ys - reference.ys)).ys)
    return Q.with_values(-4.0 * sf.a * prim)


def _primitive_cached(ref: GridFunction):
    # the reference is fixed for a whole run; GridFunction is immutable
    cached = getattr(ref, "_hmink_primitive", None)
    if cached is None:
        cached = cumulative_integral(ref, GRID_METHOD).ys
        object.__setattr__(ref, "_hmink_primitive", cached)
    return cached


def next_q(Q: GridFunction, sf, reference: Optional[GridFunction] = None) -> GridFunction:
    """One application of the recursion on the grid of Q.

    Raises:
        ArithmeticError: negative radicand (impossible for valid nonnegative
            input with a <= 0; indicates corrupted state).
    """
    sf = _sf(sf)
    radicand = base_radicand(eta_array(Q.xs, sf), sf) + p_from_q(Q, sf, reference).ys
    if np.any(radicand < 0):
        k = int(np.argmin(radicand))
        raise ArithmeticError(f"negative radicand {radicand[k]:.3e} at x={Q.xs[k]:.6g}")
    return Q.with_values(np.sqrt(radicand))


def fixed_point_residual(Q: GridFunction, sf) -> GridFunction:
    """Q^2 + 4 a int_0^x Q - (16 pi eta - 2 a eta^2); vanishes at Q = xi."""
    sf = _sf(sf)
    lhs = Q.ys ** 2 - p_from_q(Q, sf).ys
    return Q.with_values(lhs - base_radicand(eta_array(Q.xs, sf), sf))


def run_iteration(cfg: IterationConfig) -> IterationReport:
    """Iterate from Q_1 until the sup-gap to xi is at most ``cfg.sup_tol``.

    Hitting ``max_n`` first is not an error: the report comes back with
    ``converged = False``.
    """
    xs = cfg.grid()
    xi_g = xi_grid(xs, cfg.sf)
    report = IterationReport(config=cfg, xi=xi_g)
    Q = Q1 = q1_grid(xs, cfg.sf)
    for n in range(1, cfg.max_n + 1):
        if n > 1:
            Q = next_q(Q, cfg.sf, reference=Q1)
        report.iterates.append(Q)
        report.gaps.append(float(np.max(np.abs(xi_g.ys - Q.ys))))
        report.residuals.append(fixed_point_residual(Q, cfg.sf).sup_norm())
        report.n_final = n
        if report.gaps[-1] <= cfg.sup_tol:
            report.converged = True
            break
    return report
