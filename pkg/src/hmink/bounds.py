"""Lower bounds for the total mean curvature M of a closed convex surface.

Every bound is a closed form in the area S, the enclosed volume V and the
curvature a. H is the trace of the second fundamental form throughout, so the
unit sphere of H^3(-1) has H = 2 coth(1).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import InfeasibleError
from .numerics import Tolerance, find_root_bracketed
from .profiles import SpaceForm, eta, xi

__all__ = [
    "SurfaceData",
    "BoundsReport",
    "ComparisonResult",
    "bound_euclidean",
    "bound_santalo",
    "bound_ghomi_spruck",
    "bound_sharp",
    "bound_bgl",
    "bound_bgl_a1",
    "bound_profile",
    "bound_gallego_solanes",
    "quermass_a1",
    "compare_sharp_vs_bgl",
    "double_disk",
    "santalo_violation_threshold",
    "santalo_gap",
    "bounds_report",
    "sweep_csv",
    "sobol_feasible_sweep",
    "FEASIBILITY_TOL",
]

FEASIBILITY_TOL = 1e-9
EQUALITY_TOL = 1e-8
_H3 = SpaceForm(-1.0)


def _sf(sf):
    return sf if isinstance(sf, SpaceForm) else SpaceForm(sf)


def _nonneg(name, value):
    if value < 0:
        raise ValueError(f"{name} must be nonnegative, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class SurfaceData:
    S: float
    V: float
    sf: SpaceForm
    M: Optional[float] = None

    def feasible(self, tol=FEASIBILITY_TOL):
        return self.S >= eta(self.V, self.sf) - tol


def bound_euclidean(S):
    """Classical Minkowski bound sqrt(16 pi S)."""
    return math.sqrt(16 * math.pi * _nonneg("S", S))


def bound_santalo(S, sf):
    """sqrt(16 pi S - 4 a S^2): the total mean curvature of the sphere of area S.

    Conjectured as a lower bound; false in general (see ``double_disk``).
    """
    S = _nonneg("S", S)
    return math.sqrt(16 * math.pi * S - 4 * _sf(sf).a * S * S)


def bound_ghomi_spruck(S, sf):
    S = _nonneg("S", S)
    return math.sqrt(16 * math.pi * S - 2 * _sf(sf).a * S * S)


def bound_sharp(S, V, sf):
    """sqrt(16 pi S - 2 a S^2 - 2 a eta(V)^2); equality on geodesic spheres."""
    sf = _sf(sf)
    S = _nonneg("S", S)
    e = eta(_nonneg("V", V), sf)
    return math.sqrt(16 * math.pi * S - 2 * sf.a * S * S - 2 * sf.a * e * e)


def bound_bgl_a1(S):
    """Right-hand side of the quermassintegral inequality A_1 >= ... in H^3."""
    S = _nonneg("S", S)
    return math.sqrt(S) * math.sqrt(S + 4 * math.pi) + 4 * math.pi * math.asinh(math.sqrt(S / (4 * math.pi)))


def bound_bgl(S, V, sf=_H3):
    """A_1 bound rewritten for M; stated only for standard H^3 (a = -1)."""
    if _sf(sf).a != -1.0:
        raise ValueError("the quermassintegral bound is only stated for a = -1")
    return bound_bgl_a1(S) + 2 * _nonneg("V", V)


def bound_profile(V, sf):
    return xi(_nonneg("V", V), _sf(sf))


def bound_gallego_solanes(S, sf):
    """Non-sharp linear bound sqrt(-a) S."""
    return _sf(sf).c * _nonneg("S", S)


def quermass_a1(M, V):
    """First quermassintegral A_1 = M - 2 V for surfaces in H^3."""
    return M - 2 * _nonneg("V", V)


@dataclass(frozen=True)
class ComparisonResult:
    f1: float
    f2: float
    gap: float
    equality: bool


def compare_sharp_vs_bgl(S, V, tol=FEASIBILITY_TOL):
    """Compare the sharp bound F1 with the quermassintegral bound F2 in H^3.

    Raises:
        InfeasibleError: S < eta(V) beyond ``tol``; no closed surface has
            this (S, V).
    """
    e = eta(_nonneg("V", V), _H3)
    if S < e - tol:
        raise InfeasibleError(f"S={S!r} below isoperimetric profile eta(V)={e!r}")
    f1 = bound_sharp(S, V, _H3)
    f2 = bound_bgl(S, V)
    return ComparisonResult(f1=f1, f2=f2, gap=f1 - f2, equality=abs(S - e) <= EQUALITY_TOL)


def double_disk(rho, angle=math.pi):
    """Flat double disk of geodesic radius ``rho`` in a totally geodesic H^2 of H^3.

    Both faces count towards the area, 2 * 2 pi (cosh rho - 1); the edge of
    length 2 pi sinh rho carries singular total mean curvature equal to its
    exterior dihedral ``angle`` (pi for a flat doubled disk) times length.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    S = 4 * math.pi * (math.cosh(rho) - 1.0)
    M = angle * 2 * math.pi * math.sinh(rho)
    return SurfaceData(S=S, V=0.0, sf=_H3, M=M)


def santalo_gap(rho, angle=math.pi):
    """M - santalo bound for the double disk; negative means the conjecture fails."""
    d = double_disk(rho, angle)
    return d.M - bound_santalo(d.S, _H3)


def santalo_violation_threshold(angle=math.pi, lo=0.1, hi=5.0):
    """Radius above which the double disk violates the Santalo bound."""
    return find_root_bracketed(lambda r: santalo_gap(r, angle), lo, hi,
                               Tolerance(abs_tol=1e-13, rel_tol=1e-13))


@dataclass(frozen=True)
class BoundsReport:
    S: float
    V: float
    a: float
    euclidean: float
    santalo: float
    ghomi_spruck: float
    sharp: float
    bgl: Optional[float]
    profile: float
    gallego_solanes: float
    quermass_a1_rhs: Optional[float]
    feasible: bool
    ordering_ok: bool

    JSON_KEYS = ("S", "V", "a", "euclidean", "santalo", "ghomi_spruck", "sharp",
                 "bgl", "profile", "gallego_solanes", "feasible")

    def to_dict(self):
        d = asdict(self)
        return {k: d[k] for k in self.JSON_KEYS}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)


def bounds_report(S, V, sf):
    sf = _sf(sf)
    S, V = _nonneg("S", S), _nonneg("V", V)
    eu = bound_euclidean(S)
    gs = bound_ghomi_spruck(S, sf)
    sh = bound_sharp(S, V, sf)
    is_h3 = sf.a == -1.0
    return BoundsReport(
        S=S, V=V, a=sf.a,
        euclidean=eu,
        santalo=bound_santalo(S, sf),
        ghomi_spruck=gs,
        sharp=sh,
        bgl=bound_bgl(S, V) if is_h3 else None,
        profile=bound_profile(V, sf),
        gallego_solanes=bound_gallego_solanes(S, sf),
        quermass_a1_rhs=bound_bgl_a1(S) if is_h3 else None,
        feasible=bool(S >= eta(V, sf) - FEASIBILITY_TOL),
        ordering_ok=bool(sh >= gs >= eu),
    )


def sweep_csv(rows):
    """CSV text for a sequence of BoundsReport, header first."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BoundsReport.JSON_KEYS)
    for rep in rows:
        d = rep.to_dict()
        writer.writerow([_fmt(d[k]) for k in BoundsReport.JSON_KEYS])
    return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    return f"{v:.17g}"


def sobol_feasible_sweep(n, v_max=50.0, s_span=100.0, seed=0):
    """Quasi-random feasible (S, V) pairs in H^3 with S in [eta(V), eta(V) + s_span]."""
    import warnings

    from scipy.stats import qmc

    with warnings.catch_warnings():
        # balance is only exact for powers of two; any n is still low-discrepancy
        warnings.simplefilter("ignore", UserWarning)
        pts = qmc.Sobol(d=2, scramble=True, seed=seed).random(n)
    V = pts[:, 0] * v_max
    e = np.array([eta(v, _H3) for v in V])
    S = e + pts[:, 1] * s_span
    return S, V, e
