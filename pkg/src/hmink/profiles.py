"""Geodesic spheres of H^3(a) and the isoperimetric / total-mean-curvature profiles.

Everything here is a closed form in the geodesic radius ``r`` except the
inversion ``r = r(V)``. With ``c = sqrt(-a)``::

    warp(r) = sinh(c r) / c
    V(r)    = 2 pi (sinh(c r) cosh(c r) - c r) / c^3
    S(r)    = 4 pi sinh(c r)^2 / c^2
    M(r)    = 8 pi sinh(c r) cosh(c r) / c

with the Euclidean limits 4/3 pi r^3, 4 pi r^2, 8 pi r at ``a = 0``.

The profiles are then ``eta(x) = S(r(x))`` and
``xi(x) = sqrt(16 pi eta - 4 a eta^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numerics import DEFAULT_TOL, Tolerance, find_root_bracketed

__all__ = [
    "SpaceForm",
    "SpherePoint",
    "warp",
    "warp_deriv",
    "sphere_volume",
    "sphere_area",
    "sphere_tmc",
    "sphere_point",
    "radius_from_volume",
    "eta",
    "xi",
    "xi_via_radius",
    "eta_deriv",
    "eta_array",
    "xi_array",
    "TAYLOR_SWITCH",
    "VOLUME_TAYLOR_SWITCH",
]

# below these values of sqrt(-a)*r the closed forms are replaced by 5-term series
TAYLOR_SWITCH = 1e-4
# sinh*cosh - z loses ~2*log10(1/z) digits, so the volume uses a longer series up to z = 0.3
VOLUME_TAYLOR_SWITCH = 0.3


@dataclass(frozen=True)
class SpaceForm:
    """The model space H^3(a) of constant sectional curvature ``a <= 0``."""

    a: float = -1.0

    def __post_init__(self):
        a = float(self.a)
        if not math.isfinite(a) or a > 0:
            raise ValueError(f"curvature must satisfy a <= 0, got {self.a!r}")
        object.__setattr__(self, "a", a)

    @property
    def c(self):
        return math.sqrt(-self.a)

    @property
    def euclidean(self):
        return self.a == 0.0


EUCLIDEAN = SpaceForm(0.0)
STANDARD = SpaceForm(-1.0)


def _as_space_form(sf):
    return sf if isinstance(sf, SpaceForm) else SpaceForm(sf)


# Series coefficients in z = c*r (even powers of z; the volume series runs to z^16).
_WARP_SERIES = [1.0 / math.factorial(2 * k + 1) for k in range(5)]
_VOL_SERIES = [2.0 ** (2 * k + 3) / math.factorial(2 * k + 3) for k in range(9)]
_AREA_SERIES = [2.0 ** (2 * k + 1) / math.factorial(2 * k + 2) for k in range(5)]
_TMC_SERIES = [2.0 ** (2 * k + 1) / math.factorial(2 * k + 1) for k in range(5)]


def _series(coeffs, z2):
    out = np.zeros_like(z2)
    for c in reversed(coeffs):
        out = out * z2 + c
    return out


def _evaluate(r, sf, closed, series, prefactor, switch=TAYLOR_SWITCH):
    """Evaluate closed(z)/scaling or prefactor(r)*series(z^2) elementwise."""
    sf = _as_space_form(sf)
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("radius must be nonnegative")
    c = sf.c
    z = c * r_arr
    small = z < switch
    out = np.empty_like(r_arr)
    out[small] = prefactor(r_arr[small]) * _series(series, z[small] ** 2)
    big = ~small
    if np.any(big):
        out[big] = closed(z[big], c)
    return float(out) if out.ndim == 0 else out


def warp(r, sf):
    """Warping factor sinh(c r)/c of the metric dr^2 + warp(r)^2 g_{S^2}."""
    return _evaluate(r, sf, lambda z, c: np.sinh(z) / c, _WARP_SERIES, lambda r: r)


def warp_deriv(r, sf):
    """d/dr warp = cosh(c r)."""
    sf = _as_space_form(sf)
    return np.cosh(sf.c * np.asarray(r, dtype=float))


def sphere_volume(r, sf):
    return _evaluate(
        r, sf,
        lambda z, c: 2 * np.pi * (np.sinh(z) * np.cosh(z) - z) / c ** 3,
        _VOL_SERIES,
        lambda r: np.pi * r ** 3,
        switch=VOLUME_TAYLOR_SWITCH,
    )


def sphere_area(r, sf):
    return _evaluate(
        r, sf,
        lambda z, c: 4 * np.pi * np.sinh(z) ** 2 / c ** 2,
        _AREA_SERIES,
        lambda r: 4 * np.pi * r ** 2,
    )


def sphere_tmc(r, sf):
    """Total mean curvature (H = trace II) of the geodesic sphere of radius r."""
    return _evaluate(
        r, sf,
        lambda z, c: 8 * np.pi * np.sinh(z) * np.cosh(z) / c,
        _TMC_SERIES,
        lambda r: 4 * np.pi * r,
    )


@dataclass(frozen=True)
class SpherePoint:
    r: float
    volume: float
    area: float
    tmc: float


def sphere_point(r, sf):
    return SpherePoint(float(r), sphere_volume(r, sf), sphere_area(r, sf), sphere_tmc(r, sf))


def _volume_bracket(x, sf):
    # V(r) >= 4/3 pi r^3, so the Euclidean radius bounds the root from above
    hi = (3.0 * x / (4.0 * math.pi)) ** (1.0 / 3.0)
    if not sf.euclidean:
        # for large volumes V ~ pi/c^3 e^{2cr}/2 gives a much tighter bound
        c = sf.c
        hi = min(hi, (math.log(2.0 * x * c ** 3 / math.pi + 1.0) / (2.0 * c)) + 1.0 / c)
        hi = max(hi, 1e-300)
        while sphere_volume(hi, sf) < x:
            hi *= 2.0
    return hi * (1.0 + 1e-12) + 1e-300


def radius_from_volume(x, sf, tol: Tolerance = DEFAULT_TOL):
    """Geodesic radius of the sphere in H^3(a) enclosing volume ``x``."""
    sf = _as_space_form(sf)
    x = float(x)
    if x < 0 or not math.isfinite(x):
        raise ValueError(f"volume must be finite and nonnegative, got {x!r}")
    if x == 0.0:
        return 0.0
    if sf.euclidean:
        return (3.0 * x / (4.0 * math.pi)) ** (1.0 / 3.0)
    hi = _volume_bracket(x, sf)
    # absolute tolerance relative to the bracket so tiny volumes keep full precision
    scaled = Tolerance(abs_tol=tol.abs_tol * min(1.0, hi), rel_tol=tol.rel_tol, max_iter=tol.max_iter)
    r = find_root_bracketed(
        lambda r: sphere_volume(r, sf) - x, 0.0, hi, scaled,
        fprime=lambda r: sphere_area(r, sf),
    )
    # one Newton polish: the bracket criterion may stop a step short of full precision
    s = sphere_area(r, sf)
    if s > 0:
        r -= (sphere_volume(r, sf) - x) / s
    return r


def eta(x, sf):
    """Isoperimetric profile: area of the geodesic sphere of volume x."""
    return sphere_area(radius_from_volume(x, sf), sf)


def xi(x, sf):
    """Total-mean-curvature profile of H^3(a), via xi^2 = 16 pi eta - 4 a eta^2."""
    sf = _as_space_form(sf)
    e = eta(x, sf)
    return math.sqrt(16 * math.pi * e - 4 * sf.a * e * e)


def xi_via_radius(x, sf):
    """Same profile evaluated as M(r(x)); kept as an independent cross-check."""
    return sphere_tmc(radius_from_volume(x, sf), sf)


def eta_deriv(x, sf):
    """eta'(x) = xi(x) / eta(x); singular at the origin."""
    if x <= 0:
        raise ValueError("eta_deriv is singular at x = 0 (eta ~ x^(2/3))")
    return xi(x, sf) / eta(x, sf)


def eta_array(xs, sf):
    sf = _as_space_form(sf)
    return _eta_cached(tuple(float(x) for x in np.asarray(xs, dtype=float).ravel()), sf.a)


@lru_cache(maxsize=64)
def _eta_cached(xs, a):
    sf = SpaceForm(a)
    out = np.array([eta(x, sf) for x in xs])
    out.flags.writeable = False
    return out


def xi_array(xs, sf):
    sf = _as_space_form(sf)
    e = eta_array(xs, sf)
    return np.sqrt(16 * np.pi * e - 4 * sf.a * e * e)
