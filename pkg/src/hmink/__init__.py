"""Sharp Minkowski-type inequalities in H^3(a): profiles, the Q_n iteration,
bound evaluators and an axisymmetric harmonic mean curvature flow."""

__version__ = "0.1.0"

from .profiles import SpaceForm, eta, xi  # noqa: E402
