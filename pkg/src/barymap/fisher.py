"""Riemannian structure of the space of positive densities.

Metric, Levi-Civita connection, constant-curvature tensor, closed-form
geodesics, the normalized geometric mean and the induced distance.  Geodesics
are represented in closed form; no integration is involved anywhere in this
module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tolerances as tol
from .measures import Measure, TangentMeasure, _check_same_grid, integrate


def fisher_inner(mu, tau, tau1):
    """Fisher inner product of two tangents at ``mu``."""
    grid = _check_same_grid(mu, tau, tau1)
    return integrate(grid, tau.density * tau1.density / mu.density)


def fisher_norm(mu, tau):
    return np.sqrt(max(fisher_inner(mu, tau, tau), 0.0))


def levi_civita(mu, tau, tau1):
    """Levi-Civita value on constant fields: -1/2 ((h/f)(h1/f) - G(tau,tau1)) f."""
    grid = _check_same_grid(mu, tau, tau1)
    g = fisher_inner(mu, tau, tau1)
    r = tau.density / mu.density
    r1 = tau1.density / mu.density
    return TangentMeasure(grid, -0.5 * (r * r1 - g) * mu.density)


def curvature(mu, tau1, tau2, tau):
    """Curvature tensor R(tau1, tau2) tau; constant sectional curvature 1/4."""
    grid = _check_same_grid(mu, tau1, tau2, tau)
    g2 = fisher_inner(mu, tau, tau2)
    g1 = fisher_inner(mu, tau, tau1)
    return TangentMeasure(grid, 0.25 * (g2 * tau1.density - g1 * tau2.density))


def geodesic_point(mu, tau, t):
    """Point at parameter ``t`` on the unit-speed geodesic from ``mu`` along ``tau``.

    The density is (cos(t/2) + sin(t/2) h/f)^2 f.  Raises once the curve
    leaves the cone of positive densities.
    """
    _check_same_grid(mu, tau)
    speed = fisher_norm(mu, tau)
    if abs(speed - 1.0) > 1e-8:
        raise ValueError(f"geodesic velocity must be unit Fisher norm, got {speed!r}")
    amp = np.cos(0.5 * t) + np.sin(0.5 * t) * tau.density / mu.density
    density = amp * amp * mu.density
    if np.any(density < tol.POSITIVITY_TOL):
        raise ValueError(f"geodesic density vanishes at t={t}; curve left the positive cone")
    return Measure(mu.grid, density)


def bhattacharyya(mu, mu1):
    """Affinity integral of the square-root densities; equals cos(distance/2)."""
    grid = _check_same_grid(mu, mu1)
    return integrate(grid, np.sqrt(mu.density * mu1.density))


def ell_distance(mu, mu1):
    """Riemannian distance 2 arccos of the Bhattacharyya affinity."""
    bc = bhattacharyya(mu, mu1)
    if bc > 1.0 + tol.ARCCOS_CLAMP or bc < -1.0 - tol.ARCCOS_CLAMP:
        raise ValueError(f"affinity {bc!r} outside [-1, 1] beyond round-off")
    return 2.0 * np.arccos(np.clip(bc, -1.0, 1.0))


def geometric_mean(mu, mu1):
    """Normalized geometric mean: sqrt(f f1) renormalized by the affinity."""
    grid = _check_same_grid(mu, mu1)
    bc = bhattacharyya(mu, mu1)
    if bc <= 0.0:
        raise ValueError("measures are farther apart than the geodesic regime allows")
    return Measure(grid, np.sqrt(mu.density * mu1.density) / bc)


@dataclass(frozen=True)
class GeodesicSegment:
    """Unit-speed geodesic segment over the parameter interval [0, length].

    ``end`` and ``mean`` cache the far endpoint and the normalized geometric
    mean of the endpoints when the segment was produced by :func:`connect`.
    A zero-length segment is degenerate and carries a zero velocity.
    """

    start: Measure
    initial_velocity: TangentMeasure
    length: float
    end: Measure | None = None
    mean: Measure | None = None

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("segment length must be non-negative")
        if self.length > 0:
            speed = fisher_norm(self.start, self.initial_velocity)
            if abs(speed - 1.0) > 1e-10:
                raise ValueError("segment velocity must be unit Fisher norm")

    def point_at(self, t):
        if self.length == 0.0:
            return self.start
        return geodesic_point(self.start, self.initial_velocity, t)


def connect(mu, mu1):
    """Unique unit-speed geodesic segment from ``mu`` to ``mu1``.

    The initial velocity is the tangent-line direction through the normalized
    geometric mean.  Identical measures yield a degenerate zero-length
    segment; pairs at distance >= pi are rejected.
    """
    grid = _check_same_grid(mu, mu1)
    bc = bhattacharyya(mu, mu1)
    if bc <= 0.0:
        raise ValueError("distance >= pi: no connecting geodesic inside the positive cone")
    ell = 2.0 * np.arccos(np.clip(bc, -1.0, 1.0))
    if ell < 1e-8:
        zero = TangentMeasure(grid, np.zeros(grid.size))
        return GeodesicSegment(mu, zero, 0.0, end=mu, mean=mu)
    sigma = geometric_mean(mu, mu1)
    raw = (sigma.density - mu.density) / np.tan(0.5 * ell)
    vel = TangentMeasure(grid, raw)
    speed = fisher_norm(mu, vel)
    vel = TangentMeasure(grid, raw / speed)
    return GeodesicSegment(mu, vel, ell, end=mu1, mean=sigma)


def evaluate_simplex(seg, t):
    """Barycentric weights of a geodesic point on the endpoint/mean 2-simplex.

    Returns (a, b, c) with a + b + c = 1 such that the geodesic density at
    ``t`` is a*f + b*f1 + c*sigma.
    """
    if seg.length == 0.0:
        raise ValueError("degenerate segment has no simplex representation")
    if t < 0.0 or t > seg.length:
        raise ValueError(f"t={t} outside [0, {seg.length}]")
    ell = seg.length
    s2 = np.sin(0.5 * ell) ** 2
    a = np.sin(0.5 * (ell - t)) ** 2 / s2
    b = np.sin(0.5 * t) ** 2 / s2
    c = 2.0 * np.cos(0.5 * ell) * np.sin(0.5 * (ell - t)) * np.sin(0.5 * t) / s2
    return a, b, c


def exp_map(mu, tau):
    """Exponential map: follow the geodesic along ``tau`` for its Fisher norm."""
    _check_same_grid(mu, tau)
    speed = fisher_norm(mu, tau)
    if speed == 0.0:
        return mu
    if speed >= np.pi:
        raise ValueError("tangent norm must be below pi")
    unit = TangentMeasure(mu.grid, tau.density / speed)
    return geodesic_point(mu, unit, speed)
