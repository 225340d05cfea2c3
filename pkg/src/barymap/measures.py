"""Positive probability densities on a discretized boundary sphere.

The reference measure is the normalized uniform measure on S^{d-1}.  All
densities are stored as samples of the Radon-Nikodym derivative against it,
so unit mass and zero mean reduce to weighted sums over the quadrature nodes.

Circle grids (d = 2) use the uniform trapezoid rule, which integrates
trigonometric polynomials exactly; sphere grids (d = 3) use Gauss-Legendre
nodes in the polar angle crossed with a uniform azimuth.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator
from scipy.spatial import cKDTree

from . import tolerances as tol

# fixed chunk size keeps quadrature sums bit-identical for any worker count
_SUM_CHUNK = 4096
_WORKERS = max(1, int(os.environ.get("BARYMAP_WORKERS", "1")))


def set_workers(n):
    """Set the worker count for data-parallel quadrature sums.

    Results are bit-identical for every ``n``: partial sums are taken over
    fixed-size chunks and combined by a fixed pairwise tree.
    """
    global _WORKERS
    _WORKERS = max(1, int(n))


def _tree_sum(parts):
    while len(parts) > 1:
        nxt = []
        for i in range(0, len(parts), 2):
            if i + 1 < len(parts):
                nxt.append(parts[i] + parts[i + 1])
            else:
                nxt.append(parts[i])
        parts = nxt
    return parts[0]


def _chunked_sum(values):
    n = values.shape[0]
    if n <= _SUM_CHUNK:
        return float(np.sum(values))
    bounds = range(0, n, _SUM_CHUNK)
    if _WORKERS > 1:
        with ThreadPoolExecutor(max_workers=_WORKERS) as pool:
            parts = list(pool.map(lambda i: np.sum(values[i:i + _SUM_CHUNK]), bounds))
    else:
        parts = [np.sum(values[i:i + _SUM_CHUNK]) for i in bounds]
    return float(_tree_sum(parts))


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes and weights discretizing S^{d-1} with unit total weight."""

    dim: int
    resolution: int
    nodes: np.ndarray      # (n, dim) unit vectors
    weights: np.ndarray    # (n,) positive, sums to 1
    # intrinsic coordinates used by the pushforward resampler
    _angles: np.ndarray | None = field(default=None, repr=False)     # d = 2
    _polar: np.ndarray | None = field(default=None, repr=False)      # d = 3
    _azimuth: np.ndarray | None = field(default=None, repr=False)    # d = 3

    def __post_init__(self):
        norms = np.linalg.norm(self.nodes, axis=1)
        if np.max(np.abs(norms - 1.0)) > tol.NODE_NORM_TOL:
            raise ValueError("grid nodes must be unit vectors")
        if abs(float(np.sum(self.weights)) - 1.0) > tol.WEIGHT_SUM_TOL:
            raise ValueError("grid weights must sum to 1")
        if np.any(self.weights <= 0):
            raise ValueError("grid weights must be positive")
        for arr in (self.nodes, self.weights):
            arr.setflags(write=False)

    @property
    def size(self):
        return self.nodes.shape[0]

    def __eq__(self, other):
        if not isinstance(other, QuadratureGrid):
            return NotImplemented
        return self.dim == other.dim and self.resolution == other.resolution

    def __hash__(self):
        return hash((self.dim, self.resolution))


def make_grid(dim, resolution):
    """Build the quadrature grid for S^{d-1}.

    d = 2: ``resolution`` equally spaced circle angles, uniform weights.
    d = 3: Gauss-Legendre polar levels x ``2*resolution`` uniform azimuths.
    """
    if dim not in (2, 3):
        raise ValueError(f"unsupported dimension {dim}; expected 2 or 3")
    if resolution < tol.MIN_RESOLUTION:
        raise ValueError(f"resolution {resolution} below minimum {tol.MIN_RESOLUTION}")
    if dim == 2:
        angles = 2.0 * np.pi * np.arange(resolution) / resolution
        nodes = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        weights = np.full(resolution, 1.0 / resolution)
        return QuadratureGrid(2, resolution, nodes, weights, _angles=angles)
    x, wx = np.polynomial.legendre.leggauss(resolution)
    # ascending polar angle (descending cos)
    x, wx = x[::-1], wx[::-1]
    polar = np.arccos(x)
    n_azi = 2 * resolution
    azimuth = 2.0 * np.pi * np.arange(n_azi) / n_azi
    sin_p = np.sin(polar)
    nodes = np.empty((resolution * n_azi, 3))
    weights = np.empty(resolution * n_azi)
    for j in range(resolution):
        rows = slice(j * n_azi, (j + 1) * n_azi)
        nodes[rows, 0] = sin_p[j] * np.cos(azimuth)
        nodes[rows, 1] = sin_p[j] * np.sin(azimuth)
        nodes[rows, 2] = x[j]
        weights[rows] = 0.5 * wx[j] / n_azi
    return QuadratureGrid(3, resolution, nodes, weights, _polar=polar, _azimuth=azimuth)


def integrate(grid, samples):
    """Weighted quadrature sum realizing the integral against the reference measure."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (grid.size,):
        raise ValueError(f"sample length {samples.shape} does not match grid size {grid.size}")
    return _chunked_sum(grid.weights * samples)


@dataclass(frozen=True)
class Measure:
    """Positive probability density sampled against the reference measure."""

    grid: QuadratureGrid
    density: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float)
        if d.shape != (self.grid.size,):
            raise ValueError("density length does not match grid size")
        if np.any(d < tol.POSITIVITY_TOL):
            raise ValueError("density must be strictly positive everywhere")
        if abs(integrate(self.grid, d) - 1.0) > tol.UNIT_MASS_TOL:
            raise ValueError("density must have unit total mass")
        object.__setattr__(self, "density", d)
        d.setflags(write=False)


@dataclass(frozen=True)
class TangentMeasure:
    """Signed density with zero mean against the reference measure."""

    grid: QuadratureGrid
    density: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float)
        if d.shape != (self.grid.size,):
            raise ValueError("density length does not match grid size")
        if abs(integrate(self.grid, d)) > tol.ZERO_MEAN_TOL:
            raise ValueError("tangent density must have zero mean")
        object.__setattr__(self, "density", d)
        d.setflags(write=False)


def _check_same_grid(*objs):
    g = objs[0].grid
    for o in objs[1:]:
        if o.grid != g:
            raise ValueError("grid mismatch between operands")
    return g


def measure_from_samples(grid, samples):
    """Normalize positive samples into a unit-mass measure."""
    samples = np.asarray(samples, dtype=float)
    if np.any(samples <= 0):
        raise ValueError("measure samples must be strictly positive")
    mass = integrate(grid, samples)
    if mass <= 0:
        raise ValueError("total mass must be positive")
    return Measure(grid, samples / mass)


def tangent_from_samples(grid, samples):
    """Project samples onto the zero-mean tangent space."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (grid.size,):
        raise ValueError("sample length does not match grid size")
    return TangentMeasure(grid, samples - integrate(grid, samples))


def kl_divergence(mu, mu1):
    """Kullback-Leibler divergence of ``mu1`` from ``mu`` (non-negative)."""
    grid = _check_same_grid(mu, mu1)
    return -integrate(grid, mu.density * np.log(mu1.density / mu.density))


def rho_alpha(mu, alpha):
    """Power embedding of a density: 2/(1-a) * f^{(1-a)/2}, or log f at a = 1."""
    f = mu.density
    if alpha == 1.0:
        return np.log(f)
    return (2.0 / (1.0 - alpha)) * f ** ((1.0 - alpha) / 2.0)


def rho_alpha_differential(mu, tau, alpha):
    """Differential of the power embedding applied to a tangent: f^{-(1+a)/2} h."""
    _check_same_grid(mu, tau)
    return mu.density ** (-(1.0 + alpha) / 2.0) * tau.density


# ---------------------------------------------------------------------------
# boundary maps and pushforwards
# ---------------------------------------------------------------------------

class BoundaryMap:
    """Bijection of the boundary sphere with node-wise Jacobian access.

    Parameters
    ----------
    forward, inverse : callable
        Vectorized maps of (n, d) unit-vector arrays to (n, d) arrays.
    jacobian : callable, optional
        Exact intrinsic Jacobian determinant of ``forward``; when absent
        Jacobians fall back to central finite differences.
    """

    def __init__(self, forward, inverse, jacobian=None):
        self.forward = forward
        self.inverse = inverse
        self.jacobian = jacobian

    def inverse_jacobian(self, points):
        """Jacobian determinant of the inverse map at ``points``."""
        if self.jacobian is not None:
            return 1.0 / self.jacobian(self.inverse(points))
        return sphere_map_jacobian(self.inverse, points)


def rotation_map(matrix):
    """Boundary map of an orthogonal matrix (Jacobian identically 1)."""
    matrix = np.asarray(matrix, dtype=float)
    if np.max(np.abs(matrix.T @ matrix - np.eye(matrix.shape[0]))) > tol.ORTHOGONALITY_TOL:
        raise ValueError("rotation matrix must be orthogonal")
    inv = matrix.T
    return BoundaryMap(
        forward=lambda p: p @ matrix.T,
        inverse=lambda p: p @ inv.T,
        jacobian=lambda p: np.ones(p.shape[0]),
    )


def circle_rotation(angle):
    """Rotation of the circle by ``angle``."""
    c, s = np.cos(angle), np.sin(angle)
    return rotation_map(np.array([[c, -s], [s, c]]))


def _tangent_frame(points):
    """Orthonormal tangent frames at unit vectors; (n, d-1, d)."""
    n, d = points.shape
    if d == 2:
        frame = np.empty((n, 1, 2))
        frame[:, 0, 0] = -points[:, 1]
        frame[:, 0, 1] = points[:, 0]
        return frame
    # pick the coordinate axis least aligned with each point
    frame = np.empty((n, 2, 3))
    ref = np.zeros((n, 3))
    ref[np.arange(n), np.argmin(np.abs(points), axis=1)] = 1.0
    t1 = np.cross(points, ref)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(points, t1)
    frame[:, 0, :] = t1
    frame[:, 1, :] = t2
    return frame


def sphere_map_jacobian(func, points, step=tol.FD_STEP_BOUNDARY):
    """Intrinsic Jacobian determinant of a sphere map by central differences.

    Great-circle perturbations along an orthonormal tangent frame give the
    differential columns; the determinant is taken in the tangent plane of the
    image point.  Raises if the map degenerates at some node.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    frame = _tangent_frame(points)
    cos_s, sin_s = np.cos(step), np.sin(step)
    derivs = []
    for k in range(d - 1):
        plus = func(cos_s * points + sin_s * frame[:, k, :])
        minus = func(cos_s * points - sin_s * frame[:, k, :])
        derivs.append((plus - minus) / (2.0 * step))
    center = func(points)
    # remove the radial component picked up by the chord approximation
    derivs = [v - np.sum(v * center, axis=1, keepdims=True) * center for v in derivs]
    if d == 2:
        jac = np.linalg.norm(derivs[0], axis=1)
    else:
        cross = np.cross(derivs[0], derivs[1])
        jac = np.linalg.norm(cross, axis=1)
    if np.any(jac < 1e-8):
        raise ValueError("degenerate boundary-map Jacobian")
    return jac


def _resample(grid, values, points):
    """Sample node values at off-grid boundary points.

    Periodic cubic interpolation on the circle; bilinear interpolation in
    (polar, azimuth) on the sphere with azimuthal wrap and clamped polar
    excursions beyond the outermost Gauss-Legendre levels.
    """
    if grid.dim == 2:
        ang = np.concatenate([grid._angles, [2.0 * np.pi]])
        vals = np.concatenate([values, values[:1]])
        spline = CubicSpline(ang, vals, bc_type="periodic")
        query = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2.0 * np.pi)
        return spline(query)
    polar = grid._polar
    azimuth = np.concatenate([grid._azimuth, [2.0 * np.pi]])
    table = values.reshape(grid.resolution, grid._azimuth.size)
    table = np.concatenate([table, table[:, :1]], axis=1)
    interp = RegularGridInterpolator((polar, azimuth), table, method="linear")
    q_pol = np.clip(np.arccos(np.clip(points[:, 2], -1.0, 1.0)), polar[0], polar[-1])
    q_azi = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2.0 * np.pi)
    return interp(np.stack([q_pol, q_azi], axis=1))


def _snap_to_nodes(grid, points):
    """Indices of grid nodes hit exactly by ``points``, or None."""
    tree = cKDTree(grid.nodes)
    dist, idx = tree.query(points)
    if np.max(dist) < tol.NODE_SNAP_TOL:
        return idx
    return None


def _pushforward_samples(bmap, grid, values, mass_tol):
    preimages = bmap.inverse(grid.nodes)
    snapped = _snap_to_nodes(grid, preimages)
    if snapped is not None:
        resampled = values[snapped]
    else:
        resampled = _resample(grid, values, preimages)
    jac = bmap.inverse_jacobian(grid.nodes)
    if np.any(jac <= 0):
        raise ValueError("boundary-map Jacobian must be positive")
    return resampled * jac


def pushforward(bmap, mu, mass_tol=tol.PUSHFORWARD_MASS_TOL):
    """Transport a measure through a boundary bijection.

    The density at a node is the resampled source density at the preimage
    times the inverse map's Jacobian.  Mass drift beyond ``mass_tol`` before
    renormalization signals a resampling failure and raises.  Rotations that
    permute the grid reproduce the permuted density exactly.
    """
    new = _pushforward_samples(bmap, mu.grid, mu.density, mass_tol)
    mass = integrate(mu.grid, new)
    if abs(mass - 1.0) > mass_tol:
        raise ValueError(f"pushforward mass drift {abs(mass - 1.0):.3e} exceeds {mass_tol:.1e}")
    if abs(mass - 1.0) > 1e-12:
        new = new / mass
    return Measure(mu.grid, new)


def pushforward_tangent(bmap, tau, mean_tol=tol.PUSHFORWARD_MASS_TOL):
    """Transport a tangent measure (the differential of the pushforward)."""
    new = _pushforward_samples(bmap, tau.grid, tau.density, mean_tol)
    drift = integrate(tau.grid, new)
    if abs(drift) > mean_tol:
        raise ValueError(f"pushforward mean drift {abs(drift):.3e} exceeds {mean_tol:.1e}")
    if abs(drift) > 1e-15:
        new = new - drift
    return TangentMeasure(tau.grid, new)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def measure_to_dict(mu):
    return {
        "dim": mu.grid.dim,
        "resolution": mu.grid.resolution,
        "density": mu.density.tolist(),
    }


def measure_from_dict(data):
    grid = make_grid(int(data["dim"]), int(data["resolution"]))
    return Measure(grid, np.asarray(data["density"], dtype=float))


def save_measure(mu, path):
    with open(path, "w") as fh:
        json.dump(measure_to_dict(mu), fh)
        fh.write("\n")


def load_measure(path):
    with open(path) as fh:
        return measure_from_dict(json.load(fh))
