"""Unit ball in R^d: distance to the boundary, Poisson kernel and Green function.

Kernels are normalized for the generator 1/2 Laplacian, so that
``int G(x, y) dy`` is the expected exit time of Brownian motion started at x.
Every function broadcasts over leading axes; points are arrays whose last
axis has length d.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class SingularArgumentError(ValueError):
    """Kernel evaluated on its singular set."""


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def ball_volume(d: int) -> float:
    return sphere_area(d) / d


@dataclass(frozen=True)
class Domain:
    d: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.d}")

    @property
    def boundary_area(self) -> float:
        return sphere_area(self.d)

    @property
    def volume(self) -> float:
        return ball_volume(self.d)

    def contains(self, x) -> np.ndarray:
        return np.linalg.norm(np.asarray(x, dtype=float), axis=-1) < 1.0


def rho(x) -> np.ndarray | float:
    """Distance from x to the complement of the unit ball."""
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    out = np.maximum(1.0 - r, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def expected_exit_time(x) -> np.ndarray | float:
    """E_x[zeta] = (1 - |x|^2) / d, i.e. the Green potential of the constant 1."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    out = (1.0 - np.sum(x * x, axis=-1)) / d
    return float(out) if np.ndim(out) == 0 else out


def angle_to_point(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def point_to_angle(z) -> np.ndarray | float:
    z = np.asarray(z, dtype=float)
    out = np.mod(np.arctan2(z[..., 1], z[..., 0]), 2.0 * np.pi)
    return float(out) if np.ndim(out) == 0 else out


def as_boundary_point(z, d: int | None = None) -> np.ndarray:
    """Embed a boundary point (angle for d=2, or vector) in R^d."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 0 or (d == 2 and z.shape[-1:] != (2,)):
        return angle_to_point(z)
    return z


def poisson_kernel(x, z, om=None, dist=None) -> np.ndarray | float:
    """Poisson kernel P_D(x, z) of the unit ball, x interior, z on the sphere.

    ``om`` and ``dist`` optionally supply 1 - |x|^2 and |x - z| computed
    without cancellation (points within round-off of the sphere or of z).
    Raises SingularArgumentError if some x lies on the boundary.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    d = x.shape[-1]
    if om is None:
        om = 1.0 - np.sum(x * x, axis=-1)
    if np.any(om <= 0.0):
        raise SingularArgumentError("Poisson kernel needs |x| < 1")
    if dist is None:
        diff = z - x
        dist2 = np.sum(diff * diff, axis=-1)
    else:
        dist2 = np.asarray(dist, dtype=float) ** 2
    out = om / (sphere_area(d) * dist2 ** (d / 2))
    return float(out) if np.ndim(out) == 0 else out


def green_from_parts(dist2, om_x, om_y, d: int):
    """Green function from |x - y|^2 and the factors 1 - |x|^2, 1 - |y|^2.

    Uses img2 - dist2 = (1 - |x|^2)(1 - |y|^2), which keeps full relative
    precision when a point sits within round-off of the sphere.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        q = om_x * om_y / dist2
        if d == 2:
            return np.log1p(q) / (2.0 * np.pi)
        c = 2.0 / ((d - 2) * sphere_area(d))
        return c * dist2 ** (1 - d / 2) * -np.expm1((1 - d / 2) * np.log1p(q))


def _green_raw(x, y):
    """Green function without argument checks (inf on the diagonal)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    dist2 = np.sum(diff * diff, axis=-1)
    om_x = 1.0 - np.sum(x * x, axis=-1)
    om_y = 1.0 - np.sum(y * y, axis=-1)
    return green_from_parts(dist2, om_x, om_y, x.shape[-1])


def green_function(x, y) -> np.ndarray | float:
    """Green function of 1/2 Laplacian on the unit ball.

    d = 2: (1/pi) log(|x| |y - x*| / |x - y|); d >= 3: the Newtonian
    potential minus its Kelvin image, doubled for the 1/2 normalization.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    if np.any(np.sum(diff * diff, axis=-1) == 0.0):
        raise SingularArgumentError("Green function is singular at x = y")
    out = np.maximum(_green_raw(x, y), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def boundary_measure_sample(rng: np.random.Generator, d: int, size=None) -> np.ndarray:
    """Uniform samples from sigma on the unit sphere (angles for d = 2)."""
    if d == 2:
        return rng.uniform(0.0, 2.0 * np.pi, size=size)
    shape = (d,) if size is None else (*np.atleast_1d(size), d)
    g = rng.standard_normal(shape)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def boundary_distance(z1, z2) -> np.ndarray | float:
    """Chordal distance |z1 - z2|. Scalars are read as angles on the unit circle."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    if z1.ndim == 0 and z2.ndim == 0:
        return chord_from_angles(z1, z2)
    out = np.linalg.norm(z1 - z2, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def chord_from_angles(t1, t2) -> np.ndarray | float:
    out = 2.0 * np.abs(np.sin((np.asarray(t1, dtype=float) - t2) / 2.0))
    return float(out) if np.ndim(out) == 0 else out


def uniform_ball_sample(rng: np.random.Generator, d: int, size: int, radius: float = 1.0) -> np.ndarray:
    if d == 2:
        u = angle_to_point(rng.uniform(0.0, 2.0 * np.pi, size))
    else:
        u = boundary_measure_sample(rng, d, size)
    r = radius * rng.uniform(size=size) ** (1.0 / d)
    return u * r[:, None]
