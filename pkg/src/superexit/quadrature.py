"""Product quadrature on the unit disc/ball and singularity-aware kernel operators.

Two families of rules live here:

* ``InteriorGrid`` - Gauss-Legendre in r (composite, clustered toward the
  sphere) times a uniform angular rule (d=2) or Gauss x uniform sphere rule
  (d=3). Used for the Green operator and the semilinear solver.
* ``GradedRule`` - polar coordinates centred at a boundary point z with
  geometric panels in |y - z|. Needed for integrands that blow up like a
  power of |y - z|, e.g. powers of the Poisson kernel.
"""
from __future__ import annotations

import inspect
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .geometry import (
    ball_volume,
    expected_exit_time,
    green_from_parts,
    point_to_angle,
    sphere_area,
)


class DivergenceError(ArithmeticError):
    """Quadrature failed to stabilize under refinement."""

    def __init__(self, msg, values=None):
        super().__init__(msg)
        self.values = values


def gauss_panels(edges, order: int):
    """Composite Gauss-Legendre nodes/weights on consecutive intervals."""
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * t[None, :] + 0.5 * (b + a)
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def radial_rule(n_r: int, order: int = 8, grading: float = 2.0):
    """n_r Gauss points on (0, 1), panels refined toward r = 1."""
    n_pan = max(1, int(np.ceil(n_r / order)))
    t = np.linspace(0.0, 1.0, n_pan + 1)
    edges = 1.0 - (1.0 - t) ** grading
    return gauss_panels(edges, order)


def sphere_rule(n_theta: int, n_phi: int | None = None):
    """Product rule on S^2: Gauss in cos(theta), uniform in phi. Returns unit vectors."""
    n_phi = 2 * n_theta if n_phi is None else n_phi
    c, wc = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    sn = np.sqrt(1.0 - c**2)
    pts = np.stack(
        [sn[:, None] * np.cos(phi)[None, :], sn[:, None] * np.sin(phi)[None, :],
         np.broadcast_to(c[:, None], (n_theta, n_phi))], axis=-1).reshape(-1, 3)
    w = np.repeat(wc, n_phi) * (2.0 * np.pi / n_phi)
    return pts, w, c, phi


@dataclass
class BoundaryGrid:
    d: int
    points: np.ndarray
    weights: np.ndarray
    shape: tuple
    coords: tuple = field(default_factory=tuple)

    @property
    def size(self) -> int:
        return len(self.weights)

    def interpolate(self, g, z) -> np.ndarray:
        """Piecewise-linear interpolation of grid values g at boundary points z."""
        z = np.atleast_2d(z)
        if self.d == 2:
            th = self.coords[0]
            ext = np.concatenate([th - 2 * np.pi, th, th + 2 * np.pi])
            return np.interp(np.atleast_1d(point_to_angle(z)), ext, np.tile(g, 3))
        c, phi = self.coords
        G = np.asarray(g).reshape(self.shape)
        cc = np.concatenate([[-1.0], c, [1.0]])
        # poles: azimuthal mean of the nearest ring
        G = np.concatenate([G[:1].mean(1, keepdims=True).repeat(G.shape[1], 1), G,
                            G[-1:].mean(1, keepdims=True).repeat(G.shape[1], 1)])
        pp = np.concatenate([phi - 2 * np.pi, phi, phi + 2 * np.pi])
        G = np.tile(G, (1, 3))
        f = RegularGridInterpolator((cc, pp), G)
        ph = np.mod(np.arctan2(z[:, 1], z[:, 0]), 2 * np.pi)
        return f(np.stack([np.clip(z[:, 2], -1, 1), ph], axis=-1))


def boundary_grid(d: int, n: int) -> BoundaryGrid:
    """d=2: n uniform angles. d=3: n Gauss rings x 2n azimuths."""
    if d == 2:
        th = 2.0 * np.pi * np.arange(n) / n
        pts = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return BoundaryGrid(2, pts, np.full(n, 2.0 * np.pi / n), (n,), (th,))
    if d == 3:
        pts, w, c, phi = sphere_rule(n)
        return BoundaryGrid(3, pts, w, (n, 2 * n), (c, phi))
    raise ValueError("boundary grids are implemented for d = 2, 3")


@dataclass
class InteriorGrid:
    """Radial x angular product rule on the unit ball.

    Node ordering is radius-major: node index = i_r * n_ang + i_ang.
    """
    d: int
    r: np.ndarray
    wr: np.ndarray
    ang: BoundaryGrid
    nodes: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        self.nodes = (self.r[:, None, None] * self.ang.points[None, :, :]).reshape(-1, self.d)
        self.weights = (self.wr[:, None] * self.r[:, None] ** (self.d - 1)
                        * self.ang.weights[None, :]).ravel()

    @property
    def n_r(self) -> int:
        return len(self.r)

    @property
    def size(self) -> int:
        return len(self.weights)

    def interpolate(self, f, x) -> np.ndarray:
        """Linear interpolation of node values at arbitrary interior points."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        F = np.asarray(f, dtype=float).reshape(self.n_r, -1)
        rx = np.linalg.norm(x, axis=-1)
        # angular interpolation ring by ring, then linear in r
        u = np.where(rx[:, None] > 0, x / np.where(rx[:, None] > 0, rx[:, None], 1.0), 0.0)
        u[rx == 0, 0] = 1.0
        rings = np.stack([self.ang.interpolate(F[i], u) for i in range(self.n_r)])
        centre = F[0].mean()
        rr = np.concatenate([[0.0], self.r])
        out = np.empty(len(x))
        for k in range(len(x)):
            out[k] = np.interp(rx[k], rr, np.concatenate([[centre], rings[:, k]]))
        return out


def interior_grid(d: int, n_r: int = 48, n_ang: int = 96, order: int = 8) -> InteriorGrid:
    """Reference product rule. For d=3, n_ang is the number of polar rings."""
    r, wr = radial_rule(n_r, order)
    return InteriorGrid(d, r, wr, boundary_grid(d, n_ang))


def _values(f, pts, grid_size):
    if callable(f):
        return np.asarray(f(pts), dtype=float)
    f = np.asarray(f, dtype=float)
    if f.ndim == 0:
        return np.full(grid_size, float(f))
    return f


def apply_green(f, x, grid: InteriorGrid, c=None) -> float:
    """int G(x, y) f(y) dy by the product rule with the value at x subtracted.

    ``f`` is a callable on (N, d) arrays, a scalar, or values at grid nodes.
    The constant part c = f(x) is integrated exactly through the exit-time
    identity int G(x, y) dy = (1 - |x|^2)/d; the remainder vanishes at the
    singular point.
    """
    x = np.asarray(x, dtype=float)
    fv = _values(f, grid.nodes, grid.size)
    if c is None:
        if callable(f):
            c = float(np.asarray(f(x[None, :]), dtype=float)[0])
        elif np.ndim(f) == 0:
            c = float(f)
        else:
            c = float(grid.interpolate(fv, x)[0])
    diff = grid.nodes - x
    dist2 = np.sum(diff * diff, axis=-1)
    om_x = 1.0 - x @ x
    om_y = 1.0 - np.sum(grid.nodes**2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        G = green_from_parts(dist2, om_x, om_y, grid.d)
        term = np.where(dist2 > 0, G * (fv - c), 0.0)
    return float(np.sum(grid.weights * term) + c * expected_exit_time(x))


def apply_poisson(g, x, bgrid: BoundaryGrid) -> float:
    """Harmonic extension int P(x, z) g(z) sigma(dz), with g(x/|x|) subtracted."""
    x = np.asarray(x, dtype=float)
    gv = _values(g, bgrid.points, bgrid.size)
    r = np.linalg.norm(x)
    if r > 0:
        xh = (x / r)[None, :]
        if callable(g):
            c = float(np.asarray(g(xh), dtype=float)[0])
        elif np.ndim(g) == 0:
            c = float(g)
        else:
            c = float(bgrid.interpolate(gv, xh)[0])
    else:
        c = 0.0
    diff = bgrid.points - x
    dist2 = np.sum(diff * diff, axis=-1)
    P = (1.0 - r * r) / (sphere_area(bgrid.d) * dist2 ** (bgrid.d / 2))
    return float(np.sum(bgrid.weights * P * (gv - c)) + c)


@dataclass
class GradedRule:
    """Rule on the ball in polar coordinates about a boundary point z.

    y = z + s e, where e makes angle psi with the inward normal -z and
    |psi| < arccos(s/2). ``om`` holds 1 - |y|^2 = s (2 cos psi - s) computed
    without cancellation; ``s`` is |y - z|.
    """
    d: int
    z: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    s: np.ndarray
    om: np.ndarray

    @property
    def size(self) -> int:
        return len(self.weights)


def _tangent_frame(z):
    z = np.asarray(z, dtype=float)
    d = len(z)
    if d == 2:
        return [np.array([-z[1], z[0]])]
    a = np.eye(3)[np.argmin(np.abs(z))]
    u = np.cross(z, a)
    u /= np.linalg.norm(u)
    return [u, np.cross(z, u)]


def graded_rule(z, n_panels: int = 60, order: int = 8, n_psi: int = 48,
                n_phi: int = 24, ratio: float = 0.5) -> GradedRule:
    """Geometric panels s in [2 ratio^(k+1), 2 ratio^k], k < n_panels."""
    z = np.asarray(z, dtype=float)
    d = len(z)
    edges = 2.0 * ratio ** np.arange(n_panels, -1, -1, dtype=float)
    # arccos(s/2) has a square-root end point at s = 2
    top = 2.0 - 2.0 ** -np.arange(1, 25, dtype=float)
    edges = np.concatenate([edges[edges < 1.0], top[top > 1.0 - 1e-15], [2.0]])
    edges = np.unique(edges)
    s, ws = gauss_panels(edges, order)
    t, wt = np.polynomial.legendre.leggauss(n_psi)
    lim = np.arccos(s / 2.0)
    psi = lim[:, None] * t[None, :]
    wpsi = lim[:, None] * wt[None, :]
    n = -z
    frame = _tangent_frame(z)
    if d == 2:
        e = (np.cos(psi)[..., None] * n + np.sin(psi)[..., None] * frame[0])
        pts = z + s[:, None, None] * e
        w = ws[:, None] * s[:, None] * wpsi
        S = np.broadcast_to(s[:, None], psi.shape)
        om = S * (2.0 * np.cos(psi) - S)
    elif d == 3:
        # psi in (0, lim) only; the azimuth covers the rest
        t2, wt2 = np.polynomial.legendre.leggauss(n_psi)
        psi = lim[:, None] * 0.5 * (t2[None, :] + 1.0)
        wpsi = lim[:, None] * 0.5 * wt2[None, :]
        phi = 2.0 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
        tang = np.cos(phi)[:, None] * frame[0] + np.sin(phi)[:, None] * frame[1]
        e = (np.cos(psi)[..., None, None] * n
             + np.sin(psi)[..., None, None] * tang[None, None, :, :])
        pts = z + s[:, None, None, None] * e
        w = (ws[:, None] * s[:, None] ** 2 * np.sin(psi) * wpsi)[..., None] * (2 * np.pi / n_phi)
        w = np.broadcast_to(w, pts.shape[:-1])
        S = np.broadcast_to(s[:, None, None], pts.shape[:-1])
        cp = np.broadcast_to(np.cos(psi)[..., None], pts.shape[:-1])
        om = S * (2.0 * cp - S)
    else:
        raise ValueError("graded rules are implemented for d = 2, 3")
    return GradedRule(d, z, pts.reshape(-1, d), np.ascontiguousarray(w).ravel(),
                      np.broadcast_to(S, pts.shape[:-1]).ravel().copy(), om.ravel())


def _atoms(mu, d):
    pts = np.atleast_2d(np.asarray([a[0] for a in mu], dtype=float))
    m = np.asarray([a[1] for a in mu], dtype=float)
    if pts.shape[1] != d:
        raise ValueError("mu atom dimension mismatch")
    return pts, m


def _keywords(f) -> set:
    try:
        return set(inspect.signature(f).parameters)
    except (TypeError, ValueError):
        return set()


def _eval(f, pts, om, s=None):
    """Call f(pts) passing the exact 1 - |y|^2 and |y - z| when f asks for them."""
    kw = _keywords(f)
    extra = {}
    if "om" in kw:
        extra["om"] = om
    if "s" in kw:
        extra["s"] = s
    return np.asarray(f(pts, **extra), dtype=float)


def _weighted_integral(F, pts, w, om, atoms, masses, d, s=None, z=None):
    """sum_a m_a int G(x_a, y) F(y) dy with F(x_a) subtracted per atom."""
    total = 0.0
    Fv = F(pts, om, s)
    for xa, ma in zip(atoms, masses):
        diff = pts - xa
        dist2 = np.sum(diff * diff, axis=-1)
        G = green_from_parts(dist2, 1.0 - xa @ xa, om, d)
        sa = None if z is None else np.atleast_1d(np.linalg.norm(xa - z))
        ca = float(F(xa[None, :], np.atleast_1d(1.0 - xa @ xa), sa)[0])
        term = np.where(dist2 > 0, G * (Fv - ca), 0.0)
        total += ma * (np.sum(w * term) + ca * expected_exit_time(xa))
    return total


def lp_norm(f, p: float, mu, d: int = 2, singular_point=None, levels: int = 3,
            rtol: float = 0.02, base: int = 24) -> float:
    """(int |f(x)|^p G_D mu(x) dx)^(1/p) with G_D mu = sum_a m_a G(x_a, .).

    ``f`` is a callable on (N, d) arrays; keywords ``om`` and ``s``, if
    present, receive 1 - |y|^2 and |y - singular_point| computed without
    cancellation. If f blows up at a boundary point,
    pass it as ``singular_point`` so the rule is graded there. The
    resolution is doubled ``levels - 1`` times; DivergenceError is raised when
    the last relative change exceeds ``rtol``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    atoms, masses = _atoms(mu, d)
    if np.any(np.linalg.norm(atoms, axis=-1) >= 1):
        raise ValueError("mu atoms must be interior")

    def F(y, om, s=None):
        return np.abs(_eval(f, y, om, s)) ** p

    if singular_point is not None:
        levels = min(levels, 2)
    vals = []
    for lev in range(levels):
        k = 2**lev
        if singular_point is None:
            g = interior_grid(d, n_r=base * k, n_ang=2 * base * k if d == 2 else base * k // 2)
            pts, w = g.nodes, g.weights
            om = 1.0 - np.sum(pts**2, axis=-1)
            z = None if singular_point is None else np.asarray(singular_point, dtype=float)
            s = None
        else:
            # s_min = 2^(1 - 80 k) keeps |y - z|^-2p inside double range
            z = np.asarray(singular_point, dtype=float)
            g = graded_rule(z, n_panels=80 * k, n_psi=base * k if d == 2 else base // 2 * k)
            pts, w, om, s = g.points, g.weights, g.om, g.s
        vals.append(_weighted_integral(F, pts, w, om, atoms, masses, d, s=s, z=z))
    vals = np.asarray(vals)
    if not np.all(np.isfinite(vals)):
        raise DivergenceError("non-finite quadrature value", vals)
    rel = abs(vals[-1] - vals[-2]) / max(abs(vals[-1]), 1e-300) if levels > 1 else 0.0
    if rel > rtol:
        raise DivergenceError(f"lp_norm not stable under refinement (rel change {rel:.3g})", vals)
    return float(vals[-1] ** (1.0 / p))


def total_volume(grid) -> float:
    return float(np.sum(grid.weights))


__all__ = [
    "DivergenceError", "BoundaryGrid", "InteriorGrid", "GradedRule",
    "gauss_panels", "radial_rule", "sphere_rule", "boundary_grid", "interior_grid",
    "graded_rule", "apply_green", "apply_poisson", "lp_norm", "total_volume", "ball_volume",
]
