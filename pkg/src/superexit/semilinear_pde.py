"""Integral equation w + G_D[w^(1+beta)] = h, h = G_D phi + P_D g, on the
unit disc (FFT Nystrom) and on the ball for axisymmetric data (ring
kernels), with a radial shooting oracle and Monte-Carlo Laplace functionals.
"""
from __future__ import annotations

import functools
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp
from scipy.optimize import brentq
from scipy.sparse.linalg import LinearOperator, gmres
from scipy.special import ellipe, ellipkm1

from .branching_sim import SimConfig, run_replicas
from .geometry import expected_exit_time, green_function
from .quadrature import boundary_grid, gauss_panels, interior_grid, InteriorGrid

log = logging.getLogger(__name__)


class NonConvergenceError(ArithmeticError):
    def __init__(self, msg, residual=float("nan"), history=None):
        super().__init__(msg)
        self.residual = residual
        self.history = history or []


class BracketingError(ArithmeticError):
    pass


def spow(u, beta: float):
    """Sign-safe u^(1+beta) = |u|^beta u."""
    return np.abs(u) ** beta * u


# ---------------------------------------------------------------- radial oracle

def _shoot(v0: float, beta: float, d: int, cap: float) -> float:
    """v(1) for v'' + (d-1)/r v' = 2 v^(1+beta), v(0) = v0; returns +inf on blow-up."""
    if v0 == 0.0:
        return 0.0
    r0 = 1e-6
    c = v0 ** (1 + beta) / d
    y0 = [v0 + c * r0 * r0, 2 * c * r0]

    def rhs(r, y):
        return [y[1], 2 * abs(y[0]) ** beta * y[0] - (d - 1) / r * y[1]]

    def blow(r, y):
        return y[0] - cap
    blow.terminal = True
    sol = solve_ivp(rhs, (r0, 1.0), y0, method="DOP853", rtol=1e-13, atol=1e-14 * max(1.0, v0),
                    events=blow)
    if sol.status == 1:
        return math.inf
    return float(sol.y[0, -1])


def radial_shoot(lam: float, beta: float, d: int = 2, tol: float = 1e-8) -> float:
    """v(0) of the radial solution with v(1) = lam, by root bracketing on v(0)."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0:
        return 0.0
    cap = 10.0 * lam + 10.0
    f = lambda v0: min(_shoot(v0, beta, d, cap), cap) - lam
    lo, hi = 0.0, float(lam)
    if not (f(lo) < 0 < f(hi) or f(hi) == 0):
        raise BracketingError(f"no sign change on [0, {lam}]")
    if f(hi) == 0:
        return hi
    v0 = brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    if abs(_shoot(v0, beta, d, cap) - lam) > tol * max(1.0, lam):
        raise BracketingError("shooting residual above tolerance")
    return float(v0)


# ---------------------------------------------------------------- operators

class _Disc:
    """Green operator on a d=2 product grid; each ring's coupling to each
    other ring is circulant in angle, so it is applied by FFT."""

    def __init__(self, grid: InteriorGrid):
        self.grid = grid
        nr, na = grid.n_r, grid.ang.size
        r = grid.r
        W = (grid.wr * r * grid.ang.weights[0]).astype(float)  # per-node weight on ring b
        xa = np.stack([r, np.zeros(nr)], axis=1)                # ring a at angle 0
        yb = r[:, None, None] * grid.ang.points[None, :, :]     # (nr, na, 2)
        Gm = np.zeros((nr, nr, na))
        for a in range(nr):
            diff = yb - xa[a]
            dist2 = np.sum(diff * diff, axis=-1)
            om_x = 1 - r[a] ** 2
            om_y = 1 - r**2
            q = om_x * om_y[:, None] / np.where(dist2 > 0, dist2, 1.0)
            g = np.log1p(q) / (2 * np.pi)
            g[a, 0] = 0.0
            Gm[a] = g * W[:, None]
        self.diag = (1 - r * r) / 2 - Gm.sum(axis=(1, 2))
        self.Ghat = np.fft.rfft(Gm, axis=2)
        self.W = W
        self.nr, self.na = nr, na
        self.nodes = grid.nodes
        self.size = grid.size

    def apply(self, f: np.ndarray) -> np.ndarray:
        F = f.reshape(self.nr, self.na)
        # coupling depends on |theta_j - theta_i| only: a circular convolution
        Fh = np.fft.rfft(F, axis=1)
        out = np.fft.irfft(np.einsum("abk,bk->ak", self.Ghat, Fh), n=self.na, axis=1)
        return (out + self.diag[:, None] * F).ravel()

    def row(self, x) -> np.ndarray:
        """Quadrature weights G(x, y_j) W_j at an off-node point x."""
        y = self.nodes
        return green_function(np.broadcast_to(x, y.shape), y) * np.repeat(self.W, self.na)

    def exit_time(self, x) -> float:
        return float(expected_exit_time(np.asarray(x)))


def _ring_green(rx, zx, ry, zy):
    """int_0^{2 pi} G_D(x, y) dphi_y for the unit ball in R^3 (1/2 Laplacian)."""
    A1 = rx * rx + ry * ry + (zx - zy) ** 2
    B = 2 * rx * ry
    s2y = ry * ry + zy * zy
    A2 = s2y * (rx * rx + zx * zx) - 2 * zx * zy + 1.0
    p1 = np.clip((A1 - B) / np.where(A1 + B > 0, A1 + B, 1.0), 1e-300, 1.0)
    p2 = np.clip((A2 - B) / (A2 + B), 1e-300, 1.0)
    t1 = 4 * ellipkm1(p1) / np.sqrt(A1 + B)
    t2 = 4 * ellipkm1(p2) / np.sqrt(A2 + B)
    return (t1 - t2) / (2 * np.pi)


def _ring_poisson(r, th, t):
    """int_0^{2 pi} P_D(x, z) dphi_z, x at (r, polar th), z at polar t."""
    A = 1 + r * r - 2 * r * np.cos(th) * np.cos(t)
    B = 2 * r * np.sin(th) * np.sin(t)
    m = np.where(A + B > 0, 2 * B / (A + B), 0.0)
    return (1 - r * r) / (4 * np.pi) * 4 * ellipe(m) / ((A - B) * np.sqrt(A + B))


@dataclass
class AxisGrid:
    """Gauss product rule in (r, polar angle) for axisymmetric data in d=3."""
    r: np.ndarray
    wr: np.ndarray
    th: np.ndarray
    wth: np.ndarray

    @property
    def size(self) -> int:
        return len(self.r) * len(self.th)

    @property
    def rz(self):
        R, T = np.meshgrid(self.r, self.th, indexing="ij")
        return (R * np.sin(T)).ravel(), (R * np.cos(T)).ravel()

    @property
    def weights(self) -> np.ndarray:
        # per-ring volume weight without the 2 pi (ring kernels integrate phi)
        return (self.wr[:, None] * self.r[:, None] ** 2 * np.sin(self.th)[None, :]
                * self.wth[None, :]).ravel()

    def cartesian(self) -> np.ndarray:
        rho, z = self.rz
        return np.stack([rho, np.zeros_like(rho), z], axis=1)


def axis_grid(scale: float, order: int = 6, n_coarse: int = 4) -> AxisGrid:
    """Panels refined geometrically toward r = 1 and toward the pole th = 0
    down to ``scale``/8."""
    k = max(1, int(np.ceil(np.log2(8.0 / scale))))
    er = np.concatenate([np.linspace(0, 0.5, n_coarse + 1)[:-1], 1 - 0.5 * 2.0 ** -np.arange(k + 1), [1.0]])
    et = np.concatenate([[0.0], scale / 8 * 2.0 ** np.arange(k + 1)])
    et = et[et < np.pi / 2]
    et = np.concatenate([et, np.linspace(et[-1], np.pi, n_coarse + 2)[1:]])
    r, wr = gauss_panels(np.unique(er), order)
    th, wth = gauss_panels(np.unique(et), order)
    return AxisGrid(r, wr, th, wth)


class _Axis:
    """Dense Green operator on an axisymmetric (r, th) grid in d=3."""

    def __init__(self, grid: AxisGrid):
        self.grid = grid
        rho, z = grid.rz
        W = grid.weights
        M = _ring_green(rho[:, None], z[:, None], rho[None, :], z[None, :]) * W[None, :]
        np.fill_diagonal(M, 0.0)
        self.diag = (1 - (rho**2 + z**2)) / 3 - M.sum(axis=1)
        self.M = M
        self.rho, self.z, self.W = rho, z, W
        self.size = grid.size
        self.nodes = grid.cartesian()

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.M @ f + self.diag * f

    def row(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        rx, zx = np.hypot(x[0], x[1]), x[2]
        g = _ring_green(rx, zx, self.rho, self.z)
        return g * self.W

    def exit_time(self, x) -> float:
        return float((1 - np.sum(np.asarray(x) ** 2)) / 3)


# ---------------------------------------------------------------- problems

@dataclass
class BVProblem:
    """w + G_D[w^(1+beta)] = G_D phi + P_D g on a fixed grid.

    ``h_nodes`` and ``h_at`` carry the right-hand side; builders below
    construct them from boundary data g >= 0 and sources phi >= 0.
    """
    beta: float
    op: object
    h_nodes: np.ndarray
    h_at: Callable
    tol: float = 1e-10
    max_iter: int = 20_000
    omega: float = 0.5


@dataclass
class SemilinearField:
    problem: BVProblem
    values: np.ndarray
    residual: float
    history: list = field(default_factory=list, repr=False)

    @property
    def nodes(self) -> np.ndarray:
        return self.problem.op.nodes

    def at(self, x) -> float:
        """w(x) off the grid: the Nystrom interpolant solves a scalar equation
        w + sum_j G(x, y_j) W_j (w_j^(1+b) - w^(1+b)) + w^(1+b) E(x) = h(x)."""
        pb = self.problem
        row = pb.op.row(x)
        fj = spow(self.values, pb.beta)
        base = float(row @ fj)
        S = float(row.sum())
        E = pb.op.exit_time(x)
        hx = float(pb.h_at(np.asarray(x, float)))
        F = lambda w: w + base + spow(w, pb.beta) * (E - S) - hx
        lo, hi = 0.0, max(hx, 0.0)
        if F(hi) <= 0:
            return hi
        if F(lo) >= 0:
            return lo
        return float(brentq(F, lo, hi, xtol=1e-14 * max(1.0, hx), rtol=1e-15))


def _newton(pb: BVProblem, w: np.ndarray, res: float, hist: list, max_iter: int = 60):
    """Newton steps with GMRES on J = I + G (1+beta)|w|^beta, backtracking so
    the sup-norm residual decreases."""
    op, h = pb.op, pb.h_nodes
    Fm = lambda u: u + op.apply(spow(u, pb.beta)) - h
    F = Fm(w)
    scale = max(1.0, float(np.max(np.abs(h))))
    dense = getattr(op, "M", None)
    for _ in range(max_iter):
        if res <= pb.tol * scale:
            break
        dd = (1 + pb.beta) * np.abs(w) ** pb.beta
        if dense is not None:
            J = dense * dd[None, :]
            J[np.diag_indices_from(J)] += 1 + op.diag * dd
            step = np.linalg.solve(J, F)
        else:
            J = LinearOperator((op.size, op.size), matvec=lambda v: v + op.apply(dd * v))
            step, info = gmres(J, F, rtol=1e-12, atol=0.0, restart=80, maxiter=20)
        lam = 1.0
        while lam > 1e-6:
            w_new = w - lam * step
            F_new = Fm(w_new)
            r_new = float(np.max(np.abs(F_new)))
            if r_new < res:
                break
            lam *= 0.5
        else:
            break
        w, F, res = w_new, F_new, r_new
        hist.append(res)
    return w, res


def solve_semilinear(problem: BVProblem, picard_iter: int = 400) -> SemilinearField:
    """Damped Picard from w = h. A step that raises the sup-norm residual is
    rejected and the damping halved, so the logged residuals decrease. If
    the damping collapses (large data) or ``picard_iter`` is used up, the
    iterate is finished by Newton-GMRES with the same monotone residual.
    """
    pb = problem
    h = pb.h_nodes
    op = pb.op
    if np.all(h == 0):
        return SemilinearField(pb, np.zeros_like(h), 0.0, [0.0])
    scale = max(1.0, float(np.max(np.abs(h))))
    w = h.copy()
    T = lambda u: h - op.apply(spow(u, pb.beta))
    tw = T(w)
    res = float(np.max(np.abs(w - tw)))
    hist = [res]
    om = pb.omega
    for it in range(min(pb.max_iter, picard_iter)):
        if res <= pb.tol * scale:
            break
        w_new = (1 - om) * w + om * tw
        tw_new = T(w_new)
        res_new = float(np.max(np.abs(w_new - tw_new)))
        if res_new < res:
            w, tw, res = w_new, tw_new, res_new
            hist.append(res)
            om = min(pb.omega, om * 1.1)
        else:
            om *= 0.5
            if om < 1e-3:
                break
        log.debug("picard it=%d res=%.3e omega=%.3g", it, res, om)
    if res > pb.tol * scale:
        w, res = _newton(pb, w, res, hist)
    if res > pb.tol * scale:
        raise NonConvergenceError(f"solver stalled at residual {res:.3e}", res, hist)
    if np.min(w) < -1e-8 * scale:
        raise NonConvergenceError("solution lost nonnegativity", res, hist)
    return SemilinearField(pb, np.maximum(w, 0.0), res, hist)


def arc_harmonic_measure(x, a: float, b: float) -> np.ndarray:
    """P_D[1_arc](x) for the arc of angles [a, b] on the unit circle."""
    x = np.atleast_2d(np.asarray(x, float))
    z = x[:, 0] + 1j * x[:, 1]
    ang = np.angle((np.exp(1j * b) - z) / (np.exp(1j * a) - z))
    ang = np.mod(ang, 2 * np.pi)
    return ang / np.pi - (b - a) / (2 * np.pi)


_GRID_CACHE: dict = {}


def _disc_op(n_r: int, n_ang: int) -> _Disc:
    key = ("disc", n_r, n_ang)
    if key not in _GRID_CACHE:
        _GRID_CACHE[key] = _Disc(interior_grid(2, n_r, n_ang))
    return _GRID_CACHE[key]


def disc_problem(beta: float, g: Callable | float | None = None, phi: Callable | float | None = None,
                 arc: tuple | None = None, lam: float = 1.0, n_r: int = 48, n_ang: int = 96,
                 n_boundary: int = 512, **kw) -> BVProblem:
    """d=2 problem with boundary data g (callable on unit vectors or constant),
    or lam * 1_arc, and interior source phi."""
    op = _disc_op(n_r, n_ang)
    b = boundary_grid(2, n_boundary)
    if arc is not None:
        h_fun = lambda x: lam * arc_harmonic_measure(x, *arc)
    elif g is None or np.isscalar(g):
        c = 0.0 if g is None else float(g)
        h_fun = lambda x: np.full(len(np.atleast_2d(x)), c)
    else:
        gv = np.asarray(g(b.points), float)
        if np.any(gv < 0):
            raise ValueError("boundary data must be >= 0")
        # harmonic extension of the trigonometric interpolant, exact up to r = 1
        # (a Poisson-kernel sum on the boundary nodes is useless once rho < spacing)
        c = np.fft.rfft(gv) / len(gv)
        c[1:] *= 2.0
        if len(gv) % 2 == 0:
            c[-1] /= 2.0
        k = np.arange(len(c))

        def h_fun(x):
            x = np.atleast_2d(x)
            z = x[:, 0] + 1j * x[:, 1]
            return np.real(np.power.outer(z, k) @ c)
    h_nodes = np.asarray(h_fun(op.nodes), float)
    src = phi
    if src is not None and not (np.isscalar(src) and src == 0):
        fv = np.asarray(src(op.nodes) if callable(src) else np.full(op.size, float(src)), float)
        if np.any(fv < 0):
            raise ValueError("source must be >= 0")
        h_nodes = h_nodes + op.apply(fv)
        from .quadrature import apply_green
        h0 = h_fun
        h_fun = lambda x: h0(x) + apply_green(fv, np.asarray(x).ravel(), op.grid)
    return BVProblem(beta, op, h_nodes, lambda x: float(np.atleast_1d(h_fun(x))[0]), **kw)


# ---------------------------------------------------------------- d = 3 cap problem

def _cap_profile(t, t_cap: float, width: float):
    """Indicator of polar angle <= t_cap, ramped linearly over ``width``."""
    return np.clip((t_cap + width / 2 - t) / width, 0.0, 1.0)


def cap_poisson(r: float, th: float, t_cap: float, width: float) -> float:
    """P_D[ramped cap indicator](x) for x at (r, polar th), axisymmetric."""
    f = lambda t: _ring_poisson(r, th, t) * _cap_profile(t, t_cap, width) * np.sin(t)
    top = min(t_cap + width / 2, np.pi)
    pts = [p for p in (th, t_cap - width / 2) if 0 < p < top]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val = quad(f, 0.0, top, points=pts or None, limit=400, epsabs=1e-13, epsrel=1e-11)[0]
    return float(val)


@dataclass
class VnResult:
    eps: float
    alpha: float
    x0: np.ndarray
    v_x0: float
    h_x0: float
    cap_mass_x0: float
    field: SemilinearField

    @property
    def scaled(self) -> float:
        return self.eps**self.alpha * self.v_x0


def solve_vn(eps: float, beta: float, d: int = 3, alpha: float = 1.5, depth: float = 0.5,
             order: int = 6, tol: float = 1e-9) -> VnResult:
    """v + G_D[v^(1+beta)] = eps^(1-d) P_D[1_{B(y0, 2 eps)}], y0 the north pole,
    evaluated at x0 = (1 - depth*eps) y0.

    The cap indicator is ramped over one polar grid cell at the cap edge.
    """
    if d != 3:
        raise ValueError("solve_vn is implemented for d = 3 (axisymmetric)")
    if not 2 / (beta + 1) < alpha < 2:
        raise ValueError("alpha must lie in (2/(beta+1), 2)")
    if not 0 < depth <= 1:
        raise ValueError("need |x0 - y0| <= eps")
    grid = axis_grid(eps, order)
    op = _Axis(grid)
    t_cap = 2 * np.arcsin(min(eps, 1.0))  # chordal radius 2 eps
    k = np.searchsorted(grid.th, t_cap)
    width = float(grid.th[min(k, len(grid.th) - 1)] - grid.th[max(k - 1, 0)])
    amp = eps ** (1 - d)
    R, T = np.meshgrid(grid.r, grid.th, indexing="ij")
    h_nodes = amp * np.array([cap_poisson(r, t, t_cap, width) for r, t in zip(R.ravel(), T.ravel())])

    def h_at(x):
        r = float(np.linalg.norm(x))
        th = float(np.arccos(np.clip(x[2] / r, -1, 1))) if r > 0 else 0.0
        return amp * cap_poisson(r, th, t_cap, width)

    pb = BVProblem(beta, op, h_nodes, h_at, tol=tol)
    fld = solve_semilinear(pb)
    x0 = np.array([0.0, 0.0, 1.0 - depth * eps])
    v = fld.at(x0)
    hx = h_at(x0)
    return VnResult(eps, alpha, x0, v, hx, hx / amp, fld)


# ---------------------------------------------------------------- Monte Carlo

def laplace_from_values(values: np.ndarray, keep: np.ndarray | None = None):
    """-log mean(keep * exp(-values)) with a jackknife standard error.

    Returns (estimate, se); the estimate is +inf when every term vanishes.
    """
    v = np.asarray(values, float)
    e = np.exp(-v)
    if keep is not None:
        e = e * np.asarray(keep, float)
    N = len(e)
    if N == 0:
        raise ValueError("all replicas truncated")
    S = e.sum()
    if S <= 0:
        return math.inf, math.nan
    est = -math.log(S / N)
    if N < 2:
        return est, math.nan
    loo = (S - e) / (N - 1)
    with np.errstate(divide="ignore"):
        th = -np.log(loo)
    if not np.all(np.isfinite(th)):
        return est, math.inf
    se = math.sqrt((N - 1) / N * np.sum((th - th.mean()) ** 2))
    return est, se


def _laplace_reducer(traj, g, phi):
    if traj.truncated:
        return None
    val = 0.0
    if g is not None and len(traj.exit_points):
        val += np.sum(np.broadcast_to(g(traj.exit_points), (len(traj.exit_points),))) / traj.n
    if phi is not None:
        val += traj.occupation(phi)
    return val


def laplace_mc(config: SimConfig, g: Callable | None, phi: Callable | None = None,
               workers: int = 1, values: Sequence | None = None):
    """-log E exp(-<X^D, g> - int <X_t, phi> dt) over the config's replicas.

    ``values`` takes precomputed per-replica exponents (None for truncated
    replicas) so a shared run can be reused. Returns (value, se, n_used).
    """
    if values is None:
        cfg = config if phi is None or config.histogram else replace(config, histogram=True)
        red = functools.partial(_laplace_reducer, g=g, phi=phi)
        values = run_replicas(cfg, red, workers)
    used = np.array([v for v in values if v is not None], float)
    if len(used) == 0:
        raise ValueError("all replicas truncated")
    est, se = laplace_from_values(used)
    return est, se, len(used)


def arc_distance(points: np.ndarray, a: float, b: float) -> np.ndarray:
    """Chordal distance from unit vectors (d=2) to the arc [a, b]."""
    th = np.mod(np.arctan2(points[:, 1], points[:, 0]) - a, 2 * np.pi)
    L = b - a
    inside = th <= L
    da = 2 * np.abs(np.sin(th / 2))
    db = 2 * np.abs(np.sin((th - L) / 2))
    return np.where(inside, 0.0, np.minimum(da, db))


def trace_reducer(traj, arcs: Sequence[tuple], delta_hit: float, g):
    """Per replica: (exponent <X^D, g>, [hit flags per arc]) or None if truncated."""
    if traj.truncated:
        return None
    ex = traj.exit_points
    val = 0.0
    if g is not None and len(ex):
        val = float(np.sum(np.broadcast_to(g(ex), (len(ex),))) / traj.n)
    hits = [bool(len(ex)) and bool(np.any(arc_distance(ex, *arc) <= delta_hit)) for arc in arcs]
    return val, hits


def trace_functional(config: SimConfig, K: tuple | None, nu: Callable | None, x0=None,
                     delta_hit: float = 2 * np.pi / 512, workers: int = 1, values=None):
    """-log E[1{no exit atom within delta_hit of K} exp(-<X^D, dnu/dsigma>)].

    K is an arc (a, b) of angles (d=2) or None for the empty set; nu is given
    by a density with respect to sigma (or None). With K empty this is
    laplace_mc(config, nu, None). ``values`` takes trace_reducer outputs for
    the single arc K. Returns (value, se, n_used).
    """
    if x0 is not None:
        config = replace(config, mu=((tuple(float(c) for c in x0), 1.0),))
    if K is None:
        return laplace_mc(config, nu, None, workers,
                          values=None if values is None else [None if v is None else v[0] for v in values])
    if values is None:
        red = functools.partial(trace_reducer, arcs=[K], delta_hit=delta_hit, g=nu)
        values = run_replicas(config, red, workers)
    used = [v for v in values if v is not None]
    if not used:
        raise ValueError("all replicas truncated")
    expo = np.array([v[0] for v in used])
    keep = np.array([not v[1][0] for v in used])
    est, se = laplace_from_values(expo, keep)
    return est, se, len(used)


# ---------------------------------------------------------------- lambda -> inf

@dataclass
class LambdaSequence:
    lams: np.ndarray
    values: np.ndarray

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) > 0))

    @property
    def last_gap(self) -> float:
        return float((self.values[-1] - self.values[-2]) / self.values[-1])

    @property
    def extrapolated(self) -> float:
        """Aitken delta-squared on the geometric lambda sequence."""
        u1, u2, u3 = self.values[-3:]
        den = (u3 - u2) - (u2 - u1)
        if den >= 0:
            return float(u3)
        return float(u3 - (u3 - u2) ** 2 / den)


def arc_trace_pde(beta: float, arc: tuple, x0=(0.0, 0.0), lams=(10.0, 40.0, 160.0),
                  **kw) -> LambdaSequence:
    vals = []
    for lam in lams:
        fld = solve_semilinear(disc_problem(beta, arc=arc, lam=lam, **kw))
        vals.append(fld.at(np.asarray(x0, float)))
    return LambdaSequence(np.asarray(lams, float), np.asarray(vals))
