"""Boundary density of the exit measure: kernel smoothing of exit atoms and
the Poisson-kernel jump-sum representation, plus regularity diagnostics.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse, stats
from scipy.spatial import cKDTree

from .exit_measure import ExitMeasure
from .geometry import angle_to_point, poisson_kernel, sphere_area

RHO_CLIP = 1e-6


class InsufficientPairsError(ValueError):
    pass


@dataclass
class DensityGrid:
    """Equal-weight boundary grid: uniform angles (d=2), Fibonacci (d=3)."""
    d: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def spacing(self) -> float:
        return float(np.sqrt(self.weights[0])) if self.d == 3 else float(self.weights[0])

    def coords(self) -> np.ndarray:
        if self.d == 2:
            return np.arange(self.size) * (2 * np.pi / self.size)
        return self.points


def density_grid(d: int, n: int) -> DensityGrid:
    if d == 2:
        pts = angle_to_point(np.arange(n) * (2 * np.pi / n))
    elif d == 3:
        i = np.arange(n) + 0.5
        z = 1 - 2 * i / n
        phi = np.pi * (1 + 5**0.5) * i
        s = np.sqrt(1 - z * z)
        pts = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    else:
        raise ValueError("density grids are implemented for d = 2, 3")
    return DensityGrid(d, pts, np.full(n, sphere_area(d) / n))


@dataclass
class BoundaryDensityEstimate:
    grid: DensityGrid
    values: np.ndarray
    stderr: np.ndarray
    estimator: str
    bandwidth: float = float("nan")
    per_replica: np.ndarray | None = field(default=None, repr=False)

    def rows(self):
        c = self.grid.coords()
        for i in range(self.grid.size):
            yield (c[i], float(self.values[i]), float(self.stderr[i]), self.estimator, self.bandwidth)


def _kernel_matrix(points: np.ndarray, grid: DensityGrid, h: float) -> sparse.csr_matrix:
    """Row-normalized kernel weights: row a gives atom a's density on the grid.

    Each row satisfies sum_i w_i K[a, i] = 1 exactly (discrete normalization).
    """
    n_at = len(points)
    if grid.d == 2:
        m = grid.size
        step = 2 * np.pi / m
        th = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2 * np.pi)
        w = int(np.ceil(h / step)) + 1
        base = np.floor(th / step).astype(np.int64)
        off = np.arange(-w, w + 2)
        cols = base[:, None] + off[None, :]
        delta = th[:, None] - cols * step
        vals = np.clip(1.0 - np.abs(delta) / h, 0.0, None)
        rows = np.repeat(np.arange(n_at), len(off))
        cols = np.mod(cols, m).ravel()
        vals = vals.ravel()
    else:
        tree = cKDTree(grid.points)
        chord = 2 * np.sin(min(h, np.pi) / 2)
        nb = tree.query_ball_point(points, chord)
        lens = np.fromiter((len(v) for v in nb), np.int64, n_at)
        rows = np.repeat(np.arange(n_at), lens)
        cols = np.fromiter((j for v in nb for j in v), np.int64, int(lens.sum()))
        cosg = np.clip(np.sum(points[rows] * grid.points[cols], axis=1), -1, 1)
        vals = np.clip(1.0 - (np.arccos(cosg) / h) ** 2, 0.0, None)
    K = sparse.csr_matrix((vals, (rows, cols)), shape=(n_at, grid.size))
    K.sum_duplicates()
    norm = np.asarray(K @ grid.weights).ravel()
    empty = norm <= 0
    if np.any(empty):
        # bandwidth below grid spacing: deposit on the nearest node
        near = np.argmax(points[empty] @ grid.points.T, axis=1)
        extra = sparse.csr_matrix((np.ones(empty.sum()), (np.flatnonzero(empty), near)),
                                  shape=K.shape)
        K = K + extra
        norm = np.asarray(K @ grid.weights).ravel()
    return sparse.diags(1.0 / norm) @ K


def smoothed_single(ex: ExitMeasure, bandwidth: float, grid: DensityGrid) -> np.ndarray:
    if len(ex.masses) == 0:
        return np.zeros(grid.size)
    K = _kernel_matrix(ex.points, grid, bandwidth)
    return np.asarray(ex.masses @ K).ravel()


def _mean_se(a: np.ndarray):
    m = a.mean(axis=0)
    se = a.std(axis=0, ddof=1) / np.sqrt(len(a)) if len(a) > 1 else np.full(a.shape[1:], np.nan)
    return m, se


def smoothed_density(exit_measures: Sequence[ExitMeasure], bandwidth: float,
                     grid: DensityGrid) -> BoundaryDensityEstimate:
    if not bandwidth > 0:
        raise ValueError("bandwidth must be > 0")
    per = np.array([smoothed_single(ex, bandwidth, grid) for ex in exit_measures])
    m, se = _mean_se(per)
    return BoundaryDensityEstimate(grid, m, se, "smoothed", float(bandwidth), per)


def smoothing_bias_bound(bandwidth: float, curvature_bound: float) -> float:
    """Second-order bias of the triangular kernel, |f''| <= curvature_bound.

    The kernel has variance h^2/6, so the bias is at most sup|f''| h^2 / 12.
    """
    return curvature_bound * bandwidth**2 / 12.0


def _clip_interior(x: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(x, axis=-1)
    lim = 1.0 - RHO_CLIP
    s = np.where(r > lim, lim / np.where(r > 0, r, 1.0), 1.0)
    return x * s[..., None]


def representation_density(event_points: np.ndarray, event_jumps: np.ndarray, mu,
                           y) -> np.ndarray:
    """<mu, P_D(., y)> + sum_e jump_e P_D(x_e, y) at boundary points y (rows)."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    out = np.zeros(len(y))
    for pt, m in mu:
        out += m * poisson_kernel(np.asarray(pt, float)[None, :], y)
    if len(event_jumps):
        x = _clip_interior(np.asarray(event_points, float))
        nz = event_jumps != 0
        x, jmp = x[nz], event_jumps[nz]
        for i in range(len(y)):
            out[i] += np.dot(jmp, poisson_kernel(x, y[i]))
    return out


def representation_from_trajectory(traj, mu, y) -> np.ndarray:
    if traj.truncated:
        raise ValueError("truncated replica; excluded from estimators")
    return representation_density(traj.event_points, traj.mass_jumps, mu, y)


def representation_estimate(values: np.ndarray, grid: DensityGrid) -> BoundaryDensityEstimate:
    """Replica mean and SE from per-replica values (replica, grid point)."""
    values = np.asarray(values, float)
    m, se = _mean_se(values)
    return BoundaryDensityEstimate(grid, m, se, "representation", float("nan"), values)


def holder_pairs(distances, center: float = 0.0):
    """Boundary point pairs (d = 2) symmetric about ``center`` at the given
    chordal distances."""
    dist = np.asarray(distances, float)
    half = np.arcsin(dist / 2)  # chord 2 sin(dtheta/2)
    return angle_to_point(center - half), angle_to_point(center + half)


@dataclass
class HolderReport:
    q: float
    distances: np.ndarray
    moments: np.ndarray
    slope: float
    ci: tuple
    intercept: float

    def row(self):
        return {"q": self.q, "slope": self.slope, "ci_lo": self.ci[0], "ci_hi": self.ci[1]}


def holder_diagnostic(values_y1: np.ndarray, values_y2: np.ndarray, distances, q: float,
                      d: int = 2) -> HolderReport:
    """Log-log slope of E|Z(y1) - Z(y2)|^q against |y1 - y2|.

    values_* are (replica, pair) arrays of per-replica density estimates.
    """
    if d != 2:
        raise ValueError("the Holder diagnostic applies to d = 2")
    dist = np.asarray(distances, float)
    if len(np.unique(dist)) < 5:
        raise InsufficientPairsError("need at least 5 distance scales")
    inc = np.abs(np.asarray(values_y1) - np.asarray(values_y2)) ** q
    mom = inc.mean(axis=0)
    if np.any(mom <= 0):
        raise InsufficientPairsError("zero increment moment at some distance")
    res = stats.linregress(np.log(dist), np.log(mom))
    tq = stats.t.ppf(0.975, len(dist) - 2)
    ci = (res.slope - tq * res.stderr, res.slope + tq * res.stderr)
    return HolderReport(q, dist, mom, float(res.slope), ci, float(res.intercept))


@dataclass
class SupGrowthReport:
    bandwidths: np.ndarray
    sups: np.ndarray  # (replica, bandwidth)
    hit: np.ndarray   # replicas with X^D(B) > 0

    @property
    def medians(self) -> np.ndarray:
        if not self.hit.any():
            return np.zeros(len(self.bandwidths))
        return np.median(self.sups[self.hit], axis=0)

    @property
    def last_ratio(self) -> float:
        m = self.medians
        return float(m[-1] / m[-2]) if m[-2] > 0 else float("inf")

    def strictly_increasing(self) -> bool:
        return bool(np.all(np.diff(self.medians) > 0))


def sup_growth_single(ex: ExitMeasure, bandwidths, center, radius: float,
                      grid: DensityGrid) -> np.ndarray:
    """sup over grid nodes in the cap B(center, radius) of the smoothed density
    at each bandwidth; zeros when the replica puts no mass in B."""
    center = np.asarray(center, float)
    inB = lambda p: np.linalg.norm(p - center, axis=-1) <= radius
    if len(ex.masses) == 0 or not np.any(inB(ex.points)):
        return np.zeros(len(bandwidths))
    nodes = inB(grid.points)
    return np.array([smoothed_single(ex, h, grid)[nodes].max() for h in bandwidths])


def sup_growth_diagnostic(exit_measures: Sequence[ExitMeasure], bandwidths, center,
                          radius: float, grid: DensityGrid, beta: float | None = None,
                          control: bool = False) -> SupGrowthReport:
    """Replica sups of the smoothed density on a boundary cap B.

    The blow-up regime is d >= 3 with d < 1 + 2/beta; ``control=True``
    allows d = 2, where the density is continuous and the sups settle.
    """
    bw = np.asarray(bandwidths, float)
    if np.any(np.diff(bw) >= 0):
        raise ValueError("bandwidth schedule must be strictly decreasing")
    if grid.d < 3 and not control:
        raise ValueError("blow-up diagnostic needs d >= 3 (use control=True for d = 2)")
    if beta is not None and not grid.d < 1 + 2 / beta:
        raise ValueError("needs d < 1 + 2/beta")
    sups = np.array([sup_growth_single(ex, bw, center, radius, grid) for ex in exit_measures])
    hit = np.any(sups > 0, axis=1)
    return SupGrowthReport(bw, sups, hit)
