"""Exit measure two ways: direct boundary deposition and occupation shells."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .branching_sim import Trajectory
from .geometry import point_to_angle


@dataclass
class ExitMeasure:
    """Atomic measure on the sphere: unit vectors and masses."""
    points: np.ndarray
    masses: np.ndarray

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def coords(self) -> np.ndarray:
        """Angles in [0, 2 pi) for d = 2, the unit vectors otherwise."""
        return point_to_angle(self.points) if self.d == 2 else self.points

    def integrate(self, phi: Callable) -> float:
        if len(self.masses) == 0:
            return 0.0
        return float(np.sum(self.masses * phi(self.points)))


@dataclass
class ShellMeasure:
    """eps^-2 times time-integrated mass in the shell rho <= eps.

    Atoms sit at histogram-bin mean points, so integrals of affine functions
    over each bin are exact.
    """
    eps: float
    points: np.ndarray
    masses: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def integrate(self, phi: Callable) -> float:
        if len(self.masses) == 0:
            return 0.0
        return float(np.sum(self.masses * phi(self.points)))


def direct_exit_measure(traj: Trajectory) -> ExitMeasure:
    if traj.truncated:
        raise ValueError("truncated replica; excluded from estimators")
    pts = traj.exit_points
    return ExitMeasure(pts, np.full(len(pts), 1.0 / traj.n))


def shell_measure(traj: Trajectory, eps: float) -> ShellMeasure:
    if traj.hist.size == 0:
        raise ValueError("replica was run without the occupation histogram")
    edges = traj.r_edges
    lo = 1.0 - eps
    j = np.flatnonzero(np.isclose(edges, lo, rtol=0, atol=1e-12))
    if len(j) == 0:
        raise ValueError(f"eps = {eps} is not a histogram shell edge")
    h = traj.hist[j[0]:]
    w = h[..., 0].ravel()
    keep = w > 0
    pts = (h[..., 2:].reshape(-1, traj.d)[keep]) / w[keep, None]
    return ShellMeasure(float(eps), pts, w[keep] / traj.n / eps**2)


def _phi_name(phi, i):
    return getattr(phi, "__name__", f"phi{i}")


@dataclass
class PairTable:
    eps: np.ndarray
    names: list
    gaps: np.ndarray  # (replica, eps, phi), signed

    def rms(self) -> np.ndarray:
        """(eps, phi) root-mean-square gap over replicas."""
        return np.sqrt(np.mean(self.gaps**2, axis=0))

    def spearman(self, j: int):
        """Rank correlation of |gap| against eps over all (replica, eps) pairs.

        Returns (rho, one-sided p-value for rho > 0).
        """
        g = np.abs(self.gaps[:, :, j])
        e = np.broadcast_to(self.eps, g.shape)
        r = stats.spearmanr(e.ravel(), g.ravel(), alternative="greater")
        return float(r.statistic), float(r.pvalue)

    def rows(self):
        out = []
        rms = self.rms()
        for j, name in enumerate(self.names):
            for i, e in enumerate(self.eps):
                out.append((name, float(e), float(rms[i, j])))
        return out


def pair_gaps(traj: Trajectory, eps_list: Sequence[float], phi_list: Sequence[Callable]) -> np.ndarray:
    """(eps, phi) signed gaps <X_eps, phi> - <X^D, phi> for one replica."""
    ex = direct_exit_measure(traj)
    out = np.empty((len(eps_list), len(phi_list)))
    for i, e in enumerate(eps_list):
        sh = shell_measure(traj, e)
        for j, phi in enumerate(phi_list):
            out[i, j] = sh.integrate(phi) - ex.integrate(phi)
    return out


def pair_test(shells: Sequence[Sequence[ShellMeasure]], exits: Sequence[ExitMeasure],
              phi_list: Sequence[Callable]) -> PairTable:
    """shells[r][i] is replica r's measure at the i-th eps."""
    eps = np.array([s.eps for s in shells[0]])
    gaps = np.empty((len(exits), len(eps), len(phi_list)))
    for r, (row, ex) in enumerate(zip(shells, exits)):
        for j, phi in enumerate(phi_list):
            v = ex.integrate(phi)
            for i, sh in enumerate(row):
                gaps[r, i, j] = sh.integrate(phi) - v
    return PairTable(eps, [_phi_name(p, i) for i, p in enumerate(phi_list)], gaps)


def pair_table_from_gaps(gaps: np.ndarray, eps_list, phi_list) -> PairTable:
    return PairTable(np.asarray(eps_list, float), [_phi_name(p, i) for i, p in enumerate(phi_list)],
                     np.asarray(gaps))


def resultant_angle(ex: ExitMeasure) -> float:
    """Angle of the mass-weighted resultant of exit atoms (d = 2)."""
    v = np.sum(ex.masses[:, None] * ex.points, axis=0)
    return float(np.mod(np.arctan2(v[1], v[0]), 2 * np.pi))


def uniformity_pvalue(angles) -> float:
    """Kolmogorov-Smirnov p-value of angles against uniform on [0, 2 pi)."""
    return float(stats.kstest(np.asarray(angles) / (2 * np.pi), "uniform").pvalue)


def expected_shell_mass(mu, eps: float, d: int = 2) -> float:
    """eps^-2 int_{F_eps} G_D mu(y) dy in closed form.

    int_{|y| > r0} G_D(x, y) dy is the expected time Brownian motion from x
    spends beyond radius r0 before exit, a radial ODE solved below.
    """
    r0 = 1.0 - eps
    tot = 0.0
    for pt, m in mu:
        a = float(np.linalg.norm(pt))
        tot += m * (_time_outside(a, r0, d))
    return tot / eps**2


def _time_outside(a: float, r0: float, d: int) -> float:
    # u(x) = E_x int 1{|B| > r0}; radial, 1/2 u'' + (d-1)/(2r) u' = -1{r > r0}
    # outer: u = (1 - r^2)/d + C g(r), inner: constant; g = log r (d=2), r^(2-d)
    if d == 2:
        g = lambda r: np.log(r)
        dg = lambda r: 1.0 / r
    else:
        g = lambda r: r ** (2 - d) - 1.0
        dg = lambda r: (2 - d) * r ** (1 - d)
    # u'(r0+) = 0 from the inside being constant: -2 r0/d + C dg(r0) = 0
    C = 2 * r0 / d / dg(r0)
    outer = lambda r: (1 - r * r) / d + C * g(r)
    return float(outer(max(a, r0)))
