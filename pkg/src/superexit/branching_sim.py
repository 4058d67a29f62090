"""Branching Brownian particle approximation of (1+beta)-stable super-Brownian
motion killed on the unit sphere.

Particles carry mass 1/n, move as Brownian motions (generator 1/2 Laplacian),
branch at rate (1 + beta) n^beta and leave k children with the critical law
whose generating function is f(s) = s + (1 - s)^(1+beta) / (1 + beta). With
these choices n gamma_n [f(1 - u/n) - (1 - u/n)] = u^(1+beta) exactly.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from . import _kernels as K

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def replica_seed(master: int, index: int) -> int:
    """64-bit stream seed for replica ``index``; independent of worker count."""
    return splitmix64(splitmix64(int(master) & MASK64) ^ int(index))


def replica_rng(master: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(replica_seed(master, index)))


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class OffspringLaw:
    beta: float
    k_max: int
    probs: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)
    tail_mass: float
    tail_mean: float
    tail_k: int
    tail_index: float

    def pgf(self, s):
        s = np.asarray(s, dtype=float)
        return s + (1.0 - s) ** (1.0 + self.beta) / (1.0 + self.beta)

    @property
    def total(self) -> float:
        return float(math.fsum(self.probs) + self.tail_mass)

    @property
    def mean(self) -> float:
        return float(math.fsum(np.arange(len(self.probs)) * self.probs) + self.tail_mean)

    def sample(self, size: int, seed: int = 0) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64(seed))
        return K.offspring_draws(rng, self.cdf, self.tail_mass, float(self.tail_k),
                                 self.tail_index, size)

    @property
    def kernel_args(self):
        return self.cdf, self.tail_mass, float(self.tail_k), self.tail_index


def offspring_law(beta: float, k_max: int = 100_000) -> OffspringLaw:
    """p_0 = 1/(1+beta), p_1 = 0, p_k = beta Gamma(k-1-beta) / (Gamma(1-beta) k!).

    The mass and mean beyond k_max are closed form:
    T = beta Gamma(K-1-beta) / ((1+beta) Gamma(1-beta) Gamma(K)),
    M = Gamma(K-1-beta) / (Gamma(1-beta) Gamma(K-1)), K = k_max + 1.
    """
    if not 0.0 < beta <= 1.0:
        raise ValidationError(f"beta must lie in (0, 1], got {beta}")
    if beta == 1.0:
        probs = np.array([0.5, 0.0, 0.5])
        return OffspringLaw(1.0, 2, probs, np.cumsum(probs), 0.0, 0.0, 3, 2.0)
    k = np.arange(2, k_max + 1, dtype=float)
    lp = np.log(beta) + gammaln(k - 1 - beta) - gammaln(1 - beta) - gammaln(k + 1)
    probs = np.concatenate([[1.0 / (1.0 + beta), 0.0], np.exp(lp)])
    Kt = k_max + 1
    lg = gammaln(Kt - 1 - beta) - gammaln(1 - beta)
    tail_mass = float(beta / (1 + beta) * np.exp(lg - gammaln(Kt)))
    tail_mean = float(np.exp(lg - gammaln(Kt - 1)))
    m = tail_mean / tail_mass  # = (1 + beta)(K - 1)/beta
    # k = floor(x) + 1 with x Pareto on [K - 1, inf); E k ~ E x + 1/2 = m
    a = (m - 0.5) / (m - 0.5 - (Kt - 1))
    cdf = np.cumsum(probs)
    return OffspringLaw(float(beta), int(k_max), probs, cdf, tail_mass, tail_mean, Kt, float(a))


def tail_slope(law: OffspringLaw, k_lo: int = 100, k_hi: int = 10_000) -> float:
    k = np.unique(np.geomspace(k_lo, k_hi, 40).astype(int))
    return float(np.polyfit(np.log(k), np.log(law.probs[k]), 1)[0])


@dataclass
class SimConfig:
    d: int = 2
    beta: float = 0.5
    n: int = 1000
    dt: float = 1e-4
    mu: tuple = (((0.0, 0.0), 1.0),)
    seed: int = 0
    replicas: int = 100
    eps_list: tuple = (0.2, 0.1, 0.05)
    max_events: int = 50_000_000
    max_alive: int = 5_000_000
    snapshot_times: tuple = ()
    histogram: bool = False
    hist_r_min: float = 0.0
    hist_n_r: int = 20
    hist_n_ang: int = 64
    hist_n_z: int = 16
    bridge: bool = True
    k_max: int = 100_000

    def __post_init__(self):
        self.validate()

    def validate(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValidationError(f"d must be an integer >= 2, got {self.d}")
        if not 0.0 < self.beta <= 1.0:
            raise ValidationError(f"beta must lie in (0, 1], got {self.beta}")
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if not self.dt > 0:
            raise ValidationError("dt must be > 0")
        if self.replicas < 1:
            raise ValidationError("replicas must be >= 1")
        for pt, m in self.mu:
            pt = np.asarray(pt, dtype=float)
            if pt.shape != (self.d,):
                raise ValidationError(f"mu atom {tuple(pt)} does not have dimension {self.d}")
            if not np.linalg.norm(pt) < 1.0:
                raise ValidationError(f"mu atom {tuple(pt)} must be interior (rho > 0)")
            if m <= 0:
                raise ValidationError("mu masses must be positive")
        if any(not 0 < e < 1 for e in self.eps_list):
            raise ValidationError("eps_list entries must lie in (0, 1)")

    @property
    def total_mass(self) -> float:
        return float(sum(m for _, m in self.mu))

    def initial_positions(self) -> np.ndarray:
        """round(m n) particles per atom."""
        pts = []
        for pt, m in self.mu:
            c = int(round(m * self.n))
            pts.append(np.repeat(np.asarray(pt, dtype=float)[None, :], c, axis=0))
        return np.ascontiguousarray(np.concatenate(pts)) if pts else np.zeros((0, self.d))

    def r_edges(self) -> np.ndarray:
        base = np.linspace(self.hist_r_min, 1.0, self.hist_n_r + 1)
        e = np.unique(np.concatenate([base, [1.0 - x for x in self.eps_list]]))
        return e[e >= self.hist_r_min]

    def snap_steps(self) -> np.ndarray:
        return np.array(sorted(int(round(t / self.dt)) for t in self.snapshot_times), dtype=np.int64)


@dataclass
class Trajectory:
    """Output of one replica. Masses are particle counts times 1/n."""
    n: int
    d: int
    seed: int
    exit_times: np.ndarray
    exit_points: np.ndarray
    event_times: np.ndarray
    event_points: np.ndarray
    event_k: np.ndarray
    snapshot_times: np.ndarray
    snapshot_counts: np.ndarray
    snapshot_points: np.ndarray
    hist: np.ndarray
    r_edges: np.ndarray
    n_initial: int
    jump_units: int
    n_alive: int
    n_steps: int
    max_population: int
    particle_steps: int
    truncated: bool
    dt: float

    @property
    def exit_mass(self) -> float:
        return len(self.exit_times) / self.n

    @property
    def mass_jumps(self) -> np.ndarray:
        return (self.event_k - 1) / self.n

    @property
    def extinction_time(self) -> float:
        """End of the last time step (nan when truncated)."""
        return float("nan") if self.truncated else self.n_steps * self.dt

    def bookkeeping_defect(self) -> int:
        """n_initial + sum(k - 1) - exits - alive, in particle units (0 exactly)."""
        return int(self.n_initial + self.jump_units - len(self.exit_times) - self.n_alive)

    def snapshot(self, j: int) -> np.ndarray:
        start = int(np.sum(self.snapshot_counts[:j]))
        return self.snapshot_points[start:start + self.snapshot_counts[j]]

    def snapshot_functional(self, phi: Callable, j: int) -> float:
        x = self.snapshot(j)
        return float(np.sum(phi(x)) / self.n) if len(x) else 0.0

    def occupation(self, phi: Callable | None = None, r_min: float = 0.0) -> float:
        """int_0^inf <X_t, phi> dt from the histogram (bin mean points)."""
        h = self.hist
        if h.size == 0:
            raise ValueError("replica was run without the occupation histogram")
        w = h[..., 0]
        mask = w > 0
        if phi is None:
            return float(w[mask].sum() / self.n)
        pts = h[..., 2:][mask] / w[mask][:, None]
        return float(np.sum(w[mask] * phi(pts)) / self.n)


def run_replica(config: SimConfig, seed: int) -> Trajectory:
    law = offspring_law(config.beta, config.k_max)
    x0 = config.initial_positions()
    snaps = config.snap_steps()
    edges = config.r_edges() if config.histogram else np.array([0.0, 1.0])
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    out = K.simulate(rng, x0, float(config.beta), float(config.n), float(config.dt), *law.kernel_args,
                     int(config.max_events), int(config.max_alive), snaps,
                     bool(config.histogram), edges, int(config.hist_n_ang), int(config.hist_n_z),
                     bool(config.bridge))
    ex_t, ex_x, ev_t, ev_x, ev_k, sn_c, sn_x, hist, cnt = out
    # particles are advanced one at a time within a step; restore time order
    o = np.argsort(ev_t, kind="stable")
    ev_t, ev_x, ev_k = ev_t[o], ev_x[o], ev_k[o]
    o = np.argsort(ex_t, kind="stable")
    ex_t, ex_x = ex_t[o], ex_x[o]
    return Trajectory(
        n=config.n, d=config.d, seed=int(seed), exit_times=ex_t, exit_points=ex_x,
        event_times=ev_t, event_points=ev_x, event_k=ev_k,
        snapshot_times=snaps * config.dt, snapshot_counts=sn_c, snapshot_points=sn_x,
        hist=hist, r_edges=edges, n_initial=int(cnt[K.C_N0]), jump_units=int(cnt[K.C_JUMPS]),
        n_alive=int(cnt[K.C_ALIVE]), n_steps=int(cnt[K.C_STEPS]),
        max_population=int(cnt[K.C_MAXPOP]), particle_steps=int(cnt[K.C_PSTEPS]), truncated=bool(cnt[K.C_TRUNC]), dt=config.dt)


def _identity(traj):
    return traj


def _work(args):
    config, index, reducer = args
    traj = run_replica(config, replica_seed(config.seed, index))
    return reducer(traj)


def run_replicas(config: SimConfig, reducer: Callable = _identity, workers: int = 1,
                 indices: Sequence[int] | None = None) -> list:
    """Run replicas and apply ``reducer`` to each trajectory in the worker.

    Results come back in replica order whatever the worker count, so any
    downstream reduction is order-insensitive.
    """
    idx = range(config.replicas) if indices is None else indices
    jobs = [(config, i, reducer) for i in idx]
    if workers <= 1:
        return [_work(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_work, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


@dataclass
class CSBPResult:
    beta: float
    n: int
    t: float
    initial_mass: float
    counts: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return self.counts >= 0

    @property
    def survival(self) -> np.ndarray:
        return (self.counts[self.valid] > 0).astype(float)

    @property
    def mass(self) -> np.ndarray:
        return self.counts[self.valid] / self.n

    def survival_estimate(self):
        s = self.survival
        return float(s.mean()), float(s.std(ddof=1) / np.sqrt(len(s)))


def run_csbp(beta: float, initial_mass: float, t: float, n: int, seed: int,
             replicas: int = 1, max_pop: int = 10**12) -> CSBPResult:
    """Total-mass process with motion and killing disabled."""
    law = offspring_law(beta)
    n0 = int(round(initial_mass * n))
    counts = np.array([K.csbp_chain(replica_rng(seed, i), n0, float(beta), float(n), float(t),
                                    *law.kernel_args, int(max_pop)) for i in range(replicas)])
    return CSBPResult(beta, n, t, initial_mass, counts)


def csbp_survival_limit(beta: float, m: float, t: float) -> float:
    """1 - exp(-m (beta t)^(-1/beta)) for the limit process."""
    return float(-np.expm1(-m * (beta * t) ** (-1.0 / beta)))


def csbp_survival_exact(beta: float, m: float, t: float, n: int) -> float:
    """Survival of the n-particle chain. One particle's extinction
    generating function solves u' = -gamma_n (1-u)^(1+beta)/(1+beta) in 1 - u,
    which gives P(alive at t) = (1 + beta n^beta t)^(-1/beta).
    """
    one = (1.0 + beta * n**beta * t) ** (-1.0 / beta)
    n0 = int(round(m * n))
    return float(-np.expm1(n0 * np.log1p(-one)))


def richardson_survival(beta: float, m: float, t: float, n1: int, n2: int,
                        replicas: int, seed: int):
    """Extrapolate survival to n = inf from n1, n2 using the n^-beta rate.

    S_R = (S2 - r S1)/(1 - r), r = (n2/n1)^-beta. Independent streams, so the
    standard errors combine in quadrature.
    """
    a = run_csbp(beta, m, t, n1, seed, replicas)
    b = run_csbp(beta, m, t, n2, seed + 1, replicas)
    s1, e1 = a.survival_estimate()
    s2, e2 = b.survival_estimate()
    r = (n2 / n1) ** (-beta)
    est = (s2 - r * s1) / (1 - r)
    se = np.hypot(e2, r * e1) / (1 - r)
    return float(est), float(se), (a, b)
