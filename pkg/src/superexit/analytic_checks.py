"""Deterministic quadrature checks of Poisson-kernel increment inequalities.

All integrals are over the unit disc. The increment integrands blow up at the
two boundary points y1, y2, so the disc is split with a smooth partition of
unity chi_1 + chi_2 = 1, chi_i concentrated near y_i, and each piece is
integrated with a rule graded at its own point.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .geometry import expected_exit_time, green_from_parts, poisson_kernel
from .quadrature import DivergenceError, graded_rule

DEFAULT_SCALES = tuple(2.0 ** -k for k in range(2, 9))


@dataclass
class ExponentReport:
    check: str
    params: dict
    distances: np.ndarray
    lhs: np.ndarray
    slope: float
    ci: tuple
    predicted: float
    tolerance: float
    passed: bool
    unstable: bool = False
    note: str = ""

    def row(self) -> dict:
        return {"check": self.check, **self.params, "predicted": self.predicted,
                "fitted": self.slope, "ci_lo": self.ci[0], "ci_hi": self.ci[1],
                "pass": bool(self.passed)}


def predicted_gamma(a: float, p: float, eps: float = 0.0) -> float:
    """Exponent of the weighted increment integral with weight rho^a."""
    crit = (2.0 + a) / 2.0
    if not 0 < p < 2 + a:
        raise ValueError(f"need 0 < p < 2 + a, got p={p}, a={a}")
    if p < crit:
        return p
    if p == crit:
        return crit - eps
    return 2.0 + a - p


def predicted_lemma42(p: float, eps: float = 0.0) -> float:
    if not 0 < p < 3:
        raise ValueError("need p in (0, 3)")
    if p < 1.5:
        return p
    if p == 1.5:
        return 1.5 - eps
    return 3.0 - p


def fit_slope(dist, vals, level: float = 0.95):
    """Log-log least squares slope with a t-based confidence interval."""
    res = stats.linregress(np.log(dist), np.log(vals))
    t = stats.t.ppf(0.5 + level / 2, len(dist) - 2)
    return res.slope, (res.slope - t * res.stderr, res.slope + t * res.stderr)


def _pair(delta, base_angle=0.0):
    half = np.arcsin(delta / 2.0)
    t1, t2 = base_angle - half, base_angle + half
    return np.array([np.cos(t1), np.sin(t1)]), np.array([np.cos(t2), np.sin(t2)])


def increment_integral(y1, y2, weight, p: float, n_panels: int = 60, n_psi: int = 64,
                       q: float = 6.0) -> float:
    """int w(x) |P(x, y1) - P(x, y2)|^p dx over the disc.

    ``weight(x, om)`` receives points and the exact 1 - |x|^2.
    """
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if np.allclose(y1, y2):
        return 0.0
    total = 0.0
    for ya, yb in ((y1, y2), (y2, y1)):
        rule = graded_rule(ya, n_panels=n_panels, n_psi=n_psi)
        x, om, ra = rule.points, rule.om, rule.s
        rb = np.linalg.norm(x - yb, axis=-1)
        Pa = poisson_kernel(x, ya, om=om, dist=ra)
        Pb = poisson_kernel(x, yb, om=om, dist=rb)
        # chi_a = rb^q / (ra^q + rb^q), written to avoid overflow
        chi = 1.0 / (1.0 + (ra / rb) ** q)
        total += np.sum(rule.weights * weight(x, om) * np.abs(Pa - Pb) ** p * chi)
    return float(total)


def _rho_weight(a):
    def w(x, om):
        r = np.sqrt(np.maximum(1.0 - om, 0.0))
        return (om / (1.0 + r)) ** a
    return w


def _green_weight(mu):
    pts = np.atleast_2d([m[0] for m in mu]).astype(float)
    ms = np.asarray([m[1] for m in mu], dtype=float)

    def w(x, om):
        out = np.zeros(len(x))
        for xa, ma in zip(pts, ms):
            d2 = np.sum((x - xa) ** 2, axis=-1)
            out += ma * green_from_parts(d2, 1.0 - xa @ xa, om, 2)
        return out
    return w


def _exponent_check(name, params, weight, p, predicted, tol, scales, pair_count,
                    critical, seed=0, **quad):
    rng = np.random.default_rng(seed)
    bases = rng.uniform(0, 2 * np.pi, pair_count)
    scales = np.asarray(scales, dtype=float)
    lhs = np.array([np.mean([increment_integral(*_pair(dl, b), weight, p, **quad) for b in bases])
                    for dl in scales])
    if not np.all(np.isfinite(lhs)) or np.any(lhs <= 0):
        raise DivergenceError(f"{name}: non-finite or non-positive LHS", lhs)
    slope, ci = fit_slope(scales, lhs)
    # refinement probe at the finest scale
    n_panels = quad.get("n_panels", 60)
    n_psi = quad.get("n_psi", 64)
    fine = increment_integral(*_pair(scales.min(), bases[0]), weight, p,
                              n_panels=2 * n_panels, n_psi=2 * n_psi)
    coarse = increment_integral(*_pair(scales.min(), bases[0]), weight, p, **quad)
    unstable = abs(fine - coarse) > 0.05 * abs(fine)
    if critical:
        passed = slope >= predicted - 0.2
    else:
        passed = abs(slope - predicted) <= tol
    return ExponentReport(name, params, scales, lhs, float(slope), tuple(map(float, ci)),
                          float(predicted), tol, bool(passed and not unstable), bool(unstable))


def lemma41_check(a: float, p: float, pair_count: int = 2, scales=DEFAULT_SCALES,
                  tol: float = 0.15, **quad) -> ExponentReport:
    """Fit the exponent of int rho^a |P(., y1) - P(., y2)|^p over |y1 - y2| = 2^-k."""
    crit = p == (2 + a) / 2
    pred = (2 + a) / 2 if crit else predicted_gamma(a, p)
    return _exponent_check("rho_increment", {"a": a, "p": p}, _rho_weight(a), p, pred, tol,
                           scales, pair_count, crit, **quad)


def lemma42_check(p: float, mu=(((0.0, 0.0), 1.0),), pair_count: int = 2,
                  scales=DEFAULT_SCALES, tol: float = 0.15, **quad) -> ExponentReport:
    """Same fit with the weight G_D mu in place of rho^a."""
    crit = p == 1.5
    pred = 1.5 if crit else predicted_lemma42(p)
    return _exponent_check("green_increment", {"p": p}, _green_weight(mu), p, pred, tol,
                           scales, pair_count, crit, **quad)


@dataclass
class LipschitzReport:
    radius: float
    n_samples: int
    max_ratio: float
    max_ratio_doubled: float
    change: float
    stable: bool
    calibrated_c: float = float("nan")
    bound: float = float("nan")
    consistent: bool = True


def _lipschitz_max(radius, n, rng):
    r = radius * np.sqrt(rng.uniform(size=n))
    t = rng.uniform(0, 2 * np.pi, n)
    x = np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)
    a1 = rng.uniform(0, 2 * np.pi, n)
    da = np.exp(rng.uniform(np.log(1e-4), np.log(np.pi), n))
    y1 = np.stack([np.cos(a1), np.sin(a1)], axis=-1)
    y2 = np.stack([np.cos(a1 + da), np.sin(a1 + da)], axis=-1)
    dP = np.abs(poisson_kernel(x, y1) - poisson_kernel(x, y2))
    ratio = dP / np.linalg.norm(y1 - y2, axis=-1)
    return np.maximum.accumulate(ratio)


def lemma41b_check(radius: float = 0.5, n_samples: int = 10_000, seed: int = 0,
                   calibrate_radius: float | None = 0.25) -> LipschitzReport:
    """sup over x in B(0, radius) of |P(x, y1) - P(x, y2)| / |y1 - y2|.

    The doubled sample extends the first one. If ``calibrate_radius`` is set,
    c is fitted at b = 1 - calibrate_radius from c b^-4 and the observed max
    at b = 1 - radius is compared with that shape.
    """
    if radius >= 1:
        raise ValueError("B must stay away from the boundary")
    acc = _lipschitz_max(radius, 2 * n_samples, np.random.default_rng(seed))
    m1, m2 = float(acc[n_samples - 1]), float(acc[-1])
    change = (m2 - m1) / m1
    rep = LipschitzReport(radius, n_samples, m1, m2, change, bool(np.isfinite(m2) and change < 0.10))
    if calibrate_radius is not None:
        mc = float(_lipschitz_max(calibrate_radius, 2 * n_samples, np.random.default_rng(seed + 1))[-1])
        c = mc * (1 - calibrate_radius) ** 4
        rep.calibrated_c = c
        rep.bound = c * (1 - radius) ** -4
        rep.consistent = bool(m2 <= rep.bound)
    return rep


@dataclass
class SupReport:
    p: float
    d: int
    in_region: bool
    levels: list
    values: np.ndarray
    per_point: np.ndarray = field(repr=False)
    sup: float = float("nan")
    change: float = float("nan")
    stable: bool = False
    divergent: bool = False

    def row(self) -> dict:
        return {"check": "poisson_power_sup", "p": self.p, "d": self.d, "sup": self.sup,
                "change": self.change, "stable": self.stable, "divergent": self.divergent}


def _k_points(radius, n_rad=3, n_ang=8):
    pts = [np.zeros(2)]
    for r in np.linspace(radius / n_rad, radius, n_rad):
        t = 2 * np.pi * np.arange(n_ang) / n_ang
        pts.extend(np.stack([r * np.cos(t), r * np.sin(t)], axis=-1))
    return np.asarray(pts)


def green_poisson_power(x, z, p: float, n_panels: int = 80, n_psi: int = 48) -> np.ndarray:
    """int G(x, y) P(y, z)^p dy for each row of x, graded at z, P(x, z)^p subtracted."""
    rule = graded_rule(np.asarray(z, dtype=float), n_panels=n_panels, n_psi=n_psi)
    F = poisson_kernel(rule.points, rule.z, om=rule.om, dist=rule.s) ** p
    out = np.empty(len(x))
    for i, xi in enumerate(x):
        d2 = np.sum((rule.points - xi) ** 2, axis=-1)
        G = green_from_parts(d2, 1.0 - xi @ xi, rule.om, 2)
        c = poisson_kernel(xi, rule.z) ** p
        out[i] = np.sum(rule.weights * np.where(d2 > 0, G * (F - c), 0.0)) + c * expected_exit_time(xi)
    return out


def bound39_check(p: float, radius: float = 0.5, z_samples: int = 4, d: int = 2,
                  stable_tol: float = 0.02, grow_tol: float = 0.10) -> SupReport:
    """sup over x in the closed ball of radius ``radius`` and sampled z of
    int G(x, y) P(y, z)^p dy, at two resolutions.

    ``divergent`` is raised when refinement grows the sup by more than
    ``grow_tol``; ``stable`` means a relative change at most ``stable_tol``.
    """
    if d != 2:
        raise NotImplementedError("the Poisson-power bound check is implemented for d = 2")
    zs = [np.array([np.cos(t), np.sin(t)]) for t in 2 * np.pi * np.arange(z_samples) / z_samples + 0.1]
    xs = _k_points(radius)
    levels = [(80, 48), (160, 96)]
    per = np.empty((len(levels), z_samples, len(xs)))
    with np.errstate(over="ignore", invalid="ignore"):
        for li, (npan, npsi) in enumerate(levels):
            for zi, z in enumerate(zs):
                per[li, zi] = green_poisson_power(xs, z, p, npan, npsi)
    sups = per.reshape(len(levels), -1).max(axis=1)
    if not np.isfinite(sups[-1]):
        change = np.inf
    else:
        change = (sups[-1] - sups[-2]) / sups[-2]
    rep = SupReport(p, d, bool(1 < p < (d + 1) / (d - 1)), levels, sups, per)
    rep.sup = float(sups[-1])
    rep.change = float(change)
    rep.divergent = bool(change > grow_tol)
    rep.stable = bool(np.isfinite(change) and abs(change) <= stable_tol)
    return rep


def report_rows(reports) -> list[dict]:
    rows = []
    for r in reports:
        rows.append(r.row() if hasattr(r, "row") else asdict(r))
    return rows
