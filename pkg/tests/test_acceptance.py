"""Acceptance criteria 1-10. Each test prints one PASS/FAIL line (collected
again in the terminal summary) and then asserts at the stated tolerance."""
import functools
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from superexit.analytic_checks import bound39_check, lemma41_check, lemma42_check
from superexit.boundary_density import (density_grid, representation_from_trajectory,
                                        sup_growth_diagnostic)
from superexit.branching_sim import (SimConfig, csbp_survival_exact, csbp_survival_limit,
                                     offspring_law, richardson_survival, run_replicas, tail_slope)
from superexit.cli import main as cli_main
from superexit.exit_measure import direct_exit_measure, pair_gaps, pair_table_from_gaps
from superexit.geometry import poisson_kernel
from superexit.semilinear_pde import (_laplace_reducer, arc_trace_pde, laplace_mc, radial_shoot,
                                      solve_vn, trace_functional, trace_reducer)

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

TIMES: dict = {}
K_ARC = (0.0, np.pi / 4)
DELTA_HIT = 2 * np.pi / 512
Y8 = density_grid(2, 8).points


def _report(k, ok, detail, capsys):
    line = f"CRITERION {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[k] = line
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def _mean_se(v):
    v = np.asarray(v, float)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v)))


def _one(z):
    return np.ones(len(z))


def _x1(z):
    return z[:, 0]


def _summary(tr):
    """Per-replica quantities for criteria 3, 4, 9 and 10."""
    if tr.truncated:
        return None
    return {
        "mass": tr.exit_mass,
        "jumps": float(tr.mass_jumps.sum()),
        "defect": tr.bookkeeping_defect(),
        "laplace": _laplace_reducer(tr, _one, None),
        "trace_K": trace_reducer(tr, [K_ARC], DELTA_HIT, None),
        "rep": representation_from_trajectory(tr, ((((0.0, 0.0)), 1.0),), Y8),
    }


SHARED = dict(d=2, n=2000, dt=1e-4, mu=(((0.0, 0.0), 1.0),), replicas=500)


@pytest.fixture(scope="module")
def shared_05():
    cfg = SimConfig(beta=0.5, seed=20261014, **SHARED)
    t0 = time.time()
    out = run_replicas(cfg, _summary)
    return cfg, out, time.time() - t0


def _criterion3(cfg, out):
    used = [s for s in out if s is not None]
    mc, se, n_used = laplace_mc(cfg, _one, values=[s["laplace"] for s in used])
    pde = radial_shoot(1.0, cfg.beta, 2)
    tol = max(0.05 * pde, 3 * se)
    return mc, se, pde, tol, n_used


# ------------------------------------------------------------------ 1, 2

def test_criterion_01_kernel_exponents(capsys):
    t0 = time.time()
    reps = [lemma41_check(1.0, 1.0), lemma41_check(1.0, 2.5), lemma42_check(1.0), lemma42_check(2.0)]
    want = [1.0, 0.5, 1.0, 1.0]
    dt = time.time() - t0
    TIMES[1] = dt
    ok = all(abs(r.slope - w) <= 0.15 and not r.unstable for r, w in zip(reps, want)) and dt < 120
    slopes = ", ".join(f"{r.check}(p={r.params['p']})={r.slope:.3f}[{w}]" for r, w in zip(reps, want))
    _report(1, ok, f"slopes {slopes}; {dt:.1f}s", capsys)


def test_criterion_02_poisson_power_region(capsys):
    t0 = time.time()
    a = bound39_check(2.9)
    b = bound39_check(3.2)
    dt = time.time() - t0
    TIMES[2] = dt
    ok = (np.isfinite(a.sup) and a.stable and abs(a.change) <= 0.02 and not a.divergent
          and b.divergent and dt < 120)
    _report(2, ok, f"p=2.9 sup={a.sup:.4f} change={a.change:+.2%}; p=3.2 change={b.change:.3g} "
               f"divergent={b.divergent}; {dt:.1f}s", capsys)


# ------------------------------------------------------------------ 3

def test_criterion_03_laplace_oracle(shared_05, capsys):
    cfg, out, wall = shared_05
    mc, se, pde, tol, n_used = _criterion3(cfg, out)
    ok5 = abs(mc - pde) <= tol and n_used >= 500
    cfg8 = SimConfig(beta=0.8, seed=20261015, **SHARED)
    t0 = time.time()
    vals = run_replicas(cfg8, functools.partial(_laplace_reducer, g=_one, phi=None))
    wall8 = time.time() - t0
    mc8, se8, n8 = laplace_mc(cfg8, _one, values=vals)
    pde8 = radial_shoot(1.0, 0.8, 2)
    ok8 = abs(mc8 - pde8) <= max(0.05 * pde8, 3 * se8) and n8 >= 500
    _report(3, ok5 and ok8,
            f"beta=0.5 mc={mc:.4f}+-{se:.4f} pde={pde:.4f} (|diff|={abs(mc - pde):.4f} <= {tol:.4f}), "
            f"{n_used} reps {wall:.0f}s; beta=0.8 mc={mc8:.4f}+-{se8:.4f} pde={pde8:.4f}, {wall8:.0f}s",
            capsys)


# ------------------------------------------------------------------ 4

def _first_moments(out):
    used = [s for s in out if s is not None]
    m, se = _mean_se([s["mass"] for s in used])
    rep = np.array([s["rep"] for s in used])
    rm, rse = rep.mean(axis=0), rep.std(axis=0, ddof=1) / np.sqrt(len(rep))
    return m, se, (rm - poisson_kernel(np.zeros(2), Y8)) / rse


def test_criterion_04_first_moments(shared_05, capsys):
    # For beta < 1 both quantities have infinite variance, and the representation sum is
    # strongly right-skewed, so a 3 SE band over 500 replicas undercovers. The assertion
    # uses a dedicated run with 4000 replicas; the shared-run numbers are reported alongside.
    _, out, _ = shared_05
    m0, se0, z0 = _first_moments(out)
    cfg = SimConfig(d=2, beta=0.5, n=200, dt=1e-3, replicas=4000, seed=404)
    m, se, z = _first_moments(run_replicas(cfg, _summary))
    ok = abs(m - 1.0) <= 3 * se and abs(m0 - 1.0) <= 3 * se0 and np.all(np.abs(z) <= 3)
    _report(4, ok, f"4000 reps n=200: mass {m:.4f}+-{se:.4f} (target 1), representation z at 8 "
                   f"points {np.array2string(z, precision=2)}; shared 500-rep run: mass "
                   f"{m0:.4f}+-{se0:.4f}, z {np.array2string(z0, precision=2)}", capsys)


# ------------------------------------------------------------------ 5

def _gap_reducer(tr):
    if tr.truncated:
        return None
    return pair_gaps(tr, (0.2, 0.1, 0.05), [_one, _x1])


def test_criterion_05_shell_convergence(capsys):
    cfg = SimConfig(d=2, beta=0.5, n=1000, dt=1e-4, replicas=250, seed=5, histogram=True,
                    hist_r_min=0.75, eps_list=(0.2, 0.1, 0.05))
    gaps = np.array([g for g in run_replicas(cfg, _gap_reducer) if g is not None])
    tab = pair_table_from_gaps(gaps, (0.2, 0.1, 0.05), [_one, _x1])
    rms = tab.rms()
    parts, ok = [], len(gaps) >= 200
    for j, name in enumerate(("1", "x1")):
        rho, pv = tab.spearman(j)
        dec = bool(np.all(np.diff(rms[:, j]) < 0))
        ok = ok and dec and rho > 0 and pv < 0.01
        parts.append(f"phi={name} rms={np.array2string(rms[:, j], precision=4)} "
                     f"spearman={rho:.3f} p={pv:.2e}")
    _report(5, ok, f"{len(gaps)} reps; " + "; ".join(parts), capsys)


# ------------------------------------------------------------------ 6

def test_criterion_06_csbp_and_offspring(capsys):
    target = csbp_survival_limit(0.5, 1.0, 1.0)
    est, se, (a, b) = richardson_survival(0.5, 1.0, 1.0, 400, 1600, replicas=10_000, seed=6)
    exact_ok = all(abs(r.survival_estimate()[0] - csbp_survival_exact(0.5, 1.0, 1.0, r.n))
                   <= 3 * r.survival_estimate()[1] for r in (a, b))
    laws = {b_: offspring_law(b_) for b_ in (0.3, 0.5, 0.8)}
    crit = all(abs(l.total - 1) < 1e-10 and abs(l.mean - 1) < 1e-10 for l in laws.values())
    slope = tail_slope(laws[0.5])
    bin_ = offspring_law(1.0)
    binary = bin_.probs[0] == 0.5 and bin_.probs[2] == 0.5 and bin_.probs.sum() == 1.0
    ok = abs(est - target) <= 3 * se and exact_ok and crit and abs(slope + 2.5) <= 0.05 and binary
    _report(6, ok, f"survival (Richardson n=400,1600; 2x1e4 reps) {est:.4f}+-{se:.4f} vs "
                   f"1-e^-4={target:.4f}; finite-n exact ok={exact_ok}; critical={crit}; "
                   f"tail slope {slope:.4f}; binary law exact={binary}", capsys)


# ------------------------------------------------------------------ 7

def _exit_reducer(tr):
    return None if tr.truncated else direct_exit_measure(tr)


def test_criterion_07_dichotomy(capsys):
    bw = (0.2, 0.1, 0.05)
    c2 = SimConfig(d=2, beta=0.6, n=2000, dt=1e-3, replicas=200, seed=72)
    ex2 = [e for e in run_replicas(c2, _exit_reducer) if e is not None]
    r2 = sup_growth_diagnostic(ex2, bw, np.array([1.0, 0.0]), 0.5, density_grid(2, 2048),
                               beta=0.6, control=True)
    c3 = SimConfig(d=3, beta=0.6, n=2000, dt=1e-3, replicas=200, seed=73,
                   mu=(((0.5, 0.0, 0.0), 1.0),))
    ex3 = [e for e in run_replicas(c3, _exit_reducer) if e is not None]
    r3 = sup_growth_diagnostic(ex3, bw, np.array([1.0, 0.0, 0.0]), 0.5, density_grid(3, 20000),
                               beta=0.6)
    ok = r2.last_ratio < 1.5 and r3.strictly_increasing() and r3.hit.sum() > 0
    _report(7, ok, f"d=2 medians {np.array2string(r2.medians, precision=3)} last ratio "
                   f"{r2.last_ratio:.3f}; d=3 medians {np.array2string(r3.medians, precision=3)} "
                   f"on {int(r3.hit.sum())} replicas with mass in B", capsys)


# ------------------------------------------------------------------ 8

def test_criterion_08_vn_divergence(capsys):
    t0 = time.time()
    res = [solve_vn(e, 0.6, 3, 1.5) for e in (0.2, 0.1, 0.05)]
    dt = time.time() - t0
    sc = np.array([r.scaled for r in res])
    caps = np.array([r.cap_mass_x0 for r in res])
    ok = bool(np.all(np.diff(sc) > 0)) and dt < 300
    _report(8, ok, f"eps^1.5 v(x0) = {np.array2string(sc, precision=4)} at eps 0.2, 0.1, 0.05; "
                   f"cap mass {np.array2string(caps, precision=3)}; {dt:.0f}s", capsys)


# ------------------------------------------------------------------ 9

def test_criterion_09_trace(shared_05, capsys):
    cfg, out, _ = shared_05
    used = [s for s in out if s is not None]
    # K empty: trace_functional with nu = g sigma goes through laplace_mc itself
    same = trace_functional(cfg, None, _one, values=[(s["laplace"], []) for s in used]) \
        == laplace_mc(cfg, _one, values=[s["laplace"] for s in used])
    small = SimConfig(d=2, beta=0.5, n=50, dt=1e-3, replicas=50, seed=9)
    same_fresh = trace_functional(small, None, _one) == laplace_mc(small, _one, None)
    mc, se, _ = trace_functional(cfg, K_ARC, None, values=[s["trace_K"] for s in used])
    seq = arc_trace_pde(0.5, K_ARC, (0.0, 0.0), (10.0, 40.0, 160.0))
    pde = seq.extrapolated
    close = np.isfinite(mc) and abs(mc - pde) <= 0.15 * pde
    ok = same and same_fresh and seq.monotone and seq.last_gap < 0.10 and close
    hits = sum(s["trace_K"][1][0] for s in used)
    _report(9, ok, f"K empty path identical={same and same_fresh}; K=pi/4 arc: MC -log P = {mc} "
                   f"({hits}/{len(used)} replicas hit K), PDE lambda=10,40,160 -> "
                   f"{np.array2string(seq.values, precision=4)}, gap40-160 {seq.last_gap:.1%}, "
                   f"extrapolated {pde:.4f}", capsys)


# ------------------------------------------------------------------ 10

SMALL_CFG = """d = 2
beta = 0.5
n = 200
dt = 1e-3
mu = [(0, 0):1, (0.4, 0.2):0.5]
seed = 7
replicas = 40
"""


def test_criterion_10_engineering(shared_05, tmp_path, capsys):
    _, out, _ = shared_05
    defects = [s["defect"] for s in out if s is not None]
    book = len(defects) == len(out) and all(d == 0 for d in defects)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(SMALL_CFG)
    for k, w in enumerate(("1", "2")):
        assert cli_main(["simulate", "--config", str(cfg), "--out", str(tmp_path / f"o{k}"),
                         "--workers", w]) == 0
    identical = all((tmp_path / "o0" / f).read_bytes() == (tmp_path / "o1" / f).read_bytes()
                    for f in ("exit_atoms.csv", "events.csv"))
    here = os.path.dirname(__file__)
    unit = sorted(f for f in os.listdir(here) if f.startswith("test_") and f.endswith(".py")
                  and f != "test_acceptance.py")
    t0 = time.time()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *unit],
                          cwd=here, capture_output=True, text=True)
    unit_time = time.time() - t0
    c12 = TIMES.get(1, None), TIMES.get(2, None)
    if None in c12:
        t1 = time.time()
        lemma41_check(1.0, 1.0), lemma41_check(1.0, 2.5), lemma42_check(1.0), lemma42_check(2.0)
        bound39_check(2.9), bound39_check(3.2)
        c12 = (time.time() - t1, 0.0)
    total = unit_time + sum(c12)
    ok = book and identical and proc.returncode == 0 and total < 300
    _report(10, ok, f"bookkeeping exact on {len(defects)}/{len(out)} replicas; byte-identical "
                    f"reruns={identical}; unit suite rc={proc.returncode} {unit_time:.0f}s + "
                    f"criteria 1-2 {sum(c12):.0f}s = {total:.0f}s (< 300s)", capsys)
