"""Command-line entry point.

Exit codes: 0 success, 2 validation or parse error, 3 numerical failure
(non-convergence, divergence or bracketing flags).
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import analytic_checks as ac
from .boundary_density import (density_grid, representation_estimate,
                               representation_from_trajectory, smoothed_density)
from .branching_sim import ValidationError, run_replicas
from .config import ConfigError, Experiment, parse_config
from .exit_measure import (direct_exit_measure, pair_gaps, pair_table_from_gaps,
                           resultant_angle, uniformity_pvalue)
from .io import (RunManifest, write_density, write_events, write_exit_atoms, write_json,
                 write_pde_field, write_reports)
from .quadrature import DivergenceError
from .semilinear_pde import (BracketingError, NonConvergenceError, disc_problem, laplace_mc,
                             radial_shoot, solve_semilinear, solve_vn, trace_functional)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3


class NumericalFailure(ArithmeticError):
    pass


def _load(args) -> Experiment:
    if args.config is None:
        raise ConfigError("--config is required for this subcommand")
    exp = parse_config(args.config)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.replicas is not None:
        over["replicas"] = args.replicas
    if over:
        exp.sim = replace(exp.sim, **over)
    return exp


def _workers(args, exp=None) -> int:
    if args.workers is not None:
        return args.workers
    return int(exp.get("workers", 1)) if exp is not None else 1


def _manifest(exp: Experiment, trajs, t0, name, out):
    status = ["truncated" if t.truncated else "completed" for t in trajs]
    RunManifest(exp.config_hash, exp.sim.seed, replica_status=status,
                wall_time=time.time() - t0, command=name).write(out)


def _mean_se(v):
    v = np.asarray(v, float)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else float("nan")


def cmd_simulate(args, exp, out):
    t0 = time.time()
    trajs = run_replicas(exp.sim, workers=_workers(args, exp))
    write_exit_atoms(os.path.join(out, "exit_atoms.csv"), trajs)
    write_events(os.path.join(out, "events.csv"), trajs)
    ok = [t for t in trajs if not t.truncated]
    m, se = _mean_se([t.exit_mass for t in ok])
    j, jse = _mean_se([t.mass_jumps.sum() for t in ok])
    write_json(os.path.join(out, "summary.json"), {
        "replicas": len(trajs), "truncated": len(trajs) - len(ok),
        "mean_exit_mass": m, "se_exit_mass": se, "mean_jump_sum": j, "se_jump_sum": jse,
        "bookkeeping_defects": sum(t.bookkeeping_defect() != 0 for t in trajs)})
    _manifest(exp, trajs, t0, "simulate", out)


def cmd_exitmeasure(args, exp, out):
    t0 = time.time()
    trajs = run_replicas(exp.sim, workers=_workers(args, exp))
    write_exit_atoms(os.path.join(out, "exit_atoms.csv"), trajs)
    ex = [direct_exit_measure(t) for t in trajs if not t.truncated]
    m, se = _mean_se([e.total_mass for e in ex])
    summ = {"replicas": len(trajs), "used": len(ex), "mean_total_mass": m, "se_total_mass": se,
            "mean_mass_target": exp.sim.total_mass}
    if exp.sim.d == 2:
        ang = [resultant_angle(e) for e in ex if e.total_mass > 0]
        summ["ks_uniform_pvalue"] = uniformity_pvalue(ang) if len(ang) > 1 else float("nan")
    write_json(os.path.join(out, "summary.json"), summ)
    _manifest(exp, trajs, t0, "exitmeasure", out)


def cmd_density(args, exp, out):
    t0 = time.time()
    sim = exp.sim
    if not sim.d < 1 + 2 / sim.beta:
        raise ValidationError("density needs d < 1 + 2/beta")
    h = float(args.bandwidth or exp.get("bandwidth", 0.1))
    grid = density_grid(sim.d, int(exp.get("grid_n", 64 if sim.d == 2 else 2000)))
    trajs = run_replicas(sim, workers=_workers(args, exp))
    ok = [t for t in trajs if not t.truncated]
    sm = smoothed_density([direct_exit_measure(t) for t in ok], h, grid)
    rep = representation_estimate([representation_from_trajectory(t, sim.mu, grid.points) for t in ok],
                                  grid)
    write_density(os.path.join(out, "density.csv"), [sm, rep])
    write_json(os.path.join(out, "summary.json"), {
        "bandwidth": h, "grid_n": grid.size, "used": len(ok),
        "smoothed_mean": float(sm.values.mean()), "representation_mean": float(rep.values.mean())})
    _manifest(exp, trajs, t0, "density", out)


def cmd_pde_solve(args, exp, out):
    sim = exp.sim
    t0 = time.time()
    if sim.d == 2:
        lam = float(args.lam if args.lam is not None else exp.get("lam", 1.0))
        arc = tuple(args.arc) if args.arc else exp.get("arc")
        pb = disc_problem(sim.beta, g=None if arc else lam, arc=arc, lam=lam)
        fld = solve_semilinear(pb)
        write_pde_field(os.path.join(out, "pde_field.csv"), fld.nodes, fld.values)
        summ = {"d": 2, "beta": sim.beta, "lam": lam, "arc": arc, "w_center": fld.at(np.zeros(2)),
                "residual": fld.residual, "iterations": len(fld.history) - 1,
                "residual_history": fld.history}
        if arc is None:
            summ["radial_oracle"] = radial_shoot(lam, sim.beta, 2)
    elif sim.d == 3:
        eps = float(args.eps if args.eps is not None else exp.get("eps", 0.1))
        alpha = float(exp.get("alpha", 1.5))
        r = solve_vn(eps, sim.beta, 3, alpha)
        write_pde_field(os.path.join(out, "pde_field.csv"), r.field.nodes, r.field.values)
        summ = {"d": 3, "beta": sim.beta, "eps": eps, "alpha": alpha, "x0": r.x0, "v_x0": r.v_x0,
                "scaled": r.scaled, "h_x0": r.h_x0, "cap_mass_x0": r.cap_mass_x0,
                "residual": r.field.residual, "iterations": len(r.field.history) - 1}
    else:
        raise ValidationError("pde-solve supports d = 2 and d = 3")
    summ["wall_time"] = time.time() - t0
    write_json(os.path.join(out, "summary.json"), summ)


def _pde_laplace(sim, lam):
    if all(np.allclose(pt, 0) for pt, _ in sim.mu):
        return sim.total_mass * radial_shoot(lam, sim.beta, sim.d)
    if sim.d != 2:
        raise ValidationError("off-centre initial atoms need d = 2 for the PDE value")
    fld = solve_semilinear(disc_problem(sim.beta, g=lam))
    return float(sum(m * fld.at(np.asarray(pt, float)) for pt, m in sim.mu))


def cmd_verify_laplace(args, exp, out):
    sim = exp.sim
    lam = float(args.lam if args.lam is not None else exp.get("lam", 1.0))
    t0 = time.time()
    g = _Const(lam)
    mc, se, used = laplace_mc(sim, g, None, workers=_workers(args, exp))
    pde = _pde_laplace(sim, lam)
    ok = abs(mc - pde) <= max(0.05 * pde, 3 * se)
    write_json(os.path.join(out, "verify_laplace.json"), {
        "mc_value": mc, "pde_value": pde, "se": se, "pass": bool(ok), "replicas_used": used,
        "lam": lam})
    RunManifest(exp.config_hash, sim.seed, replica_status=[], wall_time=time.time() - t0,
                command="verify-laplace").write(out)


class _Const:
    """Picklable constant boundary function."""

    def __init__(self, c):
        self.c = float(c)

    def __call__(self, x):
        return np.full(len(x), self.c)


def _phi_one(x):
    return np.ones(len(x))


def _phi_x1(x):
    return x[:, 0]


def _gap_reducer(tr, eps_list):
    if tr.truncated:
        return None
    return pair_gaps(tr, eps_list, [_phi_one, _phi_x1])


def cmd_verify_exit_approx(args, exp, out):
    import functools
    sim = exp.sim
    eps = tuple(sorted(sim.eps_list, reverse=True))
    cfg = replace(sim, histogram=True, hist_r_min=max(0.0, 1 - max(eps) - 0.05))
    t0 = time.time()
    gaps = run_replicas(cfg, functools.partial(_gap_reducer, eps_list=eps), _workers(args, exp))
    used = np.array([g for g in gaps if g is not None])
    tab = pair_table_from_gaps(used, eps, [_phi_one, _phi_x1])
    rms = tab.rms()
    rows = []
    for j, name in enumerate(("one", "x1")):
        rho, pv = tab.spearman(j)
        dec = bool(np.all(np.diff(rms[:, j]) < 0))
        for i, e in enumerate(eps):
            rows.append({"check": "shell_gap_rms", "phi": name, "eps": e, "predicted": "",
                         "fitted": rms[i, j], "ci_lo": "", "ci_hi": "", "pass": dec and pv < 0.01})
        rows.append({"check": "shell_gap_spearman", "phi": name, "eps": "", "predicted": "",
                     "fitted": rho, "ci_lo": "", "ci_hi": pv, "pass": pv < 0.01})
    write_reports(os.path.join(out, "reports.csv"), rows)
    write_json(os.path.join(out, "summary.json"), {"eps": eps, "rms": rms, "used": len(used)})
    RunManifest(exp.config_hash, sim.seed, wall_time=time.time() - t0,
                command="verify-exit-approx").write(out)


def cmd_check_kernels(args, exp, out):
    name = args.check
    if name == "increment":
        rep = ac.lemma41_check(args.a, args.p)
        row = rep.row()
        if rep.unstable:
            raise NumericalFailure("quadrature instability flag raised")
    elif name == "green-increment":
        rep = ac.lemma42_check(args.p)
        row = rep.row()
        if rep.unstable:
            raise NumericalFailure("quadrature instability flag raised")
    elif name == "lipschitz":
        rep = ac.lemma41b_check(radius=args.radius)
        row = {"check": "poisson_lipschitz", "radius": rep.radius, "predicted": "",
               "fitted": rep.max_ratio_doubled, "ci_lo": rep.max_ratio, "ci_hi": rep.bound,
               "pass": rep.stable and rep.consistent}
    elif name == "poisson-power":
        rep = ac.bound39_check(args.p, radius=args.radius)
        row = {"check": "poisson_power_sup", "p": rep.p, "d": rep.d, "predicted": "",
               "fitted": rep.sup, "ci_lo": "", "ci_hi": rep.change, "pass": rep.stable}
    else:  # pragma: no cover - argparse restricts choices
        raise ValidationError(f"unknown check {name}")
    write_reports(os.path.join(out, "reports.csv"), [row])
    write_json(os.path.join(out, "report.json"), row)
    if name == "poisson-power" and rep.divergent:
        raise NumericalFailure(f"divergence flag: refinement grew the sup by {rep.change:.1%}")


def cmd_trace(args, exp, out):
    sim = exp.sim
    arc = tuple(args.arc) if args.arc else exp.get("arc")
    lam = args.lam if args.lam is not None else exp.get("lam")
    nu = None if lam is None else _Const(lam)
    x0 = exp.get("x0")
    dh = float(exp.get("delta_hit", 2 * np.pi / 512))
    t0 = time.time()
    val, se, used = trace_functional(sim, arc, nu, x0=x0, delta_hit=dh, workers=_workers(args, exp))
    write_json(os.path.join(out, "trace.json"), {"value": val, "se": se, "used": used, "arc": arc,
                                                 "lam": lam, "x0": x0, "delta_hit": dh,
                                                 "all_hit": bool(np.isinf(val))})
    RunManifest(exp.config_hash, sim.seed, wall_time=time.time() - t0, command="trace").write(out)
    if np.isinf(val):
        raise NumericalFailure("every replica hit K (degenerate estimate)")


COMMANDS = {
    "simulate": cmd_simulate,
    "exitmeasure": cmd_exitmeasure,
    "density": cmd_density,
    "pde-solve": cmd_pde_solve,
    "verify-laplace": cmd_verify_laplace,
    "verify-exit-approx": cmd_verify_exit_approx,
    "check-kernels": cmd_check_kernels,
    "trace": cmd_trace,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="superexit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", default=None)
        s.add_argument("--out", default="out")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--replicas", type=int, default=None)
        s.add_argument("--workers", type=int, default=None)
        if name == "check-kernels":
            s.add_argument("--check", required=True,
                           choices=["increment", "green-increment", "lipschitz", "poisson-power"])
            s.add_argument("--a", type=float, default=1.0)
            s.add_argument("--p", type=float, default=1.0)
            s.add_argument("--radius", type=float, default=0.5)
        if name in ("pde-solve", "verify-laplace", "trace"):
            s.add_argument("--lam", type=float, default=None)
        if name in ("pde-solve", "trace"):
            s.add_argument("--arc", type=float, nargs=2, default=None)
        if name == "pde-solve":
            s.add_argument("--eps", type=float, default=None)
        if name == "density":
            s.add_argument("--bandwidth", type=float, default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        os.makedirs(args.out, exist_ok=True)
        exp = None if (args.command == "check-kernels" and args.config is None) else _load(args)
        COMMANDS[args.command](args, exp, args.out)
    except (ConfigError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalFailure, NonConvergenceError, DivergenceError, BracketingError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
