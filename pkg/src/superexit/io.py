"""CSV and JSON artifacts. Every CSV starts with a header naming columns and
units; floats are written with repr so reruns are byte-identical.

Schemas:
  exit_atoms  replica, theta[rad] | x1..xd[length], mass[mass]
  events      replica, time[time], x1..xd[length], k[count], mass_jump[mass]
  density     coord: theta[rad] | x1..x3[length], value[mass/area], stderr[mass/area],
              estimator, bandwidth[rad]
  pde_field   x1..xd[length], value[1]
  reports     check, params..., predicted[1], fitted[1], ci_lo[1], ci_hi[1], pass
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field
from importlib import metadata

import numpy as np


def tool_version() -> str:
    try:
        return metadata.version("superexit")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def coord_header(d: int, boundary: bool) -> list:
    if boundary and d == 2:
        return ["theta[rad]"]
    return [f"x{i + 1}[length]" for i in range(d)]


def _coords(points, boundary: bool):
    points = np.asarray(points, float)
    if boundary and points.shape[1] == 2:
        return np.mod(np.arctan2(points[:, 1], points[:, 0]), 2 * np.pi)[:, None]
    return points


def write_exit_atoms(path, trajectories):
    d = trajectories[0].d if trajectories else 2
    header = ["replica"] + coord_header(d, True) + ["mass[mass]"]

    def rows():
        for i, tr in enumerate(trajectories):
            c = _coords(tr.exit_points, True) if len(tr.exit_points) else np.zeros((0, 1))
            for row in c:
                yield [i, *row, 1.0 / tr.n]
    write_csv(path, header, rows())


def write_events(path, trajectories):
    d = trajectories[0].d if trajectories else 2
    header = ["replica", "time[time]"] + coord_header(d, False) + ["k[count]", "mass_jump[mass]"]

    def rows():
        for i, tr in enumerate(trajectories):
            for t, x, k in zip(tr.event_times, tr.event_points, tr.event_k):
                yield [i, t, *x, int(k), (int(k) - 1) / tr.n]
    write_csv(path, header, rows())


def write_density(path, estimates):
    est = estimates[0]
    d = est.grid.d
    header = coord_header(d, True) + ["value[mass/area]", "stderr[mass/area]", "estimator",
                                      "bandwidth[rad]"]

    def rows():
        for e in estimates:
            c = _coords(e.grid.points, True)
            for i in range(e.grid.size):
                yield [*c[i], e.values[i], e.stderr[i], e.estimator, e.bandwidth]
    write_csv(path, header, rows())


def write_pde_field(path, nodes, values):
    d = nodes.shape[1]
    write_csv(path, coord_header(d, False) + ["value[1]"],
              ([*x, v] for x, v in zip(nodes, values)))


REPORT_TAIL = ["predicted[1]", "fitted[1]", "ci_lo[1]", "ci_hi[1]", "pass"]


def write_reports(path, rows: list[dict]):
    keys = []
    for r in rows:
        for k in r:
            if k not in ("check", "predicted", "fitted", "ci_lo", "ci_hi", "pass") and k not in keys:
                keys.append(k)
    header = ["check"] + keys + REPORT_TAIL
    write_csv(path, header, ([r.get("check", "")] + [r.get(k, "") for k in keys]
                             + [r.get(k, "") for k in ("predicted", "fitted", "ci_lo", "ci_hi", "pass")]
                             for r in rows))


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if np.isfinite(f) else str(f)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    tool_version: str = field(default_factory=tool_version)
    replica_status: list = field(default_factory=list)
    wall_time: float = 0.0
    command: str = ""

    def write(self, out_dir):
        write_json(os.path.join(out_dir, "manifest.json"), asdict(self))
