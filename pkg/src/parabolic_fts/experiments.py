"""Experiment runner: single runs, the built-in presets and parameter sweeps."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import FtsReport, IssReport, fts_metric, iss_metric
from .config import ExperimentConfig, to_text
from .controller import ControllerConfig, build_config, closed_loop_simulate
from .errors import ConfigError, FtsError
from .pde import Coefficients, DisturbanceSpec, Grid, Trace, simulate_open_loop

log = logging.getLogger(__name__)

__all__ = [
    "PRESETS",
    "RunResult",
    "initial_datum",
    "run_experiment",
    "write_artifacts",
    "run_preset",
    "run_sweep",
    "SWEEP_AXES",
]

_BASE = dict(lambda0=3.5, sigma=1.0, n_max=2, a=1.0, c=24.0, N=201, dt_base=1e-4, omega=30.0)

PRESETS: dict[str, ExperimentConfig] = {
    "open-loop": ExperimentConfig(case="open_loop", t_end=1.0, boundary_mode="hold", **_BASE),
    "fts-case1": ExperimentConfig(case="I", p=1.9, **_BASE),
    "fts-case1-x10": ExperimentConfig(case="I", p=1.9, init_scale=10.0, **_BASE),
    "ftiss-case1-a1": ExperimentConfig(case="I", p=1.9, A=1.0, **_BASE),
    "ftiss-case1-a2": ExperimentConfig(case="I", p=1.9, A=2.0, **_BASE),
    "fts-case2": ExperimentConfig(case="II", T0=1.5, **_BASE),
    "fts-case2-x10": ExperimentConfig(case="II", T0=1.5, init_scale=10.0, **_BASE),
    "ftiss-case2-a1": ExperimentConfig(case="II", T0=1.5, A=1.0, **_BASE),
    "ftiss-case2-a2": ExperimentConfig(case="II", T0=1.5, A=2.0, **_BASE),
}


def initial_datum(grid: Grid, scale: float = 1.0) -> np.ndarray:
    """scale * (-4 sin(15 (x - 1/2)))."""
    return scale * -4.0 * np.sin(15.0 * (grid.x - 0.5))


@dataclass
class RunResult:
    config: ExperimentConfig
    trace: Trace
    controller: ControllerConfig | None
    fts: FtsReport | None
    iss: IssReport | None

    def summary_row(self) -> dict:
        row = {"case": self.config.case, "A": self.config.A, "N": self.config.N,
               "dt_base": self.config.dt_base, "sigma": self.config.sigma,
               "n_max": self.config.n_max, "init_scale": self.config.init_scale}
        if self.fts is not None:
            row.update({f"fts_{k}": v for k, v in self.fts.to_row().items()})
        if self.iss is not None:
            row.update({f"iss_{k}": v for k, v in self.iss.to_row().items()})
        if self.config.case == "open_loop":
            row["growth_ratio"] = float(self.trace.l2_u[-1] / self.trace.l2_u[0])
        return row


def run_experiment(cfg: ExperimentConfig, keep_fields: bool = False,
                   stride: int | None = None) -> RunResult:
    grid = Grid(cfg.N)
    co = Coefficients(cfg.a, cfg.c)
    dist = DisturbanceSpec.sinusoidal_d1(cfg.A, cfg.omega)
    u0 = initial_datum(grid, cfg.init_scale)
    stride = cfg.stride if stride is None else stride
    if cfg.case == "open_loop":
        trace = simulate_open_loop(co, dist, u0, cfg.t_end, cfg.dt_base, cfg.boundary_mode,
                                   grid=grid, stride=stride, keep_fields=keep_fields,
                                   snapshot_times=cfg.snapshots)
        return RunResult(cfg, trace, None, None, None)
    sched = cfg.schedule()
    ctrl = build_config(sched, cfg.sigma, co, grid)
    log.info("case %s: T0=%.6g, segments=%s, gains=%s", cfg.case, sched.T0,
             np.round(sched.t, 6).tolist(), np.round(sched.lam, 6).tolist())
    trace = closed_loop_simulate(ctrl, dist, u0, cfg.dt_base, stride,
                                 keep_fields=keep_fields, snapshot_times=cfg.snapshots)
    return RunResult(cfg, trace, ctrl, fts_metric(trace, T0=sched.T0),
                     iss_metric(trace, T0=sched.T0))


_PLOT_TEMPLATE = '''\
"""Plot the L2 norm trajectory written by the simulator (needs matplotlib)."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "trace.csv"
with open(path) as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6, 6))
ax1.semilogy(t, [max(float(r["l2_u"]), 1e-300) for r in rows], label="||u||")
ax1.set_ylabel("L2 norm")
ax1.set_title({title!r})
ax1.legend()
ax2.plot(t, [float(r["U"]) for r in rows], label="U")
ax2.plot(t, [float(r["d1"]) for r in rows], label="d1")
ax2.set_xlabel("t")
ax2.legend()
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''


def write_artifacts(result: RunResult, out_dir, name: str = "run") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"trace": result.trace.to_csv(out / "trace.csv",
                                          split=result.config.case != "open_loop")}
    row = result.summary_row()
    paths["report_csv"] = out / "report.csv"
    with paths["report_csv"].open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(row.keys())
        writer.writerow([_fmt(v) for v in row.values()])
    lines = [f"experiment: {name}", ""]
    if result.controller is not None:
        sched = result.controller.schedule
        lines.append(f"T0 = {sched.T0:.10g}")
        for n in range(sched.n_segments):
            a, b = sched.segment(n)
            lines.append(f"segment {n}: [{a:.6g}, {b:.6g})  lambda = {sched.lam[n]:.6g}")
        lines.append("")
    if result.fts is not None:
        lines.append(result.fts.to_text())
    if result.iss is not None:
        lines.append(result.iss.to_text())
    if "growth_ratio" in row:
        lines.append(f"open loop: ||u(t_end)|| / ||u0|| = {row['growth_ratio']:.6e}")
    paths["report_txt"] = out / "report.txt"
    paths["report_txt"].write_text("\n".join(lines) + "\n")
    paths["config"] = out / "config.ini"
    paths["config"].write_text(to_text(result.config))
    paths["plot"] = out / "plot.py"
    paths["plot"].write_text(_PLOT_TEMPLATE.format(title=name))
    for i, p in enumerate(result.trace.write_snapshots(out)):
        paths[f"snapshot_{i}"] = p
    return paths


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def run_preset(name: str, out_dir="out") -> tuple[RunResult, dict[str, Path]]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} (allowed: {', '.join(PRESETS)})")
    result = run_experiment(PRESETS[name])
    return result, write_artifacts(result, Path(out_dir) / name, name)


SWEEP_AXES = ("A", "N", "dt_base", "sigma", "n_max")


def _sweep_worker(cfg: ExperimentConfig) -> dict:
    try:
        res = run_experiment(cfg)
    except FtsError as exc:
        return {"status": f"error: {type(exc).__name__}: {exc}"}
    row = res.summary_row()
    row["status"] = "ok"
    row["_times"] = res.trace.times
    row["_l2"] = res.trace.l2_u
    return row


def run_sweep(cfg: ExperimentConfig, axis: str, values: Sequence, out_path=None,
              max_workers: int | None = None) -> list[dict]:
    """Run ``cfg`` once per value of ``axis`` in parallel processes.

    Each row carries the FTS/ISS summary; for the N and dt_base axes it also
    carries ``self_conv_err``, the max gap of the ||u|| trajectory to the
    finest run relative to that run's peak.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r} (allowed: {', '.join(SWEEP_AXES)})")
    configs, rows = [], []
    for v in values:
        try:
            configs.append(cfg.with_value(axis, v))
        except FtsError as exc:
            configs.append(exc)
    runnable = [c for c in configs if isinstance(c, ExperimentConfig)]
    results = iter([])
    if runnable:
        if max_workers == 1 or len(runnable) == 1:
            results = iter([_sweep_worker(c) for c in runnable])
        else:
            with ProcessPoolExecutor(max_workers=max_workers) as pool:
                results = iter(list(pool.map(_sweep_worker, runnable)))
    for v, c in zip(values, configs):
        if isinstance(c, ExperimentConfig):
            row = next(results)
        else:
            row = {"status": f"error: {type(c).__name__}: {c}"}
        rows.append({"axis": axis, "value": v, **row})

    if axis in ("N", "dt_base"):
        ok = [r for r in rows if r["status"] == "ok"]
        if ok:
            finest = max(ok, key=lambda r: r["value"]) if axis == "N" else min(ok, key=lambda r: r["value"])
            for r in ok:
                ref = np.interp(r["_times"], finest["_times"], finest["_l2"])
                r["self_conv_err"] = float(np.max(np.abs(r["_l2"] - ref)) / np.max(np.abs(ref)))
    for r in rows:
        r.pop("_times", None)
        r.pop("_l2", None)
    if out_path is not None:
        write_summary(rows, out_path)
    return rows


def write_summary(rows: list[dict], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    keys: list[str] = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    if not keys:
        keys = ["axis", "value", "status"]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(keys)
        for r in rows:
            writer.writerow([_fmt(r.get(k, "")) for k in keys])
    return path
