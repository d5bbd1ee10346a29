"""Splitting controller: U = V + W.

The plant state is split as u = v + w.  The disturbance-free part v starts
from u0 and is driven by V(t) = ∫ k_n(1,y) v(y,t) dy with a gain that
switches on every schedule segment; the disturbed part w starts from zero,
sees every disturbance, and is driven by W(t) = ∫ k(1,y) w(y,t) dy with a
fixed kernel built for lambda = sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConfigError, HorizonError, NumericalError
from .kernels import (GainRow, KernelField, KernelParams, direct_transform, gain_row,
                      kernel_field)
from .pde import (Coefficients, DisturbanceSpec, Grid, Propagator, Trace, _Recorder,
                  l2_norm, linf_norm, simulate_plant, uniform_step_times)
from .schedule import Schedule, segment_of

__all__ = [
    "ControllerConfig",
    "SplitState",
    "TargetRun",
    "build_config",
    "control_V",
    "control_W",
    "step_plan",
    "closed_loop_simulate",
    "simulate_target_v",
    "simulate_target_w",
    "replay_plant",
]


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    schedule: Schedule
    sigma: float
    coefficients: Coefficients
    grid: Grid
    gains_v: tuple[GainRow, ...]
    gain_w: GainRow

    def kernel_params(self, lam: float) -> KernelParams:
        return KernelParams(lam, self.coefficients.a, self.coefficients.c)

    def kernel_v(self, n: int) -> KernelField:
        return kernel_field(self.kernel_params(float(self.schedule.lam[n])), self.grid)

    @cached_property
    def kernel_w(self) -> KernelField:
        return kernel_field(self.kernel_params(self.sigma), self.grid)


def build_config(schedule: Schedule, sigma: float, coefficients: Coefficients,
                 grid: Grid) -> ControllerConfig:
    """Precompute one gain row per segment plus the sigma gain row."""
    if not (math.isfinite(sigma) and sigma > 0):
        raise ConfigError(f"sigma must be positive, got {sigma}")
    a, c = coefficients.a, coefficients.c
    gains_v = tuple(gain_row(KernelParams(float(lam), a, c), grid) for lam in schedule.lam)
    return ControllerConfig(schedule, float(sigma), coefficients, grid, gains_v,
                            gain_row(KernelParams(float(sigma), a, c), grid))


@dataclass
class SplitState:
    v: np.ndarray
    w: np.ndarray
    time: float

    @property
    def u(self) -> np.ndarray:
        return self.v + self.w


def control_V(v, cfg: ControllerConfig, time: float) -> float:
    return cfg.gains_v[segment_of(cfg.schedule, time)].apply(v)


def control_W(w, cfg: ControllerConfig) -> float:
    return cfg.gain_w.apply(w)


def step_plan(schedule: Schedule, dt_base: float) -> list[tuple[int, float, np.ndarray]]:
    """(segment, dt, new-level times) for every segment.

    Each segment is cut into equal steps no longer than min(dt_base,
    0.1/lam_n), so switching times are hit exactly.
    """
    if not dt_base > 0:
        raise ConfigError(f"dt_base must be positive, got {dt_base}")
    plan = []
    for n in range(schedule.n_segments):
        t0, t1 = schedule.segment(n)
        dt = min(dt_base, 0.1 / float(schedule.lam[n]))
        times = uniform_step_times(t0, t1, dt)
        plan.append((n, (t1 - t0) / len(times), times))
    return plan


def closed_loop_simulate(cfg: ControllerConfig, dist: DisturbanceSpec, u0,
                         dt_base: float = 1e-4, stride: int = 10,
                         keep_fields: bool = False,
                         snapshot_times: Sequence[float] = ()) -> Trace:
    """Run the split closed loop on [0, T0].

    V and W are evaluated on the state at the start of each step and imposed
    at the new time level.  Samples are taken every ``stride`` steps, at each
    switching time and at T0 (where the last segment's gains are used).
    """
    grid = cfg.grid
    v = np.array(u0, dtype=float)
    if v.shape != (grid.n_points,):
        raise ConfigError(f"u0 must have {grid.n_points} nodes, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NumericalError("initial datum is not finite")
    w = np.zeros_like(v)
    dist = dist.fresh()
    co = cfg.coefficients
    rec = _Recorder(grid, keep_fields, snapshot_times)
    step_t, step_U = [], []
    t = 0.0
    rec.snap(t, v)
    k = 0
    for n, dt, times in step_plan(cfg.schedule, dt_base):
        prop = Propagator(grid, dt, co)
        gv = cfg.gains_v[n]
        both = np.empty((grid.n_points, 2))
        for j, t_new in enumerate(times):
            V = gv.apply(v)
            W = cfg.gain_w.apply(w)
            if j == 0 or k % stride == 0:
                rec.add(t, v, w, V, W, dist.right(t), n, dist.sups)
            both[:, 0] = v
            both[:, 1] = w
            d1 = dist.right(t_new)
            forcing = dist.forcing(grid.x, t_new)
            if forcing is not None:
                forcing = np.column_stack((np.zeros_like(forcing), forcing))
            try:
                both = prop.advance(both, np.array([0.0, dist.left(t_new)]),
                                    np.array([V, W + d1]), forcing)
            except NumericalError as exc:
                raise NumericalError(f"closed loop diverged at t={t_new:.6g} "
                                     f"(segment {n}): {exc}") from exc
            v = both[:, 0].copy()
            w = both[:, 1].copy()
            step_t.append(float(t_new))
            step_U.append(V + W)
            t = float(t_new)
            rec.snap(t, v + w)
            k += 1
    last = cfg.schedule.n_max
    rec.add(t, v, w, cfg.gains_v[last].apply(v), cfg.gain_w.apply(w), dist.right(t),
            last, dist.sups)
    return rec.finish(step_t, step_U)


def replay_plant(cfg: ControllerConfig, dist: DisturbanceSpec, u0, trace: Trace,
                 keep_fields: bool = True) -> Trace:
    """Drive the unsplit plant with the control log of ``trace``.

    Uses the same time steps, so for a linear plant the result must agree
    with v + w of the split run up to round-off.
    """
    return simulate_plant(cfg.coefficients, dist, u0, trace.step_t, trace.step_U,
                          grid=cfg.grid, stride=1, keep_fields=keep_fields)


@dataclass
class TargetRun:
    times: np.ndarray
    l2: np.ndarray
    linf: np.ndarray
    fields: np.ndarray | None = None
    # running sup over the boundary data actually imposed up to each sample
    sup_f: np.ndarray | None = None
    sup_d0: np.ndarray | None = None
    sup_d1: np.ndarray | None = None
    sigma: float | None = None
    lam: float | None = None
    t_start: float = 0.0


def simulate_target_v(cfg: ControllerConfig, v_start, n: int, dt_base: float = 1e-4,
                      keep_fields: bool = False) -> TargetRun:
    """Transformed subsystem on segment n: ṽ_t = a ṽ_xx - lam_n ṽ, ṽ = 0 at both ends.

    ``v_start`` is the plant-side profile v at t_n; it is mapped through the
    direct transform with kernel k_n.
    """
    if not 0 <= n <= cfg.schedule.n_max:
        raise HorizonError(f"segment {n} outside 0..{cfg.schedule.n_max}")
    lam = float(cfg.schedule.lam[n])
    grid = cfg.grid
    vt = direct_transform(v_start, cfg.kernel_v(n))
    t0, t1 = cfg.schedule.segment(n)
    dt = min(dt_base, 0.1 / lam)
    times = uniform_step_times(t0, t1, dt)
    prop = Propagator(grid, (t1 - t0) / len(times), Coefficients(cfg.coefficients.a, -lam))
    ts, l2s, lis, flds = [t0], [l2_norm(vt, grid)], [linf_norm(vt)], [vt.copy()]
    for t_new in times:
        vt = prop.advance(vt, 0.0, 0.0)
        ts.append(float(t_new))
        l2s.append(l2_norm(vt, grid))
        lis.append(linf_norm(vt))
        if keep_fields:
            flds.append(vt.copy())
    return TargetRun(np.array(ts), np.array(l2s), np.array(lis),
                     np.array(flds) if keep_fields else None, lam=lam, t_start=t0)


def simulate_target_w(cfg: ControllerConfig, dist: DisturbanceSpec, dt_base: float = 1e-4,
                      stride: int = 1, keep_fields: bool = False) -> TargetRun:
    """Transformed disturbed subsystem w̃_t = a w̃_xx - sigma w̃ + f̃, w̃ = (d0, d1) at the ends.

    Starts from zero and uses the same time steps as the closed loop, so its
    output can be compared sample by sample with the transformed w.
    """
    grid = cfg.grid
    kf = cfg.kernel_w if dist.f is not None else None
    co = Coefficients(cfg.coefficients.a, -cfg.sigma)
    dist = dist.fresh()
    wt = np.zeros(grid.n_points)
    ts, l2s, lis, flds = [0.0], [0.0], [0.0], [wt.copy()]
    sf, s0, s1 = [0.0], [0.0], [0.0]
    sup_ft = 0.0
    k = 0
    for _, dt, times in step_plan(cfg.schedule, dt_base):
        prop = Propagator(grid, dt, co)
        for t_new in times:
            f = dist.forcing(grid.x, t_new)
            if f is not None:
                f = direct_transform(f, kf)
                sup_ft = max(sup_ft, float(np.max(np.abs(f[1:-1]), initial=0.0)))
            wt = prop.advance(wt, dist.left(t_new), dist.right(t_new), f)
            k += 1
            if k % stride == 0 or t_new == times[-1]:
                ts.append(float(t_new))
                l2s.append(l2_norm(wt, grid))
                lis.append(linf_norm(wt))
                sf.append(sup_ft)
                s0.append(dist.sups["d0"])
                s1.append(dist.sups["d1"])
                if keep_fields:
                    flds.append(wt.copy())
    return TargetRun(np.array(ts), np.array(l2s), np.array(lis),
                     np.array(flds) if keep_fields else None,
                     np.array(sf), np.array(s0), np.array(s1), sigma=cfg.sigma)
