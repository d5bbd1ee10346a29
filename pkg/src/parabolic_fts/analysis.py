"""Post-processing of traces: fixed-time and ISS metrics, L∞ bounds,
Stampacchia functionals and per-segment decay checks."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .controller import ControllerConfig, TargetRun, replay_plant
from .errors import DomainError
from .kernels import direct_transform
from .pde import DisturbanceSpec, Grid, Trace, l2_norm

__all__ = [
    "FtsReport",
    "IssReport",
    "LinfReport",
    "SegmentDecay",
    "stampacchia_g",
    "stampacchia_G",
    "lyapunov_functional",
    "check_linf_bound",
    "check_lyapunov_monotone",
    "check_segment_decay",
    "superposition_error",
    "fts_metric",
    "iss_metric",
]


def stampacchia_g(s):
    """ln(1 + s^2) for s > 0, zero otherwise."""
    s = np.asarray(s, dtype=float)
    out = np.where(s > 0, np.log1p(np.square(np.maximum(s, 0.0))), 0.0)
    return float(out) if out.ndim == 0 else out


def stampacchia_G(s):
    """Antiderivative of stampacchia_g vanishing at 0."""
    s = np.asarray(s, dtype=float)
    sp = np.maximum(s, 0.0)
    out = np.where(s > 0, sp * np.log1p(sp * sp) - 2 * sp + 2 * np.arctan(sp), 0.0)
    return float(out) if out.ndim == 0 else out


def lyapunov_functional(values, omega: float, grid: Grid) -> float:
    """Trapezoid quadrature of G(values - omega) over [0, 1]."""
    if omega < 0:
        raise DomainError(f"omega must be >= 0, got {omega}")
    return float(grid.quad_weights @ stampacchia_G(np.asarray(values, dtype=float) - omega))


@dataclass
class LinfReport:
    passed: bool
    worst_margin: float  # min over samples of bound - ||w̃||_inf
    max_linf: float
    max_bound: float
    tol: float


def check_linf_bound(run: TargetRun, sups: tuple[float, float, float] | None = None,
                     sigma: float | None = None, tol: float = 0.05) -> LinfReport:
    """Check ||w̃[t]||_inf <= sup|f̃|/sigma + sup|d0| + sup|d1| at every sample.

    Without explicit ``sups`` the running sups recorded in ``run`` are used,
    so the bound at time t only involves disturbance values on [0, t].  The
    bound is relaxed by the relative ``tol``.
    """
    sigma = run.sigma if sigma is None else sigma
    if sups is None:
        bound = run.sup_f / sigma + run.sup_d0 + run.sup_d1
    else:
        bound = np.full(run.linf.shape, sups[0] / sigma + sups[1] + sups[2])
    ok = run.linf <= bound * (1 + tol) + 1e-12
    return LinfReport(bool(np.all(ok)), float(np.min(bound - run.linf)),
                      float(np.max(run.linf)), float(np.max(bound)), tol)


def check_lyapunov_monotone(run: TargetRun, omega: float, grid: Grid,
                            tol: float = 1e-6) -> tuple[bool, np.ndarray]:
    """Both truncated functionals ∫G(±w̃ - omega) stay <= tol at every sample.

    Returns the pass flag and the per-sample max of the two functionals.
    """
    if run.fields is None:
        raise DomainError("target run was recorded without fields")
    vals = np.array([max(lyapunov_functional(f, omega, grid), lyapunov_functional(-f, omega, grid))
                     for f in run.fields])
    return bool(np.all(vals <= tol)), vals


@dataclass
class SegmentDecay:
    segment: int
    lam: float
    initial: float
    worst_ratio: float  # max_t ||ṽ[t]|| / (e^{-lam (t - t_n)} ||ṽ[t_n]||)

    def passed(self, slack: float = 0.01) -> bool:
        return self.worst_ratio <= 1 + slack


def check_segment_decay(trace: Trace, cfg: ControllerConfig) -> list[SegmentDecay]:
    """Transform the recorded v on each segment with k_n and compare with e^{-lam_n t}."""
    if "v" not in trace.fields:
        raise DomainError("trace was recorded without fields")
    out = []
    for n in range(cfg.schedule.n_segments):
        mask = trace.segment == n
        if not np.any(mask):
            continue
        kf = cfg.kernel_v(n)
        lam = float(cfg.schedule.lam[n])
        ts = trace.times[mask]
        norms = np.array([l2_norm(direct_transform(v, kf), cfg.grid) for v in trace.fields["v"][mask]])
        t_n = cfg.schedule.t[n]
        if norms[0] == 0:
            worst = 0.0 if np.all(norms == 0) else math.inf
        else:
            worst = float(np.max(norms / (np.exp(-lam * (ts - t_n)) * norms[0])))
        out.append(SegmentDecay(n, lam, float(norms[0]), worst))
    return out


def superposition_error(cfg: ControllerConfig, dist: DisturbanceSpec, u0,
                        trace: Trace) -> np.ndarray:
    """Relative L2 gap between the unsplit plant driven by the logged U and v + w.

    ``trace`` must come from a run with stride 1 and fields kept.
    """
    mono = replay_plant(cfg, dist, u0, trace)
    split = trace.u_fields()
    if mono.fields["u"].shape != split.shape:
        raise DomainError("trace must be recorded with stride=1 and keep_fields=True")
    diff = np.array([l2_norm(a - b, cfg.grid) for a, b in zip(mono.fields["u"], split)])
    scale = np.array([max(l2_norm(b, cfg.grid), 1e-300) for b in split])
    return diff / scale


@dataclass
class FtsReport:
    terminal_norm: float
    initial_norm: float
    decay_ratio: float
    epsilon: float

    def to_row(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        return (f"fixed-time decay: ||u(T0-eps)|| = {self.terminal_norm:.6e}, "
                f"||u0|| = {self.initial_norm:.6e}, ratio = {self.decay_ratio:.6e} "
                f"(eps = {self.epsilon:.4g})")


@dataclass
class IssReport:
    sup_norm_window: float
    disturbance_sups: tuple[float, float, float]
    fitted_gain: float
    window: tuple[float, float]

    def to_row(self) -> dict:
        f, d0, d1 = self.disturbance_sups
        return {"sup_norm_window": self.sup_norm_window, "sup_f": f, "sup_d0": d0,
                "sup_d1": d1, "fitted_gain": self.fitted_gain,
                "window_start": self.window[0], "window_end": self.window[1]}

    def to_text(self) -> str:
        f, d0, d1 = self.disturbance_sups
        return (f"ISS window [{self.window[0]:.4g}, {self.window[1]:.4g}): "
                f"sup ||u|| = {self.sup_norm_window:.6e}; sup|f| = {f:.4g}, "
                f"sup|d0| = {d0:.4g}, sup|d1| = {d1:.4g}; gain = {self.fitted_gain:.6e}")


def fts_metric(trace: Trace, epsilon: float | None = None, T0: float | None = None) -> FtsReport:
    """||u|| at T0 - epsilon (linear interpolation) relative to ||u0||."""
    T0 = float(trace.times[-1]) if T0 is None else T0
    epsilon = 0.01 * T0 if epsilon is None else epsilon
    t_eval = T0 - epsilon
    if not trace.times[0] <= t_eval <= trace.times[-1]:
        raise DomainError(f"T0 - eps = {t_eval} lies outside the trace")
    terminal = float(np.interp(t_eval, trace.times, trace.l2_u))
    initial = float(trace.l2_u[0])
    ratio = terminal / initial if initial > 0 else 0.0
    return FtsReport(terminal, initial, ratio, epsilon)


def iss_metric(trace: Trace, window: tuple[float, float] | None = None,
               sups: tuple[float, float, float] | None = None,
               T0: float | None = None) -> IssReport:
    """Sup of ||u|| over ``window`` (default: last quarter of [0, T0)) and its
    ratio to the summed disturbance sups."""
    T0 = float(trace.times[-1]) if T0 is None else T0
    window = (0.75 * T0, T0) if window is None else window
    mask = (trace.times >= window[0]) & (trace.times < window[1])
    if not np.any(mask):
        raise DomainError(f"no samples in window {window}")
    sup_u = float(np.max(trace.l2_u[mask]))
    if sups is None:
        last = np.flatnonzero(mask)[-1]
        sups = (float(trace.sup_f[last]), float(trace.sup_d0[last]), float(trace.sup_d1[last]))
    total = sum(sups)
    gain = sup_u / total if total > 0 else 0.0
    return IssReport(sup_u, tuple(sups), gain, tuple(window))
