"""Finite-difference propagator for u_t = (a u_x)_x + c u + f on [0, 1].

Dirichlet data are imposed strongly at both ends, the interior is advanced by
backward Euler with second-order central differences, and every linear solve
is a single banded (tridiagonal) LAPACK call.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .errors import ConfigError, NumericalError, ShapeError

__all__ = [
    "Grid",
    "Coefficients",
    "DisturbanceSpec",
    "Propagator",
    "Trace",
    "step",
    "l2_norm",
    "linf_norm",
    "uniform_step_times",
    "simulate_plant",
    "simulate_open_loop",
]


@dataclass(frozen=True)
class Grid:
    """Uniform mesh on [0, 1] with composite trapezoid weights."""

    n_points: int
    h: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False)
    quad_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.n_points)
        if n < 3:
            raise ConfigError(f"n_points must be >= 3, got {self.n_points}")
        h = 1.0 / (n - 1)
        x = np.arange(n) * h
        x[-1] = 1.0
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
        for arr in (x, w):
            arr.setflags(write=False)
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "quad_weights", w)

    def __eq__(self, other):
        return isinstance(other, Grid) and other.n_points == self.n_points

    def __hash__(self):
        return hash(("Grid", self.n_points))


@dataclass(frozen=True)
class Coefficients:
    """Constant diffusion ``a`` and reaction ``c``.

    ``Lambda`` is the ellipticity bound 1/Lambda <= a <= Lambda; it defaults
    to the tightest bound containing ``a``.
    """

    a: float = 1.0
    c: float = 0.0
    Lambda: float | None = None
    mode: str = "constant"

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise ConfigError(f"a must be positive and finite, got {self.a}")
        if not math.isfinite(self.c):
            raise ConfigError(f"c must be finite, got {self.c}")
        if self.mode != "constant":
            raise ConfigError(f"only mode='constant' is supported, got {self.mode!r}")
        bound = self.Lambda
        if bound is None:
            object.__setattr__(self, "Lambda", max(self.a, 1.0 / self.a))
        elif bound < 1 or not (1.0 / bound <= self.a * (1 + 1e-12) and self.a <= bound * (1 + 1e-12)):
            raise ConfigError(f"a={self.a} violates 1/Lambda <= a <= Lambda with Lambda={bound}")


ScalarFn = Callable[[float], float]
FieldFn = Callable[[np.ndarray, float], np.ndarray]


class DisturbanceSpec:
    """In-domain forcing ``f(x, t)`` and boundary disturbances ``d0(t)``, ``d1(t)``.

    ``None`` means identically zero. Every evaluation updates the running
    sup-norm trackers in ``sups``; call :meth:`fresh` to get an independent
    copy with cleared trackers before starting a new simulation.
    """

    def __init__(self, f: FieldFn | None = None, d0: ScalarFn | None = None,
                 d1: ScalarFn | None = None, label: str = ""):
        self.f = f
        self.d0 = d0
        self.d1 = d1
        self.label = label
        self.sups = {"f": 0.0, "d0": 0.0, "d1": 0.0}

    @classmethod
    def zero(cls) -> "DisturbanceSpec":
        return cls(label="zero")

    @classmethod
    def sinusoidal_d1(cls, amplitude: float, omega: float = 30.0) -> "DisturbanceSpec":
        """d1(t) = amplitude * sin(omega t), f = d0 = 0."""
        if amplitude == 0:
            return cls.zero()
        return cls(d1=lambda t: amplitude * math.sin(omega * t),
                   label=f"d1={amplitude}*sin({omega}t)")

    @property
    def is_zero(self) -> bool:
        return self.f is None and self.d0 is None and self.d1 is None

    def fresh(self) -> "DisturbanceSpec":
        return DisturbanceSpec(self.f, self.d0, self.d1, self.label)

    def scaled(self, alpha: float) -> "DisturbanceSpec":
        f, d0, d1 = self.f, self.d0, self.d1
        return DisturbanceSpec(
            None if f is None else (lambda x, t: alpha * np.asarray(f(x, t))),
            None if d0 is None else (lambda t: alpha * d0(t)),
            None if d1 is None else (lambda t: alpha * d1(t)),
            f"{alpha}*({self.label})",
        )

    def left(self, t: float) -> float:
        if self.d0 is None:
            return 0.0
        val = float(self.d0(t))
        self.sups["d0"] = max(self.sups["d0"], abs(val))
        return val

    def right(self, t: float) -> float:
        if self.d1 is None:
            return 0.0
        val = float(self.d1(t))
        self.sups["d1"] = max(self.sups["d1"], abs(val))
        return val

    def forcing(self, x: np.ndarray, t: float) -> np.ndarray | None:
        if self.f is None:
            return None
        vals = np.broadcast_to(np.asarray(self.f(x, t), dtype=float), x.shape)
        # only interior nodes enter the equation
        self.sups["f"] = max(self.sups["f"], float(np.max(np.abs(vals[1:-1]), initial=0.0)))
        return vals


def _check_shape(values: np.ndarray, grid: Grid) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[0] != grid.n_points:
        raise ShapeError(f"field has {values.shape[0]} nodes, grid has {grid.n_points}")
    return values


def l2_norm(values: np.ndarray, grid: Grid) -> float:
    """L2(0,1) norm by trapezoid quadrature."""
    values = _check_shape(values, grid)
    return math.sqrt(float(grid.quad_weights @ (values * values)))


def linf_norm(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.max(np.abs(values))) if values.size else 0.0


_BLOWUP = 1e100


class Propagator:
    """Backward-Euler step operator for fixed (grid, dt, coefficients).

    The banded matrix is assembled once; :meth:`advance` accepts one field of
    shape (N,) or a stack of shape (N, m) so several linear subsystems can be
    solved with one LAPACK call.
    """

    def __init__(self, grid: Grid, dt: float, co: Coefficients):
        if not dt > 0:
            raise ConfigError(f"dt must be positive, got {dt}")
        self.grid, self.dt, self.co = grid, float(dt), co
        n = grid.n_points - 2
        self.r = co.a * self.dt / grid.h**2
        ab = np.empty((3, n))
        ab[0, :] = -self.r
        ab[1, :] = 1.0 + 2.0 * self.r - self.dt * co.c
        ab[2, :] = -self.r
        ab[0, 0] = 0.0
        ab[2, -1] = 0.0
        self._ab = ab

    def advance(self, state, bc_left, bc_right, forcing=None):
        state = np.asarray(state, dtype=float)
        rhs = state[1:-1].copy()
        if forcing is not None:
            rhs += self.dt * np.asarray(forcing, dtype=float)[1:-1]
        rhs[0] += self.r * np.asarray(bc_left)
        rhs[-1] += self.r * np.asarray(bc_right)
        try:
            interior = solve_banded((1, 1), self._ab, rhs, check_finite=False)
        except (LinAlgError, ValueError) as exc:
            raise NumericalError(f"tridiagonal solve failed (dt={self.dt}, c={self.co.c}): {exc}") from exc
        out = np.empty_like(state)
        out[0] = bc_left
        out[-1] = bc_right
        out[1:-1] = interior
        peak = float(np.max(np.abs(out)))
        # past 1e100 the squared norms overflow; treat it as divergence
        if not peak <= _BLOWUP:
            raise NumericalError(f"solution blew up (max |u| = {peak:.3g}) after backward-Euler step")
        return out


def step(state, dt, co: Coefficients, bc_left: float, bc_right: float,
         forcing=None, grid: Grid | None = None) -> np.ndarray:
    """Advance ``state`` by one backward-Euler step of length ``dt``.

    Boundary values and forcing are taken at the new time level.
    """
    state = np.asarray(state, dtype=float)
    grid = grid or Grid(state.shape[0])
    _check_shape(state, grid)
    if forcing is not None:
        _check_shape(forcing, grid)
    return Propagator(grid, dt, co).advance(state, bc_left, bc_right, forcing)


@dataclass
class Trace:
    """Sampled time series of a simulation.

    All per-sample arrays share the length of ``times``. ``step_t`` and
    ``step_U`` log, for every time step, the new time level and the control
    value that was applied there; they are what a replay needs.
    """

    times: np.ndarray
    l2_u: np.ndarray
    linf_u: np.ndarray
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    d1: np.ndarray
    l2_v: np.ndarray
    l2_w: np.ndarray
    segment: np.ndarray
    sup_f: np.ndarray
    sup_d0: np.ndarray
    sup_d1: np.ndarray
    step_t: np.ndarray
    step_U: np.ndarray
    fields: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)
    grid: Grid | None = None

    COLUMNS = ("t", "l2_u", "linf_u", "U", "V", "W", "d1")
    SPLIT_COLUMNS = ("l2_v", "l2_w")

    def __len__(self):
        return len(self.times)

    def u_fields(self) -> np.ndarray:
        if "u" in self.fields:
            return self.fields["u"]
        return self.fields["v"] + self.fields["w"]

    def to_csv(self, path, split: bool = True) -> Path:
        path = Path(path)
        cols = self.COLUMNS + (self.SPLIT_COLUMNS if split else ())
        data = [self.times, self.l2_u, self.linf_u, self.U, self.V, self.W, self.d1]
        if split:
            data += [self.l2_v, self.l2_w]
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for row in zip(*data):
                writer.writerow([f"{float(v):.17g}" for v in row])
        return path

    def write_snapshots(self, directory) -> list[Path]:
        directory = Path(directory)
        paths = []
        for when, profile in sorted(self.snapshots.items()):
            p = directory / f"snapshot_t{when:.6g}.csv"
            with p.open("w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(("x", "u"))
                for xi, ui in zip(self.grid.x, profile):
                    writer.writerow((f"{xi:.17g}", f"{ui:.17g}"))
            paths.append(p)
        return paths


class _Recorder:
    """Accumulates samples; turned into a Trace at the end of a run."""

    def __init__(self, grid: Grid, keep_fields: bool, snapshot_times: Sequence[float] = ()):
        self.grid = grid
        self.keep_fields = keep_fields
        self.rows: list[tuple] = []
        self.v_fields: list[np.ndarray] = []
        self.w_fields: list[np.ndarray] = []
        self.pending_snaps = sorted(float(s) for s in snapshot_times)
        self.snapshots: dict[float, np.ndarray] = {}

    def snap(self, t: float, u: np.ndarray):
        while self.pending_snaps and t >= self.pending_snaps[0] - 1e-12:
            self.snapshots[self.pending_snaps.pop(0)] = u.copy()

    def add(self, t, v, w, V, W, d1, seg, sups):
        u = v + w
        self.rows.append((t, l2_norm(u, self.grid), linf_norm(u), V + W, V, W, d1,
                          l2_norm(v, self.grid), l2_norm(w, self.grid), seg,
                          sups["f"], sups["d0"], sups["d1"]))
        if self.keep_fields:
            self.v_fields.append(v.copy())
            self.w_fields.append(w.copy())

    def finish(self, step_t, step_U) -> Trace:
        cols = list(zip(*self.rows))
        arr = [np.asarray(c, dtype=float) for c in cols]
        fields = {}
        if self.keep_fields:
            fields = {"v": np.array(self.v_fields), "w": np.array(self.w_fields)}
        return Trace(times=arr[0], l2_u=arr[1], linf_u=arr[2], U=arr[3], V=arr[4], W=arr[5],
                     d1=arr[6], l2_v=arr[7], l2_w=arr[8], segment=arr[9].astype(int),
                     sup_f=arr[10], sup_d0=arr[11], sup_d1=arr[12],
                     step_t=np.asarray(step_t, dtype=float), step_U=np.asarray(step_U, dtype=float),
                     fields=fields, snapshots=self.snapshots, grid=self.grid)


def uniform_step_times(t_start: float, t_end: float, dt: float) -> np.ndarray:
    """New-level times of the steps covering (t_start, t_end] with spacing <= dt."""
    span = t_end - t_start
    m = max(1, math.ceil(span / dt - 1e-9))
    times = t_start + span * np.arange(1, m + 1) / m
    times[-1] = t_end
    return times


def simulate_plant(co: Coefficients, dist: DisturbanceSpec, u0, step_t,
                   right_input, grid: Grid | None = None, stride: int = 1,
                   keep_fields: bool = False, snapshot_times: Sequence[float] = (),
                   t_start: float = 0.0) -> Trace:
    """Advance the plant with u(1, t_k) = right_input[k-1] + d1(t_k).

    ``step_t[k]`` is the time reached by step k and ``right_input[k]`` the
    control value imposed at that new level (the input is not fed back).
    """
    u = np.array(u0, dtype=float)
    grid = grid or Grid(u.shape[0])
    _check_shape(u, grid)
    step_t = np.asarray(step_t, dtype=float)
    right_input = np.broadcast_to(np.asarray(right_input, dtype=float), step_t.shape)
    dist = dist.fresh()
    zero = np.zeros_like(u)
    rec = _Recorder(grid, keep_fields, snapshot_times)
    props: dict[float, Propagator] = {}
    t_prev = t_start
    rec.snap(t_prev, u)
    for k, t_new in enumerate(step_t):
        if k % stride == 0:
            rec.add(t_prev, u, zero, float(right_input[k]), 0.0,
                    dist.right(t_prev), 0, dist.sups)
        dt = float(t_new - t_prev)
        key = round(dt, 15)
        prop = props.get(key)
        if prop is None:
            prop = props[key] = Propagator(grid, dt, co)
        u = prop.advance(u, dist.left(t_new), right_input[k] + dist.right(t_new),
                         dist.forcing(grid.x, t_new))
        t_prev = float(t_new)
        rec.snap(t_prev, u)
    last_U = float(right_input[-1]) if len(right_input) else 0.0
    rec.add(t_prev, u, zero, last_U, 0.0, dist.right(t_prev), 0, dist.sups)
    trace = rec.finish(step_t, right_input)
    if keep_fields:
        trace.fields = {"u": trace.fields["v"]}
    return trace


def simulate_open_loop(co: Coefficients, dist: DisturbanceSpec, u0, t_end: float,
                       dt: float = 1e-4, boundary_mode: str = "zero", offset: float = 0.0,
                       grid: Grid | None = None, stride: int = 10,
                       keep_fields: bool = False, snapshot_times: Sequence[float] = ()) -> Trace:
    """Uncontrolled plant: u(0,t) = d0(t), u(1,t) = d1(t) + constant.

    ``boundary_mode`` selects the constant: ``"zero"`` uses ``offset`` (0 by
    default); ``"hold"`` keeps the right boundary at its initial value
    u0(1), which makes the data compatible with the initial profile.
    """
    u0 = np.asarray(u0, dtype=float)
    if boundary_mode == "zero":
        const = float(offset)
    elif boundary_mode == "hold":
        const = float(u0[-1])
    else:
        raise ConfigError(f"boundary_mode must be 'zero' or 'hold', got {boundary_mode!r}")
    times = uniform_step_times(0.0, t_end, dt)
    return simulate_plant(co, dist, u0, times, np.full(times.shape, const), grid=grid,
                          stride=stride, keep_fields=keep_fields, snapshot_times=snapshot_times)
