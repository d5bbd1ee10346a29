"""Segment times and gains for the switched disturbance-free controller.

Case I spaces the switching times by 1/(n+1)^p so the horizon is the Riemann
zeta value zeta(p); Case II places them at T0 - T0/(n+1) for a freely chosen
T0.  Both families are truncated after ``n_max`` and the last segment is
stretched to end exactly at T0.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DivergenceError, DomainError, HorizonError

__all__ = [
    "Schedule",
    "RapidConvergenceReport",
    "zeta",
    "partial_sums",
    "schedule_case1",
    "schedule_case2",
    "schedule_custom",
    "check_rapid_convergence",
    "segment_of",
]


def zeta(p: float, tol: float = 1e-12) -> float:
    """Riemann zeta(p) for real p > 1 with absolute error <= tol.

    Direct sum of the first N-1 terms, then the tail from N on by
    Euler-Maclaurin: the integral N^(1-p)/(p-1), the half-term N^-p/2 and
    the first derivative correction p N^(-p-1)/12.  For this completely
    monotone summand the remainder is below p(p+1)(p+2) N^(-p-3)/720, and N is
    chosen to push that below tol.
    """
    if not math.isfinite(p) or p <= 1:
        raise DivergenceError(f"zeta(p) diverges for p <= 1, got p={p}")
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    c = p * (p + 1) * (p + 2) / 720.0
    n = max(10, math.ceil((c / tol) ** (1.0 / (p + 3))))
    i = np.arange(1, n, dtype=float)
    head = math.fsum(i[::-1] ** -p)
    tail = n ** (1 - p) / (p - 1) + 0.5 * n**-p + p * n ** (-p - 1) / 12.0
    return head + tail


def partial_sums(t, lam) -> np.ndarray:
    """s_0 = 0, s_n = sum_{j<n} lam_j (t_{j+1} - t_j), for n = 0..len(t)-1."""
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    s = np.zeros(len(t))
    acc = 0.0
    for j in range(len(t) - 1):
        acc += lam[j] * (t[j + 1] - t[j])
        s[j + 1] = acc
    return s


@dataclass(frozen=True, eq=False)
class Schedule:
    """Truncated switching schedule.

    ``t`` has n_max + 2 entries (t[n_max + 1] == T0); segment n is
    [t[n], t[n+1]) with gain ``lam[n]``; ``s`` holds the partial sums
    s_0..s_{n_max+1} of the truncated schedule.
    """

    case: str
    T0: float
    lambda0: float
    t: np.ndarray
    lam: np.ndarray
    s: np.ndarray
    n_max: int
    final_segment_extended: bool
    p: float | None = None
    _time_rule: Callable[[int], float] | None = field(default=None, repr=False, compare=False)
    _gain_rule: Callable[[int], float] | None = field(default=None, repr=False, compare=False)

    @property
    def n_segments(self) -> int:
        return self.n_max + 1

    def segment(self, n: int) -> tuple[float, float]:
        return float(self.t[n]), float(self.t[n + 1])

    def untruncated(self, n_terms: int) -> tuple[np.ndarray, np.ndarray]:
        """First ``n_terms`` + 1 ideal switching times and gains (no extension)."""
        if self._time_rule is None:
            return self.t, self.lam
        t = np.array([self._time_rule(n) for n in range(n_terms + 1)])
        lam = np.array([self._gain_rule(n) for n in range(n_terms + 1)])
        return t, lam


def _finish(case, T0, lambda0, t_ideal, lam, n_max, p, time_rule, gain_rule) -> Schedule:
    t = np.append(np.asarray(t_ideal[: n_max + 1], dtype=float), T0)
    if not np.all(np.diff(t) > 0):
        raise DomainError(f"switching times are not strictly increasing: {t}")
    lam = np.asarray(lam[: n_max + 1], dtype=float)
    for arr in (t, lam):
        arr.setflags(write=False)
    s = partial_sums(t, lam)
    s.setflags(write=False)
    return Schedule(case, float(T0), float(lambda0), t, lam, s, int(n_max), True, p,
                    time_rule, gain_rule)


def _check_common(lambda0, n_max):
    if not (math.isfinite(lambda0) and lambda0 > 0):
        raise DomainError(f"lambda0 must be positive, got {lambda0}")
    if int(n_max) != n_max or n_max < 1:
        raise DomainError(f"n_max must be an integer >= 1, got {n_max}")


def schedule_case1(p: float, lambda0: float, n_max: int) -> Schedule:
    """Zeta schedule: t_{n+1} - t_n = 1/(n+1)^p, lam_n = n^(2(p+1)) + lambda0."""
    if not math.isfinite(p) or p <= 1:
        raise DivergenceError(f"Case I needs p > 1, got p={p}")
    _check_common(lambda0, n_max)
    T0 = zeta(p, 1e-10)

    gaps = 1.0 / np.arange(1, n_max + 1, dtype=float) ** p
    t = np.concatenate(([0.0], np.cumsum(gaps)))
    lam = np.arange(n_max + 1, dtype=float) ** (2 * (p + 1)) + lambda0

    def time_rule(n):
        return math.fsum(1.0 / (j + 1) ** p for j in range(n))

    def gain_rule(n):
        return n ** (2 * (p + 1)) + lambda0

    return _finish("I", T0, lambda0, t, lam, n_max, p, time_rule, gain_rule)


def schedule_case2(T0: float, lambda0: float, n_max: int) -> Schedule:
    """Prescribed-time schedule: t_n = T0 - T0/(n+1), lam_n = n^6 + lambda0."""
    if not (math.isfinite(T0) and T0 > 0):
        raise DomainError(f"T0 must be positive, got {T0}")
    _check_common(lambda0, n_max)
    n = np.arange(n_max + 1, dtype=float)
    t = T0 - T0 / (n + 1)
    lam = n**6 + lambda0

    def time_rule(k):
        return T0 - T0 / (k + 1)

    def gain_rule(k):
        return k**6 + lambda0

    return _finish("II", T0, lambda0, t, lam, n_max, None, time_rule, gain_rule)


def schedule_custom(t, lam, lambda0: float | None = None) -> Schedule:
    """Schedule from explicit switching times (t[-1] is the horizon) and gains."""
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if len(t) < 2 or len(lam) != len(t) - 1:
        raise DomainError("need len(lam) == len(t) - 1 >= 1")
    if t[0] != 0 or not np.all(np.diff(t) > 0):
        raise DomainError("t must start at 0 and be strictly increasing")
    lambda0 = float(lam.min()) if lambda0 is None else lambda0
    return Schedule("custom", float(t[-1]), lambda0, t, lam, partial_sums(t, lam),
                    len(lam) - 1, False, None)


@dataclass(frozen=True, eq=False)
class RapidConvergenceReport:
    n: np.ndarray
    r: np.ndarray  # (t_{n+1} - t_n) lam_n / sqrt(lam_{n+1})
    q: np.ndarray  # s_n / (n + sqrt(lam_{n+1}))
    gamma0: float
    first_index: int | None  # from here on r_n >= gamma0 over the computed range
    q_increasing_from: int | None  # q is strictly increasing from this index on

    @property
    def satisfied(self) -> bool:
        return self.first_index is not None


def check_rapid_convergence(sched: Schedule, gamma0: float = 1.0,
                            n_terms: int | None = None) -> RapidConvergenceReport:
    """Diagnose the gain-growth conditions behind fixed-time convergence.

    For the two built-in families the ideal (untruncated) sequences are used
    up to ``n_terms`` (default max(n_max, 40)); custom schedules use the
    stored arrays.
    """
    if not gamma0 > 0:
        raise DomainError(f"gamma0 must be positive, got {gamma0}")
    if sched._time_rule is not None:
        n_terms = max(sched.n_max, 40) if n_terms is None else n_terms
        t, lam = sched.untruncated(n_terms + 1)
    else:
        t, lam = sched.t, np.append(sched.lam, sched.lam[-1])
    s = partial_sums(t, lam)
    m = len(t) - 1
    n = np.arange(m)
    r = np.diff(t) * lam[:m] / np.sqrt(lam[1 : m + 1])
    q = s[:m] / (n + np.sqrt(lam[1 : m + 1]))

    ok = r >= gamma0
    first = None
    if ok[-1]:
        bad = np.flatnonzero(~ok)
        first = int(bad[-1] + 1) if bad.size else 0
    inc = np.diff(q) > 0
    q_from = None
    if inc.size and inc[-1]:
        bad = np.flatnonzero(~inc)
        q_from = int(bad[-1] + 1) if bad.size else 0
    return RapidConvergenceReport(n, r, q, gamma0, first, q_from)


def segment_of(sched: Schedule, time: float) -> int:
    """Index n with t[n] <= time < t[n+1]; gains switch at t_n."""
    if time >= sched.T0:
        raise HorizonError(f"time {time} is at or beyond the horizon T0={sched.T0}")
    if time < 0:
        raise DomainError(f"time must be >= 0, got {time}")
    return bisect.bisect_right(sched.t, time) - 1
