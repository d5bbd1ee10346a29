"""Backstepping kernels for constant-coefficient reaction-diffusion plants.

For u_t = a u_xx + c u the direct kernel k (mapping to the damped target
ṽ_t = a ṽ_xx - λ ṽ) and its inverse l have closed forms in the first-order
Bessel functions I1 and J1.  Everything here works on the lower triangle
0 <= y <= x <= 1 of a uniform grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from .errors import ConfigError, DomainError, ShapeError, UnsupportedRegimeError
from .pde import Grid

__all__ = [
    "KernelParams",
    "KernelField",
    "GainRow",
    "bessel_i1",
    "bessel_j1",
    "kernel_k_const",
    "kernel_l_const",
    "volterra_weights",
    "kernel_field",
    "gain_row",
    "direct_transform",
    "inverse_transform",
    "kernel_residual",
    "growth_diagnostics",
]

_REL_TOL = 1e-15
_ABS_FLOOR = 1e-300
_SMALL_Z = 1e-6
_MAX_TERMS = 10_000
# above this the alternating J1 series loses more than ~1e-13 to cancellation
_J1_SERIES_MAX = 12.0


def _ratio_series(z, sign: float) -> np.ndarray:
    """Sum of (1/2) * sum_m sign^m (z/2)^(2m) / (m! (m+1)!), i.e. B1(z)/z."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("Bessel argument must be finite")
    if np.any(z < 0):
        raise DomainError("Bessel argument must be >= 0")
    q = 0.25 * z * z
    term = np.full(z.shape, 0.5)
    total = term.copy()
    active = q > 0
    m = 0
    while np.any(active) and m < _MAX_TERMS:
        m += 1
        term = np.where(active, term * (sign * q) / (m * (m + 1)), 0.0)
        small = np.abs(term) < np.maximum(_REL_TOL * np.abs(total), _ABS_FLOOR)
        active &= ~small
        total = np.where(active, total + term, total)
    return np.where(z < _SMALL_Z, 0.5, total)


def _ratio(z, sign: float) -> np.ndarray:
    """B1(z)/z: series for I1 everywhere, series for J1 only up to _J1_SERIES_MAX."""
    out = _ratio_series(z, sign)
    if sign < 0:
        z = np.asarray(z, dtype=float)
        big = z > _J1_SERIES_MAX
        if np.any(big):
            out = np.where(big, special.j1(z) / np.where(big, z, 1.0), out)
    return out


def _scalar_or_array(z_in, values):
    return float(values) if np.ndim(z_in) == 0 else values


def bessel_i1(z):
    """Modified Bessel function I1 from its power series."""
    return _scalar_or_array(z, np.asarray(z, dtype=float) * _ratio_series(z, 1.0))


def bessel_j1(z):
    """Bessel function J1 from its alternating power series.

    The series cancels badly for large z (its terms peak near e^z while J1
    stays O(1)), so beyond z = 12 scipy's asymptotic implementation is used.
    """
    return _scalar_or_array(z, np.asarray(z, dtype=float) * _ratio(z, -1.0))


@dataclass(frozen=True)
class KernelParams:
    lam: float
    a: float = 1.0
    c: float = 0.0
    lambda0: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"lambda must be positive, got {self.lam}")
        if self.lambda0 is not None and not (0 < self.lambda0 <= self.lam):
            raise DomainError(f"lambda={self.lam} must satisfy lambda >= lambda0={self.lambda0} > 0")
        if not (math.isfinite(self.a) and self.a > 0):
            raise DomainError(f"a must be positive, got {self.a}")
        if not math.isfinite(self.c):
            raise DomainError(f"c must be finite, got {self.c}")

    @property
    def mu(self) -> float:
        """(lambda + c) / a, the kernel's growth parameter."""
        return (self.lam + self.c) / self.a


def _closed_form(x, y, p: KernelParams, sign: float):
    if p.lam + p.c <= 0:
        raise UnsupportedRegimeError(
            f"closed-form kernels need lambda + c > 0 (lambda={p.lam}, c={p.c})")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(y > x + 1e-14) or np.any(x > 1 + 1e-14):
        raise DomainError("kernels are defined on 0 <= y <= x <= 1")
    mu = p.mu
    z = np.sqrt(np.maximum(mu * (x * x - y * y), 0.0))
    vals = -mu * y * _ratio(z, sign)
    return float(vals) if vals.ndim == 0 else vals


def kernel_k_const(x, y, p: KernelParams):
    """Direct kernel k(x, y) = -mu * y * I1(z)/z, z = sqrt(mu (x^2 - y^2))."""
    return _closed_form(x, y, p, 1.0)


def kernel_l_const(x, y, p: KernelParams):
    """Inverse kernel l(x, y) = -mu * y * J1(z)/z."""
    return _closed_form(x, y, p, -1.0)


def _row_weights(m: int) -> np.ndarray:
    # Quadrature weights (in units of h) over m equispaced nodes.
    if m == 1:
        return np.zeros(1)
    if m == 2:
        return np.array([0.5, 0.5])
    if m == 3:
        return np.array([1.0, 4.0, 1.0]) / 3.0
    if m == 4:
        return np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
    if m == 5:
        return np.array([1.0, 4.0, 2.0, 4.0, 1.0]) / 3.0
    w = np.ones(m)
    end = np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0])
    w[:3] = end
    w[-3:] = end[::-1]
    return w


def volterra_weights(grid: Grid) -> np.ndarray:
    """Lower-triangular matrix W with sum_j W[i, j] g(y_j) ~ int_0^{x_i} g.

    Rows use the trapezoid rule with Gregory end corrections (exact for
    cubics, O(h^4)); rows too short for the corrections fall back to
    Newton-Cotes rules.
    """
    n = grid.n_points
    W = np.zeros((n, n))
    for i in range(n):
        W[i, : i + 1] = _row_weights(i + 1) * grid.h
    return W


@dataclass(frozen=True, eq=False)
class KernelField:
    """Sampled k and l on the lower triangle of ``grid`` (zero above it)."""

    grid: Grid
    values_k: np.ndarray = field(repr=False)
    values_l: np.ndarray = field(repr=False)
    params: KernelParams | None = None
    _quad_k: np.ndarray = field(init=False, repr=False, compare=False)
    _quad_l: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.grid.n_points
        for vals in (self.values_k, self.values_l):
            if vals.shape != (n, n):
                raise ShapeError(f"kernel values must be {n}x{n}, got {vals.shape}")
        W = volterra_weights(self.grid)
        object.__setattr__(self, "_quad_k", self.values_k * W)
        object.__setattr__(self, "_quad_l", self.values_l * W)

    @classmethod
    def zeros(cls, grid: Grid, params: KernelParams | None = None) -> "KernelField":
        z = np.zeros((grid.n_points, grid.n_points))
        return cls(grid, z, z.copy(), params)


def kernel_field(p: KernelParams, grid: Grid) -> KernelField:
    x = grid.x
    X, Y = np.meshgrid(x, x, indexing="ij")
    lower = np.tril(np.ones_like(X, dtype=bool))
    Yc = np.where(lower, Y, 0.0)
    k = np.where(lower, kernel_k_const(X, Yc, p), 0.0)
    l = np.where(lower, kernel_l_const(X, Yc, p), 0.0)
    return KernelField(grid, k, l, p)


@dataclass(frozen=True, eq=False)
class GainRow:
    """Boundary gain k(1, y_j) with its quadrature weights."""

    lam: float
    samples: np.ndarray = field(repr=False)
    quad_weights: np.ndarray = field(repr=False)
    grid: Grid | None = None
    coeffs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.samples.shape != self.quad_weights.shape:
            raise ShapeError("samples and weights differ in length")
        object.__setattr__(self, "coeffs", self.samples * self.quad_weights)

    def apply(self, values) -> float:
        """Quadrature of k(1, y) * values(y) over [0, 1]."""
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.samples.shape[0]:
            raise ShapeError(f"field has {values.shape[0]} nodes, gain row has {self.samples.shape[0]}")
        return float(self.coeffs @ values)

    def to_csv(self, path) -> Path:
        path = Path(path)
        y = self.grid.x if self.grid is not None else np.linspace(0, 1, len(self.samples))
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("y", "k1y"))
            for yi, ki in zip(y, self.samples):
                writer.writerow((f"{yi:.17g}", f"{ki:.17g}"))
        return path


def gain_row(p: KernelParams, grid: Grid) -> GainRow:
    samples = np.asarray(kernel_k_const(np.ones(grid.n_points), grid.x, p), dtype=float)
    samples[0] = 0.0
    weights = _row_weights(grid.n_points) * grid.h
    return GainRow(p.lam, samples, weights, grid)


def _field_for(values, kf: KernelField) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[0] != kf.grid.n_points:
        raise ShapeError(f"field has {values.shape[0]} nodes, kernel grid has {kf.grid.n_points}")
    return values


def direct_transform(h, kf: KernelField) -> np.ndarray:
    """h̃(x) = h(x) - int_0^x k(x, y) h(y) dy."""
    h = _field_for(h, kf)
    return h - kf._quad_k @ h


def inverse_transform(h_tilde, kf: KernelField) -> np.ndarray:
    """h(x) = h̃(x) + int_0^x l(x, y) h̃(y) dy."""
    h_tilde = _field_for(h_tilde, kf)
    return h_tilde + kf._quad_l @ h_tilde


def kernel_residual(kf: KernelField, which: str = "k") -> tuple[float, float, float]:
    """Finite-difference residuals of the kernel equations.

    Returns (interior, diagonal, boundary): the max over interior triangle
    nodes of |a K_xx - a K_yy -+ (lambda+c) K| (minus sign for k, plus for
    l), the max of |2a dK(x,x)/dx + (lambda+c)| from one-sided second-order
    differences of K_x and K_y on the diagonal, and max |K(x, 0)|.
    """
    n = kf.grid.n_points
    if n < 5:
        raise ConfigError(f"kernel_residual needs at least 5 grid points, got {n}")
    if which not in ("k", "l"):
        raise ValueError("which must be 'k' or 'l'")
    K = kf.values_k if which == "k" else kf.values_l
    p = kf.params
    a = p.a if p else 1.0
    lc = (p.lam + p.c) if p else 0.0
    sign = 1.0 if which == "k" else -1.0
    h = kf.grid.h

    c = K[1:-1, 1:-1]
    kxx = (K[2:, 1:-1] - 2 * c + K[:-2, 1:-1]) / h**2
    kyy = (K[1:-1, 2:] - 2 * c + K[1:-1, :-2]) / h**2
    res = np.abs(a * kxx - a * kyy - sign * lc * c)
    i, j = np.meshgrid(np.arange(1, n - 1), np.arange(1, n - 1), indexing="ij")
    mask = j <= i - 1
    interior = float(res[mask].max(initial=0.0))

    d = np.arange(2, n - 2)
    kx = (-3 * K[d, d] + 4 * K[d + 1, d] - K[d + 2, d]) / (2 * h)
    ky = (3 * K[d, d] - 4 * K[d, d - 1] + K[d, d - 2]) / (2 * h)
    diagonal = float(np.max(np.abs(2 * a * (kx + ky) + lc)))

    boundary = float(np.max(np.abs(K[:, 0])))
    return interior, diagonal, boundary


def growth_diagnostics(lams, a: float = 1.0, c: float = 0.0, n_points: int = 401) -> dict:
    """Growth of the boundary kernels with lambda.

    Returns arrays ``log_k_over_sqrt`` = log(max_y |k(1,y)|)/sqrt(lambda) and
    ``l_over_sq`` = max_y |l(1,y)|/lambda^2 for each lambda.
    """
    grid = Grid(n_points)
    lams = np.asarray(lams, dtype=float)
    ones = np.ones(n_points)
    logk, lsq = [], []
    for lam in lams:
        p = KernelParams(lam, a, c)
        kmax = np.max(np.abs(kernel_k_const(ones, grid.x, p)))
        lmax = np.max(np.abs(kernel_l_const(ones, grid.x, p)))
        logk.append(math.log(kmax) / math.sqrt(lam))
        lsq.append(lmax / lam**2)
    return {"lambda": lams, "log_k_over_sqrt": np.array(logk), "l_over_sq": np.array(lsq)}
