"""Surface catalog, unit normal fields, and closed-form drift quantities.

Points and directions are plain numpy arrays of shape (3,) or (N, 3); every
operation broadcasts over leading axes so million-sample property sweeps stay
vectorized.  The drift trio for a projection martingale with kernel direction
n at a point p is

    alpha = 1 + n3^2          (drift of r^2, always in [1, 2])
    beta  = drift of log r    (trace of the projected Hessian)
    gamma = 1 - n3^2          (drift of x3^2)

with |beta| <= gamma / (2 r^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError

__all__ = [
    "radial",
    "projection",
    "drift_r2",
    "drift_x3_sq",
    "hessian_log_r",
    "hessian_r2",
    "hessian_x3_sq",
    "drift_log_r",
    "beta_gamma_inequality_gap",
    "catenoid_normal",
    "catenoid_retract",
    "catenoid_area",
    "helicoid_normal",
    "helicoid_retract",
    "rotate_z",
    "FixedPlane",
    "HorizontalPlane",
    "VerticalPlane",
    "Catenoid",
    "Helicoid",
    "CustomStrategy",
]

UNIT_TOL = 1e-12


def radial(p: np.ndarray) -> np.ndarray:
    """Cylindrical radius sqrt(x1^2 + x2^2)."""
    p = np.asarray(p, dtype=float)
    return np.sqrt(p[..., 0] ** 2 + p[..., 1] ** 2)


def _require_unit(n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    nsq = np.sum(n * n, axis=-1)
    if np.any(np.abs(nsq - 1.0) > 1e-10):
        raise DomainError("kernel direction must be a unit vector")
    return n


def _require_off_axis(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(radial(p) == 0.0):
        raise DomainError("operation is singular on the x3-axis (r = 0)")
    return p


def projection(n: np.ndarray) -> np.ndarray:
    """Projection I - n n^T onto the plane orthogonal to n.

    Idempotent, symmetric, rank 2, and P n = 0.  Batched input (N, 3)
    yields (N, 3, 3).
    """
    n = _require_unit(n)
    eye = np.eye(3)
    return eye - n[..., :, None] * n[..., None, :]


def drift_r2(n: np.ndarray) -> np.ndarray | float:
    """Drift of r^2: alpha = 1 + n3^2, the half-trace of P Hess(r^2) P."""
    n = _require_unit(n)
    out = 1.0 + n[..., 2] ** 2
    return float(out) if out.ndim == 0 else out


def drift_x3_sq(n: np.ndarray) -> np.ndarray | float:
    """Drift of x3^2: gamma = 1 - n3^2 = n1^2 + n2^2."""
    n = _require_unit(n)
    out = 1.0 - n[..., 2] ** 2
    return float(out) if out.ndim == 0 else out


def hessian_log_r(p: np.ndarray) -> np.ndarray:
    """Hessian of log r away from the axis; the planar block is trace-free."""
    p = _require_off_axis(p)
    x1, x2 = p[..., 0], p[..., 1]
    r2 = x1 * x1 + x2 * x2
    r4 = r2 * r2
    h = np.zeros(p.shape[:-1] + (3, 3))
    h[..., 0, 0] = 1.0 / r2 - 2.0 * x1 * x1 / r4
    h[..., 1, 1] = 1.0 / r2 - 2.0 * x2 * x2 / r4
    h[..., 0, 1] = h[..., 1, 0] = -2.0 * x1 * x2 / r4
    return h


def hessian_r2(p: np.ndarray | None = None) -> np.ndarray:
    """Hessian of r^2 (constant diag(2, 2, 0))."""
    return np.diag([2.0, 2.0, 0.0])


def hessian_x3_sq(p: np.ndarray | None = None) -> np.ndarray:
    """Hessian of x3^2 (constant diag(0, 0, 2))."""
    return np.diag([0.0, 0.0, 2.0])


def drift_log_r(p: np.ndarray, n: np.ndarray) -> np.ndarray | float:
    """Drift beta of log r for kernel direction n at p.

    beta = 2 x1 x2 n1 n2 / r^4
           + (1/(2 r^2)) [ (1 - 2 x1^2/r^2)(1 - n1^2)
                           + (1 - 2 x2^2/r^2)(1 - n2^2) ],
    which reduces to (n1^2 - n2^2) / (2 r^2) when the point sits at
    (r, 0, x3).  Equals the half-trace of P Hess(log r) P.
    """
    p = _require_off_axis(p)
    n = _require_unit(n)
    x1, x2 = p[..., 0], p[..., 1]
    n1, n2 = n[..., 0], n[..., 1]
    r2 = x1 * x1 + x2 * x2
    out = 2.0 * x1 * x2 * n1 * n2 / (r2 * r2) + (
        (1.0 - 2.0 * x1 * x1 / r2) * (1.0 - n1 * n1)
        + (1.0 - 2.0 * x2 * x2 / r2) * (1.0 - n2 * n2)
    ) / (2.0 * r2)
    return float(out) if out.ndim == 0 else out


def beta_gamma_inequality_gap(p: np.ndarray, n: np.ndarray) -> np.ndarray | float:
    """gamma/(2 r^2) - |beta|, non-negative up to round-off for all inputs."""
    p = _require_off_axis(p)
    n = _require_unit(n)
    r2 = p[..., 0] ** 2 + p[..., 1] ** 2
    gamma = 1.0 - n[..., 2] ** 2
    out = gamma / (2.0 * r2) - np.abs(drift_log_r(p, n))
    return float(out) if np.ndim(out) == 0 else out


def rotate_z(v: np.ndarray, angle: float) -> np.ndarray:
    """Rotate vectors/points about the x3-axis."""
    c, s = math.cos(angle), math.sin(angle)
    v = np.asarray(v, dtype=float)
    out = v.copy()
    out[..., 0] = c * v[..., 0] - s * v[..., 1]
    out[..., 1] = s * v[..., 0] + c * v[..., 1]
    return out


# ---------------------------------------------------------------------------
# catenoid r = a cosh(x3 / a)


def catenoid_surface_residual(p: np.ndarray, a: float) -> np.ndarray | float:
    """Signed distance proxy r - a cosh(x3/a); zero on the surface."""
    p = np.asarray(p, dtype=float)
    return radial(p) - a * np.cosh(p[..., 2] / a)


def catenoid_normal(p: np.ndarray, a: float, tol: float | None = None) -> np.ndarray:
    """Unit normal of the catenoid at an on-surface point.

    n = (x1/r, x2/r, -sinh(x3/a)) / cosh(x3/a); on the surface
    n3^2 = (r^2 - a^2)/r^2.  Points farther than ``tol`` (default 1e-6 a)
    from the surface are rejected.
    """
    if a <= 0:
        raise DomainError("catenoid scale must be positive")
    p = _require_off_axis(p)
    tol = 1e-6 * a if tol is None else tol
    if np.any(np.abs(catenoid_surface_residual(p, a)) > tol):
        raise DomainError("point too far from the catenoid for a surface normal")
    r = radial(p)
    s = p[..., 2] / a
    ch = np.cosh(s)
    n = np.empty_like(np.asarray(p, dtype=float))
    n[..., 0] = p[..., 0] / (r * ch)
    n[..., 1] = p[..., 1] / (r * ch)
    n[..., 2] = -np.sinh(s) / ch
    return n


def catenoid_retract(x1: float, x2: float, x3: float, a: float) -> tuple:
    """Closest-point projection onto the catenoid (Newton in the axial param).

    Keeps the azimuth of (x1, x2) and solves for the profile parameter s
    minimizing (r - a cosh s)^2 + (x3 - a s)^2.  Written in scalar arithmetic
    so the compiled kernel can reproduce it bit-for-bit.
    """
    r = math.sqrt(x1 * x1 + x2 * x2)
    s = x3 / a
    for _ in range(12):
        ch = math.cosh(s)
        sh = math.sinh(s)
        g = (r - a * ch) * sh + (x3 - a * s)
        dg = (r - a * ch) * ch - a * sh * sh - a
        if dg == 0.0:
            break
        step = g / dg
        s = s - step
        if abs(step) <= 1e-15 * (1.0 + abs(s)):
            break
    ch = math.cosh(s)
    scale = a * ch / r
    return (x1 * scale, x2 * scale, a * s)


def catenoid_area(rho: float, a: float) -> float:
    """Area of one catenoid end out to cylinder radius rho.

    pi a^2 (v + sinh v cosh v) with v = arccosh(rho / a); the surface of
    revolution integral from the waist.
    """
    if a <= 0:
        raise DomainError("catenoid scale must be positive")
    if rho < a:
        raise DomainError("rho must be at least the waist radius")
    v = math.acosh(rho / a)
    return math.pi * a * a * (v + math.sinh(v) * math.cosh(v))


# ---------------------------------------------------------------------------
# helicoid (u cos v, u sin v, pitch * v)


def helicoid_surface_residual(p: np.ndarray, pitch: float) -> np.ndarray | float:
    """Transverse coordinate -x1 sin(x3/pitch) + x2 cos(x3/pitch)."""
    p = np.asarray(p, dtype=float)
    v = p[..., 2] / pitch
    return -p[..., 0] * np.sin(v) + p[..., 1] * np.cos(v)


def helicoid_normal(p: np.ndarray, pitch: float, tol: float = 1e-6) -> np.ndarray:
    """Unit normal of the helicoid at an on-surface point."""
    if pitch <= 0:
        raise DomainError("pitch must be positive")
    p = np.asarray(p, dtype=float)
    if np.any(np.abs(helicoid_surface_residual(p, pitch)) > tol):
        raise DomainError("point too far from the helicoid for a surface normal")
    v = p[..., 2] / pitch
    sv, cv = np.sin(v), np.cos(v)
    u = p[..., 0] * cv + p[..., 1] * sv
    denom = np.sqrt(pitch * pitch + u * u)
    n = np.empty_like(p)
    n[..., 0] = pitch * sv / denom
    n[..., 1] = -pitch * cv / denom
    n[..., 2] = u / denom
    return n


def helicoid_retract(x1: float, x2: float, x3: float, pitch: float) -> tuple:
    """Closest-point projection onto the helicoid (Newton in the screw angle)."""
    v = x3 / pitch
    for _ in range(12):
        sv = math.sin(v)
        cv = math.cos(v)
        u = x1 * cv + x2 * sv
        w = -x1 * sv + x2 * cv
        g = -w * u + pitch * (pitch * v - x3)
        dg = u * u - w * w + pitch * pitch
        if dg == 0.0:
            break
        step = g / dg
        v = v - step
        if abs(step) <= 1e-15 * (1.0 + abs(v)):
            break
    sv = math.sin(v)
    cv = math.cos(v)
    u = x1 * cv + x2 * sv
    return (u * cv, u * sv, pitch * v)


# ---------------------------------------------------------------------------
# normal strategies


def _grid_check(strategy, points: np.ndarray) -> None:
    """Construction-time check: the normal rule matches the tangent cross
    product (up to sign) on a sample grid of on-surface points."""
    for p in points:
        n = strategy.normal(p)
        t1, t2 = strategy._tangents(p)
        cross = np.cross(t1, t2)
        cross = cross / np.linalg.norm(cross)
        if min(np.linalg.norm(cross - n), np.linalg.norm(cross + n)) > 1e-9:
            raise DomainError("normal rule disagrees with the parametrization")


@dataclass(frozen=True)
class FixedPlane:
    """Projection onto a fixed plane through ``base`` with unit ``nvec``."""

    nvec: tuple[float, float, float]
    base: tuple[float, float, float] = (0.0, 0.0, 0.0)
    kernel_kind: int = field(default=0, init=False)
    barrier_coord: str = field(default="log_r", init=False)

    def __post_init__(self):
        _require_unit(np.asarray(self.nvec, dtype=float))

    @property
    def kernel_params(self) -> tuple:
        return tuple(self.nvec) + tuple(self.base)

    def normal(self, p: np.ndarray) -> np.ndarray:
        return np.asarray(self.nvec, dtype=float)

    def retract(self, p: np.ndarray) -> np.ndarray:
        n = np.asarray(self.nvec, dtype=float)
        b = np.asarray(self.base, dtype=float)
        return p - np.dot(p - b, n) * n

    def surface_residual(self, p: np.ndarray) -> float:
        n = np.asarray(self.nvec, dtype=float)
        return float(np.dot(np.asarray(p, dtype=float) - self.base, n))


def HorizontalPlane(height: float = 0.0) -> FixedPlane:
    return FixedPlane(nvec=(0.0, 0.0, 1.0), base=(0.0, 0.0, height))


def VerticalPlane() -> FixedPlane:
    """The (x1, x3)-plane; its Brownian motion has beta < 0 everywhere."""
    return FixedPlane(nvec=(0.0, 1.0, 0.0))


@dataclass(frozen=True)
class Catenoid:
    """Tangent-plane strategy for the catenoid r = a cosh(x3/a)."""

    a: float = 1.0
    kernel_kind: int = field(default=1, init=False)
    barrier_coord: str = field(default="axial", init=False)

    def __post_init__(self):
        if self.a <= 0:
            raise DomainError("catenoid scale must be positive")
        ss = np.linspace(-2.0, 2.0, 5)
        phis = np.linspace(0.0, 2.0 * math.pi, 7)
        grid = np.array(
            [
                (
                    self.a * math.cosh(s) * math.cos(phi),
                    self.a * math.cosh(s) * math.sin(phi),
                    self.a * s,
                )
                for s in ss
                for phi in phis
            ]
        )
        _grid_check(self, grid)

    @property
    def kernel_params(self) -> tuple:
        return (self.a,)

    def normal(self, p: np.ndarray) -> np.ndarray:
        return catenoid_normal(p, self.a, tol=np.inf)

    def retract(self, p: np.ndarray) -> np.ndarray:
        return np.asarray(catenoid_retract(p[0], p[1], p[2], self.a))

    def surface_residual(self, p: np.ndarray) -> float:
        return float(catenoid_surface_residual(p, self.a))

    def point_at(self, s: float, phi: float = 0.0) -> np.ndarray:
        ch = self.a * math.cosh(s)
        return np.array([ch * math.cos(phi), ch * math.sin(phi), self.a * s])

    def point_at_radius(self, r: float, phi: float = 0.0) -> np.ndarray:
        """On-surface point on the upper end with given cylinder radius."""
        if r < self.a:
            raise DomainError("radius below the waist")
        return self.point_at(math.acosh(r / self.a), phi)

    def _tangents(self, p: np.ndarray):
        s = p[2] / self.a
        phi = math.atan2(p[1], p[0])
        t1 = np.array(
            [
                self.a * math.sinh(s) * math.cos(phi),
                self.a * math.sinh(s) * math.sin(phi),
                self.a,
            ]
        )
        t2 = np.array(
            [-self.a * math.cosh(s) * math.sin(phi), self.a * math.cosh(s) * math.cos(phi), 0.0]
        )
        return t1, t2


@dataclass(frozen=True)
class Helicoid:
    """Tangent-plane strategy for the helicoid (u cos v, u sin v, pitch v).

    The helicoid escapes every envelope |x3| <= f(r): its height at fixed
    radius is unbounded.  Kept as the classical minimal-surface companion and
    a strategy whose region hypothesis fails.
    """

    pitch: float = 1.0
    kernel_kind: int = field(default=2, init=False)
    barrier_coord: str = field(default="log_r", init=False)

    def __post_init__(self):
        if self.pitch <= 0:
            raise DomainError("pitch must be positive")
        us = np.linspace(-3.0, 3.0, 7)
        vs = np.linspace(-2.0, 2.0, 5)
        grid = np.array(
            [
                (u * math.cos(v), u * math.sin(v), self.pitch * v)
                for u in us
                for v in vs
                if abs(u) > 1e-6
            ]
        )
        _grid_check(self, grid)

    @property
    def kernel_params(self) -> tuple:
        return (self.pitch,)

    def normal(self, p: np.ndarray) -> np.ndarray:
        return helicoid_normal(p, self.pitch, tol=np.inf)

    def retract(self, p: np.ndarray) -> np.ndarray:
        return np.asarray(helicoid_retract(p[0], p[1], p[2], self.pitch))

    def surface_residual(self, p: np.ndarray) -> float:
        return float(helicoid_surface_residual(p, self.pitch))

    def point_at(self, u: float, v: float) -> np.ndarray:
        return np.array([u * math.cos(v), u * math.sin(v), self.pitch * v])

    def _tangents(self, p: np.ndarray):
        v = p[2] / self.pitch
        u = p[0] * math.cos(v) + p[1] * math.sin(v)
        t1 = np.array([math.cos(v), math.sin(v), 0.0])
        t2 = np.array([-u * math.sin(v), u * math.cos(v), self.pitch])
        return t1, t2


@dataclass(frozen=True)
class CustomStrategy:
    """Adversarial/custom control: any rule point -> unit kernel direction.

    Runs on the pure Python engine only (``kernel_kind`` is None).  The rule
    sees the current point and nothing else, matching adaptedness.
    """

    rule: Callable[[np.ndarray], np.ndarray]
    description: str = "custom"
    kernel_kind: None = field(default=None, init=False)
    barrier_coord: str = field(default="log_r", init=False)

    def normal(self, p: np.ndarray) -> np.ndarray:
        return _require_unit(np.asarray(self.rule(p), dtype=float))

    def retract(self, p: np.ndarray) -> np.ndarray:
        return p

    def surface_residual(self, p: np.ndarray) -> float:
        return 0.0
