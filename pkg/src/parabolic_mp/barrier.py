"""Radial Monge-Ampere barriers and barrier-inequality checks.

For radial ``v(r)`` the Hessian determinant is ``v'' (v'/r)^(n-1)``, so
``det D^2 v = (2/n)^n f^n (1 + |Dv|^2)^(n/2)`` becomes, with ``psi = (v')^n``,

    psi' = n r^(n-1) (2/n)^n f(r)^n (1 + psi^(2/n))^(n/2),   psi(0) = 0,

integrated outward by classical RK4 together with ``w' = psi^(1/n)``; then
``v(r) = w(r) - w(R_outer)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .grid import Cylinder, GridFunction
from .operator import OperatorCoefficients, apply_operator

__all__ = [
    "BarrierVerdict",
    "RadialBarrier",
    "compose_barriers",
    "quadratic_barrier",
    "radial_majorant",
    "solve_radial_monge_ampere",
    "verify_barrier_inequality",
]


@dataclass(frozen=True, eq=False)
class RadialBarrier:
    n: int
    radius: float
    r: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    f: np.ndarray

    @property
    def norm(self) -> float:
        """``sup B = |v(0)|``."""
        return float(abs(self.v[0]))

    @property
    def slope_max(self) -> float:
        return float(np.abs(self.dv).max())

    def profile(self, rho) -> np.ndarray:
        """``v`` at radii ``rho`` (zero beyond the outer radius)."""
        rho = np.asarray(rho, float)
        spline = CubicHermiteSpline(self.r, self.v, self.dv)
        return np.where(rho < self.radius, spline(np.minimum(rho, self.radius)), 0.0)

    def sample(self, grid: Cylinder) -> GridFunction:
        """``B = -v(|x|)`` on every node of ``grid`` (constant in time)."""
        B = -self.profile(grid.radius())
        return GridFunction(grid, np.broadcast_to(B[..., None], grid.shape))


def _source(f, R_outer):
    if callable(f):
        return f
    if isinstance(f, tuple):
        rs, vals = (np.asarray(z, float) for z in f)
        return lambda r: np.interp(r, rs, vals)
    c0 = float(f)
    return lambda r: c0 + 0.0 * np.asarray(r, float)


def solve_radial_monge_ampere(f, n: int, R_outer: float, steps: int = 1000) -> RadialBarrier:
    """Integrate the radial Monge-Ampere barrier equation on ``[0, R_outer]``.

    ``f`` is a nonnegative constant, a callable of ``r`` or a pair of
    sample arrays ``(r, f(r))`` (linearly interpolated).
    """
    if n not in (1, 2):
        raise ValueError("radial barrier supports n = 1, 2")
    if R_outer <= 0 or steps < 1:
        raise ValueError("need R_outer > 0 and steps >= 1")
    src = _source(f, R_outer)
    r = np.linspace(0.0, R_outer, steps + 1)
    fr = np.asarray(src(r), float) * np.ones_like(r)
    if (fr < 0).any():
        raise ValueError("barrier source f must be nonnegative")
    H = R_outer / steps
    k_n = (2.0 / n) ** n

    def rhs(rr, y):
        psi = max(y[0], 0.0)
        fv = float(src(rr))
        dpsi = n * rr ** (n - 1) * k_n * fv**n * (1.0 + psi ** (2.0 / n)) ** (n / 2.0)
        return np.array([dpsi, psi ** (1.0 / n)])

    y = np.zeros((steps + 1, 2))
    # overflow is caught below as a non-finite state
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(steps):
            rj, yj = r[j], y[j]
            k1 = rhs(rj, yj)
            k2 = rhs(rj + H / 2, yj + H / 2 * k1)
            k3 = rhs(rj + H / 2, yj + H / 2 * k2)
            k4 = rhs(rj + H, yj + H * k3)
            y[j + 1] = yj + H / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.isfinite(y[j + 1]).all():
                raise FloatingPointError(f"radial barrier integration blew up at r = {r[j + 1]:.6g}")
    dv = np.maximum(y[:, 0], 0.0) ** (1.0 / n)
    v = y[:, 1] - y[-1, 1]
    return RadialBarrier(n, float(R_outer), r, v, dv, fr)


def radial_majorant(h: GridFunction, R_outer: float, margin: float = 0.01, samples: int = 1001):
    """Radial profile ``f(r)`` dominating ``sup_t h`` within one grid step of radius ``r``.

    Returns ``(r, f)`` suitable for :func:`solve_radial_monge_ampere`.
    """
    g = h.grid
    hv = h.filled()
    if np.isinf(hv).any():
        raise ValueError("drift weight is infinite somewhere; no finite majorant exists")
    sup_t = hv.max(axis=-1).ravel()
    rad = g.radius().ravel()
    order = np.argsort(rad)
    rad, sup_t = rad[order], sup_t[order]
    rs = np.linspace(0.0, R_outer, samples)
    lo = np.searchsorted(rad, rs - g.hx, side="left")
    hi = np.searchsorted(rad, rs + g.hx, side="right")
    f = np.array([sup_t[a:b].max(initial=0.0) for a, b in zip(lo, hi)])
    return rs, f * (1 + margin)


def quadratic_barrier(grid: Cylinder) -> GridFunction:
    """``A = (R^2 - |x|^2)/2``; for ``a = I`` it gives ``-Delta A = n``."""
    A = 0.5 * (grid.R**2 - grid.radius() ** 2)
    return GridFunction(grid, np.broadcast_to(A[..., None], grid.shape))


@dataclass(frozen=True)
class BarrierVerdict:
    passed: bool
    min_slack: float
    location: tuple
    tol: float
    target: str

    def to_dict(self):
        return {"passed": self.passed, "min_slack": self.min_slack, "location": list(self.location),
                "tol": self.tol, "target": self.target}


def verify_barrier_inequality(L: OperatorCoefficients, B: GridFunction, target: str = "abs_b",
                              tol: float | None = None, drift_scheme: str = "central",
                              mixed_scheme: str = "cross", exclude: np.ndarray | None = None) -> BarrierVerdict:
    """Check ``LB >= Sp(a)`` (``target="Sp_a"``) or ``LB >= |b|`` (``"abs_b"``) at interior nodes."""
    g = L.grid
    if B.grid != g:
        raise ValueError("barrier lives on a different grid")
    if target == "Sp_a":
        tgt = L.trace_a
    elif target == "abs_b":
        tgt = L.b_norm()
    else:
        raise ValueError(f"unknown barrier target {target!r}")
    tol = 10 * (g.hx + g.ht) if tol is None else float(tol)
    LB = apply_operator(L, B, drift_scheme, mixed_scheme)
    mask = LB.defined.copy()
    if exclude is not None:
        mask &= ~exclude
    slack = np.where(mask, LB.values - np.broadcast_to(tgt, g.shape), np.inf)
    idx = np.unravel_index(int(np.argmin(slack)), g.shape)
    m = float(slack[idx])
    return BarrierVerdict(bool(m >= -tol), m, tuple(int(i) for i in idx), tol, target)


def compose_barriers(B1: RadialBarrier, B_tail: GridFunction) -> GridFunction:
    """``B1 + B_tail * (1 + max|DB1|)`` sampled on the tail's grid."""
    g = B_tail.grid
    if B1.n != g.n:
        raise ValueError("radial barrier dimension does not match the grid")
    if B1.radius < g.R:
        raise ValueError(f"radial barrier radius {B1.radius} does not cover R = {g.R}")
    if (B_tail.filled() < -1e-12).any():
        raise ValueError("tail barrier must be nonnegative")
    return GridFunction(g, B1.sample(g).values + B_tail.filled() * (1 + B1.slope_max))
