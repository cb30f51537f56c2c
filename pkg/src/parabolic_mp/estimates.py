"""Both sides of the weighted a priori maximum estimates, Bony-type check and
the singular-drift counterexample."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .families import singular_drift
from .grid import GridFunction, NodeKind, build_cylinder, parabolic_boundary, positivity_set
from .mixed_norm import MixedNormSpec, mixed_norm
from .operator import (
    ExponentPair,
    OperatorCoefficients,
    apply_operator,
    check_degeneracy_condition,
    coefficient_weight,
    conventional_divide,
    drift_weight,
    exp_rescale,
)
from .solver import SchemeConfig, solve_forward

__all__ = [
    "BonyResult",
    "CounterexampleReport",
    "EstimateReport",
    "bony_check",
    "drift_norm",
    "estimate_rhs",
    "ratio_scan",
    "singular_drift_counterexample",
    "verify_bound",
]


def _ratio(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else math.inf


def _check_boundary(u: GridFunction, tol: float):
    pb = parabolic_boundary(u.grid)
    worst = float(u.filled()[pb.boundary].max())
    if worst > tol:
        raise ValueError(f"u > 0 on the parabolic boundary (max {worst:.3e} > {tol:.1e})")


def estimate_rhs(L: OperatorCoefficients, u: GridFunction, e: ExponentPair, drift_scheme: str = "central",
                 mixed_scheme: str = "cross", exclude: np.ndarray | None = None,
                 tol_boundary: float = 1e-10, tol_pos: float = 0.0) -> float:
    """Weighted mixed norm of ``(Lu)_+`` over the positivity set of ``u``.

    The weight is ``sigma^(1/q) det(a)^(1/p) c^(1 - n/p - 1/q)``; the
    norm order is the stronger one for ``(p, q)``.  Nodes in ``exclude``
    are dropped from the integration set.
    """
    e.require_admissible(L.n)
    _check_boundary(u, tol_boundary)
    Lu = apply_operator(L, u, drift_scheme, mixed_scheme)
    pos = np.maximum(Lu.filled(), 0.0)
    vals, flagged = conventional_divide(pos, coefficient_weight(L, e))
    mask = positivity_set(u, tol_pos).membership
    if exclude is not None:
        mask = mask & ~exclude
    integrand = GridFunction(L.grid, vals, flagged=flagged)
    return mixed_norm(integrand, MixedNormSpec(e, "auto", restriction=mask))


def drift_norm(L: OperatorCoefficients, e: ExponentPair, k: int | str = "total",
               restriction: np.ndarray | None = None) -> float:
    """``||h||_{p,q}`` of the drift weight (or the weight of drift part ``k``)."""
    h = drift_weight(L, e, k)
    return mixed_norm(h, MixedNormSpec(e, "auto", restriction=restriction))


@dataclass
class EstimateReport:
    lhs_sup: float
    rhs_norm: float
    ratio: float
    drift_norms: list
    exponents: ExponentPair
    degeneracy: dict
    rescale_factor: float
    kappa: float
    u_sup: float
    grid: dict
    family: str = "custom"
    solve: dict = field(default_factory=dict)

    @property
    def hypotheses_ok(self) -> bool:
        return self.degeneracy["passed"] and all(math.isfinite(d["norm"]) for d in self.drift_norms)

    @property
    def bound_target(self) -> float:
        return self.rescale_factor * self.rhs_norm

    def to_dict(self) -> dict:
        return {
            "kind": "estimate_report",
            "family": self.family,
            "lhs_sup": self.lhs_sup,
            "u_sup": self.u_sup,
            "rhs_norm": self.rhs_norm,
            "ratio": self.ratio,
            "bound_target": self.bound_target,
            "exponents": str(self.exponents),
            "drift_norms": self.drift_norms,
            "degeneracy": self.degeneracy,
            "hypotheses": "ok" if self.hypotheses_ok else "hypotheses violated",
            "kappa": self.kappa,
            "rescale_factor": self.rescale_factor,
            "grid": self.grid,
            "solve": self.solve,
        }


def verify_bound(L: OperatorCoefficients, f: GridFunction, e0: ExponentPair, e1_list=(),
                 cfg: SchemeConfig | None = None, exclude: np.ndarray | None = None) -> EstimateReport:
    """Solve ``Lu = f`` (zero parabolic data) and compare ``sup u`` with the weighted norm.

    For ``L.kappa > 0`` the comparison is made for ``v = exp(-kappa t) u``
    and the operator with ``c + kappa*sigma``; the report carries the factor
    ``exp(kappa T)``.  Drift norms are taken over the positivity set, for
    every pair in ``e1_list`` (total drift) and for every drift part that
    declares its own exponents.
    """
    cfg = cfg or SchemeConfig()
    n = L.n
    e0.require_admissible(n)
    for e1 in e1_list:
        e1.require_admissible(n)
    deg = check_degeneracy_condition(L, e0)
    u, info = solve_forward(L, f, cfg, return_info=True)
    Lk, v = exp_rescale(L, u) if L.kappa > 0 else (L, u)
    rhs = estimate_rhs(Lk, v, e0, cfg.drift_scheme, cfg.mixed_scheme, exclude=exclude)
    lhs = max(float(v.filled().max()), 0.0)
    Qv = positivity_set(v).membership
    norms = [{"part": "total", "exponents": str(e1), "norm": drift_norm(Lk, e1, "total", Qv)} for e1 in e1_list]
    for k, ek in enumerate(Lk.part_exponents):
        if ek is not None:
            norms.append({"part": k, "exponents": str(ek), "norm": drift_norm(Lk, ek, k, Qv)})
    return EstimateReport(
        lhs_sup=lhs,
        rhs_norm=rhs,
        ratio=_ratio(lhs, rhs),
        drift_norms=norms,
        exponents=e0,
        degeneracy=deg.to_dict(),
        rescale_factor=math.exp(L.kappa * L.grid.T),
        kappa=L.kappa,
        u_sup=float(u.filled().max()),
        grid=L.grid.to_record(),
        family=L.name,
        solve=info.to_dict(),
    )


def ratio_scan(make_operator, make_forcing, e0: ExponentPair, Nx_list, n=1, R=1.0, T=1.0, e1_list=(),
               cfg: SchemeConfig | None = None, Nt_list=None) -> list[EstimateReport]:
    """Run :func:`verify_bound` on a sequence of refined grids.

    ``make_operator(grid)`` and ``make_forcing(grid)`` build the problem on
    each grid; ``Nt_list`` defaults to ``Nx_list``.
    """
    Nt_list = Nx_list if Nt_list is None else Nt_list
    out = []
    for Nx, Nt in zip(Nx_list, Nt_list):
        g = build_cylinder(n, R, T, Nx, Nt)
        out.append(verify_bound(make_operator(g), make_forcing(g), e0, e1_list, cfg))
    return out


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BonyResult:
    verdict: str
    max_location: tuple | None
    max_value: float
    sup_value: float | None
    sup_location: tuple | None
    tol: float

    def to_dict(self):
        return {
            "kind": "bony_check",
            "verdict": self.verdict,
            "max_location": None if self.max_location is None else list(self.max_location),
            "max_value": self.max_value,
            "sup_normalized_Lu": self.sup_value,
            "sup_location": None if self.sup_location is None else list(self.sup_location),
            "tol": self.tol,
        }


def bony_check(L: OperatorCoefficients, u: GridFunction, tol: float | None = None,
               drift_scheme: str = "central", mixed_scheme: str = "cross") -> BonyResult:
    """At an interior nonnegative maximum, ``sup Lu / (Sp(a) + sigma + c)`` must be ``>= -tol``.

    ``tol`` defaults to ``10 (hx + ht)``.  The verdict is ``not-applicable``
    when the maximum is negative or is attained only on the parabolic
    boundary or the final slice.
    """
    g = L.grid
    tol = 10 * (g.hx + g.ht) if tol is None else float(tol)
    vals = u.filled()
    m = float(vals.max())
    strict = parabolic_boundary(g).flags == NodeKind.INTERIOR
    at_max = np.isclose(vals, m, rtol=0, atol=1e-14 * max(1.0, abs(m)))
    hits = np.argwhere(at_max & strict)
    if m < 0 or len(hits) == 0:
        return BonyResult("not-applicable", None, m, None, None, tol)
    loc = tuple(int(i) for i in hits[0])
    Lu = apply_operator(L, u, drift_scheme, mixed_scheme)
    denom = np.broadcast_to(L.trace_a + L.sigma + L.c, g.shape)
    num = Lu.filled()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), np.sign(num) * np.inf)
    ratio = np.where(np.isnan(ratio), 0.0, ratio)
    ratio = np.where(Lu.defined, ratio, -np.inf)
    sidx = np.unravel_index(int(np.argmax(ratio)), g.shape)
    s = float(ratio[sidx])
    return BonyResult("pass" if s >= -tol else "fail", loc, m, s, tuple(int(i) for i in sidx), tol)


# ---------------------------------------------------------------------------

def _sphere_area(n: int) -> float:
    return 2.0 if n == 1 else 2 * math.pi


def radial_drift_norm_exact(alpha: float, n: int, strength: float | None = None) -> float:
    """``(int_{B_1} |strength x/|x|^alpha|^n dx)^(1/n)`` for ``alpha < 2``."""
    if alpha >= 2:
        return math.inf
    s = n + 1 if strength is None else strength
    return (s**n * _sphere_area(n) / (n * (2 - alpha))) ** (1.0 / n)


@dataclass
class CounterexampleReport:
    alpha: float
    n: int
    grid: dict
    U_at_0_1: float
    U_node_0_1: float | None
    boundary_max: float
    LU_max_outside_ball: float
    LU_truncation_max: float
    exclusion_radius: float
    study_Nx: list
    eps_sing: list
    h_norms: list
    growth_ratios: list
    increment_ratios: list
    divergent: bool
    h_norm_exact: float
    naive_rhs: float
    naive_bound_certified: bool

    @property
    def reproduced(self) -> bool:
        """Comparison function exhibits ``LU < 0``, ``U <= 0`` on the boundary and ``U(0,1) = 1/2``."""
        return self.LU_max_outside_ball < 0 and self.boundary_max <= 1e-12 and self.U_at_0_1 == 0.5

    def to_dict(self):
        d = {k: v for k, v in self.__dict__.items()}
        d["kind"] = "counterexample"
        d["reproduced"] = self.reproduced
        d["h_norm_flag"] = "divergent" if self.divergent else "finite"
        return d


def _U(x, t):
    return 2 * t - t**2 - sum(xi**2 for xi in x) - 0.5


def singular_drift_counterexample(alpha: float = 2.0, n: int = 1, Nx: int = 81, Nt: int = 81,
                                  study_Nx=(41, 81, 161, 321), exclusion_factor: float = 2.0
                                  ) -> CounterexampleReport:
    """Comparison function ``U = 2t - t^2 - |x|^2 - 1/2`` under the drift ``(n+1) x/|x|^alpha``.

    On ``B_1 x (0, 1)`` with ``sigma = c = 1`` and ``a = I``: checks
    ``LU < 0`` away from a ball of radius ``exclusion_factor * hx`` around
    the singularity, ``U <= 0`` on the parabolic boundary, and reports
    ``U(0, 1)``.  The drift-weight norm ``||h||_{n,inf}`` is followed over
    the grids ``study_Nx`` (``eps_sing = hx/2`` halves with each step);
    it is flagged divergent when the increments of ``||h||^n`` fail to
    shrink (successive increment ratios >= 0.9).
    """
    if not 0 < alpha <= 2:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    g = build_cylinder(n, 1.0, 1.0, Nx, Nt)
    L = singular_drift(g, alpha)
    U = g.sample(_U)
    LU = apply_operator(L, U)
    r = g.radius()[..., None]
    t = g.time_coords()
    excl_r = exclusion_factor * g.hx
    keep = LU.defined & np.broadcast_to(r >= excl_r - 1e-12, g.shape)
    LU_max = float(LU.values[keep].max())
    exact = 2 - 2 * t + 2 * n - 2 * (n + 1) * np.power(r, 2 - alpha) + _U(g.spatial_coords(), t)
    trunc = float(np.abs(LU.values - np.broadcast_to(exact, g.shape))[keep].max())
    pb = parabolic_boundary(g)
    bmax = float(U.values[pb.boundary].max())
    centre = (Nx // 2,) * n + (Nt - 1,)
    node = float(U.values[centre]) if Nx % 2 == 1 else None

    e = ExponentPair(n, "inf")
    norms, eps = [], []
    for N in study_Nx:
        gs = build_cylinder(n, 1.0, 1.0, N, 3)
        Ls = singular_drift(gs, alpha)
        norms.append(drift_norm(Ls, e, restriction=gs.domain_mask()))
        eps.append(gs.hx / 2)
    growth = [norms[i + 1] / norms[i] for i in range(len(norms) - 1)]
    powers = [v**n for v in norms]
    incr = [powers[i + 1] - powers[i] for i in range(len(powers) - 1)]
    incr_ratio = [incr[i + 1] / incr[i] if incr[i] > 0 else 0.0 for i in range(len(incr) - 1)]
    divergent = bool(len(incr_ratio) > 0 and all(d > 0 for d in incr) and all(q >= 0.9 for q in incr_ratio))

    exclude = np.broadcast_to(r < excl_r - 1e-12, g.shape)
    naive = estimate_rhs(L, U, ExponentPair("inf", "inf"), exclude=exclude)
    certified = bool(naive > 0 and max(float(U.values.max()), 0.0) <= naive)
    return CounterexampleReport(
        alpha=float(alpha), n=n, grid=g.to_record(),
        U_at_0_1=float(_U([np.zeros(1)] * n, 1.0)[0]), U_node_0_1=node,
        boundary_max=bmax, LU_max_outside_ball=LU_max, LU_truncation_max=trunc,
        exclusion_radius=excl_r, study_Nx=list(study_Nx), eps_sing=eps, h_norms=norms,
        growth_ratios=growth, increment_ratios=incr_ratio, divergent=divergent,
        h_norm_exact=radial_drift_norm_exact(alpha, n), naive_rhs=naive, naive_bound_certified=certified,
    )
