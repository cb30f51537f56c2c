"""Implicit theta-scheme for ``Lu = f`` with Dirichlet data on the parabolic boundary."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Cylinder, GridFunction
from .operator import DRIFT_SCHEMES, MIXED_SCHEMES, OperatorCoefficients, apply_operator, stencil_weights

__all__ = ["SchemeConfig", "SolveInfo", "SolverError", "solve_barrier_problem", "solve_forward", "spatial_matrix"]

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    """Time-stepping options.

    ``linear_solver`` is ``"banded_direct"`` (sparse LU) or ``"iterative"``
    (ILU-preconditioned BiCGSTAB with ``tol`` and ``max_iter``).
    """

    theta: float = 1.0
    drift_scheme: str = "upwind"
    mixed_scheme: str = "seven_point"
    linear_solver: str = "banded_direct"
    tol: float = 1e-12
    max_iter: int = 500

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.drift_scheme not in DRIFT_SCHEMES:
            raise ValueError(f"unknown drift scheme {self.drift_scheme!r}")
        if self.mixed_scheme not in MIXED_SCHEMES:
            raise ValueError(f"unknown mixed-derivative scheme {self.mixed_scheme!r}")
        if self.linear_solver not in ("banded_direct", "iterative"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")


@dataclass
class SolveInfo:
    residual: float
    solve_residual: float
    monotone: bool
    levels: int
    factorizations: int
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "residual_max": self.residual,
            "solve_residual_max": self.solve_residual,
            "monotone": self.monotone,
            "levels": self.levels,
            "factorizations": self.factorizations,
            "notes": list(self.notes),
        }


def spatial_matrix(L: OperatorCoefficients, k: int, drift_scheme="upwind", mixed_scheme="seven_point"):
    """Sparse matrix of the spatial part of ``L`` at time level ``k`` on all box nodes.

    Rows of box-edge nodes are empty.  Also returns the per-node monotonicity flags.
    """
    g = L.grid
    S = g.spatial_shape
    N = int(np.prod(S))
    _, a, b, c = L.level(k)
    inner = (slice(1, -1),) * g.n
    W, mono = stencil_weights(a[inner][..., 0, :, :], b[inner][..., 0, :], c[inner][..., 0],
                              g.hx, drift_scheme, mixed_scheme)
    idx = np.arange(N).reshape(S)
    rows_c = idx[inner].ravel()
    rows, cols, vals = [], [], []
    for off, w in W.items():
        sl = tuple(slice(1 + o, S[i] - 1 + o) for i, o in enumerate(off))
        rows.append(rows_c)
        cols.append(idx[sl].ravel())
        vals.append(np.broadcast_to(w, idx[inner].shape).ravel())
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
    return A, mono


def _boundary_values(grid: Cylinder, boundary: GridFunction | None) -> np.ndarray:
    if boundary is None:
        return np.zeros(grid.shape)
    if boundary.grid != grid:
        raise ValueError("boundary data lives on a different grid")
    return boundary.filled()


class _LinearSolve:
    def __init__(self, M, cfg: SchemeConfig):
        self.M = M.tocsc()
        self.cfg = cfg
        if cfg.linear_solver == "banded_direct":
            try:
                self.lu = spla.splu(self.M)
            except RuntimeError as exc:
                raise SolverError(f"singular time-step matrix: {exc}") from exc
        else:
            try:
                ilu = spla.spilu(self.M, drop_tol=1e-5)
                self.prec = spla.LinearOperator(self.M.shape, ilu.solve)
            except RuntimeError:
                self.prec = None

    def __call__(self, rhs):
        if self.cfg.linear_solver == "banded_direct":
            x = self.lu.solve(rhs)
        else:
            x, info = spla.bicgstab(self.M, rhs, rtol=self.cfg.tol, atol=0.0,
                                    maxiter=self.cfg.max_iter, M=self.prec)
            if info != 0:
                raise SolverError(f"iterative solver did not converge (info={info})")
        if not np.isfinite(x).all():
            raise SolverError("time-step solve produced non-finite values")
        return x


def solve_forward(L: OperatorCoefficients, f: GridFunction, cfg: SchemeConfig | None = None,
                  boundary: GridFunction | None = None, return_info: bool = False):
    """Advance the theta-scheme level by level.

    ``u`` takes the values of ``boundary`` (zero by default) on the initial
    slice and at every node with ``|x| >= R``.  With ``theta = 1`` and
    upwind drift each level solves an M-matrix system whenever
    ``sigma > 0`` and ``c + sigma/ht >= 0``.
    """
    cfg = cfg or SchemeConfig()
    g = L.grid
    if f.grid != g:
        raise ValueError("forcing lives on a different grid")
    S, N = g.spatial_shape, int(np.prod(g.spatial_shape))
    unknown = g.inside().ravel()
    known = ~unknown
    sigma_full = np.broadcast_to(L.sigma, g.shape).reshape(N, g.Nt)
    if (sigma_full[unknown] <= 0).any():
        raise SolverError("sigma must be positive at interior nodes")
    fv = np.broadcast_to(f.filled(), g.shape).reshape(N, g.Nt)
    gv = _boundary_values(g, boundary).reshape(N, g.Nt)
    u = np.empty((N, g.Nt))
    u[:, 0] = gv[:, 0]
    u[known, :] = gv[known, :]
    theta = cfg.theta

    cache_key, solve, factorizations = None, None, 0
    A_prev = None
    monotone, solve_res = True, 0.0
    for k in range(1, g.Nt):
        key = 0 if L.time_independent else k
        if key != cache_key:
            A, mono = spatial_matrix(L, k, cfg.drift_scheme, cfg.mixed_scheme)
            monotone &= bool(mono.all())
            Au = A[unknown]
            Auu, Auk = Au[:, unknown], Au[:, known]
        sig = sigma_full[:, k] / g.ht
        rhs = sig[unknown] * u[unknown, k - 1] + theta * fv[unknown, k] - theta * (Auk @ u[known, k])
        if theta < 1:
            if A_prev is None:
                A_prev, _ = spatial_matrix(L, k - 1, cfg.drift_scheme, cfg.mixed_scheme)
            rhs += (1 - theta) * (fv[unknown, k - 1] - A_prev[unknown] @ u[:, k - 1])
        if key != cache_key:
            M = sp.diags(sig[unknown]) + theta * Auu
            solve = _LinearSolve(M, cfg)
            cache_key = key
            factorizations += 1
        u[unknown, k] = solve(rhs)
        solve_res = max(solve_res, float(np.abs(solve.M @ u[unknown, k] - rhs).max(initial=0.0)))
        A_prev = A
    u = GridFunction(g, u.reshape(g.shape))
    if not return_info:
        return u
    notes = []
    if theta < 1:
        notes.append("theta < 1: monotonicity not guaranteed")
    if not monotone:
        notes.append("stencil has positive off-diagonal weights at some nodes; maximum principle not guaranteed")
    Lu = apply_operator(L, u, cfg.drift_scheme, cfg.mixed_scheme)
    resid = np.abs(Lu.filled() - np.where(Lu.defined, fv.reshape(g.shape), 0.0))
    info = SolveInfo(float(resid.max()), solve_res, monotone and theta == 1.0, g.Nt - 1, factorizations, notes)
    return u, info


def solve_barrier_problem(L: OperatorCoefficients, rhs_field: GridFunction | np.ndarray,
                          cfg: SchemeConfig | None = None) -> GridFunction:
    """Solve ``L B = rhs`` with ``B = 0`` on the parabolic boundary.

    ``rhs_field`` is usually ``|b|`` or the magnitude of one drift part.
    """
    if not isinstance(rhs_field, GridFunction):
        rhs_field = GridFunction(L.grid, np.broadcast_to(rhs_field, L.grid.shape))
    if (rhs_field.filled() < 0).any():
        log.warning("barrier right-hand side has negative values; B may be negative")
    return solve_forward(L, rhs_field, cfg)
