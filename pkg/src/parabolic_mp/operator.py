"""Linear parabolic operator ``sigma D_t u - a_ij D_i D_j u + b_i D_i u + c u``.

Coefficient fields are sampled on the grid.  A field array has shape
``spatial_shape + (m,)`` (plus trailing matrix/vector axes) with ``m`` equal
to 1 for time-independent coefficients or ``Nt`` otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .grid import Cylinder, GridFunction, parabolic_boundary

__all__ = [
    "DegeneracyReport",
    "ExponentPair",
    "NondegeneracyBounds",
    "OperatorCoefficients",
    "apply_operator",
    "certify_nondegeneracy",
    "check_degeneracy_condition",
    "coefficient_weight",
    "conventional_divide",
    "drift_weight",
    "exp_rescale",
    "scale_operator",
    "stencil_weights",
]

INF = math.inf
DRIFT_SCHEMES = ("central", "upwind")
MIXED_SCHEMES = ("cross", "seven_point")


def _as_exponent(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "infinity", "oo", "∞"):
            return INF
        return Fraction(s)
    if isinstance(v, float) and math.isinf(v):
        return INF
    return Fraction(str(v)) if isinstance(v, float) else Fraction(v)


@dataclass(frozen=True)
class ExponentPair:
    """Spatial exponent ``p`` and temporal exponent ``q`` in ``[1, inf]``.

    Finite exponents are kept as :class:`fractions.Fraction` so that the
    admissibility test ``n/p + 1/q <= 1`` is exact.
    """

    p: Fraction | float
    q: Fraction | float

    def __post_init__(self):
        p, q = _as_exponent(self.p), _as_exponent(self.q)
        for name, v in (("p", p), ("q", q)):
            if v != INF and v < 1:
                raise ValueError(f"exponent {name}={v} must lie in [1, inf]")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def parse(cls, text: str) -> "ExponentPair":
        p, q = text.replace("(", "").replace(")", "").split(",")
        return cls(p, q)

    @property
    def inv_p(self) -> Fraction:
        return Fraction(0) if self.p == INF else 1 / self.p

    @property
    def inv_q(self) -> Fraction:
        return Fraction(0) if self.q == INF else 1 / self.q

    def scaling(self, n: int) -> Fraction:
        return n * self.inv_p + self.inv_q

    def admissible(self, n: int) -> bool:
        return self.scaling(n) <= 1

    def require_admissible(self, n: int):
        if not self.admissible(n):
            s = self.scaling(n)
            raise ValueError(
                f"inadmissible exponents (p, q) = {self}: n/p + 1/q = {s} > 1 for n = {n}"
            )

    @property
    def finite(self) -> bool:
        return self.p != INF and self.q != INF

    def as_floats(self) -> tuple[float, float]:
        return float(self.p), float(self.q)

    def __str__(self):
        f = lambda v: "inf" if v == INF else str(v)
        return f"({f(self.p)}, {f(self.q)})"


@dataclass(frozen=True, eq=False)
class OperatorCoefficients:
    grid: Cylinder
    sigma: np.ndarray
    a: np.ndarray
    b_parts: tuple[np.ndarray, ...]
    c: np.ndarray
    kappa: float = 0.0
    part_exponents: tuple[ExponentPair | None, ...] = ()
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        g = self.grid
        n, S = g.n, g.spatial_shape

        def fix(arr, tail, label):
            arr = np.asarray(arr, dtype=float)
            if arr.shape[: g.n] != S or arr.ndim != g.n + 1 + len(tail) or arr.shape[g.n + 1:] != tail:
                raise ValueError(f"{label} has shape {arr.shape}, expected {S} + (1|Nt,) + {tail}")
            if arr.shape[g.n] not in (1, g.Nt):
                raise ValueError(f"{label} time axis must have length 1 or Nt")
            if not np.isfinite(arr).all():
                raise ValueError(f"{label} contains non-finite values")
            arr.setflags(write=False)
            return arr

        sigma = fix(self.sigma, (), "sigma")
        a = fix(self.a, (n, n), "a")
        c = fix(self.c, (), "c")
        parts = tuple(fix(b, (n,), f"b_parts[{i}]") for i, b in enumerate(self.b_parts))
        if not parts:
            parts = (np.zeros(S + (1, n)),)
        pe = tuple(self.part_exponents) or (None,) * len(parts)
        if len(pe) != len(parts):
            raise ValueError("part_exponents must match b_parts in length")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if (sigma < 0).any():
            raise ValueError("sigma must be nonnegative")
        if not np.allclose(a, np.swapaxes(a, -1, -2), rtol=0, atol=1e-14 * max(1.0, np.abs(a).max())):
            raise ValueError("diffusion matrix a is not symmetric")
        scale = max(1.0, np.abs(a).max())
        if n == 1:
            neg = a[..., 0, 0] < -1e-14 * scale
        else:
            det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] ** 2
            neg = (a[..., 0, 0] < -1e-14 * scale) | (a[..., 1, 1] < -1e-14 * scale) | (det < -1e-14 * scale**2)
        if neg.any():
            raise ValueError("diffusion matrix a is not positive semidefinite")
        if (c + self.kappa * sigma < -1e-14).any():
            raise ValueError("need c + kappa*sigma >= 0")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b_parts", parts)
        object.__setattr__(self, "part_exponents", pe)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def b(self) -> np.ndarray:
        return sum(self.b_parts[1:], self.b_parts[0])

    def b_norm(self, k: int | str = "total") -> np.ndarray:
        b = self.b if k == "total" else self.b_parts[int(k)]
        return np.sqrt(np.sum(b * b, axis=-1))

    @property
    def trace_a(self) -> np.ndarray:
        return np.trace(self.a, axis1=-2, axis2=-1)

    @property
    def det_a(self) -> np.ndarray:
        a = self.a
        if self.n == 1:
            d = a[..., 0, 0]
            tol = 1e-14 * np.abs(d)
        else:
            d = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] ** 2
            tol = 1e-14 * np.max(np.abs(a), axis=(-2, -1)) ** 2
        # roundoff may make a semidefinite matrix look slightly indefinite
        return np.where((d < 0) & (d >= -tol), 0.0, d)

    def full(self, arr: np.ndarray) -> np.ndarray:
        """Broadcast a scalar field to the full grid shape."""
        return np.broadcast_to(arr, self.grid.shape)

    def level(self, k: int):
        """Coefficients ``(sigma, a, b, c)`` at time level ``k`` (time axis kept, length 1)."""
        pick = lambda arr: arr[(slice(None),) * self.n + (slice(k, k + 1) if arr.shape[self.n] > 1 else slice(0, 1),)]
        return pick(self.sigma), pick(self.a), pick(self.b), pick(self.c)

    @property
    def time_independent(self) -> bool:
        return all(arr.shape[self.n] == 1 for arr in (self.sigma, self.a, self.c, *self.b_parts))


def scale_operator(L: OperatorCoefficients, phi: np.ndarray) -> OperatorCoefficients:
    """Multiply every coefficient by a positive field ``phi`` (grid-broadcastable)."""
    phi = np.asarray(phi, dtype=float)
    if (phi <= 0).any():
        raise ValueError("scaling field must be positive")
    return replace(
        L,
        sigma=L.sigma * phi,
        a=L.a * phi[..., None, None],
        b_parts=tuple(b * phi[..., None] for b in L.b_parts),
        c=L.c * phi,
    )


# ---------------------------------------------------------------------------
# difference stencils

def _offset(n, i, s):
    o = [0] * n
    o[i] = s
    return tuple(o)


def stencil_weights(a, b, c, hx, drift_scheme="central", mixed_scheme="cross"):
    """Nine-point (five in 1D: three) weights of ``-a:D^2 u + b.Du + c u``.

    Arguments are coefficient arrays restricted to the nodes where the
    stencil is applied.  Returns ``(weights, monotone)`` where ``weights``
    maps an offset tuple to an array of node weights (the zero offset is
    the centre) and ``monotone`` marks nodes whose off-centre weights are
    all nonpositive.
    """
    if drift_scheme not in DRIFT_SCHEMES:
        raise ValueError(f"unknown drift scheme {drift_scheme!r}")
    if mixed_scheme not in MIXED_SCHEMES:
        raise ValueError(f"unknown mixed-derivative scheme {mixed_scheme!r}")
    n = a.shape[-1]
    h2 = hx * hx
    zero = np.zeros(c.shape)
    W: dict[tuple, np.ndarray] = {}

    def add(off, val):
        W[off] = W.get(off, zero) + val

    add((0,) * n, c)
    for i in range(n):
        aii = a[..., i, i]
        add(_offset(n, i, 1), -aii / h2)
        add(_offset(n, i, -1), -aii / h2)
        add((0,) * n, 2 * aii / h2)
        bi = b[..., i]
        if drift_scheme == "central":
            add(_offset(n, i, 1), bi / (2 * hx))
            add(_offset(n, i, -1), -bi / (2 * hx))
        else:
            pos, neg = np.maximum(bi, 0.0), np.minimum(bi, 0.0)
            add((0,) * n, (pos - neg) / hx)
            add(_offset(n, i, -1), -pos / hx)
            add(_offset(n, i, 1), neg / hx)
    if n == 2:
        a12 = a[..., 0, 1]
        cross = -2 * a12 / (4 * h2)
        if mixed_scheme == "seven_point":
            use7 = np.abs(a12) <= np.minimum(a[..., 0, 0], a[..., 1, 1])
        else:
            use7 = np.zeros(a12.shape, bool)
        s = np.abs(a12) * use7
        pos = np.maximum(a12, 0.0) * use7
        neg = np.minimum(a12, 0.0) * use7
        cr = np.where(use7, 0.0, cross)
        add((1, 1), cr - pos / h2)
        add((-1, -1), cr - pos / h2)
        add((1, -1), -cr + neg / h2)
        add((-1, 1), -cr + neg / h2)
        for off in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            add(off, s / h2)
        add((0, 0), -2 * s / h2)
    tol = 1e-13 * max(1.0, max(float(np.abs(w).max(initial=0)) for w in W.values()))
    monotone = np.ones(c.shape, bool)
    for off, w in W.items():
        if any(off):
            monotone &= w <= tol
    return W, monotone


def _shift(arr, off):
    """View of ``arr`` on box-interior nodes shifted by ``off``."""
    sl = []
    for o in off:
        sl.append(slice(1 + o, arr.shape[len(sl)] - 1 + o))
    return arr[tuple(sl)]


def _interior_coeffs(L: OperatorCoefficients, tsl):
    inner = (slice(1, -1),) * L.n

    def pick(arr):
        return arr[inner + ((tsl,) if arr.shape[L.n] > 1 else (slice(0, 1),))]

    return pick(L.sigma), pick(L.a), pick(L.b), pick(L.c)


def apply_operator(L: OperatorCoefficients, u: GridFunction, drift_scheme: str = "central",
                   mixed_scheme: str = "cross") -> GridFunction:
    """Evaluate ``Lu`` with a backward time difference and spatial terms at the new level.

    The result is defined on non-boundary nodes (interior and final slice);
    elsewhere the stencil does not fit and the value is undefined (NaN).
    """
    g = L.grid
    if u.grid != g:
        raise ValueError("grid function and operator live on different grids")
    vals = u.filled()
    inner = (slice(1, -1),) * g.n
    out = np.full(g.shape, np.nan)

    def level_block(tsl):
        sigma, a, b, c = _interior_coeffs(L, tsl)
        W, _ = stencil_weights(a, b, c, g.hx, drift_scheme, mixed_scheme)
        new = vals[..., tsl]
        old = vals[..., slice(tsl.start - 1, tsl.stop - 1)]
        res = sigma * (new[inner] - old[inner]) / g.ht
        for off, w in W.items():
            res = res + w * _shift(new, off)
        return res

    if L.time_independent:
        out[inner + (slice(1, None),)] = level_block(slice(1, g.Nt))
    else:
        for k in range(1, g.Nt):
            out[inner + (slice(k, k + 1),)] = level_block(slice(k, k + 1))
    defined = parabolic_boundary(g).interior & (np.arange(g.Nt) > 0)
    out[~defined] = np.nan
    return GridFunction(g, out, defined=defined)


# ---------------------------------------------------------------------------
# weights with the 0^0 = 1, 0/0 = 0 conventions

def _power(base: np.ndarray, e: Fraction) -> np.ndarray:
    if e == 0:
        return np.ones(np.shape(base))
    if (base < 0).any():
        raise ValueError("negative coefficient under a fractional power; rescale c first")
    return np.power(base, float(e))


def coefficient_weight(L: OperatorCoefficients, e: ExponentPair) -> np.ndarray:
    """``sigma^(1/q) det(a)^(1/p) c^(1 - n/p - 1/q)`` on the full grid.

    Uses ``c + kappa*sigma`` in place of ``c``.
    """
    e.require_admissible(L.n)
    c = L.c + L.kappa * L.sigma
    w = _power(L.sigma, e.inv_q) * _power(L.det_a, e.inv_p) * _power(c, 1 - e.scaling(L.n))
    return np.broadcast_to(w, L.grid.shape)


def conventional_divide(num: np.ndarray, den: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``num/den`` for ``num >= 0`` with ``0/0 = 0``; ``x/0 = +inf`` flagged."""
    num, den = np.broadcast_arrays(np.asarray(num, float), np.asarray(den, float))
    zero_den = den == 0
    flagged = zero_den & (num != 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(zero_den, np.where(flagged, np.inf, 0.0), num / np.where(zero_den, 1.0, den))
    return out, flagged


def drift_weight(L: OperatorCoefficients, e: ExponentPair, k: int | str = "total") -> GridFunction:
    """Drift weight ``|b| / (sigma^(1/q) det(a)^(1/p) c^(1-n/p-1/q))`` (or for part ``k``)."""
    num = np.broadcast_to(L.b_norm(k), L.grid.shape)
    vals, flagged = conventional_divide(num, coefficient_weight(L, e))
    return GridFunction(L.grid, vals, flagged=flagged)


# ---------------------------------------------------------------------------
# degeneracy conditions

@dataclass(frozen=True, eq=False)
class DegeneracyReport:
    exponents: ExponentPair
    branch: int
    condition: str
    passed: bool
    violating: np.ndarray

    @property
    def n_violating(self) -> int:
        return int(self.violating.sum())

    def to_dict(self) -> dict:
        return {
            "exponents": str(self.exponents),
            "branch": self.branch,
            "condition": self.condition,
            "passed": self.passed,
            "n_violating": self.n_violating,
        }


def degeneracy_branch(e: ExponentPair, n: int) -> tuple[int, str]:
    """Select which positivity condition applies to the exponent pair."""
    p, q = e.p, e.q
    if p == n:
        return 1, "Sp(a) > 0"
    if q == 1:
        return 2, "sigma > 0"
    if p == INF and q == INF:
        return 3, "c > 0"
    if p == INF:
        return 4, "c + sigma > 0"
    if q == INF and n < p:
        return 5, "Sp(a) + c > 0"
    if e.scaling(n) == 1:
        return 6, "Sp(a) + sigma > 0"
    return 7, "Sp(a) + sigma + c > 0"


def check_degeneracy_condition(L: OperatorCoefficients, e: ExponentPair) -> DegeneracyReport:
    e.require_admissible(L.n)
    branch, cond = degeneracy_branch(e, L.n)
    sp, sigma, c = L.trace_a, L.sigma, L.c + L.kappa * L.sigma
    field_ = {
        1: sp,
        2: sigma,
        3: c,
        4: c + sigma,
        5: sp + c,
        6: sp + sigma,
        7: sp + sigma + c,
    }[branch]
    violating = ~(np.broadcast_to(field_, L.grid.shape) > 0)
    return DegeneracyReport(e, branch, cond, not violating.any(), violating)


@dataclass(frozen=True)
class NondegeneracyBounds:
    """Largest ``delta`` with ``delta <= sigma, c <= 1/delta``, ``|b| <= 1/delta`` and
    ``delta <= eig(a) <= 1/delta`` at every node (0 if no such ``delta`` exists)."""

    delta: float

    @property
    def certified(self) -> bool:
        return self.delta > 0


def certify_nondegeneracy(L: OperatorCoefficients) -> NondegeneracyBounds:
    eig = np.linalg.eigvalsh(L.a)
    c = L.c + L.kappa * L.sigma
    lo = min(L.sigma.min(), c.min(), eig.min())
    hi = max(L.sigma.max(), c.max(), eig.max(), L.b_norm().max())
    if lo <= 0:
        return NondegeneracyBounds(0.0)
    return NondegeneracyBounds(float(min(lo, 1.0 / hi if hi > 0 else INF, 1.0)))


# ---------------------------------------------------------------------------

def exp_rescale(L: OperatorCoefficients, u: GridFunction, kappa: float | None = None):
    """Return ``(L_kappa, v)`` with ``c -> c + kappa*sigma`` and ``v = exp(-kappa t) u``.

    ``kappa`` defaults to ``L.kappa``; a negative value undoes a previous
    rescaling.  The operator's own ``kappa`` drops by the same amount so
    that ``c + kappa*sigma`` is unchanged.
    """
    kap = L.kappa if kappa is None else float(kappa)
    if u.grid != L.grid:
        raise ValueError("grid mismatch")
    if kap == 0:
        return L, u
    Lk = replace(L, c=L.c + kap * L.sigma, kappa=max(L.kappa - kap, 0.0))
    v = GridFunction(u.grid, np.exp(-kap * u.grid.time_coords()) * u.filled())
    return Lk, v
