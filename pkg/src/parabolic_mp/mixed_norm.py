"""Weighted anisotropic norms ``L_p^x L_q^t`` and ``L_q^t L_p^x`` on grid functions.

Integrals use the trapezoid rule per axis on node values; an infinite
exponent replaces the corresponding integral by a maximum over nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridFunction, PositivitySet
from .operator import INF, ExponentPair

__all__ = ["MixedNormSpec", "embedding_check", "mixed_norm", "mixed_norm_oracle"]

ORDERS = ("space_outer", "time_outer", "auto")
ORACLE_MAX_NODES = 100_000


@dataclass(frozen=True, eq=False)
class MixedNormSpec:
    exponents: ExponentPair
    order: str = "auto"
    weight: GridFunction | None = None
    restriction: PositivitySet | np.ndarray | None = None

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}, got {self.order!r}")

    def resolved_order(self) -> str:
        """``auto`` picks the stronger of the two iterated norms."""
        if self.order != "auto":
            return self.order
        return "time_outer" if self.exponents.p > self.exponents.q else "space_outer"

    def restriction_mask(self, shape) -> np.ndarray | None:
        r = self.restriction
        if r is None:
            return None
        m = r.membership if isinstance(r, PositivitySet) else np.asarray(r, bool)
        if m.shape != shape:
            raise ValueError(f"restriction shape {m.shape} does not match grid shape {shape}")
        return m


def _integrand(u: GridFunction, spec: MixedNormSpec) -> np.ndarray:
    vals = np.abs(u.filled())
    mask = spec.restriction_mask(u.grid.shape)
    if spec.weight is not None:
        if spec.weight.grid != u.grid:
            raise ValueError("weight and function live on different grids")
        w = spec.weight.filled()
        where = np.ones(u.grid.shape, bool) if mask is None else mask
        if (w[where] <= 0).any():
            raise ValueError("weight must be positive on the restriction set")
        vals = vals * w
    if mask is not None:
        vals = np.where(mask, vals, 0.0)
    return vals


def _lp(vals: np.ndarray, weights: np.ndarray, p, axes) -> np.ndarray:
    """Weighted discrete ``L_p`` norm over ``axes`` (vals >= 0)."""
    if p == INF:
        return vals.max(axis=axes)
    p = float(p)
    m = vals.max(axis=axes, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    s = np.sum(weights * (vals / safe) ** p, axis=axes)
    return np.squeeze(m, axis=axes) * s ** (1.0 / p)


def mixed_norm(u: GridFunction, spec: MixedNormSpec) -> float:
    """Iterated trapezoid-rule norm of ``w u`` in the resolved order."""
    g = u.grid
    vals = _integrand(u, spec)
    if np.isinf(vals).any():
        return math.inf
    ws, wt = g.trapezoid_weights()
    space_axes = tuple(range(g.n))
    p, q = spec.exponents.p, spec.exponents.q
    if spec.resolved_order() == "space_outer":
        inner = _lp(vals, wt, q, axes=-1)
        return float(_lp(inner, ws, p, axes=space_axes))
    inner = _lp(vals, ws[..., None], p, axes=space_axes)
    return float(_lp(inner, wt, q, axes=0))


def mixed_norm_oracle(u: GridFunction, spec: MixedNormSpec) -> float:
    """Explicit nested-loop evaluation of the same iterated sum (small grids only)."""
    g = u.grid
    size = int(np.prod(g.shape))
    if size > ORACLE_MAX_NODES:
        raise ValueError(f"grid too large for the oracle: {size} > {ORACLE_MAX_NODES} nodes")
    vals = _integrand(u, spec)
    ws, wt = g.trapezoid_weights()
    p, q = spec.exponents.p, spec.exponents.q
    spatial = list(np.ndindex(*g.spatial_shape))

    def reduce(terms, e):
        # terms: list of (weight, value)
        if e == INF:
            return max(v for _, v in terms)
        acc = 0.0
        for w, v in terms:
            acc += w * v ** float(e)
        return acc ** (1.0 / float(e))

    if spec.resolved_order() == "space_outer":
        outer = []
        for s in spatial:
            inner = [(wt[k], vals[s + (k,)]) for k in range(g.Nt)]
            outer.append((ws[s], reduce(inner, q)))
        return float(reduce(outer, p))
    outer = []
    for k in range(g.Nt):
        inner = [(ws[s], vals[s + (k,)]) for s in spatial]
        outer.append((wt[k], reduce(inner, p)))
    return float(reduce(outer, q))


def embedding_check(u: GridFunction, p, q, rtol: float = 1e-12):
    """Both iterated norms for ``p < q`` and whether time-outer <= space-outer."""
    e = ExponentPair(p, q)
    if not (e.finite and e.p < e.q):
        raise ValueError(f"embedding check needs finite p < q, got {e}")
    so = mixed_norm(u, MixedNormSpec(e, "space_outer"))
    to = mixed_norm(u, MixedNormSpec(e, "time_outer"))
    return so, to, to <= so * (1 + rtol)
