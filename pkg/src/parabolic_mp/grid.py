"""Space-time cylinder grids, grid functions and node classification.

The ball ``B_R`` is embedded in the box ``[-R, R]^n``; every node with
``|x| >= R`` is treated as lateral boundary.  Grid functions store values
with shape ``spatial_shape + (Nt,)`` so the time index is always last.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

__all__ = [
    "Cylinder",
    "GridFunction",
    "NodeKind",
    "ParabolicBoundaryMask",
    "PositivitySet",
    "build_cylinder",
    "parabolic_boundary",
    "positivity_set",
]

# relative slack used when deciding |x| >= R on node coordinates
_RADIUS_RTOL = 1e-12


class NodeKind(IntEnum):
    INTERIOR = 0
    LATERAL = 1
    INITIAL = 2
    FINAL = 3


@dataclass(frozen=True)
class Cylinder:
    """Uniform tensor grid on ``[-R, R]^n x [0, T]``."""

    n: int
    R: float
    T: float
    Nx: int
    Nt: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"spatial dimension must be 1 or 2, got {self.n}")
        if not (self.R > 0 and np.isfinite(self.R)):
            raise ValueError(f"R must be positive, got {self.R}")
        if not (self.T > 0 and np.isfinite(self.T)):
            raise ValueError(f"T must be positive, got {self.T}")
        if self.Nx < 3:
            raise ValueError(f"need at least 3 nodes per spatial axis, got Nx={self.Nx}")
        if self.Nt < 2:
            raise ValueError(f"need at least 2 time levels, got Nt={self.Nt}")

    @property
    def hx(self) -> float:
        return 2.0 * self.R / (self.Nx - 1)

    @property
    def ht(self) -> float:
        return self.T / (self.Nt - 1)

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return (self.Nx,) * self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return self.spatial_shape + (self.Nt,)

    @property
    def x(self) -> np.ndarray:
        """1D coordinates along each spatial axis."""
        return np.linspace(-self.R, self.R, self.Nx)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.Nt)

    def spatial_coords(self) -> list[np.ndarray]:
        """Coordinate arrays of shape ``spatial_shape + (1,)``, one per axis."""
        mesh = np.meshgrid(*([self.x] * self.n), indexing="ij")
        return [m[..., None] for m in mesh]

    def time_coords(self) -> np.ndarray:
        """Time coordinates broadcastable against grid arrays."""
        return self.t.reshape((1,) * self.n + (self.Nt,))

    def radius(self) -> np.ndarray:
        """``|x|`` at every spatial node, shape ``spatial_shape``."""
        return np.sqrt(sum(c[..., 0] ** 2 for c in self.spatial_coords()))

    def inside(self) -> np.ndarray:
        """Spatial nodes of the open ball ``|x| < R``."""
        return self.radius() < self.R * (1 - _RADIUS_RTOL)

    def closure(self) -> np.ndarray:
        """Spatial nodes of the closed ball ``|x| <= R``."""
        return self.radius() <= self.R * (1 + _RADIUS_RTOL)

    def domain_mask(self, closed: bool = True) -> np.ndarray:
        """Space-time node mask of the cylinder (closed ball by default)."""
        s = self.closure() if closed else self.inside()
        return np.broadcast_to(s[..., None], self.shape).copy()

    def trapezoid_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Spatial (tensor product) and temporal trapezoid weights."""
        wx = np.full(self.Nx, self.hx)
        wx[[0, -1]] *= 0.5
        ws = wx
        if self.n == 2:
            ws = np.multiply.outer(wx, wx)
        wt = np.full(self.Nt, self.ht)
        wt[[0, -1]] *= 0.5
        return ws, wt

    def to_record(self) -> dict:
        return {"n": self.n, "R": self.R, "T": self.T, "Nx": self.Nx, "Nt": self.Nt}

    @classmethod
    def from_record(cls, rec: dict) -> "Cylinder":
        return cls(int(rec["n"]), float(rec["R"]), float(rec["T"]), int(rec["Nx"]), int(rec["Nt"]))

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.shape))

    def sample(self, func) -> "GridFunction":
        """Evaluate ``func(x, t)`` where ``x`` is the list of coordinate arrays."""
        vals = func(self.spatial_coords(), self.time_coords())
        return GridFunction(self, np.broadcast_to(np.asarray(vals, dtype=float), self.shape).copy())


def build_cylinder(n: int, R: float, T: float, Nx: int, Nt: int) -> Cylinder:
    return Cylinder(int(n), float(R), float(T), int(Nx), int(Nt))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real node values on a cylinder grid.

    Parameters
    ----------
    grid
        The underlying :class:`Cylinder`.
    values
        Array of shape ``grid.shape``.
    defined
        Optional mask of nodes carrying meaningful values (e.g. where a
        difference stencil fits).  Values elsewhere are ignored and read as 0.
    support
        Optional mask; the function is extended by zero outside it.
    flagged
        Optional mask of nodes where ``+inf`` is a deliberate, flagged value.
    """

    grid: Cylinder
    values: np.ndarray
    defined: np.ndarray | None = None
    support: np.ndarray | None = None
    flagged: np.ndarray | None = field(default=None)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid shape {self.grid.shape}")
        for name in ("defined", "support", "flagged"):
            m = getattr(self, name)
            if m is not None:
                m = np.asarray(m, dtype=bool)
                if m.shape != self.grid.shape:
                    raise ValueError(f"{name} mask has shape {m.shape}, expected {self.grid.shape}")
                m.setflags(write=False)
                object.__setattr__(self, name, m)
        check = np.ones(self.grid.shape, bool) if self.defined is None else self.defined
        bad = check & ~np.isfinite(vals)
        if self.flagged is not None:
            bad &= ~(self.flagged & (vals == np.inf))
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ValueError(f"non-finite value at node {idx}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def filled(self) -> np.ndarray:
        """Values with zeros at undefined nodes and outside the support."""
        keep = np.ones(self.grid.shape, bool)
        if self.defined is not None:
            keep &= self.defined
        if self.support is not None:
            keep &= self.support
        return np.where(keep, self.values, 0.0)

    def at(self, index: tuple[int, ...]) -> float:
        """Value at a node index, honouring extension by zero."""
        if self.support is not None and not self.support[index]:
            return 0.0
        if self.defined is not None and not self.defined[index]:
            return 0.0
        return float(self.values[index])

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, values)

    def restrict(self, mask: np.ndarray) -> "GridFunction":
        support = np.asarray(mask, bool)
        if self.support is not None:
            support = support & self.support
        return GridFunction(self.grid, self.values, self.defined, support, self.flagged)

    def __neg__(self):
        return GridFunction(self.grid, -self.filled())

    def __add__(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            return GridFunction(self.grid, self.filled() + other.filled())
        return GridFunction(self.grid, self.filled() + other)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        return GridFunction(self.grid, self.filled() * float(scalar))

    __rmul__ = __mul__


def _same_grid(u: GridFunction, v: GridFunction):
    if u.grid != v.grid:
        raise ValueError(f"grid mismatch: {u.grid} vs {v.grid}")


@dataclass(frozen=True, eq=False)
class ParabolicBoundaryMask:
    grid: Cylinder
    flags: np.ndarray

    @property
    def boundary(self) -> np.ndarray:
        return (self.flags == NodeKind.LATERAL) | (self.flags == NodeKind.INITIAL)

    @property
    def interior(self) -> np.ndarray:
        """Complement of the parabolic boundary (final slice included)."""
        return ~self.boundary


def parabolic_boundary(c: Cylinder) -> ParabolicBoundaryMask:
    """Classify nodes as interior, lateral, initial or final.

    Lateral wins over initial at ``|x| >= R``; box nodes outside the ball
    are lateral at every time level.
    """
    flags = np.full(c.shape, NodeKind.INTERIOR, dtype=np.int8)
    flags[..., 0] = NodeKind.INITIAL
    flags[..., -1] = NodeKind.FINAL
    flags[~c.inside()] = NodeKind.LATERAL
    flags.setflags(write=False)
    return ParabolicBoundaryMask(c, flags)


@dataclass(frozen=True, eq=False)
class PositivitySet:
    grid: Cylinder
    membership: np.ndarray

    def __len__(self):
        return int(self.membership.sum())

    def section(self, k: int) -> np.ndarray:
        """Spatial section of the set at time level ``k``."""
        return self.membership[..., k]


def positivity_set(u: GridFunction, tol_pos: float = 0.0) -> PositivitySet:
    m = u.filled() > tol_pos
    m.setflags(write=False)
    return PositivitySet(u.grid, m)
