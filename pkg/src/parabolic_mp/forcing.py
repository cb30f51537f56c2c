"""Right-hand sides ``f(x, t)`` used by the solver and the scenario runner."""
from __future__ import annotations

import numpy as np

from .grid import Cylinder, GridFunction

__all__ = ["FORCINGS", "build_forcing"]


def _r2(x):
    return sum(xi**2 for xi in x)


def constant(grid: Cylinder, value=1.0) -> GridFunction:
    return grid.sample(lambda x, t: float(value) + 0 * t)


def gaussian(grid: Cylinder, amplitude=1.0, width=0.5, t_scale=0.0) -> GridFunction:
    """``amplitude exp(-|x|^2/width^2) (1 + t_scale t)``."""
    return grid.sample(lambda x, t: amplitude * np.exp(-_r2(x) / width**2) * (1 + t_scale * t))


def cosine(grid: Cylinder, amplitude=1.0, k=1.0, omega=0.0) -> GridFunction:
    """Sign-changing ``amplitude cos(pi k x_1 / R) cos(omega t)``."""
    return grid.sample(lambda x, t: amplitude * np.cos(np.pi * k * x[0] / grid.R) * np.cos(omega * t))


def random(grid: Cylinder, seed=0, amplitude=1.0, sign="any") -> GridFunction:
    """Nodewise uniform noise; ``sign`` is ``any``, ``nonpositive`` or ``nonnegative``."""
    rng = np.random.default_rng(int(seed))
    vals = rng.uniform(-1.0, 1.0, grid.shape) * float(amplitude)
    if sign == "nonpositive":
        vals = -np.abs(vals)
    elif sign == "nonnegative":
        vals = np.abs(vals)
    elif sign != "any":
        raise ValueError(f"unknown sign option {sign!r}")
    return GridFunction(grid, vals)


FORCINGS = {"constant": constant, "gaussian": gaussian, "cosine": cosine, "random": random}


def build_forcing(kind: str, grid: Cylinder, **params) -> GridFunction:
    try:
        factory = FORCINGS[kind]
    except KeyError:
        raise ValueError(f"unknown forcing {kind!r}; known: {sorted(FORCINGS)}") from None
    return factory(grid, **params)
