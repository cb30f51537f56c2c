"""Named coefficient families sampled on a cylinder grid."""
from __future__ import annotations

import inspect

import numpy as np

from .grid import Cylinder
from .operator import ExponentPair, OperatorCoefficients

__all__ = ["FAMILIES", "build_family", "parse_parts"]


def _scalar(grid: Cylinder, value) -> np.ndarray:
    return np.full(grid.spatial_shape + (1,), float(value))


def _identity(grid: Cylinder, scale=1.0) -> np.ndarray:
    return np.broadcast_to(float(scale) * np.eye(grid.n), grid.spatial_shape + (1, grid.n, grid.n)).copy()


def _vector(grid: Cylinder, value) -> np.ndarray:
    v = np.broadcast_to(np.asarray(value, dtype=float), (grid.n,))
    return np.broadcast_to(v, grid.spatial_shape + (1, grid.n)).copy()


def _matrix(grid: Cylinder, a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return _identity(grid, a)
    if a.shape == (grid.n,):
        a = np.diag(a)
    return np.broadcast_to(a, grid.spatial_shape + (1, grid.n, grid.n)).copy()


def _radial_drift(grid: Cylinder, alpha: float, strength: float, eps_sing: float | None):
    """``strength * x / max(|x|, eps)^alpha``, never evaluating ``|x| = 0``."""
    eps = grid.hx / 2 if eps_sing is None else float(eps_sing)
    xs = grid.spatial_coords()
    r = np.sqrt(sum(x**2 for x in xs))
    scale = strength / np.maximum(r, eps) ** alpha
    return np.stack([x * scale for x in xs], axis=-1)


def heat(grid: Cylinder) -> OperatorCoefficients:
    return constant(grid, name="heat")


def constant(grid: Cylinder, sigma=1.0, a=1.0, b=0.0, c=0.0, kappa=0.0, name="constant") -> OperatorCoefficients:
    return OperatorCoefficients(
        grid, _scalar(grid, sigma), _matrix(grid, a), (_vector(grid, b),), _scalar(grid, c),
        kappa=float(kappa), name=name,
        params={"sigma": sigma, "a": a, "b": b, "c": c, "kappa": kappa},
    )


def singular_drift(grid: Cylinder, alpha: float, strength: float | None = None, sigma=1.0, a=1.0, c=1.0,
                   eps_sing: float | None = None) -> OperatorCoefficients:
    """Radial drift ``strength * x_i / |x|^alpha`` (``strength`` defaults to ``n + 1``)."""
    strength = grid.n + 1 if strength is None else float(strength)
    b = _radial_drift(grid, float(alpha), strength, eps_sing)
    return OperatorCoefficients(
        grid, _scalar(grid, sigma), _matrix(grid, a), (b,), _scalar(grid, c), name="singular_drift",
        params={"alpha": alpha, "strength": strength, "sigma": sigma, "a": a, "c": c,
                "eps_sing": grid.hx / 2 if eps_sing is None else eps_sing},
    )


def anisotropic(grid: Cylinder, lam_min=0.5, lam_max=2.0, angle=0.0, twist=0.0, sigma=1.0, c=0.0,
                drift=0.0) -> OperatorCoefficients:
    """Diffusion with eigenvalues ``lam_min, lam_max`` along axes rotated by ``angle + twist*|x|``.

    In 1D the scalar diffusion oscillates between the two eigenvalues
    with spatial frequency ``twist``.
    """
    xs = grid.spatial_coords()
    if grid.n == 1:
        x = xs[0]
        a = lam_min + (lam_max - lam_min) * 0.5 * (1 + np.cos(np.pi * twist * x / grid.R))
        a = a[..., None, None]
    else:
        r = np.sqrt(xs[0] ** 2 + xs[1] ** 2)
        th = angle + twist * r
        cs, sn = np.cos(th), np.sin(th)
        a = np.empty(grid.spatial_shape + (1, 2, 2))
        a[..., 0, 0] = lam_max * cs**2 + lam_min * sn**2
        a[..., 1, 1] = lam_max * sn**2 + lam_min * cs**2
        a[..., 0, 1] = a[..., 1, 0] = (lam_max - lam_min) * cs * sn
    return OperatorCoefficients(
        grid, _scalar(grid, sigma), a, (_vector(grid, drift),), _scalar(grid, c), name="anisotropic",
        params={"lam_min": lam_min, "lam_max": lam_max, "angle": angle, "twist": twist,
                "sigma": sigma, "c": c, "drift": drift},
    )


def degenerate(grid: Cylinder, sigma=1.0, c=1.0, a_scale=1.0, a_power=2.0, drift=0.0) -> OperatorCoefficients:
    """Diffusion ``a_scale (|x|/R)^a_power I`` vanishing at the origin."""
    r = np.sqrt(sum(x**2 for x in grid.spatial_coords()))
    a = (a_scale * (r / grid.R) ** a_power)[..., None, None] * np.eye(grid.n)
    return OperatorCoefficients(
        grid, _scalar(grid, sigma), a, (_vector(grid, drift),), _scalar(grid, c), name="degenerate",
        params={"sigma": sigma, "c": c, "a_scale": a_scale, "a_power": a_power, "drift": drift},
    )


def _part_field(grid: Cylinder, part: dict) -> np.ndarray:
    kind = part.get("kind", "constant")
    xs = grid.spatial_coords()
    s = float(part.get("strength", 1.0))
    if kind == "singular":
        return _radial_drift(grid, float(part["alpha"]), s, part.get("eps_sing"))
    if kind == "constant":
        return _vector(grid, part.get("value", s))
    if kind == "linear":
        return np.stack([s * x for x in xs], axis=-1)
    if kind == "swirl":
        if grid.n != 2:
            raise ValueError("swirl drift needs n = 2")
        return np.stack([-s * xs[1], s * xs[0]], axis=-1)
    if kind == "pulsating":
        # time-dependent: s * sin(omega t) along the first axis
        w = float(part.get("omega", np.pi))
        t = grid.time_coords()
        comp = s * np.sin(w * t) * np.ones_like(xs[0])
        zeros = [np.zeros_like(comp)] * (grid.n - 1)
        return np.stack([comp, *zeros], axis=-1)
    raise ValueError(f"unknown drift part kind {kind!r}")


def composite(grid: Cylinder, parts, sigma=1.0, a=1.0, c=1.0) -> OperatorCoefficients:
    """Drift given as a sum of parts, each with its own exponent pair.

    ``parts`` is a list of dicts (or a string for :func:`parse_parts`); each
    has a ``kind`` among ``singular, constant, linear, swirl, pulsating``,
    kind-specific parameters and optional ``p``, ``q``.
    """
    if isinstance(parts, str):
        parts = parse_parts(parts)
    fields, exps = [], []
    for part in parts:
        f = _part_field(grid, part)
        if f.shape[grid.n] not in (1, grid.Nt):
            raise ValueError("bad part field shape")
        fields.append(f)
        exps.append(ExponentPair(part["p"], part["q"]) if "p" in part else None)
    return OperatorCoefficients(
        grid, _scalar(grid, sigma), _matrix(grid, a), tuple(fields), _scalar(grid, c),
        part_exponents=tuple(exps), name="composite",
        params={"parts": [dict(p) for p in parts], "sigma": sigma, "a": a, "c": c},
    )


def parse_parts(text: str) -> list[dict]:
    """Parse ``"singular:alpha=1,strength=0.5,p=n,q=inf; constant:value=1,p=inf,q=inf"``.

    The literal ``n`` is allowed for ``p`` and ``q`` and is resolved later
    against the grid dimension by :func:`build_family`.
    """
    parts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        kind, _, rest = chunk.partition(":")
        part: dict = {"kind": kind.strip()}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, _, val = item.partition("=")
            if not _:
                raise ValueError(f"malformed drift part entry {item!r}")
            part[key.strip()] = val.strip()
        parts.append(part)
    return parts


def random_operator(grid: Cylinder, seed=0, delta=0.1, time_dependent=True, drift=True) -> OperatorCoefficients:
    """Smooth random coefficients with every bound certifiable at level ``delta``.

    Ranges: ``sigma, c`` in ``[2 delta, 0.5/delta]``-style bands, eigenvalues
    of ``a`` in ``[2 delta, 0.6/delta]``, ``|a12| <= 0.8 min(a11, a22)``
    (so the seven-point mixed stencil applies) and ``|b| <= 0.5/delta``.
    """
    rng = np.random.default_rng(int(seed))
    xs = grid.spatial_coords()
    t = grid.time_coords() if time_dependent else np.zeros((1,) * grid.n + (1,))

    def smooth():
        # values in [-1, 1]
        k = rng.normal(size=grid.n) * 2.0
        w = rng.normal() * 2.0 if time_dependent else 0.0
        phase = rng.uniform(0, 2 * np.pi)
        arg = sum(ki * x for ki, x in zip(k, xs)) + w * t + phase
        return np.sin(arg) * np.ones(grid.spatial_shape + (t.shape[-1],))

    lo, hi = 2 * delta, 0.5 / delta

    def band(lo_, hi_):
        return lo_ + (hi_ - lo_) * 0.5 * (1 + smooth())

    sigma = band(max(lo, 0.3), min(hi, 3.0))
    c = band(max(lo, 0.2), min(hi, 3.0))
    if grid.n == 1:
        a = band(max(lo, 0.3), min(hi, 3.0))[..., None, None]
    else:
        a11 = band(max(2.5 * lo, 1.0), min(hi, 3.0))
        a22 = band(max(2.5 * lo, 1.0), min(hi, 3.0))
        a12 = 0.8 * smooth() * np.minimum(a11, a22)
        a = np.stack([np.stack([a11, a12], -1), np.stack([a12, a22], -1)], -2)
    if drift:
        bmax = min(0.5 / delta, 4.0) / np.sqrt(grid.n)
        b = np.stack([bmax * smooth() for _ in range(grid.n)], axis=-1)
    else:
        b = np.zeros(sigma.shape + (grid.n,))
    return OperatorCoefficients(grid, sigma, a, (b,), c, name="random",
                                params={"seed": seed, "delta": delta, "time_dependent": time_dependent,
                                        "drift": drift})


FAMILIES = {
    "heat": heat,
    "constant": constant,
    "singular_drift": singular_drift,
    "anisotropic": anisotropic,
    "degenerate": degenerate,
    "composite": composite,
    "random": random_operator,
}


def _resolve_n(v, n):
    return str(n) if isinstance(v, str) and v.strip() == "n" else v


def build_family(name: str, grid: Cylinder, **params) -> OperatorCoefficients:
    """Construct a named coefficient family on ``grid``."""
    try:
        factory = FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown coefficient family {name!r}; known: {sorted(FAMILIES)}") from None
    accepted = set(inspect.signature(factory).parameters) - {"grid"}
    unknown = sorted(set(params) - accepted)
    if unknown:
        raise ValueError(f"family {name!r} does not take {unknown}; accepted: {sorted(accepted)}")
    if name == "composite" and "parts" in params:
        parts = params["parts"]
        if isinstance(parts, str):
            parts = parse_parts(parts)
        params["parts"] = [{k: _resolve_n(v, grid.n) for k, v in p.items()} for p in parts]
    return factory(grid, **params)
