import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parabolic_mp.families import constant, random_operator, singular_drift
from parabolic_mp.grid import GridFunction, build_cylinder
from parabolic_mp.operator import apply_operator
from parabolic_mp.solver import SchemeConfig, SolverError, solve_barrier_problem, solve_forward


def _mms_error(Nx, Nt, u_exact, L_factory, cfg, n=1):
    g = build_cylinder(n, 1.0, 1.0, Nx, Nt)
    L = L_factory(g)
    ue = g.sample(u_exact)
    # forcing from the continuous operator: evaluate L u* on a fine-difference free formula
    f = GridFunction(g, _continuous_Lu(g, u_exact))
    u = solve_forward(L, f, cfg, boundary=ue)
    inside = np.broadcast_to(g.inside()[..., None], g.shape)
    return float(np.abs(u.values - ue.values)[inside].max())


def _continuous_Lu(g, u_exact, h=1e-4):
    """Heat operator D_t u - u_xx of a smooth function by high-accuracy differences."""
    x = g.spatial_coords()[0]
    t = g.time_coords()
    ut = (u_exact([x], t + h) - u_exact([x], t - h)) / (2 * h)
    uxx = (u_exact([x + h], t) - 2 * u_exact([x], t) + u_exact([x - h], t)) / h**2
    return np.broadcast_to(ut - uxx, g.shape)


def _sin_t(x, t):
    return np.sin(np.pi * (x[0] + 1.0) / 2.0) * t


def _sin_sin(x, t):
    return np.sin(np.pi * (x[0] + 1.0) / 2.0) * np.sin(2 * t)


def _heat(g):
    return constant(g)


def test_zero_forcing_gives_zero():
    g = build_cylinder(2, 1.0, 1.0, 15, 8)
    u = solve_forward(random_operator(g, seed=1), g.zeros())
    assert (u.values == 0).all()


def test_mms_second_order_in_space():
    """u* = sin(pi (x+R)/(2R)) t: linear in t, so only the hx^2 error is visible."""
    errs = [_mms_error(N, 11, _sin_t, _heat, SchemeConfig()) for N in (21, 41, 81)]
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(abs(r - 2) <= 0.3 for r in rates), rates


def test_mms_theta_one_first_order_in_time():
    errs = [_mms_error(201, N, _sin_sin, _heat, SchemeConfig()) for N in (11, 21, 41)]
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(abs(r - 1) <= 0.3 for r in rates), rates


def test_mms_crank_nicolson_second_order():
    cfg = SchemeConfig(theta=0.5, drift_scheme="central")
    errs = [_mms_error(N, N, _sin_sin, _heat, cfg) for N in (21, 41, 81)]
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(abs(r - 2) <= 0.3 for r in rates), rates


def test_richardson_triplet_rate():
    sols = []
    for N in (21, 41, 81):
        g = build_cylinder(1, 1.0, 1.0, N, 11)
        f = GridFunction(g, _continuous_Lu(g, _sin_t))
        sols.append(solve_forward(constant(g), f, boundary=g.sample(_sin_t)))
    # common nodes of the coarse grid
    c = sols[0].values
    m = sols[1].values[::2]
    fn = sols[2].values[::4]
    rate = math.log2(np.abs(c - m).max() / np.abs(m - fn).max())
    assert abs(rate - 2) <= 0.3


def _fourier_B(x, t, terms=20001):
    """Series solution of B_t - B_xx = 1 on (-1, 1) with zero data."""
    k = np.arange(1, terms + 1, 2)
    lam = (k * np.pi / 2) ** 2
    coef = 4 / (k * np.pi)
    return float(np.sum(coef / lam * (1 - np.exp(-lam * t)) * np.sin(k * np.pi * (x + 1) / 2)))


def test_barrier_problem_against_fourier_series():
    g = build_cylinder(1, 1.0, 1.0, 161, 161)
    B = solve_barrier_problem(constant(g), np.ones(g.shape))
    exact = _fourier_B(0.0, 1.0)
    assert B.values[80, -1] == pytest.approx(exact, rel=0.05)
    # and much closer than the 5% the check allows
    assert B.values[80, -1] == pytest.approx(exact, rel=5e-3)


def test_barrier_problem_zero_rhs_and_sign():
    g = build_cylinder(2, 1.0, 1.0, 15, 8)
    L = random_operator(g, seed=4)
    assert (solve_barrier_problem(L, np.zeros(g.shape)).values == 0).all()
    B = solve_barrier_problem(L, L.b_norm())
    assert B.values.min() >= -1e-14


def test_barrier_problem_singular_drift_stable():
    sups = []
    for N in (21, 41, 81, 161):
        g = build_cylinder(1, 1.0, 1.0, N, N)
        L = singular_drift(g, 1.0)
        B = solve_barrier_problem(L, L.b_norm())
        assert np.isfinite(B.values).all()
        sups.append(B.values.max())
    # first-order (upwind) convergence: successive increments roughly halve
    incr = np.diff(sups)
    assert (incr[1:] / incr[:-1] < 0.6).all()


@settings(max_examples=15)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 2))
def test_discrete_maximum_and_comparison(seed, n):
    g = build_cylinder(n, 1.0, 1.0, 13, 9)
    L = random_operator(g, seed=seed)
    r = np.random.default_rng(seed)
    f1 = GridFunction(g, r.normal(size=g.shape))
    f2 = GridFunction(g, f1.values + np.abs(r.normal(size=g.shape)))
    fneg = GridFunction(g, -np.abs(f1.values))
    assert solve_forward(L, fneg).values.max() <= 1e-12
    u1, u2 = solve_forward(L, f1), solve_forward(L, f2)
    assert (u1.values <= u2.values + 1e-12).all()


def test_linearity_of_solve(rng):
    g = build_cylinder(2, 1.0, 1.0, 13, 7)
    L = random_operator(g, seed=9)
    f = GridFunction(g, rng.normal(size=g.shape))
    h = GridFunction(g, rng.normal(size=g.shape))
    u = solve_forward(L, GridFunction(g, 2 * f.values - 3 * h.values)).values
    v = 2 * solve_forward(L, f).values - 3 * solve_forward(L, h).values
    assert np.abs(u - v).max() <= 1e-10 * max(1.0, np.abs(v).max())


def test_residual_reported_in_scheme():
    g = build_cylinder(2, 1.0, 1.0, 17, 9)
    L = random_operator(g, seed=2)
    f = g.sample(lambda x, t: np.cos(x[0]) + t + 0 * x[1])
    u, info = solve_forward(L, f, return_info=True)
    assert info.residual < 1e-10 and info.monotone
    Lu = apply_operator(L, u, "upwind", "seven_point")
    inside = Lu.defined & np.broadcast_to(g.inside()[..., None], g.shape)
    assert np.abs(Lu.values - f.values)[inside].max() < 1e-10


def test_iterative_matches_direct():
    g = build_cylinder(2, 1.0, 1.0, 21, 6)
    L = random_operator(g, seed=5)
    f = g.sample(lambda x, t: 1 + x[0] * x[1] + t)
    u1 = solve_forward(L, f)
    u2 = solve_forward(L, f, SchemeConfig(linear_solver="iterative", tol=1e-13))
    assert np.abs(u1.values - u2.values).max() < 1e-9


def test_requires_positive_sigma():
    g = build_cylinder(1, 1.0, 1.0, 9, 5)
    with pytest.raises(SolverError):
        solve_forward(constant(g, sigma=0.0, c=1.0), g.zeros())


def test_theta_half_not_certified_monotone():
    g = build_cylinder(1, 1.0, 1.0, 9, 5)
    _, info = solve_forward(constant(g), g.zeros(), SchemeConfig(theta=0.5), return_info=True)
    assert not info.monotone


def test_bad_config():
    with pytest.raises(ValueError):
        SchemeConfig(theta=1.5)
    with pytest.raises(ValueError):
        SchemeConfig(drift_scheme="sideways")
