import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parabolic_mp.grid import GridFunction, build_cylinder, positivity_set
from parabolic_mp.mixed_norm import MixedNormSpec, embedding_check, mixed_norm, mixed_norm_oracle
from parabolic_mp.operator import ExponentPair

EXPONENTS = st.sampled_from([1, 1.5, 2, 3, 4, 7, "inf"])


def _rand(g, seed):
    return GridFunction(g, np.random.default_rng(seed).normal(size=g.shape))


def test_constant_one_d():
    g = build_cylinder(1, 1.0, 1.0, 11, 5)
    u = GridFunction(g, np.ones(g.shape))
    assert mixed_norm(u, MixedNormSpec(ExponentPair(2, "inf"))) == pytest.approx(math.sqrt(2), rel=1e-14)


def test_separable_product_against_analytic():
    # x t on [0, 1] x [0, 1]: restriction to x >= 0 and zero extension
    g = build_cylinder(1, 1.0, 1.0, 801, 801)
    u = g.sample(lambda x, t: x[0] * t)
    mask = np.broadcast_to((g.x >= 0)[:, None], g.shape)
    val = mixed_norm(u, MixedNormSpec(ExponentPair(2, 4), restriction=mask))
    assert val == pytest.approx(3**-0.5 * 5**-0.25, rel=1e-5)
    # ||x||_{L_2(0,1)} ||t||_{L_4(0,1)} evaluates to 0.386097...
    assert val == pytest.approx(0.386097, abs=1e-5)


def test_empty_restriction():
    g = build_cylinder(2, 1.0, 1.0, 7, 4)
    u = GridFunction(g, np.ones(g.shape))
    spec = MixedNormSpec(ExponentPair(3, 2), restriction=positivity_set(-u))
    assert mixed_norm(u, spec) == 0.0


def test_auto_order():
    assert MixedNormSpec(ExponentPair(2, 3)).resolved_order() == "space_outer"
    assert MixedNormSpec(ExponentPair(3, 2)).resolved_order() == "time_outer"
    assert MixedNormSpec(ExponentPair("inf", 2)).resolved_order() == "time_outer"


def test_oracle_examples(rng):
    g = build_cylinder(2, 1.0, 1.0, 8, 8)
    u = GridFunction(g, rng.normal(size=g.shape))
    w = GridFunction(g, rng.uniform(0.1, 2.0, g.shape))
    spec = MixedNormSpec(ExponentPair(3, 2), weight=w)
    assert mixed_norm(u, spec) == pytest.approx(mixed_norm_oracle(u, spec), rel=1e-12)
    assert mixed_norm_oracle(g.zeros(), spec) == 0.0


def test_p_equals_q_is_plain_lp(rng):
    g = build_cylinder(2, 1.0, 1.0, 9, 6)
    u = GridFunction(g, rng.normal(size=g.shape))
    ws, wt = g.trapezoid_weights()
    direct = math.sqrt(float(np.sum(ws[..., None] * wt * u.values**2)))
    for order in ("space_outer", "time_outer", "auto"):
        assert mixed_norm(u, MixedNormSpec(ExponentPair(2, 2), order)) == pytest.approx(direct, rel=1e-12)


def test_oracle_refuses_large_grid():
    g = build_cylinder(2, 1.0, 1.0, 101, 11)
    with pytest.raises(ValueError, match="too large"):
        mixed_norm_oracle(g.zeros(), MixedNormSpec(ExponentPair(2, 2)))


def test_weight_must_be_positive():
    g = build_cylinder(1, 1.0, 1.0, 5, 3)
    w = GridFunction(g, np.zeros(g.shape))
    with pytest.raises(ValueError, match="positive"):
        mixed_norm(GridFunction(g, np.ones(g.shape)), MixedNormSpec(ExponentPair(2, 2), weight=w))


def test_grid_mismatch():
    g1 = build_cylinder(1, 1.0, 1.0, 5, 3)
    g2 = build_cylinder(1, 1.0, 1.0, 7, 3)
    with pytest.raises(ValueError):
        mixed_norm(GridFunction(g1, np.ones(g1.shape)),
                   MixedNormSpec(ExponentPair(2, 2), weight=GridFunction(g2, np.ones(g2.shape))))


class TestEmbedding:
    def test_separable_equality(self):
        g = build_cylinder(1, 1.0, 1.0, 21, 11)
        u = g.sample(lambda x, t: np.cos(x[0]) * (1 + t**2))
        so, to, ok = embedding_check(u, 2, 6)
        assert ok and so == pytest.approx(to, rel=1e-12)

    def test_random_ordered(self, rng):
        g = build_cylinder(1, 1.0, 1.0, 12, 12)
        so, to, ok = embedding_check(GridFunction(g, rng.normal(size=g.shape)), 2, 6)
        assert ok and to < so

    def test_constant_equal(self):
        g = build_cylinder(2, 1.0, 1.0, 6, 5)
        so, to, _ = embedding_check(GridFunction(g, np.full(g.shape, 3.0)), 1.5, 4)
        assert so == pytest.approx(to, rel=1e-12)

    def test_rejects_p_ge_q(self):
        g = build_cylinder(1, 1.0, 1.0, 5, 3)
        with pytest.raises(ValueError):
            embedding_check(g.zeros(), 3, 2)
        with pytest.raises(ValueError):
            embedding_check(g.zeros(), 2, "inf")


@given(seed=st.integers(0, 2**31 - 1), p=EXPONENTS, q=EXPONENTS, lam=st.floats(-1e3, 1e3))
def test_homogeneity(seed, p, q, lam):
    g = build_cylinder(1, 1.0, 1.0, 6, 5)
    u = _rand(g, seed)
    spec = MixedNormSpec(ExponentPair(p, q))
    base = mixed_norm(u, spec)
    scaled = mixed_norm(GridFunction(g, lam * u.values), spec)
    assert scaled == pytest.approx(abs(lam) * base, rel=1e-12, abs=1e-300)


@given(seed=st.integers(0, 2**31 - 1), p=EXPONENTS, q=EXPONENTS)
def test_monotone_triangle_and_restriction(seed, p, q):
    g = build_cylinder(2, 1.0, 1.0, 5, 4)
    r = np.random.default_rng(seed)
    u = GridFunction(g, r.normal(size=g.shape))
    v = GridFunction(g, r.normal(size=g.shape))
    big = GridFunction(g, np.abs(u.values) + np.abs(r.normal(size=g.shape)))
    spec = MixedNormSpec(ExponentPair(p, q))
    nu, nv = mixed_norm(u, spec), mixed_norm(v, spec)
    assert nu <= mixed_norm(big, spec) + 1e-12
    assert mixed_norm(GridFunction(g, u.values + v.values), spec) <= (nu + nv) * (1 + 1e-10)
    s1 = r.random(g.shape) < 0.3
    s2 = s1 | (r.random(g.shape) < 0.3)
    n1 = mixed_norm(u, MixedNormSpec(ExponentPair(p, q), restriction=s1))
    n2 = mixed_norm(u, MixedNormSpec(ExponentPair(p, q), restriction=s2))
    assert n1 <= n2 + 1e-12


def test_large_q_approaches_inf_from_below(rng):
    # box [-1/2, 1/2] x [0, 1]: unit measure in both variables
    g = build_cylinder(1, 0.5, 1.0, 21, 21)
    u = GridFunction(g, rng.uniform(0.5, 1.5, g.shape))
    for p in (2, 3):
        ref = mixed_norm(u, MixedNormSpec(ExponentPair(p, "inf")))
        approx = mixed_norm(u, MixedNormSpec(ExponentPair(p, 1000)))
        assert approx <= ref
        assert approx == pytest.approx(ref, rel=1e-2)


def test_infinite_integrand():
    g = build_cylinder(1, 1.0, 1.0, 5, 3)
    vals = np.zeros(g.shape)
    vals[2, 1] = np.inf
    flag = np.zeros(g.shape, bool)
    flag[2, 1] = True
    u = GridFunction(g, vals, flagged=flag)
    assert mixed_norm(u, MixedNormSpec(ExponentPair(2, 2))) == math.inf
