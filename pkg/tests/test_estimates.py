import math

import numpy as np
import pytest

from parabolic_mp.estimates import (
    bony_check,
    drift_norm,
    estimate_rhs,
    radial_drift_norm_exact,
    singular_drift_counterexample,
    verify_bound,
)
from parabolic_mp.families import build_family, constant, random_operator, singular_drift
from parabolic_mp.grid import GridFunction, build_cylinder, positivity_set
from parabolic_mp.mixed_norm import MixedNormSpec, mixed_norm_oracle
from parabolic_mp.operator import ExponentPair, apply_operator, scale_operator
from parabolic_mp.solver import solve_forward


def _bump(g):
    return g.sample(lambda x, t: np.exp(-4 * sum(xi**2 for xi in x)) * t)


class TestEstimateRhs:
    def test_nonpositive_u(self):
        g = build_cylinder(1, 1.0, 1.0, 21, 11)
        u = GridFunction(g, -_bump(g).values)
        assert estimate_rhs(build_family("heat", g), u, ExponentPair("inf", "inf")) == 0.0

    def test_sup_weight_c(self):
        g = build_cylinder(1, 1.0, 1.0, 21, 11)
        L = constant(g, c=1.0)
        u = solve_forward(L, g.sample(lambda x, t: np.cos(3 * x[0]) + 0 * t))
        Lu = apply_operator(L, u).filled()
        Qu = positivity_set(u).membership
        expected = np.maximum(Lu, 0)[Qu].max()
        assert estimate_rhs(L, u, ExponentPair("inf", "inf")) == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize("n", [1, 2])
    def test_unit_weight_against_oracle(self, n):
        g = build_cylinder(n, 1.0, 1.0, 11, 7)
        L = build_family("heat", g)
        u = solve_forward(L, g.sample(lambda x, t: np.sin(2 * x[0] + t)))
        Lu = apply_operator(L, u).filled()
        e = ExponentPair(n + 1, n + 1)
        spec = MixedNormSpec(e, restriction=positivity_set(u))
        oracle = mixed_norm_oracle(GridFunction(g, np.maximum(Lu, 0)), spec)
        assert estimate_rhs(L, u, e) == pytest.approx(oracle, rel=1e-12)

    def test_positive_on_boundary_rejected(self):
        g = build_cylinder(1, 1.0, 1.0, 11, 5)
        with pytest.raises(ValueError, match="boundary"):
            estimate_rhs(constant(g), GridFunction(g, np.ones(g.shape)), ExponentPair("inf", "inf"))

    def test_inadmissible(self):
        g = build_cylinder(1, 1.0, 1.0, 11, 5)
        with pytest.raises(ValueError):
            estimate_rhs(constant(g), g.zeros(), ExponentPair(1, 2))

    def test_monotone_in_integrand(self):
        g = build_cylinder(1, 1.0, 1.0, 21, 11)
        L = constant(g, c=1.0)
        f1 = g.sample(lambda x, t: 1 + 0 * x[0] * t)
        f2 = GridFunction(g, 2 * f1.values)
        e = ExponentPair(2, 2)
        u1, u2 = solve_forward(L, f1), solve_forward(L, f2)
        # same positivity set, doubled (Lu)+
        assert estimate_rhs(L, u2, e) == pytest.approx(2 * estimate_rhs(L, u1, e), rel=1e-10)

    def test_sign_symmetry(self):
        g = build_cylinder(1, 1.0, 1.0, 21, 11)
        L = constant(g, c=0.5, b=1.0)
        u = solve_forward(L, g.sample(lambda x, t: np.sin(4 * x[0]) + 0 * t))
        mu = GridFunction(g, -u.values)
        Lu = apply_operator(L, u).filled()
        neg = np.maximum(-Lu, 0)
        e = ExponentPair(3, 3)
        spec = MixedNormSpec(e, weight=None, restriction=positivity_set(mu))
        weight = (1.0 ** (1 / 3)) * (1.0 ** (1 / 3)) * 0.5 ** (1 - 1 / 3 - 1 / 3)
        expected = mixed_norm_oracle(GridFunction(g, neg / weight), spec)
        assert estimate_rhs(L, mu, e) == pytest.approx(expected, rel=1e-12)


class TestVerifyBound:
    def test_nonpositive_forcing(self):
        g = build_cylinder(2, 1.0, 1.0, 15, 9)
        f = g.sample(lambda x, t: -1 - x[0] ** 2 + 0 * t)
        rep = verify_bound(random_operator(g, seed=0), f, ExponentPair(3, 3))
        assert rep.lhs_sup == 0.0 and rep.ratio == 0.0

    def test_sup_over_c(self):
        g = build_cylinder(1, 1.0, 1.0, 41, 41)
        L = constant(g, c=1.0)
        rep = verify_bound(L, g.sample(lambda x, t: 1 + 0 * x[0] * t), ExponentPair("inf", "inf"))
        assert 0 < rep.lhs_sup <= 1.0 and rep.ratio <= 1.0

    def test_report_fields(self):
        g = build_cylinder(2, 1.0, 1.0, 15, 9)
        L = build_family("composite", g, parts="singular:alpha=1,strength=0.5,p=n,q=inf; "
                                               "constant:value=1,p=inf,q=inf")
        rep = verify_bound(L, _bump(g), ExponentPair(3, 3), [ExponentPair(2, "inf")])
        d = rep.to_dict()
        assert d["hypotheses"] == "ok"
        assert [x["part"] for x in rep.drift_norms] == ["total", 0, 1]
        assert all(math.isfinite(x["norm"]) for x in rep.drift_norms)

    def test_hypotheses_violated_flag(self):
        g = build_cylinder(1, 1.0, 1.0, 15, 9)
        L = constant(g, c=0.0)
        rep = verify_bound(L, _bump(g), ExponentPair("inf", "inf"))
        assert not rep.hypotheses_ok
        assert rep.to_dict()["hypotheses"] == "hypotheses violated"

    def test_scaling_invariance(self):
        g = build_cylinder(2, 1.0, 1.0, 15, 9)
        L = random_operator(g, seed=7)
        phi = 1 + 0.5 * np.cos(np.broadcast_to(g.spatial_coords()[0], g.shape) + np.broadcast_to(g.time_coords(), g.shape))
        f = _bump(g)
        for pair in [(3, 3), (2, "inf"), ("inf", "inf"), ("inf", 1)]:
            e = ExponentPair(*pair)
            r1 = verify_bound(L, f, e)
            r2 = verify_bound(scale_operator(L, phi), GridFunction(g, phi * f.values), e)
            assert r1.ratio == pytest.approx(r2.ratio, rel=1e-8)
            assert r1.degeneracy["passed"] == r2.degeneracy["passed"]

    def test_rescaling_bound(self):
        g = build_cylinder(1, 1.0, 1.0, 41, 41)
        L = constant(g, sigma=1.0, c=-1.0, kappa=2.0)
        rep = verify_bound(L, _bump(g), ExponentPair("inf", 1))
        assert rep.rescale_factor == pytest.approx(math.exp(2.0))
        assert rep.kappa == 2.0
        assert rep.u_sup >= rep.lhs_sup > 0


class TestBony:
    def test_interior_max_heat(self):
        g = build_cylinder(1, 1.0, 1.0, 41, 41)
        u = g.sample(lambda x, t: 1 - x[0] ** 2 - (t - 0.5) ** 2)
        res = bony_check(build_family("heat", g), u)
        assert res.verdict == "pass"
        assert res.max_location == (20, 20)
        # at the maximum D_t u = 0 in the limit and -u_xx = 2: ratio close to 2/(1 + 1)
        assert res.sup_value >= 0

    def test_negative(self):
        g = build_cylinder(1, 1.0, 1.0, 11, 5)
        assert bony_check(constant(g), GridFunction(g, -np.ones(g.shape))).verdict == "not-applicable"

    def test_max_on_final_slice(self):
        g = build_cylinder(1, 1.0, 1.0, 11, 5)
        u = g.sample(lambda x, t: t + 0 * x[0])
        assert bony_check(constant(g), u).verdict == "not-applicable"

    def test_max_on_lateral_boundary(self):
        g = build_cylinder(1, 1.0, 1.0, 11, 5)
        u = g.sample(lambda x, t: x[0] + 0 * t)
        assert bony_check(constant(g), u).verdict == "not-applicable"


class TestCounterexample:
    @pytest.mark.parametrize("n", [1, 2])
    def test_alpha_two(self, n):
        rep = singular_drift_counterexample(2.0, n, 81, 81, study_Nx=(41, 81, 161))
        assert rep.U_at_0_1 == 0.5 and rep.U_node_0_1 == 0.5
        assert rep.boundary_max <= 1e-12
        assert rep.LU_max_outside_ball <= -0.4
        assert rep.divergent and rep.reproduced
        assert not rep.naive_bound_certified
        assert rep.to_dict()["h_norm_flag"] == "divergent"

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            singular_drift_counterexample(2.5)
        with pytest.raises(ValueError):
            singular_drift_counterexample(0.0)

    def test_alpha_below_two_not_divergent(self):
        rep = singular_drift_counterexample(1.0, 2, 41, 41, study_Nx=(41, 81, 161))
        assert not rep.divergent

    def test_alpha_one_norm_two_d(self):
        vals = []
        for N in (41, 81, 161):
            g = build_cylinder(2, 1.0, 1.0, N, 3)
            vals.append(drift_norm(singular_drift(g, 1.0), ExponentPair(2, "inf"), restriction=g.domain_mask()))
        exact = radial_drift_norm_exact(1.0, 2)
        assert exact == pytest.approx(3 * math.sqrt(math.pi))
        assert max(vals) / min(vals) - 1 < 0.01
        assert all(abs(v / exact - 1) < 0.01 for v in vals)

    def test_alpha_one_norm_one_d(self):
        # the regularized drift vanishes at the origin node, a defect of exactly 2 hx
        for N in (41, 81, 161):
            g = build_cylinder(1, 1.0, 1.0, N, 3)
            v = drift_norm(singular_drift(g, 1.0), ExponentPair(1, "inf"), restriction=g.domain_mask())
            assert v == pytest.approx(4.0 - 2 * g.hx, rel=1e-12)

    def test_exact_norm_formula(self):
        assert radial_drift_norm_exact(1.0, 1) == pytest.approx(4.0)
        assert radial_drift_norm_exact(1.5, 1) == pytest.approx(8.0)
        assert radial_drift_norm_exact(2.0, 2) == math.inf
