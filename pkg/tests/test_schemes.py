import numpy as np
import pytest

from pbmsplit.analytic import (G1_case2, G2_case2, MAP1_CASE2, MAP2_CASE2, CaseDefinition, exact_case1,
                               f0, get_case)
from pbmsplit.core import (ClosedForm, Constant, Coupled, ProblemSpec, SeparableTimeSize, TimeOnly)
from pbmsplit.errors import CompatibilityError, SetupError
from pbmsplit.harness import rmse, run_case
from pbmsplit.schemes import COMPATIBILITY, SchemeId, advance, lie_split_step
from pbmsplit.kernels import shift_axis


def compatible_pairs():
    for cid in ("case1", "case2", "case3", "case4", "case5"):
        p = get_case(cid).problem
        for s in SchemeId:
            g, src = COMPATIBILITY[s]
            if p.growth.kind in g and p.source.kind in src:
                yield cid, s


PAIRS = list(compatible_pairs())


def shift_exact(a, b):
    return lambda t, a1, a2: f0(np.asarray(a1) - a(t), np.asarray(a2) - b(t))


class TestSchemeId:
    def test_kebab_names(self):
        assert SchemeId.parse("split-exact-enhanced") is SchemeId.SplitExactEnhanced
        assert SchemeId.parse("MuExact") is SchemeId.MuExact
        assert all(s.value == s.value.lower() and " " not in s.value for s in SchemeId)
        assert len({s.value for s in SchemeId}) == 14

    def test_unknown(self):
        with pytest.raises(SetupError, match="unknown scheme"):
            SchemeId.parse("weno")

    def test_every_scheme_is_used(self):
        assert {s for _, s in PAIRS} == set(SchemeId)


class TestCompatibility:
    def test_rejects_pairing_naming_both(self):
        with pytest.raises(CompatibilityError, match="split-exact.*coupled|constant"):
            advance(get_case("case1").problem, "split-exact")
        with pytest.raises(CompatibilityError, match="mu-exact"):
            advance(get_case("case4").problem, "mu-exact")

    def test_enhanced_needs_feet(self):
        p = ProblemSpec(Coupled(lambda a1, a2: 1 + a2, lambda a1, a2: 1 + a1), f0)
        with pytest.raises(CompatibilityError, match="feet"):
            advance(p, "split-exact-enhanced", 21, 0.1)
        advance(p, "split-exact", 21, 0.1)

    def test_unknown_option(self):
        with pytest.raises(SetupError, match="gamma"):
            advance(get_case("case1").problem, "exact-analytical", 21, gamma=0.3)


@pytest.mark.parametrize("cid, scheme", PAIRS, ids=[f"{c}-{s.value}" for c, s in PAIRS])
def test_zero_duration_returns_initial_condition(cid, scheme):
    case = get_case(cid, t_end=0.0)
    res = advance(case.problem, scheme, 31, 0.1)
    assert res.steps_taken == 0
    np.testing.assert_array_equal(res.final_field.values, res.final_field.grid.sample(case.problem.f0))


@pytest.mark.parametrize("cid, scheme", PAIRS, ids=[f"{c}-{s.value}" for c, s in PAIRS])
def test_run_reaches_t_end(cid, scheme):
    case = get_case(cid, t_end=0.3)
    res = advance(case.problem, scheme, 41, None)
    assert res.steps_taken * res.dt_used >= 0.3 - 1e-12
    assert np.all(np.isfinite(res.final_field.values))
    assert res.mesh_report.node_count > 0


class TestLieSplit:
    def test_no_growth_is_identity(self):
        v = np.random.default_rng(0).random((6, 6))
        out = advance(ProblemSpec(Constant(0.0, 0.0), f0, t_end=0.5), "split-trans-uniform-upwind", 21, 0.1)
        np.testing.assert_array_equal(out.final_field.values, advance(
            ProblemSpec(Constant(0.0, 0.0), f0, t_end=0.0), "split-trans-uniform-upwind", 21).final_field.values)
        same = lie_split_step(v, 0.1, lambda x, axis, h: x)
        np.testing.assert_array_equal(same, v)

    def test_delta_moves_diagonally(self):
        v = np.zeros((6, 6))
        v[1, 1] = 1.0
        out = lie_split_step(v, 1.0, lambda x, axis, h: shift_axis(x, axis, 1))
        assert out[2, 2] == 1.0 and out.sum() == 1.0

    def test_axis_order_validated(self):
        with pytest.raises(SetupError):
            lie_split_step(np.zeros((3, 3)), 0.1, lambda x, a, h: x, order=(1, 1))

    def test_constant_growth_commutes(self):
        p = get_case("case1").problem
        a = advance(p, "split-con-uniform-upwind", 61, 0.02, order=(1, 2)).final_field.values
        b = advance(p, "split-con-uniform-upwind", 61, 0.02, order=(2, 1)).final_field.values
        assert rmse(a, b) <= 1e-14


class TestExactSchemes:
    def test_case1_machine_precision(self):
        assert run_case(get_case("case1"), "exact-analytical", 101).rmse <= 1e-12

    def test_plain_upwind_is_diffusive(self):
        rep = run_case(get_case("case1"), "con-uniform-upwind", 101)
        assert rep.rmse > 1e-2

    @pytest.mark.parametrize("cid", ["case1", "case2"])
    def test_independent_of_dt(self, cid):
        p = get_case(cid).problem
        a = advance(p, "exact-analytical", 101, 0.1)
        b = advance(p, "exact-analytical", 101, 0.05)
        assert a.final_field.grid.shape == b.final_field.grid.shape
        assert rmse(a.final_field.values, b.final_field.values) <= 1e-13

    def test_case2_native_grid_is_transformed_lattice(self):
        res = advance(get_case("case2").problem, "exact-analytical", 101)
        a1 = res.final_field.grid.axis1.points
        np.testing.assert_allclose(np.diff(MAP1_CASE2.forward(a1))[1:], np.diff(MAP1_CASE2.forward(a1))[-1],
                                   rtol=1e-10)
        assert len(a1) >= 101

    def test_time_only_growth(self):
        g = TimeOnly(lambda t: 1 + t, lambda t: 0.5 + 0 * t,
                     ClosedForm(lambda t: t + 0.5 * t * t), ClosedForm(lambda t: 0.5 * t))
        case = CaseDefinition("time", ProblemSpec(g, f0), shift_exact(lambda t: t + t * t / 2, lambda t: 0.5 * t))
        for s in ("exact-analytical", "exact-numerical", "split-nonhomogeneous"):
            assert run_case(case, s, 101).rmse <= 1e-12

    def test_time_only_needs_closed_maps_for_analytical(self):
        g = TimeOnly(lambda t: 1 + t, lambda t: 0.5 + 0 * t)
        with pytest.raises(SetupError, match="closed-form"):
            advance(ProblemSpec(g, f0), "exact-analytical", 21)

    def test_separable_growth(self):
        T1 = ClosedForm(lambda t: t + 0.5 * t * t)
        T2 = ClosedForm(lambda t: t)
        g = SeparableTimeSize(lambda t: 1 + t, G1_case2, lambda t: 1 + 0 * t, G2_case2,
                              MAP1_CASE2, MAP2_CASE2, T1, T2)

        def exact(t, a1, a2):
            b1 = MAP1_CASE2.inverse(MAP1_CASE2.forward(a1) - T1.forward(t))
            b2 = MAP2_CASE2.inverse(MAP2_CASE2.forward(a2) - T2.forward(t))
            return G1_case2(b1) * G2_case2(b2) * f0(b1, b2) / (G1_case2(a1) * G2_case2(a2))

        case = CaseDefinition("sep", ProblemSpec(g, f0), exact)
        assert run_case(case, "exact-analytical", 101).rmse <= 1e-12
        a = advance(case.problem, "exact-analytical", 101, 0.1).final_field.values
        b = advance(case.problem, "exact-analytical", 101, 0.05).final_field.values
        assert rmse(a, b) <= 1e-13

    def test_interpolation_variant_close_to_exact(self):
        assert run_case(get_case("case2"), "exact-interpolation", 101).rmse <= 1e-8


class TestSplitExact:
    def test_first_order_in_dt(self):
        case = get_case("case3")
        # at 101 nodes the fourth rung already meets the per-step resampling error
        errs = [run_case(case, "split-exact", 201, dt).rmse for dt in (0.1, 0.05, 0.025, 0.0125)]
        for coarse, fine in zip(errs[:-1], errs[1:]):
            assert 1.7 <= coarse / fine <= 2.3

    def test_axis_order_matters(self):
        p = get_case("case3").problem
        a = advance(p, "split-exact", 101, 0.1, order=(1, 2)).final_field.values
        b = advance(p, "split-exact", 101, 0.1, order=(2, 1)).final_field.values
        assert rmse(a, b) > 1e-8

    def test_beats_plain_upwind(self):
        case = get_case("case3")
        assert run_case(case, "split-exact", 101).rmse < run_case(case, "split-trans-uniform-upwind", 101).rmse

    def test_interpolation_order_option(self):
        case = get_case("case3")
        cubic = run_case(case, "split-exact", 101, 0.05).rmse
        linear = run_case(case, "split-exact", 101, 0.05, interp_order=1).rmse
        assert cubic < linear


class TestSourceSchemes:
    def test_mu_exact_machine_precision_both_mu_routes(self):
        assert run_case(get_case("case5"), "mu-exact", 101).rmse <= 1e-12
        assert run_case(get_case("case5", closed_mu=False), "mu-exact", 101).rmse <= 1e-12

    def test_split_source_converges_to_mu_exact(self):
        p = get_case("case5").problem
        ref = advance(p, "mu-exact", 101).final_field.values
        d = [rmse(advance(p, "split-nonhomogeneous", 101, dt).final_field.values, ref) for dt in (0.04, 0.02)]
        assert 1.6 <= d[0] / d[1] <= 2.4

    def test_source_order_option(self):
        p = get_case("case4").problem
        a = advance(p, "split-nonhomogeneous", 51).final_field.values
        b = advance(p, "split-nonhomogeneous", 51, source_order="source-first").final_field.values
        assert 0 < rmse(a, b) < 0.1
        with pytest.raises(SetupError):
            advance(p, "split-nonhomogeneous", 51, source_order="middle")


class TestNonuniform:
    def test_gamma_option_and_accuracy(self):
        case = get_case("case2")
        a = run_case(case, "trans-nonuniform-upwind", 101, gamma=0.5)
        b = run_case(case, "con-nonuniform-upwind", 101, gamma=0.3)
        assert a.rmse < run_case(case, "trans-uniform-upwind", 101).rmse * 1.1
        assert np.isfinite(b.rmse)
        with pytest.raises(SetupError):
            advance(case.problem, "trans-nonuniform-upwind", 51, gamma=1.0)

    def test_constant_growth_on_cfl1_grid(self):
        p = ProblemSpec(Constant(1.0, 1.0), f0, t_end=1.0)
        res = advance(p, "trans-nonuniform-upwind", 101, 0.005)
        assert np.all(np.isfinite(res.final_field.values))
        A1, A2 = res.final_field.grid.mesh()
        err = rmse(res.final_field.values, exact_case1(1.0, A1, A2))
        assert err < 2.0


@pytest.mark.parametrize("con,trans", [("con-uniform-upwind", "trans-uniform-upwind"),
                                       ("split-con-uniform-upwind", "split-trans-uniform-upwind")])
def test_conservative_equals_transformed_for_constant_growth(con, trans):
    p = get_case("case1").problem
    a = advance(p, con, 101, 0.005).final_field.values
    b = advance(p, trans, 101, 0.005).final_field.values
    np.testing.assert_array_equal(a, b)
