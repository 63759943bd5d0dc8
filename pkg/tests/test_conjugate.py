import math

import numpy as np
import pytest

from weightspace import conjugate as cj
from weightspace.errors import DivergenceSuspected, InvalidParameterError, PreconditionError
from weightspace.grids import GridSpec
from weightspace.weights import compose_exp, make_weight


def square(y):
    return np.asarray(y, dtype=float) ** 2


def double_exp(y):
    return np.exp(np.exp(np.asarray(y, dtype=float)))


class TestGridFunction:
    def test_interpolation_and_range(self):
        gf = cj.GridFunction(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 4.0]))
        assert gf(0.5) == pytest.approx(0.5)
        with pytest.raises(InvalidParameterError):
            gf(2.5)

    def test_rejects_unsorted_and_nonfinite(self):
        with pytest.raises(InvalidParameterError):
            cj.GridFunction(np.array([1.0, 0.0]), np.array([0.0, 0.0]))
        with pytest.raises(InvalidParameterError):
            cj.GridFunction(np.array([0.0, 1.0]), np.array([0.0, np.inf]))

    def test_csv_round_trip(self):
        gf = cj.young_conjugate(square, GridSpec(1e-6, 5.0, 101), GridSpec(0.0, 4.0, 17))
        text = gf.to_csv()
        assert text.splitlines()[0].startswith("# meta: ")
        assert text.splitlines()[1] == "x,value"
        back = cj.GridFunction.from_csv(text)
        np.testing.assert_array_equal(back.xs, gf.xs)
        np.testing.assert_array_equal(back.values, gf.values)

    def test_convexity(self):
        xs = np.linspace(0, 2, 21)
        assert cj.GridFunction(xs, xs ** 2).is_convex()
        assert not cj.GridFunction(xs, np.sqrt(xs)).is_convex()


class TestYoungConjugate:
    def test_square_matches_closed_form(self):
        # (y^2)*(x) = x^2/4 while the maximiser x/2 stays inside [0, 10]
        xs = np.linspace(0.0, 8.0, 33)
        gf = cj.young_conjugate(square, GridSpec(1e-9, 10.0, 20001), xs)
        np.testing.assert_allclose(gf.values, xs ** 2 / 4, atol=1e-6)

    def test_exp_point_conjugate(self):
        # sup_{y>=0} (xy - e^y) = x ln x - x for x >= 1 and -1 below
        xs = np.array([0.2, 1.0, 2.0, math.e, 10.0, 50.0])
        got = cj.conjugate_at(np.exp, xs).values
        want = np.where(xs >= 1, xs * np.log(xs) - xs, -1.0)
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)

    def test_evaluator_needs_positive_lower_end(self):
        with pytest.raises(InvalidParameterError):
            cj.young_conjugate(square, GridSpec(0.0, 1.0, 11), GridSpec(0.0, 1.0, 3))

    def test_truncation_warning(self):
        gf = cj.young_conjugate(square, GridSpec(1e-6, 1.0, 101), GridSpec(0.0, 10.0, 11))
        assert gf.meta["truncation_warning"]
        assert gf.at_upper[-1]

    def test_hull_and_scan_agree(self):
        ys = np.linspace(1e-6, 3.0, 1001)
        gv = double_exp(ys)
        xs = np.linspace(0.0, 50.0, 301)
        a, _ = cj.discrete_conjugate(ys, gv, xs, "scan")
        b, _ = cj.discrete_conjugate(ys, gv, xs, "hull")
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_auto_upper_holds_maximisers(self):
        hi = cj.auto_upper(np.exp, 20.0)
        gf = cj.young_conjugate(np.exp, GridSpec(1e-6, hi, 2048), GridSpec(0.0, 20.0, 64))
        assert not np.any(gf.at_upper)


class TestIdentities:
    ys = np.linspace(1e-3, 4.0, 2001)
    xs = np.linspace(0.0, 30.0, 301)

    def conj(self, gv, xs=None, ys=None):
        ys = self.ys if ys is None else ys
        return cj.discrete_conjugate(ys, gv, self.xs if xs is None else xs)[0]

    @pytest.mark.parametrize("g", [square, np.exp, double_exp], ids=["square", "exp", "double_exp"])
    def test_scaling(self, g):
        lam = 2.5
        gv = g(self.ys)
        lhs = self.conj(lam * gv)
        rhs = lam * self.conj(gv, xs=self.xs / lam)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10)

    @pytest.mark.parametrize("g", [square, np.exp, double_exp], ids=["square", "exp", "double_exp"])
    def test_vertical_shift(self, g):
        gv = g(self.ys)
        np.testing.assert_allclose(self.conj(gv + 3.0), self.conj(gv) - 3.0, rtol=1e-10, atol=1e-10)

    @pytest.mark.parametrize("g", [square, np.exp, double_exp], ids=["square", "exp", "double_exp"])
    def test_linear_tilt_shifts_argument(self, g):
        a = 1.75
        gv = g(self.ys)
        np.testing.assert_allclose(self.conj(gv - a * self.ys), self.conj(gv, xs=self.xs + a),
                                   rtol=1e-10, atol=1e-10)

    @pytest.mark.parametrize("g", [square, np.exp, double_exp], ids=["square", "exp", "double_exp"])
    def test_primal_dilation(self, g):
        # h(y) = g(y / lam) on lam * grid has h*(x) = g*(lam x)
        lam = 2.0
        gv = g(self.ys)
        np.testing.assert_allclose(self.conj(gv, ys=lam * self.ys), self.conj(gv, xs=lam * self.xs),
                                   rtol=1e-10, atol=1e-10)


class TestBiconjugate:
    @pytest.mark.parametrize("g", [square, np.exp, double_exp], ids=["square", "exp", "double_exp"])
    def test_fenchel_young_and_biconjugate(self, g):
        hi = cj.auto_upper(g, 20.0)
        rep = cj.biconjugate_check(g, GridSpec(1e-6, hi, 4096), GridSpec(0.0, 20.0, 4096),
                                   GridSpec(hi / 100, hi / 2, 256))
        assert rep.fenchel_young_worst_gap >= -1e-9 * rep.scale
        assert rep.slopes_monotone
        assert np.count_nonzero(rep.interior) > 0
        assert rep.biconjugate_max_dev < 5e-3

    def test_gap_is_nonnegative_for_exact_conjugate(self):
        ys = np.linspace(0.1, 3, 50)
        xs = np.linspace(0.0, 6.0, 60)
        assert cj.fenchel_young_gap(ys, ys ** 2, xs, xs ** 2 / 4) >= -1e-12


class TestHelpers:
    def test_doubling_gap_handles_infinities(self):
        # an overflowed shifted value dominates, so the gap is -inf rather than nan
        got = cj.doubling_gap(np.array([1.0, np.inf, 2.0]), np.array([1.0, np.inf, np.inf]))
        np.testing.assert_array_equal(got, np.array([1.0, -np.inf, -np.inf]))

    def test_nonincreasing(self):
        assert cj.nonincreasing(np.array([3.0, 2.0, -np.inf, -np.inf]))
        assert not cj.nonincreasing(np.array([1.0, 2.0]))

    def test_golden_max_finds_parabola_peak(self):
        centres = np.array([0.3, -1.2, 2.0])
        t, v = cj.golden_max(lambda t, lanes: -(t - centres[lanes]) ** 2, -5 * np.ones(3), 5 * np.ones(3))
        np.testing.assert_allclose(t, centres, atol=1e-7)
        np.testing.assert_allclose(v, 0.0, atol=1e-12)


class TestConjugateInequalities:
    def test_log_growth_bound_exp(self):
        res = cj.lemma1_check(compose_exp(make_weight("exp")), math.e)
        assert abs(res.A_M) <= 1e-6
        assert res.ok

    def test_log_growth_bound_rejects_nonpositive_m(self):
        with pytest.raises(InvalidParameterError):
            cj.lemma1_check(double_exp, 0.0)

    @pytest.mark.parametrize("eps", [0.25, 0.5])
    def test_doubling_forward(self, eps):
        res = cj.lemma2_forward_check(double_exp, eps)
        assert res.C == max(res.B, res.inf_g)
        assert res.ok

    def test_doubling_shift_decreases_with_eps(self):
        b = [cj.doubling_constant_shift(double_exp, e) for e in (0.25, 0.5)]
        assert b[1] <= b[0]

    def test_doubling_reverse(self):
        hi = cj.auto_upper(double_exp, 200.0)
        gstar = cj.young_conjugate(double_exp, GridSpec(1e-6, hi, 4096), GridSpec(0.0, 200.0, 2001), convex=True)
        for eps in (0.25, 0.5):
            C = cj.lemma2_forward_check(double_exp, eps).C
            rev = cj.lemma2_reverse_check(gstar, eps, C)
            assert rev.evaluated > 0
            assert rev.ok

    def test_doubling_precondition(self):
        # linear g has B = infinity: 2g(x) - g(x + eps) grows without bound
        with pytest.raises(PreconditionError):
            cj.lemma2_forward_check(lambda y: 5.0 * np.asarray(y, float) ** 0.5, 0.5)

    def test_series_zero_conjugate(self):
        # psi* = 0 gives sum 1/(b^j j!) = e^{1/b}
        res = cj.corollary1_series(lambda j: np.zeros_like(np.asarray(j, float)), 2.0)
        assert res.partial_sum == pytest.approx(math.exp(0.5), rel=1e-12)

    def test_series_divergence(self):
        # psi*(j) = j ln j ... grows like j!, so terms with b < 1 never shrink
        with pytest.raises(DivergenceSuspected):
            cj.corollary1_series(lambda j: 2.0 * np.asarray(j, float) * np.log1p(np.asarray(j, float)), 0.5)

    def test_slope_divergence_double_exp(self):
        gf = cj.lemma4_slope_check(double_exp, 0.5)
        assert gf.meta["verdict"] == "pass"
        assert gf.meta["tail_increasing"]
        assert gf.meta["end_start_ratio"] > 10

    def test_slope_sequence_square_is_linear(self):
        # (y^2)* = x^2/4 gives r(x) = ((1.5x)^2 - x^2)/(4x), no blow-up of the ratio past 40
        gf = cj.lemma4_slope_check(square, 0.5, x_grid=GridSpec(1.0, 40.0, 64))
        np.testing.assert_allclose(gf.values, 1.25 * gf.xs / 4, rtol=1e-8)


class TestLogVariableIdentity:
    def test_half_square(self):
        res = cj.eq21_identity_check(lambda y: 0.5 * np.asarray(y, float) ** 2)
        assert res.max_abs_err < 5e-3

    def test_spot_values(self):
        res = cj.eq21_identity_check(lambda y: 0.5 * np.asarray(y, float) ** 2, x_grid=np.array([1.0, math.e]))
        np.testing.assert_allclose(res.lhs, [-1.0, 0.0], atol=1e-3)

    def test_exp_fails_growth_witness(self):
        with pytest.raises(PreconditionError):
            cj.eq21_identity_check(np.exp)
