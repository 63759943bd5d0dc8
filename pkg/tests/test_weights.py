import math

import numpy as np
import pytest

from weightspace.errors import InvalidParameterError, RegularizationError
from weightspace.grids import GridSpec
from weightspace.weights import (
    check_admissibility,
    compose_exp,
    doubling_condition_psi,
    doubling_constant,
    make_weight,
    parse_weight,
    regularize_at_zero,
    second_differences,
)


class TestConstruction:
    def test_exp_power_values(self):
        w = make_weight("exp_power", alpha=2.0)
        np.testing.assert_allclose(w(np.array([0.0, 1.0, 2.0])), [1.0, math.e, math.exp(4.0)])

    def test_exp_has_closed_form_conjugate(self):
        w = make_weight("exp")
        xs = np.array([0.5, 1.0, 3.0])
        np.testing.assert_allclose(w.exact_conjugate(xs), np.where(xs >= 1, xs * np.log(xs) - xs, -1.0))

    @pytest.mark.parametrize("text,name", [("exp", "exp"), ("power:p=3", "power"), ("power:3", "power"),
                                           ("exp_power:alpha=0.5", "exp_power"), ("table:0,0,1,2,2,5", "table")])
    def test_parse(self, text, name):
        assert parse_weight(text).name == name

    @pytest.mark.parametrize("text", ["nope", "power:p=0.5", "power:p=x", "table:0,1,2"])
    def test_parse_errors(self, text):
        with pytest.raises(InvalidParameterError):
            parse_weight(text)

    def test_table_extends_linearly(self):
        w = parse_weight("table:0,0,1,1,2,3")
        np.testing.assert_allclose(w(np.array([0.5, 2.0, 3.0])), [0.5, 3.0, 5.0])

    def test_compose_exp(self):
        psi = compose_exp(make_weight("exp"))
        ys = np.array([0.0, 0.5, 1.0])
        np.testing.assert_allclose(psi(ys), np.exp(np.exp(ys)))
        assert psi.name.endswith("[e]")


class TestDoubling:
    def test_exp_constants(self):
        xs = GridSpec(1e-3, 30.0, 2048, "log").points()
        # 2e^x - e^{2x} = 1 - (e^x - 1)^2 peaks at x = 0
        k2 = doubling_constant(make_weight("exp"), 2.0, xs)
        assert k2.K == pytest.approx(1.0, abs=1e-12)
        assert not k2.divergent
        assert not doubling_constant(make_weight("exp"), 1.2, xs).divergent

    def test_square_diverges_for_small_h(self):
        xs = GridSpec(1e-3, 30.0, 2048, "log").points()
        w = make_weight("power", p=2.0)
        # 2x^2 - (hx)^2 grows without bound when h^2 < 2
        assert doubling_constant(w, 1.2, xs).divergent
        big = doubling_constant(w, 2.0, xs)
        assert not big.divergent and big.K == 0.0

    def test_h_must_exceed_one(self):
        with pytest.raises(InvalidParameterError):
            doubling_constant(make_weight("exp"), 1.0, np.linspace(0, 1, 5))

    def test_log_variable_form(self):
        d = doubling_condition_psi(compose_exp(make_weight("exp")), 2.0)
        assert d.K == pytest.approx(1.0, abs=1e-9)
        const = compose_exp(make_weight("table", xs=[0.0, 100.0], vs=[3.0, 3.0]))
        assert doubling_condition_psi(const, 2.0).K == pytest.approx(3.0)


class TestAdmissibility:
    def test_exp_admissible(self):
        rep = check_admissibility(make_weight("exp"))
        assert rep.superlinear_ok and rep.log_convexity_ok
        assert rep.admissible

    def test_square_fails_doubling(self):
        rep = check_admissibility(make_weight("power", p=2.0), h_list=(1.2,))
        assert rep.doubling_constants[0].divergent
        assert not rep.admissible

    def test_report_serializes(self):
        d = check_admissibility(make_weight("exp")).to_dict()
        assert {"superlinear_ok", "doubling_constants", "log_convexity_ok", "probe_grid"} <= set(d)

    def test_second_differences(self):
        # second difference 2, normalised by 1 + |v| at the last interior point v = 64
        ok, worst = second_differences(np.arange(10.0) ** 2)
        assert ok and worst == pytest.approx(2.0 / 65.0)
        assert not second_differences(np.sqrt(np.arange(10.0)))[0]


class TestRegularization:
    def test_exp_with_unit_knot_is_infeasible(self):
        with pytest.raises(RegularizationError):
            regularize_at_zero(make_weight("exp"), d=1.0)

    def test_exp_default(self):
        reg = regularize_at_zero(make_weight("exp"), d=2.0)
        xs = np.linspace(0.0, 6.0, 601)
        v = reg.weight(xs)
        assert v[0] == 0.0
        # agrees with w beyond the knot, convex throughout
        np.testing.assert_allclose(v[xs >= 2.0], np.exp(xs[xs >= 2.0]))
        assert second_differences(v)[0]
        assert reg.s >= 0 and reg.s1 >= 0
        assert math.isfinite(reg.s) and math.isfinite(reg.s1)
