import json
import math

import numpy as np
import pytest

from weightspace.entire import constant, derivative_table, gaussian
from weightspace.errors import InvalidParameterError
from weightspace.grids import symmetric
from weightspace.norms import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    PsiStar,
    SpaceParams,
    VerificationReport,
    g_norm,
    lemma3_check,
    lemma3_constants,
    norm_report,
    p_norm,
    s_norm,
    theorem1_check,
    theorem2_check,
    theorem4_equivalence_check,
    verdict_of,
)
from weightspace.weights import make_weight


@pytest.fixture(scope="module")
def exp_weight():
    return make_weight("exp")


@pytest.fixture(scope="module")
def psistar(exp_weight):
    return PsiStar(exp_weight)


@pytest.fixture(scope="module")
def gauss_table():
    return derivative_table(gaussian(), symmetric(8.0, 321), 2)


class TestPsiStar:
    def test_value_at_zero(self, psistar):
        assert psistar(0.0)[0] == -math.e

    def test_matches_dense_grid(self, psistar):
        ys = np.linspace(0.0, 4.0, 400001)
        psi = np.exp(np.exp(ys))
        for k in (1.0, 5.0, 30.0):
            want = float(np.max(k * ys - psi))
            assert psistar(k)[0] == pytest.approx(want, abs=1e-6)


class TestPNorm:
    def test_constant_k0(self, exp_weight):
        # sup over the plane of 1/exp(e^{2|y|}) is e^{-1} on the real axis
        nv = p_norm(constant(1.0), exp_weight, 1.0, 1.0, 0)
        assert nv.value == pytest.approx(math.exp(-1.0), rel=1e-12)
        assert not nv.divergent

    def test_constant_k1_diverges(self, exp_weight):
        assert p_norm(constant(1.0), exp_weight, 1.0, 0.5, 1).divergent

    def test_gaussian_k0(self, exp_weight):
        # y^2 - x^2 - e^{2|y|} peaks at the origin
        nv = p_norm(gaussian(), exp_weight, 1.0, 1.0, 0)
        assert nv.value == pytest.approx(math.exp(-1.0), rel=1e-9)


class TestLineNorms:
    def test_g_norm_lower_bound(self, gauss_table, psistar):
        # the k = 0 term alone is sup|f| e^{psi*(0)} = e^{-e}
        g = g_norm(gauss_table, psistar, 1.0, 0.5, 0)
        assert g.value >= math.exp(-math.e) * (1 - 1e-12)
        assert not g.inconclusive

    @pytest.mark.parametrize("eps", [0.5, 1.0])
    @pytest.mark.parametrize("m", [0, 1, 2])
    def test_g_below_s(self, gauss_table, psistar, eps, m):
        assert g_norm(gauss_table, psistar, 1.0, eps, m).value <= s_norm(gauss_table, psistar, 1.0, eps, m).value

    def test_order_beyond_table(self, gauss_table, psistar):
        with pytest.raises(InvalidParameterError):
            g_norm(gauss_table, psistar, 1.0, 0.5, 5)

    def test_norm_report(self, exp_weight, gauss_table, psistar):
        rep = norm_report(gaussian(), exp_weight, SpaceParams(m_max=1), gauss_table, psistar)
        rows = rep.rows()
        assert {r["norm"] for r in rows} == {"p", "g", "s"}
        json.dumps(rep.to_dict())


class TestNormComparison:
    def test_constants(self, psistar):
        delta, C, C1 = lemma3_constants(psistar, 1.0, 0.5)
        assert delta == pytest.approx(0.2)
        assert C >= 1.0
        assert C1 == pytest.approx(max(1.0, C * math.exp(math.e)))

    def test_gaussian(self, gauss_table, psistar):
        rep = lemma3_check(gauss_table, psistar, SpaceParams())
        assert rep.verdict == PASS
        assert all(r["g_norm"] <= r["s_norm"] for r in rep.rows)


class TestVerifiers:
    def test_derivative_decay_gaussian(self, exp_weight, psistar):
        rep = theorem1_check(gaussian(), exp_weight, SpaceParams(), psistar=psistar)
        assert rep.verdict == PASS
        assert all(math.isfinite(v) for v in rep.fitted_constants.values())

    def test_derivative_decay_constant_fails(self, exp_weight, psistar):
        assert theorem1_check(constant(1.0), exp_weight, SpaceParams(), psistar=psistar).verdict == FAIL

    def test_taylor_growth_gaussian(self, exp_weight):
        f = gaussian()
        table = derivative_table(f, np.linspace(-2.0, 2.0, 5), 130)
        rep = theorem2_check(table, exp_weight, SpaceParams(), reference=f)
        assert rep.verdict == PASS
        assert rep.diagnostics["disc_max_abs_err"] <= 1e-8

    def test_decay_characterisation_gaussian(self, exp_weight, psistar):
        rep = theorem4_equivalence_check(gaussian(), exp_weight, SpaceParams(), psistar=psistar)
        assert rep.verdict == PASS
        reg = rep.diagnostics["regularization"]
        assert reg["s"] > 0 and reg["s1"] >= 0

    def test_decay_characterisation_constant_fails(self, exp_weight, psistar):
        assert theorem4_equivalence_check(constant(1.0), exp_weight, SpaceParams(), psistar=psistar).verdict == FAIL


class TestReports:
    def test_verdict_of(self):
        assert verdict_of([PASS, PASS]) == PASS
        assert verdict_of([PASS, INCONCLUSIVE]) == INCONCLUSIVE
        assert verdict_of([INCONCLUSIVE, FAIL]) == FAIL

    def test_serialization(self):
        rep = VerificationReport("x", {"c": 1.5}, 0.1, {"sigma": 1.0}, PASS, {"note": math.inf},
                                 [{"a": 1.0, "b": math.nan}])
        d = json.loads(json.dumps(rep.to_dict()))
        assert d["verdict"] == PASS and d["fitted_constants"]["c"] == 1.5
        lines = rep.to_csv().splitlines()
        assert lines[0] == "a,b" and lines[1] == "1.0,nan"

    def test_space_params_validation(self):
        with pytest.raises(InvalidParameterError):
            SpaceParams(sigma=-1.0)
        with pytest.raises(InvalidParameterError):
            SpaceParams(epsilons=(0.5, 0.0))
        assert SpaceParams(epsilons=(1.0, 0.5)).epsilons == (0.5, 1.0)
