import math

import numpy as np
import pytest

from weightspace.entire import constant, gaussian, zero
from weightspace.errors import InvalidParameterError, WindowTooSmallError
from weightspace.fourier import (
    QuadratureSpec,
    derivative_consistency,
    fourier_transform,
    inverse_transform,
    known_transform,
    parity_defect,
    plancherel_gap,
    roundtrip_check,
    shifted_integral,
    surjectivity_check,
    theorem3_check,
)
from weightspace.norms import PASS, PsiStar, SpaceParams
from weightspace.weights import make_weight


class TestQuadrature:
    def test_points_and_weights(self):
        q = QuadratureSpec(4.0, 64)
        assert q.points().size == 65
        assert q.weights().sum() == pytest.approx(8.0)

    def test_rejects_bad_spec(self):
        with pytest.raises(InvalidParameterError):
            QuadratureSpec(-1.0, 64)
        with pytest.raises(InvalidParameterError):
            QuadratureSpec(4.0, 63)


class TestTransform:
    xs = np.linspace(-8.0, 8.0, 161)

    @pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
    def test_gaussian_pair(self, a):
        got = fourier_transform(gaussian(a), self.xs).values
        want = math.sqrt(math.pi / a) * np.exp(-self.xs ** 2 / (4 * a))
        assert np.max(np.abs(got - want)) <= 1e-8

    def test_derivative(self):
        # d/dx sqrt(pi) e^{-x^2/4} = -(x/2) sqrt(pi) e^{-x^2/4}
        res = fourier_transform(gaussian(), self.xs, n_list=(0, 1))
        want = -0.5 * self.xs * math.sqrt(math.pi) * np.exp(-self.xs ** 2 / 4)
        assert np.max(np.abs(res.derivative_values[1] - want)) <= 1e-8

    def test_inverse_of_known_pair(self):
        back = inverse_transform(known_transform(gaussian()), self.xs, QuadratureSpec(48.0, 2048)).values
        assert np.max(np.abs(back - np.exp(-self.xs ** 2))) <= 1e-8

    def test_roundtrip(self):
        assert roundtrip_check(gaussian()) <= 1e-8

    def test_plancherel(self):
        assert plancherel_gap(gaussian()) <= 1e-10

    def test_even_function_has_real_even_transform(self):
        imag, odd = parity_defect(gaussian())
        assert imag <= 1e-12 and odd <= 1e-12

    def test_window_too_small(self):
        with pytest.raises(WindowTooSmallError):
            fourier_transform(constant(1.0), self.xs)

    def test_contour_shift(self):
        # the integrand is entire and decays, so moving the line leaves the integral unchanged
        x = 1.3
        straight = shifted_integral(gaussian(), x, 2, 0.0)
        shifted = shifted_integral(gaussian(), x, 2, -0.7)
        assert abs(straight - shifted) <= 1e-10 * max(1.0, abs(straight))

    def test_derivative_consistency(self):
        assert derivative_consistency(gaussian(), 0.8) <= 1e-8


class TestSurjectivity:
    def test_gaussian(self):
        assert surjectivity_check(gaussian()) <= 1e-6

    def test_zero(self):
        assert surjectivity_check(zero()) == 0.0

    def test_no_closed_form(self):
        with pytest.raises(InvalidParameterError):
            known_transform(constant(1.0))


class TestTransformBound:
    def test_gaussian(self):
        w = make_weight("exp")
        rep = theorem3_check(gaussian(), w, SpaceParams(), PsiStar(w))
        assert rep.verdict == PASS
        assert rep.diagnostics["gaussian_pair_max_abs_err"] <= 1e-8
        assert rep.diagnostics["roundtrip_max_abs_err"] <= 1e-8
        for row in rep.rows:
            assert row["transform_norm"] <= row["pi_p_norm"]
