import numpy as np
import pytest

from needlet_whittle import (
    DomainError,
    KappaCorrection,
    PowerSpectrumModel,
    RationalCorrection,
    c_l,
    check_regularity,
    g_of_l,
)
from needlet_whittle.spectrum import model_kappa


class TestCl:
    def test_pure_power_law_values(self):
        m = PowerSpectrumModel(alpha0=3.0, g0=1.0)
        assert c_l(m, 1) == 1.0
        assert c_l(m, 2) == 0.125

    def test_kappa_value(self):
        m = PowerSpectrumModel(alpha0=3.0, g0=2.0, correction=KappaCorrection(0.5))
        assert c_l(m, 4) == pytest.approx(2 * 4**-3 * 1.125, rel=1e-15)
        assert c_l(m, 4) == pytest.approx(0.03515625, rel=1e-15)

    def test_monopole_excluded(self):
        m = PowerSpectrumModel(alpha0=3.0)
        with pytest.raises(DomainError):
            c_l(m, 0)

    @pytest.mark.parametrize(
        "model",
        [
            PowerSpectrumModel(alpha0=2.5),
            PowerSpectrumModel(alpha0=3.0, g0=0.2, correction=KappaCorrection(-0.9)),
            PowerSpectrumModel(
                alpha0=3.0,
                correction=RationalCorrection(p_coeffs=(2.0, 1.0), q_coeffs=(1.0, 3.0)),
            ),
        ],
    )
    def test_positivity(self, model):
        ls = np.arange(1, 10_001)
        assert np.all(c_l(model, ls) > 0)

    def test_g0_scaling_exact(self):
        base = PowerSpectrumModel(alpha0=2.7, correction=KappaCorrection(0.3))
        scaled = PowerSpectrumModel(alpha0=2.7, g0=5.0, correction=KappaCorrection(0.3))
        ls = np.arange(1, 2000)
        assert np.array_equal(c_l(scaled, ls), 5.0 * c_l(base, ls))


class TestGofL:
    def test_constant(self):
        m = PowerSpectrumModel(alpha0=4.0, g0=1.0)
        assert g_of_l(m, 17) == 1.0

    def test_kappa(self):
        m = PowerSpectrumModel(alpha0=3.0, correction=KappaCorrection(1.0))
        assert g_of_l(m, 10) == pytest.approx(1.1, rel=1e-15)

    def test_rational_trivial(self):
        m = PowerSpectrumModel(
            alpha0=3.0, correction=RationalCorrection(p_coeffs=(1.0,), q_coeffs=(1.0,))
        )
        assert g_of_l(m, 7) == pytest.approx(1.0, rel=1e-15)

    def test_rational_limit_rate(self):
        # G(l) -> c_pp/c_qq with O(1/l) error: l * |G - limit| stays bounded
        m = PowerSpectrumModel(
            alpha0=3.0,
            correction=RationalCorrection(p_coeffs=(3.0, 2.0), q_coeffs=(1.0, 0.5, 4.0)),
        )
        limit = 2.0 / 4.0
        ls = np.geomspace(100, 10_000, 40)
        scaled = ls * np.abs(g_of_l(m, ls) - limit)
        assert scaled.max() < 10 * abs(scaled[-1]) + 1.0


class TestValidation:
    def test_alpha0_bound(self):
        with pytest.raises(DomainError):
            PowerSpectrumModel(alpha0=2.0)

    def test_g0_bound(self):
        with pytest.raises(DomainError):
            PowerSpectrumModel(alpha0=3.0, g0=0.0)

    def test_kappa_bound(self):
        with pytest.raises(DomainError):
            PowerSpectrumModel(alpha0=3.0, correction=KappaCorrection(-1.0))

    def test_rational_positivity_rejected(self):
        with pytest.raises(DomainError):
            PowerSpectrumModel(
                alpha0=3.0,
                correction=RationalCorrection(p_coeffs=(-3.0, 1.0), q_coeffs=(1.0,)),
            )


class TestModelKappa:
    def test_values(self):
        assert model_kappa(PowerSpectrumModel(alpha0=3.0)) == 0.0
        assert model_kappa(PowerSpectrumModel(alpha0=3.0, correction=KappaCorrection(0.4))) == 0.4
        m = PowerSpectrumModel(
            alpha0=3.0, correction=RationalCorrection(p_coeffs=(1.0, 2.0), q_coeffs=(3.0, 1.0))
        )
        assert model_kappa(m) == pytest.approx(1.0 / 2.0 - 3.0 / 1.0)


class TestCheckRegularity:
    def test_constant_model(self):
        rep = check_regularity(PowerSpectrumModel(alpha0=3.0, g0=2.5), l_max=4096, r_max=4)
        assert rep.c0_bounds == (2.5, 2.5)
        assert all(rep.derivative_ok.values())

    def test_kappa_model_first_derivative(self):
        # analytic oracle: G'(u) = -g0 kappa / u^2, so |G'(u)| u = g0 kappa / u
        kappa, g0 = 0.5, 1.0
        rep = check_regularity(
            PowerSpectrumModel(alpha0=3.0, g0=g0, correction=KappaCorrection(kappa)),
            l_max=4096,
            r_max=1,
        )
        assert rep.derivative_ok[1]
        assert rep.sup_scaled[1] == pytest.approx(g0 * kappa, rel=1e-3)

    def test_rational_equal_degrees(self):
        m = PowerSpectrumModel(
            alpha0=3.0,
            correction=RationalCorrection(p_coeffs=(1.0, 2.0), q_coeffs=(3.0, 1.0)),
        )
        rep = check_regularity(m, l_max=4096, r_max=2)
        assert rep.derivative_ok[1] and rep.derivative_ok[2]

    def test_preconditions(self):
        m = PowerSpectrumModel(alpha0=3.0)
        with pytest.raises(DomainError):
            check_regularity(m, l_max=8, r_max=1)
        with pytest.raises(DomainError):
            check_regularity(m, l_max=100, r_max=5)
