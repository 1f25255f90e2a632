import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from nlslab.nonlinearity import (DomainError, G_eval, G_quad, NonlinearityModel, check_admissibility,
                                 find_s0, g_complex, g_eval, h_eval)

POWERS = [NonlinearityModel.pure_power(p) for p in (3.0, 5.0, 7.0, 9.0)] + [
    NonlinearityModel.sum_of_powers([(1.0, 3.0), (0.5, 7.0)])]


def septic_table(n=2001, top=4.0):
    s = np.linspace(0.0, top, n)
    return NonlinearityModel.tabulated(s, s**7)


class TestScalarExamples:
    def test_g_values(self, septic):
        assert g_eval(septic, 0.0) == 0.0
        assert g_eval(septic, 2.0) == 128.0
        assert g_eval(septic, -2.0) == -128.0

    def test_g_complex(self, septic):
        assert g_complex(septic, 0j) == 0
        assert g_complex(septic, 2j) == pytest.approx(128j, rel=1e-15)
        z = 1 + 1j
        oracle = abs(z) ** 7 * z / abs(z)
        assert g_complex(septic, z) == pytest.approx(8 * (1 + 1j), rel=1e-14)
        assert g_complex(septic, z) == pytest.approx(oracle, rel=1e-14)

    def test_G_values(self, septic):
        assert G_eval(septic, 0.0) == 0.0
        assert G_eval(septic, 1.0) == 0.125

    def test_tabulated_G_matches_quadrature(self):
        tab = septic_table()
        assert G_quad(tab, 1.0) == pytest.approx(0.125, abs=1e-9)
        assert G_eval(tab, 1.0) == pytest.approx(0.125, abs=1e-9)

    def test_h_values(self, septic):
        assert h_eval(septic, 1.0) == pytest.approx(0.75, rel=1e-15)
        assert h_eval(NonlinearityModel.pure_power(5.0), 1.0) == pytest.approx(2.0 / 3.0, rel=1e-15)
        s = 2.0
        oracle = (s * s**7 - 2 * s**8 / 8) * s ** (-(2 + 4))
        assert h_eval(septic, 2.0) == pytest.approx(0.75 * 4.0, rel=1e-14)
        assert h_eval(septic, 2.0) == pytest.approx(oracle, rel=1e-14)

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_h_domain(self, septic, bad):
        with pytest.raises(DomainError):
            h_eval(septic, bad)

    def test_non_finite_rejected(self, septic):
        with pytest.raises(DomainError):
            g_eval(septic, math.nan)
        with pytest.raises(DomainError):
            g_complex(septic, complex(math.inf, 0))

    def test_tabulated_range(self):
        with pytest.raises(DomainError):
            septic_table().g(5.0)


class TestConstruction:
    def test_invalid_kind(self):
        with pytest.raises(ValueError):
            NonlinearityModel("cubic")

    def test_invalid_exponent(self):
        with pytest.raises(ValueError):
            NonlinearityModel.pure_power(1.0)

    def test_table_must_start_at_zero(self):
        with pytest.raises(ValueError):
            NonlinearityModel.tabulated([0.1, 1, 2, 3], [0, 1, 2, 3])

    @pytest.mark.parametrize("model", POWERS + [septic_table(50)], ids=lambda m: m.kind)
    def test_spec_round_trip(self, model):
        again = NonlinearityModel.from_spec(model.to_spec(), model.dim)
        s = np.linspace(0, 3.5, 17)
        np.testing.assert_array_equal(again.g(s), model.g(s))

    def test_metadata(self, septic):
        assert septic.lipschitz_exponent == 6.0
        assert septic.critical_exponent == 5.0
        assert NonlinearityModel.pure_power(3, dim=3).critical_exponent == pytest.approx(7 / 3)


@pytest.mark.parametrize("model", POWERS, ids=lambda m: str(m.terms))
def test_oddness_exact(model, rng):
    s = rng.uniform(-20, 20, 100)
    np.testing.assert_array_equal(model.g(-s), -model.g(s))


@pytest.mark.parametrize("model", POWERS + [septic_table()], ids=lambda m: m.kind)
def test_antiderivative_by_finite_difference(model, rng):
    s = rng.uniform(0.05, 3.0, 200)
    h = 1e-5 * s
    fd = (model.G(s + h) - model.G(s - h)) / (2 * h)
    np.testing.assert_allclose(fd, model.g(s), rtol=1e-6)


@given(st.floats(0.0, 3.9))
def test_tabulated_G_agrees_with_quadrature(s):
    tab = septic_table(401)
    assert float(tab.G(s)) == pytest.approx(G_quad(tab, s), rel=1e-9, abs=1e-14)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0, 2 * math.pi))
def test_gauge_covariance(x, y, theta):
    m = NonlinearityModel.pure_power(3.0)
    z = complex(x, y)
    rot = complex(math.cos(theta), math.sin(theta))
    assert g_complex(m, rot * z) == pytest.approx(rot * g_complex(m, z), rel=1e-12, abs=1e-300)


class TestAdmissibility:
    def test_septic_supercritical(self, septic):
        rep = check_admissibility(septic)
        assert rep.a1_ok and rep.supercritical and rep.a0b_ok

    def test_cubic_subcritical(self, cubic):
        rep = check_admissibility(cubic)
        assert not rep.supercritical
        assert not rep.a1_ok  # h decreases for p < 1 + 4/N

    def test_quintic_borderline(self):
        rep = check_admissibility(NonlinearityModel.pure_power(5.0))
        assert rep.borderline and not rep.supercritical

    @pytest.mark.parametrize("p", [6.0, 7.0, 9.0])
    def test_ratio_increasing_and_unbounded(self, p):
        rep = check_admissibility(NonlinearityModel.pure_power(p))
        assert rep.cond3_ok and rep.cond4_ok

    def test_growth_unbounded(self, septic):
        bounds = [float(septic.g_over_s(np.array([s]))[0]) for s in (10.0, 100.0, 1000.0)]
        assert bounds[0] < bounds[1] < bounds[2] and bounds[2] > 1e17

    def test_s0_matches_scalar_root(self, septic):
        rep = check_admissibility(septic, omega=1.0)
        oracle = brentq(lambda s: 0.5 * s * s - s**8 / 8.0, 0.5, 3.0, xtol=1e-15)
        assert rep.s0 == pytest.approx(oracle, rel=1e-13)
        assert rep.s0 == pytest.approx(4 ** (1 / 6), rel=1e-13)

    def test_s0_higher_dimension_satisfies_property(self):
        m = NonlinearityModel.pure_power(3.0, dim=3)
        s0 = find_s0(m, 1.0)
        assert s0 is not None and float(m.G(s0)) > 0.5 * s0 * s0

    def test_bad_range(self, septic):
        with pytest.raises(ValueError):
            check_admissibility(septic, (1.0, 0.5, 100))
        with pytest.raises(ValueError):
            check_admissibility(septic, (1e-3, 1.0, 5))

    def test_tabulated_uses_sampled_a1(self):
        rep = check_admissibility(septic_table(), (1e-3, 3.9, 128))
        assert rep.supercritical == rep.a1_ok
