import math
import pickle

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from tmslab.errors import DomainError, ParameterError
from tmslab.numerics import build_grid
from tmslab.twobody import (
    FRIEDRICHS,
    AccuracyWarning,
    ExtensionParam2B,
    RegularPart2B,
    SingularPair2B,
    alpha_from_tau,
    asymptotic_coeffs_2b,
    bound_state_energy,
    charge_extract_2b,
    form_value_2b,
    gaussian_trial,
    greens_function,
    shell_integral_2b,
    tau_from_alpha,
    tms_check_2b,
    u_xi_hat,
    u_xi_norm2,
)

PI = math.pi


def shell_oracle(xi, eta, lam, R):
    f = lambda p: 4 * PI * p * p * (xi / (p * p + lam) + eta / (p * p + lam) ** 2)
    return integrate.quad(f, 0, R, epsabs=0, epsrel=1e-12, limit=200)[0]


class TestParameters:
    def test_alpha_zero(self):
        assert tau_from_alpha(0.0, 1.0) == 2.0

    @given(st.floats(0.01, 100))
    def test_zero_of_map(self, lam):
        assert abs(tau_from_alpha(-math.sqrt(lam) / (4 * PI), lam)) < 1e-13 * lam

    @given(st.floats(-10, 10), st.floats(1e-3, 1e3))
    def test_round_trip(self, a, lam):
        assert abs(alpha_from_tau(tau_from_alpha(a, lam), lam) - a) <= 1e-15 * max(1.0, abs(a)) * 4

    def test_friedrichs(self):
        assert tau_from_alpha(FRIEDRICHS, 2.0) is FRIEDRICHS
        assert alpha_from_tau(FRIEDRICHS, 2.0) is FRIEDRICHS
        assert pickle.loads(pickle.dumps(FRIEDRICHS)) is FRIEDRICHS
        assert ExtensionParam2B(FRIEDRICHS, 1.0).scattering_length == 0.0

    def test_scattering_length(self):
        assert ExtensionParam2B(-1 / (4 * PI), 1.0).scattering_length == pytest.approx(1.0)
        assert ExtensionParam2B(0.0, 1.0).scattering_length == math.inf

    @pytest.mark.parametrize("lam", [0.0, -1.0, math.inf])
    def test_bad_lambda(self, lam):
        with pytest.raises(ParameterError):
            tau_from_alpha(0.0, lam)

    def test_nonfinite_charge(self):
        with pytest.raises(ParameterError):
            SingularPair2B(math.nan, 0.0, 1.0)


class TestDeficiency:
    def test_values(self):
        assert u_xi_hat(1, 1, 0) == 1
        assert u_xi_hat(1, 1, 1) == 0.5

    def test_norm(self):
        # the tail beyond p_max is 4 pi |xi|**2 / p_max, so the grid must reach far out
        g = build_grid("gauss-legendre-composite", 1024, 1e-4, 1e12)
        assert u_xi_norm2(2.0, 1.5, g) == pytest.approx(4 * PI**2 / math.sqrt(1.5), rel=1e-8)


class TestShell:
    def test_xi_limit(self):
        v = shell_integral_2b(SingularPair2B(1, 0, 1), 1e4)
        assert abs(v - 4 * PI * 1e4 - (-2 * PI**2)) < 2e-3  # remainder 4 pi / R

    def test_eta_limit(self):
        assert abs(shell_integral_2b(SingularPair2B(0, 1, 1), 1e4) - PI**2) < 2e-3

    def test_exact_value(self):
        v = shell_integral_2b(SingularPair2B(0, 1, 4), 1.0)
        assert v.real == pytest.approx(-2 * PI / 5 + PI * math.atan(0.5), rel=1e-14)

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 10), st.floats(0.01, 1e3))
    def test_quadrature_oracle(self, xi, eta, lam, R):
        ref = shell_oracle(xi, eta, lam, R)
        scale = shell_oracle(abs(xi), abs(eta), lam, R) + 1e-300
        assert abs(shell_integral_2b(SingularPair2B(xi, eta, lam), R) - ref) <= 1e-11 * scale

    def test_small_ball_series(self):
        # R << sqrt(lam): both profiles are O(R**3); compare with the leading terms
        lam, R = 9.0, 1e-4
        v = shell_integral_2b(SingularPair2B(1.0, 1.0, lam), R)
        lead = 4 * PI * R**3 / 3 / lam + 4 * PI * R**3 / 3 / lam**2
        assert v.real == pytest.approx(lead, rel=1e-8)

    def test_vector_R(self):
        v = shell_integral_2b(SingularPair2B(1, 1, 1), np.array([1.0, 10.0]))
        assert v.shape == (2,)

    def test_coeffs(self):
        assert asymptotic_coeffs_2b(SingularPair2B(1, 0, 1)) == pytest.approx((4 * PI, -2 * PI**2))
        assert asymptotic_coeffs_2b(SingularPair2B(0, 0, 3)) == (0, 0)

    @given(st.floats(-2, 2), st.floats(0.1, 10))
    def test_tms_ratio(self, a, lam):
        lin, const = asymptotic_coeffs_2b(SingularPair2B.tms(1.0, a, lam))
        assert (const / lin).real == pytest.approx(2 * PI**2 * a, abs=1e-12 * max(1, abs(2 * PI**2 * a)))


class TestTms:
    def test_by_construction(self):
        assert tms_check_2b(SingularPair2B.tms(1.0, 0.3, 2.0), 0.3) == 0

    def test_pure_eta(self):
        assert tms_check_2b(SingularPair2B(0, 1, 1), 0.7) == 1

    def test_krein_point(self):
        assert tms_check_2b(SingularPair2B(1, 0, 1), -1 / (4 * PI)) == pytest.approx(0, abs=1e-15)


class TestChargeExtraction:
    def test_converges_like_inverse_R(self):
        est = charge_extract_2b(SingularPair2B(1, 0, 1), [1e2, 1e3, 1e4])
        errs = [abs(e - 1) for e in est.estimates]
        assert errs[2] < errs[1] < errs[0]
        assert est.rate == pytest.approx(-1, abs=0.1)

    def test_zero_charge(self):
        est = charge_extract_2b(SingularPair2B(0, 1, 1), [1e2, 1e3, 1e4])
        for R, e in zip(est.R, est.estimates):
            assert abs(e) * R < 1

    def test_complex(self):
        est = charge_extract_2b(SingularPair2B(2 + 1j, 5, 3), [1e2, 1e3, 1e4])
        assert abs(est.estimates[-1] - (2 + 1j)) < 1e-3

    def test_bad_ladder(self):
        with pytest.raises(ParameterError):
            charge_extract_2b(SingularPair2B(1, 0, 1), [10, 5, 100])


class TestBoundState:
    def test_unit(self):
        assert bound_state_energy(-1 / (4 * PI)) == pytest.approx(-1, rel=1e-14)

    def test_deep(self):
        assert bound_state_energy(-1.0) == pytest.approx(-16 * PI**2, rel=1e-12)

    @pytest.mark.parametrize("a", [0.0, 1.0, FRIEDRICHS])
    def test_none(self, a):
        assert bound_state_energy(a) is None

    def test_underflow(self):
        assert bound_state_energy(-1e-200) == 0.0

    @given(st.floats(-50, -1e-4), st.floats(1e-3, 1e3))
    def test_hint_independent(self, a, hint):
        assert bound_state_energy(a, hint) == pytest.approx(-(4 * PI * a) ** 2, rel=1e-10)


class TestForm:
    def test_u_only(self, grid_default):
        phi = RegularPart2B(np.zeros(grid_default.n), grid_default)
        assert form_value_2b(phi, 1.0, 1.0, 2.0) == pytest.approx(PI**2, rel=1e-12)

    def test_krein_ratio(self, grid_default):
        phi = RegularPart2B(np.zeros(grid_default.n), grid_default)
        v = form_value_2b(phi, 1.0, 1.0, 0.0)
        assert v == pytest.approx(-PI**2) and v / (PI**2) == pytest.approx(-1.0)

    def test_no_charge_gives_dirichlet(self, grid_default):
        phi = gaussian_trial(grid_default, 0.7, 2.0)
        g = grid_default
        grad = np.sum(4 * PI * g.measure * g.nodes**2 * phi.samples**2)
        assert form_value_2b(phi, 0.0, 3.0, 11.0) == pytest.approx(grad, rel=1e-12)
        # analytic: 4 pi * 4 int p^4 exp(-1.4 p^2) dp
        assert grad == pytest.approx(16 * PI * 3 * math.sqrt(PI) / (8 * 1.4**2.5), rel=1e-8)

    def test_warns_without_decay(self, grid_default):
        phi = RegularPart2B(np.ones(grid_default.n), grid_default)
        with pytest.warns(AccuracyWarning):
            form_value_2b(phi, 1.0, 1.0, 1.0)


class TestGreen:
    def test_coulomb_limit(self):
        assert greens_function(1.0, 1e-12) == pytest.approx(1 / (4 * PI), rel=1e-6)

    def test_value(self):
        assert greens_function(1.0, 1.0) == pytest.approx(math.exp(-1) / (4 * PI))

    def test_norm(self):
        v = integrate.quad(lambda x: 4 * PI * x * x * greens_function(x, 2.0) ** 2, 0, np.inf, epsrel=1e-12)[0]
        assert v == pytest.approx(1 / (8 * PI * math.sqrt(2.0)), rel=1e-8)

    def test_origin(self):
        with pytest.raises(DomainError):
            greens_function(0.0, 1.0)

    def test_fourier_pair(self):
        # G is the kernel of (-Delta + lam)^-1: its transform is (2 pi)^-3/2 / (p^2 + lam)
        lam, p = 1.3, 0.8
        v = integrate.quad(lambda x: 4 * PI * x * x * greens_function(x, lam) * math.sin(p * x) / (p * x),
                           1e-12, np.inf, limit=400, epsrel=1e-11)[0]
        assert v == pytest.approx(1 / (p * p + lam), rel=1e-8)
