import math

import numpy as np
import pytest

from finsler2d.exprlang import parse_expr
from finsler2d.jets import finite_diff_oracle
from finsler2d.phi import (
    MATCHING_IDENTITIES,
    PhiDomainError,
    PhiSpec,
    linear_coefficient,
    phi_eval,
    phi_identity_residual,
    phi_integral_j4,
    phi_series,
    quadrature_thm41_v,
    regularity_check,
    validate_phi_params,
)

FAMILY_SPECS = {
    "kropina_linear": PhiSpec("kropina_linear", c=0.7),
    "thm41_ii": PhiSpec("thm41_ii", k1=0.5, k2=0.3),
    "thm41_iii": PhiSpec("thm41_iii", k1=0.4, k2=-0.2, m=2.0),
    "thm41_iv": PhiSpec("thm41_iv", m=2.0, k=0.3),
    "thm41_iv_constb": PhiSpec("thm41_iv_constb", m=2.0, b=1.2),
    "thm41_v": PhiSpec("thm41_v", m=2.0, k=0.25, b=1.2),
    "m_kropina": PhiSpec("m_kropina", m=-2.0),
}


class TestPhiEval:
    def test_inverse_family_hand_values(self):
        pe = phi_eval(PhiSpec("kropina_linear", c=0.0), 0.5, 1.0)
        assert pe.phi == pytest.approx(2.0)
        assert pe.dphi == pytest.approx(-4.0)
        assert pe.d2phi == pytest.approx(16.0)
        assert pe.Q == pytest.approx(-1.0)

    def test_square_family_hand_values(self):
        pe = phi_eval(PhiSpec("thm41_iv", m=2.0, k=0.0), 0.5, 1.0)
        assert pe.phi == pytest.approx(0.25)
        assert pe.d2phi == pytest.approx(2.0)
        assert pe.Q == pytest.approx(-2.0 / 0.5)

    def test_randers_degenerate_direction_raises(self):
        # phi = 1 + s^2 has phi - s phi' = 1 - s^2 = 0 at s = 1
        spec = PhiSpec("expr", expr=parse_expr("1+x1^2", 1))
        with pytest.raises(PhiDomainError, match="Randers"):
            phi_eval(spec, 1.0, 2.0)

    @pytest.mark.parametrize("name", sorted(FAMILY_SPECS))
    def test_derivatives_match_finite_differences(self, name):
        spec = FAMILY_SPECS[name]
        for s in (0.25, 0.45, 0.65):
            pe = phi_eval(spec, s, 1.5)
            f = lambda p: phi_series(spec, float(p[0]), 0)[0]
            for order, got in ((1, pe.dphi), (2, pe.d2phi), (3, pe.d3phi)):
                ref = finite_diff_oracle(f, (s,), (order,), h=2e-3)
                assert got == pytest.approx(ref, rel=1e-7, abs=1e-7)

    def test_missing_parameters_rejected(self):
        with pytest.raises(PhiDomainError, match="needs parameters"):
            validate_phi_params(PhiSpec("thm41_iv", m=2.0))

    def test_m_zero_or_one_rejected(self):
        for m in (0.0, 1.0):
            with pytest.raises(PhiDomainError):
                validate_phi_params(PhiSpec("m_kropina", m=m))


class TestIntegralFamily:
    def test_closed_form_for_square_case(self):
        # m=2, k=0 integrates to 2 b (b - sqrt(b^2-s^2))
        b = 1.0
        for s in (0.1, 0.3, 0.6):
            got = quadrature_thm41_v(2.0, 0.0, b, s)
            ref = 2.0 * b * (b - math.sqrt(b * b - s * s))
            assert got == pytest.approx(ref, abs=1e-12)

    def test_derivatives_against_closed_form(self):
        b, s = 1.0, 0.3
        phi, dphi, d2phi, _ = phi_integral_j4(2.0, 0.0, b, s)
        assert dphi == pytest.approx(2.0 * b * s / math.sqrt(b * b - s * s), abs=1e-10)
        assert d2phi == pytest.approx(2.0 * b * b * b / (b * b - s * s) ** 1.5, abs=1e-9)

    def test_small_s_normalization(self):
        # phi ~ s^m (1 + O(s)) near zero for m = 2
        for s in (1e-3, 3e-3):
            phi = quadrature_thm41_v(2.0, 0.0, 1.0, s)
            assert phi / s**2 == pytest.approx(1.0, rel=1e-4)

    def test_defining_ratio_identity(self):
        spec = PhiSpec("thm41_v", m=2.0, k=0.5, b=1.0)
        assert phi_identity_residual(spec, "w69", 0.3, 1.0) <= 1e-9

    def test_domain_errors(self):
        with pytest.raises(PhiDomainError, match=r"\|s\| < b"):
            quadrature_thm41_v(2.0, 0.0, 1.0, 1.0)
        with pytest.raises(PhiDomainError):
            validate_phi_params(PhiSpec("thm41_v", m=-1.0, k=0.0, b=1.0))

    def test_negative_s_parity_for_integer_m(self):
        got = quadrature_thm41_v(3.0, 0.2, 1.2, -0.4)
        assert got == pytest.approx(-quadrature_thm41_v(3.0, 0.2, 1.2, 0.4), abs=1e-12)


class TestIdentities:
    def test_inverse_family_ode_any_c(self):
        for c in (0.0, 0.7, -1.3):
            res = phi_identity_residual(PhiSpec("kropina_linear", c=c), "kropina_ode", 0.7, 1.0)
            assert res <= 1e-12

    @pytest.mark.parametrize(
        "family", sorted(f for f in MATCHING_IDENTITIES)
    )
    def test_matching_pairs_on_grid(self, family):
        spec = FAMILY_SPECS[family]
        b2 = spec.b**2 if spec.b is not None else 1.3
        for identity in MATCHING_IDENTITIES[family]:
            for s in np.linspace(0.15, 0.75, 20):
                assert phi_identity_residual(spec, identity, float(s), b2) <= 1e-9, (
                    family,
                    identity,
                    s,
                )

    def test_negative_control(self):
        # the square family does not satisfy the inverse-family ODE
        res = phi_identity_residual(FAMILY_SPECS["thm41_iv"], "kropina_ode", 0.5, 1.3)
        assert res > 1e-3

    def test_cross_family_negative_controls(self):
        # nonzero k breaks the k2-free second-derivative relation
        assert phi_identity_residual(FAMILY_SPECS["thm41_iv"], "y61", 0.5, 1.3) > 1e-3
        assert (
            phi_identity_residual(FAMILY_SPECS["m_kropina"], "kropina_ode", 0.5, 1.3) > 1e-3
        )

    def test_constb_equals_general_at_matched_k(self):
        # the const-norm variant is the general family at k = -1/b^2
        b = 1.2
        general = PhiSpec("thm41_iv", m=2.0, k=-1.0 / b**2)
        constb = PhiSpec("thm41_iv_constb", m=2.0, b=b)
        for s in np.linspace(0.1, 0.9, 15):
            sg = phi_series(general, float(s), 3)
            sc = phi_series(constb, float(s), 3)
            assert np.max(np.abs(sg - sc)) <= 1e-12

    def test_degree_minus_three_contains_power_family(self):
        # k1 = k2^2 reduces the four-parameter family to the power family
        k2 = 0.3
        left = PhiSpec("thm41_ii", k1=k2 * k2, k2=k2)
        right = PhiSpec("thm41_iv", m=-3.0, k=k2)
        for s in np.linspace(0.2, 0.8, 12):
            ql = phi_eval(left, float(s), 1.4).Q
            qr = phi_eval(right, float(s), 1.4).Q
            assert ql == pytest.approx(qr, abs=1e-10)

    def test_linear_coefficient_helper(self):
        assert linear_coefficient(PhiSpec("kropina_linear", c=2.0)) == 2.0
        assert linear_coefficient(FAMILY_SPECS["thm41_ii"]) == 0.5
        assert linear_coefficient(FAMILY_SPECS["m_kropina"]) == 0.0


class TestRegularity:
    def test_kropina_is_singular(self):
        report = regularity_check(PhiSpec("m_kropina", m=-1.0), b0=1.0, rho=0.5)
        assert not report
        assert report.reason

    def test_randers_control(self):
        randers = PhiSpec("expr", expr=parse_expr("1+x1", 1))
        assert regularity_check(randers, b0=1.0, rho=0.9)
        wide = regularity_check(randers, b0=1.5, rho=1.2)
        assert not wide  # phi < 0 at s < -1

    def test_square_family_fails_at_zero(self):
        report = regularity_check(PhiSpec("thm41_iv", m=2.0, k=0.0), b0=1.0, rho=0.5)
        assert not report
        assert report.violation_s is not None
