import numpy as np
import pytest
from conftest import euclidean_metric

from finsler2d.catalog import ENTRIES
from finsler2d.criteria import (
    classify,
    douglas_fit,
    kropina_connection_residual,
    projective_factor_formula,
    prop34_residual,
    prop35_residual,
    quadratic_spray_fit,
    rij_condition_check,
    special_frame,
    spray_form_fit,
)
from finsler2d.deform import HarmonicPair, construct_rem61
from finsler2d.exprlang import MetricDef, parse_expr
from finsler2d.finsler import projective_factor
from finsler2d.geometry import metric_at
from finsler2d.phi import PhiSpec
from finsler2d.sampling import direction_samples, random_smooth_metric, sample_points


def _flat_chart(m, c, eta_text="2+sin(x1)"):
    pair = HarmonicPair(parse_expr("1", 2), parse_expr("0", 2))
    return construct_rem61(pair, parse_expr(eta_text, 2), m, c).metric


class TestDouglasFit:
    def test_inverse_plus_linear_family_always_passes(self, rng):
        for c in (0.0, 1.0):
            md = random_smooth_metric(rng, PhiSpec("kropina_linear", c=c))
            for p in sample_points(rng, 3):
                assert douglas_fit(md, p).residual <= 1e-7

    def test_riemannian_control_is_tiny(self, rng):
        md = random_smooth_metric(rng, PhiSpec("riemannian"))
        assert douglas_fit(md, (0.9, 1.1)).residual <= 1e-10

    def test_generic_power_family_fails(self, rng):
        md = random_smooth_metric(rng, PhiSpec("m_kropina", m=2.0))
        assert douglas_fit(md, (0.9, 1.1)).residual > 1e-4

    def test_insufficient_samples_rejected(self, rng):
        md = random_smooth_metric(rng, PhiSpec("kropina_linear", c=0.0))
        with pytest.raises(ValueError, match="12"):
            douglas_fit(md, (0.9, 1.1), samples=np.array([[1.0, 0.0], [0.0, 1.0]]))

    def test_residual_invariances(self, rng):
        md = random_smooth_metric(rng, PhiSpec("m_kropina", m=2.0))
        p = (1.0, 0.8)
        base_samples = direction_samples(md, p)
        base = douglas_fit(md, p, samples=base_samples).residual
        scaled = douglas_fit(md, p, samples=2.5 * base_samples).residual
        theta = 0.37
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        rotated = douglas_fit(md, p, samples=base_samples @ rot.T).residual
        assert 0.5 <= scaled / base <= 2.0
        assert 0.5 <= rotated / base <= 2.0

    def test_fitted_connection_on_berwald_instance(self, rng):
        # for a Berwald metric the fitted Gamma reproduces the spray exactly
        md = ENTRIES["ex82"].build()
        p = (0.8, 0.7)
        fit = douglas_fit(md, p)
        from finsler2d.finsler import spray_values

        for y in direction_samples(md, p)[:4]:
            g = spray_values(md, p, y)
            d12 = g[0] * y[1] - g[1] * y[0]
            model = 0.5 * (
                np.einsum("kl,k,l->", fit.Gamma[0], y, y) * y[1]
                - np.einsum("kl,k,l->", fit.Gamma[1], y, y) * y[0]
            )
            assert d12 == pytest.approx(model, abs=1e-10)


class TestSpecialFrame:
    def test_adapted_input_is_identity(self):
        md = euclidean_metric(b=("0.7", "0"))
        fr = special_frame(md, (1.0, 1.0))
        assert np.allclose(fr.T, np.eye(2), atol=1e-14)

    def test_rotated_form(self):
        md = euclidean_metric(b=("0", "0.7"))
        fr = special_frame(md, (1.0, 1.0))
        assert np.allclose(fr.covector([0.0, 0.7]), [0.7, 0.0], atol=1e-12)

    def test_defining_equations_on_random_input(self, rng):
        for _ in range(6):
            md = random_smooth_metric(rng)
            p = sample_points(rng, 1)[0]
            fr = special_frame(md, p)
            m = metric_at(md, p)
            assert np.max(np.abs(fr.T.T @ m.a @ fr.T - np.eye(2))) <= 1e-12
            assert np.max(np.abs(fr.covector(m.b) - [fr.b_norm, 0.0])) <= 1e-12

    def test_vanishing_form_rejected(self):
        md = euclidean_metric(b=("0", "0"))
        with pytest.raises(ValueError, match="vanishes"):
            special_frame(md, (1.0, 1.0))


class TestAdaptedFrameResiduals:
    def test_pure_inverse_family_curves(self, rng):
        md = random_smooth_metric(rng, PhiSpec("m_kropina", m=-1.0))
        for p in sample_points(rng, 2):
            curves = prop34_residual(md, p)
            assert curves.max_residual <= 1e-6
            assert kropina_connection_residual(md, p) <= 1e-6

    def test_constructed_degree_minus_three_curves(self, rng):
        md = ENTRIES["ex84"].build()
        for p in sample_points(rng, 2):
            assert prop34_residual(md, p).max_residual <= 1e-6

    def test_negative_control_bounded_away(self, rng):
        md = random_smooth_metric(rng, PhiSpec("m_kropina", m=2.0))
        curves = prop34_residual(md, (1.0, 0.9))
        assert curves.max_residual > 1e-3

    def test_projective_flatness_curves(self, rng):
        # the flat chart is projective in its own coordinates
        md = _flat_chart(2.0, 1.0)
        md = MetricDef(2, md.a, md.b, PhiSpec("thm41_iii", k1=1.0, k2=0.0, m=2.0))
        for p in sample_points(rng, 2):
            assert prop35_residual(md, p).max_residual <= 1e-6
        # the radial chart is not projective in its chart
        md81 = ENTRIES["ex81"].build()
        assert prop35_residual(md81, (0.8, 0.7)).max_residual > 1e-4


class TestConditionChecks:
    def test_radial_chart_power_condition(self, rng):
        md = ENTRIES["ex81"].build()
        for p in sample_points(rng, 3):
            rep = rij_condition_check("cor61_iii", md, p)
            assert rep.verdict == "pass"

    def test_rotational_chart_power_condition(self, rng):
        md = ENTRIES["ex82"].build()
        for p in sample_points(rng, 3):
            rep = rij_condition_check("cor61_iv", md, p)
            assert rep.verdict == "pass"

    def test_parallel_form_passes_with_zero_tau(self):
        md = euclidean_metric(PhiSpec("thm41_iii", k1=0.4, k2=-0.2, m=2.0), b=("0.5", "0"))
        rep = rij_condition_check("thm41_iii", md, (1.0, 1.0))
        assert rep.verdict == "pass"
        assert rep.tau == pytest.approx(0.0, abs=1e-14)

    def test_random_form_fails_no_scalar_case(self, rng):
        md = random_smooth_metric(rng, PhiSpec("thm41_v", m=2.0, k=0.25, b=1.2))
        rep = rij_condition_check("thm41_v", md, (0.9, 1.0))
        assert rep.verdict == "fail"
        assert rep.tau is None

    def test_constructed_case_passes_and_others_fail(self, rng):
        md84 = ENTRIES["ex84"].build()
        passing = rij_condition_check("cor61_ii", md84, (0.9, 0.8))
        assert passing.verdict == "pass"
        # same geometry interrogated against the wrong normal forms
        wrong_iv = MetricDef(2, md84.a, md84.b, PhiSpec("thm41_iv", m=-3.0, k=0.4))
        assert rij_condition_check("thm41_iv", wrong_iv, (0.9, 0.8)).verdict == "fail"
        wrong_v = MetricDef(2, md84.a, md84.b, PhiSpec("thm41_v", m=2.0, k=0.2, b=1.1))
        assert rij_condition_check("thm41_v", wrong_v, (0.9, 0.8)).verdict == "fail"

    def test_containment_of_reduced_parameters(self, rng):
        # with k1 = k2^2 = 0 the degree-minus-three condition coincides with
        # the power condition at m = -3, k = 0: both pass on that chart family
        md = _flat_chart(-3.0, 0.0)
        md_ii = MetricDef(2, md.a, md.b, PhiSpec("thm41_ii", k1=0.0, k2=0.0))
        md_iv = MetricDef(2, md.a, md.b, PhiSpec("thm41_iv", m=-3.0, k=0.0))
        for p in sample_points(rng, 2):
            assert rij_condition_check("thm41_ii", md_ii, p).verdict == "pass"
            assert rij_condition_check("thm41_iv", md_iv, p).verdict == "pass"

    def test_ill_conditioned_coefficient_warns(self):
        # b^2 = 0.25, so k2 near -4 sits next to the degenerate locus
        md = euclidean_metric(PhiSpec("thm41_ii", k1=0.2, k2=-4.0 + 1e-7), b=("0.5", "0"))
        rep = rij_condition_check("thm41_ii", md, (1.0, 1.0))
        assert "ill-conditioned" in rep.note
        md_exact = euclidean_metric(PhiSpec("thm41_ii", k1=0.2, k2=-4.0), b=("0.5", "0"))
        with pytest.raises(ValueError, match="undefined"):
            rij_condition_check("thm41_ii", md_exact, (1.0, 1.0))

    def test_report_serialization(self):
        md = ENTRIES["ex84"].build()
        rep = rij_condition_check("cor61_ii", md, (0.9, 0.8))
        data = rep.to_dict()
        assert set(data) >= {"case", "tau", "residual", "verdict", "samples_used"}
        assert rep.to_json().startswith("{")


class TestLemmaConstantNorm:
    def test_adapted_frame_sym_antisym_cancellation(self):
        # b of constant norm: the adapted-frame (1,2) entries of r and s cancel
        md = euclidean_metric(b=("0.8*cos(x1+x2)", "0.8*sin(x1+x2)"))
        from finsler2d.geometry import covariant_data

        for p in [(0.9, 0.5), (1.2, 0.7)]:
            fr = special_frame(md, p)
            cd = covariant_data(md, p, (1.0, 0.0))
            r_f = fr.two_tensor(cd.r)
            s_f = fr.two_tensor(cd.s)
            assert abs(r_f[0, 1] + s_f[0, 1]) <= 1e-8
            assert abs(r_f[0, 0]) <= 1e-8


class TestSprayFormFits:
    def test_inverse_plus_linear_projective_chart(self, rng):
        md = _flat_chart(-1.0, 1.0)
        md = MetricDef(2, md.a, md.b, PhiSpec("kropina_linear", c=1.0))
        for p in sample_points(rng, 2):
            fit = spray_form_fit("kropina_linear", md, p)
            assert fit.residual <= 1e-7
            y = direction_samples(md, p)[0]
            got = projective_factor_formula("kropina_linear", md, p, y, rho=fit.rho)
            ref = projective_factor(md, p, y)
            assert got.P == pytest.approx(ref.P, rel=1e-9, abs=1e-12)

    def test_degree_minus_three_projective_chart(self, rng):
        md = _flat_chart(-3.0, 0.0)
        md = MetricDef(2, md.a, md.b, PhiSpec("thm41_ii", k1=0.0, k2=0.0))
        p = sample_points(rng, 1)[0]
        fit = spray_form_fit("thm41_ii", md, p)
        assert fit.residual <= 1e-7
        y = direction_samples(md, p)[0]
        got = projective_factor_formula("thm41_ii", md, p, y, rho=fit.rho, tau=fit.tau)
        ref = projective_factor(md, p, y)
        assert got.P == pytest.approx(ref.P, rel=1e-9, abs=1e-12)

    def test_linear_part_with_closed_form_chart(self, rng):
        md = _flat_chart(2.0, 1.0)
        p = sample_points(rng, 1)[0]
        fit = spray_form_fit("thm41_iii", md, p)
        assert fit.residual <= 1e-7
        y = direction_samples(md, p)[0]
        got = projective_factor_formula("thm41_iii", md, p, y, rho=fit.rho, tau=fit.tau)
        ref = projective_factor(md, p, y)
        assert got.P == pytest.approx(ref.P, rel=1e-9, abs=1e-12)

    def test_power_family_projective_chart(self, rng):
        md = _flat_chart(2.0, 0.0)
        md = MetricDef(2, md.a, md.b, PhiSpec("thm41_iv", m=2.0, k=0.0))
        p = sample_points(rng, 1)[0]
        fit = spray_form_fit("thm41_iv", md, p)
        assert fit.residual <= 1e-7
        y = direction_samples(md, p)[0]
        got = projective_factor_formula("thm41_iv", md, p, y, rho=fit.rho, tau=fit.tau)
        ref = projective_factor(md, p, y)
        assert got.P == pytest.approx(ref.P, rel=1e-9, abs=1e-12)

    def test_trivial_integral_family_instance(self):
        md = euclidean_metric(PhiSpec("thm41_v", m=2.0, k=0.25, b=1.0), b=("0.5", "0"))
        fit = spray_form_fit("thm41_v", md, (0.8, 0.9))
        assert fit.residual <= 1e-10
        assert np.max(np.abs(fit.rho)) <= 1e-10
        got = projective_factor_formula("thm41_v", md, (0.8, 0.9), (1.0, 0.3), rho=fit.rho)
        ref = projective_factor(md, (0.8, 0.9), (1.0, 0.3))
        assert got.P == pytest.approx(ref.P, abs=1e-12)

    def test_non_projective_chart_fails_fit(self):
        md = ENTRIES["ex83"].build()
        assert spray_form_fit("kropina_linear", md, (0.9, 0.7)).residual > 1e-4

    def test_local_flatness_variant_on_foreign_chart(self):
        # the locally-flat quadratic-eta instance satisfies the alternate form
        # even though its chart is not projective; the chart form fails there
        md = ENTRIES["ex83quad"].build()
        p = (0.9, 0.7)
        assert spray_form_fit("kropina_linear_alt", md, p).residual <= 1e-7
        assert spray_form_fit("kropina_linear", md, p).residual > 1e-4
        # a Douglas but not locally flat instance fails the alternate form too
        md84 = ENTRIES["ex84"].build()
        assert spray_form_fit("thm41_ii_alt", md84, p).residual > 1e-4

    def test_flat_chart_pfactor_formula(self, rng):
        md = ENTRIES["flat_chart"].build()
        p = sample_points(rng, 1)[0]
        y = direction_samples(md, p)[0]
        got = projective_factor_formula("flat_chart", md, p, y)
        ref = projective_factor(md, p, y)
        assert got.P == pytest.approx(ref.P, rel=1e-9)


class TestClassifier:
    def test_inverse_plus_linear_label(self, rng):
        md = random_smooth_metric(rng, PhiSpec("kropina_linear", c=1.0))
        report = classify(md, sample_points(rng, 5))
        assert report.label == "thm41_i"
        assert report.douglas

    def test_constructed_degree_minus_three(self, rng):
        md = ENTRIES["ex84"].build()
        report = classify(md, sample_points(rng, 5))
        assert report.douglas
        assert "thm41_ii" in report.passing_cases

    def test_not_douglas(self, rng):
        md = random_smooth_metric(rng, PhiSpec("m_kropina", m=2.0))
        report = classify(md, sample_points(rng, 5))
        assert report.label == "not_douglas"
        assert not report.douglas

    def test_json_round_trip(self, rng):
        import json

        md = random_smooth_metric(rng, PhiSpec("kropina_linear", c=0.0))
        report = classify(md, sample_points(rng, 5))
        data = json.loads(report.to_json())
        assert data["label"] == report.label

    def test_needs_enough_points(self, rng):
        md = random_smooth_metric(rng, PhiSpec("kropina_linear", c=0.0))
        with pytest.raises(ValueError, match="5"):
            classify(md, sample_points(rng, 3))
