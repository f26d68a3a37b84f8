"""Acceptance suite: one test per exit criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Tolerances are pinned here and nowhere else.
"""

import time
from itertools import product

import numpy as np
import pytest

from finsler2d.catalog import ENTRIES, flag_curvature_reference
from finsler2d.criteria import (
    douglas_fit,
    kropina_connection_residual,
    prop34_residual,
    rij_condition_check,
    quadratic_spray_fit,
)
from finsler2d.curvature import flag_curvature_2d, k_curvature, matsumoto_pflat_test
from finsler2d.deform import (
    DeformError,
    HarmonicPair,
    b2_expr,
    bar_alpha,
    construct_rem61,
    kropina_deform,
    m3_deform,
    norm_power_eta,
    radial_pair,
)
from finsler2d.exprlang import MetricDef, eval_value, parse_expr
from finsler2d.finsler import (
    direct_spray_oracle,
    finsler_norm,
    hamel_residual,
    projective_factor,
    spray_values,
)
from finsler2d.geometry import covariant_data, gauss_curvature, metric_at
from finsler2d.jets import eval_jet, finite_diff_oracle
from finsler2d.phi import MATCHING_IDENTITIES, PhiSpec, phi_identity_residual
from finsler2d.sampling import (
    direction_samples,
    random_expr_text,
    random_smooth_metric,
    sample_points,
)

SEED = 20250809


def _verdict(number: int, ok: bool, detail: str):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {number:2d}] {status}  {detail}")
    assert ok, f"criterion {number}: {detail}"


FAMILY_SPECS = (
    PhiSpec("kropina_linear", c=1.0),
    PhiSpec("thm41_ii", k1=0.5, k2=0.3),
    PhiSpec("thm41_iii", k1=0.4, k2=-0.2, m=2.0),
    PhiSpec("thm41_iv", m=2.0, k=0.3),
    PhiSpec("thm41_iv_constb", m=2.0, b=1.2),
    PhiSpec("thm41_v", m=2.0, k=0.25, b=1.2),
    PhiSpec("m_kropina", m=-2.0),
)


def test_criterion_01_spray_cross_path():
    rng = np.random.default_rng(SEED)
    start = time.time()
    worst = 0.0
    for spec in FAMILY_SPECS:
        md = random_smooth_metric(rng, spec)
        done = 0
        while done < 20:
            p = sample_points(rng, 1)[0]
            dirs = direction_samples(md, p)
            y = dirs[rng.integers(len(dirs))]
            got = spray_values(md, p, y)
            ref = direct_spray_oracle(md, p, y)
            scale = max(np.max(np.abs(ref)), np.max(np.abs(got)), 1e-12)
            worst = max(worst, float(np.max(np.abs(got - ref)) / scale))
            done += 1
    elapsed = time.time() - start
    _verdict(
        1,
        worst <= 1e-8 and elapsed < 10.0,
        f"max relative spray deviation {worst:.3e} over 7 families x 20 samples "
        f"in {elapsed:.2f}s",
    )


def test_criterion_02_inverse_plus_linear_always_douglas():
    rng = np.random.default_rng(SEED + 1)
    worst = 0.0
    for i in range(5):
        c = float(i % 2)
        md = random_smooth_metric(rng, PhiSpec("kropina_linear", c=c))
        for p in sample_points(rng, 10):
            worst = max(worst, douglas_fit(md, p).residual)
    _verdict(2, worst <= 1e-7, f"max Douglas residual {worst:.3e} over 5 metrics x 10 points")


def test_criterion_03_k_curvature_closed_form():
    rng = np.random.default_rng(SEED + 2)
    md = ENTRIES["ex83"].build()
    worst = 0.0
    for p in sample_points(rng, 10):
        eta3 = eval_jet(md.b[0], p, 3).partial((0, 3))
        y = direction_samples(md, p)[0]
        expected = -1.5 * eta3 * y[0]
        got = k_curvature(md, p, y)
        worst = max(worst, abs(got - expected) / abs(expected))
    unit = abs(k_curvature(md, (0.8, 0.6), (1.0, 0.4)) - (-9.0))
    mdq = ENTRIES["ex83quad"].build()
    quad_max = max(
        abs(k_curvature(mdq, p, direction_samples(mdq, p)[0])) for p in sample_points(rng, 4)
    )
    flat = matsumoto_pflat_test(mdq, sample_points(rng, 3)).projectively_flat
    _verdict(
        3,
        worst <= 1e-6 and unit <= 1e-6 * 9.0 and quad_max <= 1e-8 and flat,
        f"K12 closed-form deviation {worst:.3e}; |K12(y1=1)+9| = {unit:.2e}; "
        f"quadratic-eta max |K12| {quad_max:.3e}; flat verdict {flat}",
    )


def test_criterion_04_constructed_douglas_not_flat():
    rng = np.random.default_rng(SEED + 3)
    md = ENTRIES["ex84"].build()
    d_max = 0.0
    c_max = 0.0
    k_min = np.inf
    for p in sample_points(rng, 10):
        d_max = max(d_max, douglas_fit(md, p).residual)
        c_max = max(c_max, rij_condition_check("cor61_ii", md, p).residual)
        m = metric_at(md, p)
        y = direction_samples(md, p)[0]
        alpha = float(np.sqrt(y @ m.a @ y))
        k_min = min(k_min, abs(k_curvature(md, p, y / alpha)))
    verdict = matsumoto_pflat_test(md, sample_points(rng, 3)).verdict
    _verdict(
        4,
        d_max <= 1e-7 and c_max <= 1e-7 and k_min >= 1e-4 and verdict == "not_projectively_flat",
        f"Douglas {d_max:.2e}, condition {c_max:.2e}, min |K12| {k_min:.2e}, verdict {verdict}",
    )


def test_criterion_05_power_chart_examples():
    rng = np.random.default_rng(SEED + 4)
    md81 = ENTRIES["ex81"].build()
    flat81 = matsumoto_pflat_test(md81, sample_points(rng, 3)).projectively_flat
    md82 = ENTRIES["ex82"].build()
    berwald = max(quadratic_spray_fit(md82, p) for p in sample_points(rng, 3))
    k_max = 0.0
    s_min = np.inf
    for p in sample_points(rng, 3):
        y = direction_samples(md82, p)[0]
        k_max = max(k_max, abs(flag_curvature_2d(md82, p, y)))
        s_min = min(s_min, abs(covariant_data(md82, p, y).s[0, 1]))
    _verdict(
        5,
        flat81 and berwald <= 1e-8 and k_max <= 1e-8 and s_min > 1e-3,
        f"radial chart flat {flat81}; quadratic-fit {berwald:.2e}; "
        f"max |K| {k_max:.2e}; min |s_12| {s_min:.2e}",
    )


def test_criterion_06_projective_chart_family():
    rng = np.random.default_rng(SEED + 5)
    md = ENTRIES["flat_chart"].build()
    hamel_max = 0.0
    p_dev = 0.0
    k_dev = 0.0
    for p in sample_points(rng, 6):
        y = direction_samples(md, p)[0]
        hamel_max = max(hamel_max, float(np.max(np.abs(hamel_residual(md, p, y)))))
        pf = projective_factor(md, p, y)
        eta1 = eval_jet(md.b[0], p, 1).partial((1, 0))
        p_ref = eta1 * y[0] ** 2 / (2.0 * finsler_norm(md, p, y))
        p_dev = max(p_dev, abs(pf.P - p_ref) / max(abs(p_ref), 1e-12))
        k_ref = flag_curvature_reference(md, p, y, c=1.0)
        k_dev = max(k_dev, abs(flag_curvature_2d(md, p, y) - k_ref) / max(abs(k_ref), 1e-12))
    pair = HarmonicPair(parse_expr("1", 2), parse_expr("0", 2))
    md_c0 = construct_rem61(pair, parse_expr("2+sin(x1)", 2), 2.0, 0.0).metric
    md_const = construct_rem61(pair, parse_expr("2", 2), 2.0, 1.0).metric
    k_degenerate = 0.0
    for variant in (md_c0, md_const):
        for p in sample_points(rng, 3):
            y = direction_samples(variant, p)[0]
            k_degenerate = max(k_degenerate, abs(flag_curvature_2d(variant, p, y)))
    _verdict(
        6,
        hamel_max <= 1e-9 and p_dev <= 1e-9 and k_dev <= 1e-7 and k_degenerate <= 1e-8,
        f"Hamel {hamel_max:.2e}; P deviation {p_dev:.2e}; K deviation {k_dev:.2e}; "
        f"degenerate-family max |K| {k_degenerate:.2e}",
    )


def test_criterion_07_phi_identity_suite():
    specs = {
        "kropina_linear": PhiSpec("kropina_linear", c=0.7),
        "thm41_ii": PhiSpec("thm41_ii", k1=0.5, k2=0.3),
        "thm41_iii": PhiSpec("thm41_iii", k1=0.4, k2=-0.2, m=2.0),
        "thm41_iv": PhiSpec("thm41_iv", m=2.0, k=0.3),
        "thm41_iv_constb": PhiSpec("thm41_iv_constb", m=2.0, b=1.2),
        "thm41_v": PhiSpec("thm41_v", m=2.0, k=0.25, b=1.2),
    }
    worst = 0.0
    for family, identities in MATCHING_IDENTITIES.items():
        spec = specs[family]
        b2 = spec.b**2 if spec.b is not None else 1.3
        for identity in identities:
            for s in np.linspace(0.15, 0.75, 20):
                worst = max(worst, phi_identity_residual(spec, identity, float(s), b2))
    negatives = min(
        phi_identity_residual(specs["thm41_iv"], "kropina_ode", 0.5, 1.3),
        phi_identity_residual(specs["thm41_iv"], "y61", 0.5, 1.3),
        phi_identity_residual(PhiSpec("m_kropina", m=-2.0), "kropina_ode", 0.5, 1.3),
    )
    _verdict(
        7,
        worst <= 1e-9 and negatives > 1e-3,
        f"max matching-pair residual {worst:.3e}; min negative control {negatives:.3e}",
    )


def test_criterion_08_deformation_suite():
    rng = np.random.default_rng(SEED + 7)
    m = -2.0
    md = construct_rem61(radial_pair(), norm_power_eta(m), m, 0.0).metric
    dm = kropina_deform(md, m)
    norm_dev = 0.0
    f_dev = 0.0
    for p in sample_points(rng, 6):
        norm_dev = max(norm_dev, abs(metric_at(dm.metric, p).b2 - 1.0))
        y = direction_samples(md, p)[0]
        f0 = finsler_norm(md, p, y)
        f_dev = max(f_dev, abs(f0 - finsler_norm(dm.metric, p, y)) / abs(f0))
    md84 = ENTRIES["ex84"].build()
    dm3 = m3_deform(md84, 1.0)
    yg89_dev = 0.0
    prop_dev = 0.0
    for p in sample_points(rng, 4):
        b2 = eval_jet(b2_expr(md84), p, 0).value
        yg89_dev = max(
            yg89_dev, abs(metric_at(dm3.metric, p).b2 - b2 * b2 / (4.0 + 3.0 * b2 * b2))
        )
        ma = metric_at(dm3.metric, p)
        cd = covariant_data(dm3.metric, p, (1.0, 0.0))
        lam = float(np.sum(cd.r * ma.a) / np.sum(ma.a * ma.a))
        prop_dev = max(
            prop_dev,
            float(np.linalg.norm(cd.r - lam * ma.a) / max(np.linalg.norm(cd.r), 1e-30)),
        )
    flat_unit = MetricDef(
        2,
        [[parse_expr("1", 2), parse_expr("0", 2)], [parse_expr("0", 2), parse_expr("1", 2)]],
        [parse_expr("1", 2), parse_expr("0", 2)],
    )
    definiteness_ok = False
    try:
        bar_alpha(flat_unit, -1.0)
    except DeformError:
        definiteness_ok = True
    valid = bar_alpha(random_smooth_metric(rng), 0.5)
    eig_min = min(
        min(np.linalg.eigvalsh(metric_at(valid.metric, p).a)) for p in sample_points(rng, 10)
    )
    _verdict(
        8,
        norm_dev <= 1e-10
        and f_dev <= 1e-12
        and yg89_dev <= 1e-10
        and prop_dev <= 1e-7
        and definiteness_ok
        and eig_min > 0.0,
        f"unit-norm {norm_dev:.2e}; F-invariance {f_dev:.2e}; norm identity {yg89_dev:.2e}; "
        f"conformality {prop_dev:.2e}; definiteness guard {definiteness_ok}",
    )


def test_criterion_09_adapted_frame_residuals():
    rng = np.random.default_rng(SEED + 8)
    md_k = random_smooth_metric(rng, PhiSpec("m_kropina", m=-1.0))
    worst = 0.0
    cr_worst = 0.0
    for p in sample_points(rng, 3):
        worst = max(worst, prop34_residual(md_k, p).max_residual)
        cr_worst = max(cr_worst, kropina_connection_residual(md_k, p))
    md84 = ENTRIES["ex84"].build()
    for p in sample_points(rng, 3):
        worst = max(worst, prop34_residual(md84, p).max_residual)
    _verdict(
        9,
        worst <= 1e-6 and cr_worst <= 1e-6,
        f"max identity-curve residual {worst:.3e}; connection relations {cr_worst:.3e}",
    )


_FD_LADDERS = {
    1: (1.6e-2, 8e-3, 4e-3, 2e-3),
    2: (3.2e-2, 1.6e-2, 8e-3, 4e-3),
    3: (6e-2, 3e-2, 1.5e-2, 7.5e-3),
    4: (8e-2, 4e-2, 2e-2, 1e-2, 5e-3),
}


def _fd_reference(f, x, alpha):
    """Oracle value at the ladder rung whose extrapolated pair self-agrees best."""
    k = sum(alpha)
    hs = _FD_LADDERS[k]
    r1 = [finite_diff_oracle(f, x, alpha, h=h) for h in hs]
    r2 = [(16.0 * r1[i + 1] - r1[i]) / 15.0 for i in range(len(r1) - 1)]
    gaps = [abs(r2[i] - r2[i + 1]) for i in range(len(r2) - 1)]
    i = int(np.argmin(gaps))
    return 0.5 * (r2[i] + r2[i + 1])


def test_criterion_10_derivative_engine_oracle():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    count = 0
    while count < 200:
        expr = parse_expr(random_expr_text(rng, depth=2), 2)
        x = rng.uniform(0.7, 1.3, size=2)
        try:
            jet = eval_jet(expr, x, 4)
        except ArithmeticError:
            continue
        partials = np.array(list(jet.partials.values()))
        if not np.all(np.isfinite(partials)) or np.max(np.abs(partials)) > 1e3:
            continue
        count += 1
        f0 = eval_value(expr, x)
        f = lambda p: eval_value(expr, p) - f0
        scale = max(1e-2, max(abs(v) for a, v in jet.partials.items() if sum(a) >= 1))
        for k in range(1, 5):
            for alpha in (a for a in product(range(k + 1), repeat=2) if sum(a) == k):
                err = abs(_fd_reference(f, x, alpha) - jet.partial(alpha)) / scale
                worst = max(worst, err)
    _verdict(
        10,
        worst <= 1e-6,
        f"max relative jet-vs-oracle deviation {worst:.3e} over {count} expression/point pairs",
    )


def test_criterion_11_flat_base_and_antisymmetric_identity():
    rng = np.random.default_rng(SEED + 10)
    # flat base metrics from conjugate-harmonic pairs
    pairs = [
        radial_pair(),
        HarmonicPair(parse_expr("x1^2-x2^2", 2), parse_expr("2*x1*x2", 2)),
    ]
    gauss_max = 0.0
    for pair in pairs:
        base = construct_rem61(pair, parse_expr("1", 2), 2.0, 0.0).metric
        for p in sample_points(rng, 5):
            gauss_max = max(gauss_max, abs(gauss_curvature(base, p)))
    identity_max = 0.0
    for _ in range(20):
        md = random_smooth_metric(rng)
        p = sample_points(rng, 1)[0]
        cd = covariant_data(md, p, (1.0, 0.0))
        m = metric_at(md, p)
        rhs = (np.outer(m.b, cd.s_vec) - np.outer(cd.s_vec, m.b)) / m.b2
        scale = max(np.max(np.abs(cd.s)), np.max(np.abs(rhs)), 1e-12)
        identity_max = max(identity_max, float(np.max(np.abs(cd.s - rhs)) / scale))
    _verdict(
        11,
        gauss_max <= 1e-8 and identity_max <= 1e-10,
        f"flat-base curvature {gauss_max:.3e}; antisymmetric-part identity {identity_max:.3e}",
    )
