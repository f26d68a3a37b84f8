"""Built-in example metrics with their expected verdicts.

Every entry's expectations reproduce under the default tolerances; the
``catalog run`` command is the regression suite for the whole engine.
Entries double as canonical inputs for the CLI (``catalog export`` writes
them as metric-definition files).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .criteria import douglas_fit, projective_factor_formula, quadratic_spray_fit, rij_condition_check
from .curvature import flag_curvature_2d, k_curvature, matsumoto_pflat_test
from .deform import (
    construct_rem61,
    construct_thm12_ii,
    norm_power_eta,
    radial_pair,
    rotational_pair,
)
from .exprlang import MetricDef, parse_expr
from .finsler import finsler_norm, hamel_residual, projective_factor
from .geometry import covariant_data, metric_at
from .jets import eval_jet
from .phi import PhiSpec
from .sampling import direction_samples, random_smooth_metric, sample_points


@dataclass
class CatalogEntry:
    name: str
    description: str
    build: object  # () -> MetricDef
    checks: list = field(default_factory=list)  # (check name, kwargs) pairs


def _metric_ex81() -> MetricDef:
    return construct_rem61(radial_pair(), norm_power_eta(-2.0), -2.0, 1.0).metric


def _metric_ex82() -> MetricDef:
    return construct_rem61(rotational_pair(), norm_power_eta(-2.0), -2.0, 0.0).metric


def _eta_chart_metric(eta_text: str, c: float) -> MetricDef:
    eta = parse_expr(eta_text, 2)
    zero = parse_expr("0", 2)
    return MetricDef(
        2,
        [[eta, zero], [zero, eta]],
        [eta, zero],
        PhiSpec("kropina_linear", c=c),
    )


def _metric_ex83() -> MetricDef:
    # a = eta I, b = (eta, 0) with eta = eta(x2): the linear-plus-inverse family
    return _eta_chart_metric("x2^3+2", 1.0)


def _metric_ex83_quad() -> MetricDef:
    return _eta_chart_metric("1+x2^2", 1.0)


def _metric_ex84() -> MetricDef:
    return construct_thm12_ii(parse_expr("x1", 2), rotational_pair(), 1.0)


def _metric_flat_chart(c: float = 1.0, eta_text: str = "2+sin(x1)", m: float = 2.0) -> MetricDef:
    eta = parse_expr(eta_text, 2)
    one = parse_expr("1", 2)
    zero = parse_expr("0", 2)
    from .deform import HarmonicPair

    return construct_rem61(HarmonicPair(one, zero), eta, m, c).metric


def _metric_kropina_smooth() -> MetricDef:
    rng = np.random.default_rng(20240211)
    return random_smooth_metric(rng, PhiSpec("kropina_linear", c=1.0))


def _metric_mkropina_generic() -> MetricDef:
    rng = np.random.default_rng(20240212)
    return random_smooth_metric(rng, PhiSpec("m_kropina", m=2.0))


def _flat_chart_eta_derivs(md: MetricDef, x, order: int):
    jet = eval_jet(md.b[0], x, order)
    return [jet.partial(tuple([k] + [0])) for k in range(order + 1)]


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def _check_douglas(md, rng, expect_pass=True, threshold=1e-7, n_points=5):
    worst = 0.0
    for p in sample_points(rng, n_points):
        worst = max(worst, douglas_fit(md, p, threshold=threshold).residual)
    ok = (worst <= threshold) == expect_pass
    return ok, f"max residual {worst:.3e}"


def _check_pflat(md, rng, expect_flat=True, n_points=4):
    report = matsumoto_pflat_test(md, sample_points(rng, n_points))
    ok = report.projectively_flat == expect_flat
    return ok, f"verdict {report.verdict}, k12 max {report.k12_max:.3e}"


def _check_berwald(md, rng, tol=1e-8, n_points=3):
    worst = max(quadratic_spray_fit(md, p) for p in sample_points(rng, n_points))
    return worst <= tol, f"quadratic fit residual {worst:.3e}"


def _check_flag_zero(md, rng, tol=1e-8, n_points=3):
    worst = 0.0
    for p in sample_points(rng, n_points):
        y = direction_samples(md, p)[0]
        worst = max(worst, abs(flag_curvature_2d(md, p, y)))
    return worst <= tol, f"max |K| {worst:.3e}"


def _check_beta_closed(md, rng, expect_closed, tol=1e-9, n_points=3):
    worst = max(
        abs(covariant_data(md, p, (1.0, 0.0)).s[0, 1]) for p in sample_points(rng, n_points)
    )
    ok = (worst <= tol) == expect_closed
    return ok, f"max |s_12| {worst:.3e}"


def _check_hamel(md, rng, expect_zero, tol=1e-9, n_points=3):
    worst = 0.0
    for p in sample_points(rng, n_points):
        y = direction_samples(md, p)[0]
        worst = max(worst, float(np.max(np.abs(hamel_residual(md, p, y)))))
    ok = (worst <= tol) == expect_zero
    return ok, f"max residual {worst:.3e}"


def _check_k12_closed_form(md, rng, c=1.0, tol=1e-6, n_points=4):
    """K12 = -(3/2) c eta''' y^1 for the linear-plus-inverse chart family."""
    worst = 0.0
    for p in sample_points(rng, n_points):
        jet = eval_jet(md.b[0], p, 3)
        eta3 = jet.partial((0, 3))
        y = direction_samples(md, p)[0]
        expected = -1.5 * c * eta3 * y[0]
        got = k_curvature(md, p, y)
        worst = max(worst, abs(got - expected) / max(abs(expected), 1e-10))
    return worst <= tol, f"max rel deviation {worst:.3e}"


def _check_k12_nonzero(md, rng, floor=1e-4, n_points=4):
    smallest = np.inf
    for p in sample_points(rng, n_points):
        m = metric_at(md, p)
        y = direction_samples(md, p)[0]
        alpha = float(np.sqrt(y @ m.a @ y))
        smallest = min(smallest, abs(k_curvature(md, p, y / alpha)))
    return smallest >= floor, f"min |K12| {smallest:.3e}"


def _check_rij_case(md, rng, case, threshold=1e-7, n_points=4):
    worst = max(
        rij_condition_check(case, md, p, threshold=threshold).residual
        for p in sample_points(rng, n_points)
    )
    return worst <= threshold, f"{case} max residual {worst:.3e}"


def _check_pfactor_formula(md, rng, tol=1e-9, n_points=3):
    """Chart projective factor against the closed form for the flat chart."""
    worst = 0.0
    for p in sample_points(rng, n_points):
        y = direction_samples(md, p)[0]
        got = projective_factor_formula("flat_chart", md, p, y).P
        ref = projective_factor(md, p, y).P
        worst = max(worst, abs(got - ref) / max(abs(ref), 1.0))
    return worst <= tol, f"max deviation {worst:.3e}"


def _check_flag_closed_form(md, rng, c=1.0, tol=1e-7, n_points=3):
    """K against the chart closed form driven by eta's first two derivatives."""
    worst = 0.0
    for p in sample_points(rng, n_points):
        jet = eval_jet(md.b[0], p, 2)
        eta1 = jet.partial((1, 0))
        eta11 = jet.partial((2, 0))
        y = direction_samples(md, p)[0]
        F = finsler_norm(md, p, y)
        ref = c * y[0] ** 3 / (2.0 * F**3) * (3.0 * c * eta1**2 * y[0] / (2.0 * F) - eta11)
        got = flag_curvature_2d(md, p, y)
        worst = max(worst, abs(got - ref) / max(abs(ref), 1e-12))
    return worst <= tol, f"max rel deviation {worst:.3e}"


_CHECKS = {
    "douglas_pass": lambda md, rng, **kw: _check_douglas(md, rng, True, **kw),
    "douglas_fail": lambda md, rng, **kw: _check_douglas(md, rng, False, **kw),
    "pflat_pass": lambda md, rng, **kw: _check_pflat(md, rng, True, **kw),
    "pflat_fail": lambda md, rng, **kw: _check_pflat(md, rng, False, **kw),
    "berwald": _check_berwald,
    "flag_zero": _check_flag_zero,
    "beta_closed": lambda md, rng, **kw: _check_beta_closed(md, rng, True, **kw),
    "beta_not_closed": lambda md, rng, **kw: _check_beta_closed(md, rng, False, **kw),
    "hamel_zero": lambda md, rng, **kw: _check_hamel(md, rng, True, **kw),
    "hamel_nonzero": lambda md, rng, **kw: _check_hamel(md, rng, False, **kw),
    "k12_closed_form": _check_k12_closed_form,
    "k12_nonzero": _check_k12_nonzero,
    "rij_case": _check_rij_case,
    "pfactor_formula": _check_pfactor_formula,
    "flag_closed_form": _check_flag_closed_form,
}


ENTRIES = {
    "ex81": CatalogEntry(
        name="ex81",
        description="radial power-law chart: Douglas and projectively flat, "
        "but the chart itself is not projective",
        build=_metric_ex81,
        checks=[
            ("douglas_pass", {}),
            ("pflat_pass", {}),
            ("hamel_nonzero", {}),
            ("rij_case", {"case": "cor61_iii"}),
        ],
    ),
    "ex82": CatalogEntry(
        name="ex82",
        description="rotational power-law chart: flat Berwald with non-closed beta",
        build=_metric_ex82,
        checks=[
            ("douglas_pass", {}),
            ("berwald", {}),
            ("flag_zero", {}),
            ("beta_not_closed", {}),
            ("pflat_pass", {}),
            ("rij_case", {"case": "cor61_iv"}),
        ],
    ),
    "ex83": CatalogEntry(
        name="ex83",
        description="linear-plus-inverse family over a conformal chart, cubic eta: "
        "Douglas but not projectively flat",
        build=_metric_ex83,
        checks=[
            ("douglas_pass", {}),
            ("k12_closed_form", {"c": 1.0}),
            ("pflat_fail", {}),
        ],
    ),
    "ex83quad": CatalogEntry(
        name="ex83quad",
        description="same family with quadratic eta: projectively flat",
        build=_metric_ex83_quad,
        checks=[
            ("douglas_pass", {}),
            ("pflat_pass", {}),
        ],
    ),
    "ex84": CatalogEntry(
        name="ex84",
        description="constructed degree-minus-three family: Douglas, "
        "not projectively flat",
        build=_metric_ex84,
        checks=[
            ("douglas_pass", {}),
            ("rij_case", {"case": "cor61_ii"}),
            ("k12_nonzero", {}),
            ("pflat_fail", {}),
        ],
    ),
    "flat_chart": CatalogEntry(
        name="flat_chart",
        description="flat base chart with eta depending on x1 only: projective "
        "chart with closed-form P and K",
        build=_metric_flat_chart,
        checks=[
            ("douglas_pass", {}),
            ("hamel_zero", {}),
            ("pfactor_formula", {}),
            ("flag_closed_form", {"c": 1.0}),
            ("pflat_pass", {}),
        ],
    ),
    "kropina": CatalogEntry(
        name="kropina",
        description="linear-plus-inverse phi over a random smooth metric: "
        "always Douglas",
        build=_metric_kropina_smooth,
        checks=[("douglas_pass", {})],
    ),
    "mkropina_generic": CatalogEntry(
        name="mkropina_generic",
        description="power family m=2 over a generic metric: negative control, "
        "not Douglas",
        build=_metric_mkropina_generic,
        checks=[("douglas_fail", {})],
    ),
}


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


@dataclass
class EntryReport:
    entry: str
    ok: bool
    checks: list

    def to_dict(self) -> dict:
        return {
            "entry": self.entry,
            "ok": bool(self.ok),
            "checks": [
                {"name": c.name, "ok": bool(c.ok), "detail": c.detail} for c in self.checks
            ],
        }


def run_entry(name: str, seed: int = 0) -> EntryReport:
    import zlib

    entry = ENTRIES[name]
    md = entry.build()
    results = []
    for check_name, kwargs in entry.checks:
        rng = np.random.default_rng([seed, zlib.crc32(check_name.encode())])
        ok, detail = _CHECKS[check_name](md, rng, **kwargs)
        label = check_name if "case" not in kwargs else f"{check_name}:{kwargs['case']}"
        results.append(CheckResult(label, ok, detail))
    return EntryReport(entry=name, ok=all(c.ok for c in results), checks=results)


def flag_curvature_reference(md: MetricDef, x, y, c: float) -> float:
    """Closed-form K for the flat-chart family (eta read off the metric)."""
    jet = eval_jet(md.b[0], x, 2)
    eta1 = jet.partial((1, 0))
    eta11 = jet.partial((2, 0))
    F = finsler_norm(md, x, y)
    return c * y[0] ** 3 / (2.0 * F**3) * (3.0 * c * eta1**2 * y[0] / (2.0 * F) - eta11)
