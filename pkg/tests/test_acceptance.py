"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import os
import time

import numpy as np
import pytest

from mtebounds.analysis import AnalysisConfig, block_model, block_weight, curve_payload, decode_float, load_pipeline, resolve_target
from mtebounds.effect_dist import makarov_bounds, verify_appendix_counterexamples
from mtebounds.bounds import (
    BaseInputs,
    area_of_uncertainty,
    comonotonic_effect,
    counter_monotonic_effect,
    mte_membership,
    uniform_bounds_curve,
    wte_bounds,
)
from mtebounds.covariates import CovariateCells, conditional_rank_inputs, covariate_tightened_bounds
from mtebounds.dist import PiecewiseConstant, build_step_distribution, gini_statistics, stochastic_order
from mtebounds.identification import identify
from mtebounds.linear import fit_linear_mte, linear_specification_test
from mtebounds.oracle import majorization_membership_oracle, permutation_wte_oracle
from mtebounds.rank import rs_uniform_bounds, rs_wte_bounds

from dgp import (
    bernoulli,
    coin_model,
    heterogeneous_population,
    linear_population,
    random_model,
    rank_invariant_population,
)

REPLICATION_ENV = "MTEBOUNDS_REPLICATION_CSV"


def finish(record, number, checks, elapsed, limit):
    """Record the verdict for one criterion and fail the test if any check failed."""
    failed = [name for name, ok in checks if not ok]
    within_time = elapsed < limit
    passed = not failed and within_time
    detail = f"{len(checks)} checks, {elapsed:.2f}s (limit {limit:g}s)"
    if failed:
        detail += "; failed: " + ", ".join(failed[:5])
    if not within_time:
        detail += "; over time limit"
    record(number, passed, detail)
    assert passed, detail


def all_knots(*funcs):
    return np.unique(np.concatenate([f.knots for f in funcs]))


def test_criterion_1_distribution_envelopes(record_criterion):
    start = time.perf_counter()
    coin = bernoulli(0.5)
    pts = np.array([-1.0, 0.0, 1.0])
    lower, upper = makarov_bounds(coin, coin)
    counter = counter_monotonic_effect(coin, coin).dist
    co = comonotonic_effect(coin, coin).dist
    report = verify_appendix_counterexamples()
    checks = [
        ("first-order lower envelope", lower.cdf(pts).tolist() == [0.0, 0.5, 1.0]),
        ("first-order upper envelope", upper.cdf(pts).tolist() == [0.5, 1.0, 1.0]),
        ("counter-monotonic cdf", counter.cdf(pts).tolist() == [0.5, 0.5, 1.0]),
        ("comonotonic cdf", co.cdf(pts).tolist() == [0.0, 1.0, 1.0]),
        ("first candidate passes second order", report.first_passes_ssd),
        ("first candidate fails first order", not report.first_passes_makarov),
        ("second candidate passes second order", report.second_passes_ssd),
        ("second candidate passes first order", report.second_passes_makarov),
        ("second candidate fails support", not report.second_support_feasible),
    ]
    finish(record_criterion, 1, checks, time.perf_counter() - start, 1.0)


def test_criterion_2_oracle_equivalence(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    checks = []
    for i in range(500):
        n = int(rng.integers(1, 6))
        y0, y1 = rng.integers(-3, 4, n), rng.integers(-3, 4, n)
        w = rng.integers(0, 4, n)
        closed = wte_bounds(block_model(y0, y1), block_weight(w))
        brute = permutation_wte_oracle(y0, y1, w)
        checks.append((f"weighted bounds #{i}", abs(closed.lower - brute.lower) <= 1e-12 and abs(closed.upper - brute.upper) <= 1e-12))

        delta = rng.integers(-3, 4, n).astype(float)
        if i % 2:
            t = rng.random()
            m = (t * np.eye(n) + (1 - t) * np.eye(n)[rng.permutation(n)]) @ delta
        else:
            m = rng.integers(-3, 4, n).astype(float)
        convex = stochastic_order(build_step_distribution(m), build_step_distribution(delta), "convex", 1e-12)
        checks.append((f"convex order #{i}", convex == majorization_membership_oracle(m, delta, 1e-12)))
    finish(record_criterion, 2, checks, time.perf_counter() - start, 60.0)


def test_criterion_3_uniform_bound_invariants(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    checks = []
    for i in range(100):
        m = random_model(rng)
        seg = uniform_bounds_curve(m).segment(m.p0, m.p1)
        pinned = all(
            abs(f(p) - y) <= 1e-12
            for f in (seg.lower, seg.upper)
            for p, y in ((m.p0, m.ybar_p0), (m.p1, m.ybar_p1))
        )
        checks.append((f"endpoints #{i}", pinned))
        checks.append((f"lower convex #{i}", seg.lower.is_convex(1e-12)))
        checks.append((f"upper concave #{i}", seg.upper.is_concave(1e-12)))
        delta = BaseInputs.from_model(m).delta
        pairwise = 0.5 * float(delta.masses @ np.abs(delta.support[:, None] - delta.support[None, :]) @ delta.masses)
        area = area_of_uncertainty(uniform_bounds_curve(m), m.p0, m.p1)
        share = m.p1 - m.p0
        checks.append((f"area identity #{i}", abs(area - share**2 * gini_statistics(delta).gamma_mean_difference) <= 1e-10))
        checks.append((f"area vs pairwise mean difference #{i}", abs(area - share**2 * pairwise) <= 1e-10))
    finish(record_criterion, 3, checks, time.perf_counter() - start, 10.0)


def test_criterion_4_nesting(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    checks = []
    support = (-3.0, 3.0)
    for i in range(50):
        prob = float(rng.uniform(0.2, 0.8))
        cells = CovariateCells.from_models(
            {"a": random_model(rng, nested_support=True), "b": random_model(rng, nested_support=True)},
            {"a": prob, "b": 1 - prob},
        )
        pooled = cells.pooled
        base = uniform_bounds_curve(pooled, support)
        cov = covariate_tightened_bounds(cells, uniform_bounds_curve, support)
        pts = np.union1d(base.knots(), cov.knots())
        checks.append((f"covariate lower #{i}", bool(np.all(cov.lower_at(pts) >= base.lower_at(pts) - 1e-12))))
        checks.append((f"covariate upper #{i}", bool(np.all(cov.upper_at(pts) <= base.upper_at(pts) + 1e-12))))

        base_c = base.segment(pooled.p0, pooled.p1)
        for tag, curve in (("rank", rs_uniform_bounds(pooled)), ("conditional rank", rs_uniform_bounds(conditional_rank_inputs(cells)))):
            seg = curve.segment(pooled.p0, pooled.p1)
            knots = all_knots(seg.lower, seg.upper, base_c.lower, base_c.upper)
            inside = np.all(base_c.lower(knots) <= seg.lower(knots) + 1e-12) and np.all(seg.upper(knots) <= base_c.upper(knots) + 1e-12)
            checks.append((f"{tag} complier segment #{i}", bool(inside)))
    finish(record_criterion, 4, checks, time.perf_counter() - start, 10.0)


def exact_propensities(rng, size):
    k0 = int(rng.integers(size // 10, size // 3))
    k1 = int(rng.integers(size // 2, 9 * size // 10))
    return k0 / size, k1 / size


def test_criterion_5_round_trip(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    size = 50_000  # every unit appears once per instrument arm: 100,000 records
    checks = []
    for i in range(20):
        p0, p1 = exact_propensities(rng, size)
        invariant = i % 2 == 1
        pop = rank_invariant_population(rng, size, p0, p1) if invariant else heterogeneous_population(rng, size)
        z, d, y = pop.records(p0, p1)
        m = identify(z, d, y)
        result = mte_membership(m, pop.true_mte())
        checks.append((f"true MTE is a member #{i}", bool(result)))

        support = (float(y.min()), float(y.max()))
        payload = curve_payload(uniform_bounds_curve(m, support), 101)
        ok = True
        for section in ("grid", "knots"):
            rows = np.array([[decode_float(v) for v in row] for row in payload[section]])
            truth = pop.counterfactual_average(rows[:, 0])
            ok &= bool(np.all(rows[:, 1] <= truth + 1e-9) and np.all(truth <= rows[:, 2] + 1e-9))
        checks.append((f"true counterfactual average inside curves #{i}", ok))

        if invariant:
            iv = rs_wte_bounds(m, PiecewiseConstant.constant(1.0))
            ate = pop.true_wte(PiecewiseConstant.constant(1.0))
            checks.append((f"rank-similar ATE collapses #{i}", iv.width <= 0.02 and iv.contains(ate, 0.02)))
    finish(record_criterion, 5, checks, time.perf_counter() - start, 120.0)


def test_criterion_6_linear_specification(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    checks = []
    for i in range(10):
        alpha = tuple(rng.uniform(-2, 2, 2))
        beta = tuple(rng.uniform(-2, 2, 2))
        pop = linear_population(1000, alpha, beta)
        m = identify(*pop.records(0.2, 0.7))
        fit = fit_linear_mte(m)
        recovered = np.allclose(fit.untreated_line, (alpha[0], beta[0]), atol=1e-6, rtol=0) and np.allclose(
            fit.treated_line, (alpha[1], beta[1]), atol=1e-6, rtol=0
        )
        checks.append((f"planted lines recovered #{i}", bool(recovered)))
        checks.append((f"planted linear MTE accepted #{i}", bool(linear_specification_test(m, fit.m))))
    steep = PiecewiseConstant.from_function(lambda u: 12 * u - 6, 512, extra_breaks=(0.25, 0.75))
    checks.append(("over-dispersed candidate rejected", not linear_specification_test(coin_model(), steep)))
    finish(record_criterion, 6, checks, time.perf_counter() - start, 5.0)


# Binary-outcome reference rows: target -> {model: (lower, upper)}
REFERENCE_ROWS = {
    "late:0,p0": {"means": (-0.45, 0.55), "base": (-0.45, 0.55), "covariate": (-0.45, 0.55), "cond_rank_sim": (0.0, 0.55), "rank_sim": (0.0, 0.55), "linear": (0.13, 0.13)},
    "late:p0,p1": {"means": (0.05, 0.05), "base": (0.05, 0.05), "covariate": (0.05, 0.05), "cond_rank_sim": (0.05, 0.05), "rank_sim": (0.05, 0.05), "linear": (0.05, 0.05)},
    "late:p1,1": {"means": (-0.31, 0.69), "base": (-0.31, 0.69), "covariate": (-0.31, 0.69), "cond_rank_sim": (0.0, 0.69), "rank_sim": (0.0, 0.69), "linear": (-0.10, -0.10)},
    "late:p0,p1-0.1*(p1-p0)": {"means": (-0.05, 0.17), "base": (-0.05, 0.17), "covariate": (-0.06, 0.17), "cond_rank_sim": (0.0, 0.06), "rank_sim": (0.0, 0.06), "linear": (0.06, 0.06)},
    "late:p0,p1+0.1*(p1-p0)": {"means": (-0.04, 0.14), "base": (-0.04, 0.14), "covariate": (-0.05, 0.14), "cond_rank_sim": (0.05, 0.14), "rank_sim": (0.05, 0.14), "linear": (0.05, 0.05)},
    "late:0,1": {"means": (-0.24, 0.50), "base": (-0.24, 0.50), "covariate": (-0.24, 0.50), "cond_rank_sim": (0.01, 0.50), "rank_sim": (0.01, 0.50), "linear": (-0.02, -0.02)},
}


def test_criterion_7_external_replication(record_criterion):
    path = os.environ.get(REPLICATION_ENV)
    if not path:
        record_criterion(7, None, f"not run: set {REPLICATION_ENV} to a CSV with columns z, d, y, x to run it")
        pytest.skip(f"{REPLICATION_ENV} not set")
    start = time.perf_counter()
    models = list(next(iter(REFERENCE_ROWS.values())))
    config = AnalysisConfig(input=path, targets=list(REFERENCE_ROWS), models=models, outcome_support=(0.0, 1.0))
    pipe = load_pipeline(config)
    checks = []
    late = pipe.interval("base", resolve_target("late:p0,p1", pipe.model))
    checks.append(("complier LATE within 0.01", abs(late.lower - 0.05) <= 0.01 and abs(late.upper - 0.05) <= 0.01))
    for target, row in REFERENCE_ROWS.items():
        resolved = resolve_target(target, pipe.model)
        for model, (lo, hi) in row.items():
            iv = pipe.interval(model, resolved)
            checks.append((f"{model} {target}", abs(iv.lower - lo) <= 0.02 and abs(iv.upper - hi) <= 0.02))
    finish(record_criterion, 7, checks, time.perf_counter() - start, 600.0)
