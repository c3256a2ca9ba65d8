import numpy as np
import pytest

from mtebounds.dist import StepDistribution, build_step_distribution, sup_cdf_distance
from mtebounds.errors import ConstructionError, EmptyGroup, FirstStageError, IdentificationError
from mtebounds.identification import (
    DataRecord,
    IdentifiedModel,
    check_complier_support,
    estimate_identified_model,
    identify,
    monotonize_cdf,
)

from dgp import bernoulli, coin_model, sample_records


def records_from(z, d, y):
    return [DataRecord(int(a), int(b), float(c)) for a, b, c in zip(z, d, y)]


class TestEstimate:
    def test_perfect_compliance(self):
        z = np.repeat([0, 1], 4)
        y = np.array([0, 1, 0, 1, 0, 1, 0, 1], dtype=float)
        m = estimate_identified_model(records_from(z, z, y))
        assert (m.p0, m.p1) == (0.0, 1.0)
        assert m.group_probs == (0.0, 1.0, 0.0)
        assert m.marg_Y0c.isclose(bernoulli(0.5)) and m.marg_Y1c.isclose(bernoulli(0.5))
        assert m.late_ia == 0
        assert m.marg_Y1a is None and m.marg_Y0n is None

    def test_deterministic_outcome(self):
        z = np.repeat([0, 1], 4)
        d = np.array([1, 0, 0, 0, 1, 1, 1, 0])
        m = estimate_identified_model(records_from(z, d, d))
        assert (m.p0, m.p1) == (0.25, 0.75)
        assert m.marg_Y1c.support.tolist() == [1] and m.marg_Y0c.support.tolist() == [0]
        assert m.late_ia == pytest.approx(1.0, abs=1e-15)

    def test_forward_simulation_recovers_marginals(self, rng):
        truth = {
            (1, "a"): StepDistribution([0.0, 1.0, 2.0], [0.2, 0.3, 0.5]),
            (0, "c"): StepDistribution([0.0, 1.0, 2.0], [0.5, 0.3, 0.2]),
            (1, "c"): StepDistribution([0.0, 1.0, 2.0], [0.3, 0.3, 0.4]),
            (0, "n"): StepDistribution([0.0, 1.0], [0.6, 0.4]),
        }
        m = identify(*sample_records(rng, 100_000, 0.2, 0.7, truth))
        assert m.p0 == pytest.approx(0.2, abs=0.01) and m.p1 == pytest.approx(0.7, abs=0.01)
        assert sup_cdf_distance(m.marg_Y1a, truth[(1, "a")]) <= 0.02
        assert sup_cdf_distance(m.marg_Y0n, truth[(0, "n")]) <= 0.02
        assert sup_cdf_distance(m.marg_Y0c, truth[(0, "c")]) <= 0.02
        assert sup_cdf_distance(m.marg_Y1c, truth[(1, "c")]) <= 0.02

    def test_late_is_difference_of_raw_complier_means(self, rng):
        truth = {k: bernoulli(0.5) for k in [(1, "a"), (0, "c"), (1, "c"), (0, "n")]}
        m = identify(*sample_records(rng, 2000, 0.3, 0.6, truth))
        assert m.late_ia == pytest.approx(m.mean_y1c - m.mean_y0c, abs=1e-12)

    def test_input_order_does_not_matter(self, rng):
        truth = {k: StepDistribution([0.0, 1.0, 3.0], [0.2, 0.5, 0.3]) for k in [(1, "a"), (0, "c"), (1, "c"), (0, "n")]}
        z, d, y = sample_records(rng, 3000, 0.3, 0.6, truth)
        perm = rng.permutation(z.size)
        a, b = identify(z, d, y), identify(z[perm], d[perm], y[perm])
        assert a.ybar_p0 == b.ybar_p0 and a.ybar_p1 == b.ybar_p1
        assert a.marg_Y0c.isclose(b.marg_Y0c, atol=0)

    def test_weights_equal_replication(self):
        z = np.array([0, 0, 1, 1])
        d = np.array([0, 1, 1, 0])
        y = np.array([0.0, 1.0, 1.0, 0.0])
        w = np.array([3.0, 1.0, 3.0, 1.0])
        a = identify(z, d, y, w)
        b = identify(np.repeat(z, w.astype(int)), np.repeat(d, w.astype(int)), np.repeat(y, w.astype(int)))
        assert a.p0 == b.p0 and a.p1 == b.p1
        assert a.late_ia == pytest.approx(b.late_ia)

    def test_missing_arm(self):
        with pytest.raises(IdentificationError):
            identify([1, 1], [0, 1], [0.0, 1.0])

    def test_first_stage_failure(self):
        with pytest.raises(FirstStageError):
            identify([0, 0, 1, 1], [1, 1, 0, 1], [0.0, 1.0, 0.0, 1.0])

    def test_non_binary_instrument(self):
        with pytest.raises(IdentificationError):
            identify([0, 2], [0, 1], [0.0, 1.0])


class TestMonotonize:
    def test_monotone_input_unchanged(self):
        dist, violation = monotonize_cdf({0: 0.2, 1: 0.5, 2: 1.0})
        assert violation == 0
        assert dist.cdf([0, 1, 2]).tolist() == [0.2, 0.5, 1.0]

    def test_running_maximum(self):
        dist, violation = monotonize_cdf({0: 0.2, 1: 0.1, 2: 1.0})
        assert dist.cdf([0, 1, 2]).tolist() == [0.2, 0.2, 1.0]
        assert violation == pytest.approx(0.1)

    def test_clipping(self):
        dist, violation = monotonize_cdf({0: -0.05, 1: 0.5, 2: 0.98})
        assert dist.cdf([0, 1, 2]).tolist() == [0.0, 0.5, 1.0]
        assert violation == pytest.approx(0.05)

    def test_isotonization_reported_on_noisy_data(self, rng):
        truth = {k: StepDistribution([0.0, 1.0, 2.0, 3.0], [0.25] * 4) for k in [(1, "a"), (0, "c"), (1, "c"), (0, "n")]}
        m = identify(*sample_records(rng, 400, 0.4, 0.5, truth))
        assert m.diagnostics.max_violation >= 0


class TestModel:
    def test_counterfactual_averages_from_groups(self):
        m = coin_model()
        assert m.ybar_p0 == 0.5 and m.ybar_p1 == 0.5 and m.late_ia == 0

    def test_empty_group_marginal(self):
        m = IdentifiedModel.from_groups(0.0, 0.5, None, bernoulli(0.5), bernoulli(0.5), bernoulli(0.5))
        with pytest.raises(EmptyGroup):
            m.marginal("Y1a")
        assert not m.has_group("a") and m.has_group("n")

    def test_group_marginals_must_match_propensities(self):
        with pytest.raises(ConstructionError):
            IdentifiedModel.from_groups(0.2, 0.5, None, bernoulli(0.5), bernoulli(0.5), bernoulli(0.5))


class TestSupport:
    def test_bernoulli_everywhere(self):
        assert check_complier_support(coin_model()).overall

    def test_never_taker_atom_outside(self):
        m = IdentifiedModel.from_groups(0.25, 0.75, bernoulli(0.5), StepDistribution([0.0, 3.0], [0.5, 0.5]), bernoulli(0.5), bernoulli(0.5))
        report = check_complier_support(m)
        assert not report.never_takers and report.always_takers and not report.overall
        assert report.as_dict() == {"0n": False, "1a": True, "overall": False}

    def test_count_outcome_with_zero_mass_point(self, rng):
        visits = np.arange(11, dtype=float)

        def counts(zero_mass):
            tail = rng.uniform(0.5, 1.0, 10)
            return build_step_distribution(visits, np.concatenate([[zero_mass / (1 - zero_mass) * tail.sum()], tail]))

        m = IdentifiedModel.from_groups(0.1, 0.4, counts(0.3), counts(0.7), counts(0.6), counts(0.4))
        assert check_complier_support(m).overall
