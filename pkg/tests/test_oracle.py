import numpy as np
import pytest

from mtebounds.analysis import block_model, block_weight, run_oracle_suite
from mtebounds.bounds import sharp_late_bounds, wte_bounds
from mtebounds.dist import build_step_distribution, stochastic_order
from mtebounds.errors import DomainError
from mtebounds.oracle import majorization_membership_oracle, permutation_wte_oracle

from dgp import coin_model


class TestPermutationOracle:
    def test_single_block(self):
        iv = permutation_wte_oracle([1.0], [4.0], [2.0])
        assert (iv.lower, iv.upper) == (6.0, 6.0)

    def test_constant_weights(self):
        iv = permutation_wte_oracle([0, 1], [0, 1], [1, 1])
        assert (iv.lower, iv.upper) == (0.0, 0.0)

    def test_half_weight(self):
        iv = permutation_wte_oracle([0, 1], [0, 1], [2, 0])
        assert (iv.lower, iv.upper) == (-1.0, 1.0)
        late = sharp_late_bounds(coin_model(0.0, 1.0), 0.0, 0.5)
        assert (late.lower, late.upper) == (-1.0, 1.0)

    def test_size_limit(self):
        with pytest.raises(DomainError):
            permutation_wte_oracle(range(6), range(6), range(6))

    def test_mismatched_lengths(self):
        with pytest.raises(DomainError):
            permutation_wte_oracle([0, 1], [0], [1, 1])

    def test_matches_closed_form(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 6))
            y0, y1, w = rng.integers(-3, 4, n), rng.integers(-3, 4, n), rng.integers(0, 4, n)
            a = permutation_wte_oracle(y0, y1, w)
            b = wte_bounds(block_model(y0, y1), block_weight(w))
            assert abs(a.lower - b.lower) <= 1e-12 and abs(a.upper - b.upper) <= 1e-12


class TestMajorization:
    def test_permutation(self):
        assert majorization_membership_oracle([3, 1, 2], [2, 3, 1])

    def test_contraction(self):
        assert majorization_membership_oracle([0, 0], [-1, 1])

    def test_spread(self):
        assert not majorization_membership_oracle([-2, 2], [-1, 1])

    def test_unequal_lengths(self):
        with pytest.raises(DomainError):
            majorization_membership_oracle([0], [0, 1])

    def test_agrees_with_convex_order(self, rng):
        positives = 0
        for _ in range(300):
            n = int(rng.integers(1, 6))
            delta = rng.integers(-3, 4, n).astype(float)
            if rng.random() < 0.5:
                # averaging by a doubly stochastic matrix gives a member
                perm = np.eye(n)[rng.permutation(n)]
                t = rng.random()
                m = (t * np.eye(n) + (1 - t) * perm) @ delta
            else:
                m = rng.integers(-3, 4, n).astype(float)
            expected = majorization_membership_oracle(m, delta)
            positives += expected
            got = stochastic_order(build_step_distribution(m), build_step_distribution(delta), "convex")
            assert got == expected
        assert positives > 50


def test_suite_reports_no_mismatches():
    result = run_oracle_suite(100, seed=3)
    assert result["wte_mismatches"] == 0 and result["order_mismatches"] == 0
