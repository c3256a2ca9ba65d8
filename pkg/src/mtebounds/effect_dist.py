"""Bounds on the distribution of treatment effects and why they are not sharp.

The first-order (Makarov) envelope and the second-order envelope spanned by
the counter- and comonotonic effects are each valid, but neither
characterizes the set of effect distributions compatible with two binary
marginals. Two explicit distributions show this.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import ExtendedInterval, comonotonic_effect, counter_monotonic_effect
from .dist import StepDistribution, from_cdf, gini_statistics, stochastic_order
from .errors import CounterexampleError, DomainError


def _cdf_left(dist: StepDistribution, x):
    """``P(X < x)``."""
    idx = np.searchsorted(dist.support, x, side="left")
    return np.where(idx > 0, dist.cum[np.maximum(idx - 1, 0)], 0.0)


def effect_grid(y0: StepDistribution, y1: StepDistribution) -> np.ndarray:
    """All differences ``y1 - y0`` of support points."""
    return np.unique(np.subtract.outer(y1.support, y0.support).ravel())


def makarov_bounds(y0: StepDistribution, y1: StepDistribution) -> tuple[StepDistribution, StepDistribution]:
    """Pointwise bounds ``F_L <= F_{Y1 - Y0} <= F_U`` over all couplings.

    ``F_L(d) = max(0, sup_y F1(y) - P(Y0 < y - d))`` and
    ``F_U(d) = 1 + min(0, inf_y F1(y) - F0(y - d))``. Both are step functions
    jumping only on the grid of support differences, and the extrema over
    ``y`` are attained on ``supp(Y1)`` together with ``supp(Y0) + d``.
    Returns the distributions whose CDFs are ``F_L`` and ``F_U``.
    """
    grid = effect_grid(y0, y1)
    f_lower = np.empty(grid.size)
    f_upper = np.empty(grid.size)
    for k, delta in enumerate(grid):
        ys = np.concatenate([y1.support, y0.support + delta])
        f1 = y1.cdf(ys)
        f_lower[k] = max(0.0, float(np.max(f1 - _cdf_left(y0, ys - delta))))
        f_upper[k] = 1.0 + min(0.0, float(np.min(f1 - y0.cdf(ys - delta))))
    f_lower[-1] = f_upper[-1] = 1.0
    return from_cdf(grid, f_lower), from_cdf(grid, f_upper)


def within_makarov(candidate: StepDistribution, y0: StepDistribution, y1: StepDistribution, tol: float = 1e-12) -> bool:
    """Whether the candidate CDF lies between the Makarov bounds everywhere."""
    lower, upper = makarov_bounds(y0, y1)
    pts = np.union1d(candidate.support, effect_grid(y0, y1))
    f = candidate.cdf(pts)
    return bool(np.all(lower.cdf(pts) <= f + tol) and np.all(f <= upper.cdf(pts) + tol))


def within_ssd_envelope(candidate: StepDistribution, y0: StepDistribution, y1: StepDistribution, tol: float = 1e-12) -> bool:
    """Whether the candidate sits between the counter- and comonotonic effects in the convex order."""
    lo = counter_monotonic_effect(y0, y1).dist
    hi = comonotonic_effect(y0, y1).dist
    return stochastic_order(candidate, lo, "convex", tol) and stochastic_order(hi, candidate, "convex", tol)


def within_difference_support(candidate: StepDistribution, y0: StepDistribution, y1: StepDistribution) -> bool:
    grid = effect_grid(y0, y1)
    return bool(np.all(np.min(np.abs(candidate.support[:, None] - grid[None, :]), axis=1) <= 1e-12))


@dataclass(frozen=True)
class CounterexampleReport:
    first_passes_ssd: bool
    first_passes_makarov: bool
    second_passes_ssd: bool
    second_passes_makarov: bool
    second_support_feasible: bool

    @property
    def as_expected(self) -> bool:
        return (
            self.first_passes_ssd
            and not self.first_passes_makarov
            and self.second_passes_ssd
            and self.second_passes_makarov
            and not self.second_support_feasible
        )


def counterexample_distributions() -> tuple[StepDistribution, StepDistribution]:
    first = StepDistribution([-1.0, 0.5], [1 / 3, 2 / 3])
    second = StepDistribution([-1 / 3, 1 / 3], [0.5, 0.5])
    return first, second


def verify_appendix_counterexamples() -> CounterexampleReport:
    """Check two effect distributions against coin-flip marginals.

    The first has the right mean and lies in the second-order envelope but
    violates the Makarov bounds. The second satisfies both envelopes but puts
    mass where no difference of outcomes can land.
    """
    coin = StepDistribution([0.0, 1.0], [0.5, 0.5])
    first, second = counterexample_distributions()
    report = CounterexampleReport(
        within_ssd_envelope(first, coin, coin),
        within_makarov(first, coin, coin),
        within_ssd_envelope(second, coin, coin),
        within_makarov(second, coin, coin),
        within_difference_support(second, coin, coin),
    )
    if not report.as_expected:
        raise CounterexampleError(f"counterexample checks did not come out as expected: {report}")
    return report


def relaxed_gini_bounds(y0c: StepDistribution, y1c: StepDistribution) -> ExtendedInterval:
    """Gini index bounds when only the second-order envelope is imposed.

    The upper bound is the Gini index of the counter-monotonic effect; the
    lower bound zero corresponds to a constant effect.
    """
    effect = counter_monotonic_effect(y0c, y1c).dist
    gamma, index = gini_statistics(effect)
    if index is None:
        raise DomainError("the Gini index is undefined for a zero mean effect")
    return ExtendedInterval(0.0, index)
