"""Bounds that use only identified group means and an outcome support.

Each potential outcome's conditional mean function is free inside the
outcome support except that its average over a group must match the
identified mean when one exists. The problem separates across groups and
across the two potential outcomes, so every bound is a sum of closed-form
pieces.
"""

from __future__ import annotations

import numpy as np

from .bounds import (
    BoundsCurve,
    CurveSegment,
    ExtendedInterval,
    exact_curve,
    normalize_support,
    scaled,
)
from .dist import PiecewiseConstant, PiecewiseLinear, StepDistribution, quantile_product_mean
from .errors import DomainError
from .identification import IdentifiedModel


def partial_integral_range(t, length: float, mean: float | None, lo: float, hi: float):
    """Range of ``int_S m`` over a subset ``S`` of measure ``t`` of a group of
    measure ``length``, for ``m`` valued in ``[lo, hi]`` averaging ``mean``
    over the group (``mean=None`` leaves it free)."""
    t = np.asarray(t, dtype=float)
    low = scaled(t, lo)
    high = scaled(t, hi)
    if mean is None:
        return low, high
    rest = length - t
    low = np.maximum(low, length * mean - scaled(rest, hi))
    high = np.minimum(high, length * mean - scaled(rest, lo))
    return low, high


def _groups(model: IdentifiedModel):
    """(start, end, treated mean, untreated mean) for each nonempty group."""
    out = []
    if model.p0 > 0:
        out.append((0.0, model.p0, model.marg_Y1a.mean, None))
    out.append((model.p0, model.p1, model.mean_y1c, model.mean_y0c))
    if model.p1 < 1:
        out.append((model.p1, 1.0, None, model.marg_Y0n.mean))
    return out


def mean_support_bounds(model: IdentifiedModel, target, outcome_support=None) -> ExtendedInterval:
    """Bounds on the average effect over ``U`` in ``target = (u, u_hi)``."""
    try:
        u, u_hi = (float(v) for v in target)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"malformed target {target!r}") from exc
    if not (0.0 <= u < u_hi <= 1.0):
        raise DomainError(f"target must satisfy 0 <= u < u_hi <= 1, got {target!r}")
    lo, hi = normalize_support(outcome_support)
    lower = upper = 0.0
    for start, end, mean1, mean0 in _groups(model):
        t = max(0.0, min(u_hi, end) - max(u, start))
        if t == 0:
            continue
        low1, high1 = partial_integral_range(t, end - start, mean1, lo, hi)
        low0, high0 = partial_integral_range(t, end - start, mean0, lo, hi)
        lower += float(low1 - high0)
        upper += float(high1 - low0)
    return ExtendedInterval(lower / (u_hi - u), upper / (u_hi - u))


def _weighted_range(w: PiecewiseConstant, start: float, end: float, mean: float | None, lo: float, hi: float) -> tuple[float, float]:
    """Range of ``int_start^end w m`` for ``m`` in ``[lo, hi]`` averaging ``mean`` (or free).

    With a mean constraint the extreme ``m`` is bang-bang: it sits at ``hi``
    where the weight is largest and at ``lo`` elsewhere, which is the
    rearrangement pairing of the weights with the two-point distribution on
    ``{lo, hi}`` having that mean.
    """
    length = end - start
    weights = w.value_distribution(start, end)
    if mean is None:
        pos = float(np.dot(np.maximum(weights.support, 0), weights.masses)) * length
        neg = float(np.dot(np.maximum(-weights.support, 0), weights.masses)) * length
        return (scaled(pos, lo) - scaled(neg, hi), scaled(pos, hi) - scaled(neg, lo))
    ew, wmin, wmax = weights.mean, weights.min, weights.max
    if wmin == wmax:
        return (length * ew * mean, length * ew * mean)
    if np.isfinite(lo) and np.isfinite(hi):
        if hi == lo or mean <= lo or mean >= hi:
            return (length * ew * mean, length * ew * mean)
        top = (mean - lo) / (hi - lo)
        extremal = StepDistribution([lo, hi], [1 - top, top])
        return (
            length * quantile_product_mean(extremal, weights, antitone=True),
            length * quantile_product_mean(extremal, weights),
        )
    if np.isfinite(lo):
        # vanishing mass at +inf goes to the largest (upper) or smallest (lower) weight
        return (length * (lo * ew + (mean - lo) * wmin), length * (lo * ew + (mean - lo) * wmax))
    if np.isfinite(hi):
        return (length * (hi * ew + (mean - hi) * wmax), length * (hi * ew + (mean - hi) * wmin))
    return (-np.inf, np.inf)


def mean_support_wte_bounds(model: IdentifiedModel, w: PiecewiseConstant, outcome_support=None) -> ExtendedInterval:
    """Bounds on ``int MTE * w`` from identified means and the outcome support."""
    lo, hi = normalize_support(outcome_support)
    lower = upper = 0.0
    for start, end, mean1, mean0 in _groups(model):
        if w.measure_nonzero(start, end) == 0:
            continue
        low1, high1 = _weighted_range(w, start, end, mean1, lo, hi)
        low0, high0 = _weighted_range(w, start, end, mean0, lo, hi)
        lower += low1 - high0
        upper += high1 - low0
    return ExtendedInterval(lower, upper)


def _kinks(mean: float | None, lo: float, hi: float) -> list[float]:
    if mean is None or not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        return []
    return [(hi - mean) / (hi - lo), (mean - lo) / (hi - lo)]


def _interior_line(func, start: float, end: float) -> PiecewiseLinear | None:
    """Closure of a bound that is linear on the open interval ``(start, end)``.

    With a one-sided outcome support the mean constraints bind only at the
    segment endpoints, so the bound may jump there; the interior line is the
    conservative continuous envelope.
    """
    span = end - start
    x = np.array([start + span / 3, start + 2 * span / 3])
    y = np.asarray(func(x), dtype=float)
    if not np.all(np.isfinite(y)):
        return None
    slope = (y[1] - y[0]) / (x[1] - x[0])
    return PiecewiseLinear([start, end], [y[0] - slope * (x[0] - start), y[1] + slope * (end - x[1])])


def means_curve(model: IdentifiedModel, outcome_support=None) -> BoundsCurve:
    """Pointwise bounds on the counterfactual average ``ybar(p)`` from means alone.

    Sides that are infinite inside a segment are reported as infinite.
    """
    lo, hi = normalize_support(outcome_support)
    ybar0, ybar1 = model.ybar_p0, model.ybar_p1
    segments = []
    for start, end, mean1, mean0 in _groups(model):
        length = end - start
        fracs = np.array(_kinks(mean1, lo, hi) + _kinks(mean0, lo, hi))
        # kinks sit at a fixed measure t from the anchored end of the segment
        kinks = end - fracs * length if end == model.p0 else start + fracs * length
        if start == model.p0:
            # compliers: ybar(p) = ybar(p0) + int_{p0}^{p} (m1 - m0)
            def lower(p, s=start, L=length, a=mean1, b=mean0):
                low1, _ = partial_integral_range(p - s, L, a, lo, hi)
                _, high0 = partial_integral_range(p - s, L, b, lo, hi)
                return ybar0 + low1 - high0

            def upper(p, s=start, L=length, a=mean1, b=mean0):
                _, high1 = partial_integral_range(p - s, L, a, lo, hi)
                low0, _ = partial_integral_range(p - s, L, b, lo, hi)
                return ybar0 + high1 - low0
        elif end == model.p0:
            # always-takers: ybar(p) = ybar(p0) - int_{p}^{p0} (m1 - m0)
            def lower(p, e=end, L=length, a=mean1):
                _, high1 = partial_integral_range(e - p, L, a, lo, hi)
                low0, _ = partial_integral_range(e - p, L, None, lo, hi)
                return ybar0 - high1 + low0

            def upper(p, e=end, L=length, a=mean1):
                low1, _ = partial_integral_range(e - p, L, a, lo, hi)
                _, high0 = partial_integral_range(e - p, L, None, lo, hi)
                return ybar0 - low1 + high0
        else:
            # never-takers: ybar(p) = ybar(p1) + int_{p1}^{p} (m1 - m0)
            def lower(p, s=start, L=length, b=mean0):
                low1, _ = partial_integral_range(p - s, L, None, lo, hi)
                _, high0 = partial_integral_range(p - s, L, b, lo, hi)
                return ybar1 + low1 - high0

            def upper(p, s=start, L=length, b=mean0):
                _, high1 = partial_integral_range(p - s, L, None, lo, hi)
                low0, _ = partial_integral_range(p - s, L, b, lo, hi)
                return ybar1 + high1 - low0

        if np.isfinite(lo) and np.isfinite(hi):
            segments.append(CurveSegment(start, end, exact_curve(lower, start, end, kinks), exact_curve(upper, start, end, kinks)))
        else:
            segments.append(CurveSegment(start, end, _interior_line(lower, start, end), _interior_line(upper, start, end)))
    return BoundsCurve(tuple(segments), "means")
