"""Sharp bounds in the base model.

The base model identifies the distribution of ``Y1`` and ``Y0`` among
compliers but says nothing about how they are coupled. Every bound below
follows from the counter-monotonic complier effect ``Delta_c^-`` and its
integrated quantile function. Off the complier interval the model is silent;
bounds there are infinite unless an outcome support ``(lo, hi)`` is supplied,
in which case the unidentified potential outcome ranges over the support and
the identified one is bounded by rearrangement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dist import (
    PiecewiseConstant,
    PiecewiseLinear,
    StepDistribution,
    build_step_distribution,
    comonotone_blocks,
    gini_statistics,
    quantile_product_mean,
    stochastic_order,
)
from .errors import ConstructionError, DomainError
from .identification import IdentifiedModel

INF = math.inf
MEMBERSHIP_TOL = 1e-9
MODEL_TAGS = ("means", "base", "covariate", "rank_sim", "cond_rank_sim", "linear")


@dataclass(frozen=True)
class ExtendedInterval:
    """Closed interval over the extended reals."""

    lower: float
    upper: float

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi):
            raise ConstructionError("interval endpoints must not be NaN")
        if lo > hi:
            if lo - hi > 1e-9 * max(1.0, abs(lo), abs(hi)):
                raise ConstructionError(f"lower {lo} exceeds upper {hi}")
            lo = hi = (lo + hi) / 2
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def point(cls, x: float) -> ExtendedInterval:
        return cls(x, x)

    @classmethod
    def unbounded(cls) -> ExtendedInterval:
        return cls(-INF, INF)

    def __iter__(self):
        return iter((self.lower, self.upper))

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def is_point(self) -> bool:
        return self.lower == self.upper

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= x <= self.upper + tol

    def within(self, other: ExtendedInterval, tol: float = 0.0) -> bool:
        """Whether this interval is a subset of ``other``."""
        return other.lower - tol <= self.lower and self.upper <= other.upper + tol


@dataclass(frozen=True)
class TreatmentEffectDist:
    """Distribution of a treatment effect under a fixed coupling of the marginals."""

    dist: StepDistribution
    coupling: str
    group: str = "c"

    def __post_init__(self):
        if self.coupling not in ("counter", "co"):
            raise ConstructionError(f"unknown coupling {self.coupling!r}")
        if self.group not in ("a", "c", "n"):
            raise ConstructionError(f"unknown group {self.group!r}")

    @property
    def mean(self) -> float:
        return self.dist.mean


def counter_monotonic_effect(d0: StepDistribution, d1: StepDistribution, group: str = "c") -> TreatmentEffectDist:
    """Distribution of ``Q1(V) - Q0(1 - V)`` for ``V`` uniform."""
    widths, (q1, q0neg) = comonotone_blocks(d1, d0.negate())
    return TreatmentEffectDist(build_step_distribution(q1 + q0neg, widths), "counter", group)


def comonotonic_effect(d0: StepDistribution, d1: StepDistribution, group: str = "c") -> TreatmentEffectDist:
    """Distribution of ``Q1(V) - Q0(V)`` for ``V`` uniform."""
    widths, (q1, q0) = comonotone_blocks(d1, d0)
    return TreatmentEffectDist(build_step_distribution(q1 - q0, widths), "co", group)


# --------------------------------------------------------------------------
# Inputs shared by the distribution-based models
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BaseInputs:
    """What the distribution bounds need: the complier interval, the anchor
    ``ybar(p0)`` and the complier effect distribution to rearrange.

    The anchor at ``p1`` is taken as ``ybar(p0) + (p1 - p0) * mean(delta)`` so
    that the curves close up even when the complier CDFs needed repair.
    ``model`` supplies the non-complier marginals for support-based bounds.
    """

    p0: float
    p1: float
    ybar_p0: float
    delta: StepDistribution
    model: IdentifiedModel
    tag: str = "base"

    @classmethod
    def from_model(cls, model: IdentifiedModel) -> BaseInputs:
        delta = counter_monotonic_effect(model.marg_Y0c, model.marg_Y1c).dist
        return cls(model.p0, model.p1, model.ybar_p0, delta, model, "base")

    @property
    def share(self) -> float:
        return self.p1 - self.p0

    @property
    def late(self) -> float:
        return self.delta.mean

    @property
    def ybar_p1(self) -> float:
        return self.ybar_p0 + self.share * self.late


def as_inputs(model) -> BaseInputs:
    if isinstance(model, BaseInputs):
        return model
    if isinstance(model, IdentifiedModel):
        return BaseInputs.from_model(model)
    raise TypeError(f"expected IdentifiedModel or BaseInputs, got {type(model).__name__}")


def normalize_support(outcome_support) -> tuple[float, float]:
    """``None`` (overall or for one side) means unbounded."""
    if outcome_support is None:
        return (-INF, INF)
    lo, hi = outcome_support
    lo = -INF if lo is None else float(lo)
    hi = INF if hi is None else float(hi)
    if math.isnan(lo) or math.isnan(hi) or lo > hi:
        raise DomainError(f"invalid outcome support {outcome_support!r}")
    return lo, hi


def _times(c: float, v: float) -> float:
    """``c * v`` with ``0 * inf = 0``."""
    return 0.0 if c == 0 else c * v


def _box(pos_mass: float, neg_mass: float, lo: float, hi: float) -> tuple[float, float]:
    """Range of ``int w m`` when ``m`` is free in ``[lo, hi]``, given ``int w+`` and ``int w-``."""
    return (
        _times(pos_mass, lo) - _times(neg_mass, hi),
        _times(pos_mass, hi) - _times(neg_mass, lo),
    )


def _signed_masses(w: PiecewiseConstant, a: float, b: float) -> tuple[float, float]:
    if b <= a:
        return 0.0, 0.0
    pos = PiecewiseConstant(w.breakpoints, np.maximum(w.values, 0.0)).integrate(a, b)
    neg = PiecewiseConstant(w.breakpoints, np.maximum(-w.values, 0.0)).integrate(a, b)
    return pos, neg


def _rearrangement_range(dist: StepDistribution, w: PiecewiseConstant, a: float, b: float) -> tuple[float, float]:
    """Range of ``int_a^b w m`` over ``m`` whose values on ``[a, b]`` are a contraction of ``dist``."""
    weights = w.value_distribution(a, b)
    scale = b - a
    return (
        scale * quantile_product_mean(dist, weights, antitone=True),
        scale * quantile_product_mean(dist, weights),
    )


# --------------------------------------------------------------------------
# Targets
# --------------------------------------------------------------------------


def sharp_late_bounds(model, u: float, u_hi: float, outcome_support=None) -> ExtendedInterval:
    """Sharp bounds on the average effect for ``U`` uniform on ``[u, u_hi]``.

    Inside the complier interval the bounds are the averages of the lowest
    and highest ``delta_c`` share of the counter-monotonic effect quantiles.
    """
    if not u < u_hi:
        raise DomainError("need u < u_hi")
    if not (0.0 <= u and u_hi <= 1.0):
        raise DomainError("LATE interval must lie in [0, 1]")
    inp = as_inputs(model)
    if inp.p0 <= u and u_hi <= inp.p1:
        frac = (u_hi - u) / inp.share
        iqf = inp.delta.iqf()
        frac = min(frac, 1.0)
        return ExtendedInterval(iqf(frac) / frac, (inp.late - iqf(1.0 - frac)) / frac)
    return wte_bounds(inp, PiecewiseConstant.step(u, u_hi, 1.0 / (u_hi - u)), outcome_support)


def wte_bounds(model, w: PiecewiseConstant, outcome_support=None) -> ExtendedInterval:
    """Sharp bounds on ``int_0^1 MTE(u) w(u) du``.

    The complier part pairs the sorted effect quantiles with the sorted
    weights (upper bound) or with the reversed weights (lower bound). Any
    weight on a positive-measure set of non-compliers makes the bounds
    infinite unless ``outcome_support`` is finite.
    """
    inp = as_inputs(model)
    lo_y, hi_y = normalize_support(outcome_support)
    lower, upper = _rearrangement_range(inp.delta, w, inp.p0, inp.p1)

    if inp.p0 > 0 and w.measure_nonzero(0.0, inp.p0) > 0:
        m1_lo, m1_hi = _rearrangement_range(inp.model.marginal("Y1a"), w, 0.0, inp.p0)
        m0_lo, m0_hi = _box(*_signed_masses(w, 0.0, inp.p0), lo_y, hi_y)
        lower += m1_lo - m0_hi
        upper += m1_hi - m0_lo
    if inp.p1 < 1 and w.measure_nonzero(inp.p1, 1.0) > 0:
        m0_lo, m0_hi = _rearrangement_range(inp.model.marginal("Y0n"), w, inp.p1, 1.0)
        m1_lo, m1_hi = _box(*_signed_masses(w, inp.p1, 1.0), lo_y, hi_y)
        lower += m1_lo - m0_hi
        upper += m1_hi - m0_lo
    return ExtendedInterval(lower, upper)


# --------------------------------------------------------------------------
# Curves
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CurveSegment:
    """Bounds on ``[start, end]``; ``None`` stands for ``-inf`` (lower) or ``+inf`` (upper)."""

    start: float
    end: float
    lower: PiecewiseLinear | None
    upper: PiecewiseLinear | None


@dataclass(frozen=True, eq=False)
class BoundsCurve:
    """Lower and upper envelopes of the counterfactual average ``ybar(p)`` on [0, 1]."""

    segments: tuple[CurveSegment, ...]
    model_tag: str

    def __post_init__(self):
        if self.model_tag not in MODEL_TAGS:
            raise ConstructionError(f"unknown model tag {self.model_tag!r}")
        segs = tuple(s for s in self.segments if s.end > s.start)
        if not segs or segs[0].start != 0.0 or segs[-1].end != 1.0:
            raise ConstructionError("segments must cover [0, 1]")
        for left, right in zip(segs, segs[1:]):
            if left.end != right.start:
                raise ConstructionError("segments must be contiguous")
        object.__setattr__(self, "segments", segs)

    def _evaluate(self, p, side: str):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        fill = -INF if side == "lower" else INF
        out = np.full(p.shape, np.nan)
        for seg in self.segments:
            fn = getattr(seg, side)
            inside = (p >= seg.start) & (p <= seg.end)
            if fn is None:
                out = np.where(inside & np.isnan(out), fill, out)
            else:
                take = inside & (np.isnan(out) | np.isinf(out))
                if np.any(take):
                    out[take] = fn(p[take])
        return out

    def lower_at(self, p):
        out = self._evaluate(p, "lower")
        return float(out[0]) if np.ndim(p) == 0 else out

    def upper_at(self, p):
        out = self._evaluate(p, "upper")
        return float(out[0]) if np.ndim(p) == 0 else out

    def knots(self) -> np.ndarray:
        pts = [0.0, 1.0]
        for seg in self.segments:
            pts += [seg.start, seg.end]
            for fn in (seg.lower, seg.upper):
                if fn is not None:
                    pts.extend(fn.knots.tolist())
        return np.unique(pts)

    def segment(self, start: float, end: float) -> CurveSegment:
        for seg in self.segments:
            if seg.start == start and seg.end == end:
                return seg
        raise KeyError((start, end))


def exact_curve(func: Callable[[np.ndarray], np.ndarray], start: float, end: float, kinks) -> PiecewiseLinear | None:
    """Tabulate a function that is linear between consecutive ``kinks`` on ``[start, end]``.

    Kinks outside the interval are ignored. Returns ``None`` when the
    function is infinite inside the interval.
    """
    span = end - start
    pts = np.asarray(kinks, dtype=float).ravel()
    pts = np.unique(np.concatenate([[start, end], pts[(pts > start) & (pts < end)]]))
    gap = 1e-13 * max(1.0, span)
    keep = np.concatenate([[True], np.diff(pts) > gap])
    pts = pts[keep]
    if pts[-1] != end:
        pts[-1] = end
    mids = np.asarray(func((pts[:-1] + pts[1:]) / 2), dtype=float)
    vals = np.asarray(func(pts), dtype=float)
    if not (np.all(np.isfinite(mids)) and np.all(np.isfinite(vals))):
        return None
    return PiecewiseLinear(pts, vals)


def complier_segment(inp: BaseInputs, dist: StepDistribution) -> CurveSegment:
    """Envelope on ``[p0, p1]`` built from the effect distribution ``dist``."""
    p0, p1, share = inp.p0, inp.p1, inp.share
    iqf = dist.iqf()
    ybar0 = inp.ybar_p0
    ybar1 = ybar0 + share * dist.mean

    def lower(p):
        return ybar0 + share * iqf(np.clip((p - p0) / share, 0, 1))

    def upper(p):
        return ybar1 - share * iqf(np.clip((p1 - p) / share, 0, 1))

    return CurveSegment(p0, p1, exact_curve(lower, p0, p1, p0 + share * iqf.knots), exact_curve(upper, p0, p1, p1 - share * iqf.knots))


def _always_taker_segment(inp: BaseInputs, lo: float, hi: float) -> CurveSegment:
    p0 = inp.p0
    y1a = inp.model.marginal("Y1a")
    iqf = y1a.iqf()
    ybar0 = inp.ybar_p0

    def lower(p):
        return ybar0 - p0 * (y1a.mean - iqf(np.clip(p / p0, 0, 1))) + scaled(p0 - p, lo)

    def upper(p):
        return ybar0 - p0 * iqf(np.clip((p0 - p) / p0, 0, 1)) + scaled(p0 - p, hi)

    return CurveSegment(0.0, p0, exact_curve(lower, 0.0, p0, p0 * iqf.knots), exact_curve(upper, 0.0, p0, p0 - p0 * iqf.knots))


def _never_taker_segment(inp: BaseInputs, lo: float, hi: float) -> CurveSegment:
    p1 = inp.p1
    rest = 1.0 - p1
    y0n = inp.model.marginal("Y0n")
    iqf = y0n.iqf()
    ybar1 = inp.ybar_p1

    def lower(p):
        s = np.clip((p - p1) / rest, 0, 1)
        return ybar1 + scaled(p - p1, lo) - rest * (y0n.mean - iqf(1 - s))

    def upper(p):
        s = np.clip((p - p1) / rest, 0, 1)
        return ybar1 + scaled(p - p1, hi) - rest * iqf(s)

    return CurveSegment(p1, 1.0, exact_curve(lower, p1, 1.0, 1.0 - rest * iqf.knots), exact_curve(upper, p1, 1.0, p1 + rest * iqf.knots))


def scaled(c, v: float):
    """Elementwise ``c * v`` with ``0 * inf = 0``."""
    c = np.asarray(c, dtype=float)
    if not math.isinf(v):
        return c * v
    out = np.zeros_like(c)
    nz = c != 0
    out[nz] = c[nz] * v
    return out


def uniform_bounds_curve(model, outcome_support=None) -> BoundsCurve:
    """Pointwise sharp bounds ``psi_l <= ybar(p) <= psi_h``.

    On compliers ``psi_l(p) = ybar(p0) + L * I((p - p0) / L)`` and
    ``psi_h(p) = ybar(p1) - L * I((p1 - p) / L)`` with ``L = p1 - p0`` and
    ``I`` the integrated quantile function of ``Delta_c^-``.
    """
    inp = as_inputs(model)
    lo, hi = normalize_support(outcome_support)
    segments = []
    if inp.p0 > 0:
        segments.append(_always_taker_segment(inp, lo, hi))
    segments.append(complier_segment(inp, inp.delta))
    if inp.p1 < 1:
        segments.append(_never_taker_segment(inp, lo, hi))
    return BoundsCurve(tuple(segments), inp.tag if inp.tag in MODEL_TAGS else "base")


def area_of_uncertainty(curve: BoundsCurve, p: float, p_hi: float) -> float:
    """Exact ``int_p^p_hi (upper - lower)``; infinite if an infinite side is touched."""
    if not p < p_hi:
        raise DomainError("need p < p_hi")
    total = 0.0
    for seg in curve.segments:
        a, b = max(p, seg.start), min(p_hi, seg.end)
        if b <= a:
            continue
        if seg.lower is None or seg.upper is None:
            return INF
        total += seg.upper.integrate(a, b) - seg.lower.integrate(a, b)
    return total


@dataclass(frozen=True)
class GiniArea:
    """Average width of the complier envelope, computed two ways."""

    from_mean_difference: float
    from_gini_index: float | None


def gini_area(model) -> GiniArea:
    """``(p1 - p0) * Gamma`` and, if the mean effect is nonzero, ``(p1 - p0) * late * gamma``."""
    inp = as_inputs(model)
    gamma, index = gini_statistics(inp.delta)
    via_index = None if index is None or abs(inp.late) <= 1e-12 else inp.share * inp.late * index
    return GiniArea(inp.share * gamma, via_index)


# --------------------------------------------------------------------------
# Membership
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Membership:
    """Outcome of a membership test; truthy when the candidate passes."""

    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def mte_membership(model, m: PiecewiseConstant, tol: float = MEMBERSHIP_TOL) -> Membership:
    """Whether ``m`` belongs to the sharp set of MTE functions.

    On compliers the values of ``m`` must average to the LATE and be a
    contraction of ``Delta_c^-`` (second-order dominance with equal means);
    elsewhere anything goes.
    """
    inp = as_inputs(model)
    values = m.value_distribution(inp.p0, inp.p1)
    if abs(values.mean - inp.late) > tol:
        return Membership(False, f"complier mean {values.mean!r} differs from LATE {inp.late!r}")
    if not stochastic_order(values, inp.delta, "ssd", tol):
        return Membership(False, "complier values do not second-order dominate the counter-monotonic effect")
    return Membership(True)


def cao_membership(model, a: PiecewiseLinear, tol: float = MEMBERSHIP_TOL) -> Membership:
    """Whether ``a`` is a feasible counterfactual average function.

    ``a`` must pass through ``ybar(p0)`` and the integral of the increasing
    rearrangement of its slope on compliers must stay between ``psi_l`` and
    ``psi_h``.
    """
    if not isinstance(a, PiecewiseLinear):
        raise DomainError("candidate must be a continuous piecewise-linear function")
    inp = as_inputs(model)
    if a.start > inp.p0 + 1e-12 or a.end < inp.p1 - 1e-12:
        raise DomainError("candidate must be defined on the whole complier interval")
    if abs(a(inp.p0) - inp.ybar_p0) > tol:
        return Membership(False, "candidate is not anchored at ybar(p0)")
    knots = np.unique(np.concatenate([[inp.p0, inp.p1], a.knots[(a.knots > inp.p0) & (a.knots < inp.p1)]]))
    slopes = np.diff(a(knots)) / np.diff(knots)
    slope_dist = build_step_distribution(slopes, np.diff(knots))
    return _within_envelope(inp, slope_dist, tol)


def _within_envelope(inp: BaseInputs, slope_dist: StepDistribution, tol: float) -> Membership:
    """Check ``psi_l <= ybar(p0) + L * I_slopes((p - p0) / L) <= psi_h`` on the complier interval."""
    seg = complier_segment(inp, inp.delta)
    own = slope_dist.iqf()
    pts = np.unique(np.concatenate([seg.lower.knots, seg.upper.knots, inp.p0 + inp.share * own.knots]))
    pts = np.clip(pts, inp.p0, inp.p1)
    cand = inp.ybar_p0 + inp.share * own(np.clip((pts - inp.p0) / inp.share, 0, 1))
    if np.any(cand < seg.lower(pts) - tol):
        return Membership(False, "integrated candidate falls below the lower envelope")
    if np.any(cand > seg.upper(pts) + tol):
        return Membership(False, "integrated candidate exceeds the upper envelope")
    return Membership(True)
