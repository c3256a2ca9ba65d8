"""Bounds under rank similarity.

If the rank of a unit's outcome is distributed the same way whether treated
or not (given ``U``), complier quantile matching tells us which untreated
value goes with which treated value. The resulting quantile-quantile
correspondence is used to extrapolate the missing potential outcome of
always-takers and never-takers, which turns every base-model bound into a
finite one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .bounds import (
    BoundsCurve,
    CurveSegment,
    ExtendedInterval,
    comonotonic_effect,
    complier_segment,
    exact_curve,
    TreatmentEffectDist,
)
from .dist import (
    PiecewiseConstant,
    StepDistribution,
    build_step_distribution,
    comonotone_blocks,
    quantile_product_mean,
    stochastic_order,
)
from .errors import DomainError, EmptyGroup, SupportError
from .identification import IdentifiedModel

VALUE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class QQCorrespondence:
    """Quantile matching of complier outcomes on a common partition of [0, 1].

    Cell ``k`` covers rank levels ``(q_lo[k], q_hi[k]]`` and pairs untreated
    value ``y0[k]`` with treated value ``y1[k]``. An atom spanning several
    cells on one side is matched to the whole range of values the other side
    takes on those cells.
    """

    q_lo: np.ndarray
    q_hi: np.ndarray
    y0: np.ndarray
    y1: np.ndarray

    def section(self, value: float, known_side: int) -> tuple[float, float]:
        """Smallest and largest value matched to ``value`` on the known side."""
        known, other = (self.y0, self.y1) if known_side == 0 else (self.y1, self.y0)
        hit = np.abs(known - value) <= VALUE_TOL * max(1.0, abs(value))
        if not np.any(hit):
            raise SupportError(f"value {value!r} is outside the complier support of Y{known_side}")
        return float(other[hit].min()), float(other[hit].max())


def build_qq(y0c: StepDistribution, y1c: StepDistribution) -> QQCorrespondence:
    """Pair ``Q_{Y0,c}(q)`` with ``Q_{Y1,c}(q)`` over the merged partition."""
    widths, (v0, v1) = comonotone_blocks(y0c, y1c)
    q_hi = np.cumsum(widths)
    q_hi[-1] = 1.0
    return QQCorrespondence(np.concatenate([[0.0], q_hi[:-1]]), q_hi, v0, v1)


@dataclass(frozen=True, eq=False)
class QuantileEnvelope:
    """Pointwise bounds on an unidentified quantile function.

    Both bounds are stored as distributions; their quantile functions are the
    lower and upper envelopes.
    """

    lower: StepDistribution
    upper: StepDistribution

    def lower_q(self, q):
        return self.lower.quantile(q)

    def upper_q(self, q):
        return self.upper.quantile(q)


def extrapolate_quantiles(qq: QQCorrespondence, known: StepDistribution, known_side: int) -> QuantileEnvelope:
    """Bound the quantile function of the other potential outcome.

    At rank ``q`` the unknown quantile lies in the section of the
    correspondence at ``Q_known(q)``. The section endpoints are nondecreasing
    in the known value, so each envelope is the pushforward of ``known``.
    """
    if known_side not in (0, 1):
        raise DomainError("known_side must be 0 or 1")
    sections = np.array([qq.section(v, known_side) for v in known.support])
    return QuantileEnvelope(
        build_step_distribution(sections[:, 0], known.masses),
        build_step_distribution(sections[:, 1], known.masses),
    )


@dataclass(frozen=True)
class EffectBounds:
    """First-order bounds on a group's comonotonic effect distribution."""

    lower: TreatmentEffectDist
    upper: TreatmentEffectDist


def rs_effect_bounds(model: IdentifiedModel, groups: Iterable[str] = ("a", "c", "n")) -> dict[str, EffectBounds]:
    """Lower and upper comonotonic effect distributions for each requested group.

    Always-takers pair their identified ``Y1`` with the extrapolated ``Y0``
    envelope, never-takers pair their identified ``Y0`` with the extrapolated
    ``Y1`` envelope; the complier effect is identified.
    """
    qq = build_qq(model.marg_Y0c, model.marg_Y1c)
    out = {}
    for g in groups:
        if not model.has_group(g):
            raise EmptyGroup(f"group {g!r} has probability zero")
        if g == "c":
            eff = comonotonic_effect(model.marg_Y0c, model.marg_Y1c, "c")
            out[g] = EffectBounds(eff, eff)
        elif g == "a":
            y1a = model.marginal("Y1a")
            env = extrapolate_quantiles(qq, y1a, 1)
            out[g] = EffectBounds(comonotonic_effect(env.upper, y1a, "a"), comonotonic_effect(env.lower, y1a, "a"))
        elif g == "n":
            y0n = model.marginal("Y0n")
            env = extrapolate_quantiles(qq, y0n, 0)
            out[g] = EffectBounds(comonotonic_effect(y0n, env.lower, "n"), comonotonic_effect(y0n, env.upper, "n"))
        else:
            raise DomainError(f"unknown group {g!r}")
    return out


@dataclass(frozen=True, eq=False)
class RankInputs:
    """Group effect bounds plus the anchors needed by the rank-similar bounds.

    ``effects`` maps each nonempty group to a ``(lower, upper)`` pair of
    effect distributions.
    """

    p0: float
    p1: float
    ybar_p0: float
    effects: dict = field(default_factory=dict)
    tag: str = "rank_sim"

    @classmethod
    def from_model(cls, model: IdentifiedModel) -> RankInputs:
        groups = [g for g in ("a", "c", "n") if model.has_group(g)]
        bounds = rs_effect_bounds(model, groups)
        return cls(model.p0, model.p1, model.ybar_p0, {g: (b.lower.dist, b.upper.dist) for g, b in bounds.items()})

    @property
    def share(self) -> float:
        return self.p1 - self.p0

    @property
    def ybar_p1(self) -> float:
        return self.ybar_p0 + self.share * self.effects["c"][1].mean

    def interval(self, g: str) -> tuple[float, float]:
        return {"a": (0.0, self.p0), "c": (self.p0, self.p1), "n": (self.p1, 1.0)}[g]


def as_rank_inputs(model) -> RankInputs:
    if isinstance(model, RankInputs):
        return model
    if isinstance(model, IdentifiedModel):
        return RankInputs.from_model(model)
    raise TypeError(f"expected IdentifiedModel or RankInputs, got {type(model).__name__}")


def rs_wte_bounds(model, w: PiecewiseConstant) -> ExtendedInterval:
    """Bounds on ``int MTE * w`` for a nonnegative weight under rank similarity.

    Within each group the upper bound pairs sorted weights with the quantiles
    of the upper effect distribution, and the lower bound pairs reversed
    weights with the lower effect distribution.
    """
    if np.any(w.values < 0):
        raise DomainError("rank-similar bounds require a nonnegative weight")
    inp = as_rank_inputs(model)
    lower = upper = 0.0
    for g, (lo_dist, hi_dist) in inp.effects.items():
        a, b = inp.interval(g)
        if b <= a or w.measure_nonzero(a, b) == 0:
            continue
        weights = w.value_distribution(a, b)
        lower += (b - a) * quantile_product_mean(lo_dist, weights, antitone=True)
        upper += (b - a) * quantile_product_mean(hi_dist, weights)
    return ExtendedInterval(lower, upper)


def rs_uniform_bounds(model) -> BoundsCurve:
    """Pointwise bounds on ``ybar(p)`` under rank similarity, finite on [0, 1]."""
    inp = as_rank_inputs(model)
    p0, p1 = inp.p0, inp.p1
    segments = []
    if "a" in inp.effects:
        lo_a, hi_a = inp.effects["a"]
        i_lo, i_hi = lo_a.iqf(), hi_a.iqf()

        def lower(p):
            return inp.ybar_p0 - p0 * (hi_a.mean - i_hi(np.clip(p / p0, 0, 1)))

        def upper(p):
            return inp.ybar_p0 - p0 * i_lo(np.clip((p0 - p) / p0, 0, 1))

        segments.append(CurveSegment(0.0, p0, exact_curve(lower, 0.0, p0, p0 * i_hi.knots), exact_curve(upper, 0.0, p0, p0 - p0 * i_lo.knots)))
    segments.append(complier_segment(inp, inp.effects["c"][0]))
    if "n" in inp.effects:
        lo_n, hi_n = inp.effects["n"]
        i_lo, i_hi = lo_n.iqf(), hi_n.iqf()
        rest = 1.0 - p1
        ybar1 = inp.ybar_p1

        def lower_n(p):
            return ybar1 + rest * i_lo(np.clip((p - p1) / rest, 0, 1))

        def upper_n(p):
            return ybar1 + rest * (hi_n.mean - i_hi(np.clip((1 - p) / rest, 0, 1)))

        segments.append(CurveSegment(p1, 1.0, exact_curve(lower_n, p1, 1.0, p1 + rest * i_lo.knots), exact_curve(upper_n, p1, 1.0, 1.0 - rest * i_hi.knots)))
    return BoundsCurve(tuple(segments), inp.tag)


@dataclass(frozen=True)
class RankCheck:
    """Per-group outcome of the necessary-condition check; empty reason means pass."""

    reasons: dict

    @property
    def ok(self) -> bool:
        return all(not r for r in self.reasons.values())

    def __bool__(self) -> bool:
        return self.ok


def rs_mte_check(model, m: PiecewiseConstant, tol: float = 1e-9) -> RankCheck:
    """Necessary conditions for ``m`` to be an MTE function under rank similarity.

    For every group the mean of ``m`` must lie between the means of the lower
    and upper effect distributions, and the values of ``m`` must second-order
    dominate the lower effect distribution. Passing does not certify
    membership in the sharp set.
    """
    inp = as_rank_inputs(model)
    reasons = {}
    for g, (lo_dist, hi_dist) in inp.effects.items():
        a, b = inp.interval(g)
        values = m.value_distribution(a, b)
        if not (lo_dist.mean - tol <= values.mean <= hi_dist.mean + tol):
            reasons[g] = f"mean {values.mean!r} outside [{lo_dist.mean!r}, {hi_dist.mean!r}]"
        elif not stochastic_order(values, lo_dist, "ssd", tol):
            reasons[g] = "values do not second-order dominate the lower effect distribution"
        else:
            reasons[g] = ""
    return RankCheck(reasons)
