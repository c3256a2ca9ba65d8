"""Discrete covariates: cell-wise identification and the bounds it tightens.

Within a covariate cell the counter-monotonic complier effect is as
dispersed as the cell's marginals allow. Mixing these cell effects gives a
distribution that is less dispersed than the pooled counter-monotonic effect
with the same mean, so plugging the mixture into the base-model formulas
tightens every bound.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

from .bounds import BaseInputs, TreatmentEffectDist, counter_monotonic_effect
from .dist import StepDistribution, mixture, sup_cdf_distance
from .errors import (
    ConstructionError,
    EmptyGroup,
    FirstStageError,
    IdentificationError,
    SupportError,
)
from .identification import DataRecord, IdentifiedModel, identify
from .rank import RankInputs, build_qq, rs_effect_bounds

logger = logging.getLogger(__name__)

DEFAULT_MIN_CELL_SIZE = 50


@dataclass(frozen=True, eq=False)
class CovariateCells:
    """Per-cell identified models, their probabilities and the pooled model."""

    cells: Mapping[Hashable, tuple[float, IdentifiedModel]]
    pooled: IdentifiedModel
    dropped: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.cells:
            raise ConstructionError("at least one covariate cell is required")
        total = sum(prob for prob, _ in self.cells.values())
        if abs(total - 1.0) > 1e-12:
            raise ConstructionError(f"cell probabilities sum to {total!r}")

    @property
    def labels(self) -> list:
        return list(self.cells)

    def group_weights(self, group: str) -> dict:
        """``P(X = x | G = group)`` for every cell."""
        raw = {x: prob * model.group_probs["acn".index(group)] for x, (prob, model) in self.cells.items()}
        total = sum(raw.values())
        if total <= 0:
            raise EmptyGroup(f"group {group!r} is empty in every cell")
        return {x: v / total for x, v in raw.items()}

    @property
    def complier_weights(self) -> dict:
        return self.group_weights("c")

    @classmethod
    def from_models(cls, models: Mapping[Hashable, IdentifiedModel], probs: Mapping[Hashable, float]) -> CovariateCells:
        """Population cells with the pooled model obtained by mixing.

        Assumes the instrument is independent of the covariate, so pooled
        propensities and counterfactual averages are probability-weighted
        averages of the cell quantities.
        """
        labels = list(models)
        pr = np.array([probs[x] for x in labels], dtype=float)
        ms = [models[x] for x in labels]
        p0 = float(np.dot(pr, [m.p0 for m in ms]))
        p1 = float(np.dot(pr, [m.p1 for m in ms]))

        def pooled_marginal(name: str, share: Callable[[IdentifiedModel], float]):
            w = pr * np.array([share(m) for m in ms])
            if w.sum() <= 0:
                return None
            keep = w > 0
            return mixture([m.marginal(name) for m, k in zip(ms, keep) if k], w[keep] / w[keep].sum())

        cw = pr * np.array([m.complier_share for m in ms])
        cw = cw / cw.sum()
        pooled = IdentifiedModel(
            p0,
            p1,
            pooled_marginal("Y1a", lambda m: m.p0) if p0 > 0 else None,
            pooled_marginal("Y0n", lambda m: 1 - m.p1) if p1 < 1 else None,
            pooled_marginal("Y0c", lambda m: m.complier_share),
            pooled_marginal("Y1c", lambda m: m.complier_share),
            float(np.dot(pr, [m.ybar_p0 for m in ms])),
            float(np.dot(pr, [m.ybar_p1 for m in ms])),
            float(np.dot(cw, [m.mean_y1c for m in ms])),
            float(np.dot(cw, [m.mean_y0c for m in ms])),
            float(np.dot(pr, [m.prob_z1 for m in ms])),
        )
        return cls({x: (float(p), m) for x, p, m in zip(labels, pr, ms)}, pooled)


def split_cells(records: Sequence[DataRecord], min_cell_size: int = DEFAULT_MIN_CELL_SIZE) -> CovariateCells:
    """Identify the model separately in every covariate cell.

    Cells with fewer than ``min_cell_size`` records are dropped with a
    warning; the remaining cell probabilities are renormalized and the pooled
    model is identified from the retained records.
    """
    by_cell = defaultdict(list)
    for r in records:
        if r.x is None:
            raise ConstructionError("every record needs a covariate label")
        by_cell[r.x].append(r)
    if not by_cell:
        raise IdentificationError("no records")

    dropped = tuple(sorted((x for x, rs in by_cell.items() if len(rs) < min_cell_size), key=repr))
    for x in dropped:
        logger.warning("dropping covariate cell %r with %d records (< %d)", x, len(by_cell[x]), min_cell_size)
    kept = {x: rs for x, rs in by_cell.items() if x not in dropped}
    if not kept:
        raise IdentificationError("every covariate cell is below the minimum size")

    def arrays(rs):
        return (
            np.array([r.z for r in rs]),
            np.array([r.d for r in rs]),
            np.array([r.y for r in rs], dtype=float),
            np.array([r.weight for r in rs], dtype=float),
        )

    mass = {x: float(sum(r.weight for r in rs)) for x, rs in kept.items()}
    total = sum(mass.values())
    cells = {}
    for x in sorted(kept, key=repr):
        try:
            model = identify(*arrays(kept[x]))
        except FirstStageError as exc:
            raise FirstStageError(f"covariate cell {x!r}: {exc}") from exc
        except IdentificationError as exc:
            raise IdentificationError(f"covariate cell {x!r}: {exc}") from exc
        cells[x] = (mass[x] / total, model)
    pooled = identify(*arrays([r for x in sorted(kept, key=repr) for r in kept[x]]))
    return CovariateCells(cells, pooled, dropped)


def aggregate_countermonotonic(cells: CovariateCells) -> TreatmentEffectDist:
    """Complier-weighted mixture of the cell counter-monotonic effects."""
    weights = cells.complier_weights
    dists = [counter_monotonic_effect(m.marg_Y0c, m.marg_Y1c).dist for _, m in cells.cells.values()]
    return TreatmentEffectDist(mixture(dists, [weights[x] for x in cells.cells]), "counter", "c")


def covariate_inputs(cells: CovariateCells) -> BaseInputs:
    """Pooled anchors with the aggregated effect in place of the pooled one."""
    pooled = cells.pooled
    return BaseInputs(pooled.p0, pooled.p1, pooled.ybar_p0, aggregate_countermonotonic(cells).dist, pooled, "covariate")


def covariate_tightened_bounds(cells: CovariateCells, query: Callable, *args, **kwargs):
    """Run a base-model query (for example ``sharp_late_bounds``) with the aggregated effect."""
    return query(covariate_inputs(cells), *args, **kwargs)


def conditional_rank_inputs(cells: CovariateCells) -> RankInputs:
    """Group effect bounds under rank similarity within each covariate cell."""
    effects = {}
    pooled = cells.pooled
    for g in ("a", "c", "n"):
        if not pooled.has_group(g):
            continue
        weights = cells.group_weights(g)
        lows, highs, ws = [], [], []
        for x, (_, model) in cells.cells.items():
            if weights[x] <= 0:
                continue
            b = rs_effect_bounds(model, (g,))[g]
            lows.append(b.lower.dist)
            highs.append(b.upper.dist)
            ws.append(weights[x])
        ws = np.array(ws) / np.sum(ws)
        effects[g] = (mixture(lows, ws), mixture(highs, ws))
    return RankInputs(pooled.p0, pooled.p1, pooled.ybar_p0, effects, "cond_rank_sim")


@dataclass(frozen=True)
class ConditionalRankReport:
    """Diagnostics for rank similarity holding within and across cells.

    ``qq_subset_max_violation`` is zero when all cell quantile pairings lie on
    one monotone curve. ``effect_distribution_distance`` gives, per group, the
    sup-CDF distance between the mixture of cell effect distributions and the
    pooled one (``None`` when the group cannot be computed).
    """

    qq_subset_max_violation: float
    effect_distribution_distance: dict

    def as_dict(self) -> dict:
        return {
            "qq_subset_max_violation": self.qq_subset_max_violation,
            "effect_distribution_distance": dict(self.effect_distribution_distance),
        }


def qq_ordering_violation(points: np.ndarray) -> float:
    """Largest ``min(|dy0|, |dy1|)`` over pairs of points ordered in opposite directions."""
    y0, y1 = points[:, 0], points[:, 1]
    d0 = y0[:, None] - y0[None, :]
    d1 = y1[:, None] - y1[None, :]
    discordant = d0 * d1 < 0
    if not np.any(discordant):
        return 0.0
    return float(np.max(np.minimum(np.abs(d0), np.abs(d1))[discordant]))


def conditional_rs_tests(cells: CovariateCells, pooled: IdentifiedModel | None = None) -> ConditionalRankReport:
    pooled = cells.pooled if pooled is None else pooled
    pts = []
    for _, model in cells.cells.values():
        qq = build_qq(model.marg_Y0c, model.marg_Y1c)
        pts.append(np.column_stack([qq.y0, qq.y1]))
    violation = qq_ordering_violation(np.unique(np.vstack(pts), axis=0))

    distances = {}
    try:
        cond = conditional_rank_inputs(cells)
    except (SupportError, EmptyGroup):
        cond = None
    for g in ("a", "c", "n"):
        if not pooled.has_group(g):
            distances[g] = None
            continue
        try:
            ref = rs_effect_bounds(pooled, (g,))[g]
            if cond is None:
                if g != "c":
                    raise SupportError("conditional effects unavailable")
                mixed = _complier_mixture(cells)
                distances[g] = sup_cdf_distance(mixed, ref.lower.dist)
                continue
            lo, hi = cond.effects[g]
            distances[g] = max(sup_cdf_distance(lo, ref.lower.dist), sup_cdf_distance(hi, ref.upper.dist))
        except (SupportError, EmptyGroup):
            distances[g] = None
    return ConditionalRankReport(violation, distances)


def _complier_mixture(cells: CovariateCells) -> StepDistribution:
    weights = cells.complier_weights
    dists = [rs_effect_bounds(m, ("c",))["c"].lower.dist for _, m in cells.cells.values()]
    return mixture(dists, [weights[x] for x in cells.cells])
