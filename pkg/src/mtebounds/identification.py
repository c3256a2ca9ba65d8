"""Identified objects of the binary-instrument selection model.

From (Z, D, Y) data we recover the propensity scores ``p0 < p1``, the group
shares of always-takers (``U <= p0``), compliers (``p0 < U <= p1``) and
never-takers (``U > p1``), and four outcome marginals: treated always-takers,
untreated never-takers, and both potential outcomes of compliers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from .dist import StepDistribution, build_step_distribution, from_cdf
from .errors import ConstructionError, EmptyGroup, FirstStageError, IdentificationError

GROUPS = ("a", "c", "n")


@dataclass(frozen=True)
class DataRecord:
    """One observation: instrument ``z``, treatment ``d``, outcome ``y``."""

    z: int
    d: int
    y: float
    weight: float = 1.0
    x: Hashable | None = None

    def __post_init__(self):
        if self.z not in (0, 1) or self.d not in (0, 1):
            raise ConstructionError("z and d must be binary")
        if not np.isfinite(self.y):
            raise ConstructionError("y must be finite")
        if not (self.weight > 0 and np.isfinite(self.weight)):
            raise ConstructionError("weight must be positive")


@dataclass(frozen=True)
class IsotonizationReport:
    """Largest raw violation found while repairing each complier CDF."""

    y1c_violation: float = 0.0
    y0c_violation: float = 0.0

    @property
    def max_violation(self) -> float:
        return max(self.y1c_violation, self.y0c_violation)

    def as_dict(self) -> dict:
        return {"y1c": self.y1c_violation, "y0c": self.y0c_violation}


@dataclass(frozen=True, eq=False)
class IdentifiedModel:
    """Everything the instrument identifies without further assumptions.

    Marginals of empty groups (``p0 == 0`` or ``p1 == 1``) are ``None``;
    :meth:`marginal` raises :class:`EmptyGroup` for them.

    ``mean_y1c`` and ``mean_y0c`` are the complier means obtained by
    differencing, before any CDF repair, so that ``late_ia`` is always
    ``mean_y1c - mean_y0c``.
    """

    p0: float
    p1: float
    marg_Y1a: StepDistribution | None
    marg_Y0n: StepDistribution | None
    marg_Y0c: StepDistribution
    marg_Y1c: StepDistribution
    ybar_p0: float
    ybar_p1: float
    mean_y1c: float
    mean_y0c: float
    prob_z1: float = 0.5
    diagnostics: IsotonizationReport = field(default_factory=IsotonizationReport)

    def __post_init__(self):
        if not (0.0 <= self.p0 < self.p1 <= 1.0):
            raise FirstStageError(f"need 0 <= p0 < p1 <= 1, got p0={self.p0}, p1={self.p1}")
        if (self.p0 > 0) != (self.marg_Y1a is not None):
            raise ConstructionError("marg_Y1a must be given exactly when p0 > 0")
        if (self.p1 < 1) != (self.marg_Y0n is not None):
            raise ConstructionError("marg_Y0n must be given exactly when p1 < 1")

    @classmethod
    def from_groups(
        cls,
        p0: float,
        p1: float,
        y1a: StepDistribution | None,
        y0n: StepDistribution | None,
        y0c: StepDistribution,
        y1c: StepDistribution,
        prob_z1: float = 0.5,
    ) -> IdentifiedModel:
        """Population model from group marginals; the counterfactual averages follow."""
        p0, p1 = float(p0), float(p1)
        ea = y1a.mean if y1a is not None else 0.0
        en = y0n.mean if y0n is not None else 0.0
        ybar0 = p0 * ea + (p1 - p0) * y0c.mean + (1 - p1) * en
        ybar1 = p0 * ea + (p1 - p0) * y1c.mean + (1 - p1) * en
        return cls(p0, p1, y1a, y0n, y0c, y1c, ybar0, ybar1, y1c.mean, y0c.mean, prob_z1)

    @property
    def complier_share(self) -> float:
        return self.p1 - self.p0

    @property
    def group_probs(self) -> tuple[float, float, float]:
        return (self.p0, self.p1 - self.p0, 1.0 - self.p1)

    @property
    def late_ia(self) -> float:
        return (self.ybar_p1 - self.ybar_p0) / (self.p1 - self.p0)

    def group_interval(self, group: str) -> tuple[float, float]:
        return {"a": (0.0, self.p0), "c": (self.p0, self.p1), "n": (self.p1, 1.0)}[group]

    def has_group(self, group: str) -> bool:
        lo, hi = self.group_interval(group)
        return hi > lo

    def marginal(self, name: str) -> StepDistribution:
        """Look up ``'Y1a'``, ``'Y0n'``, ``'Y0c'`` or ``'Y1c'``."""
        dist = {"Y1a": self.marg_Y1a, "Y0n": self.marg_Y0n, "Y0c": self.marg_Y0c, "Y1c": self.marg_Y1c}[name]
        if dist is None:
            raise EmptyGroup(f"{name} is not identified: its group has probability zero")
        return dist


def monotonize_cdf(raw) -> tuple[StepDistribution, float]:
    """Repair a raw CDF tabulation into a valid distribution.

    ``raw`` maps support points to raw CDF values (a mapping, or a pair of
    sequences). The repair takes the running maximum, clips to [0, 1] and
    forces the last value to 1. The returned violation is the largest of the
    monotonicity drops, the excursions outside [0, 1] and the terminal gap.
    """
    if isinstance(raw, Mapping):
        items = sorted(raw.items())
        support = np.array([k for k, _ in items], dtype=float)
        values = np.array([v for _, v in items], dtype=float)
    else:
        support, values = (np.asarray(a, dtype=float) for a in raw)
        order = np.argsort(support, kind="stable")
        support, values = support[order], values[order]
    if support.size == 0 or not np.all(np.isfinite(values)):
        raise ConstructionError("raw CDF values must be finite and non-empty")
    running = np.maximum.accumulate(values)
    violation = max(
        float(np.max(running - values)),
        float(max(0.0, -values.min())),
        float(max(0.0, values.max() - 1.0)),
        abs(1.0 - float(values[-1])),
    )
    repaired = np.clip(running, 0.0, 1.0)
    repaired[-1] = 1.0
    return from_cdf(support, repaired), violation


def _as_arrays(records: Sequence[DataRecord]):
    z = np.array([r.z for r in records], dtype=int)
    d = np.array([r.d for r in records], dtype=int)
    y = np.array([r.y for r in records], dtype=float)
    w = np.array([r.weight for r in records], dtype=float)
    return z, d, y, w


def estimate_identified_model(records: Sequence[DataRecord]) -> IdentifiedModel:
    """Identify the model from a sequence of :class:`DataRecord`."""
    if len(records) == 0:
        raise IdentificationError("no records")
    return identify(*_as_arrays(records))


def _arm_tally(y: np.ndarray, w: np.ndarray, grid: np.ndarray, total: float) -> np.ndarray:
    """``sum(w * 1(y <= g)) / total`` for every grid point ``g``."""
    idx = np.searchsorted(grid, y)
    return np.cumsum(np.bincount(idx, weights=w, minlength=grid.size)) / total


def identify(z, d, y, weight=None) -> IdentifiedModel:
    """Identify the model from aligned arrays ``z, d, y`` and optional weights."""
    z = np.asarray(z).astype(int)
    d = np.asarray(d).astype(int)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weight is None else np.asarray(weight, dtype=float)
    if not (z.shape == d.shape == y.shape == w.shape):
        raise IdentificationError("z, d, y and weight must have the same length")
    if not np.all(np.isin(z, (0, 1))) or not np.all(np.isin(d, (0, 1))):
        raise IdentificationError("z and d must be binary")
    if not np.all(np.isfinite(y)) or np.any(~(w > 0)):
        raise IdentificationError("outcomes must be finite and weights positive")

    # Canonical order makes every floating-point sum independent of input order.
    order = np.lexsort((w, y, d, z))
    z, d, y, w = z[order], d[order], y[order], w[order]

    arms = {}
    for arm in (0, 1):
        sel = z == arm
        if not np.any(sel):
            raise IdentificationError(f"instrument arm z={arm} has no records")
        arms[arm] = (d[sel], y[sel], w[sel], float(w[sel].sum()))

    p = {arm: float(np.sum(dd * ww) / tot) for arm, (dd, _, ww, tot) in arms.items()}
    if p[0] >= p[1]:
        raise FirstStageError(f"first stage fails: p0={p[0]!r} >= p1={p[1]!r}")
    p0, p1 = p[0], p[1]
    share = p1 - p0
    ybar = {arm: float(np.dot(yy, ww) / tot) for arm, (_, yy, ww, tot) in arms.items()}

    def cell(arm: int, treat: int):
        dd, yy, ww, _ = arms[arm]
        sel = dd == treat
        return yy[sel], ww[sel]

    y1a = y0n = None
    if p0 > 0:
        y1a = build_step_distribution(*cell(0, 1))
    if p1 < 1:
        y0n = build_step_distribution(*cell(1, 0))

    # Complier CDFs by differencing the two arms.
    y11, w11 = cell(1, 1)
    y01, w01 = cell(0, 1)
    grid1 = np.unique(np.concatenate([y11, y01]))
    raw1 = (_arm_tally(y11, w11, grid1, arms[1][3]) - _arm_tally(y01, w01, grid1, arms[0][3])) / share
    y00, w00 = cell(0, 0)
    y10, w10 = cell(1, 0)
    grid0 = np.unique(np.concatenate([y00, y10]))
    raw0 = (_arm_tally(y00, w00, grid0, arms[0][3]) - _arm_tally(y10, w10, grid0, arms[1][3])) / share
    y1c, v1 = monotonize_cdf((grid1, raw1))
    y0c, v0 = monotonize_cdf((grid0, raw0))

    mean_y1c = (np.dot(y11, w11) / arms[1][3] - np.dot(y01, w01) / arms[0][3]) / share
    mean_y0c = (np.dot(y00, w00) / arms[0][3] - np.dot(y10, w10) / arms[1][3]) / share
    prob_z1 = arms[1][3] / (arms[0][3] + arms[1][3])
    return IdentifiedModel(
        p0, p1, y1a, y0n, y0c, y1c, ybar[0], ybar[1], float(mean_y1c), float(mean_y0c),
        prob_z1, IsotonizationReport(v1, v0),
    )


@dataclass(frozen=True)
class SupportCheck:
    """Whether each identified non-complier marginal lives on the complier support."""

    never_takers: bool
    always_takers: bool

    @property
    def overall(self) -> bool:
        return self.never_takers and self.always_takers

    def __bool__(self) -> bool:
        return self.overall

    def as_dict(self) -> dict:
        return {"0n": self.never_takers, "1a": self.always_takers, "overall": self.overall}


def support_subset(inner: StepDistribution, outer: StepDistribution, tol: float = 1e-12) -> bool:
    pos = np.clip(np.searchsorted(outer.support, inner.support), 1, max(outer.support.size - 1, 1))
    if outer.support.size == 1:
        gaps = np.abs(inner.support - outer.support[0])
    else:
        gaps = np.minimum(np.abs(inner.support - outer.support[pos - 1]), np.abs(inner.support - outer.support[pos]))
    return bool(np.all(gaps <= tol * np.maximum(1.0, np.abs(inner.support))))


def check_complier_support(model: IdentifiedModel) -> SupportCheck:
    """Test supp(Y0 | never-taker) within supp(Y0 | complier), and likewise for Y1 and always-takers.

    An empty group passes vacuously.
    """
    n_ok = model.marg_Y0n is None or support_subset(model.marg_Y0n, model.marg_Y0c)
    a_ok = model.marg_Y1a is None or support_subset(model.marg_Y1a, model.marg_Y1c)
    return SupportCheck(n_ok, a_ok)
