"""Exact arithmetic on finitely supported distributions and step functions.

Everything here works on step functions: distributions with finite support,
their piecewise-linear integrated quantile functions, and piecewise-constant
functions on [0, 1]. No sampling or numerical quadrature is involved, so the
results are exact up to floating point rounding.

Conventions
-----------
* ``cdf`` is right-continuous.
* ``quantile`` is the left-continuous generalized inverse
  ``Q(q) = inf{x : F(x) >= q}`` with ``Q(0)`` equal to the smallest atom.
* ``I(q) = integral_0^q Q(s) ds`` is the integrated quantile function (IQF).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConstructionError, DomainError

MASS_TOL = 1e-12
# Cumulative levels closer than this are treated as the same level when
# partitions of [0, 1] are merged.
LEVEL_TOL = 1e-12
QUANTILE_TOL = 1e-12


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StepDistribution:
    """A probability distribution with finitely many atoms.

    Attributes
    ----------
    support : ndarray
        Strictly increasing atom locations.
    masses : ndarray
        Positive probabilities aligned with ``support``, summing to one.
    """

    support: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        support = _readonly(self.support).reshape(-1)
        masses = _readonly(self.masses).reshape(-1)
        if support.size == 0 or support.shape != masses.shape:
            raise ConstructionError("support and masses must be non-empty and aligned")
        if not np.all(np.isfinite(support)):
            raise ConstructionError("support must be finite")
        if np.any(np.diff(support) <= 0):
            raise ConstructionError("support must be strictly increasing")
        if np.any(masses <= 0) or not np.all(np.isfinite(masses)):
            raise ConstructionError("masses must be positive")
        if abs(masses.sum() - 1.0) > MASS_TOL:
            raise ConstructionError(f"masses sum to {masses.sum()!r}, not 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "masses", masses)
        cum = np.cumsum(masses)
        cum[-1] = 1.0
        cum.setflags(write=False)
        object.__setattr__(self, "_cum", cum)

    def __len__(self) -> int:
        return self.support.size

    def __repr__(self) -> str:
        return f"StepDistribution(support={self.support.tolist()}, masses={self.masses.tolist()})"

    @property
    def cum(self) -> np.ndarray:
        """Cumulative masses ``F(support[k])``; the last entry is exactly 1."""
        return self._cum

    @property
    def mean(self) -> float:
        return float(np.dot(self.support, self.masses))

    @property
    def min(self) -> float:
        return float(self.support[0])

    @property
    def max(self) -> float:
        return float(self.support[-1])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.support, x, side="right")
        out = np.where(idx > 0, self._cum[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if out.ndim == 0 else out

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        if np.any((q < 0) | (q > 1)) or np.any(np.isnan(q)):
            raise DomainError("quantile level must lie in [0, 1]")
        idx = np.searchsorted(self._cum, q - QUANTILE_TOL, side="left")
        out = self.support[np.minimum(idx, self.support.size - 1)]
        return float(out) if out.ndim == 0 else out

    def iqf(self) -> PiecewiseLinear:
        return integrated_quantile(self)

    def negate(self) -> StepDistribution:
        """Distribution of ``-X``."""
        return StepDistribution(-self.support[::-1], self.masses[::-1])

    def shift(self, c: float) -> StepDistribution:
        return StepDistribution(self.support + c, self.masses)

    def isclose(self, other: StepDistribution, atol: float = 1e-12) -> bool:
        return (
            self.support.shape == other.support.shape
            and np.allclose(self.support, other.support, rtol=0, atol=atol)
            and np.allclose(self.masses, other.masses, rtol=0, atol=atol)
        )


def build_step_distribution(values: Sequence[float], weights: Sequence[float] | None = None) -> StepDistribution:
    """Normalize weighted values into a :class:`StepDistribution`.

    Equal values are merged and zero-weight values dropped.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    if weights is None:
        weights = np.ones_like(values)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if values.shape != weights.shape:
        raise ConstructionError("values and weights must have the same length")
    if not np.all(np.isfinite(values)):
        raise ConstructionError("values must be finite")
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise ConstructionError("weights must be finite and nonnegative")
    keep = weights > 0
    if not np.any(keep):
        raise ConstructionError("at least one weight must be positive")
    values, weights = values[keep], weights[keep]
    support, inverse = np.unique(values, return_inverse=True)
    masses = np.bincount(inverse, weights=weights, minlength=support.size)
    return StepDistribution(support, masses / masses.sum())


def point_mass(c: float) -> StepDistribution:
    return StepDistribution([c], [1.0])


def from_cdf(support: Sequence[float], cdf_values: Sequence[float]) -> StepDistribution:
    """Build a distribution from a nondecreasing CDF evaluated at its jump points."""
    support = np.asarray(support, dtype=float)
    cdf_values = np.asarray(cdf_values, dtype=float)
    masses = np.diff(np.concatenate([[0.0], cdf_values]))
    if np.any(masses < -MASS_TOL):
        raise ConstructionError("cdf values must be nondecreasing")
    return build_step_distribution(support, np.clip(masses, 0.0, None))


def evaluate(dist: StepDistribution, mode: str, point: float) -> float:
    """Evaluate the CDF (``mode='cdf'``) or quantile function (``mode='quantile'``)."""
    if mode == "cdf":
        return dist.cdf(point)
    if mode == "quantile":
        return dist.quantile(point)
    raise DomainError(f"unknown mode {mode!r}")


def sup_cdf_distance(a: StepDistribution, b: StepDistribution) -> float:
    pts = np.union1d(a.support, b.support)
    return float(np.max(np.abs(a.cdf(pts) - b.cdf(pts))))


# --------------------------------------------------------------------------
# Piecewise functions
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    """Continuous piecewise-linear function given by its values at knots."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        knots = _readonly(self.knots).reshape(-1)
        values = _readonly(self.values).reshape(-1)
        if knots.size < 2 or knots.shape != values.shape:
            raise ConstructionError("need at least two aligned knots and values")
        if np.any(np.diff(knots) <= 0):
            raise ConstructionError("knots must be strictly increasing")
        if not (np.all(np.isfinite(knots)) and np.all(np.isfinite(values))):
            raise ConstructionError("knots and values must be finite")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    @property
    def start(self) -> float:
        return float(self.knots[0])

    @property
    def end(self) -> float:
        return float(self.knots[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.start - 1e-12) or np.any(x > self.end + 1e-12):
            raise DomainError(f"evaluation point outside [{self.start}, {self.end}]")
        out = np.interp(x, self.knots, self.values)
        return float(out) if out.ndim == 0 else out

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.knots)

    def is_convex(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.slopes) >= -tol))

    def is_concave(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.slopes) <= tol))

    def integrate(self, a: float | None = None, b: float | None = None) -> float:
        """Exact integral over ``[a, b]`` (defaults to the whole domain)."""
        a = self.start if a is None else a
        b = self.end if b is None else b
        if b < a:
            return -self.integrate(b, a)
        inner = self.knots[(self.knots > a) & (self.knots < b)]
        pts = np.concatenate([[a], inner, [b]])
        vals = self(pts)
        return float(np.sum(np.diff(pts) * (vals[:-1] + vals[1:]) / 2))

    def derivative(self) -> PiecewiseConstant:
        """Slopes as a piecewise-constant function; the domain must be [0, 1]."""
        return PiecewiseConstant(self.knots, self.slopes)


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """Piecewise-constant function on [0, 1].

    ``values[k]`` holds on ``[breakpoints[k], breakpoints[k+1])``; the last
    cell is closed on the right.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = _readonly(self.breakpoints).reshape(-1)
        values = _readonly(self.values).reshape(-1)
        if bp.size != values.size + 1 or values.size == 0:
            raise ConstructionError("need len(breakpoints) == len(values) + 1")
        if abs(bp[0]) > 1e-12 or abs(bp[-1] - 1.0) > 1e-12:
            raise ConstructionError("breakpoints must start at 0 and end at 1")
        if np.any(np.diff(bp) <= 0):
            raise ConstructionError("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ConstructionError("values must be finite")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, c: float) -> PiecewiseConstant:
        return cls([0.0, 1.0], [c])

    @classmethod
    def step(cls, a: float, b: float, height: float) -> PiecewiseConstant:
        """``height`` on ``[a, b)`` and zero elsewhere."""
        if not 0 <= a < b <= 1:
            raise DomainError("need 0 <= a < b <= 1")
        bp = np.unique([0.0, a, b, 1.0])
        mids = (bp[:-1] + bp[1:]) / 2
        return cls(bp, np.where((mids > a) & (mids < b), height, 0.0))

    @classmethod
    def from_function(cls, func, grid: int = 512, extra_breaks: Sequence[float] = ()) -> PiecewiseConstant:
        """Sample ``func`` at cell midpoints of a uniform grid (plus extra breaks)."""
        bp = np.unique(np.concatenate([np.linspace(0, 1, grid + 1), np.asarray(extra_breaks, dtype=float)]))
        bp = bp[np.concatenate([[True], np.diff(bp) > 1e-12])]
        bp[-1] = 1.0
        mids = (bp[:-1] + bp[1:]) / 2
        return cls(bp, np.asarray(func(mids), dtype=float))

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        idx = np.searchsorted(self.breakpoints, u, side="right") - 1
        out = self.values[np.clip(idx, 0, self.values.size - 1)]
        return float(out) if out.ndim == 0 else out

    def _cells(self, a: float, b: float):
        """Widths and values of the cells refined to ``[a, b]``."""
        inner = self.breakpoints[(self.breakpoints > a) & (self.breakpoints < b)]
        pts = np.concatenate([[a], inner, [b]])
        widths = np.diff(pts)
        return widths, self((pts[:-1] + pts[1:]) / 2)

    def integrate(self, a: float = 0.0, b: float = 1.0) -> float:
        if b <= a:
            return 0.0
        widths, vals = self._cells(a, b)
        return float(np.dot(widths, vals))

    def measure_nonzero(self, a: float, b: float) -> float:
        """Lebesgue measure of ``{u in [a, b] : f(u) != 0}``."""
        if b <= a:
            return 0.0
        widths, vals = self._cells(a, b)
        return float(widths[vals != 0].sum())

    def value_distribution(self, a: float = 0.0, b: float = 1.0) -> StepDistribution:
        """Distribution of ``f(U)`` for ``U`` uniform on ``[a, b]``."""
        if not b > a:
            raise DomainError("value_distribution needs a < b")
        widths, vals = self._cells(a, b)
        return build_step_distribution(vals, widths)

    def cumulative(self, origin: float = 0.0, value: float = 0.0) -> PiecewiseLinear:
        """Antiderivative ``value + integral_origin^p f`` as a function of ``p``."""
        knots = np.union1d(self.breakpoints, [origin])
        knots = knots[np.concatenate([[True], np.diff(knots) > 0])]
        prim = np.concatenate([[0.0], np.cumsum(self.widths * self.values)])
        at_knots = np.interp(knots, self.breakpoints, prim)
        return PiecewiseLinear(knots, value + at_knots - np.interp(origin, self.breakpoints, prim))

    def is_monotone(self, tol: float = 0.0) -> bool:
        steps = np.diff(self.values)
        return bool(np.all(steps >= -tol) or np.all(steps <= tol))


def rearrange_on_interval(f: PiecewiseConstant, interval: tuple[float, float], direction: str = "increasing") -> PiecewiseConstant:
    """Sort the values of ``f`` on ``interval`` while keeping it intact outside.

    The multiset of (value, width) cells inside the interval is preserved;
    ties keep their original order.
    """
    a, b = map(float, interval)
    if not 0 <= a < b <= 1:
        raise DomainError("rearrangement interval must satisfy 0 <= a < b <= 1")
    if direction not in ("increasing", "decreasing"):
        raise DomainError(f"unknown direction {direction!r}")
    widths, vals = f._cells(a, b)
    steps = np.diff(vals)
    if (direction == "increasing" and np.all(steps >= 0)) or (direction == "decreasing" and np.all(steps <= 0)):
        return f
    key = vals if direction == "increasing" else -vals
    order = np.argsort(key, kind="stable")
    inner_bp = a + np.cumsum(widths[order])
    inner_bp[-1] = b

    bp = f.breakpoints
    left_bp = bp[bp < a]
    right_bp = bp[bp > b]
    left_vals = f.values[: left_bp.size]
    right_vals = f.values[f.values.size - right_bp.size:]
    new_bp = np.concatenate([left_bp, [a] if a > 0 or left_bp.size == 0 else [], inner_bp, right_bp])
    new_bp = np.concatenate([[0.0], new_bp[new_bp > 0]]) if new_bp[0] != 0 else new_bp
    new_vals = np.concatenate([left_vals, vals[order], right_vals])
    keep = np.diff(new_bp) > 0
    return PiecewiseConstant(np.concatenate([new_bp[:1], new_bp[1:][keep]]), new_vals[keep])


# --------------------------------------------------------------------------
# Quantile-function arithmetic
# --------------------------------------------------------------------------


def integrated_quantile(dist: StepDistribution) -> PiecewiseLinear:
    """``I(q) = integral_0^q Q(s) ds``; convex with knots at the cumulative masses."""
    knots = np.concatenate([[0.0], dist.cum])
    values = np.concatenate([[0.0], np.cumsum(dist.support * dist.masses)])
    return PiecewiseLinear(knots, values)


def merge_levels(*level_sets: np.ndarray) -> np.ndarray:
    """Common refinement of partitions of [0, 1], merging near-equal levels."""
    lv = np.concatenate([[0.0, 1.0], *[np.asarray(x, dtype=float) for x in level_sets]])
    lv = np.sort(np.clip(lv, 0.0, 1.0))
    lv = lv[np.concatenate([[True], np.diff(lv) > LEVEL_TOL])]
    lv[-1] = 1.0
    return lv


def _block_values(dist: StepDistribution, levels: np.ndarray) -> np.ndarray:
    """Value of ``Q_dist`` on each cell of ``levels`` (a refinement of its partition)."""
    inner = dist.cum[:-1]
    pos = np.clip(np.searchsorted(levels, inner), 1, levels.size - 1)
    nearer_left = np.abs(levels[pos - 1] - inner) <= np.abs(levels[pos] - inner)
    snapped = levels[np.where(nearer_left, pos - 1, pos)]
    idx = np.searchsorted(snapped, levels[:-1], side="right")
    return dist.support[idx]


def comonotone_blocks(*dists: StepDistribution) -> tuple[np.ndarray, list[np.ndarray]]:
    """Widths and per-distribution values of ``Q_k(V)`` on a common partition."""
    levels = merge_levels(*[d.cum for d in dists])
    return np.diff(levels), [_block_values(d, levels) for d in dists]


def quantile_product_mean(a: StepDistribution, b: StepDistribution, antitone: bool = False) -> float:
    """``E[Q_a(V) Q_b(V)]``, or ``E[Q_a(V) Q_b(1 - V)]`` when ``antitone``."""
    if antitone:
        return -quantile_product_mean(a, b.negate())
    widths, (qa, qb) = comonotone_blocks(a, b)
    return float(np.sum(widths * qa * qb))


# --------------------------------------------------------------------------
# Orders and summaries
# --------------------------------------------------------------------------


def stochastic_order(a: StepDistribution, b: StepDistribution, order: str, tol: float = 1e-12) -> bool:
    """Whether ``a`` dominates ``b`` in the given order.

    ``fsd``
        ``F_a <= F_b`` everywhere.
    ``ssd``
        ``I_a >= I_b`` on [0, 1]; checking the union of knots is enough
        because both IQFs are piecewise linear.
    ``convex``
        ``a`` is smaller than ``b`` in the convex order (``a`` is a mean
        preserving contraction of ``b``): equal means and ``a`` ssd ``b``.
    """
    if order == "fsd":
        pts = np.union1d(a.support, b.support)
        return bool(np.all(a.cdf(pts) <= b.cdf(pts) + tol))
    if order == "ssd":
        ia, ib = a.iqf(), b.iqf()
        pts = np.union1d(ia.knots, ib.knots)
        return bool(np.all(ia(pts) >= ib(pts) - tol))
    if order == "convex":
        if abs(a.mean - b.mean) > 1e-10:
            return False
        return stochastic_order(a, b, "ssd", tol)
    raise DomainError(f"unknown order {order!r}")


class GiniStatistics(NamedTuple):
    gamma_mean_difference: float
    gini_index: float | None


def gini_statistics(dist: StepDistribution) -> GiniStatistics:
    """Gini mean difference ``2 * int_0^1 [q E[X] - I(q)] dq`` and the Gini index.

    The index is ``None`` when the mean is (numerically) zero.
    """
    iqf = dist.iqf()
    area = float(np.sum(np.diff(iqf.knots) * (iqf.values[:-1] + iqf.values[1:]) / 2))
    mean = dist.mean
    gamma = mean - 2.0 * area
    index = gamma / mean if abs(mean) > 1e-12 else None
    return GiniStatistics(gamma, index)


def mixture(dists: Sequence[StepDistribution], weights: Sequence[float]) -> StepDistribution:
    """Distribution whose CDF is the weighted average of the component CDFs."""
    weights = np.asarray(weights, dtype=float)
    if len(dists) != weights.size or len(dists) == 0:
        raise ConstructionError("need one weight per component")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > MASS_TOL:
        raise ConstructionError("mixture weights must be nonnegative and sum to 1")
    if np.count_nonzero(weights) == 1:
        return dists[int(np.flatnonzero(weights)[0])]
    values = np.concatenate([d.support for d in dists])
    masses = np.concatenate([w * d.masses for d, w in zip(dists, weights)])
    return build_step_distribution(values, masses)
