"""Linear marginal outcome fit and the test of a linear MTE against the sharp set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import BoundsCurve, CurveSegment, Membership, as_inputs, complier_segment
from .dist import PiecewiseConstant
from .errors import DomainError
from .identification import IdentifiedModel

DEFAULT_GRID = 512


@dataclass(frozen=True, eq=False)
class LinearMTEFit:
    """``E[Y_d | U = u] = alpha_d + beta_d * u`` for both treatment states.

    ``m`` is the implied MTE on a fine grid; its cell values are the exact
    cell averages of the linear function.
    """

    m: PiecewiseConstant
    treated_line: tuple[float, float]
    untreated_line: tuple[float, float]

    @property
    def intercept(self) -> float:
        return self.treated_line[0] - self.untreated_line[0]

    @property
    def slope(self) -> float:
        return self.treated_line[1] - self.untreated_line[1]


def fit_linear_mte(model: IdentifiedModel, grid: int = DEFAULT_GRID) -> LinearMTEFit:
    """Fit each marginal outcome line to its two identified interval means.

    The treated line matches always-taker and complier means of ``Y1``; the
    untreated line matches complier and never-taker means of ``Y0``. A line's
    average over an interval equals its value at the midpoint.
    """
    y1a = model.marginal("Y1a")
    y0n = model.marginal("Y0n")
    p0, p1 = model.p0, model.p1
    beta1 = (model.mean_y1c - y1a.mean) / ((p0 + p1) / 2 - p0 / 2)
    alpha1 = y1a.mean - beta1 * p0 / 2
    beta0 = (y0n.mean - model.mean_y0c) / ((1 + p1) / 2 - (p0 + p1) / 2)
    alpha0 = model.mean_y0c - beta0 * (p0 + p1) / 2
    intercept, slope = alpha1 - alpha0, beta1 - beta0
    m = PiecewiseConstant.from_function(lambda u: intercept + slope * u, grid, extra_breaks=(p0, p1))
    return LinearMTEFit(m, (alpha1, beta1), (alpha0, beta0))


def linear_specification_test(model, linear_m: PiecewiseConstant, tol: float = 1e-9) -> Membership:
    """Whether a monotone MTE candidate is consistent with the base model.

    A monotone function is its own rearrangement, so it suffices that its
    integral anchored at ``ybar(p0)`` stays between ``psi_l`` and ``psi_h``
    on the complier interval.
    """
    if not linear_m.is_monotone():
        raise DomainError("the specification test needs a monotone candidate")
    inp = as_inputs(model)
    seg = complier_segment(inp, inp.delta)
    path = linear_m.cumulative(origin=inp.p0, value=inp.ybar_p0)
    pts = np.unique(np.concatenate([seg.lower.knots, seg.upper.knots, path.knots]))
    pts = pts[(pts >= inp.p0) & (pts <= inp.p1)]
    vals = path(pts)
    if np.any(vals < seg.lower(pts) - tol):
        return Membership(False, "integrated candidate falls below the lower envelope")
    if np.any(vals > seg.upper(pts) + tol):
        return Membership(False, "integrated candidate exceeds the upper envelope")
    return Membership(True)


def linear_curve(model: IdentifiedModel, fit: LinearMTEFit | None = None) -> BoundsCurve:
    """Counterfactual average implied by the linear fit, as a degenerate curve."""
    fit = fit_linear_mte(model) if fit is None else fit
    path = fit.m.cumulative(origin=model.p0, value=model.ybar_p0)
    return BoundsCurve((CurveSegment(0.0, 1.0, path, path),), "linear")
