"""Synthetic data generators shared by the test suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mtebounds.dist import PiecewiseConstant, StepDistribution, build_step_distribution
from mtebounds.identification import IdentifiedModel


def random_marginal(rng: np.random.Generator, max_atoms: int = 4, values=range(-3, 4)) -> StepDistribution:
    k = int(rng.integers(1, max_atoms + 1))
    support = rng.choice(np.asarray(list(values), dtype=float), size=k, replace=False)
    return build_step_distribution(support, rng.uniform(0.05, 1.0, size=k))


def bernoulli(p: float) -> StepDistribution:
    if p <= 0:
        return StepDistribution([0.0], [1.0])
    if p >= 1:
        return StepDistribution([1.0], [1.0])
    return StepDistribution([0.0, 1.0], [1 - p, p])


def coin_model(p0: float = 0.25, p1: float = 0.75) -> IdentifiedModel:
    """Every identified marginal is a fair coin."""
    c = bernoulli(0.5)
    return IdentifiedModel.from_groups(p0, p1, c if p0 > 0 else None, c if p1 < 1 else None, c, c)


def random_model(rng: np.random.Generator, allow_empty: bool = True, values=range(-3, 4), nested_support: bool = False) -> IdentifiedModel:
    """Random population model; off-complier marginals optionally live on the complier support."""
    p0, p1 = np.sort(rng.uniform(0, 1, size=2))
    if p1 - p0 < 0.05:
        p0, p1 = max(0.0, p0 - 0.05), min(1.0, p1 + 0.05)
    if allow_empty and rng.random() < 0.1:
        p0 = 0.0
    if allow_empty and rng.random() < 0.1:
        p1 = 1.0
    y0c = random_marginal(rng, values=values)
    y1c = random_marginal(rng, values=values)
    if nested_support:
        y1a = build_step_distribution(y1c.support, rng.uniform(0.05, 1, y1c.support.size)) if p0 > 0 else None
        y0n = build_step_distribution(y0c.support, rng.uniform(0.05, 1, y0c.support.size)) if p1 < 1 else None
    else:
        y1a = random_marginal(rng, values=values) if p0 > 0 else None
        y0n = random_marginal(rng, values=values) if p1 < 1 else None
    return IdentifiedModel.from_groups(p0, p1, y1a, y0n, y0c, y1c)


@dataclass
class UnitPopulation:
    """A finite population of units with latent ``u`` on a midpoint grid.

    Replicating every unit once in each instrument arm makes the instrument
    exactly independent of ``(U, Y0, Y1)`` in the sample, so the identified
    objects equal their population values.
    """

    y0: np.ndarray
    y1: np.ndarray

    @property
    def size(self) -> int:
        return self.y0.size

    @property
    def u(self) -> np.ndarray:
        return (np.arange(self.size) + 0.5) / self.size

    def records(self, p0: float, p1: float):
        """Arrays ``z, d, y`` with both arms holding every unit."""
        u = self.u
        d0 = (u <= p0).astype(int)
        d1 = (u <= p1).astype(int)
        z = np.concatenate([np.zeros(self.size, int), np.ones(self.size, int)])
        d = np.concatenate([d0, d1])
        y = np.concatenate([np.where(d0 == 1, self.y1, self.y0), np.where(d1 == 1, self.y1, self.y0)])
        return z, d, y

    def true_mte(self) -> PiecewiseConstant:
        return PiecewiseConstant(np.linspace(0, 1, self.size + 1), self.y1 - self.y0)

    def counterfactual_average(self, p) -> np.ndarray:
        """``int_0^p E[Y1|U=u] du + int_p^1 E[Y0|U=u] du``, exact for step conditional means."""
        m1 = PiecewiseConstant(np.linspace(0, 1, self.size + 1), self.y1).cumulative()
        m0 = PiecewiseConstant(np.linspace(0, 1, self.size + 1), self.y0).cumulative()
        p = np.asarray(p, dtype=float)
        return m1(p) + m0(1.0) - m0(p)

    def true_wte(self, w: PiecewiseConstant) -> float:
        mte = self.true_mte()
        bp = np.union1d(mte.breakpoints, w.breakpoints)
        mids = (bp[:-1] + bp[1:]) / 2
        return float(np.sum(np.diff(bp) * mte(mids) * w(mids)))


def heterogeneous_population(rng: np.random.Generator, size: int, levels: int = 6) -> UnitPopulation:
    """Discrete outcomes whose distribution shifts with ``u`` (selection on gains)."""
    u = (np.arange(size) + 0.5) / size
    a0, a1 = rng.uniform(-1, 1, size=2)
    b0, b1 = rng.uniform(-2, 2, size=2)
    y0 = np.clip(np.round(levels / 2 + a0 + b0 * u + rng.normal(0, 1.0, size)), 0, levels)
    y1 = np.clip(np.round(levels / 2 + a1 + b1 * u + rng.normal(0, 1.0, size)), 0, levels)
    return UnitPopulation(y0, y1)


def rank_invariant_population(rng: np.random.Generator, size: int, p0: float, p1: float, levels: int = 100) -> UnitPopulation:
    """``Y_d = h_d(V)`` with strictly increasing ``h_d`` and ``V`` depending on ``u``.

    Every level of ``V`` occurs among compliers, so complier quantile matching
    recovers ``h_1 o h_0^{-1}`` on the whole support.
    """
    u = (np.arange(size) + 0.5) / size
    tilt = rng.uniform(-3, 3)
    probs = np.exp(tilt * np.outer(u - 0.5, np.linspace(-1, 1, levels)))
    probs /= probs.sum(axis=1, keepdims=True)
    cum = probs.cumsum(axis=1)
    v = (rng.random(size)[:, None] > cum).sum(axis=1)
    v = np.minimum(v, levels - 1)
    compliers = np.flatnonzero((u > p0) & (u <= p1))
    v[compliers[:levels]] = np.arange(min(levels, compliers.size))
    grid = np.linspace(0, 1, levels)
    h0 = np.cumsum(rng.uniform(0.1, 1.0, levels)) + rng.uniform(-1, 1)
    h1 = np.cumsum(rng.uniform(0.1, 1.0, levels)) + 2 * grid + rng.uniform(-1, 1)
    return UnitPopulation(h0[v], h1[v])


def linear_population(size: int, alpha: tuple[float, float], beta: tuple[float, float], noise: float = 0.5) -> UnitPopulation:
    """``Y_d = alpha_d + beta_d u + e`` with the same alternating noise in both outcomes."""
    u = (np.arange(size) + 0.5) / size
    e = noise * np.where(np.arange(size) % 2 == 0, 1.0, -1.0)
    return UnitPopulation(alpha[0] + beta[0] * u + e, alpha[1] + beta[1] * u + e)


def sample_records(rng: np.random.Generator, n: int, p0: float, p1: float, marginals: dict):
    """Random sample with ``z`` independent of ``u`` and outcomes drawn from group marginals.

    ``marginals`` maps (d, group) to StepDistribution for ``(1,'a'), (0,'c'),
    (1,'c'), (0,'n')``.
    """
    z = rng.integers(0, 2, size=n)
    u = rng.random(n)
    group = np.where(u <= p0, "a", np.where(u <= p1, "c", "n"))
    d = (u <= np.where(z == 1, p1, p0)).astype(int)
    y = np.empty(n)
    for key, dist in marginals.items():
        dd, g = key
        sel = (d == dd) & (group == g)
        y[sel] = rng.choice(dist.support, size=int(sel.sum()), p=dist.masses)
    return z, d, y
