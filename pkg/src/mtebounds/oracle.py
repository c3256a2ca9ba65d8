"""Brute-force checks on small instances with equal-mass blocks.

With ``n`` blocks of mass ``1/n`` every coupling of the two marginals is a
mixture of permutations, so extreme weighted effects can be found by
enumerating permutations. These routines share nothing with the closed-form
code they are used to check.
"""

from __future__ import annotations

import itertools

import numpy as np

from .bounds import ExtendedInterval
from .errors import DomainError

MAX_BLOCKS = 5


def _permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=int).reshape(-1, n)


def permutation_wte_oracle(y0_blocks, y1_blocks, w_blocks) -> ExtendedInterval:
    """Min and max of ``(1/n) sum_i w[tau(i)] (y1[sigma(i)] - y0[i])`` over permutations."""
    y0 = np.asarray(y0_blocks, dtype=float)
    y1 = np.asarray(y1_blocks, dtype=float)
    w = np.asarray(w_blocks, dtype=float)
    n = y0.size
    if not (y1.size == n and w.size == n) or n == 0:
        raise DomainError("blocks must be non-empty and of equal length")
    if n > MAX_BLOCKS:
        raise DomainError(f"at most {MAX_BLOCKS} blocks are supported")
    perms = _permutations(n)
    effects = y1[perms] - y0
    weights = w[perms]
    values = effects @ weights.T / n
    return ExtendedInterval(float(values.min()), float(values.max()))


def majorization_membership_oracle(m_blocks, delta_blocks, tol: float = 1e-12) -> bool:
    """Whether ``m`` is majorized by ``delta``: equal sums and larger ascending partial sums."""
    m = np.sort(np.asarray(m_blocks, dtype=float))
    delta = np.sort(np.asarray(delta_blocks, dtype=float))
    if m.size != delta.size:
        raise DomainError("block vectors must have equal length")
    scale = max(1.0, float(np.abs(m).max(initial=0)), float(np.abs(delta).max(initial=0))) * m.size
    if abs(m.sum() - delta.sum()) > tol * scale:
        return False
    return bool(np.all(np.cumsum(m) >= np.cumsum(delta) - tol * scale))
