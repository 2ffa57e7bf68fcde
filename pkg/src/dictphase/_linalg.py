"""Small dense linear-algebra helpers used across modules."""
from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import BudgetExceeded

#: Relative singular-value threshold for numerical rank decisions.
RANK_RTOL = 1e-10


def null_space(M, rtol=RANK_RTOL):
    """Orthonormal basis (columns) of the null space of ``M``.

    A matrix with zero rows has the whole ambient space as null space.
    Rank is decided against ``rtol`` times the largest singular value.
    """
    M = np.atleast_2d(np.asarray(M))
    n = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(n, dtype=M.dtype)
    _, s, vh = np.linalg.svd(M, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(n, dtype=M.dtype)
    rank = int(np.sum(s > rtol * s[0]))
    return vh[rank:].conj().T


def range_basis(M, rtol=RANK_RTOL):
    """Orthonormal basis (columns) of the column space of ``M``."""
    M = np.atleast_2d(np.asarray(M))
    if M.shape[1] == 0:
        return np.zeros((M.shape[0], 0), dtype=M.dtype)
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((M.shape[0], 0), dtype=M.dtype)
    rank = int(np.sum(s > rtol * s[0]))
    return u[:, :rank]


def count_supports(N, q):
    return math.comb(N, q)


def check_budget(what, needed, budget):
    if budget is not None and needed > budget:
        raise BudgetExceeded(what, needed, budget)


def iter_supports(N, q):
    """Supports of size ``q`` in lexicographic order (lower indices first)."""
    return itertools.combinations(range(N), q)


def support_array(N, q):
    """All size-``q`` supports as an int array of shape (C(N, q), q)."""
    if q == 0:
        return np.zeros((1, 0), dtype=int)
    return np.array(list(iter_supports(N, q)), dtype=int).reshape(-1, q)


def batched_range_bases(blocks, rtol=RANK_RTOL):
    """Orthonormal range bases for a stack of (n, q) blocks.

    Returns a list, since rank may differ between blocks.
    """
    u, s, _ = np.linalg.svd(blocks, full_matrices=False)
    out = []
    for ui, si in zip(u, s):
        if si.size == 0 or si[0] == 0.0:
            out.append(ui[:, :0])
            continue
        r = int(np.sum(si > rtol * si[0]))
        out.append(ui[:, :r])
    return out
