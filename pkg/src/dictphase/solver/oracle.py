"""Exact reference solvers for desk-scale instances.

``oracle_sign_enumeration`` walks every sign pattern modulo the global flip
and solves each equality-constrained l1-analysis LP exactly by vertex
enumeration, vectorized across patterns.  ``oracle_branch_and_bound``
handles larger ``m`` and ``eps > 0`` by branching on row signs; rows whose
sign is still free are relaxed to their convex hull.
"""
from __future__ import annotations

import heapq
import itertools

import clarabel
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .. import _linalg
from ..errors import BudgetExceeded, ShapeError
from ..frames import Frame
from ..measure import as_matrix
from .admm import RecoveryResult

ORACLE_MAX_M = 16
VERTEX_BUDGET = 50_000_000


def _real_frame(frame):
    if frame.is_complex:
        raise ValueError("oracle requires a real frame")
    return frame.matrix


def _setup(A, b, frame):
    D = _real_frame(frame)
    M = as_matrix(A).astype(float)
    b = np.asarray(b, dtype=float).ravel()
    if b.size != M.shape[0]:
        raise ShapeError(f"b has length {b.size}, expected {M.shape[0]}")
    if M.shape[1] != D.shape[0]:
        raise ShapeError(f"A has {M.shape[1]} columns but frame has n={D.shape[0]}")
    if np.any(b < 0):
        raise ValueError("magnitudes must be nonnegative")
    return M, b, D


def _dedupe_mod_sign(xs, scale):
    out = []
    for x in xs:
        if all(min(np.linalg.norm(x - y), np.linalg.norm(x + y)) > 1e-8 * scale for y in out):
            out.append(x)
    return out


def oracle_sign_enumeration(A, b, frame: Frame, max_m: int = ORACLE_MAX_M,
                            tie_rtol: float = 1e-9) -> RecoveryResult:
    """Global minimizer of the noiseless phaseless l1-analysis program.

    Every pattern ``s`` with ``s_0 = +1`` is tested for consistency
    (``s*b`` in range(A)).  On each consistent pattern the LP
    ``min ||D^T x||_1, A x = s*b`` is solved exactly: with ``x = x_p + Q c``
    over a null basis ``Q`` of dimension ``d``, the piecewise-linear
    objective attains its minimum where ``d`` independent rows of ``D^T Q``
    vanish, so all such vertices are evaluated.

    ``extras["minimizers"]`` lists every global minimizer modulo sign
    within ``tie_rtol``.

    Raises
    ------
    BudgetExceeded
        If ``m > max_m`` or the vertex count is too large.
    """
    M, b, D = _setup(A, b, frame)
    m, n = M.shape
    N = D.shape[1]
    if m > max_m:
        raise BudgetExceeded("oracle_sign_enumeration patterns", 2 ** (m - 1), 2 ** (max_m - 1))
    if not np.any(b):
        x = np.zeros(n)
        return RecoveryResult(x, 0.0, 0.0, 0, 0, True, 0.0, "optimal",
                              {"minimizers": [x], "unique": True, "patterns": 1,
                               "feasible_patterns": 1})

    P = 2 ** (m - 1)
    bits = ((np.arange(P)[:, None] >> np.arange(m - 1)[None, :]) & 1).astype(float)
    S = np.hstack([np.ones((P, 1)), 1.0 - 2.0 * bits])
    Y = S * b[None, :]

    Ap = np.linalg.pinv(M, rcond=_linalg.RANK_RTOL)
    Xp = Y @ Ap.T
    scale = max(1.0, float(np.linalg.norm(b)))
    consistent = np.linalg.norm(Xp @ M.T - Y, axis=1) <= 1e-9 * scale
    Xp = Xp[consistent]
    Sc = S[consistent]
    Q = _linalg.null_space(M)
    d = Q.shape[1]
    G = D.T @ Q                                           # (N, d)
    Zp = Xp @ D                                           # (F, N)
    if Xp.shape[0] * _linalg.count_supports(N, d) > VERTEX_BUDGET:
        raise BudgetExceeded("oracle vertices", Xp.shape[0] * _linalg.count_supports(N, d),
                             VERTEX_BUDGET)

    cand_x, cand_obj, cand_pat = [], [], []
    if d == 0:
        cand_x.append(Xp)
        cand_obj.append(np.abs(Zp).sum(axis=1))
        cand_pat.append(np.arange(Xp.shape[0]))
    else:
        for I in itertools.combinations(range(N), d):
            GI = G[list(I)]
            sv = np.linalg.svd(GI, compute_uv=False)
            if sv[-1] <= 1e-10 * sv[0]:
                continue
            C = -np.linalg.solve(GI, Zp[:, list(I)].T)    # (d, F)
            X = Xp + (Q @ C).T
            cand_x.append(X)
            cand_obj.append(np.abs(X @ D).sum(axis=1))
            cand_pat.append(np.arange(Xp.shape[0]))
    X = np.vstack(cand_x)
    obj = np.concatenate(cand_obj)
    pat = np.concatenate(cand_pat)
    i = int(np.argmin(obj))
    best = float(obj[i])
    near = np.flatnonzero(obj <= best + tie_rtol * max(1.0, best))
    mins = _dedupe_mod_sign([X[j] for j in near], max(1.0, float(np.linalg.norm(X[i]))))
    x = X[i]
    res = float(np.linalg.norm(np.abs(M @ x) - b))
    return RecoveryResult(
        estimate=x, objective=best, residual=res, converged=True, status="optimal",
        kkt_residual=0.0,
        extras={"minimizers": mins, "unique": len(mins) == 1, "patterns": P,
                "feasible_patterns": int(consistent.sum()), "sign_pattern": Sc[pat[i]]},
    )


# -- branch and bound ------------------------------------------------------

class _NodeLP:
    """Equality/box relaxation for ``eps = 0`` via HiGHS."""

    def __init__(self, M, b, D):
        self.M, self.b, self.D = M, b, D
        m, n = M.shape
        N = D.shape[1]
        self.n, self.N = n, N
        self.c = np.concatenate([np.zeros(n), np.ones(N)])
        I = np.eye(N)
        self.A_frame = np.vstack([np.hstack([D.T, -I]), np.hstack([-D.T, -I])])
        self.bounds = [(None, None)] * n + [(0, None)] * N

    def solve(self, signs):
        M, b, n, N = self.M, self.b, self.n, self.N
        fixed = signs != 0
        free = ~fixed
        Mf = np.hstack([M[free], np.zeros((int(free.sum()), N))])
        A_ub = np.vstack([self.A_frame, Mf, -Mf])
        b_ub = np.concatenate([np.zeros(2 * N), b[free], b[free]])
        A_eq = np.hstack([M[fixed], np.zeros((int(fixed.sum()), N))]) if fixed.any() else None
        b_eq = (signs[fixed] * b[fixed]) if fixed.any() else None
        r = linprog(self.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                    bounds=self.bounds, method="highs")
        if r.status != 0:
            return None
        return float(r.fun), r.x[:n]


class _NodeSOCP:
    """Ball relaxation for ``eps > 0`` via Clarabel.

    Variables ``(x, t, r)``: ``|D^T x| <= t``, ``r >= A x - p``,
    ``r >= -A x - q``, ``r >= 0``, ``||r|| <= eps``.  Fixed ``+`` rows use
    ``(p, q) = (b, -b)``, fixed ``-`` rows ``(-b, b)``, free rows ``(b, b)``.
    """

    def __init__(self, M, b, D, eps):
        self.M, self.b, self.D, self.eps = M, b, D, eps
        m, n = M.shape
        N = D.shape[1]
        self.n, self.N, self.m = n, N, m
        Z = np.zeros
        In, Im = np.eye(N), np.eye(m)
        rows = [
            np.hstack([D.T, -In, Z((N, m))]),
            np.hstack([-D.T, -In, Z((N, m))]),
            np.hstack([M, Z((m, N)), -Im]),
            np.hstack([-M, Z((m, N)), -Im]),
            np.hstack([Z((m, n)), Z((m, N)), -Im]),
            Z((1, n + N + m)),
            np.hstack([Z((m, n)), Z((m, N)), -Im]),
        ]
        self.A = sp.csc_matrix(np.vstack(rows))
        self.P = sp.csc_matrix((n + N + m, n + N + m))
        self.q = np.concatenate([np.zeros(n), np.ones(N), np.zeros(m)])
        self.cones = [clarabel.NonnegativeConeT(2 * N + 3 * m), clarabel.SecondOrderConeT(1 + m)]
        st = clarabel.DefaultSettings()
        st.verbose = False
        st.tol_gap_abs = st.tol_gap_rel = 1e-10
        st.tol_feas = 1e-10
        self.settings = st

    def solve(self, signs):
        b, N, m = self.b, self.N, self.m
        p = np.where(signs < 0, -b, b)
        q = np.where(signs > 0, -b, b)
        rhs = np.concatenate([np.zeros(2 * N), p, q, np.zeros(m), [self.eps], np.zeros(m)])
        sol = clarabel.DefaultSolver(self.P, self.q, self.A, rhs, self.cones,
                                     self.settings).solve()
        if str(sol.status) not in ("Solved", "AlmostSolved"):
            return None
        x = np.asarray(sol.x)
        return float(np.sum(np.abs(self.D.T @ x[: self.n]))), x[: self.n]


def oracle_branch_and_bound(A, b, frame: Frame, eps: float = 0.0, incumbent=None,
                            node_budget: int = 20000, rtol: float = 1e-7) -> RecoveryResult:
    """Certified global minimum by branching on measurement signs.

    ``incumbent`` (a feasible estimate, e.g. a solver output) seeds the
    upper bound.  ``extras["certified"]`` is True when every open node was
    pruned within ``node_budget``; ``extras["lower_bound"]`` is the proven
    lower bound on the global optimum either way.
    """
    M, b, D = _setup(A, b, frame)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    m, n = M.shape
    scale = max(1.0, float(np.linalg.norm(b)))
    feas_tol = 1e-7 * scale
    if float(np.linalg.norm(b)) <= eps:
        x = np.zeros(n)
        return RecoveryResult(x, 0.0, float(np.linalg.norm(b)), 0, 0, True, 0.0, "optimal",
                              {"certified": True, "lower_bound": 0.0, "nodes": 0})
    node = _NodeLP(M, b, D) if eps == 0 else _NodeSOCP(M, b, D, eps)

    def feasible(x):
        return float(np.linalg.norm(np.abs(M @ x) - b)) <= eps + feas_tol

    best_x, best_f = None, np.inf
    if incumbent is not None:
        xi = np.asarray(incumbent, dtype=float)
        if feasible(xi):
            best_x, best_f = xi, float(np.sum(np.abs(D.T @ xi)))

    def gap(f):
        # no incumbent yet: inf - inf would be nan and prune everything
        return rtol * max(1.0, abs(f)) if np.isfinite(f) else 0.0

    root = np.zeros(m)
    root[int(np.argmax(b))] = 1.0
    heap, counter, nodes = [], itertools.count(), 0
    out = node.solve(root)
    nodes += 1
    if out is not None:
        heapq.heappush(heap, (out[0], next(counter), root, out[1]))
    while heap and nodes < node_budget:
        bound, _, signs, x = heapq.heappop(heap)
        if bound >= best_f - gap(best_f):
            heap.clear()
            break
        if feasible(x):
            if bound < best_f:
                best_x, best_f = x, bound
            continue
        free = np.flatnonzero(signs == 0)
        if free.size == 0:
            # exact relaxation up to solver tolerance
            if bound < best_f:
                best_x, best_f = x, bound
            continue
        j = free[int(np.argmax(b[free] - np.abs(M[free] @ x)))]
        for sj in (1.0, -1.0):
            child = signs.copy()
            child[j] = sj
            out = node.solve(child)
            nodes += 1
            if out is not None and out[0] < best_f - gap(best_f):
                heapq.heappush(heap, (out[0], next(counter), child, out[1]))
    open_bounds = [h[0] for h in heap if h[0] < best_f - gap(best_f)]
    certified = not open_bounds
    lower = min([best_f] + open_bounds)
    if best_x is None:
        return RecoveryResult(np.zeros(n), np.inf, np.inf, 0, 0, False, float("nan"),
                              "no-incumbent", {"certified": False, "lower_bound": lower,
                                               "nodes": nodes})
    res = float(np.linalg.norm(np.abs(M @ best_x) - b))
    return RecoveryResult(
        estimate=best_x, objective=best_f, residual=res, converged=certified,
        status="optimal" if certified else "node-budget",
        extras={"certified": certified, "lower_bound": float(lower), "nodes": nodes},
    )
