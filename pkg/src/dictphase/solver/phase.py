"""Phaseless l1-analysis recovery by sign alternation.

The feasible set of ``|| |Ax| - b || <= eps`` is the union over sign
patterns ``s`` of the convex sets ``||Ax - s*b|| <= eps``.  From a start
pattern the solver alternates an inner convex solve with the sign update
``s <- sign(Ax)``.  Each inner solution stays feasible for the next pattern,
so the objective never increases along a run.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .. import _linalg
from .._rng import make_rng
from ..frames import Frame
from ..measure import PhaselessObservation, as_matrix
from ..errors import ShapeError
from .admm import (RecoveryResult, SolverConfig, _Problem, _objective, _real_tight_frame,
                   _reduce, _solve)


def sign_pattern(v):
    """``sign`` with ``sign(0) = +1``."""
    return np.where(np.asarray(v) >= 0, 1.0, -1.0)


def distance_mod_sign(x, y) -> float:
    """``min(||x - y||, ||x + y||)``."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ShapeError(f"shapes differ: {x.shape} vs {y.shape}")
    return float(min(np.linalg.norm(x - y), np.linalg.norm(x + y)))


# -- start generators --------------------------------------------------------

def _random_ls_starts(A, b, cfg):
    out = []
    for r in range(cfg.restarts):
        rng = make_rng(cfg.seed ^ r)
        s = rng.choice([-1.0, 1.0], size=b.size)
        x_ls, *_ = np.linalg.lstsq(A, s * b, rcond=None)
        out.append(("random-ls", sign_pattern(A @ x_ls)))
    return out


def _spectral_start(A, b):
    m = A.shape[0]
    Y = (A.T * (b ** 2)) @ A / m
    _, V = np.linalg.eigh(Y)
    return [("spectral", sign_pattern(A @ V[:, -1]))]


def _sym_features(C):
    """Row features ``c_j^T W c_j`` as linear maps of the upper triangle of W."""
    q = C.shape[-1]
    iu, ju = np.triu_indices(q)
    F = C[..., iu] * C[..., ju]
    F[..., iu != ju] *= 2.0
    return F, iu, ju


def lift_candidates(A, b, D, order: int, budget: int, keep: int):
    """Rank-one lifted fits over all frame supports of size ``<= order``.

    On a support ``S`` the magnitudes satisfy ``b_j^2 = c_j^T W c_j`` with
    ``c_j = (A D_S)^T e_j`` and ``W = w w^T``; ``W`` is fitted by least
    squares and its leading eigenpair gives the candidate ``x = D_S w``.
    Returns up to ``keep`` candidates with the smallest magnitude residual.
    """
    cands = []
    b2 = b ** 2
    spent = 0
    for q in range(1, order + 1):
        total = _linalg.count_supports(D.shape[1], q)
        if spent + total > budget:
            break
        spent += total
        S = _linalg.support_array(D.shape[1], q)
        DS = np.moveaxis(D[:, S], 1, 0)                 # (C, n, q)
        C = np.einsum("mn,cnq->cmq", A, DS)             # (C, m, q)
        F, iu, ju = _sym_features(C)                    # (C, m, p)
        sol = np.linalg.pinv(F, rcond=1e-12) @ b2       # (C, p)
        W = np.zeros((S.shape[0], q, q))
        W[:, iu, ju] = sol
        W[:, ju, iu] = sol
        lam, V = np.linalg.eigh(W)
        w = V[:, :, -1] * np.sqrt(np.maximum(lam[:, -1], 0.0))[:, None]
        X = np.einsum("cnq,cq->cn", DS, w)
        res = np.linalg.norm(np.abs(X @ A.T) - b[None, :], axis=1)
        for i in np.argsort(res, kind="stable")[:keep]:
            cands.append((float(res[i]), X[i]))
    cands.sort(key=lambda t: t[0])
    return [x for _, x in cands[:keep]]


def _lift_starts(A, b, D, cfg):
    xs = lift_candidates(A, b, D, cfg.lift_order, cfg.lift_budget, cfg.lift_candidates)
    return [("support-lift", sign_pattern(A @ x)) for x in xs]


def _starts(A, b, D, cfg):
    out = []
    for name in cfg.init_strategies:
        if name == "random-ls":
            out += _random_ls_starts(A, b, cfg)
        elif name == "support-lift":
            out += _lift_starts(A, b, D, cfg)
        elif name == "spectral":
            out += _spectral_start(A, b)
    return out


# -- main solver ---------------------------------------------------------------

class _InnerCache:
    """Inner solves memoized by sign pattern, since restarts often collide."""

    def __init__(self, prob, b, eps):
        self.prob, self.b, self.eps = prob, b, eps
        self.store = {}
        self.iters = 0
        self.warm = None

    def __call__(self, s):
        key = s.tobytes()
        hit = self.store.get(key)
        if hit is not None:
            return hit
        yp, eps_eff, r = _reduce(self.prob, s * self.b, self.eps)
        # inconsistent patterns fall back to the nearest consistent data
        x, info, self.warm = _solve(self.prob, yp, eps_eff, self.warm)
        self.iters += info["iters"]
        out = (x, info)
        self.store[key] = out
        return out


def _run_from(s, inner, A, b, cfg):
    seen = set()
    x = info = None
    outer = 0
    for outer in range(1, cfg.max_outer_iters + 1):
        seen.add(s.tobytes())
        x, info = inner(s)
        s_new = sign_pattern(A @ x)
        if np.array_equal(s_new, s) or s_new.tobytes() in seen:
            break
        s = s_new
    return x, info, outer


def _flip_search(best, inner, A, b, cfg, prob, tol):
    """Greedy one-row sign flips around ``best``, restarted on every strict improvement."""
    label, x, info, outer, res, obj = best
    flips = 0
    for _ in range(cfg.max_outer_iters):
        improved = False
        for j in np.argsort(np.abs(A @ x), kind="stable")[: cfg.flip_search]:
            s = sign_pattern(A @ x)
            s[j] = -s[j]
            x2, info2, outer2 = _run_from(s, inner, A, b, cfg)
            res2 = float(np.linalg.norm(np.abs(A @ x2) - b))
            obj2 = _objective(prob, x2)
            if res2 <= tol and obj2 < obj - 1e-12 * max(1.0, obj):
                x, info, outer, res, obj = x2, info2, outer + outer2, res2, obj2
                flips += 1
                improved = True
                break
        if not improved:
            break
    return (label, x, info, outer, res, obj), flips


def pr_l1_analysis(A, obs, frame: Frame, cfg: Optional[SolverConfig] = None) -> RecoveryResult:
    """Minimize ``||D^T x||_1`` subject to ``|| |A x| - b ||_2 <= eps``.

    Parameters
    ----------
    A : array_like or MeasurementEnsemble, shape (m, n)
    obs : PhaselessObservation or array_like
        Magnitudes ``b`` and budget ``eps`` (a bare array means ``eps = 0``).
    frame : Frame
        Real tight frame.
    cfg : SolverConfig, optional

    Returns
    -------
    RecoveryResult
        Lowest-objective feasible run over all starts; if none is feasible,
        the lowest-residual run with ``converged=False``.
    """
    cfg = cfg or SolverConfig()
    if not isinstance(obs, PhaselessObservation):
        obs = PhaselessObservation(np.asarray(obs, dtype=float), 0.0)
    b, eps = np.asarray(obs.b, dtype=float), float(obs.eps)
    D = _real_tight_frame(frame)
    M = as_matrix(A).astype(float)
    if M.shape[0] != b.size:
        raise ShapeError(f"b has length {b.size}, expected {M.shape[0]}")
    prob = _Problem(M, D, cfg)
    if not np.any(b):
        x = np.zeros(prob.n)
        return RecoveryResult(x, 0.0, 0.0, 0, 0, True, 0.0, "zero-data")

    inner = _InnerCache(prob, b, eps)
    runs = []
    for label, s0 in _starts(M, b, D, cfg):
        x, info, outer = _run_from(s0, inner, M, b, cfg)
        res = float(np.linalg.norm(np.abs(M @ x) - b))
        runs.append((label, x, info, outer, res, _objective(prob, x)))

    tol = eps + cfg.feasibility_tol
    feas = [r for r in runs if r[4] <= tol]
    flips = 0
    if feas:
        best = min(feas, key=lambda r: r[5])
        if cfg.flip_search:
            best, flips = _flip_search(best, inner, M, b, cfg, prob, tol)
        converged = bool(best[2]["converged"])
        status = "feasible" if converged else "feasible-inner-unconverged"
    else:
        best = min(runs, key=lambda r: r[4])
        converged = False
        status = "infeasible"
    label, x, info, outer, res, obj = best
    return RecoveryResult(
        estimate=x, objective=obj, residual=res,
        inner_iters=inner.iters, outer_iters=outer, converged=converged,
        kkt_residual=float(info["kkt"]), status=status,
        extras={"start": label, "starts": len(runs), "patterns_solved": len(inner.store),
                "feasible_runs": len(feas), "flips": flips},
    )
