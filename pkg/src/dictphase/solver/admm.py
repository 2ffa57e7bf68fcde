"""Convex inner problem: l1-analysis basis pursuit over a tight frame.

Solves ``min ||D^T x||_1`` subject to ``||A x - y||_2 <= eps`` by ADMM on the
split ``z = D^T x``.  Because ``D D^T = I`` the x-update is a projection
(``eps = 0``) or a fixed ``(I + A^T A)`` solve (``eps > 0``), so nothing is
refactored inside the loop.

ADMM alone converges slowly to the 1e-9 tolerances used here, so every few
iterations the current zero pattern of ``z`` is handed to an active-set
polish which solves the restricted problem in closed form and certifies the
candidate through a bounded least-squares KKT test.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import lsq_linear

from .. import _linalg
from ..errors import InfeasibleError, ShapeError
from ..frames import Frame
from ..measure import as_matrix

_ZERO_RTOL = 1e-9


def soft_threshold(v, tau: float):
    """Entrywise ``sign(v) * max(|v| - tau, 0)``.

    >>> soft_threshold(np.array([3.0, -0.5]), 1.0)
    array([ 2., -0.])
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the inner ADMM and the outer sign alternation.

    ``init_strategies`` lists the start generators of the phaseless solver,
    in order: ``"random-ls"`` (``restarts`` random-sign least-squares fits),
    ``"support-lift"`` (rank-one lifts over frame supports up to
    ``lift_order`` atoms) and ``"spectral"``.  ``residual_target_slack`` is
    the relative undershoot below ``eps`` still reported as on-target for
    noisy inner solves.  ``flip_search`` rows with the smallest ``|a_j x|``
    are sign-flipped around the best run as a final local search (0 disables).
    """

    admm_step: float = 1.0
    primal_tol: float = 1e-9
    dual_tol: float = 1e-9
    max_inner_iters: int = 20000
    max_outer_iters: int = 50
    restarts: int = 16
    seed: int = 0
    residual_target_slack: float = 0.05
    feasibility_tol: float = 1e-7
    kkt_tol: float = 1e-8
    polish_every: int = 25
    init_strategies: tuple = ("random-ls", "support-lift", "spectral")
    lift_order: int = 2
    lift_budget: int = 20000
    lift_candidates: int = 4
    flip_search: int = 4

    def __post_init__(self):
        object.__setattr__(self, "init_strategies", tuple(self.init_strategies))
        for name in ("admm_step", "primal_tol", "dual_tol", "feasibility_tol", "kkt_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_inner_iters", "max_outer_iters", "restarts", "polish_every",
                     "lift_candidates"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 <= self.residual_target_slack < 1:
            raise ValueError("residual_target_slack must lie in [0, 1)")
        if self.lift_order < 0 or self.lift_budget < 0 or self.flip_search < 0:
            raise ValueError("lift_order, lift_budget and flip_search must be nonnegative")
        known = {"random-ls", "support-lift", "spectral"}
        bad = set(self.init_strategies) - known
        if bad or not self.init_strategies:
            raise ValueError(f"unknown or empty init strategies: {sorted(bad)}")

    def to_dict(self):
        d = asdict(self)
        d["init_strategies"] = list(self.init_strategies)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class RecoveryResult:
    """Solver output.

    ``residual`` is ``|| |A x| - b ||`` for phaseless solves and
    ``||A x - y||`` for the linear inner problem.  ``kkt_residual`` is the
    optimality certificate of the final linear solve (NaN when not checked).
    """

    estimate: np.ndarray
    objective: float
    residual: float
    inner_iters: int = 0
    outer_iters: int = 0
    converged: bool = False
    kkt_residual: float = float("nan")
    status: str = ""
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer, np.bool_)):
                return v.item()
            if isinstance(v, (list, tuple)):
                return [clean(a) for a in v]
            if isinstance(v, dict):
                return {k: clean(a) for k, a in v.items()}
            return v

        return json.dumps({
            "estimate": self.estimate.tolist(),
            "objective": float(self.objective),
            "residual": float(self.residual),
            "inner_iters": int(self.inner_iters),
            "outer_iters": int(self.outer_iters),
            "converged": bool(self.converged),
            "kkt_residual": float(self.kkt_residual),
            "status": self.status,
            "extras": clean(self.extras),
        })


def _real_tight_frame(frame: Frame):
    if frame.is_complex:
        raise ValueError("solver requires a real frame")
    if not frame.tight:
        raise ValueError("solver requires a tight frame (D D^T = I)")
    return frame.matrix


class _Problem:
    """Factorizations shared by every inner solve on one ``(A, D)`` pair."""

    def __init__(self, A, D, cfg: SolverConfig):
        self.A = np.asarray(A, dtype=float)
        self.D = np.asarray(D, dtype=float)
        self.Dt = self.D.T
        self.cfg = cfg
        m, n = self.A.shape
        if self.D.shape[0] != n:
            raise ShapeError(f"A has {n} columns but frame has n={self.D.shape[0]}")
        self.m, self.n, self.N = m, n, self.D.shape[1]
        self.Apinv = np.linalg.pinv(self.A, rcond=_linalg.RANK_RTOL) if m else np.zeros((n, 0))
        self.Q = _linalg.null_space(self.A)
        self.Pn = self.Q @ self.Q.T
        self.PnD = self.Pn @ self.D
        self.K = np.linalg.inv(np.eye(n) + self.A.T @ self.A)
        self.KD = self.K @ self.D
        self.KAt = self.K @ self.A.T

    def project(self, y):
        """Split ``y`` into its range(A) part and the orthogonal residual norm."""
        if self.m == 0:
            return y, 0.0
        yp = self.A @ (self.Apinv @ y)
        return yp, float(np.linalg.norm(y - yp))


def _kkt_residual(prob: _Problem, x, y, eps):
    """Distance from optimality of ``x`` for the convex inner problem.

    Seeks a subgradient ``g`` of ``||.||_1`` at ``D^T x`` with ``D g`` in the
    normal cone of the constraint set, by bounded least squares over the
    free subgradient entries (and the multiplier when ``eps > 0``).
    """
    z = prob.Dt @ x
    zmax = float(np.max(np.abs(z))) if z.size else 0.0
    on = np.abs(z) > _ZERO_RTOL * max(1.0, zmax)
    f = prob.D[:, on] @ np.sign(z[on])
    cols = [prob.D[:, ~on]]
    lb = [-np.ones(int((~on).sum()))]
    ub = [np.ones(int((~on).sum()))]
    if eps == 0:
        # normal cone of an affine set is range(A^T); eliminate it exactly
        f = prob.Q.T @ f
        cols = [prob.Q.T @ c for c in cols]
    else:
        r = prob.A @ x - y
        rn = float(np.linalg.norm(r))
        if rn >= eps * (1 - 1e-9):
            gdir = prob.A.T @ r
            gn = float(np.linalg.norm(gdir))
            if gn > 0:
                cols.append((gdir / gn)[:, None])
                lb.append(np.zeros(1))
                ub.append(np.full(1, np.inf))
    M = np.hstack(cols) if cols else np.zeros((f.size, 0))
    if f.size == 0:
        return 0.0
    if M.shape[1] == 0:
        return float(np.linalg.norm(f))
    sol = lsq_linear(M, -f, bounds=(np.concatenate(lb), np.concatenate(ub)),
                     method="bvls", tol=1e-12)
    return float(np.linalg.norm(M @ sol.x + f))


def _polish(prob: _Problem, y, eps, zero_mask, sign_hint):
    """Solve the problem restricted to ``(D^T x)_Z = 0`` with fixed signs elsewhere.

    Returns a candidate ``x`` or ``None`` when the face is empty or the
    linearized objective is unbounded on it.
    """
    P = _linalg.null_space(prob.Dt[zero_mask]) if zero_mask.any() else np.eye(prob.n)
    if P.shape[1] == 0:
        x = np.zeros(prob.n)
        return x if np.linalg.norm(y) <= eps + 1e-12 else None
    B = prob.A @ P
    c_ls, *_ = np.linalg.lstsq(B, y, rcond=None)
    r_ls = float(np.linalg.norm(B @ c_ls - y))
    scale = max(1.0, float(np.linalg.norm(y)))
    if eps == 0:
        if r_ls > 1e-10 * scale:
            return None
        return P @ c_ls
    if r_ls > eps:
        return None
    g = P.T @ (prob.D[:, ~zero_mask] @ sign_hint[~zero_mask])
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    rank = int(np.sum(s > _linalg.RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0
    Vr = Vt[:rank].T
    if np.linalg.norm(g - Vr @ (Vr.T @ g)) > 1e-10 * max(1.0, float(np.linalg.norm(g))):
        return None
    h = (Vr.T @ g) / s[:rank]
    hn = float(np.linalg.norm(h))
    rad = np.sqrt(max(eps * eps - r_ls * r_ls, 0.0))
    c = c_ls if hn == 0 else c_ls - Vr @ (rad * h / hn / s[:rank])
    return P @ c


def _objective(prob, x):
    return float(np.sum(np.abs(prob.Dt @ x)))


def _solve(prob: _Problem, y, eps, warm=None):
    """Inner solve on a consistent reduced instance.

    ``y`` must lie in range(A) and ``eps`` is the effective radius there.
    Returns ``(x, info, state)``; ``state`` warm-starts the next call.
    """
    cfg = prob.cfg
    ynorm = float(np.linalg.norm(y))
    if ynorm <= eps:
        x = np.zeros(prob.n)
        return x, {"iters": 0, "converged": True, "kkt": 0.0, "polished": False}, None
    if prob.Q.shape[1] == 0:
        # A injective: for eps = 0 the feasible point is unique
        if eps == 0:
            x = prob.Apinv @ y
            return x, {"iters": 0, "converged": True, "kkt": 0.0, "polished": False}, None

    rho = cfg.admm_step
    N, m = prob.N, prob.m
    if warm is not None and warm[0].shape == (N,) and (eps == 0) == (warm[2] is None):
        z, u = warm[0].copy(), warm[1].copy()
        w, v = (None, None) if warm[2] is None else (warm[2].copy(), warm[3].copy())
    else:
        z, u = np.zeros(N), np.zeros(N)
        w, v = (None, None) if eps == 0 else (y.copy(), np.zeros(m))
    if eps > 0 and w is None:
        w, v = y.copy(), np.zeros(m)

    xp = prob.Apinv @ y
    best_poly = None
    last_mask = None
    admm_conv = False
    it = 0
    x = xp.copy()
    for it in range(1, cfg.max_inner_iters + 1):
        if eps == 0:
            x = prob.PnD @ (z - u) + xp
            Dx = prob.Dt @ x
            z_old = z
            z = soft_threshold(Dx + u, 1.0 / rho)
            u = u + Dx - z
            r = np.linalg.norm(Dx - z)
            s = rho * np.linalg.norm(prob.PnD @ (z - z_old))
            pscale = max(1.0, np.linalg.norm(Dx), np.linalg.norm(z))
            dscale = max(1.0, rho * np.linalg.norm(prob.PnD @ u))
        else:
            x = prob.KD @ (z - u) + prob.KAt @ (w - v)
            Dx = prob.Dt @ x
            Ax = prob.A @ x
            z_old, w_old = z, w
            z = soft_threshold(Dx + u, 1.0 / rho)
            q = Ax + v - y
            qn = np.linalg.norm(q)
            w = y + (q if qn <= eps else q * (eps / qn))
            u = u + Dx - z
            v = v + Ax - w
            r = np.sqrt(np.linalg.norm(Dx - z) ** 2 + np.linalg.norm(Ax - w) ** 2)
            s = rho * np.linalg.norm(prob.D @ (z - z_old) + prob.A.T @ (w - w_old))
            pscale = max(1.0, np.linalg.norm(Dx), np.linalg.norm(z), np.linalg.norm(Ax))
            dscale = max(1.0, rho * np.linalg.norm(prob.D @ u + prob.A.T @ v))
        admm_conv = r <= cfg.primal_tol * pscale and s <= cfg.dual_tol * dscale
        if admm_conv or it % cfg.polish_every == 0:
            mask = z == 0
            if last_mask is None or not np.array_equal(mask, last_mask) or admm_conv:
                last_mask = mask
                cand = _polish(prob, y, eps, mask, np.sign(z))
                if cand is not None:
                    kkt = _kkt_residual(prob, cand, y, eps)
                    if kkt <= cfg.kkt_tol:
                        best_poly = (cand, kkt)
                        break
        if admm_conv:
            break

    state = (z, u, w, v)
    if best_poly is not None:
        x, kkt = best_poly
        return x, {"iters": it, "converged": True, "kkt": kkt, "polished": True}, state
    if eps == 0:
        x = prob.Pn @ x + xp  # exact feasibility of the returned iterate
    kkt = _kkt_residual(prob, x, y, eps)
    return x, {"iters": it, "converged": bool(admm_conv), "kkt": kkt, "polished": False}, state


def _reduce(prob: _Problem, y, eps):
    """Map ``||Ax - y|| <= eps`` to an equivalent consistent instance.

    ``||Ax - y||^2 = ||Ax - y_p||^2 + r^2`` with ``y_p`` the projection onto
    range(A) and ``r`` the orthogonal residual.  Returns ``(y_p, eps', r)``;
    the caller decides what to do when ``r`` exceeds ``eps``.
    """
    yp, r = prob.project(y)
    eps_eff = float(np.sqrt(max(eps * eps - r * r, 0.0)))
    return yp, eps_eff, r


def analysis_basis_pursuit(A, y, frame: Frame, eps: float = 0.0,
                           cfg: Optional[SolverConfig] = None) -> RecoveryResult:
    """Minimize ``||D^T x||_1`` subject to ``||A x - y||_2 <= eps``.

    Parameters
    ----------
    A : array_like or MeasurementEnsemble, shape (m, n)
    y : array_like, shape (m,)
    frame : Frame
        Real tight frame.
    eps : float
        Residual budget; 0 gives the equality-constrained program.
    cfg : SolverConfig, optional

    Raises
    ------
    InfeasibleError
        If no ``x`` satisfies the constraint (``y`` too far from range(A)).
    """
    cfg = cfg or SolverConfig()
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    D = _real_tight_frame(frame)
    M = as_matrix(A).astype(float)
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != M.shape[0]:
        raise ShapeError(f"y has length {y.shape[0]}, expected {M.shape[0]}")
    prob = _Problem(M, D, cfg)
    yp, eps_eff, r = _reduce(prob, y, eps)
    scale = max(1.0, float(np.linalg.norm(y)))
    if r > eps + 1e-9 * scale:
        raise InfeasibleError(
            f"constraint set empty: distance from y to range(A) is {r:.3e} > eps={eps:.3e}")
    x, info, _ = _solve(prob, yp, eps_eff)
    return _inner_result(prob, x, y, eps, eps_eff, info)


def _inner_result(prob, x, y, eps, eps_eff, info):
    res = float(np.linalg.norm(prob.A @ x - y))
    on_target = eps == 0 or res >= eps * (1 - prob.cfg.residual_target_slack)
    return RecoveryResult(
        estimate=x, objective=_objective(prob, x), residual=res,
        inner_iters=int(info["iters"]), outer_iters=0,
        converged=bool(info["converged"]), kkt_residual=float(info["kkt"]),
        status="optimal" if info["converged"] else "max-iters",
        extras={"polished": bool(info["polished"]), "on_target": bool(on_target),
                "eps_effective": eps_eff},
    )
