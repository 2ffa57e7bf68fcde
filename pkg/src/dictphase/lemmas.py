"""Executable checks of the auxiliary results behind the stability bound.

* ``polytope_decompose`` writes a vector of the polytope
  ``{||v||_inf <= alpha, ||v||_1 <= s*alpha}`` as a convex combination of
  ``s``-sparse, ``alpha``-capped, l1-preserving atoms supported inside
  ``supp(v)``; ``polytope_verify`` checks any such claim.
* ``power_sum_check`` tests the head/tail power-sum inequality.
* ``check_lemma_bound`` evaluates the end-to-end recovery bound for a given
  pair ``(x0, x_hat)`` after certifying its preconditions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from . import certify
from .errors import BudgetExceeded, DomainError, MembershipError, PreconditionError, ShapeError
from .frames import Frame, analyze, best_k_term_error, is_in_D_sigma_k, l1_norm
from .measure import as_matrix

POLYTOPE_MAX_SUPPORT = 12
WEIGHT_SUM_TOL = 1e-12
L1_TOL = 1e-10
LINF_TOL = 1e-12
RECON_TOL = 1e-10


@dataclass
class PolytopeDecomposition:
    """``v = sum_i weights[i] * atoms[i]``.

    ``method`` records the construction path (``"peeling"`` or ``"lp"``).
    """

    weights: np.ndarray
    atoms: list
    alpha: float
    s: int
    method: str = "peeling"

    @property
    def M(self) -> int:
        return len(self.atoms)


@dataclass(frozen=True)
class Verdict:
    """Boolean outcome with the first violated clause, if any."""

    ok: bool
    clause: Optional[str] = None
    detail: str = ""

    def __bool__(self):
        return self.ok


def _check_membership(v, alpha, s):
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if s < 0 or int(s) != s:
        raise DomainError("s must be a nonnegative integer")
    vmax = float(np.max(np.abs(v))) if v.size else 0.0
    if vmax > alpha * (1 + LINF_TOL):
        raise MembershipError("linf", f"||v||_inf = {vmax} > alpha = {alpha}")
    l1 = float(np.sum(np.abs(v)))
    if l1 > s * alpha * (1 + LINF_TOL):
        raise MembershipError("l1", f"||v||_1 = {l1} > s*alpha = {s * alpha}")


def _vertex(a, alpha, L, order):
    """Vertex of ``{0 <= u <= alpha, sum u = L}`` aligned with the ranking ``order``."""
    u = np.zeros_like(a)
    q = int(math.floor(L / alpha + 1e-12))
    q = min(q, a.size)
    u[order[:q]] = alpha
    r = L - q * alpha
    if q < a.size and r > LINF_TOL * alpha:
        u[order[q]] = r
    return u


def _peel(a, alpha, s):
    """Caratheodory peeling for a nonnegative vector ``a`` in the polytope."""
    L = float(a.sum())
    weights, atoms = [], []
    remaining = 1.0
    cur = a.copy()
    snap = 1e-12 * alpha
    for _ in range(a.size + 2):
        cur[np.abs(cur) <= snap] = 0.0
        cur[np.abs(cur - alpha) <= snap] = alpha
        if np.count_nonzero(cur) <= s:
            weights.append(remaining)
            atoms.append(cur.copy())
            return np.array(weights), atoms
        order = np.argsort(-cur, kind="stable")
        u = _vertex(cur, alpha, L, order)
        lam = 1.0
        up = u > cur
        if up.any():
            lam = min(lam, float(np.min(cur[up] / u[up])))
        dn = (u < cur) & (u < alpha)
        if dn.any():
            lam = min(lam, float(np.min((alpha - cur[dn]) / (alpha - u[dn]))))
        if lam <= 0:
            return None
        weights.append(remaining * lam)
        atoms.append(u)
        if lam >= 1.0:
            return np.array(weights), atoms
        cur = (cur - lam * u) / (1.0 - lam)
        remaining *= 1.0 - lam
    return None


def _lp_fallback(a, alpha, s):
    """Feasibility LP over every vertex of the capped simplex on ``supp(a)``."""
    p = a.size
    L = float(a.sum())
    q = int(math.floor(L / alpha + 1e-12))
    r = L - q * alpha
    cands = []
    for top in itertools.combinations(range(p), min(q, p)):
        rest = [i for i in range(p) if i not in top]
        tails = rest if (r > LINF_TOL * alpha and rest) else [None]
        for j in tails:
            u = np.zeros(p)
            u[list(top)] = alpha
            if j is not None:
                u[j] = r
            if np.count_nonzero(u) <= s:
                cands.append(u)
    U = np.array(cands).T
    res = linprog(np.zeros(U.shape[1]), A_eq=np.vstack([U, np.ones((1, U.shape[1]))]),
                  b_eq=np.concatenate([a, [1.0]]), bounds=[(0, None)] * U.shape[1],
                  method="highs")
    if res.status != 0:
        return None
    keep = res.x > 1e-15
    w = res.x[keep]
    return w / w.sum(), [U[:, i] for i in np.flatnonzero(keep)]


def polytope_decompose(v, alpha: float, s: int,
                       max_support: int = POLYTOPE_MAX_SUPPORT) -> PolytopeDecomposition:
    """Convex decomposition of ``v`` into ``s``-sparse capped atoms.

    The magnitudes ``|v|`` lie in the polytope ``{0 <= u <= alpha,
    sum u = ||v||_1}`` over ``supp(v)``, whose vertices are ``s``-sparse.
    Repeatedly subtracting the largest multiple of the vertex aligned with
    the current remainder fixes at least one more coordinate at ``0`` or
    ``alpha`` per step, so at most ``|supp(v)| + 1`` atoms arise.  If the
    result fails verification an LP over all vertices is solved instead.

    Raises
    ------
    MembershipError
        ``v`` is outside the polytope (clause ``linf`` or ``l1``).
    BudgetExceeded
        The support is larger than ``max_support``.
    """
    v = np.asarray(v, dtype=float).ravel()
    _check_membership(v, alpha, s)
    supp = np.flatnonzero(v)
    if supp.size > max_support:
        raise BudgetExceeded("polytope_decompose support", int(supp.size), max_support)
    if supp.size <= s:
        u = np.clip(v, -alpha, alpha)
        return PolytopeDecomposition(np.array([1.0]), [u], alpha, s, "direct")
    a = np.minimum(np.abs(v[supp]), alpha)
    sgn = np.sign(v[supp])

    def lift(atoms_local):
        out = []
        for ul in atoms_local:
            u = np.zeros_like(v)
            u[supp] = sgn * ul
            out.append(u)
        return out

    peeled = _peel(a, alpha, s)
    if peeled is not None:
        dec = PolytopeDecomposition(peeled[0], lift(peeled[1]), alpha, s, "peeling")
        if polytope_verify(v, alpha, s, dec):
            return dec
    fb = _lp_fallback(a, alpha, s)
    if fb is None:
        raise RuntimeError("polytope decomposition failed in both construction paths")
    return PolytopeDecomposition(fb[0], lift(fb[1]), alpha, s, "lp")


def polytope_verify(v, alpha: float, s: int, dec: PolytopeDecomposition) -> Verdict:
    """Check a decomposition clause by clause; report the first violation."""
    v = np.asarray(v, dtype=float).ravel()
    w = np.asarray(dec.weights, dtype=float)
    if w.size != len(dec.atoms) or w.size == 0:
        return Verdict(False, "weights-nonnegative", "weights and atoms differ in count")
    if np.any(w <= 0):
        return Verdict(False, "weights-nonnegative", f"min weight {w.min()}")
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        return Verdict(False, "weights-sum", f"sum = {w.sum()!r}")
    l1v = float(np.sum(np.abs(v)))
    off = v == 0
    for i, u in enumerate(dec.atoms):
        u = np.asarray(u, dtype=float)
        if u.shape != v.shape:
            return Verdict(False, "atom-support", f"atom {i} has shape {u.shape}")
        if np.any(u[off] != 0):
            return Verdict(False, "atom-support", f"atom {i} leaves supp(v)")
        if np.count_nonzero(u) > s:
            return Verdict(False, "atom-sparsity", f"atom {i} has {np.count_nonzero(u)} > {s}")
        if abs(float(np.sum(np.abs(u))) - l1v) > L1_TOL * max(1.0, l1v):
            return Verdict(False, "atom-l1", f"atom {i}")
        if float(np.max(np.abs(u), initial=0.0)) > alpha + LINF_TOL * max(1.0, alpha):
            return Verdict(False, "atom-linf", f"atom {i}")
    recon = np.sum(w[:, None] * np.array(dec.atoms, dtype=float), axis=0)
    err = float(np.max(np.abs(recon - v), initial=0.0))
    if err > RECON_TOL:
        return Verdict(False, "reconstruction", f"max error {err:.3e}")
    return Verdict(True)


def power_sum_check(a, r: int, alpha: float, rtol: float = 1e-12) -> bool:
    """Head/tail power-sum inequality.

    For nonincreasing ``a >= 0`` with ``sum(a[:r]) >= sum(a[r:])``, returns
    whether ``sum(a[r:]**alpha) <= sum(a[:r]**alpha)`` (to ``rtol``
    relative rounding slack).

    Raises
    ------
    ValueError
        Unsorted or negative input.
    DomainError
        ``alpha < 1`` or ``r`` out of range.
    PreconditionError
        ``"premise"`` when the head sum is smaller than the tail sum.
    """
    a = np.asarray(a, dtype=float).ravel()
    if np.any(a < 0):
        raise ValueError("entries must be nonnegative")
    if np.any(np.diff(a) > 0):
        raise ValueError("input must be sorted nonincreasing")
    if alpha < 1:
        raise DomainError("alpha must be >= 1")
    if not 0 <= r <= a.size:
        raise DomainError(f"r must lie in [0, {a.size}]")
    head, tail = a[:r], a[r:]
    if head.sum() < tail.sum():
        raise PreconditionError("premise", f"head sum {head.sum()} < tail sum {tail.sum()}")
    lhs = float(np.sum(tail ** alpha))
    rhs = float(np.sum(head ** alpha))
    return lhs <= rhs + rtol * max(1.0, rhs)


@dataclass
class LemmaBoundResult:
    """Outcome of one bound evaluation; truthy iff the bound holds."""

    holds: bool
    error: float
    bound: float
    constants: certify.StabilityConstants
    order: int
    delta_exact: float
    sigma: float
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.holds


def drip_order(t: float, k: int) -> int:
    """``ceil(t*k)`` with a guard against rounding just above an integer."""
    return int(math.ceil(t * k - 1e-12))


def check_lemma_bound(A, frame: Frame, x0, x_hat, rho: float, eps: float, t: float,
                      delta: float, k: int, tol: float = 1e-9,
                      drip_budget: Optional[int] = certify.DRIP_BUDGET) -> LemmaBoundResult:
    """Evaluate ``||x_hat - x0|| <= c1*eps + c2*(2*sigma_k(D*x0)_1 + rho)/sqrt(k)``.

    Every precondition is verified before a verdict is issued: tight
    frame, ``x0 in D Sigma_k``, the l1 and residual constraints on
    ``x_hat`` (to ``tol`` relative slack), ``delta`` at least the exact DRIP
    constant of order ``ceil(t*k)``, and ``delta < sqrt((t-1)/t)``.

    Raises
    ------
    PreconditionError
        Naming the clause that could not be verified.
    """
    A = as_matrix(A).astype(float)
    x0 = np.asarray(x0, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x0.shape != x_hat.shape or x0.shape != (A.shape[1],):
        raise ShapeError("x0 and x_hat must be n-vectors")
    if k < 1:
        raise PreconditionError("sparsity", "k must be >= 1")
    if rho < 0 or eps < 0:
        raise PreconditionError("nonnegative", "rho and eps must be nonnegative")
    if not frame.tight:
        raise PreconditionError("tight-frame", "frame must be tight")
    if not t > 1:
        raise PreconditionError("admissibility", f"t={t} must exceed 1")
    if not 0 <= delta < certify.delta_ceiling(t):
        raise PreconditionError("admissibility",
                                f"delta={delta} not below sqrt((t-1)/t)={certify.delta_ceiling(t)}")
    mem = is_in_D_sigma_k(frame, x0, k)
    if mem.member is not True:
        raise PreconditionError("membership", "x0 not verified in D Sigma_k")
    o0, oh = l1_norm(analyze(frame, x0)), l1_norm(analyze(frame, x_hat))
    if oh > o0 + rho + tol * max(1.0, o0):
        raise PreconditionError("objective", f"||D*x_hat||_1={oh} > ||D*x0||_1 + rho={o0 + rho}")
    res = float(np.linalg.norm(A @ (x_hat - x0)))
    if res > eps + tol * max(1.0, eps):
        raise PreconditionError("residual", f"||A(x_hat - x0)|| = {res} > eps = {eps}")
    order = drip_order(t, k)
    try:
        rep = certify.drip_exact(A, frame, order, budget=drip_budget)
    except BudgetExceeded as exc:
        raise PreconditionError("drip-certificate", str(exc)) from exc
    if delta < rep.delta - 1e-12:
        raise PreconditionError("drip-certificate",
                                f"delta={delta} below exact DRIP constant {rep.delta}")
    c = certify.stability_constants(delta, t)
    sigma = best_k_term_error(analyze(frame, x0), k)
    bound = certify.error_bound(c, eps, sigma, k, rho)
    err = float(np.linalg.norm(x_hat - x0))
    return LemmaBoundResult(err <= bound * (1 + 1e-12) + 1e-12, err, bound, c, order,
                            rep.delta, sigma, {"residual": res, "obj_x0": o0, "obj_x_hat": oh})


# -- randomized self-test ------------------------------------------------------

POWER_SUM_ALPHAS = (1.0, 1.5, 2.0, 3.0)


def random_polytope_instance(rng, max_support: int = 10):
    """Random ``(v, alpha, s)`` inside the polytope; every third draw sits on ``||v||_1 = s*alpha``."""
    N = int(rng.integers(1, max_support + 3))
    p = int(rng.integers(1, min(N, max_support) + 1))
    s = int(rng.integers(1, p + 1))
    alpha = float(rng.uniform(0.1, 3.0))
    mag = rng.uniform(0.0, alpha, size=p)
    if mag.sum() > s * alpha or rng.random() < 1 / 3:
        mag *= s * alpha / mag.sum()
        if mag.max() > alpha:
            mag = np.minimum(mag, alpha)
    v = np.zeros(N)
    v[rng.permutation(N)[:p]] = mag * rng.choice([-1.0, 1.0], size=p)
    return v, alpha, s


def random_power_sum_instance(rng):
    """Random premise-satisfying ``(a, r)`` drawn by rejection."""
    while True:
        L = int(rng.integers(1, 21))
        a = np.sort(rng.exponential(size=L) * (rng.random(L) < 0.8))[::-1]
        r = int(rng.integers(0, L + 1))
        if a[:r].sum() >= a[r:].sum():
            return a, r


def selftest(polytope_trials: int = 1000, power_sum_trials: int = 1000,
             lemma_trials: int = 100, seed: int = 0) -> dict:
    """Run the three randomized oracles and report pass/fail counts."""
    from ._rng import derive_seed, make_rng
    from .frames import make_random_tight_frame
    from .measure import gaussian_ensemble

    rng = make_rng(derive_seed(seed, 1))
    poly_fail, atoms_max = [], 0
    for i in range(polytope_trials):
        v, alpha, s = random_polytope_instance(rng)
        dec = polytope_decompose(v, alpha, s)
        atoms_max = max(atoms_max, dec.M)
        verdict = polytope_verify(v, alpha, s, dec)
        if not verdict:
            poly_fail.append({"trial": i, "clause": verdict.clause})

    rng = make_rng(derive_seed(seed, 2))
    ps_fail = []
    for i in range(power_sum_trials):
        alpha = POWER_SUM_ALPHAS[i % len(POWER_SUM_ALPHAS)]
        a, r = random_power_sum_instance(rng)
        if not power_sum_check(a, r, alpha):
            ps_fail.append({"trial": i, "alpha": alpha, "r": r, "a": a.tolist()})

    rng = make_rng(derive_seed(seed, 3))
    n, N, m, k, t = 4, 6, 48, 1, 2.0
    frame = make_random_tight_frame(n, N, derive_seed(seed, 4))
    A = gaussian_ensemble(m, n, derive_seed(seed, 5)).matrix / math.sqrt(m)
    delta = certify.drip_exact(A, frame, drip_order(t, k)).delta
    lemma_fail, lemma_refused = [], 0
    for i in range(lemma_trials if delta < certify.delta_ceiling(t) else 0):
        z0 = np.zeros(N)
        z0[rng.integers(N)] = rng.standard_normal()
        x0 = frame.matrix @ z0
        x_hat = x0 + rng.standard_normal(n) * 10.0 ** rng.uniform(-6, 0)
        rho = max(0.0, l1_norm(analyze(frame, x_hat)) - l1_norm(analyze(frame, x0)))
        eps = float(np.linalg.norm(A @ (x_hat - x0)))
        try:
            res = check_lemma_bound(A, frame, x0, x_hat, rho, eps, t, delta, k)
        except PreconditionError:
            lemma_refused += 1
            continue
        if not res:
            lemma_fail.append({"trial": i, "error": res.error, "bound": res.bound})

    report = {
        "seed": seed,
        "polytope": {"trials": polytope_trials, "failures": poly_fail, "max_atoms": atoms_max,
                     "passed": not poly_fail},
        "power_sum": {"trials": power_sum_trials, "failures": ps_fail, "passed": not ps_fail},
        "lemma_bound": {"trials": lemma_trials, "delta": delta, "refused": lemma_refused,
                        "failures": lemma_fail,
                        "passed": not lemma_fail and delta < certify.delta_ceiling(t)},
    }
    report["passed"] = all(report[key]["passed"] for key in ("polytope", "power_sum", "lemma_bound"))
    return report
