"""Recovery-condition certificates.

* DRIP constants by exhaustive support enumeration (exact) or sampling
  (lower bound).
* S-DRIP levels, using subset monotonicity: ``||A_I x||^2`` only grows
  when rows are added, so the minimum over ``|I| >= m/2`` is attained at
  ``|I| = ceil(m/2)`` and the maximum at ``I = [m]``.
* Stability constants ``c1, c2`` and the resulting error bound.
* Null space property checks: an exact decision for pairs of
  one-dimensional null spaces, randomized falsification otherwise, and
  counterexamples harvested from exact oracle runs.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import _linalg
from ._rng import GENERATOR_VERSION, make_rng
from .errors import DomainError, PreconditionError, ShapeError
from .frames import Frame, is_in_D_sigma_k
from .measure import as_matrix

DRIP_BUDGET = 2_000_000
SDRIP_BUDGET = 5_000_000
NSP_BUDGET = 1 << 14
NULL_TOL = 1e-10
_CHUNK = 2048


def _json_default(o):
    if isinstance(o, np.ndarray):
        if np.iscomplexobj(o):
            return {"re": o.real.tolist(), "im": o.imag.tolist()}
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o)}")


class _Report:
    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=_json_default)


@dataclass
class DripReport(_Report):
    """DRIP constant of order ``k``.

    ``method`` is ``"exact"`` (every support enumerated) or
    ``"montecarlo-lower-bound"``.  ``lambda_min``/``lambda_max`` are the
    extreme Rayleigh quotients of ``||A D z||^2 / ||D z||^2``.
    """

    k: int
    delta: float
    method: str
    supports_checked: int
    lambda_min: float = float("nan")
    lambda_max: float = float("nan")
    argmax_support: Optional[tuple] = None
    seed: Optional[int] = None
    generator_version: str = GENERATOR_VERSION


@dataclass
class SdripReport(_Report):
    """S-DRIP levels of order ``k``.

    ``satisfied`` is None for an inconclusive (empty) Monte Carlo report.
    ``witness_subset`` is the row subset attaining the violated level.
    """

    k: int
    theta_minus: float
    theta_plus: float
    satisfied: Optional[bool]
    witness_subset: Optional[tuple] = None
    method: str = "exact"
    subsets_checked: int = 0
    argmin_subset: Optional[tuple] = None
    seed: Optional[int] = None
    generator_version: str = GENERATOR_VERSION

    @property
    def delta_bound(self) -> float:
        """``max(1 - theta_minus, theta_plus - 1)``."""
        return max(1.0 - self.theta_minus, self.theta_plus - 1.0)


@dataclass
class NspVerdict(_Report):
    """Outcome of a null space property check.

    ``status`` is ``"holds-on-tested-family"``, ``"counterexample"`` or
    ``"inconclusive"``; ``exact`` is True when every row subset was
    decided exactly (so "holds" is a proof up to floating point).
    """

    status: str
    witness: Optional[dict] = None
    trials: int = 0
    exact: bool = False
    subsets_decided: int = 0
    subsets_undecided: int = 0
    candidates_rejected: int = 0
    seed: Optional[int] = None
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class StabilityConstants:
    t: float
    delta: float
    c1: float
    c2: float


# -- DRIP ------------------------------------------------------------------

def _frame_matrix(frame):
    return frame.matrix if isinstance(frame, Frame) else np.asarray(frame)


def _support_extremes(A, D, S):
    """Extreme Rayleigh quotients of ``A`` on ``range(D_S)`` per support row of ``S``."""
    blocks = np.moveaxis(D[:, S], 1, 0)            # (C, n, q)
    u, s, _ = np.linalg.svd(blocks, full_matrices=False)
    top = s[:, :1]
    rank = np.sum(s > _linalg.RANK_RTOL * np.where(top > 0, top, np.inf), axis=1)
    lo = np.full(S.shape[0], np.inf)
    hi = np.full(S.shape[0], -np.inf)
    for r in np.unique(rank):
        if r == 0:
            continue
        idx = np.flatnonzero(rank == r)
        B = np.einsum("mn,cnr->cmr", A, u[idx, :, :r])
        ev = np.linalg.eigvalsh(np.einsum("cmr,cms->crs", B.conj(), B))
        lo[idx] = ev[:, 0]
        hi[idx] = ev[:, -1]
    return lo, hi


def drip_exact(A, frame, k: int, budget: Optional[int] = DRIP_BUDGET) -> DripReport:
    """Exact DRIP constant of order ``k`` by support enumeration.

    For each support ``T`` of size ``min(k, N)`` an orthonormal basis of
    ``range(D_T)`` is taken (dropping null directions of ``D_T``), and the
    eigenvalues of the compressed Gram matrix give the extreme quotients.
    Supports of smaller size are covered, since their ranges are nested.

    Raises
    ------
    BudgetExceeded
        If ``binom(N, k)`` exceeds ``budget``.
    """
    A = as_matrix(A)
    D = _frame_matrix(frame)
    if A.shape[1] != D.shape[0]:
        raise ShapeError(f"A has {A.shape[1]} columns but frame has n={D.shape[0]}")
    if k < 0:
        raise ValueError("k must be nonnegative")
    N = D.shape[1]
    q = min(k, N)
    if q == 0:
        return DripReport(k, 0.0, "exact", 0)
    total = _linalg.count_supports(N, q)
    _linalg.check_budget("drip_exact supports", total, budget)
    lo_best, hi_best = np.inf, -np.inf
    delta, arg = -np.inf, None
    it = _linalg.iter_supports(N, q)
    done = 0
    while True:
        block = list(itertools.islice(it, _CHUNK))
        if not block:
            break
        S = np.array(block, dtype=int)
        lo, hi = _support_extremes(A, D, S)
        d = np.maximum(1.0 - lo, hi - 1.0)
        i = int(np.argmax(d))
        if d[i] > delta:
            delta, arg = float(d[i]), tuple(int(j) for j in S[i])
        lo_best = min(lo_best, float(lo.min()))
        hi_best = max(hi_best, float(hi.max()))
        done += len(block)
    return DripReport(k, max(delta, 0.0), "exact", done, lo_best, hi_best, arg)


def drip_montecarlo(A, frame, k: int, trials: int, seed: int) -> DripReport:
    """Lower bound on the DRIP constant from random ``k``-sparse probes."""
    A = as_matrix(A)
    D = _frame_matrix(frame)
    N = D.shape[1]
    q = min(k, N)
    if q == 0 or trials == 0:
        return DripReport(k, 0.0, "montecarlo-lower-bound", 0, seed=seed)
    rng = make_rng(seed)
    S = np.argsort(rng.random((trials, N)), axis=1)[:, :q]
    z = rng.standard_normal((trials, q))
    X = np.einsum("nct,ct->cn", D[:, S], z)           # (trials, n)
    num = np.sum(np.abs(X @ A.T) ** 2, axis=1)
    den = np.sum(np.abs(X) ** 2, axis=1)
    ok = den > 0
    ratio = num[ok] / den[ok]
    if ratio.size == 0:
        return DripReport(k, 0.0, "montecarlo-lower-bound", trials, seed=seed)
    lo, hi = float(ratio.min()), float(ratio.max())
    return DripReport(k, max(1.0 - lo, hi - 1.0, 0.0), "montecarlo-lower-bound", trials,
                      lo, hi, None, seed=seed)


# -- S-DRIP ----------------------------------------------------------------

def _row_outer(B):
    """Per-row outer products ``b_j b_j^*`` flattened: (m, r*r)."""
    return np.einsum("mr,ms->mrs", B.conj(), B).reshape(B.shape[0], -1)


def sdrip_exact(A, frame, k: int, budget: Optional[int] = SDRIP_BUDGET) -> SdripReport:
    """Exact S-DRIP levels of order ``k``.

    ``theta_plus`` comes from the full row set and ``theta_minus`` from the
    subsets of size exactly ``ceil(m/2)``; the Gram matrix of a subset is
    the sum of its rows' outer products, so all subsets of a support are
    evaluated with one matrix product.
    """
    A = as_matrix(A)
    D = _frame_matrix(frame)
    m = A.shape[0]
    if A.shape[1] != D.shape[0]:
        raise ShapeError(f"A has {A.shape[1]} columns but frame has n={D.shape[0]}")
    N = D.shape[1]
    q = min(k, N)
    h = (m + 1) // 2
    n_sub = _linalg.count_supports(m, h)
    n_sup = _linalg.count_supports(N, q) if q else 0
    _linalg.check_budget("sdrip_exact subset-support pairs", n_sub * n_sup, budget)
    full = drip_exact(A, D, k, budget=None)
    theta_plus = float(full.lambda_max) if q else 0.0
    theta_minus, argmin = np.inf, None
    if q:
        subsets = _linalg.support_array(m, h)
        sel = np.zeros((subsets.shape[0], m))
        np.put_along_axis(sel, subsets, 1.0, axis=1)
        for T in _linalg.iter_supports(N, q):
            B = _linalg.range_basis(D[:, list(T)])
            r = B.shape[1]
            if r == 0:
                continue
            G = (sel @ _row_outer(A @ B)).reshape(-1, r, r)
            lo = np.linalg.eigvalsh(G)[:, 0]
            i = int(np.argmin(lo))
            if lo[i] < theta_minus:
                theta_minus, argmin = float(lo[i]), tuple(int(j) for j in subsets[i])
    else:
        theta_minus = 0.0
    tol = 1e-12
    if theta_minus <= tol:
        satisfied, witness = False, argmin
    elif theta_plus >= 2.0 - tol:
        satisfied, witness = False, tuple(range(m))
    else:
        satisfied, witness = True, None
    return SdripReport(k, theta_minus, theta_plus, satisfied, witness, "exact",
                       n_sub, argmin)


def sdrip_montecarlo(A, frame, k: int, trials: int, seed: int) -> SdripReport:
    """Sampled S-DRIP envelope.

    Each trial draws a row subset of size ``ceil(m/2)`` and a support of
    size ``k`` and takes the exact extreme quotients on that pair, so the
    reported ``[theta_minus, theta_plus]`` lies inside the exact interval.
    """
    A = as_matrix(A)
    D = _frame_matrix(frame)
    m, N = A.shape[0], D.shape[1]
    q = min(k, N)
    h = (m + 1) // 2
    if trials <= 0 or q == 0:
        return SdripReport(k, float("nan"), float("nan"), None, None,
                           "montecarlo-envelope", 0, seed=seed)
    rng = make_rng(seed)
    theta_minus, theta_plus, argmin = np.inf, -np.inf, None
    for _ in range(trials):
        I = np.sort(rng.permutation(m)[:h])
        T = np.sort(rng.permutation(N)[:q])
        B = _linalg.range_basis(D[:, T])
        if B.shape[1] == 0:
            continue
        ev_sub = np.linalg.eigvalsh((A[I] @ B).conj().T @ (A[I] @ B))
        ev_full = np.linalg.eigvalsh((A @ B).conj().T @ (A @ B))
        if ev_sub[0] < theta_minus:
            theta_minus, argmin = float(ev_sub[0]), tuple(int(j) for j in I)
        theta_plus = max(theta_plus, float(ev_full[-1]))
    satisfied = bool(0 < theta_minus and theta_plus < 2)
    return SdripReport(k, theta_minus, theta_plus, satisfied,
                       None if satisfied else argmin, "montecarlo-envelope", trials,
                       argmin, seed=seed)


# -- stability constants ---------------------------------------------------

def admissible_t(theta_minus: float, theta_plus: float) -> float:
    """``max(1/(2 theta_- - theta_-^2), 1/(2 theta_+ - theta_+^2))``."""
    for name, v in (("theta_minus", theta_minus), ("theta_plus", theta_plus)):
        if not 0 < v < 2:
            raise DomainError(f"{name}={v} outside (0, 2)")
    return max(1.0 / (2 * theta_minus - theta_minus ** 2),
               1.0 / (2 * theta_plus - theta_plus ** 2))


def delta_ceiling(t: float) -> float:
    """Largest admissible DRIP constant ``sqrt((t-1)/t)`` (exclusive)."""
    return math.sqrt((t - 1.0) / t)


def stability_constants(delta: float, t: float) -> StabilityConstants:
    """Closed-form ``c1, c2`` of the stable recovery bound.

    Raises
    ------
    DomainError
        Unless ``t > 1`` and ``0 <= delta < sqrt((t-1)/t)``.
    """
    if not t > 1:
        raise DomainError(f"t={t} must exceed 1")
    cap = delta_ceiling(t)
    if not 0 <= delta < cap:
        raise DomainError(f"delta={delta} outside [0, {cap}); the bound is vacuous")
    c1 = math.sqrt(2.0 * (1.0 + delta)) / (1.0 - math.sqrt(t / (t - 1.0)) * delta)
    gap = cap - delta
    c2 = (math.sqrt(2.0) * delta + math.sqrt(t * gap * delta)) / (t * gap) + 1.0
    return StabilityConstants(t, delta, c1, c2)


def error_bound(c: StabilityConstants, eps: float, sigma: float, k: int, rho: float = 0.0) -> float:
    """``c1*eps + c2*(2*sigma + rho)/sqrt(k)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if eps < 0 or sigma < 0 or rho < 0:
        raise ValueError("eps, sigma and rho must be nonnegative")
    return c.c1 * eps + c.c2 * (2.0 * sigma + rho) / math.sqrt(k)


# -- real null space property ----------------------------------------------

def _row_tol(A, w):
    return NULL_TOL * np.linalg.norm(A, axis=1) * max(1.0, float(np.linalg.norm(w)))


def nsp_real_counterexample_to_failure(A, u, v):
    """Turn an NSP witness ``(u, v)`` into ``(x0, x_tilde) = (u + v, u - v)``.

    Raises
    ------
    PreconditionError
        ``"null-space-membership"`` unless every row annihilates ``u`` or
        ``v`` (to relative tolerance 1e-10).
    """
    A = as_matrix(A)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.shape != (A.shape[1],):
        raise ShapeError("u and v must be n-vectors")
    au = np.abs(A @ u) <= _row_tol(A, u)
    av = np.abs(A @ v) <= _row_tol(A, v)
    if not np.all(au | av):
        bad = np.flatnonzero(~(au | av)).tolist()
        raise PreconditionError("null-space-membership",
                                f"rows {bad} annihilate neither u nor v")
    return u + v, u - v


def _violation(Dt, u, v, tol):
    """True when ``||D*(u+v)||_1 < ||D*(u-v)||_1`` fails (ties count)."""
    lhs = float(np.sum(np.abs(Dt @ (u + v))))
    rhs = float(np.sum(np.abs(Dt @ (u - v))))
    return rhs - lhs <= tol * max(1.0, lhs), lhs, rhs


def _confirm(A, frame, k, u, v, oracle_max_m):
    """Re-verify a witness; returns ``(ok, info)``."""
    from .solver.oracle import oracle_sign_enumeration
    from .solver.phase import distance_mod_sign

    D = frame.matrix
    x0, xt = nsp_real_counterexample_to_failure(A, u, v)
    scale = max(1.0, float(np.linalg.norm(x0)))
    mag = float(np.max(np.abs(np.abs(A @ x0) - np.abs(A @ xt)))) if A.shape[0] else 0.0
    o0 = float(np.sum(np.abs(D.T @ x0)))
    ot = float(np.sum(np.abs(D.T @ xt)))
    mem = is_in_D_sigma_k(frame, x0, k)
    info = {"x0": x0, "x_tilde": xt, "magnitude_gap": mag, "obj_x0": o0, "obj_x_tilde": ot,
            "member": mem.member, "oracle_confirmed": None}
    ok = (mag <= 1e-9 * scale and ot <= o0 + 1e-9 * max(1.0, o0) and mem.member is True
          and distance_mod_sign(x0, xt) > 1e-9 * scale)
    if ok and A.shape[0] <= oracle_max_m:
        orc = oracle_sign_enumeration(A, np.abs(A @ x0), frame)
        tol = 1e-7 * max(1.0, orc.objective)
        other = any(distance_mod_sign(z, x0) > 1e-7 * scale for z in orc.extras["minimizers"])
        tilde_min = ot <= orc.objective + tol
        info["oracle_confirmed"] = bool(other or tilde_min)
        info["oracle_objective"] = orc.objective
        ok = info["oracle_confirmed"]
    return ok, info


def _subsets_without_first(m):
    """All ``T`` subsets of ``[m]`` with ``0 not in T`` (T and its complement are symmetric)."""
    for mask in range(1 << max(m - 1, 0)):
        yield np.array([j + 1 for j in range(m - 1) if mask >> j & 1], dtype=int)


def _ray_witnesses(D, u0, v0, k, tol):
    """Exact decision on ``u = u0``, ``v = gamma * v0`` rays for all supports."""
    N = D.shape[1]
    q = min(k, N)
    Dt = D.T
    if q == 0:
        return None
    for S in _linalg.iter_supports(N, q):
        B = _linalg.range_basis(D[:, list(S)])
        pu = u0 - B @ (B.T @ u0)
        pv = v0 - B @ (B.T @ v0)
        nu, nv = np.linalg.norm(pu), np.linalg.norm(pv)
        small = 1e-9
        if nu <= small and nv <= small:
            # whole plane admissible; the gap is odd in gamma so one sign violates
            for g in (1.0, -1.0):
                bad, *_ = _violation(Dt, u0, g * v0, tol)
                if bad:
                    return S, u0, g * v0
            continue
        if nu <= small or nv <= small:
            continue
        g = -float(pu @ pv) / float(pv @ pv)
        if np.linalg.norm(pu + g * pv) > small * max(nu, 1.0):
            continue
        bad, *_ = _violation(Dt, u0, g * v0, tol)
        if bad:
            return S, u0, g * v0
    return None


def nsp_real_check(A, frame: Frame, k: int, budget: int = NSP_BUDGET, seed: int = 0,
                   samples_per_subset: int = 8, harvest_trials: int = 20,
                   oracle_max_m: int = 12, tol: float = 1e-10) -> NspVerdict:
    """Check the real phaseless null space property of order ``k``.

    The property: for every ``T``, nonzero ``u in N(A_T)``, nonzero
    ``v in N(A_{T^c})`` with ``u + v in D Sigma_k``,
    ``||D*(u+v)||_1 < ||D*(u-v)||_1``.

    Row subsets are enumerated when ``2^(m-1) <= budget`` and sampled
    otherwise.  A subset is decided exactly when one null space is trivial
    or both are lines; other subsets get ``samples_per_subset`` random
    probes.  Up to ``harvest_trials`` random ``x0 in D Sigma_k`` are also
    run through the exact oracle (``m <= oracle_max_m``) and any non-``+-x0``
    minimizer becomes a witness.  Every witness is re-verified before it is
    reported.
    """
    A = as_matrix(A).astype(float)
    if frame.is_complex:
        raise ValueError("nsp_real_check requires a real frame")
    D = frame.matrix
    m, n = A.shape
    if D.shape[0] != n:
        raise ShapeError(f"A has {n} columns but frame has n={D.shape[0]}")
    rng = make_rng(seed)
    Dt = D.T
    N = D.shape[1]
    q = min(k, N)

    full_enum = m == 0 or (1 << max(m - 1, 0)) <= budget
    if full_enum:
        subsets = _subsets_without_first(m)
    else:
        subsets = (np.flatnonzero(rng.random(m) < 0.5) for _ in range(budget))

    decided = undecided = trials = rejected = 0
    witness = None

    def accept(T, u, v, source):
        """Re-verified witness dict, or None."""
        nonlocal rejected
        ok, info = _confirm(A, frame, k, u, v, oracle_max_m)
        if ok:
            return {"T": tuple(int(j) for j in T), "u": u, "v": v, "source": source, **info}
        rejected += 1
        return None

    for T in subsets:
        if q == 0:
            break
        mask = np.zeros(m, dtype=bool)
        mask[T] = True
        U = _linalg.null_space(A[mask])
        V = _linalg.null_space(A[~mask])
        trials += 1
        if U.shape[1] == 0 or V.shape[1] == 0:
            decided += 1
            continue
        if U.shape[1] == 1 and V.shape[1] == 1:
            decided += 1
            hit = _ray_witnesses(D, U[:, 0], V[:, 0], k, tol)
            if hit is not None:
                witness = accept(T, hit[1], hit[2], "exact-ray")
                if witness is not None:
                    break
            continue
        undecided += 1
        UV = np.hstack([U, V])
        for _ in range(samples_per_subset):
            S = np.sort(rng.permutation(N)[:q])
            B = _linalg.range_basis(D[:, S])
            W = _linalg.null_space(UV - B @ (B.T @ UV))
            if W.shape[1] == 0:
                continue
            c = W @ rng.standard_normal(W.shape[1])
            u, v = U @ c[: U.shape[1]], V @ c[U.shape[1]:]
            if min(np.linalg.norm(u), np.linalg.norm(v)) <= 1e-8 * np.linalg.norm(c):
                continue
            bad, *_ = _violation(Dt, u, v, tol)
            if bad:
                witness = accept(T, u, v, "falsification")
                if witness is not None:
                    break
        if witness is not None:
            break

    if witness is None and q > 0 and m <= oracle_max_m and m > 0:
        witness = _harvest(A, frame, k, harvest_trials, rng, accept)

    details = {"full_enumeration": full_enum, "null_tol": NULL_TOL,
               "rank_rtol": _linalg.RANK_RTOL}
    if witness is not None:
        return NspVerdict("counterexample", witness, trials, False, decided, undecided,
                          rejected, seed, details)
    exact = full_enum and undecided == 0
    status = "holds-on-tested-family" if exact else "inconclusive"
    return NspVerdict(status, None, trials, exact, decided, undecided, rejected, seed, details)


def _harvest(A, frame, k, trials, rng, accept):
    from .solver.oracle import oracle_sign_enumeration
    from .solver.phase import distance_mod_sign

    D = frame.matrix
    N = D.shape[1]
    q = min(k, N)
    for _ in range(trials):
        z = np.zeros(N)
        z[rng.permutation(N)[:q]] = rng.standard_normal(q)
        x0 = D @ z
        if not np.any(x0):
            continue
        orc = oracle_sign_enumeration(A, np.abs(A @ x0), frame)
        scale = max(1.0, float(np.linalg.norm(x0)))
        for xh in orc.extras["minimizers"]:
            if distance_mod_sign(xh, x0) <= 1e-7 * scale:
                continue
            u, v = x0 + xh, x0 - xh
            T = np.flatnonzero(np.abs(A @ u) <= _row_tol(A, u))
            w = accept(T, u, v, "oracle-harvest")
            if w is not None:
                return w
    return None


# -- complex null space property -------------------------------------------

def nsp_complex_check_tuple(frame: Frame, partition, eta, c, A, k: Optional[int] = None,
                            tol: float = 1e-10) -> bool:
    """Evaluate the complex NSP inequality on one candidate tuple.

    Returns True iff ``||D*(eta_j - eta_l)||_1 < ||D*(c_l eta_j - c_j eta_l)||_1``
    for all ``j != l``.  Empty parts and zero ``eta_j`` are accepted so that
    degenerate tuples can be examined.

    Raises
    ------
    PreconditionError
        With clause ``partition``, ``lengths``, ``unimodular``, ``distinct``,
        ``null-space``, ``ratio-constant`` or ``ratio-membership``.
    """
    A = as_matrix(A)
    m, n = A.shape
    D = frame.matrix
    p = len(partition)
    if len(eta) != p or len(c) != p:
        raise PreconditionError("lengths", "partition, eta and c must have equal length")
    cover = sorted(int(j) for S in partition for j in S)
    if cover != list(range(m)):
        raise PreconditionError("partition", "parts must cover [m] disjointly")
    c = np.asarray(c, dtype=complex)
    if np.any(np.abs(np.abs(c) - 1.0) > 1e-12):
        raise PreconditionError("unimodular", "every c_j must satisfy |c_j| = 1")
    if p > 1 and min(abs(c[i] - c[j]) for i, j in itertools.combinations(range(p), 2)) <= 1e-12:
        raise PreconditionError("distinct", "c_j must be pairwise distinct")
    etas = [np.asarray(e, dtype=complex).ravel() for e in eta]
    for j, (S, e) in enumerate(zip(partition, etas)):
        if e.shape != (n,):
            raise ShapeError(f"eta[{j}] must have length {n}")
        rows = A[list(S)]
        if rows.shape[0] and np.any(np.abs(rows @ e) > _row_tol(rows, e)):
            raise PreconditionError("null-space", f"eta[{j}] not in N(A_S{j})")
    if p >= 2:
        ratios = [(etas[0] - etas[l]) / (c[0] - c[l]) for l in range(1, p)]
        r0 = ratios[0]
        scale = max(1.0, float(np.linalg.norm(r0)))
        if any(np.linalg.norm(r - r0) > tol * scale for r in ratios[1:]):
            raise PreconditionError("ratio-constant", "(eta_1 - eta_l)/(c_1 - c_l) varies with l")
        kk = frame.N if k is None else k
        if not np.any(r0) or is_in_D_sigma_k(frame, r0, kk).member is not True:
            raise PreconditionError("ratio-membership",
                                    f"common ratio is zero or not in D Sigma_{kk}")
    Dh = D.conj().T
    for j, l in itertools.permutations(range(p), 2):
        lhs = float(np.sum(np.abs(Dh @ (etas[j] - etas[l]))))
        rhs = float(np.sum(np.abs(Dh @ (c[l] * etas[j] - c[j] * etas[l]))))
        if not lhs < rhs - tol * max(1.0, lhs):
            return False
    return True


def nsp_complex_tuple_to_failure(eta, c, j: int, l: int):
    """Ambiguous pair ``(x0, x_tilde) = (eta_j - eta_l, c_l eta_j - c_j eta_l)``."""
    ej = np.asarray(eta[j], dtype=complex)
    el = np.asarray(eta[l], dtype=complex)
    return ej - el, c[l] * ej - c[j] * el
