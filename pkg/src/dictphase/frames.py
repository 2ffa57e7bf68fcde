"""Redundant dictionaries (frames) and dictionary-sparsity utilities.

A frame is an ``n x N`` synthesis matrix ``D`` with ``N >= n`` and full row
rank.  Signals are synthesized as ``x = D z`` and analyzed as ``D* x``.
For a tight (normalized) frame ``D D* = I``, so analysis is an isometry.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _linalg
from ._rng import make_rng
from .errors import ShapeError

TIGHT_TOL = 1e-10
MEMBERSHIP_RTOL = 1e-8
MEMBERSHIP_BUDGET = 2_000_000
_MAX_RESAMPLES = 8


@dataclass(frozen=True, eq=False)
class Frame:
    """Dense synthesis dictionary with tightness metadata.

    Parameters
    ----------
    matrix : array_like, shape (n, N)
        Real or complex synthesis matrix. Stored as a read-only copy.
    tight : bool
        Claim ``D D* = I``; verified against ``tight_tol`` on construction.
    tight_tol : float
        Max-norm tolerance for the tightness claim.
    """

    matrix: np.ndarray
    tight: bool = False
    tight_tol: float = TIGHT_TOL

    def __post_init__(self):
        D = np.array(self.matrix, copy=True)
        if D.ndim != 2:
            raise ShapeError(f"frame matrix must be 2-D, got shape {D.shape}")
        if not np.iscomplexobj(D):
            D = D.astype(float)
        n, N = D.shape
        if n < 1 or N < n:
            raise ShapeError(f"frame needs 1 <= n <= N, got n={n}, N={N}")
        if not np.all(np.isfinite(D)):
            raise ValueError("frame entries must be finite")
        if self.tight_tol < 0:
            raise ValueError("tight_tol must be nonnegative")
        s = np.linalg.svd(D, compute_uv=False)
        if s[-1] <= _linalg.RANK_RTOL * s[0]:
            raise ValueError("frame does not have full row rank")
        if self.tight:
            res = tightness_residual(D)
            if res > self.tight_tol:
                raise ValueError(
                    f"frame flagged tight but max|DD*-I| = {res:.3e} > {self.tight_tol:.1e}"
                )
        D.setflags(write=False)
        object.__setattr__(self, "matrix", D)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def N(self) -> int:
        return self.matrix.shape[1]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.matrix)

    @property
    def field(self) -> str:
        return "complex" if self.is_complex else "real"

    @property
    def adjoint(self) -> np.ndarray:
        return self.matrix.conj().T

    def __repr__(self):
        return f"Frame(n={self.n}, N={self.N}, field={self.field}, tight={self.tight})"


def tightness_residual(D):
    """Max-norm of ``D D* - I``."""
    D = np.asarray(D)
    return float(np.max(np.abs(D @ D.conj().T - np.eye(D.shape[0]))))


def make_identity_frame(n: int) -> Frame:
    if n < 1:
        raise ValueError("n must be >= 1")
    return Frame(np.eye(n), tight=True)


def make_random_tight_frame(n: int, N: int, seed: int) -> Frame:
    """Random real tight frame, deterministic per ``seed``.

    An ``N x n`` standard-normal draw is column-orthonormalized and
    transposed, so ``D D^T = I`` up to rounding.  Rank-deficient draws are
    resampled from the same stream.
    """
    if n < 1 or N < n:
        raise ValueError(f"need 1 <= n <= N, got n={n}, N={N}")
    rng = make_rng(seed)
    for _ in range(_MAX_RESAMPLES):
        G = rng.standard_normal((N, n))
        Q, R = np.linalg.qr(G)
        d = np.abs(np.diag(R))
        if d.min() > 1e-8 * d.max():
            return Frame(Q.T, tight=True)
    raise RuntimeError(f"no full-rank draw in {_MAX_RESAMPLES} attempts")


def _check_vec(v, length, name):
    v = np.asarray(v)
    if v.ndim != 1 or v.shape[0] != length:
        raise ShapeError(f"{name} must have shape ({length},), got {v.shape}")
    return v


def analyze(frame: Frame, x) -> np.ndarray:
    """Analysis coefficients ``D* x``."""
    x = _check_vec(x, frame.n, "x")
    return frame.adjoint @ x


def synthesize(frame: Frame, z) -> np.ndarray:
    """Synthesized signal ``D z``."""
    z = _check_vec(z, frame.N, "z")
    return frame.matrix @ z


def best_k_term_error(v, k: int) -> float:
    """l1 mass outside the ``k`` largest-magnitude entries of ``v``.

    >>> best_k_term_error([3, -1, 0.5], 1)
    1.5
    """
    a = np.abs(np.asarray(v)).ravel()
    if not 0 <= k <= a.size:
        raise ValueError(f"k must lie in [0, {a.size}], got {k}")
    if k == a.size:
        return 0.0
    # stable sort, index order among ties; the sum does not depend on it
    order = np.argsort(-a, kind="stable")
    return float(np.sum(a[order[k:]]))


def l1_norm(v) -> float:
    """Sum of (complex) moduli."""
    return float(np.sum(np.abs(v)))


@dataclass(frozen=True)
class SparseCoefVector:
    """Length-``N`` coefficient vector with at most ``sparsity`` nonzeros."""

    values: np.ndarray
    sparsity: int

    def __post_init__(self):
        vals = np.array(self.values, copy=True)
        nnz = int(np.count_nonzero(vals))
        if nnz > self.sparsity:
            raise ValueError(f"{nnz} nonzeros exceed sparsity {self.sparsity}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def support(self):
        return tuple(int(i) for i in np.flatnonzero(self.values))


@dataclass(frozen=True)
class Membership:
    """Outcome of a ``D Sigma_k`` membership test.

    ``member`` is ``None`` when the enumeration budget was exceeded.
    """

    member: Optional[bool]
    witness: Optional[np.ndarray] = None
    support: Optional[tuple] = None
    residual: float = float("nan")
    supports_checked: int = 0

    @property
    def inconclusive(self) -> bool:
        return self.member is None

    def __bool__(self):
        if self.member is None:
            raise ValueError("membership is inconclusive; inspect .member")
        return self.member


def _real_stack(D, x):
    """Stacked real/imaginary representation of a complex system."""
    Dr = np.block([[D.real, -D.imag], [D.imag, D.real]])
    return Dr, np.concatenate([x.real, x.imag])


def is_in_D_sigma_k(frame: Frame, x, k: int, tol: Optional[float] = None,
                    budget: Optional[int] = MEMBERSHIP_BUDGET) -> Membership:
    """Decide whether ``x = D z`` for some ``k``-sparse ``z``.

    Every support of size ``min(k, n, N)`` is tried in lexicographic order;
    the first whose least-squares residual is within ``tol`` (default
    ``1e-8 * ||x||``) is returned as witness.  Complex frames are handled
    through the stacked real representation, a complex support ``S``
    occupying real columns ``S`` and ``S + N``.
    """
    x = _check_vec(x, frame.n, "x")
    D = frame.matrix
    N = frame.N
    xnorm = float(np.linalg.norm(x))
    if tol is None:
        tol = MEMBERSHIP_RTOL * xnorm
    if k < 0:
        raise ValueError("k must be nonnegative")
    is_cplx = frame.is_complex or np.iscomplexobj(x)
    dtype = complex if is_cplx else float
    if k == 0 or xnorm == 0.0:
        z = np.zeros(N, dtype=dtype)
        ok = xnorm <= tol
        return Membership(ok, z if ok else None, () if ok else None, xnorm, 1)

    # any member is reachable from a support of size <= rank(D) = n
    q = min(k, frame.n, N)
    total = _linalg.count_supports(N, q)
    if budget is not None and total > budget:
        return Membership(None, supports_checked=0)

    if is_cplx:
        Dr, xr = _real_stack(D.astype(complex), x.astype(complex))
    else:
        Dr, xr = D, x

    checked = 0
    chunk = 4096
    sup_iter = _linalg.iter_supports(N, q)
    best_res = np.inf
    while True:
        block = [s for _, s in zip(range(chunk), sup_iter)]
        if not block:
            break
        S = np.array(block, dtype=int)
        cols = np.concatenate([S, S + N], axis=1) if is_cplx else S
        B = np.moveaxis(Dr[:, cols], 1, 0)  # (C, rows, q')
        pinv = np.linalg.pinv(B, rcond=1e-12)
        coef = pinv @ xr
        res = np.linalg.norm(xr[None, :] - np.einsum("cij,cj->ci", B, coef), axis=1)
        checked += len(block)
        hit = np.flatnonzero(res <= tol)
        best_res = min(best_res, float(res.min()))
        if hit.size:
            i = int(hit[0])
            z = np.zeros(N, dtype=dtype)
            if is_cplx:
                z[S[i]] = coef[i, :q] + 1j * coef[i, q:]
            else:
                z[S[i]] = coef[i]
            return Membership(True, z, tuple(int(j) for j in S[i]), float(res[i]), checked)
    return Membership(False, None, None, best_res, checked)


# -- serialization ---------------------------------------------------------

def matrix_to_payload(M, **extra):
    M = np.asarray(M)
    if np.iscomplexobj(M):
        data = np.stack([M.real, M.imag], axis=-1).tolist()
        fld = "complex"
    else:
        data = M.tolist()
        fld = "real"
    payload = {"n": int(M.shape[0]), "N": int(M.shape[1]), "field": fld, "data": data}
    payload.update(extra)
    return payload


def matrix_from_payload(payload):
    data = np.asarray(payload["data"], dtype=float)
    if payload.get("field", "real") == "complex":
        M = data[..., 0] + 1j * data[..., 1]
    else:
        M = data
    M = M.reshape(int(payload["n"]), int(payload["N"]))
    return M


def frame_to_json(frame: Frame) -> str:
    return json.dumps(matrix_to_payload(frame.matrix, tight=bool(frame.tight)))


def frame_from_json(text: str) -> Frame:
    payload = json.loads(text)
    return Frame(matrix_from_payload(payload), tight=bool(payload.get("tight", False)))


def export_csv(path, M):
    """Write a real matrix row-major with ``%.17g`` (lossless round-trip)."""
    M = np.atleast_2d(np.asarray(M))
    if np.iscomplexobj(M):
        raise TypeError("CSV export supports real matrices only")
    np.savetxt(path, M, delimiter=",", fmt="%.17g")


def import_csv(path):
    return np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=2))
