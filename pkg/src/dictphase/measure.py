"""Sensing ensembles and phaseless observations.

Entries are drawn N(0, 1) without ``1/sqrt(m)`` scaling; callers that need
normalized ensembles divide explicitly (see :func:`scaled`).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._rng import GENERATOR_VERSION, make_rng
from .errors import ShapeError
from .frames import matrix_from_payload, matrix_to_payload

_MAX_NOISE_REPAIRS = 16


@dataclass(frozen=True, eq=False)
class MeasurementEnsemble:
    """Dense real ``m x n`` sensing matrix with provenance.

    ``rows`` records the original row indices when the ensemble is a view
    produced by :func:`row_restrict`.
    """

    matrix: np.ndarray
    seed: Optional[int] = None
    generator_version: str = GENERATOR_VERSION
    rows: Optional[tuple] = None

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float, copy=True)
        if A.ndim != 2:
            raise ShapeError(f"ensemble matrix must be 2-D, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("ensemble entries must be finite")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    def __repr__(self):
        return f"MeasurementEnsemble(m={self.m}, n={self.n}, seed={self.seed})"


def as_matrix(A) -> np.ndarray:
    """Accept either an ensemble or a plain array."""
    if isinstance(A, MeasurementEnsemble):
        return A.matrix
    return np.atleast_2d(np.asarray(A))


def gaussian_ensemble(m: int, n: int, seed: int) -> MeasurementEnsemble:
    """i.i.d. standard-normal ``m x n`` ensemble.

    Rows are filled in row-major order from one stream, so the first ``m'``
    rows of an ``(m, n)`` draw equal the ``(m', n)`` draw with the same seed.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    G = make_rng(seed).standard_normal((m, n))
    return MeasurementEnsemble(G, seed=seed)


def scaled(A: MeasurementEnsemble, factor: float) -> MeasurementEnsemble:
    return MeasurementEnsemble(A.matrix * factor, seed=A.seed,
                               generator_version=A.generator_version, rows=A.rows)


def phaseless_forward(A, x) -> np.ndarray:
    """Entrywise ``|<a_j, x>|``."""
    M = as_matrix(A)
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != M.shape[1]:
        raise ShapeError(f"x must have shape ({M.shape[1]},), got {x.shape}")
    return np.abs(M @ x)


@dataclass(frozen=True, eq=False)
class PhaselessObservation:
    """Magnitudes ``b = |A x0| + e`` with ``||e||_2 <= eps``.

    ``clean`` keeps the noiseless magnitudes when known, and ``truth`` an
    optional reference signal for experiment bookkeeping; neither is used by
    the solvers.
    """

    b: np.ndarray
    eps: float = 0.0
    seed: Optional[int] = None
    generator_version: str = GENERATOR_VERSION
    clean: Optional[np.ndarray] = field(default=None, repr=False)
    truth: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        b = np.array(self.b, dtype=float, copy=True).ravel()
        if np.any(b < 0) or not np.all(np.isfinite(b)):
            raise ValueError("magnitudes must be finite and nonnegative")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    @property
    def m(self) -> int:
        return self.b.shape[0]

    @property
    def noise_norm(self) -> float:
        if self.clean is None:
            return float("nan")
        return float(np.linalg.norm(self.b - self.clean))

    def to_json(self) -> str:
        return json.dumps({
            "b": self.b.tolist(),
            "eps": float(self.eps),
            "seed": self.seed,
            "generator_version": self.generator_version,
        })

    @classmethod
    def from_json(cls, text: str) -> "PhaselessObservation":
        d = json.loads(text)
        return cls(np.asarray(d["b"], dtype=float), float(d["eps"]), d.get("seed"),
                   d.get("generator_version", GENERATOR_VERSION))


def add_bounded_noise(b, eps: float, seed: int, truth=None) -> PhaselessObservation:
    """Perturb magnitudes by a random vector of norm at most ``eps``.

    The direction is Gaussian, the radius uniform on ``[0, eps]``.  Negative
    results are clipped to zero; clipping never lengthens the perturbation,
    but the budget is re-verified and, if rounding breaks it, the
    perturbation is shrunk and re-clipped.
    """
    b = np.asarray(b, dtype=float).ravel()
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if np.any(b < 0):
        raise ValueError("clean magnitudes must be nonnegative")
    if eps == 0 or b.size == 0:
        return PhaselessObservation(b, 0.0 if b.size == 0 else eps, seed, clean=b, truth=truth)
    rng = make_rng(seed)
    g = rng.standard_normal(b.size)
    radius = eps * rng.uniform()
    gn = np.linalg.norm(g)
    e = g * (radius / gn) if gn > 0 else np.zeros_like(g)
    obs = np.maximum(b + e, 0.0)
    for _ in range(_MAX_NOISE_REPAIRS):
        if np.linalg.norm(obs - b) <= eps:
            break
        e *= 0.5
        obs = np.maximum(b + e, 0.0)
    else:  # pragma: no cover - needs pathological rounding
        obs = b.copy()
    return PhaselessObservation(obs, eps, seed, clean=b, truth=truth)


def row_restrict(A, T) -> MeasurementEnsemble:
    """Rows of ``A`` indexed by ``T``, in ascending order."""
    M = as_matrix(A)
    idx = np.unique(np.asarray(list(T), dtype=int))
    if idx.size and (idx[0] < 0 or idx[-1] >= M.shape[0]):
        raise IndexError(f"row index out of range for m={M.shape[0]}")
    seed = A.seed if isinstance(A, MeasurementEnsemble) else None
    base = A.rows if isinstance(A, MeasurementEnsemble) and A.rows is not None else None
    rows = tuple(int(base[i]) if base is not None else int(i) for i in idx)
    return MeasurementEnsemble(M[idx].reshape(idx.size, M.shape[1]), seed=seed, rows=rows)


def ensemble_to_json(A: MeasurementEnsemble) -> str:
    return json.dumps(matrix_to_payload(A.matrix, tight=False, seed=A.seed,
                                        generator_version=A.generator_version))


def ensemble_from_json(text: str) -> MeasurementEnsemble:
    d = json.loads(text)
    return MeasurementEnsemble(matrix_from_payload(d), seed=d.get("seed"),
                               generator_version=d.get("generator_version", GENERATOR_VERSION))
