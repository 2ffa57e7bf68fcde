"""Seeded experiment runner: trials, sweeps, bound audits and report files.

Every random object of a trial is drawn from a stream keyed by
``(seed, trial_index, role)``.  The measurement matrix does not depend on
``m``: a trial at a larger ``m`` sees the same first rows plus new ones,
and the frame and signal are shared across the whole ``(m, eps)`` grid.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from . import certify, lemmas
from ._rng import GENERATOR_VERSION, derive_seed, make_rng
from .errors import PreconditionError
from .frames import analyze, best_k_term_error, l1_norm, make_identity_frame, make_random_tight_frame
from .measure import add_bounded_noise, gaussian_ensemble, phaseless_forward, row_restrict
from .solver import (SolverConfig, distance_mod_sign, oracle_branch_and_bound,
                     oracle_sign_enumeration, pr_l1_analysis, sign_pattern)

FRAME_KINDS = ("random-tight", "identity")
ORACLE_ENUM_MAX_M = 16

_ROLE_FRAME, _ROLE_SIGNAL, _ROLE_A, _ROLE_NOISE, _ROLE_SOLVER = 1, 2, 3, 4, 5


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep definition.  ``t`` is the oversampling factor used by audits."""

    n: int
    N: int
    k: int
    m_grid: tuple = (8,)
    eps_grid: tuple = (0.0,)
    trials: int = 1
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    success_threshold: float = 1e-4
    frame_kind: str = "random-tight"
    t: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        object.__setattr__(self, "eps_grid", tuple(float(e) for e in self.eps_grid))
        if isinstance(self.solver, dict):
            object.__setattr__(self, "solver", SolverConfig.from_dict(self.solver))
        if not self.m_grid or not self.eps_grid:
            raise ValueError("m_grid and eps_grid must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.success_threshold > 0:
            raise ValueError("success_threshold must be positive")
        if self.frame_kind not in FRAME_KINDS:
            raise ValueError(f"frame_kind must be one of {FRAME_KINDS}")
        if not 1 <= self.n <= self.N:
            raise ValueError("need 1 <= n <= N")
        if self.frame_kind == "identity" and self.N != self.n:
            raise ValueError("identity frame needs N == n")
        if not 0 <= self.k <= self.N:
            raise ValueError("need 0 <= k <= N")
        if any(m < 1 for m in self.m_grid) or any(e < 0 for e in self.eps_grid):
            raise ValueError("m must be >= 1 and eps >= 0")

    def to_dict(self):
        d = asdict(self)
        d["m_grid"] = list(self.m_grid)
        d["eps_grid"] = list(self.eps_grid)
        d["solver"] = self.solver.to_dict()
        d["generator_version"] = GENERATOR_VERSION
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("generator_version", None)
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class TrialRecord:
    """One solved instance.  ``runtime`` is wall-clock and excluded from CSV output."""

    n: int
    N: int
    k: int
    m: int
    eps: float
    trial: int
    trial_seed: int
    frame_kind: str
    success_threshold: float
    error: float
    x0_norm: float
    objective: float
    objective_x0: float
    residual: float
    noise_norm: float
    sigma_k: float
    success: bool
    converged: bool
    status: str
    inner_iters: int
    outer_iters: int
    bound: float = float("nan")
    runtime: float = field(default=float("nan"), compare=False)
    instance: Optional[dict] = field(default=None, repr=False, compare=False)


CSV_COLUMNS = [f.name for f in fields(TrialRecord) if f.name not in ("runtime", "instance")]


def trial_seed(cfg: ExperimentConfig, trial_index: int) -> int:
    return derive_seed(cfg.seed, trial_index)


def make_instance(cfg: ExperimentConfig, trial_index: int, m: int):
    """Frame, coefficients, signal and ``1/sqrt(m)``-scaled ensemble of a trial."""
    ts = trial_seed(cfg, trial_index)
    if cfg.frame_kind == "identity":
        frame = make_identity_frame(cfg.n)
    else:
        frame = make_random_tight_frame(cfg.n, cfg.N, derive_seed(ts, _ROLE_FRAME))
    rng = make_rng(derive_seed(ts, _ROLE_SIGNAL))
    z0 = np.zeros(cfg.N)
    if cfg.k > 0:
        S = rng.permutation(cfg.N)[: cfg.k]
        z0[S] = rng.standard_normal(cfg.k)
    x0 = frame.matrix @ z0
    A = gaussian_ensemble(m, cfg.n, derive_seed(ts, _ROLE_A)).matrix / math.sqrt(m)
    return ts, frame, z0, x0, A


def run_trial(cfg: ExperimentConfig, trial_index: int, m: Optional[int] = None,
              eps: Optional[float] = None, keep_instance: bool = False) -> TrialRecord:
    """Generate, observe and solve one instance; deterministic per ``(cfg, trial_index, m, eps)``.

    ``m`` and ``eps`` default to the first grid values.
    """
    m = cfg.m_grid[0] if m is None else int(m)
    eps = cfg.eps_grid[0] if eps is None else float(eps)
    t0 = time.perf_counter()
    ts, frame, z0, x0, A = make_instance(cfg, trial_index, m)
    clean = phaseless_forward(A, x0)
    obs = add_bounded_noise(clean, eps, derive_seed(ts, _ROLE_NOISE, m), truth=x0)
    scfg = replace(cfg.solver, seed=derive_seed(ts, _ROLE_SOLVER) & 0x7FFFFFFF)
    try:
        res = pr_l1_analysis(A, obs, frame, scfg)
        xh, status = res.estimate, res.status
        converged, inner, outer = res.converged, res.inner_iters, res.outer_iters
    except Exception as exc:  # recorded, never thrown
        xh = np.zeros(cfg.n)
        status, converged, inner, outer = f"error:{type(exc).__name__}", False, 0, 0
    err = distance_mod_sign(xh, x0)
    x0n = float(np.linalg.norm(x0))
    rec = TrialRecord(
        n=cfg.n, N=cfg.N, k=cfg.k, m=m, eps=eps, trial=trial_index, trial_seed=ts,
        frame_kind=cfg.frame_kind, success_threshold=cfg.success_threshold,
        error=err, x0_norm=x0n,
        objective=l1_norm(analyze(frame, xh)), objective_x0=l1_norm(analyze(frame, x0)),
        residual=float(np.linalg.norm(np.abs(A @ xh) - obs.b)),
        noise_norm=obs.noise_norm, sigma_k=best_k_term_error(analyze(frame, x0), max(cfg.k, 0)),
        success=bool(err <= cfg.success_threshold * x0n),
        converged=bool(converged), status=status, inner_iters=int(inner), outer_iters=int(outer),
    )
    rec.runtime = time.perf_counter() - t0
    if keep_instance:
        rec.instance = {"A": A, "x0": x0, "x_hat": xh, "b": obs.b, "frame": frame}
    return rec


def _task(args):
    cfg, i, m, eps, keep = args
    return run_trial(cfg, i, m, eps, keep)


def sweep_tasks(cfg: ExperimentConfig, keep_instance=False):
    return [(cfg, i, m, e, keep_instance)
            for m in cfg.m_grid for e in cfg.eps_grid for i in range(cfg.trials)]


def summarize(cfg: ExperimentConfig, records):
    cells = []
    for m in cfg.m_grid:
        for e in cfg.eps_grid:
            rs = [r for r in records if r.m == m and r.eps == e]
            if not rs:
                continue
            errs = np.array([r.error for r in rs])
            cells.append({
                "m": m, "eps": e, "trials": len(rs),
                "successes": int(sum(r.success for r in rs)),
                "success_rate": float(np.mean([r.success for r in rs])),
                "median_error": float(np.median(errs)),
                "converged_rate": float(np.mean([r.converged for r in rs])),
            })
    return {"rows": len(records), "cells": cells, "generator_version": GENERATOR_VERSION}


def run_sweep(cfg: ExperimentConfig, jobs: int = 1, keep_instance: bool = False):
    """All ``(m, eps, trial)`` combinations, in grid order regardless of ``jobs``."""
    tasks = sweep_tasks(cfg, keep_instance)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [_task(t) for t in tasks]
    return records, summarize(cfg, records)


def monotone_in_m(summary, eps: float = 0.0, slack: float = 0.1) -> bool:
    """Success rate nondecreasing in ``m`` up to a one-sided ``slack``."""
    rates = [c["success_rate"] for c in sorted(summary["cells"], key=lambda c: c["m"])
             if c["eps"] == eps]
    return all(b >= a - slack for a, b in zip(rates, rates[1:]))


# -- bound audit ---------------------------------------------------------------

def _oracle_confirm(A, b, frame, eps, x_hat, node_budget):
    """Return ``(confirmed, oracle_objective, method)`` for a solver estimate."""
    obj = l1_norm(analyze(frame, x_hat))
    tol = 1e-6 * max(1.0, obj)
    if eps == 0 and A.shape[0] <= ORACLE_ENUM_MAX_M:
        orc = oracle_sign_enumeration(A, b, frame)
        return obj <= orc.objective + tol, orc.objective, "enumeration"
    orc = oracle_branch_and_bound(A, b, frame, eps, incumbent=x_hat, node_budget=node_budget)
    lb = orc.extras["lower_bound"]
    return bool(orc.extras["certified"] and obj <= lb + tol), lb, "branch-and-bound"


def audit_record(cfg: ExperimentConfig, rec: TrialRecord, node_budget: int = 20000):
    """Bound audit of one record (regenerates the instance if not attached)."""
    inst = rec.instance
    if inst is None:
        inst = run_trial(cfg, rec.trial, rec.m, rec.eps, keep_instance=True).instance
    A, x0, xh, b, frame = inst["A"], inst["x0"], inst["x_hat"], inst["b"], inst["frame"]
    k = cfg.k
    out = {"trial": rec.trial, "m": rec.m, "eps": rec.eps, "error": rec.error}
    if k < 1 or not np.any(x0):
        out.update(covered=False, reason="k=0", confirmed=True, violation=False)
        return out
    confirmed, orc_obj, method = _oracle_confirm(A, b, frame, rec.eps, xh, node_budget)
    out.update(confirmed=bool(confirmed), oracle_objective=float(orc_obj), oracle=method)
    agree = sign_pattern(A @ xh) == sign_pattern(A @ x0)
    T = np.flatnonzero(agree)
    ref = x0
    if 2 * T.size < A.shape[0]:
        T, ref = np.flatnonzero(~agree), -x0
    AT = row_restrict(A, T).matrix
    order = lemmas.drip_order(cfg.t, k)
    dT = certify.drip_exact(AT, frame, order).delta
    dfull = certify.drip_exact(A, frame, order).delta
    cap = certify.delta_ceiling(cfg.t)
    rho = max(0.0, l1_norm(analyze(frame, xh)) - l1_norm(analyze(frame, x0)))
    eps_T = float(np.linalg.norm(AT @ (xh - ref)))
    out.update(T_size=int(T.size), delta_T=dT, delta_full=dfull, order=order, rho=rho,
               eps_T=eps_T, sigma_k=rec.sigma_k, covered=bool(dT < cap))
    if dT >= cap:
        out.update(reason="inadmissible-delta", violation=False)
        return out
    c = certify.stability_constants(dT, cfg.t)
    out.update(c1=c.c1, c2=c.c2,
               bound_stated=certify.error_bound(c, rec.eps, rec.sigma_k, k, 0.0))
    try:
        lb = lemmas.check_lemma_bound(AT, frame, ref, xh, rho, eps_T, cfg.t, dT, k)
        out.update(bound=lb.bound, holds=bool(lb.holds))
    except PreconditionError as exc:
        out.update(bound=float("nan"), holds=None, reason=f"refused:{exc.clause}")
    out["violation"] = bool(confirmed and out.get("holds") is False)
    out["stated_form_violation"] = bool(confirmed and rec.error > out["bound_stated"]
                                         * (1 + 1e-12) + 1e-12)
    return out


def audit_bound(cfg: ExperimentConfig, records, node_budget: int = 20000):
    """Check the stability bound on every oracle-confirmed record.

    For each record the rows are split by sign agreement between ``x_hat``
    and ``x0``; the larger side ``T`` (with ``x0`` negated when that is
    the disagreeing side) gives the DRIP constant of ``A_T`` at order
    ``ceil(t*k)``.  The bound uses the measured ``||A_T(x_hat -+ x0)||`` and
    ``rho = max(0, ||D*x_hat||_1 - ||D*x0||_1)``; the form with the stated
    ``eps`` is reported alongside.  Records not confirmed globally optimal
    are excluded and counted.
    """
    rows = [audit_record(cfg, r, node_budget) for r in records]
    for rec, row in zip(records, rows):
        if row.get("confirmed") and row.get("covered") and "bound" in row:
            rec.bound = float(row["bound"])
    confirmed = [r for r in rows if r.get("confirmed")]
    return {
        "total": len(rows),
        "oracle_confirmed": len(confirmed),
        "excluded": len(rows) - len(confirmed),
        "covered": sum(1 for r in confirmed if r.get("covered")),
        "not_covered": sum(1 for r in confirmed if not r.get("covered")),
        "refused": sum(1 for r in confirmed if str(r.get("reason", "")).startswith("refused")),
        "violations": sum(1 for r in rows if r.get("violation")),
        "stated_form_violations": sum(1 for r in rows if r.get("stated_form_violation")),
        "t": cfg.t,
        "records": rows,
    }


# -- output files --------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def write_records_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


def read_records_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _json_safe(o):
    if isinstance(o, dict):
        return {k: _json_safe(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_json_safe(v) for v in o]
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return o


def write_outputs(out_dir, cfg: ExperimentConfig, records, summary, audit=None):
    os.makedirs(out_dir, exist_ok=True)
    write_records_csv(os.path.join(out_dir, "records.csv"), records)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(_json_safe(summary), fh, indent=2)
    with open(os.path.join(out_dir, "config-echo.json"), "w") as fh:
        fh.write(cfg.to_json())
    if audit is not None:
        with open(os.path.join(out_dir, "audit.json"), "w") as fh:
            json.dump(_json_safe(audit), fh, indent=2)
