"""Command line entry point: ``dictphase gen|recover|certify|sweep|selftest``.

Exit codes: 0 when every check passed, 2 on a bound or oracle violation,
1 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import certify, harness, lemmas
from ._rng import derive_seed
from .errors import BudgetExceeded, DomainError, PreconditionError, ShapeError
from .frames import frame_from_json, frame_to_json, make_identity_frame, make_random_tight_frame
from .measure import (MeasurementEnsemble, PhaselessObservation, add_bounded_noise,
                      ensemble_from_json, ensemble_to_json, gaussian_ensemble, phaseless_forward)
from .solver import SolverConfig, pr_l1_analysis

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _emit(text, out, name):
    if out is None:
        print(text)
        return
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, name), "w") as fh:
        fh.write(text)
    print(os.path.join(out, name))


def cmd_gen(args):
    seed = args.seed
    if args.frame_kind == "identity":
        frame = make_identity_frame(args.n)
    else:
        frame = make_random_tight_frame(args.n, args.N, derive_seed(seed, 1))
    rng = np.random.default_rng(derive_seed(seed, 2))
    N = frame.matrix.shape[1]
    z0 = np.zeros(N)
    S = rng.permutation(N)[: args.k]
    z0[S] = rng.standard_normal(args.k)
    x0 = frame.matrix @ z0
    ens = gaussian_ensemble(args.m, args.n, derive_seed(seed, 3))
    if args.scale:
        ens = MeasurementEnsemble(ens.matrix / math.sqrt(args.m), ens.seed, ens.generator_version)
    obs = add_bounded_noise(phaseless_forward(ens, x0), args.eps, derive_seed(seed, 4), truth=x0)
    os.makedirs(args.out, exist_ok=True)
    files = {"frame.json": frame_to_json(frame), "ensemble.json": ensemble_to_json(ens),
             "observation.json": obs.to_json(),
             "truth.json": json.dumps({"x0": x0.tolist(), "z0": z0.tolist(), "seed": seed})}
    for name, text in files.items():
        with open(os.path.join(args.out, name), "w") as fh:
            fh.write(text)
    print(args.out)
    return EXIT_OK


def cmd_recover(args):
    frame = frame_from_json(_read(args.frame))
    ens = ensemble_from_json(_read(args.ensemble))
    obs = PhaselessObservation.from_json(_read(args.observation))
    cfg = SolverConfig.from_dict(json.loads(_read(args.config))) if args.config else SolverConfig()
    if args.seed is not None:
        cfg = SolverConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    res = pr_l1_analysis(ens, obs, frame, cfg)
    _emit(res.to_json(), args.out, "result.json")
    return EXIT_OK if res.converged else EXIT_VIOLATION


def cmd_certify(args):
    if args.drip is None and args.sdrip is None and args.nsp is None:
        raise UsageError("give at least one of --drip, --sdrip, --nsp")
    frame = frame_from_json(_read(args.frame))
    A = ensemble_from_json(_read(args.ensemble))
    reports = {}
    code = EXIT_OK
    if args.drip is not None:
        if args.montecarlo:
            rep = certify.drip_montecarlo(A, frame, args.drip, args.montecarlo, args.seed)
        else:
            rep = certify.drip_exact(A, frame, args.drip, budget=args.budget)
        reports["drip"] = rep.to_dict()
    if args.sdrip is not None:
        if args.montecarlo:
            rep = certify.sdrip_montecarlo(A, frame, args.sdrip, args.montecarlo, args.seed)
        else:
            rep = certify.sdrip_exact(A, frame, args.sdrip, budget=args.budget)
        reports["sdrip"] = rep.to_dict()
    if args.nsp is not None:
        kw = {} if args.budget is None else {"budget": args.budget}
        rep = certify.nsp_real_check(A, frame, args.nsp, seed=args.seed, **kw)
        reports["nsp"] = rep.to_dict()
        if rep.status == "counterexample":
            code = EXIT_VIOLATION
    _emit(json.dumps(reports, indent=2, default=certify._json_default), args.out, "certify.json")
    return code


def cmd_sweep(args):
    cfg = harness.ExperimentConfig.from_json(_read(args.config))
    if args.seed is not None:
        cfg = harness.ExperimentConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    records, summary = harness.run_sweep(cfg, jobs=args.jobs)
    audit = None
    code = EXIT_OK
    if args.audit:
        audit = harness.audit_bound(cfg, records)
        summary["audit"] = {k: v for k, v in audit.items() if k != "records"}
        if audit["violations"]:
            code = EXIT_VIOLATION
    harness.write_outputs(args.out, cfg, records, summary, audit)
    print(json.dumps(summary.get("audit", {"rows": summary["rows"]})))
    return code


def cmd_selftest(args):
    rep = lemmas.selftest(args.polytope_trials, args.power_sum_trials, args.lemma_trials,
                          args.seed)
    _emit(json.dumps(rep, indent=2), args.out, "selftest.json")
    return EXIT_OK if rep["passed"] else EXIT_VIOLATION


def build_parser():
    p = _Parser(prog="dictphase", description="Sparse phase retrieval in redundant tight frames.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a seeded instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--N", type=int)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--k", type=int, default=1)
    g.add_argument("--eps", type=float, default=0.0)
    g.add_argument("--frame-kind", choices=harness.FRAME_KINDS, default="random-tight")
    g.add_argument("--no-scale", dest="scale", action="store_false",
                   help="keep the unscaled Gaussian draw (default divides by sqrt(m))")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("recover", help="solve one instance")
    r.add_argument("--frame", required=True)
    r.add_argument("--ensemble", required=True)
    r.add_argument("--observation", required=True)
    r.add_argument("--config", help="SolverConfig JSON")
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.set_defaults(func=cmd_recover)

    c = sub.add_parser("certify", help="DRIP, S-DRIP and null space property checks")
    c.add_argument("--frame", required=True)
    c.add_argument("--ensemble", required=True)
    c.add_argument("--drip", type=int)
    c.add_argument("--sdrip", type=int)
    c.add_argument("--nsp", type=int)
    c.add_argument("--budget", type=int)
    c.add_argument("--montecarlo", type=int, default=0, metavar="TRIALS",
                   help="sample instead of enumerating (DRIP and S-DRIP)")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_certify)

    s = sub.add_parser("sweep", help="run an experiment grid")
    s.add_argument("--config", required=True, help="ExperimentConfig JSON")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--audit", action="store_true", help="also audit the stability bound")
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("selftest", help="randomized lemma oracles")
    t.add_argument("--polytope-trials", type=int, default=1000)
    t.add_argument("--power-sum-trials", type=int, default=10000)
    t.add_argument("--lemma-trials", type=int, default=100)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "gen":
        if args.N is None:
            args.N = args.n
        if args.k < 0 or args.k > args.N or args.m < 1 or args.eps < 0:
            parser.error("need 0 <= k <= N, m >= 1, eps >= 0")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except (UsageError, ValueError, ShapeError, DomainError, BudgetExceeded,
            PreconditionError, KeyError, json.JSONDecodeError) as exc:
        print(f"dictphase: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
