"""Command-line driver.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load, to_mapping
from .credsets import diameter
from .fisher import DegenerateFunctionalError, information_bundle, information_matrix
from .forward import SolverError
from .harness import (ReplicateFailureError, bvm_diagnostics, build, centering_statistic,
                      condition_audit, coverage_study, fit_once, fmt, pde_check,
                      replicate_seed)
from .io import dumps, write_outputs
from .posterior import AdaptationError

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

NUMERIC_ERRORS = (SolverError, DegenerateFunctionalError, AdaptationError,
                  ReplicateFailureError, np.linalg.LinAlgError, FloatingPointError)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rbvm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, needs_config in (("simulate", True), ("coverage", True), ("diagnose", True),
                               ("audit", True), ("pde-check", False)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=needs_config)
        sp.add_argument("--out", default="results")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--replicates", type=int)
        sp.add_argument("--workers", type=int)
    return p


def _load_config(args) -> ExperimentConfig:
    cfg = load(args.config) if args.config else ExperimentConfig()
    over = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        over["seed"] = args.seed
    if args.replicates is not None:
        over["replicates"] = args.replicates
    return replace(cfg, **over) if over else cfg


def _audit_for(cfg: ExperimentConfig, lambda_min=None):
    if cfg.N < 1:
        return None
    return condition_audit(cfg.alpha, cfg.d, cfg.N, cfg.D, lambda_min, cfg.model)


def _meta(cfg, command, started, audit, extra=None) -> str:
    meta = {
        "command": command,
        "config": to_mapping(cfg),
        "version": __version__,
        "wall_time": time.perf_counter() - started,
        "audit": None if audit is None else audit.to_dict(),
    }
    if extra:
        meta.update(extra)
    return dumps(meta) + "\n"


def _simulate(cfg, args, started):
    exp = build(cfg)
    fit = fit_once(exp, replicate_seed(cfg.seed, 0))
    ell = fit.ellipsoid
    result = {
        "psi_hat": fit.fp.psi_hat, "sigma_hat": fit.fp.sigma_hat, "psi_true": exp.psi_true,
        "r_n": ell.radius, "diameter": diameter(ell), "calibration": ell.calibration,
        "degenerate": ell.degenerate, "hit": ell.contains(exp.psi_true),
        "acceptance_rate": fit.acceptance, "beta": fit.beta,
    }
    print(f"psi_hat = {fit.fp.psi_hat}, R_N = {ell.radius:.6g}, hit = {result['hit']}")
    return {"simulate.json": dumps(result) + "\n",
            "meta.json": _meta(cfg, "simulate", started, _audit_for(cfg))}


def _coverage(cfg, args, started):
    report = coverage_study(cfg, workers=args.workers)
    print(f"coverage = {report.coverage:.4f} +/- {report.standard_error:.4f} "
          f"over {len(report.records)} replicates ({len(report.failures)} failed)")
    return {"coverage.csv": report.to_csv(),
            "meta.json": _meta(cfg, "coverage", started, _audit_for(cfg),
                               {"summary": report.summary()})}


def _diagnose(cfg, args, started):
    exp = build(cfg)
    fit = fit_once(exp, replicate_seed(cfg.seed, 0))
    bundle = information_bundle(exp.model, exp.theta0, exp.basis, exp.fs, max(cfg.N, 1))
    psi_n = centering_statistic(bundle, exp.theta0, exp.fs, fit.data, exp.model)
    rep = bvm_diagnostics(fit.fp, bundle, psi_n)
    audit = _audit_for(cfg, bundle.eigs[0])
    out = rep.to_dict()
    out.update({"psi_n": psi_n, "iD_inv": bundle.iD_inv, "information_eigs": list(bundle.eigs),
                "audit": None if audit is None else audit.to_dict()})
    print(f"pivot deviation = {rep.pivot_deviation:.4g}, max |Z mean| = {rep.z_mean_max:.4g}")
    return {"diagnostics.json": dumps(out) + "\n",
            "meta.json": _meta(cfg, "diagnose", started, audit)}


def _audit(cfg, args, started):
    exp = build(cfg)
    lam = float(np.linalg.eigvalsh(information_matrix(exp.model, exp.theta0, exp.basis))[0])
    audit = _audit_for(cfg, lam)
    if audit is None:
        raise ConfigError("the audit needs N >= 1")
    print(audit.format())
    return {"audit.json": dumps(audit.to_dict()) + "\n",
            "meta.json": _meta(cfg, "audit", started, audit)}


def _pde_check(cfg, args, started):
    rows = pde_check(cfg.d)
    cols = ["problem", "m", "h", "max_error", "ratio", "residual"]
    lines = [",".join(cols)]
    print(f"{'problem':<20} {'m':>5} {'max_error':>12} {'ratio':>8}")
    for r in rows:
        lines.append(",".join(str(r[c]) if c in ("problem", "m") else fmt(r[c]) for c in cols))
        print(f"{r['problem']:<20} {r['m']:>5} {r['max_error']:>12.4e} {r['ratio']:>8.4f}")
    return {"pde_check.csv": "\n".join(lines) + "\n",
            "meta.json": _meta(cfg, "pde-check", started, None)}


COMMANDS = {"simulate": _simulate, "coverage": _coverage, "diagnose": _diagnose,
            "audit": _audit, "pde-check": _pde_check}


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    started = time.perf_counter()
    try:
        cfg = _load_config(args)
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be positive")
        files = COMMANDS[args.command](cfg, args, started)
        write_outputs(args.out, files)
    except (ConfigError, OSError, ValueError) as exc:
        if isinstance(exc, NUMERIC_ERRORS):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
