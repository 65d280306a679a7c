"""Data generation, coverage Monte Carlo, BvM diagnostics and the rate audit."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .config import ExperimentConfig
from .credsets import diameter, ellipsoid_case1, ellipsoid_case2
from .fisher import (DegenerateFunctionalError, FunctionalSet, InformationBundle,
                     STABILITY_EXPONENT, information_bundle)
from .forward import ForwardModel, SolverError, forward_eval, linearized_at
from .posterior import (AdaptationError, Dataset, FunctionalPosterior, PriorSpec,
                        conjugate_draws, functional_moments, run_pcn)
from .spectral import Basis, Grid, SpectralField, bump, project

MAX_FAILURE_FRACTION = 0.02


class DiagnosticUnavailableError(RuntimeError):
    """A simulation-only diagnostic was requested without the stored noise."""


class ReplicateFailureError(RuntimeError):
    """Too many coverage replicates failed."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


# ---------------------------------------------------------------------------
# experiment assembly


@dataclass(frozen=True)
class Experiment:
    config: ExperimentConfig
    basis: Basis
    model: ForwardModel
    theta0: SpectralField
    fs: FunctionalSet
    prior: PriorSpec
    psi_true: np.ndarray


def _psi_field(spec, basis: Basis, d: int):
    if spec.kind == "bump":
        return bump(spec.center, spec.width, d)
    return SpectralField(basis, _padded(spec.coeffs, basis.D))


def _padded(coeffs, D: int) -> np.ndarray:
    c = np.zeros(D)
    n = min(D, len(coeffs))
    c[:n] = np.asarray(coeffs[:n], dtype=float)
    return c


@lru_cache(maxsize=8)
def build(config: ExperimentConfig) -> Experiment:
    """Turn a configuration into basis, model, truth and functionals."""
    d = config.d
    basis = Basis(d, config.D)
    grid = Grid.for_basis(basis, config.grid_m or None)
    if config.model == "linear":
        model = ForwardModel.linear(grid, config.sigma0)
    elif config.model == "darcy":
        model = ForwardModel.darcy(grid, config.darcy_f, config.darcy_g, config.sigma0)
    else:
        model = ForwardModel.schrodinger(grid, config.schrodinger_g, config.sigma0)

    if config.theta0_kind == "bump":
        big = Basis(d, 4 * config.D)
        theta0 = project(bump(config.theta0_center, config.theta0_width, d), big)
    elif config.theta0_kind == "zero":
        theta0 = SpectralField.zeros(basis)
    else:
        if len(config.theta0_coeffs) > config.D:
            raise ValueError("theta0.coeffs longer than D")
        theta0 = SpectralField(basis, _padded(config.theta0_coeffs, config.D))

    fs = FunctionalSet([_psi_field(p, basis, d) for p in config.psis])
    fs.check_independent(basis, grid)
    prior = PriorSpec(basis, config.alpha, config.N)
    psi_true = functional_truth(fs, theta0)
    return Experiment(config, basis, model, theta0, fs, prior, psi_true)


def functional_truth(fs: FunctionalSet, theta0: SpectralField) -> np.ndarray:
    """``Psi theta0`` using every available coefficient of ``theta0``."""
    return fs.values(theta0, theta0.basis)


# ---------------------------------------------------------------------------
# data


def generate_dataset(model: ForwardModel, theta0, N: int, sigma0: float,
                     rng: np.random.Generator) -> Dataset:
    """``X_i ~ U(0,1)^d``, ``Y_i = G_theta0(X_i) + eps_i`` with stored ``eps``."""
    d = model.grid.d
    X = rng.random((N, d))
    eps = sigma0 * rng.standard_normal(N)
    if N == 0:
        return Dataset(X, np.zeros(0), sigma0, eps)
    Y = forward_eval(model, theta0, X) + eps
    return Dataset(X, Y, sigma0, eps)


def centering_statistic(bundle: InformationBundle, theta0: SpectralField, fs: FunctionalSet,
                        data: Dataset, model: ForwardModel) -> np.ndarray:
    """Oracle centring ``Psi theta0 + (1/N) sum eps_i (I psi_bar)(X_i) / sigma0^2``."""
    if data.noise is None:
        raise DiagnosticUnavailableError("the centring statistic needs the simulated noise")
    truth = functional_truth(fs, theta0)
    if data.N == 0:
        return truth
    W = np.array([linearized_at(model, theta0, rep, data.points) for rep in bundle.representers])
    return truth + (W @ data.noise) / (data.N * model.sigma0 ** 2)


@dataclass
class DiagnosticsReport:
    pivot: np.ndarray
    z_mean: np.ndarray
    centering_gap: np.ndarray
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    pivot_deviation: float
    z_mean_max: float

    def to_dict(self) -> dict:
        return {
            "pivot": self.pivot.tolist(),
            "z_mean": self.z_mean.tolist(),
            "centering_gap": self.centering_gap.tolist(),
            "skewness": self.skewness.tolist(),
            "excess_kurtosis": self.excess_kurtosis.tolist(),
            "health": {"pivot_deviation": self.pivot_deviation, "z_mean_max": self.z_mean_max},
        }


def bvm_diagnostics(fp: FunctionalPosterior, bundle: InformationBundle,
                    psi_n: np.ndarray) -> DiagnosticsReport:
    """Moments of ``Z_N = sqrt(N) i_D^{1/2} (Psi theta_N - Psi_N)`` over the draws."""
    N = bundle.N
    root = bundle.iD_sqrt
    if not np.all(np.isfinite(root)):
        raise DegenerateFunctionalError("i_D is not available")
    pivot = N * root @ fp.sigma_hat @ root
    pivot = 0.5 * (pivot + pivot.T)
    Z = math.sqrt(N) * (fp.values - psi_n) @ root
    gap = math.sqrt(N) * root @ (fp.psi_hat - psi_n)
    z_mean = Z.mean(axis=0)
    return DiagnosticsReport(
        pivot, z_mean, gap,
        np.atleast_1d(stats.skew(Z, axis=0)),
        np.atleast_1d(stats.kurtosis(Z, axis=0)),
        float(np.max(np.abs(pivot - np.eye(pivot.shape[0])))),
        float(np.max(np.abs(z_mean))),
    )


# ---------------------------------------------------------------------------
# single fit


def replicate_seed(master_seed: int, r: int) -> int:
    """64-bit seed of replicate ``r``, a pure function of ``(master_seed, r)``."""
    ss = np.random.SeedSequence([int(master_seed), int(r)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class Fit:
    data: Dataset
    fp: FunctionalPosterior
    ellipsoid: object
    acceptance: float
    beta: float


def fit_once(exp: Experiment, seed: int) -> Fit:
    """Dataset, posterior and credible ellipsoid for one seed."""
    cfg = exp.config
    rng = np.random.default_rng(seed)
    data = generate_dataset(exp.model, exp.theta0, cfg.N, cfg.sigma0, rng)
    if cfg.model == "linear":
        samples = conjugate_draws(exp.prior, data, cfg.draws, rng)
    else:
        chain_seed = int(rng.integers(0, 2 ** 63))
        samples = run_pcn(exp.model, exp.prior, data, cfg.mcmc_steps, cfg.mcmc_burnin,
                          cfg.mcmc_beta, chain_seed)
    fp = functional_moments(samples, exp.fs, exp.basis, exp.model.grid)
    level = cfg.cred_level
    ell = ellipsoid_case1(fp, level) if cfg.cred_case == 1 else ellipsoid_case2(fp, level)
    return Fit(data, fp, ell, samples.acceptance_rate, samples.beta)


# ---------------------------------------------------------------------------
# coverage


@dataclass
class ReplicateRecord:
    replicate: int
    seed: int
    hit: bool
    r_n: float
    diameter: float
    psi_hat: np.ndarray
    psi_true: np.ndarray


@dataclass
class ReplicateFailure:
    replicate: int
    seed: int
    reason: str


@dataclass
class CoverageReport:
    records: list
    failures: list = field(default_factory=list)

    @property
    def coverage(self) -> float:
        if not self.records:
            return float("nan")
        return float(np.mean([r.hit for r in self.records]))

    @property
    def standard_error(self) -> float:
        n = len(self.records)
        c = self.coverage
        return math.sqrt(c * (1 - c) / n) if n else float("nan")

    @property
    def mean_diameter(self) -> float:
        return float(np.mean([r.diameter for r in self.records])) if self.records else float("nan")

    def to_csv(self) -> str:
        k = self.records[0].psi_hat.size if self.records else 0
        head = ["replicate", "seed", "hit", "r_n", "diameter"]
        head += [f"psi_hat_{i}" for i in range(1, k + 1)]
        head += [f"psi_true_{i}" for i in range(1, k + 1)]
        lines = [",".join(head)]
        for r in self.records:
            row = [str(r.replicate), str(r.seed), str(int(r.hit)), fmt(r.r_n), fmt(r.diameter)]
            row += [fmt(v) for v in r.psi_hat] + [fmt(v) for v in r.psi_true]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "coverage": self.coverage,
            "standard_error": self.standard_error,
            "mean_diameter": self.mean_diameter,
            "replicates": len(self.records),
            "failures": [{"replicate": f.replicate, "seed": f.seed, "reason": f.reason}
                         for f in self.failures],
        }


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _run_replicate(config: ExperimentConfig, r: int):
    exp = build(config)
    seed = replicate_seed(config.seed, r)
    try:
        fit = fit_once(exp, seed)
    except (SolverError, AdaptationError, DegenerateFunctionalError,
            np.linalg.LinAlgError) as exc:
        return ReplicateFailure(r, seed, f"{type(exc).__name__}: {exc}")
    ell = fit.ellipsoid
    return ReplicateRecord(r, seed, ell.contains(exp.psi_true), float(ell.radius),
                           diameter(ell), fit.fp.psi_hat.copy(), exp.psi_true.copy())


def _run_chunk(args):
    config, rs = args
    return [_run_replicate(config, r) for r in rs]


def coverage_study(config: ExperimentConfig, workers: Optional[int] = None) -> CoverageReport:
    """Frequentist coverage of the credible ellipsoid over ``config.replicates`` datasets.

    Replicate ``r`` depends only on ``(config.seed, r)``, so the report is
    identical for every worker count.
    """
    M = config.replicates
    build(config)
    workers = (os.cpu_count() or 1) if workers is None else max(1, int(workers))
    rs = list(range(1, M + 1))
    if workers == 1 or M == 1:
        results = _run_chunk((config, rs))
    else:
        chunks = [rs[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [(config, c) for c in chunks if c]))
        results = sorted((x for part in parts for x in part), key=lambda x: x.replicate)
    report = CoverageReport([x for x in results if isinstance(x, ReplicateRecord)],
                            [x for x in results if isinstance(x, ReplicateFailure)])
    if len(report.failures) > MAX_FAILURE_FRACTION * M:
        raise ReplicateFailureError(
            f"{len(report.failures)} of {M} replicates failed "
            f"(first: {report.failures[0].reason})", report)
    return report


def diameter_scaling_study(config: ExperimentConfig, Ds: Sequence[int]) -> list[tuple[int, float]]:
    """``(D, diameter * sqrt(N) / D^{3/d})`` for one fit per truncation level."""
    out = []
    for D in Ds:
        cfg = replace(config, D=int(D))
        fit = fit_once(build(cfg), replicate_seed(cfg.seed, 0))
        diam = diameter(fit.ellipsoid)
        out.append((int(D), diam * math.sqrt(cfg.N) / D ** (3.0 / cfg.d)))
    return out


# ---------------------------------------------------------------------------
# audit


@dataclass(frozen=True)
class RateBundle:
    alpha: float
    d: int
    N: int
    delta_G: float
    s_N: float
    delta_H: float
    delta_Theta: float
    sigma_N: float
    g_N: float
    r_N: float
    entropy_exponent: float
    u_max: float
    kappa: float

    def J_N(self, t: float) -> float:
        """Entropy integral bound ``t^{1 - d/(2 alpha - 2)}``."""
        return t ** self.entropy_exponent


def rate_bundle(alpha: float, d: int, N: int, variant: str = "darcy") -> RateBundle:
    if N < 1:
        raise ValueError("N must be at least 1")
    dG = N ** (-alpha / (2 * alpha + d))
    dH = dG ** ((alpha - 1) / (alpha + 1))
    return RateBundle(
        alpha=alpha, d=d, N=N,
        delta_G=dG,
        s_N=N * dG ** 2,
        delta_H=dH,
        delta_Theta=dH ** ((alpha - 1) / (alpha + 1)),
        sigma_N=dH ** (2 * (alpha - 2) / alpha),
        g_N=1.0,
        r_N=1.0,
        entropy_exponent=1 - d / (2 * alpha - 2),
        u_max=d ** 2 / ((4 * alpha + 2 * d) * (alpha + 6)),
        kappa=STABILITY_EXPONENT.get(variant, 6.0) / d,
    )


@dataclass
class AuditReport:
    rates: RateBundle
    table: list

    def to_dict(self) -> dict:
        r = self.rates
        rates = {k: getattr(r, k) for k in r.__dataclass_fields__}
        return {"rates": rates, "table": self.table}

    def format(self) -> str:
        lines = [f"{'quantity':<40} {'value':>14}  flag"]
        r = self.rates
        for key in ("delta_G", "s_N", "delta_H", "delta_Theta", "sigma_N", "g_N", "r_N",
                    "entropy_exponent", "u_max", "kappa"):
            lines.append(f"{key:<40} {getattr(r, key):>14.6g}")
        for row in self.table:
            lines.append(f"{row['name']:<40} {row['value']:>14.6g}  {row['flag']}")
        return "\n".join(lines)


def condition_audit(alpha: float, d: int, N: int, D: Optional[int] = None,
                    lambda_min: Optional[float] = None, variant: str = "darcy") -> AuditReport:
    """Rates at ``(N, D, alpha, d)`` and the growth conditions built on them.

    A row passes when its value lies below one.  Without ``lambda_min`` the
    stability lower bound ``D^{-kappa}`` (unit constant) is used as a proxy.
    """
    rates = rate_bundle(alpha, d, N, variant)
    table = []

    def row(name, value, passed=None, **extra):
        ok = value < 1 if passed is None else passed
        table.append({"name": name, "value": float(value), "flag": "pass" if ok else "warn", **extra})

    row("N*sigma_N^(3/2)", N * rates.sigma_N ** 1.5)
    sd = rates.s_N * rates.delta_G
    row("s_N*delta_G", sd, sd <= 1)
    if D is not None:
        proxy = lambda_min is None
        lam = D ** (-rates.kappa) if proxy else lambda_min
        row("D^(alpha/d)/(sqrt(s_N)*lambda_min)", D ** (alpha / d) / (math.sqrt(rates.s_N) * lam),
            lambda_min_proxy=proxy)
        u = math.log(D) / math.log(N) if N > 1 else float("inf")
        row("u=log(D)/log(N) / u_max", u / rates.u_max)
    row("14/alpha (alpha >= 14 required)", 14 / alpha, alpha >= 14)
    return AuditReport(rates, table)


# ---------------------------------------------------------------------------
# manufactured-solution checks


def _manufactured(d: int):
    """Named ``(theta, source, boundary, exact, kind)`` problems with known solutions."""
    pi = np.pi
    if d == 1:
        x = lambda p: p[:, 0]
        return {
            "darcy_const_sine": (0.0, lambda p: -pi ** 2 * np.sin(pi * x(p)), 0.0,
                                 lambda p: np.sin(pi * x(p)), "darcy"),
            "darcy_exp_sine": (lambda p: x(p),
                               lambda p: np.exp(x(p)) * (pi * np.cos(pi * x(p))
                                                         - pi ** 2 * np.sin(pi * x(p))),
                               0.0, lambda p: np.sin(pi * x(p)), "darcy"),
            "schrodinger_cosh": (math.log(0.5), None, 1.0,
                                 lambda p: np.cosh(x(p) - 0.5) / np.cosh(0.5), "schrodinger"),
        }
    s = lambda p: np.sin(pi * p[:, 0]) * np.sin(pi * p[:, 1])
    c = lambda p: np.cosh(p[:, 0] - 0.5) * np.cosh(p[:, 1] - 0.5) / np.cosh(0.5) ** 2
    return {
        "darcy_const_sine": (0.0, lambda p: -2 * pi ** 2 * s(p), 0.0, s, "darcy"),
        "schrodinger_cosh": (0.0, None, c, c, "schrodinger"),
    }


def pde_check(d: int = 1, ms: Sequence[int] = (15, 31, 63, 127)) -> list[dict]:
    """Max-norm errors of manufactured problems under grid halving.

    Each row carries ``ratio``, the error reduction factor from the previous
    (twice coarser) grid; second order gives ratios near 4.
    """
    from .forward import darcy_solve, schrodinger_solve

    rows = []
    for name, (theta, f, g, exact, kind) in _manufactured(d).items():
        prev = None
        for m in ms:
            grid = Grid(d, m)
            if kind == "darcy":
                sol = darcy_solve(theta, grid, f, g)
            else:
                sol = schrodinger_solve(theta, grid, g)
            err = float(np.max(np.abs(sol.full - grid.sample(exact, closed=True))))
            rows.append({"problem": name, "m": m, "h": grid.h, "max_error": err,
                         "residual": sol.residual,
                         "ratio": float("nan") if prev is None else prev / err})
            prev = err
    return rows
