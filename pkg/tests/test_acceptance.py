"""Acceptance criteria, each run at its stated tolerance.

Every test reports one PASS/FAIL line through the ``criterion`` fixture;
the lines are repeated in the terminal summary.  All runs use sigma0 = 1.
"""
import math
import time

import numpy as np

from rbvm.config import ExperimentConfig, PsiSpec
from rbvm.credsets import chi2_cdf, chi2_quantile, diameter, ellipsoid_case2
from rbvm.fisher import (FunctionalSet, functional_jacobian, information_bundle,
                         information_matrix, renormalize, stability_curve)
from rbvm.forward import ForwardModel, linearize
from rbvm.harness import (build, condition_audit, coverage_study, diameter_scaling_study,
                          fit_once, generate_dataset, pde_check, replicate_seed)
from rbvm.posterior import (batch_means_se, conjugate_oracle, functional_moments,
                            moments_from_values, run_pcn)
from rbvm.spectral import Basis, Grid, SpectralField, bump

# x(1 - x) truncated to E_8: odd coefficients 4 sqrt(2) / (j pi)^3
PARABOLA_E8 = tuple(4 * math.sqrt(2) / (j * math.pi) ** 3 if j % 2 else 0.0 for j in range(1, 9))
E1_E2 = (PsiSpec(coeffs=(1.0,)), PsiSpec(coeffs=(0.0, 1.0)))

# regression constants frozen after the first recorded run (see notes)
DARCY_STABILITY_FLOOR = 0.25
SCHRODINGER_STABILITY_FLOOR = 0.025
DARCY_DIAMETER_CEILING = 0.1


def linear_config(**kw):
    base = dict(model="linear", d=1, D=16, alpha=2, sigma0=1.0, theta0_coeffs=PARABOLA_E8,
                psis=E1_E2, seed=1)
    base.update(kw)
    return ExperimentConfig(**base)


def test_c01_conjugate_oracle_equivalence(criterion):
    cfg = linear_config(N=2000)
    exp = build(cfg)
    data = generate_dataset(exp.model, exp.theta0, cfg.N, cfg.sigma0, np.random.default_rng(3))
    t0 = time.perf_counter()
    s = run_pcn(exp.model, exp.prior, data, steps=210_000, burnin=10_000, beta=0.3, seed=11)
    elapsed = time.perf_counter() - t0
    fp = functional_moments(s, exp.fs, exp.basis)
    mean, cov = conjugate_oracle(exp.prior, data)
    J = functional_jacobian(exp.fs, exp.basis)
    m_or, C_or = J @ mean.coeffs, J @ cov @ J.T
    z = np.abs(fp.psi_hat - m_or) / batch_means_se(fp.values)
    # off-diagonal entries are compared relative to sqrt(C_ii C_jj), as they are near zero
    rel = np.abs(fp.sigma_hat - C_or) / np.sqrt(np.outer(np.diag(C_or), np.diag(C_or)))
    ok = z.max() <= 3 and rel.max() <= 0.10 and elapsed < 60
    criterion(1, ok, f"max |mean gap|/MCSE = {z.max():.2f}, max rel cov error = {rel.max():.3f}, "
                     f"{elapsed:.1f}s, acceptance {s.acceptance_rate:.2f}")


def test_c02_pivot_consistency(criterion):
    cfg = linear_config(N=5000)
    exp = build(cfg)
    data = generate_dataset(exp.model, exp.theta0, cfg.N, cfg.sigma0, np.random.default_rng(5))
    _, cov = conjugate_oracle(exp.prior, data)
    J = functional_jacobian(exp.fs, exp.basis)
    bundle = information_bundle(exp.model, exp.theta0, exp.basis, exp.fs, cfg.N)
    pivot = cfg.N * bundle.iD_sqrt @ (J @ cov @ J.T) @ bundle.iD_sqrt
    dev = np.max(np.abs(pivot - np.eye(2)))
    criterion(2, dev <= 0.1, f"||pivot - I||_max = {dev:.4f}, diag = {np.diag(pivot).round(4)}")


def test_c03_coverage(criterion):
    cfg = linear_config(N=5000, cred_case=1, cred_level=0.9, replicates=400,
                        mcmc_steps=3000, mcmc_burnin=1000)
    t0 = time.perf_counter()
    rep = coverage_study(cfg)
    elapsed = time.perf_counter() - t0
    ok = abs(rep.coverage - 0.90) <= 0.04 and elapsed < 300 and not rep.failures
    criterion(3, ok, f"coverage = {rep.coverage:.4f} +/- {rep.standard_error:.4f} "
                     f"over {len(rep.records)} replicates, {elapsed:.1f}s")


def test_c04_case2_calibration(criterion):
    gaps = []
    for k in (1, 2):
        draws = np.random.default_rng(100 + k).standard_normal((100_000, k))
        R = ellipsoid_case2(moments_from_values(draws), 0.95).radius
        gaps.append(abs(R - chi2_quantile(k, 0.95)))
    criterion(4, max(gaps) <= 0.15, f"|R_N - Q| = {gaps[0]:.4f} (k=1), {gaps[1]:.4f} (k=2)")


def test_c05_chi2_quantile(criterion):
    closed = abs(chi2_quantile(2, 0.95) + 2 * math.log(0.05))
    trips = max(abs(chi2_cdf(chi2_quantile(k, p), k) - p)
                for k in range(1, 6) for p in (0.5, 0.9, 0.95, 0.99))
    criterion(5, closed <= 1e-8 and trips <= 1e-8,
              f"closed-form gap {closed:.2e}, worst round trip {trips:.2e}")


def test_c06_pde_convergence(criterion):
    rows = pde_check(1, ms=(15, 31, 63, 127))
    problems = {}
    for r in rows:
        if not math.isnan(r["ratio"]):
            problems.setdefault(r["problem"], []).append(r["ratio"])
    ok = all(len(v) == 3 and all(3.5 <= x <= 4.5 for x in v) for v in problems.values())
    ok = ok and set(problems) == {"darcy_const_sine", "darcy_exp_sine", "schrodinger_cosh"}
    detail = "; ".join(f"{k}: {', '.join(f'{x:.3f}' for x in v)}" for k, v in problems.items())
    criterion(6, ok, detail)


def test_c07_linearization_order(criterion):
    basis = Basis(1, 8)
    grid = Grid.for_basis(basis, 128)
    model = ForwardModel.darcy(grid)
    th0 = SpectralField.zeros(basis)
    h = SpectralField(basis, [1.0, -0.5, 0.25, 0.0, 0.1, 0.0, 0.0, 0.0])
    u0 = model.solve(th0).values
    lin = linearize(model, th0, h)
    eps = np.array([1e-1, 1e-2, 1e-3])
    ratio = np.array([grid.norm(model.solve(e * h).values - u0 - e * lin) / e for e in eps])
    slope = np.polyfit(np.log(eps), np.log(ratio), 1)[0]
    criterion(7, abs(slope - 1) <= 0.2, f"log-log slope {slope:.4f}, remainder/eps {ratio}")


def _band(vals):
    med = np.median(vals)
    return vals.max() / med <= 4 and med / vals.min() <= 4


def test_c08_stability_scaling(criterion):
    Ds = [4, 8, 16, 32]
    grid = Grid.for_basis(Basis(1, 32))
    darcy = np.array([v for _, v in stability_curve(ForwardModel.darcy(grid), 0.0, Ds)])
    schr = np.array([v for _, v in stability_curve(ForwardModel.schrodinger(grid), 0.0, Ds)])
    ok_d = _band(darcy) and darcy.min() > DARCY_STABILITY_FLOOR
    ok_s = _band(schr) and schr.min() > SCHRODINGER_STABILITY_FLOOR
    criterion(8, ok_d and ok_s,
              f"Darcy lambda_min*D^6 = {darcy.round(4)} ({'ok' if ok_d else 'outside x4 band'}); "
              f"Schrodinger lambda_min*D^4 = {schr.round(5)} ({'ok' if ok_s else 'fail'})")


def test_c09_diameter(criterion):
    # identity against an independent largest-singular-value computation
    fit = fit_once(build(linear_config(N=2000, mcmc_steps=25_000, mcmc_burnin=5000)), 17)
    ell = fit.ellipsoid
    ref = 2 * math.sqrt(ell.radius * np.linalg.svd(ell.shape, compute_uv=False)[0])
    ident = abs(diameter(ell) - ref) / ref

    # exact linear path, psi = e_1
    scaled = []
    for N in (2000, 8000):
        cfg = linear_config(N=N, psis=(PsiSpec(coeffs=(1.0,)),), mcmc_steps=205_000,
                            mcmc_burnin=5000)
        f = fit_once(build(cfg), replicate_seed(cfg.seed, 0))
        scaled.append(diameter(f.ellipsoid) * math.sqrt(N))
    change = abs(scaled[1] - scaled[0]) / scaled[0]

    dcfg = ExperimentConfig(model="darcy", d=1, D=4, alpha=2, sigma0=1.0, N=1000,
                            theta0_kind="zero", psis=(PsiSpec(coeffs=(1.0,)),),
                            mcmc_steps=20_000, mcmc_burnin=5000, seed=2)
    comp = np.array([v for _, v in diameter_scaling_study(dcfg, [4, 8, 16])])
    ok = ident <= 1e-12 and change <= 0.05 and comp.max() <= DARCY_DIAMETER_CEILING
    criterion(9, ok, f"identity rel gap {ident:.1e}; linear diam*sqrt(N) = "
                     f"{scaled[0]:.4f} -> {scaled[1]:.4f} (change {change:.3%}); "
                     f"Darcy diam*sqrt(N)/D^3 = {comp.round(4)}")


def test_c10_schrodinger_information_convergence(criterion):
    basis = Basis(1, 64)
    grid = Grid.for_basis(basis)
    ID = information_matrix(ForwardModel.schrodinger(grid), 0.0, basis)
    fs = FunctionalSet([bump(0.5, 0.4)])
    J = functional_jacobian(fs, basis, grid)
    v32 = renormalize(ID[:32, :32], J[:, :32], 1)[0][0, 0]
    v64 = renormalize(ID, J, 1)[0][0, 0]
    change = abs(v64 - v32) / abs(v64)
    criterion(10, change <= 0.05, f"i_D^-1: {v32:.6g} (D=32) -> {v64:.6g} (D=64), "
                                  f"relative change {change:.3%}")


def test_c11_determinism(criterion):
    cfgs = [linear_config(N=500, replicates=40, mcmc_steps=3000, mcmc_burnin=1000, seed=2024),
            ExperimentConfig(model="darcy", D=4, N=200, grid_m=32, psis=(PsiSpec(coeffs=(1.0,)),),
                             mcmc_steps=2000, mcmc_burnin=500, replicates=8, seed=77)]
    same = [coverage_study(c, workers=1).to_csv() == coverage_study(c, workers=8).to_csv()
            for c in cfgs]
    criterion(11, all(same), f"linear byte-identical: {same[0]}, Darcy/pCN byte-identical: {same[1]}")


def test_c12_audit_values(criterion):
    r = condition_audit(14, 1, 10_000).rates
    ok = (abs(r.u_max - 1 / 1160) <= 1e-9 and abs(r.delta_G - 0.0117) <= 1e-4
          and abs(r.s_N - 1.374) <= 1e-3)
    criterion(12, ok, f"u_max = {r.u_max:.10g}, delta_G = {r.delta_G:.6g}, s_N = {r.s_N:.6g}")
