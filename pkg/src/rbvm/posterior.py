"""Truncated Gaussian prior, Gaussian likelihood and posterior sampling.

The prior on ``E_D`` has independent coefficients with standard deviations
``tau_i = N^{-d/(4 alpha + 2 d)} * lambda_i^{-alpha/2}``.  Posterior draws
come either from a preconditioned Crank-Nicolson (pCN) chain or, for the
linear model, from the exact conjugate Gaussian posterior.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .fisher import FunctionalSet, functional_jacobian
from .forward import ForwardModel, SolverError, forward_eval
from .spectral import Basis, Grid, SpectralField

ADAPT_WINDOW = 100
TARGET_ACCEPTANCE = (0.2, 0.3)


class AdaptationError(RuntimeError):
    """The pCN chain accepted nothing during burn-in."""


@dataclass(frozen=True)
class PriorSpec:
    basis: Basis
    alpha: float
    N: int

    def __post_init__(self):
        d = self.basis.d
        if not self.alpha > 1 + d / 2:
            raise ValueError(f"alpha must exceed 1 + d/2 = {1 + d / 2}")
        if self.N < 0:
            raise ValueError("N must be non-negative")

    @property
    def scale(self) -> float:
        d = self.basis.d
        return max(self.N, 1) ** (-d / (4 * self.alpha + 2 * d))

    @property
    def tau(self) -> np.ndarray:
        """Per-coordinate prior standard deviations."""
        return self.scale * self.basis.eigenvalues ** (-self.alpha / 2)


@dataclass
class Dataset:
    points: np.ndarray
    Y: np.ndarray
    sigma0: float
    noise: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points.reshape(-1, 1)
        self.Y = np.asarray(self.Y, dtype=float).reshape(-1)
        if self.points.shape[0] != self.Y.size:
            raise ValueError("points and observations differ in length")
        # sigma0 = 0 is allowed for noise-free synthetic data; the likelihood rejects it
        if not self.sigma0 >= 0:
            raise ValueError("sigma0 must be non-negative")

    @property
    def N(self) -> int:
        return self.Y.size


@dataclass
class PosteriorSamples:
    draws: np.ndarray
    acceptance_rate: float
    beta: float
    burnin: int
    seed: Optional[int]
    basis: Basis = field(repr=False, default=None)

    @property
    def S(self) -> int:
        return self.draws.shape[0]


@dataclass
class FunctionalPosterior:
    psi_hat: np.ndarray
    sigma_hat: np.ndarray
    values: np.ndarray

    @property
    def k(self) -> int:
        return self.psi_hat.size


def prior_sample(spec: PriorSpec, rng: np.random.Generator) -> SpectralField:
    return SpectralField(spec.basis, spec.tau * rng.standard_normal(spec.basis.D))


def _loglik_from_pred(pred: np.ndarray, Y: np.ndarray, sigma0: float) -> float:
    r = Y - pred
    return -0.5 * float(r @ r) / sigma0 ** 2


def log_likelihood(model: ForwardModel, theta, data: Dataset) -> float:
    """``-sum (Y_i - G_theta(X_i))^2 / (2 sigma0^2)``."""
    if data.N == 0:
        return 0.0
    if not data.sigma0 > 0:
        raise ValueError("the likelihood needs sigma0 > 0")
    return _loglik_from_pred(forward_eval(model, theta, data.points), data.Y, data.sigma0)


def run_pcn(model: ForwardModel, spec: PriorSpec, data: Dataset, steps: int, burnin: int,
            beta: float, seed: int, adapt: bool = True) -> PosteriorSamples:
    """Preconditioned Crank-Nicolson chain on the prior coefficients.

    ``steps`` counts all iterations; the first ``burnin`` are discarded.
    During burn-in the step size is tuned multiplicatively towards an
    acceptance rate in ``[0.2, 0.3]`` and then frozen.  Proposals for which
    the forward solver fails are rejected.
    """
    if steps <= burnin:
        raise ValueError("steps must exceed burnin")
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    basis = spec.basis
    tau = spec.tau
    rng = np.random.default_rng(seed)
    if data.N > 0:
        G = model.observation_map(basis, data.points)
        Y, s0 = data.Y, data.sigma0

        def ll(c):
            try:
                return _loglik_from_pred(G(c), Y, s0)
            except SolverError:
                return -np.inf
    else:
        def ll(c):
            return 0.0

    D = basis.D
    theta = tau * rng.standard_normal(D)
    cur = ll(theta)
    if not np.isfinite(cur):
        raise SolverError("forward solve failed at the initial prior draw")
    out = np.empty((steps - burnin, D))
    window_acc = 0
    burn_acc = 0
    kept_acc = 0
    rho = np.sqrt(1.0 - beta ** 2)
    for t in range(steps):
        prop = rho * theta + beta * (tau * rng.standard_normal(D))
        new = ll(prop)
        if np.log(rng.random()) < new - cur:
            theta, cur = prop, new
            accepted = True
        else:
            accepted = False
        if t < burnin:
            burn_acc += accepted
            window_acc += accepted
            if adapt and (t + 1) % ADAPT_WINDOW == 0:
                rate = window_acc / ADAPT_WINDOW
                if rate < TARGET_ACCEPTANCE[0]:
                    beta *= 0.7
                elif rate > TARGET_ACCEPTANCE[1]:
                    beta = min(1.0, beta * 1.3)
                rho = np.sqrt(1.0 - beta ** 2)
                window_acc = 0
            if t + 1 == burnin and burn_acc == 0:
                raise AdaptationError("no proposal accepted during burn-in; use a smaller beta")
        else:
            kept_acc += accepted
            out[t - burnin] = theta
    return PosteriorSamples(out, kept_acc / (steps - burnin), beta, burnin, seed, basis)


def _design(basis: Basis, data: Dataset) -> np.ndarray:
    return basis.functions(data.points).T


def conjugate_oracle(spec: PriorSpec, data: Dataset):
    """Exact posterior ``(mean, covariance)`` for the linear model.

    ``covariance = (Phi^T Phi / sigma0^2 + diag(tau)^-2)^-1`` and
    ``mean = covariance Phi^T Y / sigma0^2`` with ``Phi_ij = e_j(X_i)``.
    """
    basis = spec.basis
    prec, rhs = _posterior_precision(spec, data)
    cf = cho_factor(prec, lower=True)
    cov = cho_solve(cf, np.eye(basis.D))
    cov = 0.5 * (cov + cov.T)
    mean = cho_solve(cf, rhs)
    return SpectralField(basis, mean), cov


def _posterior_precision(spec: PriorSpec, data: Dataset):
    basis = spec.basis
    prec = np.diag(spec.tau ** -2.0)
    rhs = np.zeros(basis.D)
    if data.N > 0:
        Phi = _design(basis, data)
        prec = prec + Phi.T @ Phi / data.sigma0 ** 2
        rhs = Phi.T @ data.Y / data.sigma0 ** 2
    return prec, rhs


def conjugate_draws(spec: PriorSpec, data: Dataset, S: int,
                    rng: np.random.Generator) -> PosteriorSamples:
    """``S`` independent draws from the exact linear-model posterior."""
    prec, rhs = _posterior_precision(spec, data)
    L = np.linalg.cholesky(prec)
    mean = cho_solve((L, True), rhs)
    z = rng.standard_normal((spec.basis.D, S))
    draws = mean[:, None] + solve_triangular(L.T, z, lower=False)
    return PosteriorSamples(draws.T.copy(), 1.0, float("nan"), 0, None, spec.basis)


def functional_moments(samples: PosteriorSamples, fs: FunctionalSet, basis: Basis,
                       grid: Grid | None = None) -> FunctionalPosterior:
    """Posterior mean and covariance (``1/(S-1)``) of ``Psi theta``."""
    if samples.S < 2:
        raise ValueError("at least two posterior draws are needed")
    J = functional_jacobian(fs, basis, grid)
    return moments_from_values(samples.draws @ J.T)


def moments_from_values(values: np.ndarray) -> FunctionalPosterior:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] < 2:
        raise ValueError("at least two posterior draws are needed")
    mean = values.mean(axis=0)
    cov = np.atleast_2d(np.cov(values, rowvar=False, ddof=1))
    cov = 0.5 * (cov + cov.T)
    return FunctionalPosterior(mean, cov, values)


def batch_means_se(values: np.ndarray, n_batches: int = 50) -> np.ndarray:
    """Monte Carlo standard error of the mean of a correlated chain."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    S = values.shape[0] - values.shape[0] % n_batches
    means = values[:S].reshape(n_batches, -1, values.shape[1]).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)
