"""Chi-square quantiles, credible ellipsoids and credible intervals."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .posterior import FunctionalPosterior

DEGENERACY_RTOL = 1e-12
_EPS = 1e-16
_TINY = 1e-300


def _gamma_series(a: float, x: float) -> float:
    term = total = 1.0 / a
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    # modified Lentz evaluation of the upper-tail continued fraction
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma(a: float, x: float) -> float:
    """Regularised lower incomplete gamma ``P(a, x)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return max(0.0, 1.0 - _gamma_cf(a, x))


def chi2_cdf(x: float, k: int) -> float:
    return regularized_gamma(0.5 * k, 0.5 * x)


def chi2_quantile(k: int, p: float) -> float:
    """Inverse chi-square CDF by bisection on the incomplete gamma function."""
    if k < 1:
        raise ValueError("degrees of freedom must be at least 1")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    lo, hi = 0.0, max(1.0, float(k))
    while chi2_cdf(hi, k) < p:
        lo, hi = hi, 2.0 * hi
    while hi - lo > 1e-13 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, k) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _order_statistic(values: np.ndarray, level: float) -> float:
    """Value at 1-based index ``ceil(level * S)`` of the sorted sample."""
    S = values.size
    idx = max(1, math.ceil(level * S - 1e-9))
    return float(np.partition(values, idx - 1)[idx - 1])


@dataclass(frozen=True)
class CredibleEllipsoid:
    """``{x : (x - center)^T shape_inv (x - center) <= radius}``."""

    center: np.ndarray
    shape: np.ndarray
    shape_inv: np.ndarray
    radius: float
    calibration: str
    degenerate: bool

    @property
    def k(self) -> int:
        return self.center.size

    def quadratic_form(self, x) -> np.ndarray:
        diff = np.atleast_2d(np.asarray(x, dtype=float) - self.center)
        return np.einsum("ni,ij,nj->n", diff, self.shape_inv, diff)

    def contains(self, x) -> bool:
        return bool(self.quadratic_form(x)[0] <= self.radius)

    def diameter(self) -> float:
        return diameter(self)


@dataclass(frozen=True)
class CredibleInterval:
    center: float
    half_width: float

    @property
    def endpoints(self) -> tuple[float, float]:
        return self.center - self.half_width, self.center + self.half_width

    def contains(self, x: float) -> bool:
        return abs(x - self.center) <= self.half_width


def _shape_inverse(sigma: np.ndarray):
    sigma = np.atleast_2d(sigma)
    lam = np.linalg.eigvalsh(sigma)
    if lam[0] < DEGENERACY_RTOL * max(lam[-1], 1e-30):
        return np.eye(sigma.shape[0]), True
    inv = np.linalg.inv(sigma)
    return 0.5 * (inv + inv.T), False


def ellipsoid_case1(fp: FunctionalPosterior, level: float) -> CredibleEllipsoid:
    """Radius fixed at the chi-square quantile ``Q_{chi2_k}(level)``."""
    inv, degenerate = _shape_inverse(fp.sigma_hat)
    R = chi2_quantile(fp.k, level)
    return CredibleEllipsoid(np.asarray(fp.psi_hat, float), np.atleast_2d(fp.sigma_hat),
                             inv, R, "case1", degenerate)


def ellipsoid_case2(fp: FunctionalPosterior, level: float) -> CredibleEllipsoid:
    """Radius calibrated to hold posterior mass ``level`` over the draws."""
    if fp.values.shape[0] < 1:
        raise ValueError("posterior draws are required")
    inv, degenerate = _shape_inverse(fp.sigma_hat)
    diff = fp.values - fp.psi_hat
    q = np.einsum("ni,ij,nj->n", diff, inv, diff)
    R = _order_statistic(q, level)
    return CredibleEllipsoid(np.asarray(fp.psi_hat, float), np.atleast_2d(fp.sigma_hat),
                             inv, R, "case2", degenerate)


def interval_case2(fp: FunctionalPosterior, level: float) -> CredibleInterval:
    """Symmetric credible interval for a single functional."""
    if fp.k != 1:
        raise ValueError("credible intervals need exactly one functional")
    dev = np.abs(fp.values[:, 0] - fp.psi_hat[0])
    return CredibleInterval(float(fp.psi_hat[0]), _order_statistic(dev, level))


def contains(ell: CredibleEllipsoid, x) -> bool:
    return ell.contains(x)


def diameter(ell: CredibleEllipsoid) -> float:
    """``2 sqrt(R_N lambda_max(Sigma_hat))``."""
    lam_max = float(np.linalg.eigvalsh(ell.shape)[-1])
    return 2.0 * math.sqrt(max(ell.radius, 0.0) * max(lam_max, 0.0))
