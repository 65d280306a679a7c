"""Information matrices, functional Jacobians and the renormalisation i_D."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigh, solve_triangular

from .forward import ForwardModel, Linearization
from .spectral import Basis, FieldLike, Grid, SpectralField, project


class DegenerateFunctionalError(ValueError):
    """The functionals (or the information they carry) are numerically dependent."""


Functional = Union[SpectralField, Callable]


class FunctionalSet:
    """Linear functionals ``theta -> <psi_i, theta>`` for ``i = 1..k``.

    Each ``psi_i`` is either a :class:`SpectralField` or a vectorised
    callable that is projected onto a basis on demand.
    """

    def __init__(self, psis: Sequence[Functional]):
        if len(psis) == 0:
            raise ValueError("at least one functional is required")
        self.psis = list(psis)

    @property
    def k(self) -> int:
        return len(self.psis)

    def coefficients(self, basis: Basis, grid: Grid | None = None) -> np.ndarray:
        rows = []
        for psi in self.psis:
            if isinstance(psi, SpectralField):
                rows.append(psi.resized(basis.D).coeffs)
            else:
                rows.append(project(psi, basis, grid).coeffs)
        return np.array(rows)

    def gram(self, basis: Basis, grid: Grid | None = None) -> np.ndarray:
        """Gram matrix of the projected functionals."""
        J = self.coefficients(basis, grid)
        return J @ J.T

    def check_independent(self, basis: Basis, grid: Grid | None = None, tol: float = 1e-10):
        lam = np.linalg.eigvalsh(self.gram(basis, grid))
        if lam[0] <= tol:
            raise DegenerateFunctionalError(
                f"functionals are linearly dependent on E_D (lambda_min = {lam[0]:.3e})")

    def values(self, theta: SpectralField, basis: Basis, grid: Grid | None = None) -> np.ndarray:
        """``Psi(theta)`` for a field in (a truncation of) ``basis``."""
        return self.coefficients(basis, grid) @ theta.resized(basis.D).coeffs


def information_matrix(model: ForwardModel, theta0: FieldLike, basis: Basis) -> np.ndarray:
    """``[I_D]_ij = <I e_i, I e_j>_{L2} / sigma0^2`` by midpoint quadrature.

    All ``D`` linearised solves share one factorisation and run as a single
    multi-right-hand-side solve.
    """
    model.grid.check(basis)
    W = Linearization(model, theta0).apply_basis(basis).reshape(basis.D, -1)
    ID = (W @ W.T) * (model.grid.weight / model.sigma0 ** 2)
    upper = np.triu(ID)
    return upper + np.triu(ID, 1).T


def functional_jacobian(fs: FunctionalSet, basis: Basis, grid: Grid | None = None) -> np.ndarray:
    """``(J_D)_ij = <psi_i, e_j>``, shape ``(k, D)``."""
    return fs.coefficients(basis, grid)


def _cholesky(ID: np.ndarray):
    try:
        return cho_factor(ID, lower=True)
    except LinAlgError as exc:
        raise DegenerateFunctionalError(f"[I_D] is not positive definite: {exc}") from exc


def renormalize(ID: np.ndarray, JD: np.ndarray, N: int):
    """Return ``(iD_inv, SigmaN, iD_sqrt)``.

    ``iD_inv = J_D [I_D]^{-1} J_D^T`` via a Cholesky factor of ``[I_D]``,
    ``SigmaN = iD_inv / N`` and ``iD_sqrt`` the symmetric square root of
    ``iD_inv^{-1}``.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    JD = np.atleast_2d(JD)
    c, low = _cholesky(ID)
    L = np.tril(c)
    Y = solve_triangular(L, JD.T, lower=True)
    iD_inv = Y.T @ Y
    iD_inv = 0.5 * (iD_inv + iD_inv.T)
    lam, V = eigh(iD_inv)
    if lam[0] < 1e-12 * lam[-1] or lam[-1] <= 0:
        raise DegenerateFunctionalError(
            f"i_D^{{-1}} numerically singular (eigenvalues {lam[0]:.3e}, {lam[-1]:.3e})")
    iD_sqrt = (V / np.sqrt(lam)) @ V.T
    return iD_inv, iD_inv / N, iD_sqrt


def representers(ID: np.ndarray, fs: FunctionalSet, basis: Basis,
                 grid: Grid | None = None) -> list[SpectralField]:
    """Solutions of ``[I_D] psi_bar = P_{E_D} psi_i``."""
    J = functional_jacobian(fs, basis, grid)
    sol = cho_solve(_cholesky(ID), J.T)
    resid = np.max(np.abs(ID @ sol - J.T))
    if resid > 1e-8 * max(1.0, np.max(np.abs(J))):
        raise DegenerateFunctionalError(f"representer solve residual {resid:.3e}")
    return [SpectralField(basis, sol[:, i]) for i in range(J.shape[0])]


@dataclass(frozen=True)
class InformationBundle:
    ID: np.ndarray
    JD: np.ndarray
    iD_inv: np.ndarray
    SigmaN: np.ndarray
    iD_sqrt: np.ndarray
    representers: list
    eigs: tuple
    N: int

    @property
    def k(self) -> int:
        return self.JD.shape[0]


def information_bundle(model: ForwardModel, theta0: FieldLike, basis: Basis,
                       fs: FunctionalSet, N: int) -> InformationBundle:
    ID = information_matrix(model, theta0, basis)
    JD = functional_jacobian(fs, basis, model.grid)
    iD_inv, SigmaN, iD_sqrt = renormalize(ID, JD, N)
    reps = representers(ID, fs, basis, model.grid)
    lam = np.linalg.eigvalsh(ID)
    return InformationBundle(ID, JD, iD_inv, SigmaN, iD_sqrt, reps,
                             (float(lam[0]), float(lam[-1])), N)


STABILITY_EXPONENT = {"linear": 0.0, "darcy": 6.0, "schrodinger": 4.0}


def stability_curve(model: ForwardModel, theta0: FieldLike, Ds: Sequence[int],
                    p: float | None = None) -> list[tuple[int, float]]:
    """``(D, lambda_min([I_D]) * D^{p/d})`` over an ascending grid of ``D``.

    ``p`` defaults to 6 (Darcy), 4 (Schrodinger) or 0 (linear).  One
    information matrix is computed at the largest ``D`` and the smaller ones
    are read off as leading principal submatrices.
    """
    Ds = list(Ds)
    if Ds != sorted(Ds):
        raise ValueError("D grid must be ascending")
    p = STABILITY_EXPONENT[model.variant] if p is None else p
    d = model.grid.d
    ID = information_matrix(model, theta0, Basis(d, Ds[-1]))
    out = []
    for D in Ds:
        lam = np.linalg.eigvalsh(ID[:D, :D])[0]
        out.append((D, float(lam * D ** (p / d))))
    return out
