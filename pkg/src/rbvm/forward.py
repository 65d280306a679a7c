"""Forward maps and their linearisations.

Three variants share one finite-difference elliptic solver on the uniform
grid of :class:`rbvm.spectral.Grid`:

* ``linear``: the identity map, G(theta)(x) = theta(x);
* ``darcy``: u solving div(exp(theta) grad u) = f, u = g on the boundary;
* ``schrodinger``: u solving -1/2 Lap u + exp(theta) u = 0, u = g > 0.

The divergence-form operator uses the conservative 2d+1 point stencil with
the coefficient averaged arithmetically onto half-grid points, so the
discrete operator is symmetric and second order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded

from .spectral import Basis, FieldLike, Grid, SpectralField, grid_values

VARIANTS = ("linear", "darcy", "schrodinger")

Data = Union[float, Callable]


class SolverError(RuntimeError):
    """A PDE solve failed or produced a physically inadmissible solution."""


# ---------------------------------------------------------------------------
# grid helpers


def _inner(d: int) -> tuple:
    return (slice(1, -1),) * d


def _shifted(d: int, axis: int, offset: int) -> tuple:
    sl = [slice(1, -1)] * d
    sl[axis] = slice(1 + offset, None if offset == 1 else -1 + offset)
    return tuple(sl)


def boundary_mask(grid: Grid) -> np.ndarray:
    mask = np.ones(grid.closed_shape, dtype=bool)
    mask[_inner(grid.d)] = False
    return mask


def boundary_values(g: Data, grid: Grid) -> np.ndarray:
    """Closed-grid array carrying ``g`` on the boundary and zero inside."""
    full = np.zeros(grid.closed_shape)
    mask = boundary_mask(grid)
    if callable(g):
        vals = np.asarray(g(grid.nodes(closed=True)), dtype=float)
        vals = np.broadcast_to(vals, (mask.size,)).reshape(grid.closed_shape)
        full[mask] = vals[mask]
    else:
        full[mask] = float(g)
    return full


def flux_divergence(a_full: np.ndarray, u_full: np.ndarray, h: float, d: int) -> np.ndarray:
    """Interior values of the discrete ``div(a grad u)``.

    ``a_full`` may carry leading batch axes; the last ``d`` axes are the
    closed grid.
    """
    lead = (Ellipsis,)
    inner = _inner(d)
    out = 0.0
    for axis in range(d):
        plus = _shifted(d, axis, 1)
        minus = _shifted(d, axis, -1)
        a_c = a_full[lead + inner]
        a_p = 0.5 * (a_c + a_full[lead + plus])
        a_m = 0.5 * (a_c + a_full[lead + minus])
        u_c = u_full[lead + inner]
        out = out + a_p * (u_full[lead + plus] - u_c) - a_m * (u_c - u_full[lead + minus])
    return out / h ** 2


class EllipticOperator:
    """Interior matrix of ``scale * div(a grad .) + potential`` with Dirichlet data.

    One factorisation is computed on construction and reused by every
    :meth:`solve`; ``d = 1`` uses a tridiagonal banded solve, ``d = 2`` a
    sparse LU.
    """

    def __init__(self, grid: Grid, a_full: np.ndarray, potential: np.ndarray | None = None,
                 scale: float = 1.0):
        self.grid = grid
        self.a_full = np.asarray(a_full, dtype=float)
        self.scale = scale
        self.potential = None if potential is None else np.asarray(potential, dtype=float)
        self._build()

    def _build(self):
        grid, d, h2 = self.grid, self.grid.d, self.grid.h ** 2
        a = self.a_full
        if d == 1:
            ah = 0.5 * (a[1:] + a[:-1])
            ab = np.zeros((3, grid.m))
            ab[0, 1:] = self.scale * ah[1:-1] / h2
            ab[2, :-1] = self.scale * ah[1:-1] / h2
            ab[1] = -self.scale * (ah[:-1] + ah[1:]) / h2
            if self.potential is not None:
                ab[1] += self.potential
            self._banded = ab
            return
        n = grid.m + 2
        idx = np.arange(n ** d).reshape((n,) * d)
        inner = _inner(d)
        n_int = grid.m ** d
        interior_pos = -np.ones(n ** d, dtype=int)
        interior_pos[idx[inner].ravel()] = np.arange(n_int)
        rows, cols, vals = [], [], []
        diag = np.zeros(n_int)
        rowid = np.arange(n_int)
        a_c = a[inner].ravel()
        for axis in range(d):
            for off in (1, -1):
                sl = _shifted(d, axis, off)
                coef = self.scale * 0.5 * (a_c + a[sl].ravel()) / h2
                nb = interior_pos[idx[sl].ravel()]
                keep = nb >= 0
                rows.append(rowid[keep])
                cols.append(nb[keep])
                vals.append(coef[keep])
                diag -= coef
        if self.potential is not None:
            diag += self.potential.ravel()
        rows.append(rowid)
        cols.append(rowid)
        vals.append(diag)
        A = sps.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(n_int, n_int))
        self.matrix = A
        try:
            self._lu = spla.splu(A)
        except RuntimeError as exc:
            raise SolverError(f"sparse factorisation failed: {exc}") from exc

    def apply(self, u_full: np.ndarray) -> np.ndarray:
        """Operator applied to a closed-grid field (boundary values included)."""
        out = self.scale * flux_divergence(self.a_full, u_full, self.grid.h, self.grid.d)
        if self.potential is not None:
            out = out + self.potential * u_full[(Ellipsis,) + _inner(self.grid.d)]
        return out

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve with vanishing boundary values.

        ``rhs`` has shape ``grid.shape`` or ``(r, *grid.shape)``; the result
        has the same shape.
        """
        grid = self.grid
        rhs = np.asarray(rhs, dtype=float)
        batched = rhs.ndim == grid.d + 1
        flat = rhs.reshape(-1, grid.m ** grid.d).T if batched else rhs.ravel()
        if grid.d == 1:
            sol = solve_banded((1, 1), self._banded, flat, check_finite=False)
        else:
            sol = self._lu.solve(flat)
        if not np.all(np.isfinite(sol)):
            raise SolverError(self._diagnostic("non-finite solution"))
        if batched:
            return sol.T.reshape(rhs.shape)
        return sol.reshape(grid.shape)

    def solve_bvp(self, rhs: np.ndarray, g_full: np.ndarray) -> np.ndarray:
        """Solve ``L u = rhs`` with ``u = g`` on the boundary; returns closed-grid ``u``."""
        lifted = rhs - self.apply(g_full)
        u = g_full.copy()
        u[_inner(self.grid.d)] = self.solve(lifted)
        return u

    def _diagnostic(self, what: str) -> str:
        a = self.a_full
        return (f"{what}; coefficient range [{a.min():.3e}, {a.max():.3e}], "
                f"contrast {a.max() / max(a.min(), 1e-300):.3e}")


@dataclass(frozen=True)
class PdeSolution:
    """Grid solution of a boundary-value problem (boundary trace included)."""

    grid: Grid
    full: np.ndarray
    residual: float

    @property
    def values(self) -> np.ndarray:
        return self.full[_inner(self.grid.d)]

    @property
    def boundary(self) -> np.ndarray:
        return self.full[boundary_mask(self.grid)]


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class ForwardModel:
    """Forward map configuration.

    ``source`` and ``boundary`` are constants or vectorised callables of an
    ``(n, d)`` point array.  ``sigma0`` only enters likelihood and
    information scaling.
    """

    variant: str
    grid: Grid
    source: Data = 1.0
    boundary: Data = 0.0
    sigma0: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if self.variant == "darcy":
            f = grid_values(self.source, self.grid)
            if not np.all(f > 0):
                raise ValueError("Darcy source must be strictly positive on the grid")
        if self.variant == "schrodinger":
            g = boundary_values(self.boundary, self.grid)[boundary_mask(self.grid)]
            if not np.all(g > 0):
                raise ValueError("Schrodinger boundary data must be strictly positive")

    @classmethod
    def linear(cls, grid: Grid, sigma0: float = 1.0) -> "ForwardModel":
        return cls("linear", grid, 0.0, 0.0, sigma0)

    @classmethod
    def darcy(cls, grid: Grid, source: Data = 1.0, boundary: Data = 0.0,
              sigma0: float = 1.0) -> "ForwardModel":
        return cls("darcy", grid, source, boundary, sigma0)

    @classmethod
    def schrodinger(cls, grid: Grid, boundary: Data = 1.0, sigma0: float = 1.0) -> "ForwardModel":
        return cls("schrodinger", grid, 0.0, boundary, sigma0)

    def observation_map(self, basis: Basis, points) -> Callable[[np.ndarray], np.ndarray]:
        """Fast ``coeffs -> G_theta(points)`` for repeated evaluation (MCMC).

        Basis functions and the interpolation matrix are precomputed, so a
        PDE evaluation costs one solve plus two matrix-vector products.
        """
        pts = _check_points(points, self.grid.d)
        if self.variant == "linear":
            design = basis.functions(pts).T.copy()
            return lambda c: design @ c
        E = basis.on_grid(self.grid, closed=True).reshape(basis.D, -1)
        P = interpolation_matrix(self.grid, pts)
        shape = self.grid.closed_shape

        def G(c):
            theta_full = (c @ E).reshape(shape)
            return P @ self.solve(theta_full).full.ravel()

        return G

    def solve(self, theta: FieldLike) -> PdeSolution:
        if self.variant == "darcy":
            return solve_darcy(theta, self)
        if self.variant == "schrodinger":
            return solve_schrodinger(theta, self)
        raise ValueError("the linear variant has no PDE to solve")


# ---------------------------------------------------------------------------
# solvers


def darcy_solve(theta: FieldLike, grid: Grid, source: Data, boundary: Data) -> PdeSolution:
    """Solve ``div(exp(theta) grad u) = source`` with ``u = boundary``.

    No sign condition is imposed on ``source``; :class:`ForwardModel`
    enforces positivity for inference.
    """
    a_full = np.exp(grid_values(theta, grid, closed=True))
    op = EllipticOperator(grid, a_full)
    f = grid_values(source, grid)
    u = op.solve_bvp(f, boundary_values(boundary, grid))
    res = float(np.max(np.abs(op.apply(u) - f)))
    return PdeSolution(grid, u, res)


def solve_darcy(theta: FieldLike, model: ForwardModel) -> PdeSolution:
    return darcy_solve(theta, model.grid, model.source, model.boundary)


def schrodinger_solve(theta: FieldLike, grid: Grid, boundary: Data) -> PdeSolution:
    """Solve ``-1/2 Lap u + exp(theta) u = 0`` with ``u = boundary``."""
    V = np.exp(grid_values(theta, grid))
    op = EllipticOperator(grid, np.ones(grid.closed_shape), potential=V, scale=-0.5)
    u = op.solve_bvp(np.zeros(grid.shape), boundary_values(boundary, grid))
    inner = u[_inner(grid.d)]
    if not np.all(inner > 0):
        raise SolverError(
            f"Schrodinger solution not strictly positive (min {inner.min():.3e}); "
            "positivity is required for g > 0"
        )
    res = float(np.max(np.abs(op.apply(u))))
    return PdeSolution(grid, u, res)


def solve_schrodinger(theta: FieldLike, model: ForwardModel) -> PdeSolution:
    return schrodinger_solve(theta, model.grid, model.boundary)


# ---------------------------------------------------------------------------
# linearisation


class Linearization:
    """Derivative of the discrete forward map at ``theta0``.

    Exact derivative of the discrete solver, so for smooth data the
    remainder of a first-order Taylor step is quadratic.  The factorisation
    of the base operator is reused across all directions.
    """

    def __init__(self, model: ForwardModel, theta0: FieldLike):
        self.model = model
        grid = model.grid
        self.theta0_full = grid_values(theta0, grid, closed=True)
        if model.variant == "darcy":
            self._a = np.exp(self.theta0_full)
            self._op = EllipticOperator(grid, self._a)
            f = grid_values(model.source, grid)
            self.u_full = self._op.solve_bvp(f, boundary_values(model.boundary, grid))
        elif model.variant == "schrodinger":
            self._V = np.exp(self.theta0_full[_inner(grid.d)])
            self._op = EllipticOperator(grid, np.ones(grid.closed_shape), potential=self._V,
                                        scale=-0.5)
            self.u_full = self._op.solve_bvp(np.zeros(grid.shape),
                                             boundary_values(model.boundary, grid))
            if not np.all(self.u_full[_inner(grid.d)] > 0):
                raise SolverError("Schrodinger base solution not strictly positive")
        else:
            self._op = None
            self.u_full = None

    def apply(self, H_full: np.ndarray) -> np.ndarray:
        """Linearisation for closed-grid directions ``H_full`` (batched on axis 0)."""
        grid = self.model.grid
        H_full = np.asarray(H_full, dtype=float)
        inner = (Ellipsis,) + _inner(grid.d)
        if self.model.variant == "linear":
            return H_full[inner].copy()
        if self.model.variant == "darcy":
            rhs = flux_divergence(self._a * H_full, self.u_full, grid.h, grid.d)
        else:
            rhs = self._V * self.u_full[_inner(grid.d)] * H_full[inner]
        return -self._op.solve(rhs)

    def apply_basis(self, basis: Basis) -> np.ndarray:
        """Linearised images of ``e_1..e_D``, shape ``(D, *grid.shape)``."""
        return self.apply(basis.on_grid(self.model.grid, closed=True))


def linearize(model: ForwardModel, theta0: FieldLike, h: FieldLike) -> np.ndarray:
    """Interior grid field of the linearisation at ``theta0`` in direction ``h``."""
    lin = Linearization(model, theta0)
    return lin.apply(grid_values(h, model.grid, closed=True))


# ---------------------------------------------------------------------------
# evaluation


def _check_points(points, d: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if d == 1 and pts.ndim <= 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ValueError(f"points must have shape (n, {d})")
    if np.any(pts < 0.0) or np.any(pts > 1.0) or not np.all(np.isfinite(pts)):
        raise ValueError("evaluation point outside the unit cube")
    return pts


def interpolation_matrix(grid: Grid, points) -> sps.csr_matrix:
    """Sparse multilinear interpolation from closed-grid values to ``points``."""
    pts = _check_points(points, grid.d)
    d, n, m = grid.d, grid.m + 2, grid.m
    t = pts / grid.h
    near = np.rint(t)
    t = np.where(np.abs(t - near) < 1e-9, near, t)
    lo = np.clip(np.floor(t).astype(int), 0, m)
    frac = t - lo
    npts = pts.shape[0]
    rows, cols, vals = [], [], []
    strides = n ** np.arange(d - 1, -1, -1)
    for corner in range(2 ** d):
        bits = [(corner >> k) & 1 for k in range(d)]
        w = np.ones(npts)
        flat = np.zeros(npts, dtype=int)
        for k, b in enumerate(bits):
            w = w * (frac[:, k] if b else 1.0 - frac[:, k])
            flat = flat + (lo[:, k] + b) * strides[k]
        keep = w != 0.0
        rows.append(np.nonzero(keep)[0])
        cols.append(flat[keep])
        vals.append(w[keep])
    return sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(npts, n ** d))


def interpolate(grid: Grid, full: np.ndarray, points) -> np.ndarray:
    return interpolation_matrix(grid, points) @ np.asarray(full).ravel()


def forward_eval(model: ForwardModel, theta: FieldLike, points) -> np.ndarray:
    """``G_theta`` at arbitrary points of the closed unit cube."""
    pts = _check_points(points, model.grid.d)
    if model.variant == "linear":
        if isinstance(theta, SpectralField):
            return theta(pts)
        if callable(theta):
            return np.asarray(theta(pts), dtype=float)
        return interpolate(model.grid, grid_values(theta, model.grid, closed=True), pts)
    return interpolate(model.grid, model.solve(theta).full, pts)


def linearized_at(model: ForwardModel, theta0: FieldLike, h: SpectralField, points) -> np.ndarray:
    """Linearisation in direction ``h`` evaluated at ``points``."""
    pts = _check_points(points, model.grid.d)
    if model.variant == "linear":
        return h(pts)
    lin = Linearization(model, theta0)
    w = lin.apply(grid_values(h, model.grid, closed=True))
    full = np.zeros(model.grid.closed_shape)
    full[_inner(model.grid.d)] = w
    return interpolate(model.grid, full, pts)
