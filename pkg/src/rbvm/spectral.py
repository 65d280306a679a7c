"""Dirichlet-Laplacian eigenbasis on the unit cube (d = 1 or 2).

The eigenfunctions are tensor products of ``sqrt(2) sin(j pi x)`` with
eigenvalue ``pi^2 * (j_1^2 + ... + j_d^2)``.  Fields on the cube are stored
on a uniform tensor grid of interior points and integrated with the
composite midpoint rule, which is the same grid the PDE solvers use.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

NYQUIST_FACTOR = 8


class ConfigurationError(ValueError):
    """Raised when a grid or basis combination is unusable."""


def _as_points(points, d: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if d == 1 and pts.ndim <= 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ValueError(f"points must have shape (n, {d}), got {pts.shape}")
    return pts


def _sine_factors(freqs: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """``sqrt(2) sin(j pi x)`` for every frequency (rows) and coordinate (cols)."""
    return np.sqrt(2.0) * np.sin(np.pi * np.outer(freqs, coords))


@dataclass(frozen=True)
class Basis:
    """First ``D`` Dirichlet eigenpairs on ``(0, 1)^d`` in ascending order.

    Ties between multi-indices with equal eigenvalue (d = 2) are broken
    lexicographically.
    """

    d: int
    D: int
    indices: np.ndarray = field(init=False, repr=False, compare=False)
    eigenvalues: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("only d = 1 and d = 2 are supported")
        if self.D < 1:
            raise ValueError("D must be at least 1")
        if self.d == 1:
            idx = np.arange(1, self.D + 1).reshape(-1, 1)
        else:
            j = np.arange(1, self.D + 1)
            j1, j2 = np.meshgrid(j, j, indexing="ij")
            cand = np.column_stack([j1.ravel(), j2.ravel()])
            key = (cand ** 2).sum(axis=1)
            order = np.lexsort((cand[:, 1], cand[:, 0], key))
            idx = cand[order[: self.D]]
        idx.setflags(write=False)
        lam = np.pi ** 2 * (idx ** 2).sum(axis=1).astype(float)
        lam.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def max_frequency(self) -> int:
        return int(self.indices.max())

    def truncate(self, D: int) -> "Basis":
        if D > self.D:
            raise ValueError("cannot truncate to a larger basis")
        return Basis(self.d, D)

    def functions(self, points) -> np.ndarray:
        """Matrix ``E[j, n] = e_j(x_n)`` of shape ``(D, n)``."""
        pts = _as_points(points, self.d)
        out = np.ones((self.D, pts.shape[0]))
        for axis in range(self.d):
            freqs = self.indices[:, axis]
            out *= np.sqrt(2.0) * np.sin(np.pi * freqs[:, None] * pts[None, :, axis])
        return out

    def on_grid(self, grid: "Grid", closed: bool = False) -> np.ndarray:
        """Eigenfunctions sampled on a grid, shape ``(D, *grid_shape)``."""
        if grid.d != self.d:
            raise ValueError("grid and basis dimension differ")
        coords = grid.coords(closed)
        out = None
        for axis in range(self.d):
            fac = _sine_factors(self.indices[:, axis], coords)
            shape = [self.D] + [1] * self.d
            shape[axis + 1] = coords.size
            fac = fac.reshape(shape)
            out = fac if out is None else out * fac
        return out

    def evaluate(self, coeffs, points) -> np.ndarray:
        return np.asarray(coeffs, dtype=float) @ self.functions(points)


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid with ``m`` interior points per axis, ``h = 1/(m+1)``."""

    d: int
    m: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("only d = 1 and d = 2 are supported")
        if self.m < 1:
            raise ValueError("m must be positive")

    @classmethod
    def for_basis(cls, basis: Basis, m: int | None = None) -> "Grid":
        """Smallest (or the requested) grid that is Nyquist-safe for ``basis``."""
        need = NYQUIST_FACTOR * basis.max_frequency
        if m is None:
            m = need
        grid = cls(basis.d, m)
        grid.check(basis)
        return grid

    @property
    def h(self) -> float:
        return 1.0 / (self.m + 1)

    @property
    def weight(self) -> float:
        """Midpoint-rule quadrature weight of one interior node."""
        return self.h ** self.d

    @property
    def shape(self) -> tuple:
        return (self.m,) * self.d

    @property
    def closed_shape(self) -> tuple:
        return (self.m + 2,) * self.d

    def coords(self, closed: bool = False) -> np.ndarray:
        if closed:
            return np.arange(self.m + 2) * self.h
        return np.arange(1, self.m + 1) * self.h

    def nodes(self, closed: bool = False) -> np.ndarray:
        """Grid nodes as an ``(n, d)`` array in C order."""
        c = self.coords(closed)
        mesh = np.meshgrid(*([c] * self.d), indexing="ij")
        return np.column_stack([g.ravel() for g in mesh])

    def check(self, basis: Basis) -> None:
        need = NYQUIST_FACTOR * basis.max_frequency
        if self.m < need:
            raise ConfigurationError(
                f"grid with m={self.m} is too coarse for maximal frequency "
                f"{basis.max_frequency}; need m >= {need}"
            )

    def sample(self, f: Callable, closed: bool = False) -> np.ndarray:
        """Evaluate a vectorised callable ``f(points) -> values`` on the grid."""
        shape = self.closed_shape if closed else self.shape
        vals = np.asarray(f(self.nodes(closed)), dtype=float)
        if vals.ndim == 0:
            return np.full(shape, float(vals))
        return vals.reshape(shape)

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """Discrete L2 inner product of two interior grid fields."""
        return float(np.sum(u * v) * self.weight)

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(self.inner(u, u)))


@dataclass(frozen=True)
class SpectralField:
    """Element of ``E_D`` given by its coefficients in ``basis``."""

    basis: Basis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.size != self.basis.D:
            raise ValueError(f"expected {self.basis.D} coefficients, got {c.size}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, basis: Basis) -> "SpectralField":
        return cls(basis, np.zeros(basis.D))

    @classmethod
    def unit(cls, basis: Basis, i: int) -> "SpectralField":
        """The eigenfunction ``e_i`` (1-based) as a field."""
        c = np.zeros(basis.D)
        c[i - 1] = 1.0
        return cls(basis, c)

    def __call__(self, points) -> np.ndarray:
        return self.basis.evaluate(self.coeffs, points)

    def on_grid(self, grid: Grid, closed: bool = False) -> np.ndarray:
        return np.tensordot(self.coeffs, self.basis.on_grid(grid, closed), axes=1)

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def resized(self, D: int) -> "SpectralField":
        """Truncate or zero-pad to a basis of size ``D``."""
        c = np.zeros(D)
        n = min(D, self.basis.D)
        c[:n] = self.coeffs[:n]
        return SpectralField(Basis(self.basis.d, D), c)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.basis, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.basis, scalar * self.coeffs)

    __rmul__ = __mul__


FieldLike = Union[SpectralField, Callable, np.ndarray, float]


def eigenpair(basis: Basis, i: int):
    """Return ``(lambda_i, e_i)`` for the 1-based index ``i``."""
    if not 1 <= i <= basis.D:
        raise IndexError(f"eigenpair index {i} outside 1..{basis.D}")
    lam = float(basis.eigenvalues[i - 1])
    freqs = basis.indices[i - 1].copy()

    def e(points):
        pts = _as_points(points, basis.d)
        return np.prod(np.sqrt(2.0) * np.sin(np.pi * freqs * pts), axis=1)

    return lam, e


def grid_values(f: FieldLike, grid: Grid, closed: bool = False) -> np.ndarray:
    """Sample any supported field representation on ``grid``."""
    shape = grid.closed_shape if closed else grid.shape
    if isinstance(f, SpectralField):
        return f.on_grid(grid, closed)
    if callable(f):
        return grid.sample(f, closed)
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return np.full(shape, float(arr))
    if arr.shape == shape:
        return arr
    if not closed and arr.shape == grid.closed_shape:
        return arr[(slice(1, -1),) * grid.d]
    raise ValueError(f"array of shape {arr.shape} does not match grid {shape}")


def project(f: FieldLike, basis: Basis, grid: Grid | None = None) -> SpectralField:
    """Midpoint-rule approximation of ``<f, e_i>`` for ``i = 1..D``."""
    grid = Grid.for_basis(basis) if grid is None else grid
    grid.check(basis)
    vals = grid_values(f, grid)
    E = basis.on_grid(grid).reshape(basis.D, -1)
    return SpectralField(basis, E @ vals.ravel() * grid.weight)


def sobolev_norm(theta: SpectralField, beta: float) -> float:
    """Spectral Sobolev norm ``sqrt(sum c_j^2 lambda_j^beta)``."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    lam = theta.basis.eigenvalues
    return float(np.sqrt(np.sum(theta.coeffs ** 2 * lam ** beta)))


def projection_error(f: FieldLike, Ds: Sequence[int], d: int = 1,
                     grid: Grid | None = None) -> list[float]:
    """L2 distance between ``f`` and its projection onto ``E_D`` for each ``D``.

    All truncations share one quadrature grid (Nyquist-safe for the largest
    ``D``) so the sequence is monotone.
    """
    Ds = list(Ds)
    big = Basis(d, max(Ds))
    grid = Grid.for_basis(big) if grid is None else grid
    grid.check(big)
    vals = grid_values(f, grid)
    coeffs = project(vals, big, grid).coeffs
    E = big.on_grid(grid)
    errors = []
    for D in Ds:
        resid = vals - np.tensordot(coeffs[:D], E[:D], axes=1)
        errors.append(grid.norm(resid))
    return errors


def bump(center, width: float, d: int = 1) -> Callable:
    """Smooth compactly supported bump ``exp(-1/(1 - r^2))`` on a ball."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if c.size == 1 and d > 1:
        c = np.full(d, float(c[0]))

    def f(points):
        pts = _as_points(points, d)
        r2 = np.sum((pts - c) ** 2, axis=1) / width ** 2
        out = np.zeros(pts.shape[0])
        inside = r2 < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
        return out

    return f
