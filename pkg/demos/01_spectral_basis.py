"""
The Dirichlet sine basis
========================

Fields live in the span of the first D eigenfunctions of the Dirichlet
Laplacian on the unit cube.  This script builds the basis, checks that the
midpoint grid makes it exactly orthonormal, and projects a smooth field.
"""

import numpy as np

from rbvm import Basis, Grid, SpectralField, project, projection_error, sobolev_norm
from rbvm.spectral import bump

# %%
# In one dimension the eigenpairs are (j pi)^2 and sqrt(2) sin(j pi x).
basis = Basis(1, 6)
print("eigenvalues / pi^2:", np.round(basis.eigenvalues / np.pi ** 2, 6))

# %%
# In two dimensions eigenvalue ties are broken lexicographically.
b2 = Basis(2, 6)
print("2-d multi-indices:", [tuple(int(v) for v in i) for i in b2.indices])

# %%
# The default grid respects the Nyquist rule m >= 8 * max frequency, and on it
# the Gram matrix of the basis is the identity to rounding error.
grid = Grid.for_basis(Basis(1, 32))
E = Basis(1, 32).on_grid(grid)
print("max |Gram - I| =", np.abs(E @ E.T * grid.weight - np.eye(32)).max())

# %%
# Projecting x(1 - x): odd coefficients decay like j^-3, even ones vanish.
c = project(lambda p: p[:, 0] * (1 - p[:, 0]), Basis(1, 8)).coeffs
print("coefficients of x(1-x):", np.round(c, 6))
print("closed form for j = 1: ", 4 * np.sqrt(2) / np.pi ** 3)

# %%
# Truncation error shrinks with D; for a compactly supported bump it falls
# faster than any power.
for D, err in zip([4, 8, 16, 32], projection_error(bump(0.5, 0.3), [4, 8, 16, 32])):
    print(f"D = {D:2d}   ||f - P_D f|| = {err:.3e}")

# %%
# Sobolev norms weight coefficient j by lambda_j^(beta/2).
theta = SpectralField(basis, [1.0, 0.5, 0, 0, 0, 0])
print("h^0, h^1, h^2 norms:", [round(sobolev_norm(theta, b), 4) for b in (0, 1, 2)])
