"""
Forward maps and their linearisations
=====================================

Darcy flow and the stationary Schrodinger equation are solved by one
conservative finite-difference operator.  We check second-order convergence
on a manufactured solution and the quadratic Taylor remainder of the
linearisation.
"""

import numpy as np

from rbvm import Basis, ForwardModel, Grid, SpectralField, forward_eval, linearize
from rbvm.forward import darcy_solve, schrodinger_solve

# %%
# Manufactured Darcy problem: theta(x) = x and u(x) = sin(pi x).
pi = np.pi
exact = lambda p: np.sin(pi * p[:, 0])
f = lambda p: np.exp(p[:, 0]) * (pi * np.cos(pi * p[:, 0]) - pi ** 2 * np.sin(pi * p[:, 0]))
prev = None
for m in (15, 31, 63, 127):
    g = Grid(1, m)
    err = np.abs(darcy_solve(lambda p: p[:, 0], g, f, 0.0).full - g.sample(exact, closed=True)).max()
    print(f"m = {m:3d}  max error {err:.3e}" + ("" if prev is None else f"  ratio {prev / err:.3f}"))
    prev = err

# %%
# Schrodinger with constant potential 1/2 has the closed form cosh(x - 1/2) / cosh(1/2).
g = Grid(1, 127)
u = schrodinger_solve(np.log(0.5), g, 1.0)
print("u(1/2) =", u.full[64], " exact", 1 / np.cosh(0.5))

# %%
# Observations are point evaluations of the solution, interpolated off-grid.
model = ForwardModel.darcy(Grid(1, 63), source=2.0)
print("Darcy with f = 2 at x = 0.5:", forward_eval(model, 0.0, [0.5])[0])

# %%
# The linearisation is the exact derivative of the discrete map, so the first
# order Taylor remainder divided by eps falls linearly in eps.
basis = Basis(1, 8)
grid = Grid.for_basis(basis, 128)
model = ForwardModel.darcy(grid)
h = SpectralField(basis, [1.0, -0.5, 0.25, 0, 0.1, 0, 0, 0])
u0 = model.solve(0.0).values
lin = linearize(model, SpectralField.zeros(basis), h)
for eps in (1e-1, 1e-2, 1e-3):
    rem = grid.norm(model.solve(eps * h).values - u0 - eps * lin)
    print(f"eps = {eps:.0e}   remainder / eps = {rem / eps:.3e}")
