"""
Leading order: lambda_alpha / alpha approaches mu
=================================================

Drift m = x1^2 - x2^2 (a = (1, -1)), eps = 1, no potential.
The limit value is mu = 2 (|a1| + |a2|) = 4 and the rescaled
eigenfunction approaches the Gaussian Q.
"""

import numpy as np

from drift_spectra import potentials
from drift_spectra.asymptotics import rescaled_radius, solve_rescaled
from drift_spectra.limit import closed_form_limit
from drift_spectra.model import DriftSpec

drift = DriftSpec((1.0, -1.0))
lim = closed_form_limit(drift, 1.0)
print("mu =", lim.mu, " sigma =", lim.sigma, " Q(0) =", round(lim.Q0, 6))

# box of half-width 8 sigma in y = alpha^1/2 x
R = rescaled_radius(drift, 1.0)

# a single 127^2 grid and the Romberg value from 63/127/255
for alpha in (10.0, 100.0, 1000.0):
    one = solve_rescaled(drift, potentials.zero(2), 1.0, alpha, R, levels=(127,))
    ext = solve_rescaled(drift, potentials.zero(2), 1.0, alpha, R, levels=(63, 127, 255))
    w = ext.finest.u
    gap = np.max(np.abs(w.values - lim.Q(w.grid.points())))
    print(f"alpha={alpha:7.1f}  grid {one.lambda_numeric / alpha:.8f}  "
          f"extrapolated {ext.lambda_numeric / alpha:.10f}  |w - Q|_inf {gap:.2e}")

# with V = 0 the rescaled problem does not depend on alpha at all,
# so what remains is the discretization error of the 255^2 grid
