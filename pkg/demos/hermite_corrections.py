"""
Corrections in the Hermite basis
================================

The shifted oscillator Nop = -eps Lap + (4/eps) sum a_j^2 x_j^2 - mu is
diagonal in the tensor Hermite basis, so each correction equation
Nop phi = F, <phi, Q> = 0 is a division per coefficient.
"""

import numpy as np

from drift_spectra import potentials
from drift_spectra.asymptotics import homogeneous_expansion
from drift_spectra.limit import closed_form_limit, solve_corrections
from drift_spectra.model import DriftSpec
from drift_spectra.oracles import constrained_solve_extrapolated

drift = DriftSpec((1.0, -1.0))
lim = closed_form_limit(drift, 1.0)

# h0 = x1^2 projects onto a single basis function
V = potentials.homogeneous_power(2, 2.0, weights=[1.0, 0.0])
cs = solve_corrections(V, lim, which=("phi3", "phi4"))
nz = np.argwhere(np.abs(cs.phi3) > 1e-14)
print("phi3 nonzero coefficients:", [(tuple(int(i) for i in n), float(cs.phi3[tuple(n)])) for n in nz])
print("-sqrt(2)/32 =", -np.sqrt(2) / 32)

# closed form at a few points
x = np.array([[0.0, 0.0], [0.3, -0.2], [0.7, 0.1]])
print("spectral   ", cs.evaluate("phi3", x))
print("closed form", (0.25 - x[:, 0] ** 2) * lim.Q(x) / 8)

# phi4 needs phi3 and picks up more modes
print("phi4 modes above 1e-12:", int(np.sum(np.abs(cs.phi4) > 1e-12 * np.abs(cs.phi4).max())))

# eigenvalue coefficients from these corrections
exp = homogeneous_expansion(V, lim, cs)
print("expansion:", exp.coefficients)

# brute force: bordered finite-difference solve with Richardson extrapolation
rhs = lambda p: (0.25 - p[..., 0] ** 2) * lim.Q(p)  # noqa: E731
grid, ref = constrained_solve_extrapolated(lim, rhs, radius=6.0)
print("max |spectral - grid oracle| =", np.max(np.abs(cs.evaluate("phi3", grid.points()) - ref)))
