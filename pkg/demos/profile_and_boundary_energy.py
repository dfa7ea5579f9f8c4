"""
The optimal profile and the two boundary densities
==================================================

The quartic well has a closed-form transition profile, tanh, and a surface
tension of 4/3.  Both come out of the tabulated profile numerically.
"""

import numpy as np

from acmcf.potentials import build_profile, make_bump_sigma, make_quartic_well, make_special_sigma

well = make_quartic_well()
profile = build_profile(well)

print("surface tension c0 =", profile.c0, " (4/3 =", 4 / 3, ")")
r = np.linspace(-4, 4, 9)
print("theta0(r) - tanh(r):", np.abs(profile.theta0(r) - np.tanh(r)).max())

# Along the profile, kinetic and potential parts are equal.
print("equipartition defect:", np.abs(0.5 * profile.dtheta**2 - well.eval(profile.theta)).max())

# Boundary densities: both satisfy Young's law sigma(1) - sigma(-1) = c0 cos(alpha).
alpha = np.pi / 3
for sigma in (make_special_sigma(profile, alpha), make_bump_sigma(profile, alpha, 0.1)):
    young = sigma.eval(np.array([1.0]))[0] - sigma.eval(np.array([-1.0]))[0]
    print(f"{sigma.kind:8s} sigma(1) - sigma(-1) = {young:.12f}   c0 cos(alpha) = "
          f"{profile.c0 * np.cos(alpha):.12f}")

# The bump density only exists while kappa < cos(alpha).
try:
    make_bump_sigma(profile, alpha, 0.6)
except ValueError as exc:
    print("kappa = 0.6 rejected:", exc)
