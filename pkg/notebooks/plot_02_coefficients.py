"""
Coefficient families and their checks
=====================================

Boundary classification at 0, the dual coefficients and the sufficient
condition under which every Euler step map is nondecreasing.
"""

####################################################################
from dualflow import affine_affine, dual_transform, feller_integral, monotone_step_condition, \
    sqrt_diffusion

for name, model in [("affine", affine_affine(0.5, 1.0, 0.3, -0.2)),
                    ("sqrt", sqrt_diffusion(0.5, -0.5, -0.1))]:
    print(name, feller_integral(model, "original"), feller_integral(model, "dual"))
    print("  step condition at dt=1e-3:", monotone_step_condition(model, 1e-3).holds)

####################################################################
# The dual drift is ``sigma*sigma' - b``
dual = dual_transform(affine_affine(0.5, 1.0, 0.3, -0.2))
print(dual.drift(2.0))
