"""
Strong error of the dual flow
=============================

Per-sample comparison of the coarse dual flow with a bridge-refined
reference, against the forward error weighted by the Gronwall factor.
"""

####################################################################
from dualflow import gronwall_bound_check, strong_error_bound_check, tanh_drift

model = tanh_drift(1.0, 1.0, 3.0)
rep = strong_error_bound_check(model, 1.0, 1.0, 16, 100, seed=6, r=3)
print("violation fraction:", rep.violation_fraction)
gr = gronwall_bound_check(model, 1.0, 1.0, 16, 1.0, 100, seed=7, r=3)
print("gronwall:", gr.violation_fraction, gr.lhs.mean(), gr.rhs.mean())
