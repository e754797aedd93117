"""
Siegmund duality and weak error
===============================

Monte Carlo tail probabilities of the absorbed motion, the duality check
against the dual motion and a weak-rate fit against the exact reflected
Brownian expectation.
"""

####################################################################
from dualflow import TestFunction, TimeGrid, bm_absorbed_tail, constant, estimate_tail_prob, \
    reflected_bm_expectation, siegmund_check, weak_rate_fit

bm = constant(1.0, 0.0)
grid = TimeGrid(1.0, 32)
est = estimate_tail_prob(bm, 0.5, 0.5, grid, "reference", 5000, seed=3, r=3)
print(est, "exact:", bm_absorbed_tail(0.5, 0.5, 1.0))

####################################################################
for res in siegmund_check(bm, [(0.5, 1.0)], grid, 5000, seed=4):
    print(res)

####################################################################
f = TestFunction(2.0)
fit = weak_rate_fit(bm, f, 0.5, 1.0, [4, 8, 16, 32], 20_000, seed=5,
                    exact=reflected_bm_expectation(f, 0.5, 1.0))
print(fit.verdict, fit.slope, fit.ci)
