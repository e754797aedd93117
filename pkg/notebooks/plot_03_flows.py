"""
Absorbing flow and its dual
===========================

Run the absorbing Euler flow on a grid of starting points, invert it to get
the dual flow and compare the dual one-point motion with the reflected
scheme driven by the reversed noise.
"""

####################################################################
import numpy as np

from dualflow import TimeGrid, constant, default_initial_points, dual_flow, dual_motion, \
    dual_transform, em_absorbing_flow, reflected_motion, sample_noise, time_reverse

model = constant(1.0, 0.0)
grid = TimeGrid(1.0, 64)
pts = default_initial_points(4.0, 1000)
hat = sample_noise(grid, seed=1)
flow = em_absorbing_flow(model, grid, pts, time_reverse(hat))
print("absorbed at the end:", int(flow.absorbed_mask[-1].sum()), "of", pts.size)

####################################################################
# Dual snapshots come from inverting the grid maps
dual = dual_flow(flow)
print("X*(0.5) from the grid:", float(dual(grid.n, 0.5)))

####################################################################
# Exact composed inverses agree with reflected Euler for constant coefficients.
# Paths that touch 0 coalesce, so several starts may end at the same value.
x0 = np.array([0.0, 0.5, 1.0])
incs = np.tile(hat.increments, (x0.size, 1))
d = dual_motion(model, x0, incs, grid.h)
r = reflected_motion(dual_transform(model), x0, incs, grid.h)[0]
print(d, r)
