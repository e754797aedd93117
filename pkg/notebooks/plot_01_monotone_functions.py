"""
Monotone maps, inverses and metrics
===================================

Build nondecreasing right-continuous maps, invert them, compose them and
measure distances with the sup and Lévy-type metrics.
"""

####################################################################
# A map that kills ``[0, 1)`` and jumps to 3 at 1
import numpy as np

from dualflow import MonotoneFn, compose, levy_metric, right_inverse_fn, sup_metric

step = MonotoneFn([0.0, 1.0], [0.0, 3.0], [0.0], 1.0)
print(step(np.array([0.5, 1.0, 2.0])))

####################################################################
# The right-continuous inverse turns the flat piece into a jump and the jump
# into a flat piece.
inv = right_inverse_fn(step)
print(inv(np.array([0.0, 1.0, 2.9, 3.5])))

####################################################################
# Composition and the two metrics
ident = MonotoneFn.identity()
shifted = MonotoneFn.affine(1.0, 0.4)
print("compose:", compose(shifted, step)(2.0))
print("sup:", float(sup_metric(ident, shifted, 2.0)), "levy:", levy_metric(ident, shifted, 2.0))
