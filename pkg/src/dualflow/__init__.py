"""Dual flows of absorbing Euler schemes on the half line.

Submodules:

* ``monotone_fn``: nondecreasing right-continuous maps, inverses and metrics.
* ``coefficients``: coefficient families, the dual drift and standing conditions.
* ``noise``: counter-based Gaussian increments and time reversal.
* ``flow``: absorbing Euler flows, their duals and reflected schemes.
* ``duality_mc``: Monte Carlo duality and error-bound checks.
* ``properties``: randomized checks of the inverse and metric inequalities.
"""
from .coefficients import *  # noqa: F401,F403
from .duality_mc import *  # noqa: F401,F403
from .flow import *  # noqa: F401,F403
from .monotone_fn import *  # noqa: F401,F403
from .noise import *  # noqa: F401,F403
from .config import RunConfig, load_config, ConfigError  # noqa: F401

__version__ = "0.1.0"
