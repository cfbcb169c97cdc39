"""Sample-size experiments for stochastic convex optimisation on lp balls."""

from .pgeom import PBall, ProxSetup, bregman_step, kappa_p, norm, project
from .problems import abs_regression, gauss_power, sharp_saddle, strongly_convex_quad

__all__ = [
    "PBall", "ProxSetup", "bregman_step", "kappa_p", "norm", "project",
    "abs_regression", "gauss_power", "sharp_saddle", "strongly_convex_quad",
]
