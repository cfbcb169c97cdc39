"""
Regularisation of merely convex problems by mu V(x, x0).
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

import numpy as np

from .pgeom import ProxSetup, kappa_p, project, prox_grad, prox_value
from .problems import StochasticProblem, _rows


class RegularizedProblem(StochasticProblem):
    """f_mu(x, xi) = f(x, xi) + mu V(x, x0); strongly convex with modulus mu."""

    def __init__(self, inner: StochasticProblem, mu: float, x0=None, prox: Optional[ProxSetup] = None):
        ball = inner.domain
        if ball.p > 2:
            raise ValueError("no prox setup for p > 2")
        if mu < 0:
            raise ValueError("mu must be nonnegative")
        self.inner = inner
        self.mu = float(mu)
        self.prox = prox if prox is not None else ProxSetup.for_ball(ball)
        if self.prox.p != min(ball.p, 2.0):
            raise ValueError("prox setup must match the domain p")
        self.center = np.zeros(ball.d) if x0 is None else np.asarray(x0, dtype=float)
        if not ball.contains(self.center):
            raise ValueError("x0 must be feasible")
        self.name = f"{inner.name}+reg"
        self.xi_dim = inner.xi_dim
        self.meta = replace(inner.meta, mu=self.mu)

    def penalty(self, x) -> float:
        return self.mu * prox_value(self.prox, x, self.center)

    def sample(self, rng, n=1):
        return self.inner.sample(rng, n)

    def loss(self, x, xi):
        return self.inner.loss(x, xi) + self.penalty(x)

    def subgrad(self, x, xi):
        return self.inner.subgrad(x, xi) + self.mu * prox_grad(self.prox, x, self.center)

    def true_value(self, x) -> float:
        return self.inner.true_value(x) + self.penalty(x)

    def lipschitz(self, xi):
        rows, _ = _rows(xi)
        # ||grad V|| in the dual norm is at most about 2 kappa e^2 R at the far side of the ball.
        extra = self.mu * 2.0 * np.e**2 * kappa_p(self.prox.p, self.d) * self.domain.R
        return self.inner.lipschitz(rows) + extra

    def empirical_minimizer(self, xi):
        if not hasattr(self.inner, "weighted_minimizer"):
            return None
        wp, wm = self.inner.sign_weights(xi)
        return self.inner.weighted_minimizer(wp, wm, self.mu, self.center, self.prox)

    def true_opt(self):
        if not hasattr(self.inner, "weighted_minimizer"):
            raise NotImplementedError("no closed-form regularised optimum")
        half = np.full(self.inner.m, 0.5 / self.inner.m)
        x = self.inner.weighted_minimizer(half, half, self.mu, self.center, self.prox)
        return x, self.true_value(x)


def regularize(problem: StochasticProblem, mu: float, x0=None, prox: Optional[ProxSetup] = None) -> RegularizedProblem:
    if not mu > 0:
        raise ValueError("mu must be positive")
    return RegularizedProblem(problem, mu, x0, prox)


def mu_for_eps(eps: float, p: float, d: float, R: float) -> float:
    """Limiting choice eps / (2 kappa_p(d) R^2)."""
    if not (eps > 0 and R > 0):
        raise ValueError("eps and R must be positive")
    return eps / (2.0 * kappa_p(min(p, 2.0), d) * R * R)


def transfer_guarantee(eps: float, reg_result_gap: float, mu: float, V_star: float) -> bool:
    """Both halves of the eps/2 + eps/2 split hold."""
    return bool(reg_result_gap <= eps / 2.0 and mu * V_star <= eps / 2.0)


def v_star(problem, prox: ProxSetup, x0=None) -> float:
    """V(x*, x0) at the solution nearest x0, when the problem exposes one."""
    x0 = np.zeros(problem.d) if x0 is None else np.asarray(x0, dtype=float)
    if hasattr(problem, "nearest_solution"):
        xs = problem.nearest_solution(x0)
    else:
        xs = problem.true_opt()[0]
    return prox_value(prox, project(xs, problem.domain), x0)
