"""
Online (stochastic approximation) solvers.

Every solver consumes exactly ``n_steps`` fresh samples and returns the
uniform average of the points at which the subgradients were queried,
unless configured to return the last iterate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .pgeom import PBall, ProxSetup, bregman_step, kappa_p, norm, project

CHUNK = 4096


@dataclass(frozen=True)
class SAConfig:
    """Run configuration.

    ``step=None`` selects the robust step R / (M sqrt(kappa N)).  ``step_rule``
    is ``"constant"`` or ``"decreasing"`` (h / sqrt(k)).
    """

    n_steps: int
    step: Optional[float] = None
    step_rule: str = "constant"
    averaging: str = "uniform"
    prox: Optional[ProxSetup] = None
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.n_steps < 0:
            raise ValueError("n_steps must be nonnegative")
        if self.step is not None and self.step < 0:
            raise ValueError("step must be nonnegative")
        if self.step_rule not in ("constant", "decreasing"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.averaging not in ("uniform", "last"):
            raise ValueError(f"unknown averaging {self.averaging!r}")


@dataclass
class SAResult:
    point: np.ndarray
    samples_used: int
    stage_radii: Optional[list] = None
    stage_budgets: Optional[list] = None


class SolverError(RuntimeError):
    pass


def _sample_stream(problem, rng, n):
    left = n
    while left > 0:
        k = min(CHUNK, left)
        block = problem.sample(rng, k)
        for row in block:
            yield row
        left -= k


def _geometry_kappa(ball: PBall) -> float:
    return kappa_p(min(ball.p, 2.0), ball.d)


def _step_fn(ball: PBall, prox: Optional[ProxSetup]):
    """x_next = argmin_{x in ball} <h g, x> + D(x, z)."""
    if prox is None or prox.euclidean:
        if ball.p == 2:
            R = ball.R

            def euclid(z, g, h):
                x = z - h * g
                nx = math.sqrt(float(x @ x))
                return x * (R / nx) if nx > R else x

            return euclid
        return lambda z, g, h: project(z - h * g, ball)
    return lambda z, g, h: bregman_step(prox, z, g, h, ball)


def _run(problem, n, h, step_rule, averaging, step, x, rng, center=None, clamp=None):
    """Shared loop; ``center`` shifts a local ball, ``clamp`` keeps iterates feasible."""
    total = np.zeros_like(x)
    last = x
    for k, xi in enumerate(_sample_stream(problem, rng, n), start=1):
        total += x
        g = problem.subgrad(x, xi)
        if not np.all(np.isfinite(g)):
            raise SolverError(f"non-finite subgradient at step {k}")
        hk = h if step_rule == "constant" else h / math.sqrt(k)
        if center is None:
            x = step(x, g, hk)
        else:
            x = center + step(x - center, g, hk)
            if clamp is not None:
                x = clamp(x)
        last = x
    if n == 0:
        return x
    return total / n if averaging == "uniform" else last


def _start(problem, cfg):
    ball = problem.domain
    x0 = np.zeros(ball.d) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
    return project(x0, ball)


def default_step(R: float, M: float, kappa: float, n: int) -> float:
    return R / (M * math.sqrt(kappa * max(n, 1)))


def sgd_projected(problem, cfg: SAConfig, rng) -> SAResult:
    """Projected SGD x <- proj(x - h g(x, xi)) with trajectory averaging."""
    ball = problem.domain
    h = cfg.step if cfg.step is not None else default_step(ball.R, problem.meta.M, 1.0, cfg.n_steps)
    x = _start(problem, cfg)
    point = _run(problem, cfg.n_steps, h, cfg.step_rule, cfg.averaging, _step_fn(ball, None), x, rng)
    return SAResult(point, cfg.n_steps)


def mirror_descent(problem, cfg: SAConfig, rng) -> SAResult:
    """Stochastic mirror descent with the prox setup of the domain ball."""
    ball = problem.domain
    if ball.p > 2:
        return sgd_projected(problem, cfg, rng)
    prox = cfg.prox if cfg.prox is not None else ProxSetup.for_ball(ball)
    kappa = kappa_p(prox.p, ball.d)
    h = cfg.step if cfg.step is not None else default_step(ball.R, problem.meta.M, kappa, cfg.n_steps)
    x = _start(problem, cfg)
    point = _run(problem, cfg.n_steps, h, cfg.step_rule, cfg.averaging, _step_fn(ball, prox), x, rng)
    return SAResult(point, cfg.n_steps)


def restart_schedule(eps, sigma, gamma, mu_gamma, M, R, kappa, const=4.0):
    """Stage targets, radii and nominal budgets of the restarted scheme.

    Stage j (1-based) targets eps_j = eps 2^(J-j) on a ball of radius R_j,
    with R_1 = R and R_{j+1} = min(R_j, (2 eps_j / mu_gamma)^(1/gamma)).
    Budgets are const kappa M^2 R_j^2 / eps_j^2 times ln(J / sigma).
    """
    if gamma < 1:
        raise ValueError("growth exponent must be >= 1")
    if not (eps > 0 and mu_gamma > 0):
        raise ValueError("eps and mu_gamma must be positive")
    eps0 = M * R
    if eps >= eps0:
        return [], [], []
    J = int(math.ceil(math.log2(eps0 / eps)))
    conf = max(1.0, math.log(J / sigma))
    targets, radii, budgets = [], [], []
    r = R
    for j in range(1, J + 1):
        e = eps * 2.0 ** (J - j)
        targets.append(e)
        radii.append(r)
        budgets.append(int(math.ceil(const * kappa * M * M * r * r / (e * e) * conf)))
        r = min(r, (2.0 * e / mu_gamma) ** (1.0 / gamma))
    return targets, radii, budgets


def _split_budget(budget, weights):
    w = np.asarray(weights, dtype=float)
    parts = np.floor(budget * w / w.sum()).astype(int)
    parts[-1] += budget - int(parts.sum())
    return [int(v) for v in parts]


def restarted_sa(problem, eps, sigma, gamma, mu_gamma, rng, budget: Optional[int] = None,
                 const: float = 4.0, prox: Optional[ProxSetup] = None, x0=None) -> SAResult:
    """Restarted mirror descent for problems with gamma-growth.

    Each stage runs mirror descent on a ball around the previous output.  If
    ``budget`` is given, the nominal stage budgets are rescaled to sum to it
    (a stage may then receive zero samples and returns its centre).
    """
    domain = problem.domain
    if prox is None and domain.p <= 2:
        prox = ProxSetup.for_ball(domain)
    kappa = kappa_p(prox.p, domain.d) if prox is not None else 1.0
    center = project(np.zeros(domain.d) if x0 is None else np.asarray(x0, dtype=float), domain)
    R = domain.R + norm(center, domain.p)
    M = problem.meta.M
    targets, radii, budgets = restart_schedule(eps, sigma, gamma, mu_gamma, M, R, kappa, const)
    if not targets:
        if budget:
            for _ in _sample_stream(problem, rng, budget):
                pass
        return SAResult(center, budget or 0, [], [])
    if budget is not None:
        budgets = _split_budget(budget, budgets)

    def clamp(x):
        return x if domain.contains(x, 0.0) else project(x, domain)

    used = 0
    for r, n in zip(radii, budgets):
        if n == 0:
            continue
        local = PBall(domain.p, r, domain.d)
        step = _step_fn(local, prox)
        h = default_step(r, M, kappa, n)
        center = _run(problem, n, h, "constant", "uniform", step, center.copy(), rng,
                      center=center, clamp=clamp)
        center = clamp(center)
        used += n
    return SAResult(center, used, radii, budgets)


def sa_saddle(problem, cfg: SAConfig, rng):
    """Stochastic mirror-prox (extragradient) with averaging of the midpoints.

    Each iteration draws two samples; with odd ``n_steps`` the last iteration
    reuses its first sample for the correction.  Returns ``(x_hat, y_hat)``.
    """
    bx, by = problem.meta_x.domain, problem.meta_y.domain
    px = cfg.prox if cfg.prox is not None else (ProxSetup.for_ball(bx) if bx.p <= 2 else None)
    py = ProxSetup.for_ball(by) if by.p <= 2 else None
    step_x, step_y = _step_fn(bx, px), _step_fn(by, py)
    n = cfg.n_steps
    iters = (n + 1) // 2
    kx, ky = _geometry_kappa(bx), _geometry_kappa(by)
    if cfg.step is not None:
        hx = hy = cfg.step
    else:
        hx = default_step(bx.R, problem.meta_x.M, kx, 2 * iters)
        hy = default_step(by.R, problem.meta_y.M, ky, 2 * iters)
    if cfg.x0 is None:
        x, y = np.zeros(bx.d), np.zeros(by.d)
    else:
        x, y = (project(np.asarray(v, dtype=float), b) for v, b in zip(cfg.x0, (bx, by)))
    sx, sy = np.zeros(bx.d), np.zeros(by.d)
    stream = _sample_stream(problem, rng, n)
    for k in range(1, iters + 1):
        xi = next(stream)
        xi2 = next(stream, xi)
        rule = 1.0 if cfg.step_rule == "constant" else 1.0 / math.sqrt(k)
        gx, gy = problem.subgrad_x(x, y, xi), problem.supergrad_y(x, y, xi)
        if not (np.all(np.isfinite(gx)) and np.all(np.isfinite(gy))):
            raise SolverError(f"non-finite subgradient at step {k}")
        xm, ym = step_x(x, gx, hx * rule), step_y(y, -gy, hy * rule)
        gx, gy = problem.subgrad_x(xm, ym, xi2), problem.supergrad_y(xm, ym, xi2)
        if not (np.all(np.isfinite(gx)) and np.all(np.isfinite(gy))):
            raise SolverError(f"non-finite subgradient at step {k}")
        x, y = step_x(x, gx, hx * rule), step_y(y, -gy, hy * rule)
        sx += xm
        sy += ym
    if iters == 0:
        return x, y
    if cfg.averaging == "last":
        return x, y
    return sx / iters, sy / iters
