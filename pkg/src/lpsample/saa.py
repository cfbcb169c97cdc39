"""
Offline (sample average approximation) solvers.

A frozen sample defines the empirical objective; the inner solve is
deterministic, so (problem, N, seed) fixes the output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .pgeom import PBall, ProxSetup, kappa_p, project
from .sa import SolverError, _step_fn, default_step

MAX_INNER = 10**9
CERTIFICATES = ("iteration-bound", "analytic-gap", "exact")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EmpiricalObjective:
    """F_hat(x) = (1/N) sum_k f(x, xi_k) over a frozen sample."""

    sample: np.ndarray
    base: object
    M_hat: float = field(init=False)

    def __post_init__(self):
        if self.sample.ndim != 2 or self.sample.shape[0] < 1:
            raise ValueError("sample must hold at least one row")
        self.sample.setflags(write=False)
        object.__setattr__(self, "M_hat", float(np.mean(self.base.lipschitz(self.sample))))

    @property
    def n(self) -> int:
        return self.sample.shape[0]

    def loss(self, x) -> float:
        # np.sum uses pairwise summation along a contiguous axis.
        return float(np.sum(self.base.loss(x, self.sample)) / self.n)

    def subgrad(self, x) -> np.ndarray:
        g = self.base.subgrad(x, self.sample)
        return np.sum(np.broadcast_to(g, (self.n, np.size(x))), axis=0) / self.n

    def minimizer(self) -> Optional[np.ndarray]:
        return self.base.empirical_minimizer(self.sample)


@dataclass
class SAAResult:
    point: np.ndarray
    inner_iterations: int
    delta_target: float
    certificate: str
    n_samples: int = 0
    realized_gap: Optional[float] = None


def build_empirical(problem, n: int, rng) -> EmpiricalObjective:
    if n < 1:
        raise ValueError("N must be at least 1")
    return EmpiricalObjective(np.ascontiguousarray(problem.sample(rng, n)), problem)


def iteration_bound(kappa: float, M: float, R: float, delta: float) -> int:
    """T = ceil(kappa M^2 R^2 / delta^2), the averaged mirror descent count."""
    t = kappa * M * M * R * R / (delta * delta)
    if not t <= MAX_INNER:
        raise ConfigError(f"inner iteration count {t:.3g} exceeds {MAX_INNER}")
    return max(1, int(math.ceil(t)))


def _prox_for(ball: PBall, prox: Optional[ProxSetup]):
    if prox is None and ball.p <= 2:
        prox = ProxSetup.for_ball(ball)
    kappa = kappa_p(prox.p, ball.d) if prox is not None else 1.0
    return prox, kappa


def _md(emp, ball, prox, kappa, M, T, x, center=None, clamp=None, target=None, fstar=None):
    """Deterministic averaged mirror descent; optional early stop on a known F_hat*."""
    step = _step_fn(ball, prox)
    h = default_step(ball.R, M, kappa, T)
    total = np.zeros_like(x)
    check = 16
    for k in range(1, T + 1):
        total += x
        g = emp.subgrad(x)
        if not np.all(np.isfinite(g)):
            raise SolverError(f"non-finite subgradient at inner step {k}")
        x = step(x, g, h) if center is None else center + step(x - center, g, h)
        if clamp is not None:
            x = clamp(x)
        if target is not None and k == check:
            check *= 2
            avg = total / k
            if emp.loss(avg) - fstar <= target:
                return avg, k, True
    return total / T, T, False


def solve_empirical(emp: EmpiricalObjective, delta: float, prox: Optional[ProxSetup] = None,
                    method: str = "auto", x0=None) -> SAAResult:
    """Solve the empirical problem to accuracy ``delta``.

    ``"md"`` runs T = ceil(kappa M_hat^2 R^2 / delta^2) mirror-descent steps
    (certificate ``iteration-bound``); when the base problem has a closed-form
    empirical minimiser it stops once the realised gap of the average is at
    most delta (``analytic-gap``).  ``"exact"`` returns the closed-form
    minimiser; ``"auto"`` prefers it when available.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if method not in ("auto", "md", "exact"):
        raise ValueError(f"unknown inner method {method!r}")
    ball = emp.base.domain
    exact = emp.minimizer() if method in ("auto", "exact") else None
    if exact is not None:
        return SAAResult(exact, 0, delta, "exact", emp.n, 0.0)
    if method == "exact":
        raise ConfigError("no closed-form empirical minimiser for this problem")
    prox, kappa = _prox_for(ball, prox)
    start = project(np.zeros(ball.d) if x0 is None else np.asarray(x0, dtype=float), ball)
    if delta >= emp.M_hat * ball.R:
        return SAAResult(start, 0, delta, "iteration-bound", emp.n)
    T = iteration_bound(kappa, emp.M_hat, ball.R, delta)
    xs = emp.minimizer()
    fstar = emp.loss(xs) if xs is not None else None
    point, used, early = _md(emp, ball, prox, kappa, emp.M_hat, T, start,
                             target=delta if xs is not None else None, fstar=fstar)
    cert = "analytic-gap" if early else "iteration-bound"
    realized = emp.loss(point) - fstar if xs is not None else None
    return SAAResult(point, used, delta, cert, emp.n, realized)


def sc_delta(mu: float, eps: float) -> float:
    return mu * eps * eps


def solve_empirical_sc(emp: EmpiricalObjective, mu: float, eps: float,
                       prox: Optional[ProxSetup] = None, method: str = "auto") -> SAAResult:
    """Solve to delta = mu eps^2 exploiting quadratic growth of F_hat.

    Stage j targets delta_j = delta 2^(J-j) on a ball of radius R_j around the
    previous output, with R_{j+1} = sqrt(2 delta_j / mu).
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    delta = sc_delta(mu, eps)
    ball = emp.base.domain
    exact = emp.minimizer() if method in ("auto", "exact") else None
    if exact is not None:
        return SAAResult(exact, 0, delta, "exact", emp.n, 0.0)
    if method == "exact":
        raise ConfigError("no closed-form empirical minimiser for this problem")
    prox, kappa = _prox_for(ball, prox)
    center = np.zeros(ball.d)
    top = emp.M_hat * 2.0 * ball.R
    if delta >= top:
        return SAAResult(center, 0, delta, "iteration-bound", emp.n)
    J = int(math.ceil(math.log2(top / delta)))

    def clamp(x):
        return x if ball.contains(x, 0.0) else project(x, ball)

    r, total = 2.0 * ball.R, 0
    for j in range(1, J + 1):
        dj = delta * 2.0 ** (J - j)
        local = PBall(ball.p, r, ball.d)
        T = iteration_bound(kappa, emp.M_hat, r, dj)
        center, used, _ = _md(emp, local, prox, kappa, emp.M_hat, T, center.copy(),
                              center=center, clamp=clamp)
        center = clamp(center)
        total += used
        r = min(r, math.sqrt(2.0 * dj / mu))
    xs = emp.minimizer()
    realized = emp.loss(center) - emp.loss(xs) if xs is not None else None
    return SAAResult(center, total, delta, "iteration-bound", emp.n, realized)


def saa_pipeline(problem, n: int, delta: float, prox: Optional[ProxSetup], rng,
                 method: str = "auto") -> SAAResult:
    return solve_empirical(build_empirical(problem, n, rng), delta, prox, method)


def saa_sc_pipeline(problem, n: int, eps: float, prox: Optional[ProxSetup], rng,
                    method: str = "auto") -> SAAResult:
    mu = problem.meta.mu
    return solve_empirical_sc(build_empirical(problem, n, rng), mu, eps, prox, method)


@dataclass
class SaddleCertificate:
    x: np.ndarray
    y: np.ndarray
    gap_x: float
    gap_y: float
    iterations: int


def empirical_saddle_gaps(problem, noise_means, x, y):
    """F_hat(x, y) - min_x' F_hat(x', y) and max_y' F_hat(x, y') - F_hat(x, y)."""
    v = problem.empirical_value(x, y, noise_means)
    bx, by = problem.empirical_best_x(noise_means), problem.empirical_best_y(noise_means)
    return v - problem.empirical_value(bx, y, noise_means), problem.empirical_value(x, by, noise_means) - v


def saa_saddle(problem, n: int, eps: float, rng, max_iter: int = 200_000, certificate: bool = False):
    """Deterministic mirror-prox on the empirical saddle until both gaps are <= eps/4.

    Starts at the centres of the two balls; gaps are checked at the start and
    on a doubling schedule.  Raises :class:`SolverError` at ``max_iter``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if n < 1:
        raise ValueError("N must be at least 1")
    sample = np.ascontiguousarray(problem.sample(rng, n))
    means = problem.mean_noise(sample)
    bx, by = problem.meta_x.domain, problem.meta_y.domain
    tol = eps / 4.0
    x, y = np.zeros(bx.d), np.zeros(by.d)
    gx, gy = empirical_saddle_gaps(problem, means, x, y)
    it = 0
    if not (gx <= tol and gy <= tol):
        step_x, step_y = _step_fn(bx, None), _step_fn(by, None)

        def grads(u, v):
            a = np.sum(problem.subgrad_x(u, v, sample), axis=0) / n
            b = np.sum(problem.supergrad_y(u, v, sample), axis=0) / n
            return a, b

        sx, sy = np.zeros(bx.d), np.zeros(by.d)
        check = 16
        Mx, My = problem.meta_x.M, problem.meta_y.M
        while it < max_iter:
            it += 1
            hx = bx.R / (Mx * math.sqrt(it))
            hy = by.R / (My * math.sqrt(it))
            a, b = grads(x, y)
            xm, ym = step_x(x, a, hx), step_y(y, -b, hy)
            a, b = grads(xm, ym)
            x, y = step_x(x, a, hx), step_y(y, -b, hy)
            sx += xm
            sy += ym
            if it == check or it == max_iter:
                check *= 2
                xa, ya = sx / it, sy / it
                gx, gy = empirical_saddle_gaps(problem, means, xa, ya)
                if gx <= tol and gy <= tol:
                    x, y = xa, ya
                    break
        else:
            raise SolverError(f"saddle certificate not reached: gaps {gx:.3g}, {gy:.3g} > {tol:.3g}")
    if certificate:
        return SaddleCertificate(x, y, gx, gy, it)
    return x, y
