"""
Stochastic test problems with analytic F, F* and regime constants.

Samples are float arrays with one row per realisation; every oracle accepts
either a single row or a batch and vectorises over the leading axis.  All
randomness comes from the ``rng`` handed to :meth:`sample`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .pgeom import PBall, ProxSetup, norm, project


@dataclass(frozen=True)
class OracleMeta:
    """Regime constants of a stochastic problem.

    ``M`` is a Lipschitz bound in the p-norm (for unbounded noise, the mean
    part plus the RMS of the noise part); ``lam`` is the subgaussian
    parameter of the centred loss increments, when known analytically.
    """

    M: float
    domain: PBall
    mu: float = 0.0
    gamma: Optional[float] = None
    mu_gamma: Optional[float] = None
    lam: Optional[float] = None

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError("M must be positive")
        if self.gamma is not None:
            if self.gamma < 1:
                raise ValueError("growth exponent must be >= 1")
            if not (self.mu_gamma and self.mu_gamma > 0):
                raise ValueError("mu_gamma must be positive when gamma is set")


class StochasticProblem:
    """Oracle bundle for min_{x in X} F(x) = E f(x, xi)."""

    name = "abstract"
    meta: OracleMeta
    xi_dim: int

    @property
    def domain(self) -> PBall:
        return self.meta.domain

    @property
    def d(self) -> int:
        return self.meta.domain.d

    def sample(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        raise NotImplementedError

    def loss(self, x, xi):
        raise NotImplementedError

    def subgrad(self, x, xi):
        raise NotImplementedError

    def true_value(self, x) -> float:
        raise NotImplementedError

    def true_opt(self):
        """Return ``(x_star, F_star)``."""
        raise NotImplementedError

    def gap(self, x) -> float:
        return self.true_value(x) - self.true_opt()[1]

    def lipschitz(self, xi) -> np.ndarray:
        """Per-sample Lipschitz constant M(xi) in the domain p-norm."""
        raise NotImplementedError

    def empirical_minimizer(self, xi) -> Optional[np.ndarray]:
        """Exact minimiser of the sample average over ``xi``, if closed form."""
        return None


def _rows(xi):
    xi = np.asarray(xi, dtype=float)
    return xi[None, :] if xi.ndim == 1 else xi, xi.ndim == 1


class GaussPower(StochasticProblem):
    """f(x, xi) = ||x||_2^gamma - gamma s <xi, x>, xi ~ N(0, I_d), X = B_2^d(R).

    F(x) = ||x||^gamma, so x* = 0 and F* = 0; gamma-growth holds with
    mu_gamma = 1.  The loss increment noise is -gamma s <xi, y - x>, which is
    subgaussian with parameter gamma s.
    """

    name = "gauss-power"

    def __init__(self, d: int, gamma: float = 2.0, s: float = 1.0, R: float = 1.0):
        if d < 1 or gamma < 1 or not s > 0:
            raise ValueError("need d >= 1, gamma >= 1, s > 0")
        self.gamma = float(gamma)
        self.s = float(s)
        self.xi_dim = d
        self.M_det = self.gamma * R ** (self.gamma - 1.0)
        self.M_noise_rms = self.gamma * self.s * math.sqrt(d)
        self.meta = OracleMeta(
            M=self.M_det + self.M_noise_rms,
            domain=PBall(2.0, R, d),
            mu=2.0 if self.gamma == 2.0 else 0.0,
            gamma=self.gamma,
            mu_gamma=1.0,
            lam=self.gamma * self.s,
        )

    def sample(self, rng, n=1):
        return rng.standard_normal((n, self.xi_dim))

    def loss(self, x, xi):
        rows, single = _rows(xi)
        out = norm(x, 2) ** self.gamma - self.gamma * self.s * (rows @ x)
        return out[0] if single else out

    def _det_grad(self, x):
        nx = norm(x, 2)
        if nx == 0.0:
            return np.zeros_like(x)
        return self.gamma * nx ** (self.gamma - 2.0) * x

    def subgrad(self, x, xi):
        x = np.asarray(x, dtype=float)
        return self._det_grad(x) - self.gamma * self.s * np.asarray(xi, dtype=float)

    def true_value(self, x):
        return norm(x, 2) ** self.gamma

    def true_opt(self):
        return np.zeros(self.d), 0.0

    def lipschitz(self, xi):
        rows, _ = _rows(xi)
        return self.M_det + self.gamma * self.s * np.sqrt(np.sum(rows**2, axis=1))

    def empirical_minimizer(self, xi):
        rows, _ = _rows(xi)
        xbar = rows.mean(axis=0)
        nb = norm(xbar, 2)
        if nb == 0.0:
            return np.zeros(self.d)
        R = self.domain.R
        pull = self.s * nb
        if self.gamma == 1.0:
            r = R if pull > 1.0 else 0.0
        else:
            r = min(R, pull ** (1.0 / (self.gamma - 1.0)))
        return xbar * (r / nb)


class StronglyConvexQuad(StochasticProblem):
    """f(x, xi) = (mu/2) ||x - c - s xi||_2^2 on B_2^d(R), with ||c|| <= R/2.

    F(x) = (mu/2)||x - c||^2 + (mu/2) s^2 d, so x* = c.
    """

    name = "sc-quad"

    def __init__(self, d: int, mu: float = 1.0, s: float = 1.0, R: float = 1.0, center=None):
        if d < 1 or not mu > 0 or s < 0:
            raise ValueError("need d >= 1, mu > 0, s >= 0")
        self.mu = float(mu)
        self.s = float(s)
        self.xi_dim = d
        if center is None:
            center = np.full(d, 0.5 * R / math.sqrt(d))
        self.center = np.asarray(center, dtype=float)
        if norm(self.center, 2) > 0.5 * R * (1 + 1e-12):
            raise ValueError("center must satisfy ||c|| <= R/2")
        self._reach = R + norm(self.center, 2)
        self.meta = OracleMeta(
            M=self.mu * (self._reach + self.s * math.sqrt(d)),
            domain=PBall(2.0, R, d),
            mu=self.mu,
            gamma=2.0,
            mu_gamma=self.mu / 2.0,
            lam=self.mu * self.s,
        )

    def sample(self, rng, n=1):
        return rng.standard_normal((n, self.xi_dim))

    def loss(self, x, xi):
        rows, single = _rows(xi)
        r = x - self.center - self.s * rows
        out = 0.5 * self.mu * np.sum(r * r, axis=1)
        return out[0] if single else out

    def subgrad(self, x, xi):
        return self.mu * (np.asarray(x, dtype=float) - self.center - self.s * np.asarray(xi, dtype=float))

    def true_value(self, x):
        r = np.asarray(x, dtype=float) - self.center
        return 0.5 * self.mu * (float(r @ r) + self.s**2 * self.d)

    def true_opt(self):
        return self.center.copy(), 0.5 * self.mu * self.s**2 * self.d

    def gap(self, x):
        r = np.asarray(x, dtype=float) - self.center
        return 0.5 * self.mu * float(r @ r)

    def lipschitz(self, xi):
        rows, _ = _rows(xi)
        return self.mu * (self._reach + self.s * np.sqrt(np.sum(rows**2, axis=1)))

    def empirical_minimizer(self, xi):
        rows, _ = _rows(xi)
        return project(self.center + self.s * rows.mean(axis=0), self.domain)


class AbsRegression(StochasticProblem):
    """Least-absolute-deviation regression over a finite direction mixture.

    xi = (j, e): direction a = e_j drawn uniformly from the first ``m``
    coordinate axes and a response b = theta_j + e * noise with a fair sign
    e = +-1.  Then f(x, xi) = |x_j - b| and

        F(x) = (1/m) sum_j max(|x_j - theta_j|, noise),

    so F* = noise, attained on the box |x_j - theta_j| <= noise (j < m) with
    the remaining d - m coordinates free.  Growth is sharp: gamma = 1 with
    mu_gamma = 1/m in any p-norm.
    """

    name = "abs-reg"

    def __init__(self, d: int, n_directions: int, noise: float = 0.05, R: float = 1.0,
                 p: float = 2.0, theta=None):
        if d < 2 or not 1 <= n_directions < d:
            raise ValueError("need d >= 2 and 1 <= n_directions < d")
        if noise < 0:
            raise ValueError("noise must be nonnegative")
        self.m = int(n_directions)
        self.noise = float(noise)
        self.xi_dim = 2
        ball = PBall(p, R, d)
        if theta is None:
            # Alternating signs, magnitudes spread by golden-ratio fractions so
            # that no two coordinates share a step-size lattice phase.
            j = np.arange(self.m)
            mags = 0.5 + 0.5 * np.mod((j + 1) * (math.sqrt(5.0) - 1.0) / 2.0, 1.0)
            theta = (-1.0) ** j * mags
            theta *= 0.5 * R / norm(theta, p)
        self.theta = np.asarray(theta, dtype=float)
        if self.theta.shape != (self.m,):
            raise ValueError("theta must have one entry per direction")
        self.meta = OracleMeta(
            M=1.0, domain=ball, mu=0.0, gamma=1.0, mu_gamma=1.0 / self.m, lam=1.0,
        )
        self._solver_cache = {}

    def sample(self, rng, n=1):
        j = rng.integers(0, self.m, size=n)
        e = 2.0 * rng.integers(0, 2, size=n) - 1.0
        return np.column_stack([j.astype(float), e])

    def _split(self, rows):
        j = rows[:, 0].astype(np.intp)
        b = self.theta[j] + rows[:, 1] * self.noise
        return j, b

    def loss(self, x, xi):
        rows, single = _rows(xi)
        j, b = self._split(rows)
        out = np.abs(np.asarray(x, dtype=float)[j] - b)
        return out[0] if single else out

    def subgrad(self, x, xi):
        x = np.asarray(x, dtype=float)
        rows, single = _rows(xi)
        j, b = self._split(rows)
        g = np.zeros((rows.shape[0], x.size))
        g[np.arange(rows.shape[0]), j] = np.sign(x[j] - b)
        return g[0] if single else g

    def true_value(self, x):
        x = np.asarray(x, dtype=float)
        return float(np.mean(np.maximum(np.abs(x[: self.m] - self.theta), self.noise)))

    def true_opt(self):
        x = np.zeros(self.d)
        x[: self.m] = self.theta
        return x, self.noise

    def nearest_solution(self, x0) -> np.ndarray:
        """Solution closest to ``x0`` coordinatewise (minimises any V(., x0))."""
        x = np.array(x0, dtype=float)
        x[: self.m] = np.clip(x[: self.m], self.theta - self.noise, self.theta + self.noise)
        return x

    def lipschitz(self, xi):
        rows, _ = _rows(xi)
        return np.ones(rows.shape[0])

    def sign_weights(self, xi):
        """Fractions of the sample hitting (j, +) and (j, -)."""
        rows, _ = _rows(xi)
        j = rows[:, 0].astype(np.intp)
        pos = rows[:, 1] > 0
        n = rows.shape[0]
        wp = np.bincount(j[pos], minlength=self.m) / n
        wm = np.bincount(j[~pos], minlength=self.m) / n
        return wp, wm

    def empirical_minimizer(self, xi):
        wp, wm = self.sign_weights(xi)
        x = np.zeros(self.d)
        hi, lo = self.theta + self.noise, self.theta - self.noise
        # Weighted median of the two responses; on ties take the point nearest 0.
        x[: self.m] = np.where(wp > wm, hi, np.where(wm > wp, lo, np.clip(0.0, lo, hi)))
        if self.domain.contains(x):
            return x
        return self.weighted_minimizer(wp, wm)

    def weighted_minimizer(self, wp, wm, mu: float = 0.0, x0=None, prox: Optional[ProxSetup] = None):
        """Minimise sum_j wp_j|x_j - hi_j| + wm_j|x_j - lo_j| + mu V(x, x0) on the ball.

        Solved as a conic program; the ``a``-norm exponent is rationalised by
        the modelling layer, which perturbs V by well under 1e-3 relative.
        """
        import cvxpy as cp

        if x0 is None:
            x0 = np.zeros(self.d)
        key = (float(mu), tuple(np.asarray(x0, dtype=float)), prox)
        if key not in self._solver_cache:
            x = cp.Variable(self.d)
            pw = cp.Parameter(self.m, nonneg=True)
            mw = cp.Parameter(self.m, nonneg=True)
            obj = (cp.sum(cp.multiply(pw, cp.abs(x[: self.m] - (self.theta + self.noise))))
                   + cp.sum(cp.multiply(mw, cp.abs(x[: self.m] - (self.theta - self.noise)))))
            if mu > 0:
                if prox is None:
                    raise ValueError("regularised solve needs a prox setup")
                obj = obj + mu * prox.coef * cp.square(cp.pnorm(x - np.asarray(x0, dtype=float), prox.a))
            ball = self.domain
            cons = [cp.pnorm(x, ball.p if math.isfinite(ball.p) else "inf") <= ball.R]
            self._solver_cache[key] = (cp.Problem(cp.Minimize(obj), cons), x, pw, mw)
        prob, x, pw, mw = self._solver_cache[key]
        pw.value = np.asarray(wp, dtype=float)
        mw.value = np.asarray(wm, dtype=float)
        prob.solve(solver="CLARABEL")
        if x.value is None:
            raise RuntimeError(f"conic solve failed: {prob.status}")
        sol = np.asarray(x.value, dtype=float)
        nrm = norm(sol, self.domain.p)
        if nrm > self.domain.R:
            sol = sol * (self.domain.R / nrm)
        return sol


class SaddleProblem:
    """Oracle bundle for min_x max_y F(x, y) = E f(x, y, xi)."""

    name = "abstract-saddle"
    meta_x: OracleMeta
    meta_y: OracleMeta

    @property
    def d_x(self) -> int:
        return self.meta_x.domain.d

    @property
    def d_y(self) -> int:
        return self.meta_y.domain.d

    def split(self, xi):
        rows, single = _rows(xi)
        return rows[:, : self.d_x], rows[:, self.d_x:], single


class SharpSaddle(SaddleProblem):
    """f(x, y, xi) = mu_x||x|| - mu_y||y|| + s<xi_x, x> + s<xi_y, y> on unit balls.

    The saddle point is (0, 0) with value 0; both best responses are 0, so the
    duality gap at (x, y) is mu_x||x|| + mu_y||y||.
    """

    name = "sharp-saddle"

    def __init__(self, d_x: int, d_y: int, mu_x: float = 1.0, mu_y: float = 1.0, s: float = 0.1):
        if d_x < 1 or d_y < 1 or not (mu_x > 0 and mu_y > 0) or s < 0:
            raise ValueError("need positive dimensions and moduli, s >= 0")
        self.mu_x, self.mu_y, self.s = float(mu_x), float(mu_y), float(s)
        self.meta_x = OracleMeta(M=mu_x + s * math.sqrt(d_x), domain=PBall(2.0, 1.0, d_x),
                                 gamma=1.0, mu_gamma=mu_x, lam=s)
        self.meta_y = OracleMeta(M=mu_y + s * math.sqrt(d_y), domain=PBall(2.0, 1.0, d_y),
                                 gamma=1.0, mu_gamma=mu_y, lam=s)

    def sample(self, rng, n=1):
        return rng.standard_normal((n, self.d_x + self.d_y))

    def loss(self, x, y, xi):
        ax, ay, single = self.split(xi)
        out = self.mu_x * norm(x, 2) - self.mu_y * norm(y, 2) + self.s * (ax @ x + ay @ y)
        return out[0] if single else out

    @staticmethod
    def _unit(v):
        n = norm(v, 2)
        return v / n if n > 0 else np.zeros_like(v)

    def subgrad_x(self, x, y, xi):
        ax, _, single = self.split(xi)
        g = self.mu_x * self._unit(np.asarray(x, dtype=float)) + self.s * ax
        return g[0] if single else g

    def supergrad_y(self, x, y, xi):
        _, ay, single = self.split(xi)
        g = -self.mu_y * self._unit(np.asarray(y, dtype=float)) + self.s * ay
        return g[0] if single else g

    def true_value(self, x, y):
        return self.mu_x * norm(x, 2) - self.mu_y * norm(y, 2)

    def best_response_x(self, y):
        return np.zeros(self.d_x)

    def best_response_y(self, x):
        return np.zeros(self.d_y)

    def duality_gap(self, x, y) -> float:
        return self.true_value(x, self.best_response_y(x)) - self.true_value(self.best_response_x(y), y)

    def mean_noise(self, xi):
        ax, ay, _ = self.split(xi)
        return ax.mean(axis=0), ay.mean(axis=0)

    def empirical_value(self, x, y, noise_means):
        mx, my = noise_means
        return self.true_value(x, y) + self.s * (float(mx @ x) + float(my @ y))

    def empirical_best_x(self, noise_means):
        """argmin_x of the sample-average saddle function (independent of y)."""
        mx, _ = noise_means
        pull = self.s * norm(mx, 2)
        if pull > self.mu_x:
            return -self._unit(mx) * self.meta_x.domain.R
        return np.zeros(self.d_x)

    def empirical_best_y(self, noise_means):
        _, my = noise_means
        pull = self.s * norm(my, 2)
        if pull > self.mu_y:
            return self._unit(my) * self.meta_y.domain.R
        return np.zeros(self.d_y)


def gauss_power(d: int, gamma: float = 2.0, s: float = 1.0) -> GaussPower:
    return GaussPower(d, gamma, s)


def strongly_convex_quad(d: int, mu: float = 1.0, s: float = 1.0) -> StronglyConvexQuad:
    return StronglyConvexQuad(d, mu, s)


def abs_regression(d: int, n_directions: int, noise: float = 0.05, **kw) -> AbsRegression:
    return AbsRegression(d, n_directions, noise, **kw)


def sharp_saddle(d_x: int, d_y: int, mu_x: float = 1.0, mu_y: float = 1.0, s: float = 0.1) -> SharpSaddle:
    return SharpSaddle(d_x, d_y, mu_x, mu_y, s)


PROBLEMS = {
    "gauss-power": GaussPower,
    "sc-quad": StronglyConvexQuad,
    "abs-reg": AbsRegression,
    "sharp-saddle": SharpSaddle,
}
