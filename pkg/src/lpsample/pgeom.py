"""
Geometry of l_p balls.

Norms, dual exponents, Euclidean projections onto B_p^d(R), and the prox
setup (distance-generating function) used by mirror descent for p in [1, 2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

FEAS_RTOL = 1e-9
DUAL_TOL = 1e-12
MAX_BISECT = 200
_INNER_BISECT = 64


class ProjectionError(RuntimeError):
    """A scalar dual search failed to converge within its iteration cap."""


def _check_p(p):
    if not p >= 1:
        raise ValueError(f"norm exponent must be >= 1, got {p}")


def norm(x, p) -> float:
    """l_p norm of ``x``; ``p`` may be ``math.inf``."""
    _check_p(p)
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    if p == 2:
        return float(np.sqrt(np.dot(x, x)))
    if p == 1:
        return float(np.sum(np.abs(x)))
    if math.isinf(p):
        return float(np.max(np.abs(x)))
    ax = np.abs(x)
    top = ax.max()
    if top == 0.0:
        return 0.0
    return float(top * np.sum((ax / top) ** p) ** (1.0 / p))


def dual_exponent(p) -> float:
    """The q with 1/p + 1/q = 1."""
    _check_p(p)
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def kappa_p(p, d: int) -> float:
    """Geometry factor: 1 for p >= 2, min(1/(p-1), 2 ln max(d, 2)) on [1, 2)."""
    _check_p(p)
    if d < 1:
        raise ValueError("dimension must be positive")
    if p >= 2:
        return 1.0
    log_part = 2.0 * math.log(max(d, 2))
    if p == 1:
        return log_part
    return min(1.0 / (p - 1.0), log_part)


@dataclass(frozen=True)
class PBall:
    """The ball {x in R^d : ||x||_p <= R} centred at the origin."""

    p: float
    R: float
    d: int

    def __post_init__(self):
        _check_p(self.p)
        if not self.R > 0:
            raise ValueError("radius must be positive")
        if self.d < 1:
            raise ValueError("dimension must be positive")

    @property
    def q(self) -> float:
        return dual_exponent(self.p)

    def contains(self, x, rtol: float = FEAS_RTOL) -> bool:
        return norm(x, self.p) <= self.R * (1.0 + rtol)


def _project_l1(x, R):
    ax = np.abs(x)
    if ax.sum() <= R:
        return x.copy()
    u = np.sort(ax)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css - R)[0][-1]
    theta = (css[rho] - R) / (rho + 1.0)
    return np.sign(x) * np.maximum(ax - theta, 0.0)


def _increasing_root(phi, dphi, lo, hi):
    """Vectorised safeguarded Newton for increasing phi with phi(lo) <= 0 <= phi(hi)."""
    t = 0.5 * (lo + hi)
    for _ in range(_INNER_BISECT):
        f = phi(t)
        lo = np.where(f < 0, t, lo)
        hi = np.where(f > 0, t, hi)
        with np.errstate(all="ignore"):
            tn = t - f / dphi(t)
        bad = ~np.isfinite(tn) | (tn < lo) | (tn > hi)
        tn = np.where(bad, 0.5 * (lo + hi), tn)
        if np.all(np.abs(tn - t) <= 1e-15 * np.maximum(1.0, np.abs(t))):
            return tn
        t = tn
    return t


def _solve_coord(a, lam, p):
    """Vectorised solve of t + lam * t**(p-1) = a for t in [0, a]."""
    return _increasing_root(lambda t: t + lam * t ** (p - 1.0) - a,
                            lambda t: 1.0 + lam * (p - 1.0) * t ** (p - 2.0),
                            np.zeros_like(a), a.copy())


def _project_general(x, R, p):
    # Work on the unit ball for conditioning; y = R * proj(x / R).
    a = np.abs(x) / R
    if np.sum(a**p) <= 1.0:
        return x.copy()

    def mass(lam):
        return np.sum(_solve_coord(a, lam, p) ** p)

    lo, hi = 0.0, 1.0
    n = 0
    while mass(hi) > 1.0:
        lo, hi = hi, 2.0 * hi
        n += 1
        if n > MAX_BISECT:
            raise ProjectionError("could not bracket the projection multiplier")
    try:
        lam = brentq(lambda v: mass(v) - 1.0, lo, hi, xtol=DUAL_TOL * max(1.0, hi), maxiter=MAX_BISECT)
    except RuntimeError as exc:
        raise ProjectionError(f"projection multiplier search failed: {exc}") from exc
    t = _solve_coord(a, lam, p)
    # Rescale away any residual excess from the root tolerance.
    s = np.sum(t**p) ** (1.0 / p)
    if s > 1.0:
        t = t / s
    return np.sign(x) * t * R


def project(x, ball: PBall) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``ball``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (ball.d,):
        raise ValueError(f"expected shape ({ball.d},), got {x.shape}")
    p, R = ball.p, ball.R
    if p == 2:
        nx = norm(x, 2)
        return x * (R / nx) if nx > R else x.copy()
    if math.isinf(p):
        return np.clip(x, -R, R)
    if p == 1:
        return _project_l1(x, R)
    return _project_general(x, R, p)


@dataclass(frozen=True)
class ProxSetup:
    """Distance-generating function w(u) = scale * ||u||_a^2 / (2(a-1)).

    ``a = max(p, 1 + 1/ln max(d, 3))`` and ``scale = d**(2(1/p - 1/a))`` make
    ``w`` 1-strongly convex with respect to ``||.||_p``.
    """

    p: float
    d: int

    def __post_init__(self):
        if not 1 <= self.p <= 2:
            raise ValueError("prox setups are defined for p in [1, 2]; use p=2 for p > 2")
        if self.d < 1:
            raise ValueError("dimension must be positive")

    @classmethod
    def for_ball(cls, ball: PBall) -> "ProxSetup":
        """Setup matching ``ball``; the Euclidean one when ball.p > 2."""
        return cls(min(ball.p, 2.0), ball.d)

    @property
    def a(self) -> float:
        return max(self.p, 1.0 + 1.0 / math.log(max(self.d, 3)))

    @property
    def scale(self) -> float:
        return float(self.d ** (2.0 * (1.0 / self.p - 1.0 / self.a)))

    @property
    def coef(self) -> float:
        return self.scale / (2.0 * (self.a - 1.0))

    @property
    def euclidean(self) -> bool:
        return self.a == 2.0

    # distance-generating function and its (conjugate) gradients
    def dgf(self, u) -> float:
        return self.coef * norm(u, self.a) ** 2

    def dgf_grad(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        a = self.a
        nu = norm(u, a)
        if nu == 0.0:
            return np.zeros_like(u)
        return 2.0 * self.coef * nu * np.sign(u) * (np.abs(u) / nu) ** (a - 1.0)

    def dgf_conj_grad(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        b = dual_exponent(self.a)
        ny = norm(y, b)
        if ny == 0.0:
            return np.zeros_like(y)
        return ny * np.sign(y) * (np.abs(y) / ny) ** (b - 1.0) / (2.0 * self.coef)


def prox_value(s: ProxSetup, x, z) -> float:
    """V(x, z) = w(x - z)."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise ValueError("shape mismatch")
    return s.dgf(x - z)


def prox_grad(s: ProxSetup, x, z) -> np.ndarray:
    """Gradient of V(., z) at x."""
    return s.dgf_grad(np.asarray(x, dtype=float) - np.asarray(z, dtype=float))


def bregman_divergence(s: ProxSetup, x, z) -> float:
    """D(x, z) = w(x) - w(z) - <grad w(z), x - z>; equals V(x, 0) at z = 0."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    return s.dgf(x) - s.dgf(z) - float(np.dot(s.dgf_grad(z), x - z))


def _l1_ball_mirror(s: ProxSetup, y, R):
    # argmin_{||x||_1 <= R} -<y, x> + w(x), constraint active.
    a = s.a
    r = 1.0 / (a - 1.0)
    Y = np.max(np.abs(y))
    yn = np.abs(y) / Y

    def parts(lam):
        m = np.maximum(yn - lam, 0.0)
        return m, np.sum(m**r), np.sum(m ** (a * r))

    def resid(lam):
        _, K, J = parts(lam)
        return Y * K / R - 2.0 * s.coef * J ** ((2.0 - a) / a)

    lo, hi = 0.0, 1.0
    if resid(lo) <= 0.0:
        lam = lo
    else:
        for _ in range(MAX_BISECT):
            if hi - lo <= DUAL_TOL:
                break
            mid = 0.5 * (lo + hi)
            if resid(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        else:
            raise ProjectionError("mirror step bisection did not converge")
        lam = lo
    m, K, _ = parts(lam)
    if K == 0.0:
        raise ProjectionError("degenerate mirror step multiplier")
    return np.sign(y) * m**r * (R / K)


def _general_ball_mirror(s: ProxSetup, y, R, p):
    # argmin -<y, x> + w(x) + lam ||x||_p^p / p, lam tuned so ||x||_p = R.
    a = s.a
    ay = np.abs(y)

    def coords(sv, lam):
        hi = np.minimum((ay / sv) ** (1.0 / (a - 1.0)) if sv > 0 else np.inf,
                        (ay / lam) ** (1.0 / (p - 1.0)))
        return _increasing_root(lambda t: sv * t ** (a - 1.0) + lam * t ** (p - 1.0) - ay,
                                lambda t: sv * (a - 1.0) * t ** (a - 2.0) + lam * (p - 1.0) * t ** (p - 2.0),
                                np.zeros_like(ay), hi)

    def penalized(lam):
        t0 = (ay / lam) ** (1.0 / (p - 1.0))
        s_hi = 2.0 * s.coef * norm(t0, a) ** (2.0 - a)
        if s_hi == 0.0:
            return t0

        def g(sv):
            return sv - 2.0 * s.coef * norm(coords(sv, lam), a) ** (2.0 - a)

        sv = brentq(g, 0.0, s_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=MAX_BISECT)
        return coords(sv, lam)

    def excess(lam):
        return norm(penalized(lam), p) - R

    lo, hi = 0.0, 1.0
    n = 0
    while excess(hi) > 0.0:
        lo, hi = hi, 2.0 * hi
        n += 1
        if n > MAX_BISECT:
            raise ProjectionError("could not bracket the mirror-step multiplier")
    if lo == 0.0:
        lo = hi
        while excess(lo) <= 0.0:
            lo *= 0.5
            n += 1
            if n > MAX_BISECT:
                raise ProjectionError("could not bracket the mirror-step multiplier")
    lam = brentq(excess, lo, hi, xtol=DUAL_TOL * hi, maxiter=MAX_BISECT)
    t = penalized(lam)
    nt = norm(t, p)
    if nt > R:
        t = t * (R / nt)
    return np.sign(y) * t


def bregman_step(s: ProxSetup, z, g, h: float, ball: PBall) -> np.ndarray:
    """One mirror step argmin_{x in ball} <h g, x> + D(x, z).

    With the Euclidean setup this is exactly ``project(z - h g, ball)``.
    """
    z = np.asarray(z, dtype=float)
    g = np.asarray(g, dtype=float)
    if not h >= 0:
        raise ValueError("step size must be nonnegative")
    if not np.all(np.isfinite(g)):
        raise ValueError("non-finite gradient in mirror step")
    if s.euclidean:
        return project(z - h * g, ball)
    if ball.p != s.p:
        raise ValueError(f"prox setup p={s.p} does not match ball p={ball.p}")
    if h == 0.0 or not np.any(g):
        return z.copy()
    y = s.dgf_grad(z) - h * g
    if not np.any(y):
        return np.zeros_like(z)
    x = s.dgf_conj_grad(y)
    if norm(x, ball.p) <= ball.R:
        return x
    if s.a == ball.p:
        return x * (ball.R / norm(x, ball.p))
    if ball.p == 1:
        return _l1_ball_mirror(s, y, ball.R)
    return _general_ball_mirror(s, y, ball.R, ball.p)
