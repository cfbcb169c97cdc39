"""
Closed-form sample-size predictors.

All Landau constants are 1; ``const_mult`` scales the raw value before the
ceiling, and every predictor is floored at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .pgeom import kappa_p

REGIMES = ("convex-online", "convex-offline", "sc-online", "sc-offline", "growth-offline", "saddle-offline")


@dataclass(frozen=True)
class RegimeSpec:
    regime: str = "convex-online"
    M: float = 1.0
    R: float = 1.0
    mu: float = 0.0
    lam: float = 1.0
    gamma: float = 1.0
    mu_gamma: float = 1.0
    R_eps: Optional[float] = None
    d: int = 1
    p: float = 2.0
    eps: float = 0.1
    sigma: float = 0.1
    delta: float = 0.0
    const_mult: float = 1.0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if not (self.eps > 0 and 0 < self.sigma < 1):
            raise ValueError("need eps > 0 and sigma in (0, 1)")
        if self.M <= 0 or self.R <= 0 or self.d < 0:
            raise ValueError("M, R must be positive and d nonnegative")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")

    def with_(self, **kw) -> "RegimeSpec":
        return replace(self, **kw)


def _finish(value: float, spec: RegimeSpec) -> int:
    value *= spec.const_mult
    if math.isinf(value) or value > 2**62:
        return 2**62
    return max(1, int(math.ceil(value)))


def online_convex_branches(spec: RegimeSpec):
    """Raw values of the N <= d branch and the N >= d branch."""
    s = spec
    base = s.M**2 * s.R**2 * math.log(1.0 / s.sigma)
    top = max(2.0, s.p)
    kap = kappa_p(s.p, max(s.d, 1))
    log_b4 = math.log(kap) + math.log(base) - top * math.log(s.eps)
    b4 = math.exp(log_b4) if log_b4 < 700 else math.inf
    dim_factor = s.d ** (1.0 - 2.0 / top) if s.d > 0 else 0.0
    b5 = dim_factor * base / s.eps**2
    return b4, b5


def n_online_convex(spec: RegimeSpec) -> int:
    """Smallest N meeting a branch's requirement inside that branch's regime.

    That is min(b4 if b4 <= d, max(b5, d)); it coincides with the branch
    whose value is self-consistent, takes the smaller on a tie, and returns d
    when neither branch is self-consistent.
    """
    if spec.eps >= spec.M * spec.R:
        return 1
    b4, b5 = online_convex_branches(spec)
    d = spec.d
    value = max(b5, d)
    if b4 <= d:
        value = min(value, b4)
    return _finish(value, spec)


def n_offline_convex(spec: RegimeSpec) -> int:
    s = spec
    if not s.delta < s.eps:
        raise ValueError("need delta < eps")
    if s.eps >= s.M * s.R:
        return 1
    gap = s.eps - s.delta
    value = s.M**2 * s.R**2 / gap**2 * (s.d * math.log(s.M * s.R / gap) + math.log(1.0 / s.sigma))
    return _finish(value, s)


def n_online_sc(spec: RegimeSpec) -> int:
    s = spec
    if not s.mu > 0:
        raise ValueError("mu must be positive")
    ratio = s.M**2 / (s.mu * s.eps)
    if ratio <= 1.0:
        return 1
    inner = math.log(max(ratio, math.e))
    value = kappa_p(s.p, max(s.d, 1)) * ratio * math.log(inner / s.sigma)
    return _finish(value, s)


def n_offline_sc(spec: RegimeSpec) -> int:
    s = spec
    if not s.mu > 0:
        raise ValueError("mu must be positive")
    if not s.sigma < 1.0 / math.e:
        raise ValueError("need sigma < 1/e for the ln ln(1/sigma) term")
    ratio = s.M**2 / (s.mu * s.eps)
    if ratio <= 1.0:
        return 1
    value = ratio * (math.log(ratio) + math.log(math.log(1.0 / s.sigma))) * math.log(1.0 / s.sigma)
    return _finish(value, s)


def growth_radius(spec: RegimeSpec) -> float:
    """Diameter of the 2 eps sublevel set: 4 eps / mu_1 when sharp, else 2R."""
    if spec.R_eps is not None:
        return spec.R_eps
    if spec.gamma == 1.0:
        return 4.0 * spec.eps / spec.mu_gamma
    return 2.0 * spec.R


def growth_factors(spec: RegimeSpec):
    """(power factor, dimension/log factor) of the gamma-growth bound."""
    s = spec
    g = s.gamma
    power = s.lam**2 / (s.mu_gamma ** (2.0 / g) * s.eps ** (2.0 * (g - 1.0) / g))
    log_term = max(0.0, math.log(s.M * growth_radius(s) / s.eps))
    return power, s.d * log_term + math.log(1.0 / s.sigma)


def n_growth(spec: RegimeSpec) -> int:
    if not (spec.lam > 0 and spec.mu_gamma > 0):
        raise ValueError("lam and mu_gamma must be positive")
    power, rest = growth_factors(spec)
    return _finish(power * rest, spec)


def n_saddle(spec_x: RegimeSpec, spec_y: RegimeSpec) -> int:
    """N_x + N_y; a zero-dimensional block contributes nothing."""
    return sum(n_growth(s) for s in (spec_x, spec_y) if s.d > 0)


PREDICTORS = {
    "convex-online": n_online_convex,
    "convex-offline": n_offline_convex,
    "sc-online": n_online_sc,
    "sc-offline": n_offline_sc,
    "growth-offline": n_growth,
}


def predict(spec: RegimeSpec) -> int:
    if spec.regime == "saddle-offline":
        return n_saddle(spec, spec)
    return PREDICTORS[spec.regime](spec)


def factors(spec: RegimeSpec) -> dict:
    """Intermediate quantities printed next to a prediction."""
    out = {"kappa": kappa_p(spec.p, max(spec.d, 1)), "const_mult": spec.const_mult}
    if spec.regime == "convex-online":
        b4, b5 = online_convex_branches(spec)
        out.update(branch_small_n=b4, branch_large_n=b5)
    elif spec.regime in ("growth-offline", "saddle-offline"):
        power, rest = growth_factors(spec)
        out.update(power_factor=power, dim_log_factor=rest, R_eps=growth_radius(spec))
    elif spec.regime in ("sc-online", "sc-offline"):
        out.update(condition=spec.M**2 / (spec.mu * spec.eps))
    elif spec.regime == "convex-offline":
        out.update(accuracy_gap=spec.eps - spec.delta)
    return out
