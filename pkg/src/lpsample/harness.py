"""
Monte Carlo experiment engine.

A :class:`TrialSpec` fixes one trial completely: the per-trial generator is
seeded by a splitmix64 mix of (master_seed, trial_index, grid_index), so the
seed does not depend on N and runs at different N share random numbers.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import problems as P
from . import theory
from .pgeom import ProxSetup, norm
from .regularize import mu_for_eps, regularize
from .sa import SAConfig, mirror_descent, restarted_sa, sa_saddle, sgd_projected
from .saa import saa_pipeline, saa_saddle, saa_sc_pipeline

MASK64 = (1 << 64) - 1
METHODS = ("sa-sgd", "sa-md", "sa-restart", "sa-saddle", "saa", "saa-sc", "saa-saddle")
SADDLE_METHODS = ("sa-saddle", "saa-saddle")
CSV_HEADER = ("run_id,problem,method,p,d,gamma,eps,sigma,n,trials,successes,p_hat,"
              "ci_low,ci_high,gap_mean,gap_q90,samples_used_mean,seed").split(",")


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def trial_seed(master_seed: int, trial_index: int, grid_index: int = 0) -> int:
    h = splitmix64(master_seed & MASK64)
    h = splitmix64(h ^ (trial_index & MASK64))
    return splitmix64(h ^ (grid_index & MASK64))


@dataclass(frozen=True)
class TrialSpec:
    """Everything that determines one trial.

    ``params`` holds problem parameters as sorted (key, value) pairs; see
    :func:`build_problem` for the recognised keys.
    """

    problem: str
    method: str
    n: int
    eps: float
    sigma: float = 0.1
    d: int = 5
    p: float = 2.0
    params: tuple = ()
    regularize: bool = False
    mu: Optional[float] = None
    master_seed: int = 0
    trial_index: int = 0
    grid_index: int = 0

    def __post_init__(self):
        if self.problem not in P.PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if (self.method in SADDLE_METHODS) != (self.problem == "sharp-saddle"):
            raise ValueError(f"method {self.method!r} does not apply to problem {self.problem!r}")
        if self.n < 0 or not self.eps > 0 or not 0 < self.sigma < 1:
            raise ValueError("need n >= 0, eps > 0 and sigma in (0, 1)")
        if self.regularize and self.method in SADDLE_METHODS:
            raise ValueError("regularisation applies to minimisation problems only")
        object.__setattr__(self, "params", tuple(sorted(dict(self.params).items())))

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def with_(self, **kw) -> "TrialSpec":
        return replace(self, **kw)


@dataclass
class TrialResult:
    gap: float
    success: bool
    samples_used: int


@dataclass
class SuccessEstimate:
    successes: int
    trials: int
    p_hat: float
    ci_low: float
    ci_high: float
    gap_mean: float = float("nan")
    gap_q90: float = float("nan")
    samples_used_mean: float = float("nan")


@dataclass
class NSearchResult:
    n_min: Optional[int]
    bracket: tuple
    trials_per_point: int
    found: bool
    monotone: bool = True
    decision_rule: str = "point estimate p_hat >= 1 - sigma at a fixed trial count"
    evaluations: dict = field(default_factory=dict)


@dataclass
class ScalingFit:
    axis: str
    points: list
    slope: float
    intercept: float
    r_squared: float
    excluded: list = field(default_factory=list)
    searches: list = field(default_factory=list)


# Problems


@lru_cache(maxsize=64)
def _cached_problem(name, d, p, params):
    kw = dict(params)
    R = float(kw.get("R", 1.0))
    if name == "gauss-power":
        return P.GaussPower(d, float(kw.get("gamma", 2.0)), float(kw.get("s", 1.0)), R)
    if name == "sc-quad":
        return P.StronglyConvexQuad(d, float(kw.get("modulus", 1.0)), float(kw.get("s", 1.0)), R)
    if name == "abs-reg":
        m = int(kw.get("n_directions", max(1, d // 2)))
        return P.AbsRegression(d, m, float(kw.get("noise", 0.05)), R, p)
    if name == "sharp-saddle":
        mod = float(kw.get("modulus", 1.0))
        return P.SharpSaddle(d, int(kw.get("d_y", d)), mod, mod, float(kw.get("s", 0.1)))
    raise ValueError(f"unknown problem {name!r}")


def build_problem(name: str, d: int, p: float = 2.0, params=()):
    """Construct (and cache) a suite problem.

    Recognised params: ``gamma``, ``s`` (noise scale), ``modulus`` (strong
    convexity or sharpness), ``noise`` and ``n_directions`` (abs-reg), ``R``,
    ``d_y`` (saddle).  Only abs-reg uses ``p``; the others live on 2-balls.
    Method params ``delta_frac`` (saa) and ``x0_frac`` (SA start, see
    :func:`sa_start`) are ignored here.
    """
    return _cached_problem(name, int(d), float(p), tuple(sorted(dict(params).items())))


@lru_cache(maxsize=64)
def _cached_regularized(name, d, p, params, mu):
    inner = build_problem(name, d, p, params)
    return regularize(inner, mu, prox=ProxSetup.for_ball(inner.domain))


def regularization_mu(spec: TrialSpec, problem) -> float:
    if spec.mu is not None:
        return spec.mu
    return mu_for_eps(spec.eps, problem.domain.p, problem.d, problem.domain.R)


# Methods


def sa_start(problem, frac: float) -> np.ndarray:
    """frac * R times the normalised all-ones vector; the SA starting point."""
    ball = problem.domain
    ones = np.ones(ball.d)
    return frac * ball.R * ones / norm(ones, ball.p)


def _run_method(spec: TrialSpec, problem, rng):
    """Return the solver output (a point, or a pair for saddles)."""
    kw = spec.param_dict
    m, n = spec.method, spec.n
    if m in ("sa-sgd", "sa-md", "sa-restart"):
        x0 = sa_start(problem, float(kw.get("x0_frac", 0.0)))
    if m == "sa-sgd":
        return sgd_projected(problem, SAConfig(n, x0=x0), rng).point
    if m == "sa-md":
        return mirror_descent(problem, SAConfig(n, x0=x0), rng).point
    if m == "sa-restart":
        meta = problem.meta
        if meta.gamma is None:
            raise ValueError("sa-restart needs a growth exponent")
        return restarted_sa(problem, spec.eps, spec.sigma, meta.gamma, meta.mu_gamma, rng, budget=n, x0=x0).point
    if m == "saa":
        delta = float(kw.get("delta_frac", 0.5)) * spec.eps
        return saa_pipeline(problem, max(n, 1), delta, None, rng).point
    if m == "saa-sc":
        if not problem.meta.mu > 0:
            raise ValueError("saa-sc needs a strongly convex problem")
        return saa_sc_pipeline(problem, max(n, 1), spec.eps, None, rng).point
    if m == "sa-saddle":
        return sa_saddle(problem, SAConfig(n), rng)
    if m == "saa-saddle":
        return saa_saddle(problem, max(n, 1), spec.eps, rng)
    raise ValueError(f"unknown method {m!r}")


def default_runner(spec: TrialSpec, rng) -> TrialResult:
    problem = build_problem(spec.problem, spec.d, spec.p, spec.params)
    solver_problem = problem
    if spec.regularize:
        mu = regularization_mu(spec, problem)
        solver_problem = _cached_regularized(spec.problem, spec.d, spec.p, spec.params, float(mu))
    out = _run_method(spec, solver_problem, rng)
    if spec.method in SADDLE_METHODS:
        gap = float(problem.duality_gap(*out))
    else:
        gap = float(problem.gap(out))
    return TrialResult(gap, bool(gap <= spec.eps), spec.n)


def run_trial(spec: TrialSpec, runner: Optional[Callable] = None) -> TrialResult:
    """Run one trial; the runner receives the spec and its seeded generator."""
    rng = np.random.default_rng(trial_seed(spec.master_seed, spec.trial_index, spec.grid_index))
    try:
        return (runner or default_runner)(spec, rng)
    except Exception as exc:
        raise RuntimeError(f"trial {spec.trial_index} of {spec.problem}/{spec.method} at N={spec.n} "
                           f"failed: {exc}") from exc


def _trial_job(args):
    spec, runner = args
    return run_trial(spec, runner)


# Estimation


def clopper_pearson(k: int, n: int, level: float = 0.95):
    alpha = 1.0 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


def summarize(results) -> SuccessEstimate:
    n = len(results)
    k = sum(1 for r in results if r.success)
    lo, hi = clopper_pearson(k, n)
    gaps = np.array([r.gap for r in results], dtype=float)
    used = np.array([r.samples_used for r in results], dtype=float)
    return SuccessEstimate(k, n, k / n, min(lo, k / n), max(hi, k / n),
                           float(np.mean(gaps)), float(np.quantile(gaps, 0.9)), float(np.mean(used)))


def estimate_success(spec: TrialSpec, trials: int, runner: Optional[Callable] = None,
                     workers: int = 1) -> SuccessEstimate:
    """Run ``trials`` independent trials with indices 0..trials-1."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    specs = [spec.with_(trial_index=i) for i in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_trial_job, [(s, runner) for s in specs], chunksize=max(1, trials // (4 * workers))))
    else:
        results = [run_trial(s, runner) for s in specs]
    return summarize(results)


def find_min_n(base: TrialSpec, sigma: float, trials: int, n_lo: int = 1, n_hi_cap: int = 1 << 20,
               runner: Optional[Callable] = None, workers: int = 1, rel_tol: float = 0.0,
               verify: bool = True) -> NSearchResult:
    """Smallest N whose estimated success rate reaches 1 - sigma.

    Doubles from ``n_lo`` until a pass, then bisects the last (fail, pass)
    bracket down to width max(1, rel_tol * pass).  Returns a not-found result
    at ``n_hi_cap``.  With ``verify`` the search also evaluates 2 n_min; a
    failure there clears the ``monotone`` flag.
    """
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")
    if n_lo < 1 or n_hi_cap < n_lo:
        raise ValueError("need 1 <= n_lo <= n_hi_cap")
    base = base.with_(sigma=sigma)
    evals = {}

    def passes(n):
        if n not in evals:
            evals[n] = estimate_success(base.with_(n=n), trials, runner, workers)
        return evals[n].p_hat >= 1.0 - sigma

    n_fail, n = n_lo - 1, n_lo
    while not passes(n):
        n_fail = n
        if n >= n_hi_cap:
            return NSearchResult(None, (n_fail, None), trials, False, _monotone(evals, sigma), evaluations=evals)
        n = min(2 * n, n_hi_cap)
    n_pass = n
    while n_pass - n_fail > max(1, int(rel_tol * n_pass)):
        mid = (n_fail + n_pass) // 2
        if passes(mid):
            n_pass = mid
        else:
            n_fail = mid
    if verify and n_pass < n_hi_cap:
        passes(min(2 * n_pass, n_hi_cap))
    return NSearchResult(n_pass, (n_fail, n_pass), trials, True, _monotone(evals, sigma), evaluations=evals)


def _monotone(evals, sigma) -> bool:
    flags = [evals[n].p_hat >= 1.0 - sigma for n in sorted(evals)]
    return all(not a or b for a, b in zip(flags, flags[1:]))


def fit_loglog(xs, ys):
    """Least squares of log y on log x: (slope, intercept, r_squared)."""
    lx, ly = np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float))
    if lx.size < 2:
        return float("nan"), float("nan"), float("nan")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if tot == 0.0 else max(0.0, 1.0 - float(np.sum(resid**2)) / tot)
    return float(slope), float(intercept), min(1.0, r2)


AXES = ("eps", "d", "p")


def scaling_run(axis: str, grid, base: TrialSpec, sigma: float, trials: int, n_lo: int = 1,
                n_hi_cap: int = 1 << 20, runner: Optional[Callable] = None, workers: int = 1,
                rel_tol: float = 0.0) -> ScalingFit:
    """find_min_n along a grid, fitted in log-log.

    The abscissa is 1/eps on the eps axis, so a rate N ~ eps^-k has slope k.
    """
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}")
    grid = list(grid)
    if len(grid) < 3:
        raise ValueError("need at least three grid points")
    points, excluded, searches = [], [], []
    for i, v in enumerate(grid):
        spec = base.with_(grid_index=i, **{axis: int(v) if axis == "d" else float(v)})
        res = find_min_n(spec, sigma, trials, n_lo, n_hi_cap, runner, workers, rel_tol)
        searches.append(res)
        if res.found:
            points.append((v, res.n_min))
        else:
            excluded.append(v)
    xs = [1.0 / v if axis == "eps" else v for v, _ in points]
    slope, icpt, r2 = fit_loglog(xs, [n for _, n in points])
    return ScalingFit(axis, points, slope, icpt, r2, excluded, searches)


# Theory


def theory_spec(problem, regime: str, eps: float, sigma: float, const_mult: float = 1.0,
                delta: Optional[float] = None) -> theory.RegimeSpec:
    """RegimeSpec filled from a problem's meta constants."""
    meta = problem.meta if hasattr(problem, "meta") else problem.meta_x
    ball = meta.domain
    return theory.RegimeSpec(
        regime=regime, M=meta.M, R=ball.R, mu=meta.mu, lam=meta.lam if meta.lam else 1.0,
        gamma=meta.gamma or 1.0, mu_gamma=meta.mu_gamma or 1.0, d=ball.d, p=ball.p,
        eps=eps, sigma=sigma, delta=eps / 2.0 if delta is None else delta, const_mult=const_mult,
    )


def saddle_prediction(problem, eps: float, sigma: float, const_mult: float = 1.0) -> int:
    specs = []
    for meta in (problem.meta_x, problem.meta_y):
        ball = meta.domain
        specs.append(theory.RegimeSpec(
            regime="growth-offline", M=meta.M, R=ball.R, lam=meta.lam, gamma=meta.gamma,
            mu_gamma=meta.mu_gamma, d=ball.d, p=ball.p, eps=eps, sigma=sigma, const_mult=const_mult,
        ))
    return theory.n_saddle(*specs)


# CSV


@dataclass
class ResultRow:
    run_id: str
    problem: str
    method: str
    p: float
    d: int
    gamma: float
    eps: float
    sigma: float
    n: int
    trials: int
    successes: int
    p_hat: float
    ci_low: float
    ci_high: float
    gap_mean: float
    gap_q90: float
    samples_used_mean: float
    seed: int


def make_row(run_id: str, spec: TrialSpec, est: SuccessEstimate) -> ResultRow:
    gamma = spec.param_dict.get("gamma", float("nan"))
    return ResultRow(run_id, spec.problem, spec.method, float(spec.p), int(spec.d), float(gamma),
                     float(spec.eps), float(spec.sigma), int(spec.n), est.trials, est.successes,
                     est.p_hat, est.ci_low, est.ci_high, est.gap_mean, est.gap_q90,
                     est.samples_used_mean, int(spec.master_seed))


def emit_csv(results, path) -> None:
    """Write rows with the fixed header; floats use repr so they round-trip."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in results:
            w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(r).values()])


def read_csv(path) -> list:
    types = {f.name: f.type for f in fields(ResultRow)}
    conv = {"int": int, "float": float, "str": str}
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append(ResultRow(**{k: conv[types[k]](v) for k, v in rec.items()}))
    return out


def rows_equal(a, b) -> bool:
    """Row equality treating NaN as equal to NaN."""
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        for u, v in zip(asdict(x).values(), asdict(y).values()):
            if isinstance(u, float) and math.isnan(u) and isinstance(v, float) and math.isnan(v):
                continue
            if u != v:
                return False
    return True
