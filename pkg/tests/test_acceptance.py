"""Acceptance criteria 1-11; each test prints one PASS/FAIL line."""

import math

import numpy as np
import pytest

from lpsample import harness as H
from lpsample import problems as P
from lpsample import theory as T
from lpsample.cli import cli_main
from lpsample.pgeom import PBall, ProxSetup, kappa_p, norm, project, prox_value
from lpsample.regularize import mu_for_eps

from oracles import central_diff, project_oracle, random_in_ball

EPS_GRID = [0.4, 0.2, 0.1, 0.05]


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail
    return emit


def test_c01_projection_oracle(report):
    rng = np.random.default_rng(100)
    worst, count = -math.inf, 0
    for p in (1, 1.3, 2, 3, math.inf):
        for _ in range(200):
            d = int(rng.integers(1, 5))
            R = float(rng.uniform(0.2, 2))
            x = rng.standard_normal(d) * 2
            px = project(x, PBall(p, R, d))
            ours = float(np.sum((px - x) ** 2))
            worst = max(worst, ours - project_oracle(x, p, R))
            count += norm(px, p) <= R * (1 + 1e-9)
    report(1, count == 1000 and worst <= 1e-6, f"1000 instances, max excess {worst:.2e}")


def test_c02_prox_sandwich(report):
    rng = np.random.default_rng(101)
    bad = total = 0
    for p in (1, 1.3, 2):
        for d in (2, 10, 100):
            s = ProxSetup(p, d)
            upper = kappa_p(p, d) * math.e**2
            xs = random_in_ball(rng, p, 1.0, d, 1112)
            zs = random_in_ball(rng, p, 1.0, d, 1112)
            for x, z in zip(xs, zs):
                v, n2 = prox_value(s, x, z), norm(x - z, p) ** 2
                bad += not (0.5 * n2 - 1e-9 <= v <= upper * n2 + 1e-9)
                total += 1
    report(2, bad == 0 and total >= 10**4, f"{total} pairs, {bad} violations")


def _smooth_cases():
    yield "gauss-power", P.gauss_power(5, 1.5, 0.5)
    yield "sc-quad", P.strongly_convex_quad(5, 2.0, 0.3)
    yield "abs-reg", P.AbsRegression(6, 3, 0.05, p=1.5)


def test_c03_gradient_checks(report):
    rng = np.random.default_rng(102)
    worst = 0.0
    for _, pr in _smooth_cases():
        xi = pr.sample(rng, 100)
        for x, e in zip(random_in_ball(rng, pr.domain.p, 0.9 * pr.domain.R, pr.d, 100), xi):
            g = pr.subgrad(x, e)
            fd = central_diff(lambda u: pr.loss(u, e), x, h=1e-7)
            worst = max(worst, norm(g - fd, 2) / max(1.0, norm(g, 2)))
    sp = P.sharp_saddle(5, 5, 1.0, 1.0, 0.1)
    xi = sp.sample(rng, 100)
    for e in xi:
        x = random_in_ball(rng, 2, 0.9, 5, 1)[0]
        y = random_in_ball(rng, 2, 0.9, 5, 1)[0]
        gx = central_diff(lambda u: sp.loss(u, y, e), x, h=1e-7)
        gy = central_diff(lambda v: sp.loss(x, v, e), y, h=1e-7)
        for g, fd in ((sp.subgrad_x(x, y, e), gx), (sp.supergrad_y(x, y, e), gy)):
            worst = max(worst, norm(g - fd, 2) / max(1.0, norm(g, 2)))
    report(3, worst <= 1e-5, f"max relative error {worst:.2e}")


def test_c04_convex_eps_scaling(report):
    params = (("R", 8.0), ("noise", 0.0), ("n_directions", 8))
    base = H.TrialSpec("abs-reg", "sa-md", n=1, eps=0.4, p=2.0, d=10, params=params)
    fit = H.scaling_run("eps", EPS_GRID, base, 0.2, 200, rel_tol=0.05)
    ok = not fit.excluded and 1.5 <= fit.slope <= 2.5
    report(4, ok, f"n_min {fit.points}, slope {fit.slope:.3f}, r2 {fit.r_squared:.3f}")


def test_c05_strongly_convex_eps_scaling(report):
    fits = {}
    for method in ("saa-sc", "sa-restart"):
        base = H.TrialSpec("sc-quad", method, n=1, eps=0.4, d=5, params=(("R", 4.0),))
        fits[method] = H.scaling_run("eps", EPS_GRID, base, 0.2, 200, rel_tol=0.05)
    slopes = {m: f.slope for m, f in fits.items()}
    a = [n for _, n in fits["saa-sc"].points]
    b = [n for _, n in fits["sa-restart"].points]
    ratio = max(max(u, v) / min(u, v) for u, v in zip(a, b)) if len(a) == len(b) == 4 else math.inf
    ok = all(0.6 <= s <= 1.4 for s in slopes.values()) and ratio <= 20
    report(5, ok, f"saa-sc {a}, sa-restart {b}, slopes {slopes}, max ratio {ratio:.2f}")


def test_c06_sharp_eps_independence(report):
    base = H.TrialSpec("gauss-power", "saa", n=1, eps=0.2, d=5, params=(("gamma", 1.0), ("delta_frac", 0.5)))
    fit = H.scaling_run("eps", [0.2, 0.1, 0.05, 0.025], base, 0.1, 200, rel_tol=0.05)
    ok = not fit.excluded and -0.3 <= fit.slope <= 0.4
    report(6, ok, f"n_min {fit.points}, slope {fit.slope:.3f}")


def test_c07_dimension_floor(report):
    base = H.TrialSpec("gauss-power", "saa", n=1, eps=0.2, params=(("gamma", 2.0),))
    fit = H.scaling_run("d", [2, 5, 10, 20, 50], base, 0.1, 200, rel_tol=0.05)
    ok = not fit.excluded and fit.slope >= 0.5
    report(7, ok, f"n_min {fit.points}, slope {fit.slope:.3f}")


def test_c08_regularization_path(report):
    eps, sigma, const_mult = 0.02, 0.1, 1.0
    lines, ok = [], True
    for d in (10, 50):
        params = (("n_directions", 5), ("noise", 0.01))
        pr = H.build_problem("abs-reg", d, 1.0, params)
        online = T.n_online_convex(H.theory_spec(pr, "convex-online", eps, sigma))
        offline = T.n_offline_convex(H.theory_spec(pr, "convex-offline", eps, sigma))
        n = int(const_mult * online)
        spec = H.TrialSpec("abs-reg", "saa", n=n, eps=eps, sigma=sigma, d=d, p=1.0, params=params,
                           regularize=True, mu=mu_for_eps(eps, 1.0, d, pr.domain.R))
        est = H.estimate_success(spec, 200)
        ok &= est.p_hat >= 1 - sigma and offline / online >= d / 10
        lines.append(f"d={d}: N={n} p_hat={est.p_hat:.3f} offline/online={offline / online:.1f}")
    report(8, ok, "; ".join(lines))


def test_c09_saddle(report):
    eps, sigma = 0.2, 0.2
    base = H.TrialSpec("sharp-saddle", "saa-saddle", n=1, eps=eps, sigma=sigma, d=5,
                       params=(("s", 0.1), ("d_y", 5), ("modulus", 1.0)))
    pr = H.build_problem("sharp-saddle", 5, 2.0, base.params)
    n = H.saddle_prediction(pr, eps, sigma, 1.0)
    est = H.estimate_success(base.with_(n=n), 200)
    fit = H.scaling_run("eps", [0.2, 0.1, 0.05], base, sigma, 200, rel_tol=0.05)
    ok = est.p_hat >= 1 - sigma and not fit.excluded and -0.3 <= fit.slope <= 0.4
    report(9, ok, f"N={n} p_hat={est.p_hat:.3f}; n_min {fit.points}, slope {fit.slope:.3f}")


def test_c10_theory_values_and_monotonicity(report):
    S = T.RegimeSpec
    values = [
        T.n_online_convex(S("convex-online", d=10**6)) == 231,
        T.n_offline_convex(S("convex-offline", d=10, delta=0.05)) == 12904,
        T.n_online_sc(S("sc-online", mu=1.0, eps=0.01)) == 383,
        T.n_offline_sc(S("sc-offline", mu=1.0, eps=0.01, sigma=0.05)) == 1709,
        T.n_growth(S("growth-offline", d=10, eps=0.1)) == 17 == T.n_growth(S("growth-offline", d=10, eps=0.01)),
        T.n_online_convex(S("convex-online", p=math.inf, d=4)) == 922,
    ]
    bases = [S("convex-online", d=20), S("convex-offline", d=20), S("sc-online", mu=1.0, d=20),
             S("sc-offline", mu=1.0, d=20), S("growth-offline", d=20, gamma=1.5), S("saddle-offline", d=20)]
    grids = {"eps": [0.005, 0.02, 0.1, 0.4], "sigma": [0.01, 0.1, 0.3], "M": [0.5, 1, 4],
             "lam": [0.2, 1, 3], "R": [0.5, 1, 4], "d": [1, 5, 50, 5000]}
    violations = 0
    for b in bases:
        for p in (1.0, 2.0, 4.0):
            for field, grid in grids.items():
                vals = [T.predict(b.with_(p=p, **{field: v})) for v in grid]
                inc = all(x <= y for x, y in zip(vals, vals[1:]))
                dec = all(x >= y for x, y in zip(vals, vals[1:]))
                violations += not (dec if field in ("eps", "sigma") else inc)
    report(10, all(values) and violations == 0, f"{sum(values)}/6 frozen values, {violations} monotonicity violations")


def test_c11_cli_determinism(tmp_path, report, capsys):
    cases = [
        ["estimate-n", "--problem", "gauss-power", "--gamma", "1", "--method", "sa-restart", "--eps", "0.1",
         "--sigma", "0.1", "--trials", "200", "--seed", "42"],
        ["solve", "--problem", "abs-reg", "--p", "1.5", "--d", "6", "--n", "200", "--trials", "30", "--seed", "7"],
        ["scaling", "--problem", "sc-quad", "--grid", "0.4,0.2,0.1", "--trials", "40", "--sigma", "0.2",
         "--seed", "3"],
        ["saddle", "--d", "5", "--s", "0.1", "--eps", "0.2", "--sigma", "0.2", "--trials", "50", "--seed", "5"],
    ]
    same = 0
    for i, argv in enumerate(cases):
        outs = []
        for rep in range(2):
            path = tmp_path / f"{i}-{rep}.csv"
            assert cli_main(argv + ["--out", str(path)]) == 0
            outs.append(path.read_bytes())
        same += outs[0] == outs[1] and len(outs[0]) > 0
    capsys.readouterr()
    report(11, same == len(cases), f"{same}/{len(cases)} invocations byte-identical")
