import itertools
import math

import pytest

from lpsample import theory as T
from lpsample.pgeom import kappa_p

S = T.RegimeSpec


def test_frozen_examples():
    assert T.n_online_convex(S("convex-online", d=10**6)) == 231
    assert T.n_offline_convex(S("convex-offline", d=10, delta=0.05)) == 12904
    assert T.n_online_sc(S("sc-online", mu=1.0, eps=0.01)) == 383
    # 100 (ln 100 + ln ln 20) ln 20 = 1708.3 before the ceiling.
    assert T.n_offline_sc(S("sc-offline", mu=1.0, eps=0.01, sigma=0.05)) == 1709
    for eps in (0.1, 0.01):
        assert T.n_growth(S("growth-offline", d=10, eps=eps)) == 17
    assert T.n_online_convex(S("convex-online", p=math.inf, d=4)) == 922


def test_plain_formula_values():
    # Independent transcription of the closed forms.
    eps, sig, d = 0.03, 0.2, 7
    assert T.n_offline_convex(S("convex-offline", d=d, eps=eps, sigma=sig)) == math.ceil(
        (d * math.log(1 / eps) + math.log(1 / sig)) / eps**2)
    r = 2.0**2 / (0.5 * eps)
    assert T.n_online_sc(S("sc-online", M=2.0, mu=0.5, eps=eps, sigma=sig, p=1.0, d=d)) == math.ceil(
        kappa_p(1.0, d) * r * math.log(math.log(r) / sig))
    g = S("growth-offline", gamma=1.5, lam=0.7, mu_gamma=2.0, R=3.0, M=1.2, d=d, eps=eps, sigma=sig)
    power = 0.49 / (2.0 ** (2 / 1.5) * eps ** (2 * 0.5 / 1.5))
    assert T.n_growth(g) == math.ceil(power * (d * math.log(1.2 * 6.0 / eps) + math.log(1 / sig)))


def test_guards():
    assert T.n_online_convex(S(eps=1.0)) == 1
    assert T.n_offline_convex(S("convex-offline", eps=2.0)) == 1
    assert T.n_online_sc(S("sc-online", mu=1.0, eps=1.0)) == 1
    assert T.n_offline_sc(S("sc-offline", mu=1.0, eps=2.0, sigma=0.1)) == 1
    with pytest.raises(ValueError):
        T.n_offline_convex(S("convex-offline", delta=0.1, eps=0.1))
    with pytest.raises(ValueError):
        T.n_online_sc(S("sc-online"))
    with pytest.raises(ValueError):
        T.n_offline_sc(S("sc-offline", mu=1.0, sigma=0.5))
    with pytest.raises(ValueError):
        T.n_growth(S("growth-offline", lam=0.0))
    for bad in (dict(eps=0.0), dict(sigma=1.0), dict(M=0.0), dict(gamma=0.5), dict(regime="nope")):
        with pytest.raises(ValueError):
            S(**bad)


def test_const_mult_and_determinism():
    s = S("growth-offline", d=10)
    assert T.predict(s) == T.predict(s)
    assert T.predict(s.with_(const_mult=3.0)) == math.ceil(3 * T.factors(s)["power_factor"] * T.factors(s)["dim_log_factor"])
    assert T.predict(S("convex-online", eps=1e-30, p=4.0, d=10)) == 2**62


BASE = {
    "convex-online": S("convex-online", d=20),
    "convex-offline": S("convex-offline", d=20),
    "sc-online": S("sc-online", mu=1.0, d=20),
    "sc-offline": S("sc-offline", mu=1.0, d=20),
    "growth-offline": S("growth-offline", d=20, gamma=1.5, R=2.0),
    "growth-sharp": S("growth-offline", d=20),
}
GRIDS = {
    "eps": [0.002, 0.005, 0.01, 0.03, 0.1, 0.3, 0.6, 1.5],
    "sigma": [0.001, 0.01, 0.05, 0.1, 0.2, 0.3],
    "M": [0.5, 1.0, 2.0, 5.0],
    "lam": [0.2, 1.0, 3.0],
    "R": [0.5, 1.0, 2.0, 4.0],
    "d": [1, 2, 5, 20, 100, 10**4],
}
DECREASING = ("eps", "sigma")


@pytest.mark.parametrize("name", sorted(BASE))
@pytest.mark.parametrize("field", sorted(GRIDS))
@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 4.0, math.inf])
def test_monotone(name, field, p):
    base = BASE[name].with_(p=p)
    vals = [T.predict(base.with_(**{field: v})) for v in GRIDS[field]]
    pairs = list(zip(vals, vals[1:]))
    if field in DECREASING:
        assert all(a >= b for a, b in pairs), vals
    else:
        assert all(a <= b for a, b in pairs), vals


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 6.0, math.inf])
def test_online_branch_consistency(p):
    for eps, d in itertools.product([0.01, 0.05, 0.2, 0.5], [1, 3, 10, 100, 10**4, 10**7]):
        s = S("convex-online", p=p, d=d, eps=eps)
        n = T.n_online_convex(s)
        b4, b5 = T.online_convex_branches(s)
        own4 = b4 <= d and n == math.ceil(b4)
        own5 = b5 >= d and n == math.ceil(b5)
        # Neither branch consistent: the N = d boundary.
        tie = not (b4 <= d or b5 >= d) and n == d
        assert own4 or own5 or tie
        if b4 <= d and b5 >= d:
            assert n == math.ceil(min(b4, b5))


def test_offline_online_gap_is_about_d():
    for d, eps in itertools.product([1, 10, 100, 1000], [0.3, 0.1, 0.03, 0.01]):
        on = T.n_online_convex(S("convex-online", d=d, eps=eps))
        off = T.n_offline_convex(S("convex-offline", d=d, eps=eps))
        assert d / 10 <= off / on <= 10 * d


def test_offline_linear_in_d():
    a = T.n_offline_convex(S("convex-offline", d=1000))
    b = T.n_offline_convex(S("convex-offline", d=2000))
    assert 1.8 <= b / a <= 2.0


def test_online_sc_scalings():
    for eps in (0.01, 0.001):
        a = T.n_online_sc(S("sc-online", mu=1.0, eps=eps))
        b = T.n_online_sc(S("sc-online", mu=1.0, eps=eps / 2))
        assert 1.9 <= b / a <= 2.2
    d = 100
    one = T.n_online_sc(S("sc-online", mu=1.0, eps=0.001, p=1.0, d=d))
    two = T.n_online_sc(S("sc-online", mu=1.0, eps=0.001, p=2.0, d=d))
    assert one / two == pytest.approx(kappa_p(1.0, d), rel=1e-3)


def test_sc_offline_online_ratio_polylog():
    for eps in (0.1, 0.01, 1e-3, 1e-4, 1e-5):
        r = 1.0 / eps
        ratio = T.n_offline_sc(S("sc-offline", mu=1.0, eps=eps)) / T.n_online_sc(S("sc-online", mu=1.0, eps=eps))
        assert 1.0 <= ratio <= math.log(r) ** 2 + 3


def test_growth_quadratic_matches_sc_order():
    ratios = []
    for eps in (0.1, 0.03, 0.01, 0.003, 0.001):
        g = T.n_growth(S("growth-offline", gamma=2.0, mu_gamma=0.5, lam=1.0, d=1, eps=eps))
        o = T.n_offline_sc(S("sc-offline", mu=1.0, eps=eps))
        ratios.append(g / o)
    assert max(ratios) / min(ratios) <= 3


def test_growth_power_factor():
    p1, _ = T.growth_factors(S("growth-offline", gamma=2.0, eps=0.1))
    p2, _ = T.growth_factors(S("growth-offline", gamma=2.0, eps=0.05))
    assert p2 / p1 == pytest.approx(2.0)
    p1, _ = T.growth_factors(S("growth-offline", gamma=1e6, eps=0.1))
    p2, _ = T.growth_factors(S("growth-offline", gamma=1e6, eps=0.05))
    assert p2 / p1 == pytest.approx(4.0, rel=1e-4)
    assert T.growth_radius(S("growth-offline", eps=0.2, mu_gamma=2.0)) == pytest.approx(0.4)
    assert T.growth_radius(S("growth-offline", gamma=2.0, R=3.0)) == 6.0
    assert T.growth_radius(S("growth-offline", R_eps=0.7)) == 0.7


def test_saddle_sum():
    x = S("saddle-offline", d=10)
    nx = T.n_growth(x)
    assert T.n_saddle(x, x) == 2 * nx == T.predict(x)
    assert T.n_saddle(x, x.with_(d=0)) == nx
    sharp = [T.n_saddle(x.with_(eps=e), x.with_(eps=e)) for e in (0.1, 0.01, 0.001)]
    assert len(set(sharp)) == 1


def test_factors_report():
    f = T.factors(S("convex-online", d=100))
    assert {"kappa", "branch_small_n", "branch_large_n", "const_mult"} <= set(f)
    assert "condition" in T.factors(S("sc-online", mu=1.0))
    assert "accuracy_gap" in T.factors(S("convex-offline"))
