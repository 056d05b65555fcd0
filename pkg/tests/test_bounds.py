import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PI32
from polaron_bounds.bounds import (bounds_csv, certificate_csv, convex_envelope, eP_lower,
                                   eP_upper_asymptotic, essential_spectrum_ceiling, hu_norm_bounds,
                                   hu_norms, lambda_max, mass_quotient_window,
                                   meff_divergence_certificate, thm1_lower, thm1_upper)
from polaron_bounds.errors import TooFewSamples, VelocityTooLarge

# closed-form Gaussian moments for the d=3, m=1, v=exp(-k^2/2), eps=1 model
H, G, L, EP = PI32, 1.5 * PI32, 3.75 * PI32, 1.5 * PI32


def test_thm1_upper_example(gauss3):
    _, c = gauss3
    expected = -100 * H + math.sqrt(150.0) * math.sqrt(G)
    assert thm1_upper(c, 100.0).value == pytest.approx(expected, rel=1e-13)
    assert thm1_upper(c, 100.0).value == pytest.approx(-521.4368, abs=5e-5)
    assert thm1_upper(c, 0.0).value == 0.0


def test_thm1_upper_alpha_dependence(gauss3):
    _, c = gauss3
    a = 37.0
    diff = thm1_upper(c, 4 * a).value - thm1_upper(c, a).value
    assert diff == pytest.approx(-3 * a * c.h_sq + math.sqrt(3 * a / 2) * math.sqrt(c.grad_h_sq), rel=1e-12)


def test_thm1_lower_example(gauss3):
    _, c = gauss3
    low = thm1_lower(c, 100.0)
    gap = 1.5 * EP / G + 3.0 / 8.0 * L / G
    assert gap == pytest.approx(2.4375, rel=1e-15)
    assert low.value == pytest.approx(thm1_upper(c, 100.0).value - gap, rel=1e-13)
    assert low.value == pytest.approx(-523.8743, abs=5e-5)
    assert low.components["branch"] == "large-alpha"


def test_thm1_lower_small_alpha_branch(gauss3):
    _, c = gauss3
    a = 0.5
    low = thm1_lower(c, a)
    assert low.components["branch"] == "small-alpha"
    assert low.value == pytest.approx(-a * H + a * G * G / (4 * EP + L), rel=1e-13)


def test_thm1_branches_continuous_at_alpha_m(gauss3):
    _, c = gauss3
    am = c.alpha_m
    below, above = thm1_lower(c, am * (1 - 1e-13)), thm1_lower(c, am * (1 + 1e-13))
    assert below.value == pytest.approx(above.value, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=1e-3, max_value=1e8))
def test_sandwich_ordered(alpha):
    from polaron_bounds.model import compute_constants
    from conftest import gaussian_d3
    c = _CONSTS.setdefault("g3", compute_constants(gaussian_d3()))
    assert thm1_upper(c, alpha).value >= thm1_lower(c, alpha).value


_CONSTS = {}


def test_hu_norms_at_zero_exact(fluid3):
    model, c = fluid3
    n = hu_norms(model, c, 0.0)
    assert (n.h_u_sq, n.grad_h_u_sq, n.lap_h_u_sq) == (c.h_sq, c.grad_h_sq, c.lap_h_sq)


def _mc_norms(u, n_total=10_000_000, chunk=1_000_000, seed=12345):
    """Importance sampling from pi^{-3/2} exp(-k^2) for the superfluid Gaussian model."""
    rng = np.random.default_rng(seed)
    sums = {n: [] for n in (0, 2, 4)}
    for _ in range(n_total // chunk):
        k = rng.normal(scale=math.sqrt(0.5), size=(chunk, 3))
        k2 = np.einsum("ij,ij->i", k, k)
        e = np.sqrt(1 + k2)
        uk = u * k[:, 2]
        f = (1 + uk * uk / (e * (e - uk))) / e
        for n in sums:
            sums[n].append(k2 ** (n // 2) * f)
    out = {}
    for n, parts in sums.items():
        vals = np.concatenate(parts)
        out[n] = (PI32 * vals.mean(), PI32 * vals.std() / math.sqrt(len(vals)))
    return out


def test_hu_norms_against_monte_carlo(fluid3):
    model, c = fluid3
    n = hu_norms(model, c, 0.3)
    mc = _mc_norms(0.3)
    for val, (mean, sigma) in ((n.h_u_sq, mc[0]), (n.grad_h_u_sq, mc[2]), (n.lap_h_u_sq, mc[4])):
        assert abs(val - mean) <= 3 * sigma


@pytest.mark.parametrize("u", [0.05, 0.3, 0.6, 0.9, 0.98])
def test_hu_norms_one_sided_bounds(fluid3, u):
    model, c = fluid3
    n = hu_norms(model, c, u)
    b = hu_norm_bounds(c, u)
    assert n.h_u_sq <= b["h_u_sq_max"] * (1 + 1e-8)
    assert n.lap_h_u_sq <= b["lap_h_u_sq_max"] * (1 + 1e-8)
    assert n.grad_h_u_sq >= b["grad_h_u_sq_min"] * (1 - 1e-8)
    m = hu_norms(model, c, -u)
    assert m.h_u_sq == pytest.approx(n.h_u_sq, rel=1e-12)
    assert m.lap_h_u_sq == pytest.approx(n.lap_h_u_sq, rel=1e-12)


def test_hu_norms_velocity_limit(fluid3):
    model, c = fluid3
    with pytest.raises(VelocityTooLarge):
        hu_norms(model, c, 0.995 * c.crit_velocity)


def test_eP_lower_at_zero_matches_thm1(fluid3):
    model, c = fluid3
    for a in (1e2, 1e4):
        assert eP_lower(model, c, a, 0.0).value == pytest.approx(thm1_lower(c, a).value, rel=1e-12)


def _dense_u_oracle(model, c, alpha, P, n=400):
    """Brute-force scan of the exact u-dependent expression with lam clamped to its cap."""
    best = -math.inf
    for u in np.linspace(0.0, 0.99 * c.crit_velocity, n, endpoint=False):
        nu = hu_norms(model, c, u)
        den = nu.lap_h_u_sq + 4 * c.m * c.grad_eta_sq
        lam = min(nu.grad_h_u_sq / den, lambda_max(c, alpha, u))
        val = (P * u - 0.5 * c.m * u * u - alpha * nu.h_u_sq
               + alpha * (2 * lam * nu.grad_h_u_sq - lam * lam * den))
        best = max(best, val)
    return best


def test_eP_lower_against_dense_u_scan(fluid3):
    model, c = fluid3
    alpha, P = 1e3, 1e2
    bound = eP_lower(model, c, alpha, P)
    oracle = _dense_u_oracle(model, c, alpha, P)
    assert bound.value >= oracle - 1e-9 * abs(oracle)
    assert bound.value <= oracle + 1e-4
    assert bound.valid
    # the increment over the ground-state bound tracks the parabola P^2/(2 alpha M) from below
    rise = bound.value - thm1_lower(c, alpha).value
    assert 0.9 <= rise / (P * P / (2 * alpha * c.m_pek)) <= 1.0


def test_eP_lower_even_and_monotone(fluid3):
    model, c = fluid3
    alpha = 1e3
    assert eP_lower(model, c, alpha, 60.0).value == pytest.approx(eP_lower(model, c, alpha, -60.0).value,
                                                                 rel=1e-13)
    vals = [eP_lower(model, c, alpha, P).value for P in np.linspace(0.0, 400.0, 9)]
    assert all(b >= a - 1e-9 * abs(a) for a, b in zip(vals, vals[1:]))


def test_eP_upper_asymptotic(gauss3):
    _, c = gauss3
    assert eP_upper_asymptotic(c, 100.0, 0.0).value == pytest.approx(thm1_upper(c, 100.0).value, rel=1e-14)
    expected = -100 * H + math.sqrt(150.0) * math.sqrt(G) + 2500.0 / (2 * 100 * PI32)
    up = eP_upper_asymptotic(c, 100.0, 50.0)
    assert up.value == pytest.approx(expected, rel=1e-13)
    assert up.value == pytest.approx(-519.1920, abs=5e-5)
    assert "asymptotic" in up.reason
    vals = [eP_upper_asymptotic(c, 100.0, P).value for P in (0.0, 1.0, 2.0, 4.0)]
    # quadratic in P: second differences on a uniform grid are constant
    assert vals[2] - 2 * vals[1] + vals[0] == pytest.approx(2.0 / (2 * 100 * PI32), rel=1e-6)
    assert not eP_upper_asymptotic(c, 100.0, 50.0, window=0.1).valid


def test_mass_window_asymptotic_brackets(fluid3):
    model, c = fluid3
    rep = mass_quotient_window(model, c, 1e4, [1e3, -1e3, 100.0])
    lo, hi = rep.scaled_brackets()[0]
    assert lo <= hi
    assert rep.scaled_brackets()[0] == pytest.approx(rep.scaled_brackets()[1], rel=1e-12)
    assert rep.window_verdict[0]["in_window"]
    assert not rep.window_verdict[2]["valid"]


def test_certificate_vacuous_at_small_alpha(gauss3):
    _, c = gauss3
    cert = meff_divergence_certificate(c, 1.0)
    assert cert.vacuous and cert.meff_lower == c.m


def test_certificate_monotone_and_above_m(gauss3):
    _, c = gauss3
    alphas = np.geomspace(10.0, 1e10, 41)
    meff = [meff_divergence_certificate(c, a).meff_lower for a in alphas]
    assert all(x >= c.m for x in meff)
    assert all(b >= a for a, b in zip(meff, meff[1:]))


def test_certificate_w_upper_closed_form(gauss3):
    _, c = gauss3
    a = 1e6
    cert = meff_divergence_certificate(c, a)
    w = c.omega_at(a)
    assert cert.w_upper == pytest.approx(1.5 * w * w + math.sqrt(a * c.quartic_over_eps * 1.5 * w), rel=1e-14)
    assert cert.mu_star == pytest.approx(-math.sqrt(6 * w / (a * c.quartic_over_eps)), rel=1e-14)
    # mu_star minimizes dm w^2/2 - (a mu/4) Q - d w/(2 mu) over mu < 0
    f = lambda mu: 1.5 * w * w - a * mu / 4 * c.quartic_over_eps - 1.5 * w / mu  # noqa: E731
    assert f(cert.mu_star) == pytest.approx(cert.w_upper, rel=1e-12)
    assert f(cert.mu_star) <= min(f(cert.mu_star * 1.01), f(cert.mu_star * 0.99))


def test_certificate_pf2_is_sup(gauss3):
    _, c = gauss3
    a = 1e6
    cert = meff_divergence_certificate(c, a)
    w = c.omega_at(a)
    lam = np.geomspace(1e-8, 1e4, 200001)
    f = (1.5 * w * (np.sqrt(1 + 2 * lam) - 1) - 1.5 * c.ratio_E
         - 3 * (1 + 2 * lam) / 8 * c.lap_h_sq / c.grad_h_sq) / lam
    assert cert.pf2_lower >= f.max() - 1e-12 * abs(f.max())
    assert cert.pf2_lower <= f.max() * (1 + 1e-6)


def test_certificate_w_ratio_tends_to_one(gauss3):
    _, c = gauss3
    ratio = {a: meff_divergence_certificate(c, a).w_upper / (1.5 * c.omega_at(a) ** 2)
             for a in (1e8, 1e10, 1e12)}
    assert ratio[1e10] - 1 < 0.01
    # the excess decays like alpha^{-1/4}
    slope = math.log((ratio[1e12] - 1) / (ratio[1e8] - 1)) / math.log(1e4)
    assert slope == pytest.approx(-0.25, abs=1e-6)


def test_essential_spectrum_ceiling(fluid3, gauss3):
    model, c = fluid3
    assert essential_spectrum_ceiling(gauss3[0], -5.0, 0.0) == pytest.approx(-4.0)
    Ps = np.linspace(0.0, 50.0, 51)
    vals = [essential_spectrum_ceiling(model, -3.0, P) for P in Ps]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    alpha = 100.0
    E0 = thm1_upper(c, alpha).value
    gap = lambda P: essential_spectrum_ceiling(model, E0, P) - eP_upper_asymptotic(c, alpha, P).value  # noqa: E731
    lo, hi = 1.0, 1e5
    assert gap(lo) > 0 > gap(hi)
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        lo, hi = (mid, hi) if gap(mid) > 0 else (lo, mid)
    scale = alpha * c.m_pek * c.crit_velocity
    assert 0.5 * scale <= lo <= 4.0 * scale


def _brute_hull(samples):
    pts = [(p, e) for p, e in samples] + [(-p, e) for p, e in samples]
    out = []
    for p, e in samples:
        best = e
        for x1, y1 in pts:
            for x2, y2 in pts:
                if x1 < p < x2:
                    best = min(best, y1 + (y2 - y1) * (p - x1) / (x2 - x1))
        out.append((p, best))
    return out


def test_convex_envelope_examples():
    convex = [(p, p * p + 1.0) for p in np.linspace(0, 3, 7)]
    assert convex_envelope(convex) == pytest.approx(convex)
    bumpy = [(0.0, 0.0), (1.0, 1.0), (2.0, 3.0), (3.0, 2.5), (4.0, 4.0), (5.0, 9.0)]
    env = convex_envelope(bumpy)
    for (p, e), (q, f) in zip(env, _brute_hull(bumpy)):
        assert p == q and e == pytest.approx(f, abs=1e-12)
    assert env[2][1] < 3.0
    with pytest.raises(TooFewSamples):
        convex_envelope([(0.0, 1.0), (1.0, 2.0)])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=-10, max_value=10), min_size=3, max_size=15))
def test_convex_envelope_properties(values):
    samples = [(float(i), v) for i, v in enumerate(values)]
    env = convex_envelope(samples)
    assert all(f <= e + 1e-12 for (_, e), (_, f) in zip(samples, env))
    ys = [f for _, f in env]
    assert all(ys[i - 1] + ys[i + 1] - 2 * ys[i] >= -1e-9 for i in range(1, len(ys) - 1))
    for (_, f), (_, g) in zip(env, _brute_hull(samples)):
        assert f == pytest.approx(g, abs=1e-9)


def test_csv_schemas(gauss3):
    _, c = gauss3
    text = bounds_csv([(1.0, 0.0, -1.0, -2.0, True, "ok")])
    assert text.splitlines()[0] == "alpha,P,upper,lower,valid,reason"
    text = certificate_csv([meff_divergence_certificate(c, 1e4)])
    assert text.splitlines()[0] == "alpha,pf2_lower,w_upper,meff_lower,lambda_star,mu_star"
