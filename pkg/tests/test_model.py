import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from conftest import PI32, gaussian_d1, gaussian_d3, superfluid_d3
from polaron_bounds.errors import DivergentIntegrand, ValidationError
from polaron_bounds.model import (PolaronModel, QuadratureSpec, RadialProfile, compute_constants,
                                  constants_csv, kernel_R, kernel_g, radial_integral,
                                  validate_regularity)


def test_gaussian_moments_closed_form():
    model = gaussian_d3()
    # int_{R^3} |k|^p e^{-k^2} dk = pi^{3/2} Gamma((p+3)/2) / Gamma(3/2)
    for p, expected in ((0, PI32), (2, 1.5 * PI32), (4, 3.75 * PI32)):
        val, err = radial_integral(model, p, 1, QuadratureSpec())
        assert val == pytest.approx(expected, rel=1e-12)
        assert err < 1e-9 * expected


def test_form_factor_scaling_quadruples_integrals():
    base, scaled = gaussian_d3(), gaussian_d3().scaled(2.0)
    for p, q in ((0, 1), (2, 1), (2, 0), (4, 3)):
        a = radial_integral(base, p, q, QuadratureSpec()).value
        b = radial_integral(scaled, p, q, QuadratureSpec()).value
        assert b == pytest.approx(4.0 * a, rel=1e-12)


def test_constants_d3_gaussian():
    c = compute_constants(gaussian_d3(alpha=100.0))
    assert c.omega == pytest.approx(math.sqrt(200.0 / 3.0 * 1.5 * PI32), rel=1e-12)
    assert c.m_pek == pytest.approx(PI32, rel=1e-12)
    # alpha_m = (d/8m) ((4m E' + L) / G^{3/2})^2 with E' = G = 3/2 pi^{3/2}, L = 15/4 pi^{3/2}
    G, L, Ep = 1.5 * PI32, 3.75 * PI32, 1.5 * PI32
    assert c.alpha_m == pytest.approx(3.0 / 8.0 * ((4 * Ep + L) / G ** 1.5) ** 2, rel=1e-12)
    assert c.alpha_m == pytest.approx(1.897, abs=5e-4)
    assert c.omega ** 2 == pytest.approx(2 * 100.0 / 3.0 * c.grad_h_sq, rel=1e-14)
    assert c.lambda_c == pytest.approx(PI32 / 4.0, rel=1e-12)
    assert c.theta_c == pytest.approx(15.0 / 288.0 * PI32, rel=1e-12)


def test_constants_d1_gaussian():
    c = compute_constants(gaussian_d1(alpha=1.0))
    rp = math.sqrt(math.pi)
    assert c.h_sq == pytest.approx(rp, rel=1e-12)
    assert c.grad_h_sq == pytest.approx(rp / 2.0, rel=1e-12)
    assert c.m_pek == pytest.approx(rp, rel=1e-12)


def test_alpha_quadrupled_doubles_omega_only():
    a, b = compute_constants(gaussian_d3(25.0)), compute_constants(gaussian_d3(100.0))
    assert b.omega == pytest.approx(2.0 * a.omega, rel=1e-14)
    for name in ("h_sq", "grad_h_sq", "lap_h_sq", "grad_eta_sq", "m_pek", "alpha_m", "lambda_c"):
        assert getattr(a, name) == getattr(b, name)


@pytest.mark.parametrize("s", [0.5, 2.0, 10.0])
def test_scaling_law(s):
    a, b = compute_constants(gaussian_d3()), compute_constants(gaussian_d3().scaled(s))
    for name in ("h_sq", "grad_h_sq", "lap_h_sq", "grad_eta_sq", "m_pek"):
        assert getattr(b, name) == pytest.approx(s * s * getattr(a, name), rel=1e-11)
    assert b.omega == pytest.approx(s * a.omega, rel=1e-11)
    assert b.alpha_m == pytest.approx(a.alpha_m / (s * s), rel=1e-11)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_surface_factor_against_cartesian_sum(d):
    model = PolaronModel(d, 1.0, 1.0, RadialProfile.gaussian(), RadialProfile.power(1.0, 1.0, 1.0, 1.0))
    h = 0.15 if d == 3 else 0.05
    axis = np.arange(-7.0, 7.0 + h / 2, h)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    k = np.sqrt(sum(g * g for g in grids))
    riemann = float(np.sum(k ** 2 * model.v(k) ** 2 / model.eps(k))) * h ** d
    val = radial_integral(model, 2, 1, QuadratureSpec()).value
    assert val == pytest.approx(riemann, rel=0.01)


def test_doubling_radial_points_within_error():
    model = superfluid_d3()
    coarse = compute_constants(model, QuadratureSpec(radial_points=16))
    fine = compute_constants(model, QuadratureSpec(radial_points=32))
    for name in ("h_sq", "grad_h_sq", "lap_h_sq", "grad_eta_sq", "quartic_over_eps"):
        err = coarse.err_estimates[name] + fine.err_estimates[name]
        assert abs(getattr(coarse, name) - getattr(fine, name)) <= err + 4e-16 * getattr(fine, name)


def test_fixed_rule_agrees_with_adaptive():
    model = gaussian_d3()
    a = radial_integral(model, 2, 1, QuadratureSpec()).value
    b = radial_integral(model, 2, 1, QuadratureSpec(radial_rule="fixed-gauss-legendre",
                                                   radial_points=96)).value
    assert b == pytest.approx(a, rel=1e-10)


def test_frohlich_is_not_regular():
    v = RadialProfile.power(1.0 / (math.sqrt(2.0) * math.pi), 0.0, 1.0, -1.0)
    model = PolaronModel(3, 1.0, 1.0, v, RadialProfile.constant(1.0))
    rep = validate_regularity(model)
    assert not rep.regular
    assert not rep.integrals["h_sq"]["finite"]
    assert any(line.startswith("‖h‖² divergent") for line in rep.failures)
    with pytest.raises(DivergentIntegrand):
        radial_integral(model, 0, 1, QuadratureSpec())


def test_superfluid_verdicts():
    rep = validate_regularity(superfluid_d3())
    assert rep.regular and rep.massive and rep.superfluid
    assert rep.gap == pytest.approx(1.0, rel=1e-9)
    # inf sqrt(1+r^2)/r = 1, approached as r -> infinity; oracle: dense grid minimization
    r = np.geomspace(1e-3, 1e8, 200001)
    assert rep.crit_velocity == pytest.approx(float(np.min(np.sqrt(1 + r * r) / r)), abs=1e-6)
    assert rep.subadditivity["verdict"].startswith("sampled")


def test_constant_dispersion_not_superfluid():
    rep = validate_regularity(gaussian_d3())
    assert rep.massive and not rep.superfluid
    assert rep.crit_velocity == 0.0


def test_kernel_g_values():
    model = gaussian_d3()
    c = compute_constants(model)
    assert kernel_g(model, 0.0) == pytest.approx(c.h_sq, rel=1e-14)
    # Fourier transform of e^{-k^2} in 3d: pi^{3/2} e^{-r^2/4}
    assert kernel_g(model, 1.0) == pytest.approx(PI32 * math.exp(-0.25), rel=1e-10)
    assert kernel_R(model, 0.0) == pytest.approx(1.5 * c.m_pek, rel=1e-12)


def test_kernel_g_d1_against_scipy():
    model = gaussian_d1()
    for r in (0.3, 2.0, 7.5):
        ref = integrate.quad(lambda k: math.exp(-k * k) * math.cos(k * r), -np.inf, np.inf)[0]
        assert kernel_g(model, r) == pytest.approx(ref, rel=1e-9, abs=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.0, max_value=30.0))
def test_kernels_bounded_by_origin(r):
    model = superfluid_d3()
    assert abs(kernel_g(model, r)) <= kernel_g(model, 0.0) * (1 + 1e-12)
    assert abs(kernel_R(model, r)) <= kernel_R(model, 0.0) * (1 + 1e-12)


def test_rejects_zero_form_factor_and_bad_dispersion():
    with pytest.raises(ValidationError):
        PolaronModel(3, 1.0, 1.0, RadialProfile.gaussian(amplitude=0.0), RadialProfile.constant(1.0))
    with pytest.raises(ValidationError):
        PolaronModel(3, 1.0, 1.0, RadialProfile.gaussian(), RadialProfile.constant(-1.0))
    with pytest.raises(ValidationError):
        PolaronModel(4, 1.0, 1.0, RadialProfile.gaussian(), RadialProfile.constant(1.0))
    with pytest.raises(ValidationError):
        QuadratureSpec(radial_points=4)


def test_tabulated_profile():
    r = np.linspace(0.0, 8.0, 33)
    prof = RadialProfile.tabulated(list(zip(r, np.exp(-r * r / 2))))
    assert prof(1.0) == pytest.approx(math.exp(-0.5), rel=1e-3)
    assert prof(11.9) >= 0.0
    with pytest.raises(ValidationError):
        prof(12.5)
    model = PolaronModel(3, 1.0, 1.0, prof, RadialProfile.constant(1.0))
    assert compute_constants(model).h_sq == pytest.approx(PI32, rel=1e-3)


def test_profile_dict_round_trip():
    model = superfluid_d3()
    again = PolaronModel.from_dict(model.to_dict())
    assert again == model
    alias = RadialProfile.from_dict({"kind": "closed-form-gaussian", "params": [1.0, 1.0]})
    assert alias.kind == "gaussian"


def test_constants_csv_header():
    text = constants_csv(compute_constants(gaussian_d3()))
    assert text.splitlines()[0] == "name,value,err_estimate"
