import math

import numpy as np
import pytest
from scipy import special

from polaron_bounds.errors import NonConvergent
from polaron_bounds.quadrature import (adaptive_gauss, ang1, ang1_minus_linear, ang2, angular_rule,
                                       bessel_j0, gauss_legendre, radial_kernel, sphere_area)


def test_sphere_area():
    assert [sphere_area(d) for d in (1, 2, 3)] == pytest.approx([2.0, 2 * math.pi, 4 * math.pi])


def test_bessel_j0_against_scipy():
    x = np.concatenate([np.linspace(0, 7.99, 400), np.linspace(8.0, 200.0, 400)])
    err = np.abs(bessel_j0(x) - special.j0(x))
    assert err[x < 8].max() < 1e-12
    assert err.max() < 1e-7


def test_adaptive_gauss():
    val, err = adaptive_gauss(lambda x: np.exp(-x) * np.cos(3 * x), 0.0, 30.0)
    assert val == pytest.approx(0.1, rel=1e-12)
    assert err < 1e-10
    with pytest.raises(NonConvergent):
        adaptive_gauss(lambda x: 1.0 / np.sqrt(np.abs(x - 0.3)), 0.0, 1.0, max_panels=20)


def _sphere_average(f, n=80):
    """Brute-force surface integral on S^2 with a Gauss x uniform-azimuth product rule."""
    c, wc = gauss_legendre(-1.0, 1.0, n)
    phi = np.linspace(0, 2 * math.pi, 2 * n, endpoint=False)
    s = np.sqrt(1 - c * c)
    pts = np.stack(np.broadcast_arrays(s[:, None] * np.cos(phi), s[:, None] * np.sin(phi), c[:, None]), -1)
    return float(np.sum(wc[:, None] * f(pts)) * (2 * math.pi / (2 * n)))


@pytest.mark.parametrize("t, cx", [(0.7, 0.2), (3.1, -0.6), (12.0, 0.9)])
def test_angular_kernels_d3(t, cx):
    x_hat = np.array([math.sqrt(1 - cx * cx), 0.0, cx])     # P along z
    k0 = _sphere_average(lambda w: np.cos(t * w @ x_hat))
    k1 = _sphere_average(lambda w: w[..., 2] * np.sin(t * w @ x_hat))
    k2 = _sphere_average(lambda w: w[..., 2] ** 2 * np.cos(t * w @ x_hat))
    assert float(radial_kernel(3, t)) == pytest.approx(k0, abs=1e-10)
    assert cx * float(ang1(3, t)) == pytest.approx(k1, abs=1e-10)
    assert float(ang2(3, t, cx)) == pytest.approx(k2, abs=1e-10)


def test_ang1_minus_linear_continuous():
    for d in (1, 2, 3):
        t = np.array([0.0999999, 0.1000001])
        a = ang1_minus_linear(d, t)
        assert a[0] == pytest.approx(a[1], rel=1e-4)
        tiny = np.array([1e-6])
        assert ang1_minus_linear(d, tiny)[0] == pytest.approx(-sphere_area(d) * 1e-18 / (d * (d + 2)),
                                                              rel=1e-6)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_angular_rule_weights(d):
    c, w = angular_rule(d, 24)
    assert w.sum() == pytest.approx(sphere_area(d), rel=1e-14)
    assert float(w @ c) == pytest.approx(0.0, abs=1e-14)
