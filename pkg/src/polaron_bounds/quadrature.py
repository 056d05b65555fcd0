"""Quadrature rules and radial Fourier kernels shared by every module.

All momentum- and position-space integrals in this package are over
isotropic (or axially symmetric) integrands in d = 1, 2, 3 dimensions.
They reduce to a radial integral times an angular factor; the helpers
here supply both pieces.
"""

from __future__ import annotations

import heapq
import math
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import NonConvergent

EPS = np.finfo(float).eps


def sphere_area(d: int) -> float:
    """Surface area S_{d-1} of the unit sphere in R^d (2, 2*pi, 4*pi)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@lru_cache(maxsize=64)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def composite_gauss(edges, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on consecutive panels given by `edges`."""
    edges = np.asarray(edges, dtype=float)
    x, w = _leggauss(n)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def panel_nodes(r_max: float, n_panels: int, n: int = 16):
    """Uniform-panel composite Gauss rule on [0, r_max]."""
    return composite_gauss(np.linspace(0.0, r_max, n_panels + 1), n)


def adaptive_gauss(f, a: float, b: float, n: int = 32, rel_tol: float = 1e-12,
                   abs_tol: float = 1e-14, initial_panels: int = 8,
                   max_panels: int = 20000) -> tuple[float, float]:
    """Globally adaptive panel Gauss-Legendre quadrature of a vectorized `f`.

    Each panel is integrated with an `n`-point rule and again on its two
    halves; the difference is the panel error. The worst panel is bisected
    until the summed error meets ``max(abs_tol, rel_tol*|I|)``.

    Returns
    -------
    value, error : float
        Integral estimate and its error estimate (including a round-off floor).

    Raises
    ------
    NonConvergent
        If `max_panels` is exhausted before the tolerance is met.
    """
    if b <= a:
        return 0.0, 0.0
    x, w = _leggauss(n)

    def rule(lo, hi):
        lo = np.asarray(lo, dtype=float)[:, None]
        hi = np.asarray(hi, dtype=float)[:, None]
        half = 0.5 * (hi - lo)
        pts = 0.5 * (lo + hi) + half * x[None, :]
        vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
        return (half[:, 0] * (vals @ w)), (half[:, 0] * (np.abs(vals) @ w))

    def evaluate(lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        mid = 0.5 * (lo + hi)
        coarse, _ = rule(lo, hi)
        left, left_abs = rule(lo, mid)
        right, right_abs = rule(mid, hi)
        fine = left + right
        return fine, np.abs(fine - coarse), left_abs + right_abs

    edges = np.linspace(a, b, initial_panels + 1)
    fine, err, mag = evaluate(edges[:-1], edges[1:])
    heap = [(-e, lo, hi, v, m) for e, lo, hi, v, m in zip(err, edges[:-1], edges[1:], fine, mag)]
    heapq.heapify(heap)
    total = float(np.sum(fine))
    total_err = float(np.sum(err))
    total_mag = float(np.sum(mag))
    while True:
        target = max(abs_tol, rel_tol * abs(total))
        if total_err <= target:
            break
        if len(heap) >= max_panels:
            raise NonConvergent(
                f"adaptive quadrature on [{a:g}, {b:g}] stalled at error {total_err:.3e} "
                f"(target {target:.3e}) after {len(heap)} panels",
                value=total, error=total_err)
        # split the worst few panels at once to keep numpy calls coarse
        keep = [heapq.heappop(heap) for _ in range(min(len(heap), 16))]
        lo = np.array([it[1] for it in keep])
        hi = np.array([it[2] for it in keep])
        for it in keep:
            total -= it[3]
            total_err -= -it[0]
            total_mag -= it[4]
        mid = 0.5 * (lo + hi)
        los = np.concatenate([lo, mid])
        his = np.concatenate([mid, hi])
        fine, err, mag = evaluate(los, his)
        for e, l_, h_, v, m in zip(err, los, his, fine, mag):
            heapq.heappush(heap, (-e, l_, h_, v, m))
        total += float(np.sum(fine))
        total_err += float(np.sum(err))
        total_mag += float(np.sum(mag))
    # re-sum from the panels to shed accumulated round-off in `total`
    total = math.fsum(item[3] for item in heap)
    total_err = math.fsum(-item[0] for item in heap)
    total_mag = math.fsum(item[4] for item in heap)
    return total, total_err + 64.0 * EPS * total_mag


def fixed_gauss(f, a: float, b: float, n: int) -> tuple[float, float]:
    """Single n-point Gauss-Legendre rule with an n vs n/2 error estimate."""
    x, w = gauss_legendre(a, b, n)
    value = float(np.dot(w, f(x)))
    x2, w2 = gauss_legendre(a, b, max(n // 2, 2))
    coarse = float(np.dot(w2, f(x2)))
    return value, abs(value - coarse) + 64.0 * EPS * abs(value)


# ---------------------------------------------------------------------------
# Bessel functions

def bessel_j0(x):
    """J_0 by ascending series below 8 and the Hankel asymptotic form above.

    Absolute accuracy is about 1e-13 for x < 8 and degrades to a few times
    1e-8 right at the switch point, where the asymptotic series is shortest.
    """
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    small = x < 8.0
    if np.any(small):
        xs = x[small]
        q = -0.25 * xs * xs
        term = np.ones_like(xs)
        acc = np.ones_like(xs)
        for k in range(1, 60):
            term = term * q / (k * k)
            acc = acc + term
            if np.all(np.abs(term) < 1e-17 * np.maximum(np.abs(acc), 1e-300)):
                break
        out[small] = acc
    big = ~small
    if np.any(big):
        xb = x[big]
        p_sum = np.ones_like(xb)
        q_sum = np.zeros_like(xb)
        # a_k(0) / x^k with a_k(0) = prod_{j=1..k} (-(2j-1)^2) / (k! 8^k)
        term = np.ones_like(xb)
        last = np.full_like(xb, np.inf)
        active = np.ones_like(xb, dtype=bool)
        for k in range(1, 40):
            term = term * (-(2 * k - 1) ** 2) / (k * 8.0 * xb)
            mag = np.abs(term)
            active &= mag < last
            if not np.any(active):
                break
            contrib = np.where(active, term, 0.0)
            # k even -> P series with sign (-1)^(k/2); k odd -> Q series
            if k % 2 == 0:
                p_sum += contrib * (-1) ** (k // 2)
            else:
                q_sum += contrib * (-1) ** ((k - 1) // 2)
            last = np.where(active, mag, last)
        phase = xb - 0.25 * math.pi
        out[big] = np.sqrt(2.0 / (math.pi * xb)) * (p_sum * np.cos(phase) - q_sum * np.sin(phase))
    return out


def radial_kernel(d: int, t):
    """Angular integral of exp(i p.x) divided by nothing: the map t=|p||x| -> kernel.

    ``int_{S^{d-1}} exp(i t w.e) dw`` equals 2 cos t, 2 pi J0(t), 4 pi sin t / t
    for d = 1, 2, 3.
    """
    t = np.asarray(t, dtype=float)
    if d == 1:
        return 2.0 * np.cos(t)
    if d == 2:
        return 2.0 * math.pi * bessel_j0(t)
    if d == 3:
        return 4.0 * math.pi * np.sinc(t / math.pi)
    raise ValueError(f"dimension must be 1, 2 or 3, got {d}")


# Angular kernels for integrands carrying powers of (p_hat . P_hat).
# With c = x_hat . P_hat:
#   int dOmega_p (p.P)^0 e^{i p.x}   = ang0(t)
#   int dOmega_p (p_hat.P_hat) sin(p.x) = c * ang1(t)
#   int dOmega_p (p_hat.P_hat)^2 cos(p.x) = ang2(t, c)

def ang0(d: int, t):
    return radial_kernel(d, t)


def ang1(d: int, t):
    t = np.asarray(t, dtype=float)
    if d == 1:
        return 2.0 * np.sin(t)
    if d == 2:
        return 2.0 * math.pi * special.j1(t)
    if d == 3:
        return 4.0 * math.pi * special.spherical_jn(1, t)
    raise ValueError(f"dimension must be 1, 2 or 3, got {d}")


def ang1_minus_linear(d: int, t):
    """ang1(t) - S_{d-1} t / d, free of cancellation for small t."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = np.abs(t) < 0.1
    ts = t[small]
    t2 = ts * ts
    if d == 1:
        # 2 (sin t - t)
        series = -ts * t2 / 6.0 * (1 - t2 / 20.0 * (1 - t2 / 42.0 * (1 - t2 / 72.0)))
        out[small] = 2.0 * series
    elif d == 2:
        # 2 pi (J1(t) - t/2) = 2 pi sum_{k>=1} (-1)^k (t/2)^{2k+1} / (k! (k+1)!)
        h = ts / 2.0
        acc = np.zeros_like(ts)
        term = h.copy()
        for k in range(1, 8):
            term = -term * h * h / (k * (k + 1))
            acc += term
        out[small] = 2.0 * math.pi * acc
    else:
        # 4 pi (j1(t) - t/3), j1(t) = sum (-1)^k t^{2k+1} / ((2k+1)!! (2k+3)) ... via recurrence
        acc = np.zeros_like(ts)
        term = ts / 3.0
        for k in range(1, 8):
            term = -term * t2 / (2 * k * (2 * k + 3))
            acc += term
        out[small] = 4.0 * math.pi * acc
    big = ~small
    out[big] = ang1(d, t[big]) - sphere_area(d) * t[big] / d
    return out


def ang2(d: int, t, c):
    t = np.asarray(t, dtype=float)
    c = np.asarray(c, dtype=float)
    if d == 1:
        return 2.0 * np.cos(t) + 0.0 * c
    if d == 2:
        return math.pi * (bessel_j0(t) - special.jv(2, t) * (2.0 * c * c - 1.0))
    if d == 3:
        p2 = 0.5 * (3.0 * c * c - 1.0)
        return (4.0 * math.pi / 3.0) * (special.spherical_jn(0, t) - 2.0 * special.spherical_jn(2, t) * p2)
    raise ValueError(f"dimension must be 1, 2 or 3, got {d}")


def angular_rule(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes c = cos(angle to a fixed axis) and weights with sum S_{d-1}.

    Integrates functions of c over the unit sphere: d=1 uses the two points
    c = -1, +1; d=2 Gauss-Legendre in the polar angle on [0, pi] (doubled);
    d=3 Gauss-Legendre in c on [-1, 1] times 2 pi.
    """
    if d == 1:
        return np.array([-1.0, 1.0]), np.array([1.0, 1.0])
    if d == 2:
        phi, w = gauss_legendre(0.0, math.pi, n)
        return np.cos(phi), 2.0 * w
    if d == 3:
        c, w = gauss_legendre(-1.0, 1.0, n)
        return c, 2.0 * math.pi * w
    raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
