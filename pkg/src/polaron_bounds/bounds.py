"""Closed-form energy bounds, velocity-shifted norms and effective-mass windows.

Notation: h = ||h||^2, G = ||grad h||^2, L = ||Laplace h||^2 and
E' = ||grad eta||^2, all taken from :class:`ModelConstants`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import TooFewSamples, VelocityTooLarge, WindowViolation
from .model import ModelConstants, PolaronModel, QuadratureSpec, RadialProfile, cutoff_radius
from .quadrature import adaptive_gauss, angular_rule

# |P|/sqrt(alpha) must exceed this and |P|/alpha stay below the other for the
# momentum window heuristics to be flagged as satisfied
WINDOW_LOW = 10.0
WINDOW_HIGH = 0.1


@dataclass(frozen=True)
class EnergyBound:
    value: float
    kind: str
    target: str
    P: float = 0.0
    components: dict = field(default_factory=dict)
    valid: bool = True
    reason: str = ""


def thm1_upper(consts: ModelConstants, alpha: float) -> EnergyBound:
    """-alpha h + sqrt(d alpha / 2m) sqrt(G): the harmonic (Pekar-Gaussian) upper bound."""
    lead = -alpha * consts.h_sq
    harmonic = math.sqrt(consts.d * alpha / (2.0 * consts.m)) * math.sqrt(consts.grad_h_sq)
    return EnergyBound(lead + harmonic, "upper", "E0", 0.0,
                       {"leading": lead, "harmonic": harmonic})


def _lower_lambda(consts: ModelConstants, alpha: float) -> tuple[float, str]:
    d, m, G = consts.d, consts.m, consts.grad_h_sq
    lam_star = G / (4.0 * m * consts.grad_eta_sq + consts.lap_h_sq)
    if alpha <= 0:
        return lam_star, "small-alpha"
    lam0 = math.sqrt(d / (8.0 * m * alpha * G))
    return (lam0, "large-alpha") if lam0 <= lam_star else (lam_star, "small-alpha")


def thm1_lower(consts: ModelConstants, alpha: float) -> EnergyBound:
    """-alpha h + alpha (2 lam G - lam^2 L - 4 m lam^2 E') at the admissible optimum lam.

    For alpha >= alpha_m the optimum is lam0 = sqrt(d / (8 m alpha G)) and
    the value equals the upper bound minus an alpha-independent constant;
    below alpha_m the unconstrained vertex G / (4 m E' + L) is used.
    """
    m, G, L, Eg = consts.m, consts.grad_h_sq, consts.lap_h_sq, consts.grad_eta_sq
    lam, branch = _lower_lambda(consts, alpha)
    lead = -alpha * consts.h_sq
    gain = alpha * (2.0 * lam * G - lam * lam * L - 4.0 * m * lam * lam * Eg)
    comps = {"leading": lead, "lambda": lam, "branch": branch, "gain": gain}
    if branch == "large-alpha":
        up = thm1_upper(consts, alpha)
        comps["harmonic"] = up.components["harmonic"]
        comps["constant"] = -consts.thm1_constant
    return EnergyBound(lead + gain, "lower", "E0", 0.0, comps)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VelocityShiftNorms:
    u: float
    h_u_sq: float
    grad_h_u_sq: float
    lap_h_u_sq: float
    err: dict = field(default_factory=dict)


def hu_norms(model: PolaronModel, consts: ModelConstants, u: float,
             quad: QuadratureSpec | None = None) -> VelocityShiftNorms:
    """Norms of the velocity-shifted Pekar kernel h_u.

    int |v|^2/eps k^n (1 + (u.k)^2 / (eps (eps - u.k))) dk for n = 0, 2, 4,
    evaluated with u along a fixed axis on a radial x angular product rule.
    """
    quad = quad or QuadratureSpec()
    c = consts.crit_velocity
    a = abs(u)
    if a == 0.0:
        return VelocityShiftNorms(0.0, consts.h_sq, consts.grad_h_sq, consts.lap_h_sq,
                                  {k: consts.err_estimates.get(k, 0.0)
                                   for k in ("h_sq", "grad_h_sq", "lap_h_sq")})
    if not a < 0.99 * c:
        raise VelocityTooLarge(f"|u|={a:g} must stay below 0.99 c = {0.99 * c:g}", u=u, c=c)
    d = model.d
    cos, wc = angular_rule(d, quad.angular_points)
    R = cutoff_radius(model, quad)
    out, err = {}, {}
    for name, n in (("h_u_sq", 0), ("grad_h_u_sq", 2), ("lap_h_u_sq", 4)):
        def f(r, n=n):
            r = np.asarray(r, dtype=float)
            e = model.eps(r)[:, None]
            uk = a * r[:, None] * cos[None, :]
            shift = 1.0 + uk * uk / (e * (e - uk))
            base = np.abs(model.v(r)) ** 2 / model.eps(r) * r ** (n + d - 1)
            return base * (shift @ wc)
        val, e_ = adaptive_gauss(f, 0.0, R, n=quad.radial_points, rel_tol=quad.rel_tol,
                                 abs_tol=quad.abs_tol)
        out[name], err[name] = val, e_
    return VelocityShiftNorms(float(u), out["h_u_sq"], out["grad_h_u_sq"], out["lap_h_u_sq"], err)


def hu_norm_bounds(consts: ModelConstants, u: float) -> dict:
    """One-sided analytic bounds the shifted norms must satisfy."""
    c, a = consts.crit_velocity, abs(u)
    return {
        "h_u_sq_max": consts.h_sq + a * a * consts.m_pek / (2.0 * (1.0 - a / c)),
        "lap_h_u_sq_max": consts.lap_h_sq * (1.0 + a * a / (c * (c - a))),
        "grad_h_u_sq_min": consts.grad_h_sq,
    }


def lambda_max(consts: ModelConstants, alpha: float, u: float) -> float:
    """Largest admissible lam at velocity u; at u=0 it is 1/(2 m omega)."""
    omega = consts.omega_at(alpha)
    a, c = abs(u), consts.crit_velocity
    shift = 1.0 + (a * a / (c * (c - a)) if a > 0 else 0.0)
    return 1.0 / (2.0 * consts.m * omega * math.sqrt(shift))


def _lower_at_u(consts: ModelConstants, alpha: float, P: float, norms: VelocityShiftNorms):
    m, u = consts.m, norms.u
    denom = norms.lap_h_u_sq + 4.0 * m * consts.grad_eta_sq
    lam_vertex = norms.grad_h_u_sq / denom
    lam_cap = lambda_max(consts, alpha, u)
    lam = min(lam_vertex, lam_cap)
    gain = alpha * (2.0 * lam * norms.grad_h_u_sq - lam * lam * denom)
    kinetic = P * u - 0.5 * m * u * u
    lead = -alpha * norms.h_u_sq
    return lead + gain + kinetic, {"u": u, "lambda": lam, "lambda_cap": lam_cap,
                                   "leading": lead, "gain": gain, "kinetic": kinetic}


def eP_lower(model: PolaronModel, consts: ModelConstants, alpha: float, P: float,
             quad: QuadratureSpec | None = None, scan_points: int = 24) -> EnergyBound:
    """Lower bound on E(P), maximized over the velocity u in [0, 0.99 c).

    The reference velocity P / (alpha M^Pek) is always evaluated and the
    better of it and the numerical optimum is returned.
    """
    quad = quad or QuadratureSpec()
    Pa = abs(P)
    c = consts.crit_velocity
    cache = {}

    def value(u):
        u = float(u)
        if u not in cache:
            cache[u] = _lower_at_u(consts, alpha, Pa, hu_norms(model, consts, u, quad))
        return cache[u]

    candidates = [0.0]
    u_ref = Pa / (alpha * consts.m_pek)
    umax = 0.99 * c
    if Pa > 0 and umax > 0:
        if u_ref < umax:
            candidates.append(u_ref)
        hi = umax * (1.0 - 1e-6)
        grid = np.linspace(0.0, hi, scan_points)
        vals = [value(u)[0] for u in grid]
        i = int(np.argmax(vals))
        lo_b, hi_b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        if hi_b > lo_b:
            res = minimize_scalar(lambda u: -value(u)[0], bounds=(lo_b, hi_b), method="bounded",
                                  options={"xatol": 1e-10 * max(hi, 1.0)})
            candidates.append(float(res.x))
        candidates.extend(float(u) for u in grid)
    best_u = max(candidates, key=lambda u: value(u)[0])
    val, comps = value(best_u)
    if not math.isfinite(val):
        raise WindowViolation(f"no admissible velocity gives a finite bound at P={P:g}", P=P)
    comps = dict(comps, u_reference=u_ref,
                 value_at_reference=value(u_ref)[0] if u_ref < umax else math.nan)
    valid = best_u < umax
    reason = "" if valid else "velocity outside [0, 0.99c)"
    if c <= 0 and Pa > 0:
        reason = "not superfluid: only u=0 admissible"
    return EnergyBound(val, "lower", "EP", float(P), comps, valid, reason)


def eP_upper_asymptotic(consts: ModelConstants, alpha: float, P: float,
                        window: float = WINDOW_HIGH) -> EnergyBound:
    """-alpha h + d omega/2 + P^2/(2 alpha M^Pek), O(|P|/alpha) remainder excluded."""
    lead = -alpha * consts.h_sq
    harmonic = 0.5 * consts.d * consts.omega_at(alpha)
    kinetic = P * P / (2.0 * alpha * consts.m_pek)
    inside = abs(P) <= window * alpha
    reason = "asymptotic, remainder excluded"
    if not inside:
        reason += f"; |P| > {window:g} alpha"
    return EnergyBound(lead + harmonic + kinetic, "upper", "EP", float(P),
                       {"leading": lead, "harmonic": harmonic, "kinetic": kinetic, "C": window},
                       inside, reason)


# ---------------------------------------------------------------------------

@dataclass
class MomentumWindowReport:
    alpha: float
    P_grid: list
    upper: list
    lower: list
    M_lower: list
    M_upper: list
    window_verdict: list
    E0_lower: float
    E0_upper: float
    m_pek: float

    def scaled_brackets(self):
        """(alpha^-1 M_lower, alpha^-1 M_upper) for each P."""
        return [(lo / self.alpha, hi / self.alpha) for lo, hi in zip(self.M_lower, self.M_upper)]


def mass_quotient_window(model: PolaronModel, consts: ModelConstants, alpha: float,
                         P_grid: Sequence[float], quad: QuadratureSpec | None = None,
                         trial: Callable[[float], tuple[float, float]] | None = None,
                         pekar_energy: float | None = None) -> MomentumWindowReport:
    """Bracket the effective-mass quotient M(P) = P^2 / (2 (E(P) - E(0))).

    `trial` maps P to (variational energy, error estimate) and provides the
    rigorous upper bound on E(P); without it the asymptotic upper formula
    is used (and the row is marked accordingly). `pekar_energy` tightens the
    upper bound on E(0).
    """
    quad = quad or QuadratureSpec()
    E0_low = thm1_lower(consts, alpha).value
    E0_up = thm1_upper(consts, alpha).value
    if pekar_energy is not None:
        E0_up = min(E0_up, pekar_energy)
    if trial is not None:
        e, err = trial(0.0)
        E0_up = min(E0_up, e + err)
    uppers, lowers, m_lo, m_hi, verdicts = [], [], [], [], []
    for P in P_grid:
        if trial is not None:
            e, err = trial(abs(P))
            up = EnergyBound(e + err, "upper", "EP", float(P),
                             {"variational": e, "error": err}, True, "trial state")
        else:
            up = eP_upper_asymptotic(consts, alpha, P)
        lo = eP_lower(model, consts, alpha, P, quad)
        uppers.append(up)
        lowers.append(lo)
        ratio_low, ratio_high = abs(P) / math.sqrt(alpha), abs(P) / alpha
        in_window = ratio_low >= WINDOW_LOW and ratio_high <= WINDOW_HIGH
        den_lo = up.value - E0_low    # gives the lower M bound
        den_hi = lo.value - E0_up     # gives the upper M bound
        reasons = []
        if P == 0:
            reasons.append("P = 0")
        if den_hi <= 0:
            reasons.append("degenerate denominator: E(P)-E(0) bracket contains 0")
        if den_lo <= 0:
            reasons.append("degenerate denominator: upper E(P) below lower E(0)")
        if not lo.valid:
            reasons.append("lower bound invalid: " + lo.reason)
        m_lo.append(P * P / (2.0 * den_lo) if den_lo > 0 else 0.0)
        m_hi.append(P * P / (2.0 * den_hi) if den_hi > 0 else math.inf)
        verdicts.append({"P": float(P), "ratio_sqrt_alpha": ratio_low, "ratio_alpha": ratio_high,
                         "in_window": in_window, "valid": not reasons, "reason": "; ".join(reasons)})
    return MomentumWindowReport(alpha, list(map(float, P_grid)), uppers, lowers, m_lo, m_hi,
                                verdicts, E0_low, E0_up, consts.m_pek)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MassCertificate:
    alpha: float
    pf2_lower: float
    w_upper: float
    meff_lower: float
    lambda_star: float
    mu_star: float
    vacuous: bool = False
    metadata: dict = field(default_factory=dict)


_GUARD = 1e-12


def _pf2_objective(consts: ModelConstants, omega: float):
    d, m = consts.d, consts.m
    E = consts.ratio_E
    Lr = consts.lap_h_sq / consts.grad_h_sq

    def f(lam):
        s = 1.0 + 2.0 * lam * m
        num = 0.5 * d * omega * (math.sqrt(s) - 1.0) - 0.5 * d * E - d * s / (8.0 * m) * Lr
        return num / lam

    return f


def meff_divergence_certificate(consts: ModelConstants, alpha: float,
                                subadditivity: dict | None = None) -> MassCertificate:
    """Lower bound on the effective mass that grows like alpha^(1/4).

    Chains a lower bound on <P_f^2> in the ground state with an upper bound
    on the quartic field expectation and a Cauchy-Schwarz estimate.
    """
    d, m = consts.d, consts.m
    omega = consts.omega_at(alpha)
    Q = consts.quartic_over_eps
    w_upper = d * m * omega * omega / 2.0 + math.sqrt(alpha * Q * d * omega / 2.0)
    mu_star = -math.sqrt(2.0 * d * omega / (alpha * Q))
    f = _pf2_objective(consts, omega)
    grid = np.geomspace(1e-10, 1e10, 401) / m
    vals = np.array([f(x) for x in grid])
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(lambda t: -f(math.exp(t)), bounds=(math.log(lo), math.log(hi)),
                          method="bounded", options={"xatol": 1e-12})
    lam_star = math.exp(res.x)
    pf2 = f(lam_star)
    if vals[i] > pf2:
        lam_star, pf2 = float(grid[i]), float(vals[i])
    meta = {"subadditivity": subadditivity} if subadditivity else {}
    if not pf2 > 0:
        meta["reason"] = "vacuous: pf2 lower bound not positive"
        return MassCertificate(alpha, pf2, w_upper, m, lam_star, mu_star, True, meta)
    meff = m / max(_GUARD, 1.0 - 2.0 / (d * m) * pf2 * pf2 / w_upper)
    return MassCertificate(alpha, pf2, w_upper, meff, lam_star, mu_star, False, meta)


def essential_spectrum_ceiling(model: PolaronModel | RadialProfile, E0_upper: float, P: float) -> float:
    """E0_upper + eps(|P|), an upper bound for the bottom of the essential spectrum."""
    eps = model.eps if isinstance(model, PolaronModel) else model
    return float(E0_upper + eps(abs(P)))


def convex_envelope(samples: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Largest convex even function below the samples, evaluated at the sample |P|.

    Samples are reflected to negative P before the lower hull is built, so
    the result is the envelope of an even function.
    """
    pts = sorted((abs(float(p)), float(e)) for p, e in samples)
    if len(pts) < 3:
        raise TooFewSamples(f"need at least 3 samples, got {len(pts)}")
    full = sorted({(-p, e) for p, e in pts} | set(pts))
    hull: list[tuple[float, float]] = []
    for p in full:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    hx = np.array([x for x, _ in hull])
    hy = np.array([y for _, y in hull])
    return [(p, float(min(np.interp(p, hx, hy), e))) for p, e in pts]


def bounds_csv(rows) -> str:
    """Rows of (alpha, P, upper, lower, valid, reason)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "P", "upper", "lower", "valid", "reason"])
    for row in rows:
        alpha, P, up, lo, valid, reason = row
        w.writerow([repr(float(alpha)), repr(float(P)), repr(float(up)), repr(float(lo)),
                    "true" if valid else "false", reason])
    return buf.getvalue()


def certificate_csv(certs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "pf2_lower", "w_upper", "meff_lower", "lambda_star", "mu_star"])
    for c in certs:
        w.writerow([repr(float(x)) for x in (c.alpha, c.pf2_lower, c.w_upper, c.meff_lower,
                                              c.lambda_star, c.mu_star)])
    return buf.getvalue()
