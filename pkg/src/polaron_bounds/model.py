"""Polaron model definitions, derived constants and position-space kernels.

A model is fixed by the dimension d, the particle mass m, the coupling
alpha, a radial form factor v(|k|) and a radial dispersion eps(|k|).
Every derived scalar is a weighted moment

    S_{d-1} * int_0^inf r^{p+d-1} |v(r)|^2 eps(r)^{-q} dr

evaluated by adaptive panel Gauss-Legendre quadrature.

Fourier convention: the position-space kernels g and R carry no (2 pi)
factors, g(x) = int |v|^2/eps e^{ik.x} dk, so that g(0) = ||h||^2 with
||h||^2 = int |v|^2/eps dk by Plancherel.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize_scalar

from .errors import DivergentIntegrand, NonConvergent, OscillatoryFailure, ValidationError
from .quadrature import adaptive_gauss, fixed_gauss, gauss_legendre, radial_kernel, sphere_area

_KIND_ALIASES = {
    "gaussian": "gaussian",
    "closed-form-gaussian": "gaussian",
    "power": "power",
    "closed-form-power-with-cutoff": "power",
    "tabulated": "tabulated",
}


@dataclass(frozen=True)
class RadialProfile:
    """A function of |k| used for the form factor or the dispersion.

    kinds
    -----
    gaussian : params = [amplitude, width]
        amplitude * exp(-r^2 / (2 width^2)).
    power : params = [scale, a, b, power, cutoff]
        scale * (a + b r^2)^(power/2) * exp(-(r/cutoff)^2); trailing
        entries default to a=1, b=1, power=1, cutoff=0 (no cutoff).
        A constant is [c, 1, 0]; sqrt(1+k^2) is [1, 1, 1, 1].
    tabulated : table = ((r, value), ...)
        Monotone cubic (PCHIP) interpolation; evaluation beyond 1.5 times
        the last knot is rejected.
    """

    kind: str
    params: tuple = ()
    decay_scale: float = 1.0
    table: tuple | None = None

    def __post_init__(self):
        kind = _KIND_ALIASES.get(self.kind)
        if kind is None:
            raise ValidationError(f"unknown profile kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if not self.decay_scale > 0:
            raise ValidationError("decay_scale must be > 0")
        if kind == "gaussian":
            if len(self.params) not in (1, 2):
                raise ValidationError("gaussian profile needs params [amplitude, width]")
            if len(self.params) == 2 and not self.params[1] > 0:
                raise ValidationError("gaussian width must be > 0")
        elif kind == "power":
            if not 1 <= len(self.params) <= 5:
                raise ValidationError("power profile needs params [scale, a, b, power, cutoff]")
        else:
            if not self.table or len(self.table) < 2:
                raise ValidationError("tabulated profile needs at least two (r, value) knots")
            tab = tuple((float(r), float(y)) for r, y in self.table)
            rs = [r for r, _ in tab]
            if any(b <= a for a, b in zip(rs, rs[1:])) or rs[0] < 0:
                raise ValidationError("table radii must be nonnegative and strictly increasing")
            object.__setattr__(self, "table", tab)
            arr = np.array(tab)
            object.__setattr__(self, "_interp", PchipInterpolator(arr[:, 0], arr[:, 1], extrapolate=True))

    # -- constructors -----------------------------------------------------
    @classmethod
    def gaussian(cls, amplitude=1.0, width=1.0, decay_scale=None):
        return cls("gaussian", (amplitude, width), decay_scale or width)

    @classmethod
    def constant(cls, value=1.0, decay_scale=1.0):
        return cls("power", (value, 1.0, 0.0), decay_scale)

    @classmethod
    def power(cls, scale, a=1.0, b=1.0, power=1.0, cutoff=0.0, decay_scale=1.0):
        return cls("power", (scale, a, b, power, cutoff), decay_scale)

    @classmethod
    def tabulated(cls, table, decay_scale=None):
        table = tuple(tuple(row) for row in table)
        return cls("tabulated", (), decay_scale or float(table[-1][0]) / 12.0, table)

    @classmethod
    def from_dict(cls, data: dict) -> "RadialProfile":
        return cls(kind=data["kind"], params=tuple(data.get("params", ())),
                   decay_scale=float(data.get("decay_scale", 1.0)),
                   table=tuple(tuple(row) for row in data["table"]) if data.get("table") else None)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "params": list(self.params), "decay_scale": self.decay_scale}
        if self.table is not None:
            out["table"] = [list(row) for row in self.table]
        return out

    @property
    def max_radius(self) -> float:
        if self.kind == "tabulated":
            return 1.5 * self.table[-1][0]
        return math.inf

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "gaussian":
            amp = self.params[0]
            width = self.params[1] if len(self.params) > 1 else 1.0
            return amp * np.exp(-0.5 * (r / width) ** 2)
        if self.kind == "power":
            p = list(self.params) + [1.0, 1.0, 1.0, 0.0][len(self.params) - 1:]
            scale, a, b, power, cutoff = p[:5]
            base = a + b * r * r
            with np.errstate(divide="ignore"):
                out = scale * (base ** (0.5 * power) if power != 0 else np.ones_like(r))
            if cutoff > 0:
                out = out * np.exp(-((r / cutoff) ** 2))
            return out
        if np.any(r > self.max_radius):
            raise ValidationError(
                f"tabulated profile evaluated at r={float(np.max(r)):g} beyond 1.5x last knot")
        return self._interp(r)


@dataclass(frozen=True)
class PolaronModel:
    d: int
    m: float
    alpha: float
    v: RadialProfile
    eps: RadialProfile

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValidationError(f"d must be 1, 2 or 3, got {self.d}")
        if not self.m > 0:
            raise ValidationError("particle mass m must be > 0")
        if not self.alpha > 0:
            raise ValidationError("coupling alpha must be > 0")
        grid = _sample_grid(self.v, 256)
        if not np.any(np.abs(self.v(grid)) > 0):
            raise ValidationError("form factor vanishes identically; every asymptotic formula degenerates")
        egrid = _sample_grid(self.eps, 256)
        if np.any(~(self.eps(egrid) > 0)):
            raise ValidationError("dispersion must be strictly positive on the sample grid")

    def with_alpha(self, alpha: float) -> "PolaronModel":
        return replace(self, alpha=float(alpha))

    def scaled(self, s: float) -> "PolaronModel":
        """Same model with v replaced by s*v (closed-form kinds only)."""
        v = self.v
        if v.kind == "tabulated":
            table = tuple((r, s * y) for r, y in v.table)
            return replace(self, v=replace(v, table=table))
        return replace(self, v=replace(v, params=(s * v.params[0],) + v.params[1:]))

    @classmethod
    def from_dict(cls, data: dict) -> "PolaronModel":
        try:
            return cls(d=int(data["d"]), m=float(data["m"]), alpha=float(data["alpha"]),
                       v=RadialProfile.from_dict(data["v"]), eps=RadialProfile.from_dict(data["eps"]))
        except KeyError as exc:
            raise ValidationError(f"model definition lacks field {exc}") from None

    def to_dict(self) -> dict:
        return {"d": self.d, "m": self.m, "alpha": self.alpha,
                "v": self.v.to_dict(), "eps": self.eps.to_dict()}


def load_model(path) -> PolaronModel:
    with open(path, encoding="utf-8") as fh:
        return PolaronModel.from_dict(json.load(fh))


def _sample_grid(profile: RadialProfile, n: int) -> np.ndarray:
    lo, hi = 1e-6 * profile.decay_scale, 1e3 * profile.decay_scale
    hi = min(hi, profile.max_radius)
    return np.geomspace(lo, hi, n)


@dataclass(frozen=True)
class QuadratureSpec:
    radial_rule: str = "adaptive-panel-gauss"
    radial_points: int = 32
    r_max_multiplier: float = 12.0
    angular_points: int = 32
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14

    def __post_init__(self):
        if self.radial_rule not in ("adaptive-panel-gauss", "fixed-gauss-legendre"):
            raise ValidationError(f"unknown radial rule {self.radial_rule!r}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValidationError("quadrature tolerances must be > 0")
        if self.radial_points < 8:
            raise ValidationError("radial_points must be >= 8")


class Integral(NamedTuple):
    value: float
    error: float


def cutoff_radius(model: PolaronModel, quad: QuadratureSpec) -> float:
    r = quad.r_max_multiplier * model.v.decay_scale
    return min(r, model.v.max_radius, model.eps.max_radius)


def _integrate(f, a, b, quad: QuadratureSpec) -> tuple[float, float]:
    if quad.radial_rule == "fixed-gauss-legendre":
        return fixed_gauss(f, a, b, quad.radial_points)
    return adaptive_gauss(f, a, b, n=quad.radial_points, rel_tol=quad.rel_tol, abs_tol=quad.abs_tol)


def _shell(f, a, b, n=48) -> float:
    x, w = gauss_legendre(a, b, n)
    return float(np.dot(w, f(x)))


def radial_weight(model: PolaronModel, power: float, eps_power: float):
    """Vectorized r -> S_{d-1} r^{power+d-1} |v(r)|^2 eps(r)^{-eps_power}."""
    S = sphere_area(model.d)
    k = power + model.d - 1

    def f(r):
        r = np.asarray(r, dtype=float)
        v = model.v(r)
        out = S * np.abs(v) ** 2
        if k:
            out = out * r ** k
        if eps_power:
            out = out * model.eps(r) ** (-eps_power)
        return out

    return f


def radial_integral(model: PolaronModel, power: int, eps_power: int,
                    quad: QuadratureSpec | None = None) -> Integral:
    """int_{R^d} |k|^power |v(k)|^2 eps(k)^(-eps_power) dk with an error estimate.

    The integral is taken to the cutoff ``r_max_multiplier * decay_scale``;
    shells beyond it are summed while they shrink geometrically and the
    extrapolated remainder is added to the error. Shells near the origin
    are inspected for a non-integrable singularity.

    Raises
    ------
    DivergentIntegrand
        When shell contributions fail to shrink towards 0 or infinity.
    NonConvergent
        When the adaptive rule or the tail sum cannot reach the tolerance.
    """
    if power < 0:
        raise ValidationError("power must be >= 0")
    quad = quad or QuadratureSpec()
    f = radial_weight(model, power, eps_power)
    ds = model.v.decay_scale
    R = cutoff_radius(model, quad)

    # infrared: shells [ds 2^{-j-1}, ds 2^{-j}], j = 20..23
    ir = [_shell(f, ds * 2.0 ** (-j - 1), ds * 2.0 ** (-j)) for j in range(20, 24)]
    if ir[0] > 0 and all(b >= 0.95 * a for a, b in zip(ir, ir[1:])):
        raise DivergentIntegrand(
            f"integrand r^{power}|v|^2/eps^{eps_power} is not integrable at k -> 0",
            shells=ir)

    value, err = _integrate(f, 0.0, R, quad)

    # ultraviolet tail
    tail_limit = min(model.v.max_radius, model.eps.max_radius)
    shells = []
    lo = R
    while 2 * lo <= tail_limit and len(shells) < 60:
        shells.append(_shell(f, lo, 2 * lo))
        lo *= 2
        target = max(quad.abs_tol, quad.rel_tol * abs(value))
        if len(shells) >= 4:
            last = shells[-4:]
            if last[0] > target and all(b >= 0.95 * a for a, b in zip(last, last[1:])):
                raise DivergentIntegrand(
                    f"integrand r^{power}|v|^2/eps^{eps_power} is not integrable at k -> infinity",
                    shells=shells)
        if shells[-1] <= 1e-3 * target:
            break
    if shells:
        if shells[0] <= 1e-3 * max(quad.abs_tol, quad.rel_tol * abs(value)):
            err += sum(shells)
        else:
            value += math.fsum(shells)
            q = shells[-1] / shells[-2] if len(shells) > 1 and shells[-2] > 0 else 0.0
            remainder = shells[-1] * q / (1.0 - q) if q < 1 else math.inf
            if not math.isfinite(remainder) or remainder > 1e3 * max(quad.abs_tol, quad.rel_tol * abs(value)):
                raise NonConvergent(
                    f"tail of r^{power}|v|^2/eps^{eps_power} not resolved (remainder {remainder:.3e})",
                    value=value, error=err + remainder)
            err += remainder
    return Integral(value, err)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelConstants:
    """Quadrature-derived scalars of a model at coupling `alpha`.

    ``h_sq``, ``grad_h_sq``, ``lap_h_sq`` are ||h||^2, ||grad h||^2,
    ||Laplace h||^2 (weights 1, k^2, k^4 against |v|^2/eps); ``grad_eta_sq``
    is int k^2 |v|^2. ``ratio_E`` is grad_eta_sq / grad_h_sq.
    """

    d: int
    m: float
    alpha: float
    h_sq: float
    grad_h_sq: float
    lap_h_sq: float
    grad_eta_sq: float
    quartic_over_eps: float
    omega: float
    m_pek: float
    lambda_c: float
    theta_c: float
    mu_c: float
    alpha_m: float
    gap: float
    crit_velocity: float
    err_estimates: dict = field(default_factory=dict)

    @property
    def ratio_E(self) -> float:
        return self.grad_eta_sq / self.grad_h_sq

    @property
    def thm1_constant(self) -> float:
        """Alpha-independent width of the ground-state energy sandwich."""
        return 0.5 * self.d * self.ratio_E + self.d / (8.0 * self.m) * self.lap_h_sq / self.grad_h_sq

    def omega_at(self, alpha: float) -> float:
        return math.sqrt(2.0 * alpha / (self.d * self.m) * self.grad_h_sq)

    def rows(self):
        names = ["h_sq", "grad_h_sq", "lap_h_sq", "grad_eta_sq", "quartic_over_eps", "omega",
                 "m_pek", "lambda_c", "theta_c", "mu_c", "alpha_m", "gap", "crit_velocity"]
        for name in names:
            yield name, getattr(self, name), self.err_estimates.get(name, 0.0)


def compute_constants(model: PolaronModel, quad: QuadratureSpec | None = None) -> ModelConstants:
    quad = quad or QuadratureSpec()
    d, m, alpha = model.d, model.m, model.alpha
    I = {key: radial_integral(model, p, q, quad)
         for key, (p, q) in {
             "h_sq": (0, 1), "grad_h_sq": (2, 1), "lap_h_sq": (4, 1), "grad_eta_sq": (2, 0),
             "k2_eps3": (2, 3), "k2_eps2": (2, 2), "k4_eps2": (4, 2), "k4_eps4": (4, 4)}.items()}
    h_sq, grad_h_sq, lap_h_sq, grad_eta_sq = (I[k].value for k in ("h_sq", "grad_h_sq", "lap_h_sq", "grad_eta_sq"))
    G, L, Eg = grad_h_sq, lap_h_sq, grad_eta_sq
    omega = math.sqrt(2.0 * alpha / (d * m) * G)
    m_pek = 2.0 / d * I["k2_eps3"].value
    lambda_c = I["k2_eps2"].value / (2.0 * d)
    theta_c = I["k4_eps2"].value / (24.0 * d)
    mu_c = I["k4_eps4"].value / (2.0 * d * m_pek ** 2)
    alpha_m = d / (8.0 * m) * ((4.0 * m * Eg + L) / G ** 1.5) ** 2
    gap, _ = dispersion_gap(model)
    c, _ = critical_velocity(model)

    rel = lambda key: I[key].error / abs(I[key].value) if I[key].value else 0.0  # noqa: E731
    err = {
        "h_sq": I["h_sq"].error, "grad_h_sq": I["grad_h_sq"].error, "lap_h_sq": I["lap_h_sq"].error,
        "grad_eta_sq": I["grad_eta_sq"].error, "quartic_over_eps": I["lap_h_sq"].error,
        "omega": 0.5 * omega * rel("grad_h_sq"),
        "m_pek": 2.0 / d * I["k2_eps3"].error,
        "lambda_c": I["k2_eps2"].error / (2.0 * d),
        "theta_c": I["k4_eps2"].error / (24.0 * d),
        "mu_c": mu_c * (rel("k4_eps4") + 2 * rel("k2_eps3")),
        "alpha_m": alpha_m * (2 * (4 * m * I["grad_eta_sq"].error + I["lap_h_sq"].error) / (4 * m * Eg + L)
                              + 3 * rel("grad_h_sq")),
        "gap": 0.0, "crit_velocity": 0.0,
    }
    return ModelConstants(d=d, m=m, alpha=alpha, h_sq=h_sq, grad_h_sq=G, lap_h_sq=L, grad_eta_sq=Eg,
                          quartic_over_eps=L, omega=omega, m_pek=m_pek, lambda_c=lambda_c,
                          theta_c=theta_c, mu_c=mu_c, alpha_m=alpha_m, gap=gap, crit_velocity=c,
                          err_estimates=err)


# ---------------------------------------------------------------------------
# sampled infima

def _infimum_grid(profile: RadialProfile, n: int = 4096) -> np.ndarray:
    return _sample_grid(profile, n)


def _refine_min(fun, grid, i):
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(fun, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * hi})
    return min(float(res.fun), float(fun(grid[i])))


def dispersion_gap(model: PolaronModel):
    """Sampled inf eps over a 4096-point geometric grid plus local refinement."""
    grid = _infimum_grid(model.eps)
    vals = model.eps(grid)
    i = int(np.argmin(vals))
    fun = lambda r: float(model.eps(r))  # noqa: E731
    value = min(_refine_min(fun, grid, i), float(model.eps(0.0)))
    meta = {"grid": "geometric", "points": len(grid), "lo": grid[0], "hi": grid[-1],
            "argmin": float(grid[i])}
    return value, meta


def critical_velocity(model: PolaronModel):
    """Sampled inf eps(r)/r; 0 when eps(r)/r still falls at the end of the grid.

    If the grid minimum sits on the last node but the ratio has flattened,
    the limit is estimated conservatively as ``min(q(R), 2 q(2R) - q(R))``.
    """
    grid = _infimum_grid(model.eps)
    q = lambda r: model.eps(r) / r  # noqa: E731
    vals = q(grid)
    i = int(np.argmin(vals))
    meta = {"grid": "geometric", "points": len(grid), "lo": grid[0], "hi": grid[-1],
            "argmin": float(grid[i]), "at_boundary": i == len(grid) - 1}
    if i < len(grid) - 1:
        return _refine_min(lambda r: float(q(r)), grid, i), meta
    R = grid[-1]
    if 2 * R > model.eps.max_radius:
        meta["trend"] = "unresolved (profile range)"
        return float(vals[-1]), meta
    qR, q2R = float(q(R)), float(q(2 * R))
    meta["trend_ratio"] = q2R / qR
    if q2R < (1.0 - 1e-3) * qR:
        meta["trend"] = "eps(r)/r -> 0"
        return 0.0, meta
    meta["trend"] = "flattened"
    return max(0.0, min(qR, 2.0 * q2R - qR)), meta


def subadditivity_sample(model: PolaronModel, n: int = 48):
    """Check eps(|k1+k2|) <= eps(|k1|) + eps(|k2|) on a grid of radii and angles."""
    radii = np.geomspace(1e-3 * model.eps.decay_scale,
                         min(1e2 * model.eps.decay_scale, model.eps.max_radius / 2.1), n)
    cosines = np.array([-1.0, 1.0]) if model.d == 1 else np.linspace(-1.0, 1.0, 9)
    r1, r2, c = np.meshgrid(radii, radii, cosines, indexing="ij")
    k = np.sqrt(np.maximum(r1 ** 2 + r2 ** 2 + 2 * r1 * r2 * c, 0.0))
    lhs = model.eps(k)
    rhs = model.eps(r1) + model.eps(r2)
    excess = lhs - rhs
    scale = np.maximum(np.abs(rhs), 1e-300)
    bad = excess > 1e-12 * scale
    worst = float(np.max(excess / scale))
    return {"verdict": "sampled-subadditive" if not np.any(bad) else "sampled-violation",
            "pairs_checked": int(lhs.size), "violations": int(np.sum(bad)),
            "worst_relative_excess": worst, "status": "sampled"}


REGULARITY_INTEGRALS = {
    "h_sq": (0, 1),
    "grad_h_sq": (2, 1),
    "lap_h_sq": (4, 1),
    "grad_eta_sq": (2, 0),
    "quartic_over_eps": (4, 1),
    "eta_sq": (0, 0),
}


@dataclass
class RegularityReport:
    regular: bool
    integrals: dict
    massive: bool
    gap: float
    superfluid: bool
    crit_velocity: float
    subadditivity: dict
    failures: list
    grid_meta: dict

    def summary(self) -> str:
        lines = [f"regular: {self.regular}"]
        for name, item in self.integrals.items():
            state = "finite" if item["finite"] else item["detail"]
            lines.append(f"  {name}: {state}")
        lines.append(f"massive: {self.massive} (gap {self.gap:.6g})")
        lines.append(f"superfluid: {self.superfluid} (c {self.crit_velocity:.6g})")
        lines.append(f"subadditivity: {self.subadditivity['verdict']} (sampled)")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"regular": self.regular, "integrals": self.integrals, "massive": self.massive,
                "gap": self.gap, "superfluid": self.superfluid, "crit_velocity": self.crit_velocity,
                "subadditivity": self.subadditivity, "failures": self.failures,
                "grid_meta": self.grid_meta}


_PRETTY = {"h_sq": "‖h‖²", "grad_h_sq": "‖∇h‖²", "lap_h_sq": "‖Δh‖²", "grad_eta_sq": "‖∇η‖²",
           "quartic_over_eps": "∫k⁴|v|²/ε", "eta_sq": "‖η‖²"}


def validate_regularity(model: PolaronModel, quad: QuadratureSpec | None = None) -> RegularityReport:
    """Finiteness, massive, superfluid and (sampled) subadditivity verdicts."""
    quad = quad or QuadratureSpec()
    integrals, failures = {}, []
    for name, (p, q) in REGULARITY_INTEGRALS.items():
        try:
            val = radial_integral(model, p, q, quad)
            integrals[name] = {"finite": True, "value": val.value, "error": val.error, "detail": ""}
        except DivergentIntegrand as exc:
            integrals[name] = {"finite": False, "value": math.inf, "error": math.inf, "detail": "divergent"}
            failures.append(f"{_PRETTY[name]} divergent: {exc}")
        except NonConvergent as exc:
            integrals[name] = {"finite": False, "value": math.nan, "error": math.inf,
                               "detail": "non-convergent"}
            failures.append(f"{_PRETTY[name]} non-convergent: {exc}")
    gap, gap_meta = dispersion_gap(model)
    c, c_meta = critical_velocity(model)
    sub = subadditivity_sample(model)
    regular = all(item["finite"] for item in integrals.values())
    return RegularityReport(regular=regular, integrals=integrals, massive=gap > 0, gap=gap,
                            superfluid=c > 0, crit_velocity=c, subadditivity=sub,
                            failures=failures, grid_meta={"gap": gap_meta, "crit_velocity": c_meta})


# ---------------------------------------------------------------------------
# position-space kernels

def _kernel(model, weight_power, eps_power, r, quad):
    quad = quad or QuadratureSpec()
    d = model.d
    R = cutoff_radius(model, quad)
    base = radial_weight(model, weight_power, eps_power)
    S = sphere_area(d)
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(r_arr)
    for i, ri in enumerate(r_arr):
        if ri == 0.0:
            f = base
        else:
            f = lambda k, ri=ri: base(k) * radial_kernel(d, k * ri) / S  # noqa: E731
        try:
            out[i], _ = adaptive_gauss(f, 0.0, R, n=quad.radial_points, rel_tol=quad.rel_tol,
                                       abs_tol=quad.abs_tol * max(1.0, R * ri))
        except NonConvergent as exc:
            raise OscillatoryFailure(f"oscillatory kernel at r={ri:g} failed: {exc}") from exc
    return out if np.ndim(r) else float(out[0])


def kernel_g(model: PolaronModel, r, quad: QuadratureSpec | None = None):
    """g(r) = int |v|^2/eps e^{ik.x} dk at |x| = r; g(0) = ||h||^2."""
    return _kernel(model, 0, 1, r, quad)


def kernel_R(model: PolaronModel, r, quad: QuadratureSpec | None = None):
    """R(r) = int p^2 |v|^2/eps^3 e^{ip.x} dp; R(0) = (d/2) M^Pek."""
    return _kernel(model, 2, 3, r, quad)


def constants_csv(consts: ModelConstants) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["name", "value", "err_estimate"])
    for name, value, err in consts.rows():
        writer.writerow([name, repr(float(value)), repr(float(err))])
    return buf.getvalue()


def write_constants_csv(consts: ModelConstants, path) -> Path:
    path = Path(path)
    path.write_text(constants_csv(consts), encoding="utf-8")
    return path
