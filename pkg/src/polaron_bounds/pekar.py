"""Pekar functional minimization and semiclassical effective mass.

The functional for a radial, normalized psi is

    E(psi) = (1/2m) int |grad psi|^2 dx - alpha int f(k) |rho(k)|^2 dk,

with f = |v|^2/eps and rho(k) = int |psi|^2 e^{ik.x} dx. It is minimized by
a self-consistent field iteration: the mean-field potential
V = -2 alpha (g * |psi|^2) is built in momentum space, the lowest radial
eigenpair of -Laplace/2m + V is found on a cell-centered finite-volume
grid, and the new orbital is mixed into the old one.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from .errors import EnergyIncrease, GridTooCoarse, NoConvergence, NoRoot, ValidationError
from .model import ModelConstants, PolaronModel, QuadratureSpec, compute_constants, cutoff_radius, kernel_R
from .quadrature import angular_rule, composite_gauss, radial_kernel, sphere_area


@dataclass(frozen=True)
class RadialGrid:
    """Cell-centered uniform radii r_i = (i - 1/2) dr with volume weights."""

    d: int
    r_max: float
    n: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @classmethod
    def uniform(cls, d: int, r_max: float, n: int) -> "RadialGrid":
        if n < 8 or not r_max > 0:
            raise ValidationError("radial grid needs n >= 8 and r_max > 0")
        dr = r_max / n
        r = (np.arange(n) + 0.5) * dr
        w = sphere_area(d) * r ** (d - 1) * dr
        r.setflags(write=False)
        w.setflags(write=False)
        return cls(d, float(r_max), int(n), r, w)

    @property
    def dr(self) -> float:
        return self.r_max / self.n


@dataclass(frozen=True)
class SolverSpec:
    beta: float = 0.5
    tol: float = 1e-7
    energy_tol: float = 1e-9
    max_iter: int = 500
    min_beta: float = 1.0 / 1024
    nodes_per_width: float = 20.0
    boundary_mass_tol: float = 1e-12
    max_expansions: int = 5


def length_scale(consts: ModelConstants, alpha: float) -> float:
    """Harmonic length (m omega)^(-1/2) at coupling alpha."""
    return 1.0 / math.sqrt(consts.m * consts.omega_at(alpha))


def default_grid(model: PolaronModel, consts: ModelConstants | None = None, n: int = 2048,
                 widths: float = 12.0) -> RadialGrid:
    consts = consts or compute_constants(model)
    return RadialGrid.uniform(model.d, widths * length_scale(consts, model.alpha), n)


@dataclass
class PekarSolution:
    alpha: float
    grid: RadialGrid
    psi: np.ndarray
    energy: float
    kinetic: float
    potential: float
    k_nodes: np.ndarray
    k_weights: np.ndarray
    rho: np.ndarray
    field: np.ndarray
    m_pek_alpha: float
    iterations: int
    residual: float
    history: list = field(default_factory=list)
    boundary_mass: float = 0.0

    def summary(self) -> dict:
        return {"alpha": self.alpha, "energy": self.energy, "kinetic": self.kinetic,
                "potential": self.potential, "m_pek_alpha": self.m_pek_alpha,
                "iterations": self.iterations, "residual": self.residual,
                "r_max": self.grid.r_max, "n": self.grid.n, "boundary_mass": self.boundary_mass}


class _Discretization:
    """Operators shared by all SCF iterations on one grid."""

    def __init__(self, model: PolaronModel, grid: RadialGrid, quad: QuadratureSpec):
        d, S = model.d, sphere_area(model.d)
        self.model, self.grid = model, grid
        dr, r, n = grid.dr, grid.nodes, grid.n
        faces = np.arange(1, n) * dr
        a = S * faces ** (d - 1) / dr
        diag = np.zeros(n)
        diag[:-1] += a
        diag[1:] += a
        diag[-1] += S * grid.r_max ** (d - 1) * 2.0 / dr   # Dirichlet ghost at r_max
        off = -a
        self.stiff_diag, self.stiff_off = diag, off
        sw = np.sqrt(grid.weights)
        self.sqrt_w = sw
        self.kin_diag = diag / (sw * sw) / (2.0 * model.m)
        self.kin_off = off / (sw[:-1] * sw[1:]) / (2.0 * model.m)

        K = cutoff_radius(model, quad)
        panels = max(32, int(math.ceil(K * grid.r_max / math.pi)))
        k, wk = composite_gauss(np.linspace(0.0, K, panels + 1), 16)
        self.k = k
        self.wk = S * wk * k ** (d - 1)            # volume weights in R^d
        self.f = np.abs(model.v(k)) ** 2 / model.eps(k)
        # rho(k) = sum_i weights_i n_i kern(k r_i) / S
        self.kern = radial_kernel(d, np.outer(k, r)) / S

    def kinetic(self, psi):
        t = self.stiff_diag @ (psi * psi) + 2.0 * self.stiff_off @ (psi[:-1] * psi[1:])
        return t / (2.0 * self.model.m)

    def rho(self, psi):
        return self.kern @ (self.grid.weights * psi * psi)

    def potential_energy(self, rho, alpha):
        return -alpha * float(np.dot(self.wk * self.f, rho * rho))

    def mean_field(self, rho, alpha):
        return -2.0 * alpha * (self.kern.T @ (self.wk * self.f * rho))

    def energy(self, psi, alpha):
        rho = self.rho(psi)
        t = self.kinetic(psi)
        u = self.potential_energy(rho, alpha)
        return t + u, t, u, rho

    def ground_orbital(self, V):
        _, vec = eigh_tridiagonal(self.kin_diag + V, self.kin_off, select="i", select_range=(0, 0))
        psi = vec[:, 0] / self.sqrt_w
        if psi[np.argmax(np.abs(psi))] < 0:
            psi = -psi
        return psi

    def normalize(self, psi):
        return psi / math.sqrt(float(np.dot(self.grid.weights, psi * psi)))


def _boundary_mass(grid: RadialGrid, psi) -> float:
    tail = grid.nodes > 0.8 * grid.r_max
    return float(np.dot(grid.weights[tail], psi[tail] ** 2))


def _scf(disc: _Discretization, alpha: float, psi, solver: SolverSpec):
    psi = disc.normalize(psi)
    E, T, U, rho = disc.energy(psi, alpha)
    history = [E]
    beta = solver.beta
    residual = math.inf
    for it in range(1, solver.max_iter + 1):
        new = disc.ground_orbital(disc.mean_field(rho, alpha))
        diff = new - psi
        residual = math.sqrt(float(np.dot(disc.grid.weights, diff * diff)))
        b = beta
        while True:
            trial = disc.normalize((1.0 - b) * psi + b * new)
            E_t, T_t, U_t, rho_t = disc.energy(trial, alpha)
            # increases at the round-off level of the energy sum are not failures
            if E_t <= E + 1e-10 * (abs(T) + abs(U)):
                break
            b *= 0.5
            if b < solver.min_beta:
                if residual <= solver.tol:
                    return psi, E, T, U, rho, it, residual, history
                raise EnergyIncrease(f"SCF mixing raised the energy even at beta={b:g}",
                                     iteration=it, energy=E, residual=residual)
        dE = abs(E_t - E)
        psi, E, T, U, rho = trial, E_t, T_t, U_t, rho_t
        history.append(E)
        if dE <= solver.energy_tol * abs(E) and residual <= solver.tol:
            return psi, E, T, U, rho, it, residual, history
    raise NoConvergence(f"SCF did not converge in {solver.max_iter} iterations",
                        energy=E, residual=residual, psi=psi)


def minimize_pekar(model: PolaronModel, grid: RadialGrid | None = None, solver: SolverSpec | None = None,
                   quad: QuadratureSpec | None = None, consts: ModelConstants | None = None,
                   initial=None) -> PekarSolution:
    """Self-consistent-field minimization of the Pekar functional.

    The grid is doubled outward (keeping its spacing) while more than
    ``solver.boundary_mass_tol`` of the density sits in its outer fifth.
    `initial` may be a callable r -> psi(r) used as the starting orbital;
    the default is the Gaussian exp(-m omega r^2 / 2).

    Raises
    ------
    GridTooCoarse
        The spacing resolves the harmonic length with fewer than
        ``solver.nodes_per_width`` nodes.
    NoConvergence
        Iteration cap reached, or density still escaping after the allowed
        grid expansions (boundary-mass diagnostic attached).
    EnergyIncrease
        Backtracked mixing could not decrease the energy.
    """
    quad = quad or QuadratureSpec()
    solver = solver or SolverSpec()
    consts = consts or compute_constants(model, quad)
    alpha = model.alpha
    grid = grid or default_grid(model, consts)
    ell = length_scale(consts, alpha)
    if ell / grid.dr < solver.nodes_per_width:
        raise GridTooCoarse(f"grid spacing {grid.dr:.3g} gives {ell / grid.dr:.1f} nodes per "
                            f"harmonic length {ell:.3g}; need {solver.nodes_per_width:g}")
    if initial is None:
        initial = lambda r: np.exp(-0.5 * r * r / (ell * ell))  # noqa: E731
    psi0 = np.asarray(initial(grid.nodes), dtype=float)
    total_iter = 0
    for _ in range(solver.max_expansions + 1):
        disc = _Discretization(model, grid, quad)
        psi, E, T, U, rho, its, res, hist = _scf(disc, alpha, psi0, solver)
        total_iter += its
        bm = _boundary_mass(grid, psi)
        if bm <= solver.boundary_mass_tol:
            break
        wider = RadialGrid.uniform(model.d, 2.0 * grid.r_max, 2 * grid.n)
        psi0 = np.interp(wider.nodes, grid.nodes, psi, right=0.0)
        grid = wider
    else:
        raise NoConvergence(f"density keeps reaching the grid boundary (mass {bm:.3e} in the outer "
                            f"fifth at r_max={grid.r_max:g}); a minimizer may not exist",
                            boundary_mass=bm, r_max=grid.r_max)
    field_ = -math.sqrt(alpha) * rho * model.v(disc.k) / model.eps(disc.k)
    sol = PekarSolution(alpha=alpha, grid=grid, psi=psi, energy=E, kinetic=T, potential=U,
                        k_nodes=disc.k, k_weights=disc.wk, rho=rho, field=field_, m_pek_alpha=0.0,
                        iterations=total_iter, residual=res, history=hist, boundary_mass=bm)
    sol.m_pek_alpha = pekar_mass(sol, model)
    return sol


def rho_at(sol: PekarSolution, k) -> np.ndarray:
    """rho(k) at arbitrary momenta by direct radial transform of |psi|^2."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    S = sphere_area(sol.grid.d)
    dens = sol.grid.weights * sol.psi ** 2
    return radial_kernel(sol.grid.d, np.outer(k, sol.grid.nodes)) @ dens / S


def pekar_mass(sol: PekarSolution, model: PolaronModel, quad: QuadratureSpec | None = None,
               rho=None) -> float:
    """M^Pek_alpha = (2 alpha/d) int p^2 |v|^2 |rho|^2 / eps^3 dp.

    Passing ``rho=1`` gives alpha * M^Pek on the same momentum rule.
    """
    k = sol.k_nodes
    r = sol.rho if rho is None else np.broadcast_to(np.asarray(rho, dtype=float), k.shape)
    integrand = k * k * np.abs(model.v(k)) ** 2 * r * r / model.eps(k) ** 3
    return 2.0 * sol.alpha / model.d * float(np.dot(sol.k_weights, integrand))


def pekar_mass_position(sol: PekarSolution, model: PolaronModel, quad: QuadratureSpec | None = None,
                        n_table: int = 1024, cutoff: float = 1e-30) -> float:
    """(2 alpha/d) double integral of |psi|^2 R(x-y) |psi|^2 in position space.

    R is tabulated with :func:`kernel_R` and spline-interpolated; the angle
    between x and y is integrated with the angular rule of `quad`.
    """
    quad = quad or QuadratureSpec()
    d = model.d
    dens = sol.psi ** 2
    keep = dens > cutoff * dens.max()
    r = sol.grid.nodes[keep]
    n = (sol.grid.weights * dens)[keep]
    t = np.linspace(0.0, 2.0 * r.max(), n_table)
    spline = CubicSpline(t, kernel_R(model, t, quad))
    cos, wc = angular_rule(d, quad.angular_points)
    S = sphere_area(d)
    total = 0.0
    for i0 in range(0, len(r), 128):
        ri = r[i0:i0 + 128, None, None]
        dist = np.sqrt(np.maximum(ri ** 2 + r[None, :, None] ** 2 - 2 * ri * r[None, :, None] * cos, 0.0))
        omega = spline(dist) @ wc / S
        total += float(n[i0:i0 + 128] @ omega @ n)
    return 2.0 * sol.alpha / d * total


def dilation_derivative(sol: PekarSolution, model: PolaronModel, h: float = 1e-4) -> float:
    """d/dlam E(lam^{d/2} psi(lam x)) at lam = 1 by central differences."""

    def energy(lam):
        rho = rho_at(sol, sol.k_nodes / lam)
        f = np.abs(model.v(sol.k_nodes)) ** 2 / model.eps(sol.k_nodes)
        return lam * lam * sol.kinetic - sol.alpha * float(np.dot(sol.k_weights * f, rho * rho))

    return (energy(1.0 + h) - energy(1.0 - h)) / (2.0 * h)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SemiclassicalState:
    P: float
    u: float
    energy: float
    linearized_u: float
    residual: float = 0.0


def _velocity_parts(sol: PekarSolution, model: PolaronModel, quad: QuadratureSpec):
    k = sol.k_nodes
    cos, wc = angular_rule(model.d, quad.angular_points)
    S = sphere_area(model.d)
    f2 = np.abs(model.v(k)) ** 2 * sol.rho ** 2
    eps = model.eps(k)
    # k_weights already carry S; angular weights are normalized to average
    w = (sol.k_weights * f2)[:, None] * (wc / S)[None, :]
    kc = k[:, None] * cos[None, :]
    return w, kc, eps[:, None]


def _rhs(u, parts, model, alpha):
    w, kc, eps = parts
    return model.m * u + alpha * float(np.sum(w * kc / (eps - u * kc) ** 2))


def solve_velocity(model: PolaronModel, sol: PekarSolution, P: float,
                   quad: QuadratureSpec | None = None, consts: ModelConstants | None = None,
                   parts=None) -> SemiclassicalState:
    """Solve P = m u + alpha int p_1 |v|^2 |rho|^2 / (eps - u p_1)^2 dp for u along P."""
    quad = quad or QuadratureSpec()
    consts = consts or compute_constants(model, quad)
    c = consts.crit_velocity
    parts = parts or _velocity_parts(sol, model, quad)
    lin = P / (model.m + sol.m_pek_alpha)
    if P == 0:
        return SemiclassicalState(0.0, 0.0, float(sol.energy), 0.0, 0.0)
    Pa = abs(P)
    if c <= 0:
        raise NoRoot("velocity equation needs a superfluid dispersion (c > 0)", P=P)
    hi = 0.99 * c
    top = _rhs(hi, parts, model, sol.alpha)
    if top < Pa:
        raise NoRoot(f"RHS(u) stays below |P| on [0, 0.99c): max {top:.6g} < {Pa:.6g}",
                     P=P, P_range=(0.0, top))
    lo = 0.0
    tol = 1e-8 * Pa
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = _rhs(mid, parts, model, sol.alpha) - Pa
        if abs(val) <= tol:
            break
        if val < 0:
            lo = mid
        else:
            hi = mid
    u = math.copysign(mid, P)
    energy = semiclassical_energy_at(sol, model, P, u, parts)
    return SemiclassicalState(float(P), float(u), float(energy), float(lin), float(abs(val)))


def semiclassical_energy_at(sol, model, P, u, parts) -> float:
    w, kc, eps = parts
    a = abs(u)
    uk = a * kc
    extra = sol.alpha * float(np.sum(w * uk * uk / (eps * (eps - uk) ** 2)))
    mismatch = abs(P) - _rhs(a, parts, model, sol.alpha)
    return sol.energy + 0.5 * model.m * a * a + extra + a * mismatch


def semiclassical_energy(model: PolaronModel, sol: PekarSolution, P: float,
                         quad: QuadratureSpec | None = None, consts: ModelConstants | None = None) -> float:
    """Energy of the boosted minimizer with the velocity-shifted coherent field."""
    return solve_velocity(model, sol, P, quad, consts).energy


# ---------------------------------------------------------------------------

def pekar_csv(sol: PekarSolution) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "psi"])
    for r, p in zip(sol.grid.nodes, sol.psi):
        w.writerow([repr(float(r)), repr(float(p))])
    return buf.getvalue()


def write_pekar(sol: PekarSolution, csv_path, json_path=None) -> tuple[Path, Path]:
    csv_path = Path(csv_path)
    json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
    csv_path.write_text(pekar_csv(sol), encoding="utf-8")
    meta = {k: sol.summary()[k] for k in ("energy", "kinetic", "potential", "m_pek_alpha",
                                          "iterations", "residual")}
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path, json_path
