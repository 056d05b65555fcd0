"""Truncated Fock-space diagonalization of the fiber Hamiltonian.

Field modes are a finite set of momenta k_j with quadrature weights w_j; the
discrete couplings are g_j = v(k_j) sqrt(w_j). Basis states are multisets of
mode indices with at most n_max bosons, ordered by boson number and then
lexicographically, so the basis for a smaller n_max is a leading block of
the basis for a larger one.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from math import comb

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import BasisOverflow, NoConvergence, ValidationError
from .model import PolaronModel
from .quadrature import gauss_legendre

DEFAULT_BASIS_CAP = 2_000_000
DENSE_LIMIT = 1500


def lebedev(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Octahedral Lebedev rules with 6, 14 or 26 points; weights sum to 4 pi."""
    axes = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], float)
    corners = np.array([[sx, sy, sz] for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)], float) / math.sqrt(3)
    edges = []
    for i, j in ((0, 1), (0, 2), (1, 2)):
        for si in (1, -1):
            for sj in (1, -1):
                e = np.zeros(3)
                e[i], e[j] = si, sj
                edges.append(e / math.sqrt(2))
    edges = np.array(edges)
    if n == 6:
        pts, w = axes, np.full(6, 1 / 6)
    elif n == 14:
        pts = np.vstack([axes, corners])
        w = np.concatenate([np.full(6, 1 / 15), np.full(8, 3 / 40)])
    elif n == 26:
        pts = np.vstack([axes, edges, corners])
        w = np.concatenate([np.full(6, 1 / 21), np.full(12, 4 / 105), np.full(8, 9 / 280)])
    else:
        raise ValidationError(f"Lebedev order must be 6, 14 or 26, got {n}")
    return pts, 4 * math.pi * w


@dataclass(frozen=True)
class FockTruncation:
    modes: np.ndarray = field(repr=False)      # shape (M, d)
    weights: np.ndarray = field(repr=False)
    n_max: int = 2
    cap: int = DEFAULT_BASIS_CAP

    def __post_init__(self):
        modes = np.atleast_2d(np.asarray(self.modes, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if modes.shape[0] != w.shape[0]:
            raise ValidationError("one weight per mode required")
        if np.any(w <= 0):
            raise ValidationError("mode weights must be positive")
        if not 0 <= self.n_max <= 4:
            raise ValidationError("n_max must lie in 0..4")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "weights", w)

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    @property
    def basis_size(self) -> int:
        return basis_size(self.n_modes, self.n_max)

    def with_n_max(self, n_max: int) -> "FockTruncation":
        return FockTruncation(self.modes, self.weights, n_max, self.cap)

    def subset(self, idx) -> "FockTruncation":
        idx = np.asarray(idx)
        return FockTruncation(self.modes[idx], self.weights[idx], self.n_max, self.cap)

    @classmethod
    def grid_1d(cls, model: PolaronModel, n_modes: int, n_max: int = 2, k_max: float | None = None,
                cap: int = DEFAULT_BASIS_CAP) -> "FockTruncation":
        """Uniform symmetric grid on [-k_max, k_max] with trapezoid weights."""
        k_max = k_max or 6.0 * model.v.decay_scale
        k = np.linspace(-k_max, k_max, n_modes)
        h = k[1] - k[0]
        w = np.full(n_modes, h)
        w[0] = w[-1] = 0.5 * h
        return cls(k[:, None], w, n_max, cap)

    @classmethod
    def grid_3d(cls, model: PolaronModel, n_radial: int, n_angular: int = 6, n_max: int = 2,
                k_max: float | None = None, cap: int = DEFAULT_BASIS_CAP) -> "FockTruncation":
        """Gauss-Legendre radii on [0, k_max] times a Lebedev rule."""
        k_max = k_max or 6.0 * model.v.decay_scale
        r, wr = gauss_legendre(0.0, k_max, n_radial)
        dirs, wa = lebedev(n_angular)
        modes = (r[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
        w = (wr[:, None] * r[:, None] ** 2 * wa[None, :]).ravel()
        return cls(modes, w, n_max, cap)


def basis_size(n_modes: int, n_max: int) -> int:
    return sum(comb(n_modes + n - 1, n) for n in range(n_max + 1))


def enumerate_basis(n_modes: int, n_max: int) -> list[tuple[int, ...]]:
    """Multisets ordered by size, then lexicographically in sorted mode indices."""
    out: list[tuple[int, ...]] = []
    for n in range(n_max + 1):
        out.extend(combinations_with_replacement(range(n_modes), n))
    return out


def _diagonal(model: PolaronModel, trunc: FockTruncation, basis, P: float) -> np.ndarray:
    d = trunc.modes.shape[1]
    Pvec = np.zeros(d)
    Pvec[-1] = P
    eps = model.eps(np.linalg.norm(trunc.modes, axis=1))
    diag = np.empty(len(basis))
    for i, state in enumerate(basis):
        total = trunc.modes[list(state)].sum(axis=0) if state else np.zeros(d)
        diff = Pvec - total
        diag[i] = float(diff @ diff) / (2.0 * model.m) + float(eps[list(state)].sum())
    return diag


def build_fiber_hamiltonian(model: PolaronModel, alpha: float, P: float, trunc: FockTruncation,
                            phase: complex = 1.0):
    """Sparse (P - P_f)^2/2m + F + sqrt(alpha) V on the truncated Fock space.

    The optional global `phase` multiplies every coupling g_j.
    Returns a CSR matrix, real unless the phase is complex.
    """
    size = trunc.basis_size
    if size > trunc.cap:
        raise BasisOverflow(f"basis of {size} states exceeds the cap {trunc.cap}", basis_size=size)
    basis = enumerate_basis(trunc.n_modes, trunc.n_max)
    index = {s: i for i, s in enumerate(basis)}
    k = np.linalg.norm(trunc.modes, axis=1)
    g = phase * model.v(k) * np.sqrt(trunc.weights)
    dtype = complex if np.iscomplexobj(g) else float
    rows, cols, vals = [], [], []
    scale = math.sqrt(alpha)
    for col, state in enumerate(basis):
        if len(state) == trunc.n_max:
            continue
        for j in range(trunc.n_modes):
            new = tuple(sorted(state + (j,)))
            occ = new.count(j)
            rows.append(index[new])
            cols.append(col)
            vals.append(scale * np.conj(g[j]) * math.sqrt(occ))
    C = sp.csr_matrix((np.array(vals, dtype=dtype), (rows, cols)), shape=(size, size))
    D = sp.diags(_diagonal(model, trunc, basis, P).astype(dtype))
    return (D + C + C.conj().T).tocsr()


@dataclass(frozen=True)
class EigSpec:
    tol: float = 1e-8
    max_iter: int = 20000
    ncv: int | None = None


@dataclass
class SpectrumEstimate:
    P: float
    ground_energy: float
    residual: float
    iterations: int
    basis_size: int = 0
    n_max: int = 0
    truncation_trend: list = field(default_factory=list)


def ground_energy(H, solver: EigSpec | None = None, P: float = 0.0) -> SpectrumEstimate:
    """Lowest eigenvalue; dense for small matrices, implicitly restarted Lanczos otherwise."""
    solver = solver or EigSpec()
    n = H.shape[0]
    if n <= DENSE_LIMIT:
        dense = H.toarray() if sp.issparse(H) else np.asarray(H)
        vals, vecs = scipy.linalg.eigh(dense, subset_by_index=[0, 0])
        E, x, its = float(vals[0]), vecs[:, 0], 1
    else:
        count = [0]

        def mv(v):
            count[0] += 1
            return H @ v

        op = LinearOperator(H.shape, matvec=mv, dtype=H.dtype)
        v0 = np.ones(n, dtype=H.dtype) / math.sqrt(n)
        try:
            vals, vecs = eigsh(op, k=1, which="SA", v0=v0, tol=solver.tol * 1e-2,
                               maxiter=solver.max_iter, ncv=solver.ncv)
        except ArpackNoConvergence as exc:
            best = float(exc.eigenvalues[0]) if len(exc.eigenvalues) else math.nan
            raise NoConvergence("Lanczos did not converge", ritz_value=best, matvecs=count[0]) from None
        E, x, its = float(vals[0]), vecs[:, 0], count[0]
    x = x / np.linalg.norm(x)
    residual = float(np.linalg.norm(H @ x - E * x))
    if residual > solver.tol * max(1.0, abs(E)):
        raise NoConvergence(f"eigen-residual {residual:.3e} above tolerance", ritz_value=E, residual=residual)
    return SpectrumEstimate(P=P, ground_energy=E, residual=residual, iterations=its, basis_size=n)


def scan_dispersion(model: PolaronModel, alpha: float, P_grid, trunc: FockTruncation,
                    solver: EigSpec | None = None, trend: bool = True) -> list[SpectrumEstimate]:
    """Ground energies E(P) with the n_max refinement trend for each P.

    The trend re-solves the leading basis blocks (n_max' = 1 .. n_max), which
    are exactly the Hamiltonians with the smaller boson caps.
    """
    out = []
    sizes = [basis_size(trunc.n_modes, n) for n in range(trunc.n_max + 1)]
    for P in P_grid:
        H = build_fiber_hamiltonian(model, alpha, float(P), trunc)
        est = ground_energy(H, solver, float(P))
        est.n_max = trunc.n_max
        if trend:
            for n, size in enumerate(sizes[1:-1], start=1):
                sub = ground_energy(H[:size, :size], solver, float(P))
                est.truncation_trend.append((n, sub.ground_energy))
            est.truncation_trend.append((trunc.n_max, est.ground_energy))
        out.append(est)
    return out


def scan_csv(estimates) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["P", "energy", "residual", "basis_size", "n_max"])
    for e in estimates:
        w.writerow([repr(float(e.P)), repr(float(e.ground_energy)), repr(float(e.residual)),
                    e.basis_size, e.n_max])
    return buf.getvalue()
