"""Batch command line front end.

    polaron-bounds --model gaussian.json --command bounds --alpha 1,10,100 --out run1

Every command writes its tables into --out together with manifest.json.
Exit status: 0 success, 2 validation failure, 3 numerical failure. Numerical
failures at individual grid points are logged to errors.log; the rows that
did succeed are still written.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .bounds import (bounds_csv, certificate_csv, convex_envelope, eP_lower, eP_upper_asymptotic,
                     mass_quotient_window, meff_divergence_certificate, thm1_lower, thm1_upper)
from .errors import NumericalError, PolaronError, ValidationError, WindowViolation
from .model import (PolaronModel, QuadratureSpec, compute_constants, constants_csv, load_model,
                    validate_regularity)
from .oracle import FockTruncation, scan_csv, scan_dispersion
from .pekar import minimize_pekar, pekar_csv
from .trialstate import variational_energy

COMMANDS = ("validate", "constants", "bounds", "pekar", "mass-window", "certificate", "trial",
            "oracle-scan", "envelope")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


@dataclass
class RunConfig:
    model_path: Path
    command: str
    alpha_grid: list | None = None
    P_grid: list = field(default_factory=lambda: [0.0])
    output_dir: Path = Path("out")
    seed: int = 0
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    n_modes: int = 32
    n_max: int = 2

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        if self.alpha_grid is not None and not self.alpha_grid:
            raise ValidationError("alpha grid is empty")
        if not self.P_grid:
            raise ValidationError("P grid is empty")


@dataclass
class _Run:
    config: RunConfig
    model: PolaronModel
    outputs: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    @property
    def alphas(self):
        return self.config.alpha_grid or [self.model.alpha]

    def write(self, name: str, text: str):
        self.outputs[name] = text

    def fail(self, where: str, exc: Exception):
        detail = getattr(exc, "detail", {})
        extra = " ".join(f"{k}={_short(v)}" for k, v in sorted(detail.items()))
        self.errors.append(f"[{type(exc).__module__}.{type(exc).__name__}] {where}: {exc} {extra}".rstrip())


def _short(v):
    if isinstance(v, np.ndarray):
        return f"array{v.shape}"
    return repr(v)


def _plain(obj):
    return obj.item() if hasattr(obj, "item") else str(obj)


def _workers() -> int:
    cap = os.environ.get("POLARON_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ValidationError(f"POLARON_THREADS must be an integer, got {cap!r}") from None
    return n


def _pmap(run: _Run, fn, items, label):
    """Apply fn over items on the worker pool; failures become None and are logged in order."""
    def guarded(item):
        try:
            return fn(item), None
        except NumericalError as exc:
            return None, exc

    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        results = list(pool.map(guarded, items))
    out = []
    for item, (res, exc) in zip(items, results):
        if exc is not None:
            run.fail(f"{label} {item}", exc)
        out.append(res)
    return out


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands

def _validate(run: _Run):
    report = validate_regularity(run.model, run.config.quad)
    run.write("validation.json", json.dumps(report.to_dict(), indent=2, sort_keys=True,
                                            default=_plain) + "\n")
    print(report.summary())
    if not report.regular:
        for line in report.failures:
            print(line)
        raise ValidationError("model is not regular: " + "; ".join(report.failures))


def _constants(run: _Run):
    run.write("constants.csv", constants_csv(_consts(run)))


def _consts(run: _Run):
    report = validate_regularity(run.model, run.config.quad)
    if not report.regular:
        raise ValidationError("model is not regular: " + "; ".join(report.failures))
    return compute_constants(run.model, run.config.quad)


def _bounds(run: _Run):
    consts = _consts(run)
    points = [(a, P) for a in run.alphas for P in run.config.P_grid]

    def one(point):
        a, P = point
        if P == 0:
            up, lo = thm1_upper(consts, a), thm1_lower(consts, a)
            return a, P, up.value, lo.value, True, f"ground state, {lo.components['branch']} branch"
        up = eP_upper_asymptotic(consts, a, P)
        lo = eP_lower(run.model, consts, a, P, run.config.quad)
        reason = "; ".join(r for r in (up.reason, lo.reason) if r)
        return a, P, up.value, lo.value, up.valid and lo.valid, reason

    rows = [r for r in _pmap(run, one, points, "alpha,P") if r is not None]
    run.write("bounds.csv", bounds_csv(rows))


def _pekar(run: _Run):
    consts = _consts(run)

    def one(a):
        return minimize_pekar(run.model.with_alpha(a), quad=run.config.quad, consts=consts)

    sols = _pmap(run, one, run.alphas, "alpha")
    rows = []
    for a, sol in zip(run.alphas, sols):
        if sol is None:
            continue
        run.write(f"pekar_alpha_{a:g}.csv", pekar_csv(sol))
        rows.append((a, sol.energy, sol.kinetic, sol.potential, sol.m_pek_alpha, sol.iterations,
                     sol.residual, sol.grid.r_max, sol.grid.n))
    run.write("pekar_summary.csv", _table(["alpha", "energy", "kinetic", "potential", "m_pek_alpha",
                                           "iterations", "residual", "r_max", "n"], rows))


def _trial_fn(run: _Run, consts, alpha):
    def trial(P):
        try:
            rep = variational_energy(run.model, consts, alpha, P, run.config.quad, method="auto",
                                     seed=run.config.seed)
        except WindowViolation:
            return math.inf, 0.0
        return rep.energy, rep.quadrature_error
    return trial


def _mass_window(run: _Run):
    consts = _consts(run)
    rows = []
    for a in run.alphas:
        try:
            sol = minimize_pekar(run.model.with_alpha(a), quad=run.config.quad, consts=consts)
            e_pek = sol.energy
        except NumericalError as exc:
            run.fail(f"alpha {a:g} pekar", exc)
            e_pek = None
        try:
            rep = mass_quotient_window(run.model, consts, a, run.config.P_grid, run.config.quad,
                                       trial=_trial_fn(run, consts, a), pekar_energy=e_pek)
        except NumericalError as exc:
            run.fail(f"alpha {a:g}", exc)
            continue
        for i, P in enumerate(rep.P_grid):
            v = rep.window_verdict[i]
            reason = v["reason"]
            if math.isinf(rep.upper[i].value):
                reason = "; ".join(filter(None, [reason, "trial state outside validity cap"]))
            rows.append((a, P, rep.upper[i].value, rep.lower[i].value, rep.E0_upper, rep.E0_lower,
                         rep.M_lower[i] / a, rep.M_upper[i] / a, rep.m_pek,
                         str(v["in_window"]).lower(), str(v["valid"]).lower(), reason))
    run.write("mass_window.csv", _table(
        ["alpha", "P", "EP_upper", "EP_lower", "E0_upper", "E0_lower", "scaled_M_lower",
         "scaled_M_upper", "m_pek", "in_window", "valid", "reason"], rows))


def _certificate(run: _Run):
    consts = _consts(run)
    certs = [meff_divergence_certificate(consts, a) for a in run.alphas]
    run.write("certificates.csv", certificate_csv(certs))


def _trial(run: _Run):
    consts = _consts(run)
    points = [(a, P) for a in run.alphas for P in run.config.P_grid]

    def one(point):
        a, P = point
        return variational_energy(run.model, consts, a, P, run.config.quad, method="auto",
                                  seed=run.config.seed)

    rows = []
    for (a, P), rep in zip(points, _pmap(run, one, points, "alpha,P")):
        if rep is not None:
            rows.append((a, P, rep.energy, rep.quadrature_error, rep.kinetic_term, rep.field_term,
                         rep.interaction_term, rep.norm_ratio, rep.method, rep.nodes))
    run.write("trial_state.csv", _table(
        ["alpha", "P", "energy", "quadrature_error", "kinetic", "field", "interaction",
         "norm_ratio", "method", "nodes"], rows))


def _truncation(run: _Run):
    cfg = run.config
    if run.model.d == 1:
        return FockTruncation.grid_1d(run.model, cfg.n_modes, cfg.n_max)
    if run.model.d == 3:
        return FockTruncation.grid_3d(run.model, cfg.n_modes, 6, cfg.n_max)
    raise ValidationError("the Fock-space oracle supports d = 1 and d = 3 only")


def _oracle_samples(run: _Run):
    trunc = _truncation(run)

    def one(a):
        return scan_dispersion(run.model, a, run.config.P_grid, trunc)

    return trunc, _pmap(run, one, run.alphas, "alpha")


def _oracle_scan(run: _Run):
    _, scans = _oracle_samples(run)
    trend_rows = []
    for a, scan in zip(run.alphas, scans):
        if scan is None:
            continue
        run.write(f"oracle_alpha_{a:g}.csv", scan_csv(scan))
        trend_rows += [(a, e.P, n, E) for e in scan for n, E in e.truncation_trend]
    run.write("oracle_trend.csv", _table(["alpha", "P", "n_max", "energy"], trend_rows))


def _envelope(run: _Run):
    consts = _consts(run)
    _, scans = _oracle_samples(run)
    rows = []
    for a, scan in zip(run.alphas, scans):
        if scan is None:
            continue
        try:
            sol = minimize_pekar(run.model.with_alpha(a), quad=run.config.quad, consts=consts)
        except NumericalError as exc:
            run.fail(f"alpha {a:g} pekar", exc)
            sol = None
        env = {}
        for p, y in convex_envelope([(e.P, e.ground_energy) for e in scan]):
            env[p] = min(y, env.get(p, math.inf))
        for e in scan:
            hull = min(env[abs(e.P)], e.ground_energy)
            parabola = (sol.energy + e.P ** 2 / (2.0 * sol.m_pek_alpha)) if sol else math.nan
            rows.append((a, e.P, e.ground_energy, hull, parabola))
    run.write("envelope.csv", _table(["alpha", "P", "energy", "envelope", "pekar_parabola"], rows))


_DISPATCH = {"validate": _validate, "constants": _constants, "bounds": _bounds, "pekar": _pekar,
             "mass-window": _mass_window, "certificate": _certificate, "trial": _trial,
             "oracle-scan": _oracle_scan, "envelope": _envelope}


# ---------------------------------------------------------------------------

def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _flush(run: _Run, started: float, status: int):
    out = run.config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    hashes = {}
    if run.errors:
        run.outputs["errors.log"] = "\n".join(run.errors) + "\n"
    for name in sorted(run.outputs):
        data = run.outputs[name].encode("utf-8")
        (out / name).write_bytes(data)
        hashes[name] = _sha256(data)
    cfg = run.config
    model_bytes = Path(cfg.model_path).read_bytes()
    manifest = {
        "command": cfg.command,
        "exit_status": status,
        "inputs": {"model_path": str(cfg.model_path), "model_sha256": _sha256(model_bytes),
                   "model": run.model.to_dict() if run.model else None,
                   "alpha_grid": cfg.alpha_grid, "P_grid": cfg.P_grid,
                   "n_modes": cfg.n_modes, "n_max": cfg.n_max},
        "seed": cfg.seed,
        "quadrature": asdict(cfg.quad),
        "versions": {"package": _version(), "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "outputs": hashes,
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")


def run(config: RunConfig) -> int:
    """Execute one command; returns the process exit status."""
    started = time.perf_counter()
    try:
        model = load_model(config.model_path)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read model file: {exc}") from None
    state = _Run(config, model)
    status = EXIT_OK
    try:
        _DISPATCH[config.command](state)
    except ValidationError as exc:
        state.fail(config.command, exc)
        status = EXIT_VALIDATION
    except NumericalError as exc:
        state.fail(config.command, exc)
        status = EXIT_NUMERICAL
    if status == EXIT_OK and state.errors:
        status = EXIT_NUMERICAL
    _flush(state, started, status)
    return status


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", ",").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polaron-bounds",
                                description="Energy and effective-mass bounds for polaron models.")
    p.add_argument("--model", required=True, type=Path, help="model JSON file")
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--alpha", type=_floats, default=None,
                   help="comma separated couplings (default: the model's alpha)")
    p.add_argument("--P", type=_floats, default=[0.0], help="comma separated total momenta")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quad-rel-tol", type=float, default=None)
    p.add_argument("--n-modes", type=int, default=32, help="oracle modes (radial nodes in d=3)")
    p.add_argument("--n-max", type=int, default=2, help="oracle boson cap")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        quad = QuadratureSpec()
        if args.quad_rel_tol is not None:
            quad = replace(quad, rel_tol=args.quad_rel_tol)
        cfg = RunConfig(args.model, args.command, args.alpha, args.P, args.out, args.seed, quad,
                        args.n_modes, args.n_max)
        return run(cfg)
    except PolaronError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION if isinstance(exc, ValidationError) else EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
