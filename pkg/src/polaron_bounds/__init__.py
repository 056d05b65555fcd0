"""Numerical bounds for strongly coupled polaron models."""

from .bounds import (EnergyBound, MassCertificate, MomentumWindowReport, VelocityShiftNorms,
                     convex_envelope, eP_lower, eP_upper_asymptotic, essential_spectrum_ceiling,
                     hu_norms, mass_quotient_window, meff_divergence_certificate, thm1_lower,
                     thm1_upper)
from .errors import NumericalError, PolaronError, ValidationError
from .model import (ModelConstants, PolaronModel, QuadratureSpec, RadialProfile, compute_constants,
                    kernel_g, load_model, radial_integral, validate_regularity)
from .oracle import (EigSpec, FockTruncation, SpectrumEstimate, build_fiber_hamiltonian,
                     ground_energy, scan_dispersion)
from .pekar import (PekarSolution, RadialGrid, SolverSpec, minimize_pekar, pekar_mass,
                    semiclassical_energy, solve_velocity)
from .trialstate import (LemmaReport, TrialStateReport, WeightMeasure, build_weight,
                         lemma_constants, variational_energy, weight_moments)

__version__ = "0.1.0"

__all__ = [
    "EigSpec", "EnergyBound", "FockTruncation", "LemmaReport", "MassCertificate", "ModelConstants",
    "MomentumWindowReport", "NumericalError", "PekarSolution", "PolaronError", "PolaronModel",
    "QuadratureSpec", "RadialGrid", "RadialProfile", "SolverSpec", "SpectrumEstimate",
    "TrialStateReport", "ValidationError", "VelocityShiftNorms", "WeightMeasure",
    "build_fiber_hamiltonian", "build_weight", "compute_constants", "convex_envelope", "eP_lower",
    "eP_upper_asymptotic", "essential_spectrum_ceiling", "ground_energy", "hu_norms", "kernel_g",
    "lemma_constants", "load_model", "mass_quotient_window", "meff_divergence_certificate",
    "minimize_pekar", "pekar_mass", "radial_integral", "scan_dispersion", "semiclassical_energy",
    "solve_velocity", "thm1_lower", "thm1_upper", "validate_regularity", "variational_energy",
    "weight_moments",
]
