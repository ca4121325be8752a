"""shglab: a numerical laboratory for second-harmonic boundary measurements.

Forward solvers for the time-harmonic Maxwell system with a quadratic
(second-harmonic) polarization, synthetic boundary admittance data,
exponentially growing probing fields, and Fourier reconstruction of the
quadratic susceptibility from boundary data.
"""
from .errors import (
    BranchError, ConfigError, ConstraintViolated, ContractionFailed,
    DegenerateFrequency, ExtrapolationUnreliable, IllConditionedSymbol,
    IllPosedDirections, InvalidGrid, InvalidTau, InvalidXi, NeumannDiverged,
    NoConvergence, ResonantFrequency, ShgLabError, SmallnessViolated,
    SolveFailed, SupportViolation, TauNotAsymptotic)
from .fields import ComplexVectorField, FrequencyPair, NormExponent
from .grids import BoxGrid
from .materials import MaterialModel, chi2_bump, eps_bump, radial_profile
from .norms import field_norm_w1p, trace_norm_div
from .traces import FACES, TangentialTrace, surface_divergence, tangential_trace

__version__ = "0.1.0"

__all__ = [
    "BoxGrid", "ComplexVectorField", "FrequencyPair", "MaterialModel",
    "NormExponent", "TangentialTrace", "FACES",
    "tangential_trace", "surface_divergence", "field_norm_w1p",
    "trace_norm_div", "chi2_bump", "eps_bump", "radial_profile",
    "ShgLabError", "InvalidGrid", "ConstraintViolated", "IllConditionedSymbol",
    "SupportViolation", "DegenerateFrequency", "ResonantFrequency",
    "SolveFailed", "SmallnessViolated", "ContractionFailed", "NoConvergence",
    "ExtrapolationUnreliable", "InvalidTau", "InvalidXi", "BranchError",
    "NeumannDiverged", "IllPosedDirections", "TauNotAsymptotic", "ConfigError",
    "__version__",
]
