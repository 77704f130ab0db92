"""Synthesis and verification of weighted tensorized fractional Brownian fields."""

__version__ = "0.1.0"

from .params import FieldParams, GridSpec, ParameterError, validate
from .spectral import amplitude, phi, phi_aniso
from .synthesis import (ComplexNoise, FieldSample, derived_seed, sample_noise, synthesize,
                        synthesize_batch)

__all__ = [
    "FieldParams", "GridSpec", "ParameterError", "validate",
    "amplitude", "phi", "phi_aniso",
    "ComplexNoise", "FieldSample", "derived_seed", "sample_noise", "synthesize",
    "synthesize_batch",
]
