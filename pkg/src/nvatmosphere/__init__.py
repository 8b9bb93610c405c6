"""Simulated ODMR spectrometer for the spin atmosphere of a single 13C nucleus."""

from .analysis import (DIVERGENT, AtmosphereReport, FieldSpectrum, PipelineSettings,
                       atmosphere, atmosphere_moments, phase_diagram, symmetry_indicator,
                       theory_moments)
from .measurement import ReadoutModel
from .params import MWStep, PhysicalParams
from .pulses import PulseSequence, TimeTrace, run_ramsey

__version__ = "0.1.0"
