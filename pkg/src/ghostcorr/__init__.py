"""Monte-Carlo and closed-form toolkit for correlated (ghost) imaging.

Thermal light split on a beam splitter and down-converted signal/idler pairs
are sampled on a 1-D transverse lattice, propagated through Fourier and
imaging arms, and correlated shot by shot.  Every estimate has a closed-form
counterpart in :mod:`ghostcorr.oracles`.
"""

from .detection import CorrelationAccumulator, DetectorSpec, IntensityCorrelator, finalize_G, intensity
from .lattice import ComplexField, TransverseGrid, to_momentum, to_position
from .optics import ImagingArm, ObjectMask, double_slit, propagate, single_slit
from .sources import BeamSplitter, PdcGain, ThermalSpectrum, sample_pdc_pair, sample_thermal, sample_vacuum, split

__version__ = "0.1.0"

__all__ = [
    "BeamSplitter",
    "ComplexField",
    "CorrelationAccumulator",
    "DetectorSpec",
    "ImagingArm",
    "IntensityCorrelator",
    "ObjectMask",
    "PdcGain",
    "ThermalSpectrum",
    "TransverseGrid",
    "double_slit",
    "finalize_G",
    "intensity",
    "propagate",
    "sample_pdc_pair",
    "sample_thermal",
    "sample_vacuum",
    "single_slit",
    "split",
    "to_momentum",
    "to_position",
]
