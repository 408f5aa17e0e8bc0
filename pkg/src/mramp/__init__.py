"""Multi-resolution approximate message passing for compressed sensing.

Reconstructs a signal or image either at full (HR) resolution or directly at
a lower (LR) resolution from the same random measurements.
"""

from .amp import AmpResult, MRProblem, amp_run, reconstruct_modes, se_predict
from .denoise import TV1D, TV2D, SoftThreshold
from .errors import (BoundDivergesError, DimensionError, DivergenceError, ParameterError,
                     UndefinedMetricError, UnsupportedError)
from .resampling import ResamplingPair, make_pair
from .sensing import NoiseModel, SensingEnsemble, gen_ensemble, sample
from .signals import Image, Signal
from .transforms import Transform

__version__ = "0.1.0"
