"""
Single-trial detection of oscillatory ERP components (N170-like P1-N1-P2
complexes) from the phase asymmetry of Daubechies-family wavelets.
"""

from .config import ConfigError, DetectorConfig
from .detector import CoefficientPair, Detection, Peak, detect, gaussian_weight, proximity_detect
from .eval import EvalReport, run_benchmark, score
from .preprocessing import design_lowpass, filter_signal
from .scale_select import (ThresholdCalibration, calibrate_threshold, cone_of_influence,
                           scale_energy, select_analysis_scale)
from .signals import Signal
from .synth import LabeledTrial, TemplateParams, TrialSpec, make_background, make_corpus, make_trial
from .wavelets import (CwtMatrix, SampledWavelet, WaveletSpec, asymmetry_shift, cascade_evaluate,
                       cwt, group_delay, load_wavelet)

__version__ = "0.1.0"

__all__ = [
    "CoefficientPair", "ConfigError", "CwtMatrix", "Detection", "DetectorConfig", "EvalReport",
    "LabeledTrial", "Peak", "SampledWavelet", "Signal", "TemplateParams", "ThresholdCalibration",
    "TrialSpec", "WaveletSpec", "asymmetry_shift", "calibrate_threshold", "cascade_evaluate",
    "cone_of_influence", "cwt", "design_lowpass", "detect", "filter_signal", "gaussian_weight",
    "group_delay", "load_wavelet", "make_background", "make_corpus", "make_trial",
    "proximity_detect", "run_benchmark", "scale_energy", "score", "select_analysis_scale",
]
