"""Speed perturbation via iterative spectrogram inversion, class balancing,
noise/reverb augmentation, and an MFCC/VAD feature front-end for speech
corpora. Core operations are plain functions over typed containers; the
estimator classes wrap them with the sklearn fit/transform interface.
"""

from .audio_io import (
    AudioBuffer,
    UtteranceRecord,
    parse_manifest,
    read_wav,
    write_manifest,
    write_wav,
)
from .augment import (
    Assignment,
    BalancePlan,
    BalancePlanner,
    MixSpec,
    NoiseMixer,
    Reverberator,
    apply_reverb,
    build_balance_plan,
    class_histogram,
    execute_plan,
    format_rate,
    mix_noise,
)
from .features import (
    EnergyVad,
    FeatureMatrix,
    MfccConfig,
    MfccExtractor,
    SlidingMeanNormalizer,
    SpeechFeaturizer,
    VadMask,
    apply_vad,
    compute_mfcc,
    energy_vad,
    mel_filterbank,
    read_features,
    sliding_mean_normalize,
    write_features,
)
from .stft import (
    FrameMatrix,
    MagnitudeSpectrogram,
    StftParams,
    frame_signal,
    make_window,
    num_frames_for,
    overlap_add,
    stft_magnitude,
)
from .tsm import (
    RtisiState,
    TimeScaleModifier,
    TsmRate,
    compute_rate,
    expected_length,
    rtisi_invert,
    spectral_convergence,
    time_scale,
)

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "UtteranceRecord",
    "read_wav",
    "write_wav",
    "parse_manifest",
    "write_manifest",
    "StftParams",
    "FrameMatrix",
    "MagnitudeSpectrogram",
    "make_window",
    "num_frames_for",
    "frame_signal",
    "stft_magnitude",
    "overlap_add",
    "TsmRate",
    "RtisiState",
    "compute_rate",
    "expected_length",
    "rtisi_invert",
    "time_scale",
    "spectral_convergence",
    "TimeScaleModifier",
    "MfccConfig",
    "FeatureMatrix",
    "VadMask",
    "compute_mfcc",
    "sliding_mean_normalize",
    "energy_vad",
    "apply_vad",
    "mel_filterbank",
    "write_features",
    "read_features",
    "MfccExtractor",
    "SlidingMeanNormalizer",
    "EnergyVad",
    "SpeechFeaturizer",
    "Assignment",
    "BalancePlan",
    "MixSpec",
    "class_histogram",
    "build_balance_plan",
    "execute_plan",
    "mix_noise",
    "apply_reverb",
    "format_rate",
    "NoiseMixer",
    "Reverberator",
    "BalancePlanner",
    "__version__",
]
