"""MFCC extraction, sliding-window mean normalization, and energy-based
speech activity detection.

The cepstral pipeline per frame: pre-emphasis, Hamming window, power
spectrum, triangular mel filterbank, floored log, orthonormal DCT-II, first
``num_coeffs`` coefficients (c0 included). Normalization subtracts the
per-dimension mean over a centered window, truncated at the utterance edges.
The activity detector thresholds frame log energy relative to the utterance
mean, so the whole front end is invariant to input gain.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct
from sklearn.base import BaseEstimator, TransformerMixin

from .audio_io import AudioBuffer
from .errors import InvalidConfig, IoFailure, LengthMismatch, SignalTooShort
from .stft import make_window, next_pow2, num_frames_for
from .validation import as_matrix, as_waveform, check_sample_rate

#: mel log energies are clamped here before the log
LOG_FLOOR = 1e-10

#: frame power below this counts as digital silence for the activity detector
ENERGY_FLOOR = 1e-30


@dataclass(frozen=True)
class MfccConfig:
    """Cepstral front-end settings (frame geometry in milliseconds)."""

    num_coeffs: int = 23
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    num_mel_filters: int = 23
    low_freq_hz: float = 20.0
    high_freq_hz: float = 7600.0
    pre_emphasis: float = 0.97

    def __post_init__(self):
        if self.num_coeffs < 1:
            raise InvalidConfig(f"num_coeffs must be >= 1, got {self.num_coeffs}")
        if self.num_coeffs > self.num_mel_filters:
            raise InvalidConfig(
                f"num_coeffs {self.num_coeffs} exceeds "
                f"num_mel_filters {self.num_mel_filters}"
            )
        if self.frame_len_ms <= 0 or self.hop_ms <= 0:
            raise InvalidConfig("frame_len_ms and hop_ms must be positive")
        if not 0 <= self.low_freq_hz < self.high_freq_hz:
            raise InvalidConfig(
                f"need 0 <= low_freq_hz < high_freq_hz, got "
                f"{self.low_freq_hz}/{self.high_freq_hz}"
            )
        if not 0 <= self.pre_emphasis < 1:
            raise InvalidConfig(f"pre_emphasis must be in [0, 1), got {self.pre_emphasis}")


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-frame feature rows plus the start sample index of each frame."""

    rows: np.ndarray
    frame_times: np.ndarray
    sample_rate: int

    @property
    def num_frames(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class VadMask:
    """Per-frame keep/drop decisions."""

    keep: np.ndarray

    def __len__(self) -> int:
        return len(self.keep)


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    num_filters: int, fft_size: int, sample_rate: int, low_hz: float, high_hz: float
) -> np.ndarray:
    """Triangular mel filters as a (num_filters, fft_size // 2 + 1) matrix."""
    points_mel = np.linspace(hz_to_mel(low_hz), hz_to_mel(high_hz), num_filters + 2)
    points_hz = mel_to_hz(points_mel)
    bins = np.fft.rfftfreq(fft_size, d=1.0 / sample_rate)
    bank = np.zeros((num_filters, len(bins)))
    for j in range(num_filters):
        left, center, right = points_hz[j], points_hz[j + 1], points_hz[j + 2]
        up = (bins - left) / (center - left)
        down = (right - bins) / (right - center)
        bank[j] = np.maximum(0.0, np.minimum(up, down))
    return bank


def _frame_starts(n_samples: int, frame_len: int, hop: int) -> np.ndarray:
    count = num_frames_for(n_samples, frame_len, hop)
    return hop * np.arange(count)


def _frame_geometry(sample_rate: int, frame_len_ms: float, hop_ms: float) -> tuple[int, int]:
    return (
        int(round(frame_len_ms * sample_rate / 1000.0)),
        int(round(hop_ms * sample_rate / 1000.0)),
    )


def compute_mfcc(audio: AudioBuffer, config: MfccConfig = MfccConfig()) -> FeatureMatrix:
    """Extract mel-frequency cepstral coefficients, one row per frame."""
    sr = audio.sample_rate
    if config.high_freq_hz > sr / 2:
        raise InvalidConfig(
            f"high_freq_hz {config.high_freq_hz} exceeds Nyquist {sr / 2}"
        )
    frame_len, hop = _frame_geometry(sr, config.frame_len_ms, config.hop_ms)
    x = audio.samples
    if len(x) < frame_len:
        raise SignalTooShort(f"need at least {frame_len} samples, got {len(x)}")

    emphasized = np.empty_like(x)
    emphasized[0] = x[0]
    emphasized[1:] = x[1:] - config.pre_emphasis * x[:-1]

    starts = _frame_starts(len(x), frame_len, hop)
    idx = np.arange(frame_len)[None, :] + starts[:, None]
    window = make_window("hamming", frame_len)
    frames = emphasized[idx] * window[None, :]

    fft_size = next_pow2(frame_len)
    power = np.abs(np.fft.rfft(frames, n=fft_size, axis=1)) ** 2
    bank = mel_filterbank(
        config.num_mel_filters, fft_size, sr, config.low_freq_hz, config.high_freq_hz
    )
    log_mel = np.log(np.maximum(power @ bank.T, LOG_FLOOR))
    coeffs = dct(log_mel, type=2, axis=1, norm="ortho")[:, : config.num_coeffs]
    return FeatureMatrix(coeffs, starts, sr)


def _window_half_frames(window_ms: float, hop_ms: float) -> int:
    return int(round(window_ms / (2.0 * hop_ms)))


def _sliding_mean(rows: np.ndarray, half: int) -> np.ndarray:
    """Centered moving mean over rows, window truncated at the edges."""
    n = rows.shape[0]
    if n == 0:
        return rows.copy()
    csum = np.vstack([np.zeros((1, rows.shape[1])), np.cumsum(rows, axis=0)])
    lo = np.maximum(np.arange(n) - half, 0)
    hi = np.minimum(np.arange(n) + half + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)[:, None]


def sliding_mean_normalize(
    features: FeatureMatrix, window_ms: float = 3000.0
) -> FeatureMatrix:
    """Subtract the per-dimension mean over a centered window of up to window_ms.

    The window is measured in frames from the feature matrix's own frame
    spacing and truncated at the utterance edges.
    """
    if window_ms <= 0:
        raise ValueError(f"window_ms must be positive, got {window_ms}")
    rows = features.rows
    times = features.frame_times
    if rows.shape[0] <= 1:
        return FeatureMatrix(np.zeros_like(rows), times, features.sample_rate)
    hop_samples = int(times[1] - times[0])
    window_samples = window_ms * features.sample_rate / 1000.0
    half = int(round(window_samples / (2.0 * hop_samples)))
    means = _sliding_mean(rows, half)
    return FeatureMatrix(rows - means, times, features.sample_rate)


def energy_vad(
    audio: AudioBuffer,
    frame_len_ms: float = 25.0,
    hop_ms: float = 10.0,
    threshold_db: float = -15.0,
) -> VadMask:
    """Keep frames whose log energy exceeds the utterance mean plus a margin.

    The threshold is relative to the utterance's own mean log energy, so the
    mask does not change when the signal is scaled. Frames at the digital
    silence floor are always dropped.
    """
    frame_len, hop = _frame_geometry(audio.sample_rate, frame_len_ms, hop_ms)
    x = audio.samples
    if len(x) < frame_len:
        raise SignalTooShort(f"need at least {frame_len} samples, got {len(x)}")
    starts = _frame_starts(len(x), frame_len, hop)
    idx = np.arange(frame_len)[None, :] + starts[:, None]
    power = np.mean(x[idx] ** 2, axis=1)
    log_energy = 10.0 * np.log10(np.maximum(power, ENERGY_FLOOR))
    keep = (log_energy > log_energy.mean() + threshold_db) & (power > ENERGY_FLOOR)
    return VadMask(keep)


def apply_vad(features: FeatureMatrix, mask: VadMask) -> FeatureMatrix:
    """Drop feature rows whose mask entry is false, preserving order."""
    if len(mask) != features.num_frames:
        raise LengthMismatch(
            f"mask has {len(mask)} entries for {features.num_frames} frames"
        )
    keep = np.asarray(mask.keep, dtype=bool)
    return FeatureMatrix(
        features.rows[keep], features.frame_times[keep], features.sample_rate
    )


def write_features(path, features: FeatureMatrix) -> None:
    """Serialize to the binary feature format.

    Layout: little-endian header (num_frames: u32, num_coeffs: u32) followed
    by the rows as row-major float32. Written atomically.
    """
    rows = np.ascontiguousarray(features.rows, dtype="<f4")
    header = struct.pack("<II", rows.shape[0], rows.shape[1])
    payload = header + rows.tobytes()
    directory = os.path.dirname(os.path.abspath(path)) or "."
    try:
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(payload)
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_features(path) -> np.ndarray:
    """Read a serialized feature file back as a float32 matrix."""
    try:
        with open(path, "rb") as handle:
            data = handle.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(data) < 8:
        raise IoFailure(f"{path}: truncated feature header")
    num_frames, num_coeffs = struct.unpack_from("<II", data, 0)
    expected = 8 + 4 * num_frames * num_coeffs
    if len(data) != expected:
        raise IoFailure(f"{path}: expected {expected} bytes, found {len(data)}")
    rows = np.frombuffer(data, dtype="<f4", offset=8)
    return rows.reshape(num_frames, num_coeffs).copy()


class MfccExtractor(TransformerMixin, BaseEstimator):
    """Transformer from a 1-D waveform to an (n_frames, num_coeffs) matrix."""

    def __init__(
        self,
        sample_rate: int = 16000,
        num_coeffs: int = 23,
        frame_len_ms: float = 25.0,
        hop_ms: float = 10.0,
        num_mel_filters: int = 23,
        low_freq_hz: float = 20.0,
        high_freq_hz: float = 7600.0,
        pre_emphasis: float = 0.97,
    ):
        self.sample_rate = sample_rate
        self.num_coeffs = num_coeffs
        self.frame_len_ms = frame_len_ms
        self.hop_ms = hop_ms
        self.num_mel_filters = num_mel_filters
        self.low_freq_hz = low_freq_hz
        self.high_freq_hz = high_freq_hz
        self.pre_emphasis = pre_emphasis

    def _config(self) -> MfccConfig:
        return MfccConfig(
            num_coeffs=self.num_coeffs,
            frame_len_ms=self.frame_len_ms,
            hop_ms=self.hop_ms,
            num_mel_filters=self.num_mel_filters,
            low_freq_hz=self.low_freq_hz,
            high_freq_hz=self.high_freq_hz,
            pre_emphasis=self.pre_emphasis,
        )

    def fit(self, X=None, y=None):
        self._config()
        check_sample_rate(self.sample_rate)
        return self

    def transform(self, X) -> np.ndarray:
        buf = AudioBuffer(as_waveform(X, "X"), self.sample_rate)
        return compute_mfcc(buf, self._config()).rows


class SlidingMeanNormalizer(TransformerMixin, BaseEstimator):
    """Centered moving-mean subtraction over feature rows spaced hop_ms apart."""

    def __init__(self, window_ms: float = 3000.0, hop_ms: float = 10.0,
                 sample_rate: int = 16000):
        self.window_ms = window_ms
        self.hop_ms = hop_ms
        self.sample_rate = sample_rate

    def fit(self, X=None, y=None):
        if self.window_ms <= 0 or self.hop_ms <= 0:
            raise ValueError("window_ms and hop_ms must be positive")
        return self

    def transform(self, X) -> np.ndarray:
        rows = as_matrix(X, "X")
        if rows.shape[0] <= 1:
            return np.zeros_like(rows)
        half = _window_half_frames(self.window_ms, self.hop_ms)
        return rows - _sliding_mean(rows, half)


class EnergyVad(TransformerMixin, BaseEstimator):
    """Transformer from a 1-D waveform to a boolean keep mask per frame."""

    def __init__(
        self,
        sample_rate: int = 16000,
        frame_len_ms: float = 25.0,
        hop_ms: float = 10.0,
        threshold_db: float = -15.0,
    ):
        self.sample_rate = sample_rate
        self.frame_len_ms = frame_len_ms
        self.hop_ms = hop_ms
        self.threshold_db = threshold_db

    def fit(self, X=None, y=None):
        check_sample_rate(self.sample_rate)
        return self

    def transform(self, X) -> np.ndarray:
        buf = AudioBuffer(as_waveform(X, "X"), self.sample_rate)
        return energy_vad(buf, self.frame_len_ms, self.hop_ms, self.threshold_db).keep


class SpeechFeaturizer(TransformerMixin, BaseEstimator):
    """Full front end: MFCC, optional activity filtering, optional normalization.

    Maps a 1-D waveform to the final feature matrix in one ``transform`` call,
    mirroring the batch ``featurize`` command.
    """

    def __init__(
        self,
        sample_rate: int = 16000,
        num_coeffs: int = 23,
        frame_len_ms: float = 25.0,
        hop_ms: float = 10.0,
        use_vad: bool = True,
        vad_threshold_db: float = -15.0,
        normalize: bool = True,
        norm_window_ms: float = 3000.0,
    ):
        self.sample_rate = sample_rate
        self.num_coeffs = num_coeffs
        self.frame_len_ms = frame_len_ms
        self.hop_ms = hop_ms
        self.use_vad = use_vad
        self.vad_threshold_db = vad_threshold_db
        self.normalize = normalize
        self.norm_window_ms = norm_window_ms

    def fit(self, X=None, y=None):
        check_sample_rate(self.sample_rate)
        return self

    def transform(self, X) -> np.ndarray:
        buf = AudioBuffer(as_waveform(X, "X"), self.sample_rate)
        config = MfccConfig(
            num_coeffs=self.num_coeffs,
            frame_len_ms=self.frame_len_ms,
            hop_ms=self.hop_ms,
            high_freq_hz=min(7600.0, buf.sample_rate / 2.0),
        )
        feats = compute_mfcc(buf, config)
        if self.use_vad:
            mask = energy_vad(buf, self.frame_len_ms, self.hop_ms, self.vad_threshold_db)
            feats = apply_vad(feats, mask)
        if self.normalize:
            feats = sliding_mean_normalize(feats, self.norm_window_ms)
        return feats.rows
