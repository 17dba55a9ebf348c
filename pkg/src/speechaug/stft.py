"""Frame machinery: Hamming windowing, analysis framing, STFT magnitudes,
and normalized overlap-add resynthesis.

Framing takes full windows only: a signal of n samples at frame length L and
hop S yields floor((n - L) / S) + 1 frames, trailing partial frames dropped.
Overlap-add applies the synthesis window to each row and divides by the
accumulated squared window, which makes analyze-then-resynthesize an exact
identity when both run at the same hop.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .audio_io import AudioBuffer
from .errors import EmptyInput, FftSizeTooSmall, InvalidLength, SignalTooShort
from .validation import as_waveform

WINDOW_KINDS = ("hamming",)

#: denominator guard for overlap-add normalization
OLA_FLOOR = 1e-8


def next_pow2(n: int) -> int:
    size = 1
    while size < n:
        size *= 2
    return size


@dataclass(frozen=True)
class StftParams:
    """Frame length, analysis/synthesis hops, FFT size, window kind (samples)."""

    frame_len_samples: int
    analysis_hop_samples: int
    synthesis_hop_samples: int
    fft_size: int
    window_kind: str = "hamming"

    def __post_init__(self):
        if not 0 < self.analysis_hop_samples <= self.frame_len_samples:
            raise ValueError(
                f"analysis hop {self.analysis_hop_samples} must be in "
                f"(0, {self.frame_len_samples}]"
            )
        if not 0 < self.synthesis_hop_samples <= self.frame_len_samples:
            raise ValueError(
                f"synthesis hop {self.synthesis_hop_samples} must be in "
                f"(0, {self.frame_len_samples}]"
            )
        if self.frame_len_samples > self.fft_size:
            raise FftSizeTooSmall(
                f"fft_size {self.fft_size} < frame length {self.frame_len_samples}"
            )
        if self.window_kind not in WINDOW_KINDS:
            raise ValueError(f"unknown window kind {self.window_kind!r}")

    @classmethod
    def from_ms(
        cls,
        sample_rate: int,
        frame_len_ms: float = 25.0,
        analysis_hop_ms: float = 10.0,
        synthesis_hop_ms: float = 10.0,
        fft_size: int | None = None,
        window_kind: str = "hamming",
    ) -> "StftParams":
        """Build params from millisecond settings at a given sample rate."""
        frame_len = int(round(frame_len_ms * sample_rate / 1000.0))
        if fft_size is None:
            fft_size = next_pow2(frame_len)
        return cls(
            frame_len_samples=frame_len,
            analysis_hop_samples=int(round(analysis_hop_ms * sample_rate / 1000.0)),
            synthesis_hop_samples=int(round(synthesis_hop_ms * sample_rate / 1000.0)),
            fft_size=fft_size,
            window_kind=window_kind,
        )

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1


@dataclass(frozen=True)
class FrameMatrix:
    """Windowed analysis frames, one per row, with their generating params."""

    frames: np.ndarray
    params: StftParams
    sample_rate: int

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class MagnitudeSpectrogram:
    """Non-negative |STFT| rows with their generating params."""

    mags: np.ndarray
    params: StftParams
    sample_rate: int

    @property
    def num_frames(self) -> int:
        return self.mags.shape[0]


def make_window(kind: str, length: int) -> np.ndarray:
    """Return a symmetric window of the given length with peak 1.0.

    Hamming: w[n] = 0.54 - 0.46*cos(2*pi*n / (length - 1)).
    """
    if kind not in WINDOW_KINDS:
        raise ValueError(f"unknown window kind {kind!r}")
    if length < 2:
        raise InvalidLength(f"window length must be >= 2, got {length}")
    # evaluated on a grid symmetric around zero so w[n] == w[length-1-n] exactly
    n = np.arange(1 - length, length, 2)
    return 0.54 + 0.46 * np.cos(np.pi * n / (length - 1))


def num_frames_for(signal_len: int, frame_len: int, hop: int) -> int:
    """Frame count under the full-window law: floor((n - L) / hop) + 1."""
    if signal_len < frame_len:
        return 0
    return (signal_len - frame_len) // hop + 1


def frame_signal(audio: AudioBuffer, params: StftParams) -> FrameMatrix:
    """Slice the signal into windowed frames at the analysis hop.

    Row k is ``audio[k*hop : k*hop + L] * window``. Raises SignalTooShort if
    the signal does not cover one full frame.
    """
    x = audio.samples
    L = params.frame_len_samples
    hop = params.analysis_hop_samples
    count = num_frames_for(len(x), L, hop)
    if count == 0:
        raise SignalTooShort(f"signal of {len(x)} samples shorter than frame {L}")
    window = make_window(params.window_kind, L)
    idx = np.arange(L)[None, :] + hop * np.arange(count)[:, None]
    return FrameMatrix(x[idx] * window[None, :], params, audio.sample_rate)


def stft_magnitude(frames: FrameMatrix, fft_size: int | None = None) -> MagnitudeSpectrogram:
    """Magnitude of the zero-padded DFT of each frame row (one-sided)."""
    if fft_size is None:
        fft_size = frames.params.fft_size
    if fft_size < frames.params.frame_len_samples:
        raise FftSizeTooSmall(
            f"fft_size {fft_size} < frame length {frames.params.frame_len_samples}"
        )
    mags = np.abs(np.fft.rfft(frames.frames, n=fft_size, axis=1))
    params = replace(frames.params, fft_size=fft_size)
    return MagnitudeSpectrogram(mags, params, frames.sample_rate)


def overlap_add(
    frames: FrameMatrix,
    hop: int,
    window: np.ndarray | None = None,
    normalize: bool = True,
) -> AudioBuffer:
    """Resynthesize by windowed overlap-add of frame rows at the given hop.

    Each row is multiplied by the synthesis window and accumulated; with
    ``normalize`` the sum is divided by the accumulated squared window,
    floored at OLA_FLOOR. Output length is (num_frames - 1) * hop + L.
    """
    rows = frames.frames
    if rows.shape[0] == 0:
        raise EmptyInput("overlap_add needs at least one frame")
    if hop <= 0:
        raise ValueError(f"hop must be positive, got {hop}")
    L = rows.shape[1]
    if window is None:
        window = make_window(frames.params.window_kind, L)
    else:
        window = as_waveform(window, "window")
        if len(window) != L:
            raise ValueError(f"window length {len(window)} != frame length {L}")

    out_len = (rows.shape[0] - 1) * hop + L
    acc = np.zeros(out_len)
    win_sum = np.zeros(out_len)
    w2 = window * window
    for k in range(rows.shape[0]):
        t0 = k * hop
        acc[t0:t0 + L] += window * rows[k]
        win_sum[t0:t0 + L] += w2
    if normalize:
        acc = acc / np.maximum(win_sum, OLA_FLOOR)
    return AudioBuffer(acc, frames.sample_rate)
