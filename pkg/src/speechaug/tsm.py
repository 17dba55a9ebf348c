"""Time-scale modification by causal iterative spectrogram inversion.

A signal is framed at the analysis hop, reduced to STFT magnitudes, and
resynthesized at a different synthesis hop. Phases are re-estimated frame by
frame: each new frame starts from the phase of the partially overlap-added
signal already produced (so synthesis never looks at future frames), then a
short refinement loop alternates between imposing the target magnitude and
re-measuring the phase of the updated overlap-add buffer. Committed samples
leave the buffer window-sum-normalized, one synthesis hop per frame.

Speeding up or slowing down falls out of the hop ratio: with speed factor
``alpha = analysis_hop / synthesis_hop`` the output duration is
``len(input) / alpha`` while pitch is untouched, which is what distinguishes
this from plain resampling.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .audio_io import AudioBuffer
from .errors import BadIterations, EmptyInput, LengthMismatch, OutOfRange, SignalTooShort
from .stft import (
    OLA_FLOOR,
    MagnitudeSpectrogram,
    StftParams,
    frame_signal,
    make_window,
    stft_magnitude,
)
from .validation import as_waveform, check_positive, check_sample_rate

ALPHA_MIN = 0.5
ALPHA_MAX = 2.0

#: refinement passes per frame; exposed everywhere as ``iterations``
DEFAULT_ITERATIONS = 10


@dataclass(frozen=True)
class TsmRate:
    """Speed factor: >1 speeds speech up, <1 slows it down."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not np.isfinite(a) or not ALPHA_MIN <= a <= ALPHA_MAX:
            raise OutOfRange(
                f"speed factor must be in [{ALPHA_MIN}, {ALPHA_MAX}], got {self.alpha}"
            )
        object.__setattr__(self, "alpha", a)


def compute_rate(analysis_hop_ms: float, synthesis_hop_ms: float) -> TsmRate:
    """Speed factor from the two hop sizes: alpha = analysis / synthesis."""
    check_positive(analysis_hop_ms, "analysis_hop_ms")
    check_positive(synthesis_hop_ms, "synthesis_hop_ms")
    return TsmRate(analysis_hop_ms / synthesis_hop_ms)


def expected_length(input_len: int, rate: TsmRate) -> int:
    """Output sample count implied by the speed factor: round(n / alpha)."""
    if isinstance(rate, (int, float)):
        rate = TsmRate(rate)
    if input_len < 0:
        raise ValueError(f"input_len must be >= 0, got {input_len}")
    return int(round(input_len / rate.alpha))


@dataclass
class RtisiState:
    """Mutable synthesis state: finalized chunks plus the live overlap region."""

    committed: list
    partial_ola: np.ndarray
    window_sum: np.ndarray
    frame_cursor: int
    iterations: int


def _unit_phase(spec: np.ndarray, mag: np.ndarray) -> np.ndarray:
    return np.where(mag > 0, spec / np.maximum(mag, 1e-300), 1.0 + 0.0j)


def _refine_frame(
    state: RtisiState,
    target: np.ndarray,
    window: np.ndarray,
    fft_size: int,
    seed_phase: np.ndarray | None,
    error_trace: list | None,
) -> None:
    """Run the per-frame refinement loop and fold the result into the buffer."""
    L = len(window)
    base = state.partial_ola
    w2 = window * window
    den = state.window_sum + w2

    if seed_phase is not None:
        unit = np.exp(1j * seed_phase)
    elif np.any(base):
        # phase of the signal estimate accumulated so far over this span
        est = np.where(
            state.window_sum > 0, base / np.maximum(state.window_sum, OLA_FLOOR), 0.0
        )
        spec = np.fft.rfft(window * est, n=fft_size)
        unit = _unit_phase(spec, np.abs(spec))
    else:
        unit = np.ones(fft_size // 2 + 1, dtype=complex)

    errors = [] if error_trace is not None else None
    frame = np.zeros(L)
    for _ in range(state.iterations):
        frame = np.fft.irfft(target * unit, n=fft_size)[:L]
        est = (base + window * frame) / np.maximum(den, OLA_FLOOR)
        spec = np.fft.rfft(window * est, n=fft_size)
        mag = np.abs(spec)
        if errors is not None:
            errors.append(float(np.linalg.norm(target - mag)))
        unit = _unit_phase(spec, mag)

    if error_trace is not None:
        error_trace.append(np.asarray(errors))
    state.partial_ola = base + window * frame
    state.window_sum = den


def rtisi_invert(
    magspec: MagnitudeSpectrogram,
    synthesis_hop: int,
    iterations: int = DEFAULT_ITERATIONS,
    first_frame_phase: np.ndarray | None = None,
    error_trace: list | None = None,
) -> AudioBuffer:
    """Reconstruct a signal from STFT magnitudes, strictly frame by frame.

    Frame k is synthesized using only magnitudes with index <= k and the
    signal produced so far. The first frame starts from zero phase unless
    ``first_frame_phase`` (one value per bin) is given. After each frame the
    oldest ``synthesis_hop`` samples are committed with window-sum
    normalization; the remaining buffer is flushed the same way at the end,
    so the output has (num_frames - 1) * synthesis_hop + L samples.

    ``error_trace``, if a list, receives one array per frame with the
    per-iteration magnitude error, for convergence diagnostics.
    """
    mags = magspec.mags
    n_frames = mags.shape[0]
    if n_frames == 0:
        raise EmptyInput("magnitude spectrogram has no frames")
    if iterations < 1:
        raise BadIterations(f"iterations must be >= 1, got {iterations}")
    params = magspec.params
    L = params.frame_len_samples
    fft_size = params.fft_size
    if mags.shape[1] != fft_size // 2 + 1:
        raise ValueError(
            f"expected {fft_size // 2 + 1} bins for fft_size {fft_size}, "
            f"got {mags.shape[1]}"
        )
    if not 0 < synthesis_hop <= L:
        raise ValueError(f"synthesis_hop must be in (0, {L}], got {synthesis_hop}")

    window = make_window(params.window_kind, L)
    state = RtisiState(
        committed=[],
        partial_ola=np.zeros(L),
        window_sum=np.zeros(L),
        frame_cursor=0,
        iterations=iterations,
    )
    hop = synthesis_hop
    for k in range(n_frames):
        target = np.asarray(mags[k], dtype=np.float64)
        seed = first_frame_phase if k == 0 else None
        _refine_frame(state, target, window, fft_size, seed, error_trace)
        chunk = state.partial_ola[:hop] / np.maximum(state.window_sum[:hop], OLA_FLOOR)
        state.committed.append(chunk)
        state.partial_ola = np.concatenate([state.partial_ola[hop:], np.zeros(hop)])
        state.window_sum = np.concatenate([state.window_sum[hop:], np.zeros(hop)])
        state.frame_cursor += 1

    tail = state.partial_ola[: L - hop] / np.maximum(
        state.window_sum[: L - hop], OLA_FLOOR
    )
    return AudioBuffer(np.concatenate(state.committed + [tail]), magspec.sample_rate)


def time_scale(
    audio: AudioBuffer,
    rate: TsmRate,
    params: StftParams,
    iterations: int = DEFAULT_ITERATIONS,
) -> AudioBuffer:
    """Change speech rate by the given factor without altering pitch.

    Frames are taken at ``round(alpha * synthesis_hop)`` and resynthesized at
    the synthesis hop from magnitudes alone; the first frame's measured phase
    seeds the inversion so that alpha = 1.0 reproduces coherent input nearly
    exactly. If the reconstruction overshoots full scale it is rescaled to a
    0.99 peak.
    """
    if isinstance(rate, (int, float)):
        rate = TsmRate(rate)
    L = params.frame_len_samples
    if len(audio) < L:
        raise SignalTooShort(f"need at least {L} samples, got {len(audio)}")
    synthesis_hop = params.synthesis_hop_samples
    analysis_hop = max(1, int(round(rate.alpha * synthesis_hop)))
    a_params = replace(params, analysis_hop_samples=analysis_hop)

    frames = frame_signal(audio, a_params)
    magspec = stft_magnitude(frames, params.fft_size)
    seed_phase = np.angle(np.fft.rfft(frames.frames[0], n=params.fft_size))
    out = rtisi_invert(magspec, synthesis_hop, iterations, first_frame_phase=seed_phase)

    peak = float(np.max(np.abs(out.samples))) if len(out) else 0.0
    if peak > 1.0:
        out = AudioBuffer(out.samples * (0.99 / peak), out.sample_rate)
    return out


def spectral_convergence(target: MagnitudeSpectrogram, audio: AudioBuffer) -> float:
    """Relative Frobenius distance between the audio's STFT magnitude and a target.

    The audio is analyzed at the target's synthesis hop, frame length, window,
    and FFT size; it must be long enough to produce the target's frame count.
    """
    params = target.params
    hop = params.synthesis_hop_samples
    L = params.frame_len_samples
    needed = (target.num_frames - 1) * hop + L
    if len(audio) < needed:
        raise LengthMismatch(
            f"audio has {len(audio)} samples, need {needed} for "
            f"{target.num_frames} frames at hop {hop}"
        )
    frames = frame_signal(audio, replace(params, analysis_hop_samples=hop))
    mags = stft_magnitude(frames, params.fft_size).mags[: target.num_frames]
    denom = float(np.linalg.norm(target.mags))
    num = float(np.linalg.norm(mags - target.mags))
    if denom == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return num / denom


class TimeScaleModifier(TransformerMixin, BaseEstimator):
    """Stateless transformer applying time-scale modification to one waveform.

    ``transform`` maps a 1-D sample array to the rate-modified array, so it
    chains with the feature extractors in an sklearn pipeline.

    Parameters
    ----------
    alpha : float
        Speed factor in [0.5, 2.0]; 1.0 is a no-op rate.
    sample_rate : int
        Sample rate the millisecond settings are converted at.
    frame_len_ms, synthesis_hop_ms : float
        Analysis/synthesis frame geometry.
    fft_size : int or None
        None picks the next power of two at or above the frame length.
    iterations : int
        Phase refinement passes per frame.
    """

    def __init__(
        self,
        alpha: float = 1.0,
        sample_rate: int = 16000,
        frame_len_ms: float = 25.0,
        synthesis_hop_ms: float = 10.0,
        fft_size: int | None = None,
        iterations: int = DEFAULT_ITERATIONS,
    ):
        self.alpha = alpha
        self.sample_rate = sample_rate
        self.frame_len_ms = frame_len_ms
        self.synthesis_hop_ms = synthesis_hop_ms
        self.fft_size = fft_size
        self.iterations = iterations

    def _stft_params(self) -> StftParams:
        return StftParams.from_ms(
            check_sample_rate(self.sample_rate),
            frame_len_ms=self.frame_len_ms,
            synthesis_hop_ms=self.synthesis_hop_ms,
            fft_size=self.fft_size,
        )

    def fit(self, X=None, y=None):
        TsmRate(self.alpha)
        self._stft_params()
        return self

    def transform(self, X) -> np.ndarray:
        samples = as_waveform(X, "X")
        buf = AudioBuffer(samples, self.sample_rate)
        out = time_scale(buf, TsmRate(self.alpha), self._stft_params(), self.iterations)
        return out.samples
