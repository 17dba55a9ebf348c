"""Dataset-level augmentation: class balancing via speed perturbation,
additive noise at a target SNR, and reverberation by convolution.

The balance planner assigns a set of speed factors to every utterance of one
class (by default the rarest), so that class ends up with
``original * (len(rates) + 1)`` utterances once the originals are kept and
one modified copy per rate is generated.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sp_signal
from sklearn.base import BaseEstimator, TransformerMixin

from .audio_io import AudioBuffer, UtteranceRecord, read_wav, write_wav
from .errors import (
    EmptyManifest,
    EmptyRir,
    InvalidRates,
    SampleRateMismatch,
    SilentNoise,
    SpeechAugError,
    UnknownLabel,
)
from .stft import StftParams
from .tsm import DEFAULT_ITERATIONS, TsmRate, time_scale
from .validation import as_waveform, check_sample_rate


def format_rate(alpha: float) -> str:
    """Compact text form of a speed factor, used in generated file names."""
    return f"{alpha:g}"


@dataclass(frozen=True)
class Assignment:
    """One source utterance and the speed factors to generate for it."""

    record: UtteranceRecord
    rates: tuple


@dataclass(frozen=True)
class MixSpec:
    """A noise source paired with the SNR it should be mixed at."""

    snr_db: float
    noise_source: UtteranceRecord

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite, got {self.snr_db}")


@dataclass(frozen=True)
class BalancePlan:
    """Per-record rate assignments targeting one class."""

    assignments: tuple
    target_class: str

    def planned_counts(self) -> dict:
        """Per-class utterance counts after executing the plan."""
        counts = Counter()
        for item in self.assignments:
            counts[item.record.label] += 1 + len(item.rates)
        return dict(counts)


def class_histogram(manifest) -> dict:
    """Exact per-label utterance counts."""
    records = list(manifest)
    if not records:
        raise EmptyManifest("manifest has no records")
    return dict(Counter(r.label for r in records))


def _check_rates(rates) -> tuple:
    checked = tuple(r if isinstance(r, TsmRate) else TsmRate(float(r)) for r in rates)
    if not checked:
        raise InvalidRates("rate list is empty")
    alphas = [r.alpha for r in checked]
    if any(a == 1.0 for a in alphas):
        raise InvalidRates("rate 1.0 duplicates the original and is not allowed")
    if len(set(alphas)) != len(alphas):
        raise InvalidRates(f"duplicate rates in {alphas}")
    return checked


def build_balance_plan(manifest, rates, target_label: str | None = None) -> BalancePlan:
    """Assign every utterance of the target class all of the given rates.

    With ``target_label=None`` the class with the fewest utterances is chosen
    (ties broken by label order). Other classes are carried through with no
    rates, so executing the plan returns them unchanged.
    """
    records = list(manifest)
    histogram = class_histogram(records)
    checked = _check_rates(rates)
    if target_label is None:
        target = min(sorted(histogram), key=histogram.get)
    else:
        if target_label not in histogram:
            raise UnknownLabel(f"label {target_label!r} not present in manifest")
        target = target_label
    assignments = tuple(
        Assignment(record, checked if record.label == target else ())
        for record in records
    )
    return BalancePlan(assignments, target)


def execute_plan(
    plan: BalancePlan,
    tsm_params: StftParams | None,
    out_dir,
    iterations: int = DEFAULT_ITERATIONS,
    jobs: int = 1,
):
    """Generate the rate-modified copies and return the expanded manifest.

    Copies are written to ``out_dir`` as ``<utt_id>_sp<alpha>.wav`` with the
    source label. With ``tsm_params=None`` the 25 ms / 10 ms geometry is
    derived per file at its own sample rate. Per-file failures are collected
    rather than aborting the batch.

    Returns ``(records, failures)``: the original records in manifest order
    followed by the generated ones sorted by source utterance id then rate,
    and a list of ``(record, alpha, exception)`` for files that failed.
    """
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)

    work = [
        (item.record, rate)
        for item in plan.assignments
        for rate in item.rates
    ]
    work.sort(key=lambda pair: (pair[0].utt_id, pair[1].alpha))

    def run_one(pair):
        record, rate = pair
        audio = read_wav(record.path)
        params = tsm_params
        if params is None:
            params = StftParams.from_ms(audio.sample_rate)
        modified = time_scale(audio, rate, params, iterations)
        new_id = f"{record.utt_id}_sp{format_rate(rate.alpha)}"
        target = out_path / f"{new_id}.wav"
        write_wav(target, modified)
        return UtteranceRecord(new_id, str(target), record.label)

    generated = []
    failures = []
    if jobs > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_guarded(run_one), work))
    else:
        outcomes = [_guarded(run_one)(pair) for pair in work]
    for pair, outcome in zip(work, outcomes):
        if isinstance(outcome, Exception):
            failures.append((pair[0], pair[1].alpha, outcome))
        else:
            generated.append(outcome)

    records = [item.record for item in plan.assignments] + generated
    return records, failures


def _guarded(fn):
    def wrapper(arg):
        try:
            return fn(arg)
        except (SpeechAugError, OSError) as exc:
            return exc

    return wrapper


def mix_noise(clean: AudioBuffer, noise: AudioBuffer, snr_db: float) -> AudioBuffer:
    """Add noise to a signal at the requested SNR.

    The noise is looped or truncated to the clean length, then scaled so that
    20*log10(rms(clean) / rms(scaled noise)) equals ``snr_db``.
    """
    if clean.sample_rate != noise.sample_rate:
        raise SampleRateMismatch(
            f"clean at {clean.sample_rate} Hz, noise at {noise.sample_rate} Hz"
        )
    if len(noise) == 0 or not np.any(noise.samples):
        raise SilentNoise("noise has zero RMS")
    segment = np.resize(noise.samples, len(clean))
    rms_noise = float(np.sqrt(np.mean(segment**2)))
    if rms_noise == 0.0:
        raise SilentNoise("noise segment has zero RMS")
    rms_clean = float(np.sqrt(np.mean(clean.samples**2)))
    gain = rms_clean / (rms_noise * 10.0 ** (snr_db / 20.0))
    return AudioBuffer(clean.samples + gain * segment, clean.sample_rate)


def apply_reverb(dry: AudioBuffer, rir: AudioBuffer, match_peak: bool = True) -> AudioBuffer:
    """Convolve with a room impulse response, keeping the dry duration.

    The full convolution is truncated to the dry length; with ``match_peak``
    the result is rescaled to the dry signal's peak so augmented copies stay
    at a comparable level.
    """
    if dry.sample_rate != rir.sample_rate:
        raise SampleRateMismatch(
            f"dry at {dry.sample_rate} Hz, impulse response at {rir.sample_rate} Hz"
        )
    if len(rir) == 0:
        raise EmptyRir("impulse response has no samples")
    wet = sp_signal.convolve(dry.samples, rir.samples, mode="full")[: len(dry)]
    if match_peak:
        dry_peak = float(np.max(np.abs(dry.samples))) if len(dry) else 0.0
        wet_peak = float(np.max(np.abs(wet))) if len(wet) else 0.0
        if dry_peak > 0 and wet_peak > 0:
            wet = wet * (dry_peak / wet_peak)
    return AudioBuffer(wet, dry.sample_rate)


class NoiseMixer(TransformerMixin, BaseEstimator):
    """Transformer adding a fixed noise source to a waveform at a fixed SNR."""

    def __init__(self, noise, snr_db: float = 10.0, sample_rate: int = 16000):
        self.noise = noise
        self.snr_db = snr_db
        self.sample_rate = sample_rate

    def fit(self, X=None, y=None):
        check_sample_rate(self.sample_rate)
        return self

    def transform(self, X) -> np.ndarray:
        rate = check_sample_rate(self.sample_rate)
        clean = AudioBuffer(as_waveform(X, "X"), rate)
        noise = AudioBuffer(as_waveform(self.noise, "noise"), rate)
        return mix_noise(clean, noise, self.snr_db).samples


class Reverberator(TransformerMixin, BaseEstimator):
    """Transformer convolving a waveform with a fixed impulse response."""

    def __init__(self, rir, sample_rate: int = 16000, match_peak: bool = True):
        self.rir = rir
        self.sample_rate = sample_rate
        self.match_peak = match_peak

    def fit(self, X=None, y=None):
        check_sample_rate(self.sample_rate)
        return self

    def transform(self, X) -> np.ndarray:
        rate = check_sample_rate(self.sample_rate)
        dry = AudioBuffer(as_waveform(X, "X"), rate)
        rir = AudioBuffer(as_waveform(self.rir, "rir"), rate)
        return apply_reverb(dry, rir, self.match_peak).samples


class BalancePlanner(BaseEstimator):
    """Estimator that learns which class to expand from a manifest.

    ``fit`` takes a list of utterance records and exposes the chosen class,
    the plan, and before/after histograms as fitted attributes.
    """

    def __init__(self, rates=(0.8, 0.9, 1.1, 1.2), target_label: str | None = None):
        self.rates = rates
        self.target_label = target_label

    def fit(self, X, y=None):
        records = list(X)
        self.counts_before_ = class_histogram(records)
        self.plan_ = build_balance_plan(records, self.rates, self.target_label)
        self.target_class_ = self.plan_.target_class
        self.counts_after_ = self.plan_.planned_counts()
        return self
