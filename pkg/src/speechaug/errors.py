"""Exception types raised across the package.

Argument and precondition violations inherit from ValueError so callers
that only know the standard hierarchy still behave sensibly.
"""


class SpeechAugError(Exception):
    """Base class for all errors raised by this package."""


# --- audio file and manifest I/O ---

class IoFailure(SpeechAugError):
    """Underlying OS-level read or write failed."""


class MalformedHeader(SpeechAugError):
    """File is not a well-formed RIFF/WAVE container."""


class UnsupportedFormat(SpeechAugError):
    """WAV file is valid but not 16-bit mono PCM."""


class MalformedLine(SpeechAugError, ValueError):
    """Manifest line does not have exactly three non-empty TSV fields."""


class DuplicateUttId(SpeechAugError, ValueError):
    """Manifest contains the same utterance id more than once."""


# --- framing and spectrogram machinery ---

class InvalidLength(SpeechAugError, ValueError):
    """Window length too short to evaluate the window formula."""


class SignalTooShort(SpeechAugError, ValueError):
    """Signal shorter than one analysis frame."""


class FftSizeTooSmall(SpeechAugError, ValueError):
    """FFT size smaller than the frame length."""


class EmptyInput(SpeechAugError, ValueError):
    """Operation requires at least one frame."""


# --- time-scale modification ---

class OutOfRange(SpeechAugError, ValueError):
    """Speed factor outside the supported [0.5, 2.0] range."""


class BadIterations(SpeechAugError, ValueError):
    """Phase refinement iteration count below one."""


class LengthMismatch(SpeechAugError, ValueError):
    """Paired inputs disagree on frame or element count."""


# --- feature extraction ---

class InvalidConfig(SpeechAugError, ValueError):
    """Feature configuration violates its own constraints."""


# --- dataset augmentation ---

class EmptyManifest(SpeechAugError, ValueError):
    """Operation needs a non-empty record list."""


class UnknownLabel(SpeechAugError, ValueError):
    """Requested class label does not occur in the manifest."""


class InvalidRates(SpeechAugError, ValueError):
    """Rate list is empty, contains 1.0, or contains duplicates."""


class SampleRateMismatch(SpeechAugError, ValueError):
    """Signals being combined have different sample rates."""


class SilentNoise(SpeechAugError, ValueError):
    """Noise source has zero RMS and cannot be scaled to a target SNR."""


class EmptyRir(SpeechAugError, ValueError):
    """Impulse response has no samples."""
