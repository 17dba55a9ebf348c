import numpy as np
import pytest

from speechaug import AudioBuffer, write_wav

FS = 16000


def tone(freq_hz=440.0, duration_s=1.0, amplitude=0.5, phase=0.0, fs=FS):
    t = np.arange(int(round(duration_s * fs))) / fs
    return amplitude * np.sin(2.0 * np.pi * freq_hz * t + phase)


def speechy_noise(rng, duration_s=1.0, fs=FS, peak=0.4):
    """Low-passed noise with a slow envelope, a stand-in for voiced speech."""
    n = int(round(duration_s * fs))
    spec = np.fft.rfft(rng.standard_normal(n))
    spec *= np.exp(-np.fft.rfftfreq(n, 1.0 / fs) / 1500.0)
    x = np.fft.irfft(spec, n=n)
    t = np.arange(n) / fs
    x *= 1.0 + 0.8 * np.sin(2.0 * np.pi * 3.0 * t)
    return peak * x / np.max(np.abs(x))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def wav_factory(tmp_path):
    """Write arbitrary sample arrays to WAV files under the test tmp dir."""

    counter = [0]

    def make(samples, fs=FS, name=None):
        counter[0] += 1
        path = tmp_path / (name or f"clip{counter[0]:03d}.wav")
        write_wav(path, AudioBuffer(np.asarray(samples, dtype=np.float64), fs))
        return path

    return make
