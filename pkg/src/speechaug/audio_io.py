"""Reading and writing 16-bit mono PCM WAV files and TSV utterance manifests.

The canonical on-disk format is 16 kHz mono 16-bit PCM; other sample rates
are accepted on read and carried through unchanged. Manifests are UTF-8 TSV
with one ``utt_id<TAB>path<TAB>label`` record per line.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicateUttId,
    IoFailure,
    MalformedHeader,
    MalformedLine,
    UnsupportedFormat,
)
from .validation import as_waveform, check_sample_rate

_PCM_SCALE = 32768.0


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio: float64 samples (nominally in [-1, 1]) plus a sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        object.__setattr__(self, "samples", as_waveform(self.samples))
        object.__setattr__(self, "sample_rate", check_sample_rate(self.sample_rate))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class UtteranceRecord:
    """One manifest row: utterance id, audio path, class label."""

    utt_id: str
    path: str
    label: str


def _atomic_write_bytes(path, payload: bytes) -> None:
    """Write to a temp file in the target directory, then rename into place."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
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


def read_wav(path) -> AudioBuffer:
    """Read a RIFF/WAVE file containing 16-bit mono PCM.

    Samples are scaled to float by ``int16 / 32768``. Raises MalformedHeader
    for broken containers, UnsupportedFormat for valid WAV files that are not
    16-bit mono PCM, and IoFailure when the OS read fails.
    """
    try:
        with open(path, "rb") as handle:
            data = handle.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedHeader(f"{path}: missing RIFF/WAVE signature")

    fmt = None
    pcm = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body_start = pos + 8
        if body_start + chunk_size > len(data):
            raise MalformedHeader(f"{path}: truncated '{chunk_id!r}' chunk")
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise MalformedHeader(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", data, body_start)
        elif chunk_id == b"data":
            pcm = data[body_start:body_start + chunk_size]
        # chunks are word-aligned; odd sizes carry a pad byte
        pos = body_start + chunk_size + (chunk_size & 1)

    if fmt is None or pcm is None:
        raise MalformedHeader(f"{path}: missing fmt or data chunk")

    audio_format, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if audio_format != 1:
        raise UnsupportedFormat(f"{path}: not PCM (format tag {audio_format})")
    if channels != 1:
        raise UnsupportedFormat(f"{path}: expected mono, got {channels} channels")
    if bits != 16:
        raise UnsupportedFormat(f"{path}: expected 16-bit samples, got {bits}")
    if sample_rate <= 0:
        raise MalformedHeader(f"{path}: non-positive sample rate")
    if len(pcm) % 2:
        raise MalformedHeader(f"{path}: data chunk has odd byte count")

    raw = np.frombuffer(pcm, dtype="<i2")
    return AudioBuffer(raw.astype(np.float64) / _PCM_SCALE, sample_rate)


def write_wav(path, audio: AudioBuffer) -> None:
    """Write an AudioBuffer as 16-bit mono PCM.

    Samples outside [-1, 1] are clipped before quantization, so a round trip
    reproduces every in-range sample within 1/32768. The file is written
    atomically (temp file plus rename).
    """
    clipped = np.clip(audio.samples, -1.0, 1.0)
    ints = np.clip(np.rint(clipped * _PCM_SCALE), -32768, 32767).astype("<i2")
    pcm = ints.tobytes()

    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(pcm), b"WAVE",
        b"fmt ", 16, 1, 1,
        audio.sample_rate, audio.sample_rate * 2, 2, 16,
        b"data", len(pcm),
    )
    try:
        _atomic_write_bytes(path, header + pcm)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def parse_manifest(path) -> list[UtteranceRecord]:
    """Parse a TSV manifest into records, preserving file order.

    Blank lines and lines starting with '#' are skipped. Every other line
    must have exactly three non-empty tab-separated fields, and utterance
    ids must be unique.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    records = []
    seen = set()
    for lineno, line in enumerate(lines, start=1):
        stripped = line.rstrip("\r\n")
        if not stripped.strip() or stripped.lstrip().startswith("#"):
            continue
        fields = stripped.split("\t")
        if len(fields) != 3:
            raise MalformedLine(f"{path}:{lineno}: expected 3 fields, got {len(fields)}")
        utt_id, audio_path, label = fields
        if not utt_id or not audio_path or not label:
            raise MalformedLine(f"{path}:{lineno}: empty field")
        if utt_id in seen:
            raise DuplicateUttId(f"{path}:{lineno}: duplicate utt_id {utt_id!r}")
        seen.add(utt_id)
        records.append(UtteranceRecord(utt_id, audio_path, label))
    return records


def write_manifest(path, records) -> None:
    """Write records as a TSV manifest (atomically)."""
    lines = [f"{r.utt_id}\t{r.path}\t{r.label}\n" for r in records]
    try:
        _atomic_write_bytes(path, "".join(lines).encode("utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
