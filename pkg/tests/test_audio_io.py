import struct

import numpy as np
import pytest

from speechaug import AudioBuffer, UtteranceRecord, parse_manifest, read_wav, write_manifest, write_wav
from speechaug.errors import (
    DuplicateUttId,
    IoFailure,
    MalformedHeader,
    MalformedLine,
    UnsupportedFormat,
)


def _wav_bytes(pcm: bytes, fmt_tag=1, channels=1, rate=16000, bits=16) -> bytes:
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(pcm), b"WAVE",
        b"fmt ", 16, fmt_tag, channels,
        rate, rate * channels * bits // 8, channels * bits // 8, bits,
        b"data", len(pcm),
    )
    return header + pcm


class TestReadWav:
    def test_single_sample_scaling(self, tmp_path):
        path = tmp_path / "one.wav"
        path.write_bytes(_wav_bytes(struct.pack("<h", 16384)))
        buf = read_wav(path)
        assert buf.sample_rate == 16000
        assert buf.samples.tolist() == [0.5]

    def test_negative_full_scale(self, tmp_path):
        path = tmp_path / "neg.wav"
        path.write_bytes(_wav_bytes(struct.pack("<h", -32768)))
        assert read_wav(path).samples.tolist() == [-1.0]

    def test_one_second_of_zeros(self, tmp_path):
        path = tmp_path / "zeros.wav"
        path.write_bytes(_wav_bytes(b"\x00\x00" * 16000))
        buf = read_wav(path)
        assert len(buf) == 16000
        assert not np.any(buf.samples)

    def test_missing_riff_magic(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"JUNKJUNKJUNKJUNK")
        with pytest.raises(MalformedHeader):
            read_wav(path)

    def test_truncated_data_chunk(self, tmp_path):
        payload = _wav_bytes(struct.pack("<h", 1) * 10)
        path = tmp_path / "trunc.wav"
        path.write_bytes(payload[:-6])
        with pytest.raises(MalformedHeader):
            read_wav(path)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(fmt_tag=3), dict(channels=2), dict(bits=8)],
        ids=["non-pcm", "stereo", "8-bit"],
    )
    def test_unsupported_formats(self, tmp_path, kwargs):
        path = tmp_path / "bad.wav"
        path.write_bytes(_wav_bytes(b"\x00\x00\x00\x00", **kwargs))
        with pytest.raises(UnsupportedFormat):
            read_wav(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            read_wav(tmp_path / "nope.wav")


class TestWriteWav:
    def test_round_trip_within_quantization(self, tmp_path):
        path = tmp_path / "rt.wav"
        write_wav(path, AudioBuffer([0.5, -0.25], 16000))
        back = read_wav(path)
        assert np.max(np.abs(back.samples - [0.5, -0.25])) <= 1.0 / 32768

    def test_out_of_range_clipped(self, tmp_path):
        path = tmp_path / "clip.wav"
        write_wav(path, AudioBuffer([1.5], 16000))
        raw = path.read_bytes()
        (value,) = struct.unpack("<h", raw[-2:])
        assert value == 32767

    def test_empty_round_trip(self, tmp_path):
        path = tmp_path / "empty.wav"
        write_wav(path, AudioBuffer(np.zeros(0), 16000))
        assert len(read_wav(path)) == 0

    def test_random_round_trip_property(self, tmp_path, rng):
        for trial in range(20):
            samples = rng.uniform(-1, 1, size=rng.integers(1, 4000))
            path = tmp_path / f"p{trial}.wav"
            write_wav(path, AudioBuffer(samples, 16000))
            back = read_wav(path)
            assert len(back) == len(samples)
            assert np.max(np.abs(back.samples - samples)) <= 1.0 / 32768

    def test_preserves_sample_rate(self, tmp_path):
        path = tmp_path / "sr.wav"
        write_wav(path, AudioBuffer([0.0], 8000))
        assert read_wav(path).sample_rate == 8000


class TestAudioBuffer:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            AudioBuffer([0.0, np.nan], 16000)

    def test_rejects_stereo(self):
        with pytest.raises(ValueError):
            AudioBuffer(np.zeros((2, 10)), 16000)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            AudioBuffer([0.0], 0)


class TestManifest:
    def test_single_line(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text("u1\t/a.wav\tJOR\n", encoding="utf-8")
        records = parse_manifest(path)
        assert records == [UtteranceRecord("u1", "/a.wav", "JOR")]

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text("u1\t/a.wav\tJOR\nu1\t/b.wav\tEGY\n", encoding="utf-8")
        with pytest.raises(DuplicateUttId):
            parse_manifest(path)

    def test_comments_and_blanks_skipped_order_kept(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text(
            "u1\ta.wav\tJOR\n\n# comment\nu2\tb.wav\tEGY\nu3\tc.wav\tJOR\n",
            encoding="utf-8",
        )
        records = parse_manifest(path)
        assert [r.utt_id for r in records] == ["u1", "u2", "u3"]

    @pytest.mark.parametrize("line", ["u1\ta.wav", "u1\ta.wav\tJOR\textra", "u1\t\tJOR"])
    def test_malformed_lines(self, tmp_path, line):
        path = tmp_path / "m.tsv"
        path.write_text(line + "\n", encoding="utf-8")
        with pytest.raises(MalformedLine):
            parse_manifest(path)

    def test_write_then_parse_round_trip(self, tmp_path):
        records = [
            UtteranceRecord("u1", "a.wav", "JOR"),
            UtteranceRecord("u2", "b c.wav", "EGY"),
        ]
        path = tmp_path / "out.tsv"
        write_manifest(path, records)
        assert parse_manifest(path) == records

    def test_record_count_matches_content_lines(self, tmp_path, rng):
        lines = []
        expected = 0
        for i in range(30):
            if rng.random() < 0.2:
                lines.append("# note")
            elif rng.random() < 0.2:
                lines.append("")
            else:
                lines.append(f"u{i}\tf{i}.wav\tL{i % 3}")
                expected += 1
        path = tmp_path / "m.tsv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        assert len(parse_manifest(path)) == expected
