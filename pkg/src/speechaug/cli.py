"""Batch command-line interface.

Subcommands: tsm, balance-plan, augment, featurize, vad, mix, reverb.
Exit codes: 0 on success, 1 on processing errors, 2 on flag errors. All flag
values are validated before any file is written, and every output file is
written atomically, so a failed run leaves no partial artifacts.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .audio_io import (
    AudioBuffer,
    _atomic_write_bytes,
    parse_manifest,
    read_wav,
    write_manifest,
    write_wav,
)
from .augment import (
    apply_reverb,
    build_balance_plan,
    class_histogram,
    execute_plan,
    format_rate,
    mix_noise,
)
from .errors import SpeechAugError
from .features import (
    MfccConfig,
    apply_vad,
    compute_mfcc,
    energy_vad,
    sliding_mean_normalize,
    write_features,
)
from .stft import StftParams
from .tsm import TsmRate, compute_rate, time_scale

#: the synthesis step is fixed at 10 ms on the command line; the speed factor
#: is controlled by the analysis step alone
SYNTHESIS_HOP_MS = 10.0


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _parse_rates(text: str):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad rate list {text!r}: {exc}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="speechaug",
        description="Speed perturbation, dataset balancing, noise/reverb "
        "augmentation, and MFCC/VAD feature extraction for speech corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tsm", help="time-scale one WAV file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--alpha", type=float, help="speed factor in [0.5, 2.0]")
    group.add_argument(
        "--analysis-hop-ms",
        type=float,
        help=f"analysis step in ms against the fixed {SYNTHESIS_HOP_MS:g} ms synthesis step",
    )
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--frame-len-ms", type=float, default=25.0)
    p.add_argument("input")
    p.add_argument("output")

    p = sub.add_parser("balance-plan", help="report the class-balancing plan")
    p.add_argument("manifest")
    p.add_argument("--rates", type=_parse_rates, required=True,
                   help="comma-separated speed factors, e.g. 0.8,0.9,1.1,1.2")
    p.add_argument("--target-class", default=None,
                   help="class to expand (default: the rarest class)")

    p = sub.add_parser("augment", help="execute the balancing plan")
    p.add_argument("manifest")
    p.add_argument("out_dir")
    p.add_argument("--rates", type=_parse_rates, required=True)
    p.add_argument("--target-class", default=None)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("featurize", help="extract features for a manifest")
    p.add_argument("manifest")
    p.add_argument("out_dir")
    p.add_argument("--no-vad", action="store_true")
    p.add_argument("--no-norm", action="store_true")
    p.add_argument("--window-ms", type=float, default=3000.0)
    p.add_argument("--threshold-db", type=float, default=-15.0)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("vad", help="report speech activity for one WAV file")
    p.add_argument("input")
    p.add_argument("--frame-len-ms", type=float, default=25.0)
    p.add_argument("--hop-ms", type=float, default=10.0)
    p.add_argument("--threshold-db", type=float, default=-15.0)
    p.add_argument("--out", default=None, help="write the 0/1 mask to this file")

    p = sub.add_parser("mix", help="add noise to one WAV file at a target SNR")
    p.add_argument("input")
    p.add_argument("noise")
    p.add_argument("output")
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="randomize the noise start offset deterministically")

    p = sub.add_parser("reverb", help="convolve one WAV file with an impulse response")
    p.add_argument("input")
    p.add_argument("rir")
    p.add_argument("output")

    return parser


def _cmd_tsm(args) -> int:
    try:
        if args.alpha is not None:
            rate = TsmRate(args.alpha)
        else:
            rate = compute_rate(args.analysis_hop_ms, SYNTHESIS_HOP_MS)
        if args.iterations < 1:
            raise ValueError("--iterations must be >= 1")
        if args.frame_len_ms <= 0:
            raise ValueError("--frame-len-ms must be positive")
    except ValueError as exc:
        return _fail(str(exc), 2)
    try:
        audio = read_wav(args.input)
        params = StftParams.from_ms(
            audio.sample_rate,
            frame_len_ms=args.frame_len_ms,
            synthesis_hop_ms=SYNTHESIS_HOP_MS,
        )
        out = time_scale(audio, rate, params, args.iterations)
        write_wav(args.output, out)
    except (SpeechAugError, OSError, ValueError) as exc:
        return _fail(str(exc), 1)
    print(f"alpha={format_rate(rate.alpha)} in={len(audio)} out={len(out)}")
    return 0


def _validated_rates(values):
    rates = [TsmRate(v) for v in values]
    if not rates:
        raise ValueError("rate list is empty")
    alphas = [r.alpha for r in rates]
    if 1.0 in alphas:
        raise ValueError("rate 1.0 duplicates the original and is not allowed")
    if len(set(alphas)) != len(alphas):
        raise ValueError("duplicate rates")
    return rates


def _print_plan(before: dict, after: dict, target: str) -> None:
    print(f"target={target}")
    for label in sorted(before):
        print(f"{label}\t{before[label]}\t->\t{after.get(label, before[label])}")


def _cmd_balance_plan(args) -> int:
    try:
        rates = _validated_rates(args.rates)
    except ValueError as exc:
        return _fail(str(exc), 2)
    try:
        records = parse_manifest(args.manifest)
        plan = build_balance_plan(records, rates, args.target_class)
        before = class_histogram(records)
    except (SpeechAugError, OSError) as exc:
        return _fail(str(exc), 1)
    _print_plan(before, plan.planned_counts(), plan.target_class)
    return 0


def _cmd_augment(args) -> int:
    try:
        rates = _validated_rates(args.rates)
        if args.jobs < 1:
            raise ValueError("--jobs must be >= 1")
        if args.iterations < 1:
            raise ValueError("--iterations must be >= 1")
    except ValueError as exc:
        return _fail(str(exc), 2)
    try:
        records = parse_manifest(args.manifest)
        plan = build_balance_plan(records, rates, args.target_class)
        before = class_histogram(records)
        out_records, failures = execute_plan(
            plan, None, args.out_dir, iterations=args.iterations, jobs=args.jobs
        )
        write_manifest(Path(args.out_dir) / "augmented.tsv", out_records)
    except (SpeechAugError, OSError) as exc:
        return _fail(str(exc), 1)
    for record, alpha, exc in failures:
        print(f"failed: {record.utt_id} rate={format_rate(alpha)}: {exc}", file=sys.stderr)
    _print_plan(before, class_histogram(out_records), plan.target_class)
    return 1 if failures else 0


def _featurize_one(record, args):
    audio = read_wav(record.path)
    config = MfccConfig(high_freq_hz=min(7600.0, audio.sample_rate / 2.0))
    feats = compute_mfcc(audio, config)
    if not args.no_vad:
        mask = energy_vad(audio, threshold_db=args.threshold_db)
        feats = apply_vad(feats, mask)
    if not args.no_norm:
        feats = sliding_mean_normalize(feats, args.window_ms)
    write_features(Path(args.out_dir) / f"{record.utt_id}.feat", feats)
    return feats.num_frames


def _cmd_featurize(args) -> int:
    try:
        if args.window_ms <= 0:
            raise ValueError("--window-ms must be positive")
        if args.jobs < 1:
            raise ValueError("--jobs must be >= 1")
    except ValueError as exc:
        return _fail(str(exc), 2)
    try:
        records = parse_manifest(args.manifest)
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    except (SpeechAugError, OSError) as exc:
        return _fail(str(exc), 1)

    def guarded(record):
        try:
            return _featurize_one(record, args)
        except (SpeechAugError, OSError) as exc:
            return exc

    if args.jobs > 1 and len(records) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(guarded, records))
    else:
        outcomes = [guarded(r) for r in records]

    had_failure = False
    for record, outcome in zip(records, outcomes):
        if isinstance(outcome, Exception):
            had_failure = True
            print(f"failed: {record.utt_id}: {outcome}", file=sys.stderr)
            continue
        if outcome == 0:
            print(f"warning: {record.utt_id}: no speech frames retained", file=sys.stderr)
        print(f"{record.utt_id} frames={outcome}")
    return 1 if had_failure else 0


def _cmd_vad(args) -> int:
    try:
        audio = read_wav(args.input)
        mask = energy_vad(audio, args.frame_len_ms, args.hop_ms, args.threshold_db)
        if args.out is not None:
            lines = "".join(f"{int(keep)}\n" for keep in mask.keep)
            _atomic_write_bytes(args.out, lines.encode("ascii"))
    except (SpeechAugError, OSError) as exc:
        return _fail(str(exc), 1)
    print(f"kept={int(np.sum(mask.keep))} total={len(mask)}")
    return 0


def _cmd_mix(args) -> int:
    try:
        clean = read_wav(args.input)
        noise = read_wav(args.noise)
        offset = 0
        if args.seed is not None and len(noise) > len(clean):
            rng = np.random.default_rng(args.seed)
            offset = int(rng.integers(0, len(noise) - len(clean) + 1))
        if offset:
            noise = AudioBuffer(noise.samples[offset:], noise.sample_rate)
        mixed = mix_noise(clean, noise, args.snr)
        write_wav(args.output, mixed)
    except (SpeechAugError, OSError) as exc:
        return _fail(str(exc), 1)
    print(f"snr_db={args.snr:g} offset={offset} out={len(mixed)}")
    return 0


def _cmd_reverb(args) -> int:
    try:
        dry = read_wav(args.input)
        rir = read_wav(args.rir)
        wet = apply_reverb(dry, rir)
        write_wav(args.output, wet)
    except (SpeechAugError, OSError) as exc:
        return _fail(str(exc), 1)
    print(f"out={len(wet)}")
    return 0


_COMMANDS = {
    "tsm": _cmd_tsm,
    "balance-plan": _cmd_balance_plan,
    "augment": _cmd_augment,
    "featurize": _cmd_featurize,
    "vad": _cmd_vad,
    "mix": _cmd_mix,
    "reverb": _cmd_reverb,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
