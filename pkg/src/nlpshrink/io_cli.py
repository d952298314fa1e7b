"""File input/output, block segmentation and the command-line interface."""

import argparse
import json
import math
import os
import sys
import time
import wave
from dataclasses import dataclass

import numpy as np

from . import bench
from .ebayes import DegenerateNoiseError, FitError
from .hyperspec import GAMMA_FAMILIES, METHOD_NAMES, SLAB_FAMILIES, TAU_FAMILIES
from .posterior import PipelineError, denoise
from .priors import NumericalError
from .transform import SUPPORTED_FILTERS

__all__ = [
    "DataError",
    "AudioBuffer",
    "BlockPlan",
    "read_signal_csv",
    "write_signal_csv",
    "read_wav",
    "write_wav",
    "process_blocks",
    "cli_main",
]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
PCM_SCALE = 32768.0


class DataError(ValueError):
    """Malformed or unsupported input data."""


# --------------------------------------------------------------------- CSV


def read_signal_csv(path):
    """Read one value per line, or an ``index,value`` table with a header row."""
    values = []
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    first = True
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) > 2:
            raise DataError(f"{path}:{lineno}: expected 1 or 2 fields, got {len(fields)}")
        try:
            values.append(float(fields[-1]))
        except ValueError:
            if first and not _is_number(fields[0]):
                first = False
                continue  # header row
            raise DataError(f"{path}:{lineno}: cannot parse {fields[-1]!r} as a number") from None
        first = False
    if not values:
        raise DataError(f"{path}: no data")
    out = np.array(values)
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise DataError(f"{path}: non-finite value at data row {bad + 1}")
    return out


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_signal_csv(path, signal):
    """One value per line at 17 significant digits, so reading back is exact."""
    x = np.asarray(signal, dtype=float).ravel()
    with open(path, "w") as fh:
        fh.writelines(f"{v:.17g}\n" for v in x)


# --------------------------------------------------------------------- WAV


@dataclass
class AudioBuffer:
    """Audio samples normalised to [-1, 1], one array per channel."""

    channels: list
    sample_rate: int
    bit_depth: int = 16

    def __post_init__(self):
        self.channels = [np.asarray(c, dtype=float) for c in self.channels]
        if not self.channels:
            raise ValueError("an audio buffer needs at least one channel")
        if len({c.size for c in self.channels}) != 1:
            raise ValueError("channels differ in length")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")

    @property
    def nframes(self):
        return self.channels[0].size


_WAVE_FORMATS = {1: "PCM", 3: "IEEE float", 6: "A-law", 7: "mu-law", 0xFFFE: "extensible"}


def _wav_format_tag(path):
    with open(path, "rb") as fh:
        head = fh.read(12)
        if head[:4] != b"RIFF" or head[8:12] != b"WAVE":
            return None
        while True:
            chunk = fh.read(8)
            if len(chunk) < 8:
                return None
            cid, size = chunk[:4], int.from_bytes(chunk[4:], "little")
            if cid == b"fmt ":
                return int.from_bytes(fh.read(2), "little")
            fh.seek(size + (size & 1), 1)


def read_wav(path):
    """Read a 16-bit PCM WAV file; samples are scaled by 1/32768."""
    tag = _wav_format_tag(path)
    if tag is None:
        raise DataError(f"{path}: not a RIFF/WAVE file")
    if tag != 1:
        name = _WAVE_FORMATS.get(tag, f"format tag {tag:#x}")
        raise DataError(f"{path}: unsupported WAV encoding {name}; only 16-bit PCM is supported")
    try:
        with wave.open(os.fspath(path), "rb") as w:
            width = w.getsampwidth()
            nch = w.getnchannels()
            rate = w.getframerate()
            frames = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    if width != 2:
        raise DataError(f"{path}: unsupported WAV encoding {8 * width}-bit PCM; "
                        "only 16-bit PCM is supported")
    data = np.frombuffer(frames, dtype="<i2").reshape(-1, nch)
    return AudioBuffer([data[:, c] / PCM_SCALE for c in range(nch)], rate, 16)


def write_wav(path, audio):
    """Write 16-bit PCM; samples are rounded and clamped to the int16 range."""
    stacked = np.column_stack(audio.channels)
    q = np.clip(np.rint(stacked * PCM_SCALE), -32768, 32767).astype("<i2")
    with wave.open(os.fspath(path), "wb") as w:
        w.setnchannels(len(audio.channels))
        w.setsampwidth(2)
        w.setframerate(int(audio.sample_rate))
        w.writeframes(q.tobytes())


# ------------------------------------------------------------------ blocks


@dataclass(frozen=True)
class BlockPlan:
    block_size: int = 4096
    overlap: int = 0
    window: str = "none"

    def __post_init__(self):
        b = self.block_size
        if b < 2 or b & (b - 1):
            raise ValueError(f"block size must be a power of two, got {b}")
        if not 0 <= self.overlap < b:
            raise ValueError(f"overlap must lie in [0, {b}), got {self.overlap}")
        if self.window not in ("none", "hann"):
            raise ValueError(f"window must be 'none' or 'hann', got {self.window!r}")
        if self.overlap > 0 and self.window != "hann":
            raise ValueError("overlapping blocks need window='hann'")

    @property
    def hop(self):
        return self.block_size - self.overlap


def hann_window(n):
    """Periodic Hann window ``sin^2(pi (k + 0.5) / n)``; strictly positive."""
    return np.sin(np.pi * (np.arange(n) + 0.5) / n) ** 2


def process_blocks(signal, plan, per_block):
    """Apply ``per_block`` to consecutive blocks and reassemble.

    Without overlap the blocks are disjoint; the last one is zero-padded to
    full length and truncated after processing. With overlap, blocks are
    placed every ``hop`` samples (the last one padded as needed) and
    combined by Hann-weighted overlap-add, divided by the summed window.
    """
    x = np.asarray(signal, dtype=float)
    n, b = x.size, plan.block_size
    if n < b:
        raise ValueError(f"signal length {n} is shorter than the block size {b}")
    hop = plan.hop
    nblocks = 1 + max(0, math.ceil((n - b) / hop))
    padded_len = (nblocks - 1) * hop + b
    xp = np.zeros(padded_len)
    xp[:n] = x
    if plan.overlap == 0:
        out = np.concatenate([np.asarray(per_block(xp[i * b:(i + 1) * b]), dtype=float)
                              for i in range(nblocks)])
        return out[:n]
    w = hann_window(b)
    acc = np.zeros(padded_len)
    wsum = np.zeros(padded_len)
    for i in range(nblocks):
        s = i * hop
        acc[s:s + b] += w * np.asarray(per_block(xp[s:s + b]), dtype=float)
        wsum[s:s + b] += w
    return (acc / wsum)[:n]


# --------------------------------------------------------------------- CLI


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _csv_list(cast=str):
    def parse(s):
        try:
            return [cast(v) for v in s.split(",") if v.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _build_parser():
    p = _Parser(prog="nlpshrink", description="Nonlocal-prior wavelet shrinkage.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    d = sub.add_parser("denoise", help="denoise a CSV or WAV signal")
    d.add_argument("--input", required=True)
    d.add_argument("--output", required=True)
    d.add_argument("--wavelet", choices=SUPPORTED_FILTERS,
                   help="default: sym6 for CSV, coif5 for WAV")
    d.add_argument("--slab", choices=SLAB_FAMILIES, default="mixture")
    d.add_argument("--gamma-spec", choices=GAMMA_FAMILIES, default="logit")
    d.add_argument("--tau-spec", choices=TAU_FAMILIES, default="polynom")
    d.add_argument("--block", type=int, help="block length (power of two)")
    d.add_argument("--overlap", type=int, default=0,
                   help="overlap in samples; >0 enables Hann overlap-add")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--starts", type=int, default=5)
    d.add_argument("--max-evals", type=int, default=2000)
    d.add_argument("--fit-json", help="write per-block fit reports here")

    s = sub.add_parser("simulate", help="run the simulation benchmark")
    s.add_argument("--functions", type=_csv_list(), default=list(bench.FUNCTION_NAMES))
    s.add_argument("--n", type=_csv_list(int), default=[1024])
    s.add_argument("--snr", type=_csv_list(float), default=[5.0])
    s.add_argument("--reps", type=int, default=10)
    s.add_argument("--methods", default="all",
                   help=f"comma list or 'all' (the 24 methods); '{bench.HARD_THRESHOLD}' "
                        "adds the hard-threshold baseline")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--starts", type=int, default=1)
    s.add_argument("--max-evals", type=int, default=1000)
    s.add_argument("--timing", action="store_true",
                   help="fill the seconds column (makes the CSV run-dependent)")
    s.add_argument("--out", required=True)

    c = sub.add_parser("compare", help="render the win-count table from a results CSV")
    c.add_argument("--in", dest="inp", required=True)
    c.add_argument("--out", required=True)
    return p


def _snr_value(v):
    return int(v) if float(v).is_integer() else v


def _cmd_denoise(args):
    ext = os.path.splitext(args.input)[1].lower()
    if ext not in (".csv", ".wav"):
        raise _UsageError(f"cannot infer format from extension {ext!r}; use .csv or .wav")
    out_ext = os.path.splitext(args.output)[1].lower()
    if out_ext != ext:
        raise _UsageError(f"output extension {out_ext!r} must match input {ext!r}")
    method = f"{args.slab}-{args.gamma_spec}-{args.tau_spec}"
    wavelet = args.wavelet or ("coif5" if ext == ".wav" else "sym6")
    if args.overlap and not args.block:
        raise _UsageError("--overlap requires --block")
    if args.block:
        try:
            plan = BlockPlan(args.block, args.overlap, "hann" if args.overlap else "none")
        except ValueError as exc:
            raise _UsageError(str(exc)) from None

    if ext == ".wav":
        audio = read_wav(args.input)
        if not args.block:
            plan = BlockPlan(4096)
        channels = audio.channels
    else:
        channels = [read_signal_csv(args.input)]
        if not args.block:
            n = channels[0].size
            if n < 2 or n & (n - 1):
                raise DataError(f"signal length {n} is not a power of two; "
                                "use --block to process it in blocks")
            plan = None

    reports = []

    def run(x, channel, counter=[0]):
        est, fit, _ = denoise(x, method, wavelet, starts=args.starts,
                              max_evals=args.max_evals, seed=args.seed, summaries=False)
        rep = {"channel": channel, "block": counter[0]}
        counter[0] += 1
        rep.update(fit.to_dict() if fit is not None else {"method": method, "fit": None})
        reports.append(rep)
        return est

    outputs = []
    for ch, x in enumerate(channels):
        if plan is None:
            outputs.append(run(x, ch))
        else:
            if x.size < plan.block_size:
                raise DataError(f"signal length {x.size} is shorter than block size "
                                f"{plan.block_size}")
            outputs.append(process_blocks(x, plan, lambda b, ch=ch: run(b, ch)))

    if ext == ".wav":
        write_wav(args.output, AudioBuffer(outputs, audio.sample_rate, 16))
    else:
        write_signal_csv(args.output, outputs[0])
    if args.fit_json:
        with open(args.fit_json, "w") as fh:
            json.dump({"input": args.input, "method": method, "wavelet": wavelet,
                       "seed": args.seed, "blocks": reports}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def _cmd_simulate(args):
    if args.methods.strip() == "all":
        methods = list(METHOD_NAMES)
    else:
        methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m != bench.HARD_THRESHOLD and m not in METHOD_NAMES:
            raise _UsageError(f"unknown method {m!r}")
    for f in args.functions:
        if f not in bench.FUNCTION_NAMES:
            raise _UsageError(f"unknown function {f!r}; choose from "
                              f"{', '.join(bench.FUNCTION_NAMES)}")
    try:
        plan = bench.ExperimentPlan(
            functions=tuple(args.functions), n_values=tuple(args.n),
            snr_values=tuple(_snr_value(v) for v in args.snr), replications=args.reps,
            methods=tuple(methods), seed=args.seed, starts=args.starts,
            max_evals=args.max_evals, timing=args.timing,
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    res = bench.run_experiment(plan)
    bench.write_results_csv(res.rows, args.out)
    if res.failures:
        print(f"{len(res.failures)} replication(s) failed", file=sys.stderr)
    if res.rows and not any(r["valid"] for r in res.rows):
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_compare(args):
    rows = bench.read_results_csv(args.inp)
    if not rows:
        raise DataError(f"{args.inp}: no result rows")
    methods, functions, counts = bench.count_matrix(rows)
    with open(args.out, "w") as fh:
        fh.write(bench.render_count_matrix(methods, functions, counts))
    return EXIT_OK


def cli_main(argv=None):
    """Run the command line; returns the process exit code.

    0 success, 1 usage error, 2 data error, 3 numerical failure.
    """
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"denoise": _cmd_denoise, "simulate": _cmd_simulate,
                   "compare": _cmd_compare}[args.command]
        t0 = time.perf_counter()
        code = handler(args)
        if os.environ.get("NLPSHRINK_VERBOSE"):
            print(f"{args.command} finished in {time.perf_counter() - t0:.2f}s", file=sys.stderr)
        return code
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except (DataError, DegenerateNoiseError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PipelineError as exc:
        if exc.stage in ("transform", "noise estimate"):
            print(f"data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (NumericalError, FitError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(cli_main())
