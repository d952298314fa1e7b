import json
import struct
import wave

import numpy as np
import pytest

from nlpshrink import io_cli
from nlpshrink.io_cli import (
    AudioBuffer,
    BlockPlan,
    DataError,
    cli_main,
    hann_window,
    process_blocks,
    read_signal_csv,
    read_wav,
    write_signal_csv,
    write_wav,
)


# ------------------------------------------------------------------ CSV

def test_csv_plain_values(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1\n2\n3\n")
    np.testing.assert_array_equal(read_signal_csv(p), [1.0, 2.0, 3.0])


def test_csv_index_value_with_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("index,value\n0,1.5\n1,-2e-3\n\n2,7\n")
    np.testing.assert_array_equal(read_signal_csv(p), [1.5, -2e-3, 7.0])


def test_csv_round_trip_is_exact(tmp_path, rng):
    x = rng.standard_normal(500) * 10.0 ** rng.integers(-300, 300, 500)
    p = tmp_path / "x.csv"
    write_signal_csv(p, x)
    assert np.max(np.abs(read_signal_csv(p) - x)) == 0.0


@pytest.mark.parametrize("text, match", [
    ("", "no data"),
    ("\n\n", "no data"),
    ("1\n2\nabc\n", ":3:"),
    ("1,2,3\n", ":1:"),
    ("value\n1\nnan\n", "non-finite"),
])
def test_csv_errors(tmp_path, text, match):
    p = tmp_path / "x.csv"
    p.write_text(text)
    with pytest.raises(DataError, match=match):
        read_signal_csv(p)


# ------------------------------------------------------------------ WAV

def _raw_wav(path, width, data, fmt_tag=1):
    nch = 1
    block = nch * width
    fmt = struct.pack("<HHIIHH", fmt_tag, nch, 8000, 8000 * block, block, 8 * width)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(data)) + data
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def test_wav_scaling(tmp_path):
    p = tmp_path / "a.wav"
    samples = np.array([0, 16384, -16384, 32767, -32768, 1, -1, 0], dtype="<i2")
    _raw_wav(p, 2, samples.tobytes())
    audio = read_wav(p)
    assert audio.sample_rate == 8000 and audio.bit_depth == 16
    np.testing.assert_array_equal(audio.channels[0][:3], [0.0, 0.5, -0.5])
    assert audio.channels[0][4] == -1.0


def test_wav_round_trip_stereo(tmp_path, rng):
    left = rng.uniform(-1, 1, 1000)
    right = rng.uniform(-1.2, 1.2, 1000)  # clamps
    p = tmp_path / "s.wav"
    write_wav(p, AudioBuffer([left, right], 44100))
    back = read_wav(p)
    assert len(back.channels) == 2 and back.nframes == 1000
    assert np.max(np.abs(back.channels[0] - left)) <= 1 / 32768
    assert back.channels[1].max() <= 32767 / 32768 and back.channels[1].min() >= -1.0


def test_wav_rejects_24_bit(tmp_path):
    p = tmp_path / "w24.wav"
    with wave.open(str(p), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(3)
        w.setframerate(8000)
        w.writeframes(b"\x00" * 24)
    with pytest.raises(DataError, match="24-bit PCM"):
        read_wav(p)


def test_wav_rejects_float(tmp_path):
    p = tmp_path / "f.wav"
    _raw_wav(p, 4, np.zeros(4, dtype="<f4").tobytes(), fmt_tag=3)
    with pytest.raises(DataError, match="IEEE float"):
        read_wav(p)


def test_wav_rejects_non_riff(tmp_path):
    p = tmp_path / "junk.wav"
    p.write_bytes(b"not a wave file at all")
    with pytest.raises(DataError, match="RIFF"):
        read_wav(p)


def test_audio_buffer_invariants():
    with pytest.raises(ValueError):
        AudioBuffer([], 8000)
    with pytest.raises(ValueError, match="length"):
        AudioBuffer([np.zeros(3), np.zeros(4)], 8000)
    with pytest.raises(ValueError):
        AudioBuffer([np.zeros(3)], 0)


# --------------------------------------------------------------- blocks

def test_block_plan_validation():
    assert BlockPlan().block_size == 4096
    with pytest.raises(ValueError, match="power of two"):
        BlockPlan(1000)
    with pytest.raises(ValueError, match="overlap"):
        BlockPlan(8, 8, "hann")
    with pytest.raises(ValueError, match="hann"):
        BlockPlan(8, 2)
    with pytest.raises(ValueError, match="window"):
        BlockPlan(8, 0, "kaiser")


def test_disjoint_blocks_identity_and_padding():
    x = np.arange(10000.0)
    seen = []

    def spy(b):
        seen.append(b.copy())
        return b

    out = process_blocks(x, BlockPlan(4096), spy)
    np.testing.assert_array_equal(out, x)
    assert len(seen) == 3
    assert np.count_nonzero(seen[-1][10000 - 8192:] == 0) == 2288


def test_disjoint_blocks_are_independent():
    x = np.arange(32.0)
    out = process_blocks(x, BlockPlan(8), lambda b: b - b.mean())
    for k in range(4):
        assert out[8 * k: 8 * k + 8].mean() == pytest.approx(0.0)


@pytest.mark.parametrize("n, block, overlap", [(10000, 4096, 2048), (4096, 4096, 1000),
                                               (300, 64, 17)])
def test_overlap_add_identity(n, block, overlap, rng):
    x = rng.standard_normal(n)
    out = process_blocks(x, BlockPlan(block, overlap, "hann"), lambda b: b)
    assert np.max(np.abs(out - x)) <= 1e-9


def test_hann_window_positive_and_symmetric():
    w = hann_window(16)
    assert np.all(w > 0)
    np.testing.assert_allclose(w, w[::-1])
    # half-overlapped copies sum to one
    np.testing.assert_allclose(w[:8] + w[8:], 1.0)


def test_block_longer_than_signal():
    with pytest.raises(ValueError, match="shorter"):
        process_blocks(np.zeros(100), BlockPlan(128), lambda b: b)


# ------------------------------------------------------------------ CLI

def test_cli_denoise_constant_csv(tmp_path):
    inp, out = tmp_path / "c.csv", tmp_path / "o.csv"
    write_signal_csv(inp, np.full(256, 1.25))
    assert cli_main(["denoise", "--input", str(inp), "--output", str(out)]) == 0
    np.testing.assert_allclose(read_signal_csv(out), 1.25, atol=1e-12)


def test_cli_denoise_csv_with_fit_json(tmp_path, rng):
    x = np.repeat([0.0, 3.0, -1.0, 2.0], 64) + 0.5 * rng.standard_normal(256)
    inp, out, js = tmp_path / "x.csv", tmp_path / "y.csv", tmp_path / "fit.json"
    write_signal_csv(inp, x)
    argv = ["denoise", "--input", str(inp), "--output", str(out), "--slab", "mom",
            "--gamma-spec", "hypsec", "--tau-spec", "doubleexp", "--wavelet", "haar",
            "--fit-json", str(js), "--starts", "1", "--max-evals", "300"]
    assert cli_main(argv) == 0
    y = read_signal_csv(out)
    assert y.size == 256
    report = json.loads(js.read_text())
    assert report["method"] == "mom-hypsec-doubleexp" and report["wavelet"] == "haar"
    (block,) = report["blocks"]
    assert {"theta_gamma", "theta_tau", "sigma_hat", "log_marginal"} <= set(block)
    # deterministic output
    out2 = tmp_path / "y2.csv"
    argv[4] = str(out2)
    assert cli_main(argv) == 0
    assert out.read_bytes() == out2.read_bytes()


def test_cli_denoise_blocks_for_odd_length(tmp_path, rng):
    inp, out = tmp_path / "x.csv", tmp_path / "y.csv"
    write_signal_csv(inp, rng.standard_normal(300))
    base = ["denoise", "--input", str(inp), "--output", str(out), "--starts", "1",
            "--max-evals", "200"]
    assert cli_main(base) == 2
    assert cli_main(base + ["--block", "128", "--overlap", "32"]) == 0
    assert read_signal_csv(out).size == 300


def test_cli_denoise_wav_per_channel(tmp_path, rng):
    t = np.arange(1, 2049) / 2048
    left = 0.3 * np.sin(40 * t) + 0.02 * rng.standard_normal(2048)
    right = 0.2 * np.sign(t - 0.5) + 0.02 * rng.standard_normal(2048)
    inp, out, js = tmp_path / "a.wav", tmp_path / "b.wav", tmp_path / "f.json"
    write_wav(inp, AudioBuffer([left, right], 16000))
    argv = ["denoise", "--input", str(inp), "--output", str(out), "--block", "1024",
            "--starts", "1", "--max-evals", "200", "--fit-json", str(js)]
    assert cli_main(argv) == 0
    back = read_wav(out)
    assert len(back.channels) == 2 and back.nframes == 2048 and back.sample_rate == 16000
    report = json.loads(js.read_text())
    assert report["wavelet"] == "coif5"
    assert [(b["channel"], b["block"]) for b in report["blocks"]] == [(0, 0), (0, 1), (1, 2),
                                                                       (1, 3)]


def test_cli_usage_errors(tmp_path, capsys):
    assert cli_main(["denoise", "--input", "a.csv", "--output", "b.csv",
                     "--wavelet", "db4"]) == 1
    err = capsys.readouterr().err
    assert "haar" in err and "sym6" in err and "coif5" in err
    assert cli_main(["denoise", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err
    assert cli_main([]) == 1
    assert cli_main(["denoise", "--input", "a.txt", "--output", "b.txt"]) == 1
    assert cli_main(["simulate", "--methods", "mixture-logit-cubic", "--out",
                     str(tmp_path / "r.csv")]) == 1
    assert cli_main(["--help"]) == 0


def test_cli_data_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1\nxyz\n")
    assert cli_main(["denoise", "--input", str(bad), "--output", str(tmp_path / "o.csv")]) == 2
    assert cli_main(["denoise", "--input", str(tmp_path / "missing.csv"),
                     "--output", str(tmp_path / "o.csv")]) == 2
    assert cli_main(["compare", "--in", str(bad), "--out", str(tmp_path / "t.txt")]) == 2


def test_cli_numerical_failure(tmp_path, rng, monkeypatch):
    from nlpshrink.posterior import PipelineError
    from nlpshrink.priors import NumericalError

    def broken(*args, **kwargs):
        raise PipelineError("fit", NumericalError("mode search failed"))

    monkeypatch.setattr(io_cli, "denoise", broken)
    inp = tmp_path / "x.csv"
    write_signal_csv(inp, rng.standard_normal(64))
    assert cli_main(["denoise", "--input", str(inp), "--output", str(tmp_path / "o.csv")]) == 3


def test_cli_simulate_and_compare(tmp_path):
    res, table = tmp_path / "r.csv", tmp_path / "t.txt"
    argv = ["simulate", "--functions", "doppler", "--n", "512", "--snr", "5", "--reps", "2",
            "--methods", "mixture-logit-polynom", "--seed", "4", "--out", str(res)]
    assert cli_main(argv) == 0
    lines = res.read_text().splitlines()
    assert len(lines) == 2
    assert lines[1].startswith("doppler,512,5,mixture-logit-polynom,")
    assert lines[1].endswith(",")  # no timing column unless asked
    assert cli_main(["compare", "--in", str(res), "--out", str(table)]) == 0
    text = table.read_text()
    assert "mixture-logit-polynom" in text and "doppler" in text
