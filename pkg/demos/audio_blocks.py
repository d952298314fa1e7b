"""
Block-wise audio denoising
==========================

Write a noisy 16-bit WAV, then denoise it in blocks of 4096 samples from the
command line, first with disjoint blocks and then with Hann overlap-add.
"""

import tempfile
from pathlib import Path

import numpy as np

from nlpshrink import bench
from nlpshrink.io_cli import AudioBuffer, cli_main, read_wav, write_wav

n = 3 * 4096
clean = bench.eval_test_function("doppler", np.arange(1, n + 1) / n)
noisy, _ = bench.add_noise(clean, snr=5, seed=1)

work = Path(tempfile.mkdtemp())
write_wav(work / "noisy.wav", AudioBuffer([noisy], sample_rate=44100))
print(f"noisy MSE {bench.mse(read_wav(work / 'noisy.wav').channels[0], clean):.6f}")

# coif5 is the default filter for WAV input; --fit-json records one fit per block
for label, extra in (("disjoint", []), ("overlap-add", ["--overlap", "2048"])):
    out = work / f"{label}.wav"
    code = cli_main(["denoise", "--input", str(work / "noisy.wav"), "--output", str(out),
                     "--block", "4096", "--starts", "1", "--max-evals", "1000", *extra,
                     "--fit-json", str(work / f"{label}.json")])
    restored = read_wav(out).channels[0]
    print(f"{label:12s} exit {code}, MSE {bench.mse(restored, clean):.6f}")
