"""
Denoising a benchmark signal
============================

Sample the bumps function, add Gaussian noise at a signal-to-noise ratio of 5,
and recover it with the three-component shrinkage rule. The hard-threshold
baseline is shown for comparison.
"""

import numpy as np

from nlpshrink import bench, denoise

f = bench.sample_function("bumps", 1024)
y, sigma = bench.add_noise(f, snr=5, seed=0)
print(f"noise sd {sigma:.4f}; noisy MSE {bench.mse(y, f):.5f}")

# dwt -> MAD noise scale -> empirical Bayes -> posterior means -> idwt
estimate, fit, summaries = denoise(y, "mixture-logit-polynom", wavelet="sym6", seed=0)
print(f"shrinkage MSE      {bench.mse(estimate, f):.5f}")
print(f"hard threshold MSE {bench.mse(bench.hard_threshold_denoise(y), f):.5f}")

# the fitted level curves: weights fall and scales shrink towards fine levels
g1, g2, t1, t2 = fit.level_params()
print("\nlevel  gamma1  gamma2   tau1    tau2")
for l, row in enumerate(zip(g1, g2, t1, t2), start=1):
    print(f"{l:5d}" + "".join(f"{v:8.3f}" for v in row))

# which coefficients survived? p0 is the posterior weight on exactly zero
kept = sum(s.p0 < 0.5 for s in summaries)
print(f"\n{kept} of {len(summaries)} detail coefficients are more likely nonzero than zero")
