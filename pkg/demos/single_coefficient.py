"""
One coefficient under the mixture prior
=======================================

How a single empirical coefficient is shrunk: posterior branch weights and the
posterior mean as the observation grows, for fixed level parameters.
"""

import numpy as np

from nlpshrink import PriorParams, laplace_fit, posterior_mean_coeff

p = PriorParams(gamma1=0.3, gamma2=0.5, tau1=2.0, tau2=1.0, sigma2=1.0)

print(" dhat     p0     p1(MOM) p2(IMOM)  mean")
for dhat in np.arange(0.0, 7.5, 0.5):
    s = posterior_mean_coeff(dhat, p)
    print(f"{dhat:5.1f} {s.p0:8.3f} {s.p1:8.3f} {s.p2:8.3f} {s.post_mean:8.3f}")

# the IMOM branch is integrated by a Laplace approximation around d*
fit = laplace_fit(0.0, tau2=1.0)
print(f"\nLaplace mode at dhat = 0: d* = {fit.d_star:.10f}, "
      f"sqrt(sqrt(3) - 1) = {np.sqrt(np.sqrt(3) - 1):.10f}")
