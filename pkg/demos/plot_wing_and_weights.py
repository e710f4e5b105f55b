"""
Wing loss and pixel weights
===========================

The wing loss grows logarithmically for small residuals and linearly for
large ones, so a few wild pixels cannot dominate the fit. The sigmoid
weights go further and push pixels above the residual threshold toward 0.
"""

import numpy as np

from wingsc import WingParams, compute_weights, residual_threshold, wing_loss

# loss against the plain absolute value, both sides of the kink at omega
params = WingParams(omega=10.0, epsilon=2.0)
r = np.array([0.0, 0.5, 2.0, 9.9, 10.0, 50.0])
for ri, li in zip(r, wing_loss(r, params)):
    print(f"|r| = {ri:5.1f}   wing = {li:8.4f}   abs = {ri:5.1f}")
print(f"joining constant C = {params.c_const:.4f}")

###############################################################################
# A residual vector with a handful of gross errors. The threshold is the
# squared residual at the tau quantile; weights cross 0.5 right there.
rng = np.random.default_rng(0)
e = rng.normal(scale=0.05, size=20)
e[:3] = [0.8, -0.6, 0.9]
delta = residual_threshold(e, tau=0.8)
w = compute_weights(e, delta, q=1.0).weights
print(f"\ndelta = {delta:.5f}")
print("outlier weights:", np.round(w[:3], 4))
print("inlier weights :", np.round(w[3:8], 4))
