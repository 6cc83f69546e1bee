"""Exact weights estimated from the data when the noise model is unknown.

The centred banded estimate uses a training window placed before the change;
convex regression smooths the resulting weight curve.
"""

from __future__ import annotations

import numpy as np

from panelseg import (
    CommonFactorSpec, NoiseModel, SignalSpec, WeightScheme, banded_covariance, convex_regression,
    estimate_change, estimated_exact_weights, generate_panel,
)

n, u, d = 100, 55, 2000
noise = NoiseModel.ma1(phi=-1.0, theta=1.0, sigma2_tilde=9.0)
Y = generate_panel(SignalSpec(n, (u,), [0.0, 1.0]), noise, CommonFactorSpec("harmonic"), d=d, seed=11).values

true_w = WeightScheme.exact_for(noise, n).vector(n)
est = estimated_exact_weights(banded_covariance(Y, 1, 20, h=2, centered=True))
smooth = convex_regression(est.weights)

for label, w in (("true exact", true_w), ("estimated", est.weights), ("convex fit", smooth.weights)):
    # weights are only defined up to scale
    shape_err = np.max(np.abs(w / w.mean() - true_w / true_w.mean()))
    print(f"{label:>10}: estimate {estimate_change(Y, w):3d}, max shape error {shape_err:.3f}")
