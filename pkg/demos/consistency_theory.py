"""Where weighted CUSUM estimators are consistent as the panel count grows.

For Weighted(gamma) weights under i.i.d. noise a change at ``u`` is found iff
the noise-to-change ratio stays below ``consistency_bound(u, n, gamma)``.
Changes located beyond ``boundary(gamma) * n`` are always found.
"""

from __future__ import annotations

from panelseg import NoiseModel, WeightScheme, boundary, bound_limit, consistency_bound, critical_argmax
from panelseg import check_perfect_estimation, v_squared_vector

n = 100
for gamma in (0.0, 0.25, 0.4):
    print(f"gamma={gamma}: boundary {boundary(gamma):.4f}")
    for u in (55, 65, 75):
        reg = consistency_bound(u, n, gamma)
        s = u / n
        limit = bound_limit(s, gamma) if s <= boundary(gamma) or gamma == 0.25 else float("nan")
        print(f"  u={u}: bound {reg.bound:.5f} (large-n limit {limit:.5f})")

# just below and above the bound the limiting argmax moves off u
u, gamma = 70, 0.0
R = consistency_bound(u, n, gamma).bound
for r in (0.9 * R, 1.1 * R):
    print(f"r={r:.4f}: argmax {critical_argmax(u, n, r, WeightScheme.weighted(gamma))}")

V = v_squared_vector(NoiseModel.ma1(-3.0, 1.0), n) ** 0.5
print("exact weights perfect under phi=-3:", bool(check_perfect_estimation(V, n)))
