"""Multiple change points with the weighted group fused LASSO.

``segment`` searches for the penalty that yields a requested number of
changes; every solution carries its optimality (KKT) residual.
"""

from __future__ import annotations

import numpy as np

from panelseg import GroupFusedLasso, NoiseModel, SignalSpec, WeightScheme, generate_panel

n, d = 60, 400
signal = SignalSpec(n, (15, 35, 50), [0.0, 1.0, -0.5, 0.8])
Y = generate_panel(signal, NoiseModel.iid(0.5), d=d, seed=3).values

model = GroupFusedLasso(Y, WeightScheme.standard().vector(n))
print(f"beta = 0 for lambda >= {model.t_max:.4g}")

res = model.segment(3)
print(f"lambda = {res.lam:.4g}: changes {res.change_set} (true {signal.change_points}), "
      f"KKT residual {res.solution.kkt_residual:.1e}")

single = model.single_change()
print(f"single change at {single.u}; admissible lambda range "
      f"({single.admissible[0]:.4g}, {single.admissible[1]:.4g})")
# the search stops at the largest lambda giving three changes, so the change
# entering last there has a jump close to zero
print("jump norms at the chosen changes:",
      np.linalg.norm(res.solution.beta[np.array(res.change_set) - 1], axis=1))
