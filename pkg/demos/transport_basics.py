"""Optimal transport between two pmfs: closed form, LP plan, and cost sandwich."""

import numpy as np

from wdistortion.transport import CostMatrix, sandwich_bounds, w2sq_exact, w2sq_uniform

mu = np.array([0.5, 0.3, 0.2])
nu = np.array([0.2, 0.3, 0.5])

print("uniform cost, closed form:", w2sq_uniform(mu, nu, 1.0))
value, plan = w2sq_exact(mu, nu, CostMatrix.uniform(3))
print("uniform cost, LP:", value)
print("plan:\n", np.round(plan.mass, 4))

d = CostMatrix([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
lo, mid, hi = sandwich_bounds(mu, nu, d)
print(f"line cost: {lo:.4f} <= {mid:.4f} <= {hi:.4f}")
