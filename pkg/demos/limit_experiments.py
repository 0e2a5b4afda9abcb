"""Small- and large-sigma limits of the pooled distortion."""

import numpy as np

from wdistortion.coding import SourceSpec
from wdistortion.experiments import fidelity_limit_experiment, realism_limit_experiment
from wdistortion.transport import CostMatrix

rng = np.random.default_rng(2024)
z, zh = rng.uniform(-1, 1, 95), rng.uniform(-1, 1, 95)
fid = fidelity_limit_experiment(z, zh, [2.0, 1.0, 0.5, 0.25, 0.1, 0.05, 0.0])
print("fidelity: target", fid.target)
for s, v, e in zip(fid.sigmas, fid.values, fid.errors):
    print(f"  sigma={s:5.2f} value={v:.6f} error={e:.2e}")

real = realism_limit_experiment(SourceSpec([0.5, 0.5]), SourceSpec([0.8, 0.2]), [1.0, 10.0, 100.0, 1e4],
                                CostMatrix.uniform(2), seed=0)
print("realism: target", real.target)
for s, v in zip(real.sigmas, real.values):
    print(f"  sigma={s:8.0f} value={v:.4f}")
