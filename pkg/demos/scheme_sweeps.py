"""Monte Carlo sweeps for both schemes, fitted exponents, and the region report."""

from wdistortion.coding import SourceSpec
from wdistortion.experiments import fit_exponent, region_report, run_sweep, scheme_point
from wdistortion.transport import CostMatrix

spec = SourceSpec([0.5, 0.5])
d = CostMatrix.uniform(2)
grid = [2.0**e for e in range(4, 11)]

results = {}
for scheme in ("independent", "permutation"):
    res = run_sweep(scheme, spec, d, grid, trials=50, master_seed=1)
    results[scheme] = res
    fit = fit_exponent(res, "distortion")
    print(f"{scheme}: distortion slope {fit.slope:.3f} (r2 {fit.r_squared:.4f})")
    for r in res.rows:
        print(f"  sigma={r.sigma:7.0f} k={r.k:3d} rate={r.rate:.4f} D={r.mean_distortion:.3e} bound={r.bound:.3e}")

report = region_report([scheme_point(res, name) for name, res in results.items()])
for row in report.rows:
    print(row)
