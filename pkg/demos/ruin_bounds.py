"""Ruin-probability bracket and direct estimate for the reference GBM model.

Run: python3 demos/ruin_bounds.py [n_paths]
"""

import sys

from ruinsim import ExponentialClaims, ExponentialTimes, find_beta, gbm
from ruinsim.cycles import CycleSpec, PathGridConfig, simulate_cycles
from ruinsim.ruin import direct_ruin_estimate, kesten_diagnostics, ruin_table, sample_perpetuities, simulate_direct

n = int(sys.argv[1]) if len(sys.argv) > 1 else 50_000
model = gbm(0.08, 0.04)
beta = find_beta(model).beta
spec = CycleSpec.build(model, ExponentialTimes(1.0), ExponentialClaims(2.0), 1.0, grid=PathGridConfig(resolution=16))

diag = kesten_diagnostics(simulate_cycles(spec, n, 1), beta)
print(f"beta = {beta:.6f}, E M^beta = {diag.e_m_beta.value:.4f} +- {diag.e_m_beta.stderr:.4f}")

perp = sample_perpetuities(spec, n, 2)
run = simulate_direct(spec, n, 3)
print(f"{'u':>6} {'lower':>10} {'upper':>10} {'direct':>10} {'stderr':>9}")
for est in ruin_table(perp, [0.5, 1.0, 2.0, 5.0]):
    d = direct_ruin_estimate(run, est.u, reference=perp)
    print(f"{est.u:6.2f} {est.lower:10.3e} {est.upper:10.3e} {d.frequency:10.3e} {d.stderr:9.1e}")
