"""Finite-horizon ruin frequency when 2a/sigma^2 - 1 <= 0 (no positive root
of the cumulant): the frequency keeps growing with the horizon.

Run: python3 demos/degenerate_regime.py
"""

from ruinsim import ExponentialClaims, ExponentialTimes, find_beta, gbm
from ruinsim.cycles import CycleSpec, PathGridConfig
from ruinsim.ruin import finite_horizon_ruin

model = gbm(0.01, 0.09)
print(f"beta status: {find_beta(model).status.value}")
spec = CycleSpec.build(model, ExponentialTimes(1.0), ExponentialClaims(2.0), 1.0, grid=PathGridConfig(resolution=4))
hs, freq, se = finite_horizon_ruin(spec, 1.0, [1, 10, 100, 1000], 2000, 5)
for h, f, e in zip(hs, freq, se):
    print(f"t = {h:6.0f}: P(ruin by t) = {f:.3f} +- {e:.3f}")
