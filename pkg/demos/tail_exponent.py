"""Tail exponent of the perpetuity: Hill and log-log slope against beta.

Two settings: the reference model (beta = 3, still in its exponential
regime at desk-scale sample sizes) and a heavier-tailed one (beta = 1.5).
Run: python3 demos/tail_exponent.py [n_paths]
"""

import sys

from ruinsim import ExponentialClaims, ExponentialTimes, find_beta, gbm
from ruinsim.cycles import CycleSpec, PathGridConfig
from ruinsim.ruin import sample_perpetuities
from ruinsim.tail import InsufficientDataError, analyze_tail

n = int(sys.argv[1]) if len(sys.argv) > 1 else 50_000
for a, s2, c in [(0.08, 0.04, 1.0), (0.1, 0.08, 0.5)]:
    model = gbm(a, s2)
    beta = find_beta(model).beta
    spec = CycleSpec.build(model, ExponentialTimes(1.0), ExponentialClaims(2.0), c, grid=PathGridConfig(resolution=4))
    y = sample_perpetuities(spec, n, 11).y_inf
    try:
        est = analyze_tail(y, beta=beta)
    except InsufficientDataError as e:
        print(f"a={a} sigma2={s2} c={c}: beta={beta:.3f}  {e} ({(y > 0).sum()} positive draws)")
        continue
    h, s = est.beta_hat_hill, est.beta_hat_slope
    print(f"a={a} sigma2={s2} c={c}: beta={beta:.3f}  hill={h.value:.3f} [{h.lo:.3f}, {h.hi:.3f}]  "
          f"slope={s.value:.3f} [{s.lo:.3f}, {s.hi:.3f}]  window={est.u_window[0]:.3g}..{est.u_window[1]:.3g}")
    for w in est.warnings:
        print(f"  warning: {w}")
