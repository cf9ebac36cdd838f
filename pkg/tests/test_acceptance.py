"""End-to-end acceptance criteria at desk scale.

Every test prints one PASS/FAIL line (collected again in the terminal
summary).  Tolerances are pinned here.  The perpetuity criteria run on a
coarse Brownian grid (resolution 4 per unit of min(T, 1)) to fit one CPU core;
``test_ruin.py::test_coarse_grid_matches_default_grid`` checks that this grid
does not move the perpetuity law detectably.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats as sps

from ruinsim import rng as rngmod
from ruinsim import cli
from ruinsim._kernels import exact_integral, grid_integral
from ruinsim.cycles import sample_log_price, sample_piecewise_path, simulate_cycles
from ruinsim.distributions import AtomicJumps, DoubleExponentialLogJumps, JumpMeasure, UniformJumps
from ruinsim.model import BetaStatus, cumulant, derive_log_price_model, find_beta, gbm
from ruinsim.ruin import (
    direct_ruin_estimate,
    estimate_gbar,
    finite_horizon_ruin,
    kesten_diagnostics,
    ruin_table,
    sample_perpetuities,
    simulate_direct,
)
from ruinsim.stats import RunningMoments
from ruinsim.tail import analyze_tail

from conftest import COARSE, N_PERP

pytestmark = pytest.mark.acceptance

SEED = 20240611
N_KESTEN = 1_000_000
N_MGF = 1_000_000
N_DIRECT = 200_000
N_FIXED_POINT = 10_000

BETA_TOL = 1e-8
SLOPE_TOL = 0.3
HILL_REL_TOL = 0.15
CPLUS_SPREAD = 0.50
KS_ALPHA = 0.01
RATIO_RANGE = (1.6, 2.4)
UNEXPLAINED_MASS = 0.01


@pytest.fixture
def perpetuities(ref_perpetuities):
    return ref_perpetuities


# 1 ---------------------------------------------------------------------------


def test_c1_gbm_analytic_root(criterion):
    rng = np.random.default_rng(SEED)
    cases = []
    while len(cases) < 20:
        a, s2 = rng.uniform(0.0, 1.0), rng.uniform(0.005, 1.0)
        if 0.1 < 2 * a / s2 - 1 < 10:
            cases.append((a, s2))
    t0 = time.perf_counter()
    errs = [abs(find_beta(gbm(a, s2)).beta - (2 * a / s2 - 1)) for a, s2 in cases]
    dt = time.perf_counter() - t0
    worst = max(errs)
    criterion(
        "C1 GBM analytic root",
        worst <= BETA_TOL and dt < 1.0,
        f"max |beta - (2a/sigma2 - 1)| = {worst:.2e} (tol {BETA_TOL:g}) over 20 cases in {dt:.3f} s",
    )


# 2 ---------------------------------------------------------------------------


@pytest.mark.parametrize("refinement", [0, 1], ids=["default_step", "half_step"])
def test_c2_kesten_identity(criterion, ref_model, ref_spec_factory, refinement):
    beta = find_beta(ref_model).beta
    spec = ref_spec_factory(refinement=refinement)
    t0 = time.perf_counter()
    cyc = simulate_cycles(spec, N_KESTEN, SEED)
    dt = time.perf_counter() - t0
    full = kesten_diagnostics(cyc, beta)
    half = kesten_diagnostics(cyc.sample_slice(0, N_KESTEN // 2), beta)
    m, se = full.e_m_beta
    ok_m = abs(m - 1.0) <= 3 * se
    stable = []
    parts = []
    for name in ("e_m_beta_logm_plus", "e_q_beta"):
        f, h = getattr(full, name), getattr(half, name)
        ok = math.isfinite(f.value) and abs(f.value - h.value) < 2 * h.stderr
        stable.append(ok)
        parts.append(f"{name} {f.value:.5g} (half {h.value:.5g}, se {h.stderr:.2g})")
    criterion(
        f"C2 Kesten identity [{'default' if refinement == 0 else 'half'} step]",
        ok_m and all(stable),
        f"E M^beta = {m:.5f} +- {se:.5f} ({(m - 1) / se:+.2f} se); " + "; ".join(parts)
        + f"; saturated {int(cyc.saturated.sum())}; {dt:.1f} s on 1 worker",
    )


# 3 ---------------------------------------------------------------------------


MGF_MODELS = {
    "gbm": lambda: gbm(0.08, 0.04),
    "jump_diffusion": lambda: derive_log_price_model(0.06, 0.02, JumpMeasure(0.8, UniformJumps(-0.3, 0.4))),
}


@pytest.mark.parametrize("name", sorted(MGF_MODELS))
def test_c3_moment_identity(criterion, name):
    model = MGF_MODELS[name]()
    beta = find_beta(model).beta
    gen = rngmod.stream(SEED, 0, rngmod.LOG_PRICE)
    worst = 0.0
    ok = True
    for t in (0.5, 1.0, 2.0):
        v = sample_log_price(model, t, N_MGF, gen)
        for q in (beta / 2, beta):
            r = RunningMoments.of(np.exp(-q * v))
            z = (math.log(r.mean) - t * cumulant(model, q)) / (r.stderr / r.mean)
            worst = max(worst, abs(z))
            ok &= abs(z) <= 3
    criterion(
        f"C3 moment identity [{name}]",
        ok,
        f"max |ln E e^(-qV_t) - tH(q)| = {worst:.2f} se over q in (beta/2, beta), t in (0.5, 1, 2), beta = {beta:.6g}",
    )


# 4 ---------------------------------------------------------------------------


def test_c4_power_tail(criterion, perpetuities, ref_model):
    batch, dt = perpetuities
    beta = find_beta(ref_model).beta
    y = batch.y_inf
    est = analyze_tail(y, beta=beta, nonarithmetic=True, seed=SEED)
    slope = -est.beta_hat_slope.value
    hill = est.beta_hat_hill.value
    spread = est.c_plus_hat.spread
    ok_slope = abs(slope + beta) <= SLOPE_TOL
    ok_hill = abs(hill - beta) <= HILL_REL_TOL * beta
    ok_spread = spread < CPLUS_SPREAD
    u_lo, u_hi = est.u_window
    criterion(
        "C4 power-tail reproduction",
        ok_slope and ok_hill and ok_spread and u_hi / u_lo >= 9.99,
        f"slope {slope:.3f} (target {-beta:.3f} +- {SLOPE_TOL}); Hill {hill:.3f} at k = {est.k_used} "
        f"(target {beta:.3f} +- {HILL_REL_TOL:.0%}); u^beta Gbar spread {spread:.1%} (< {CPLUS_SPREAD:.0%}); "
        f"window [{u_lo:.3g}, {u_hi:.3g}]; Gbar(0) = {np.mean(y > 0):.2e}; "
        f"flagged {int(batch.flagged.sum())}; {dt:.0f} s for {N_PERP} samples",
    )


# 5 ---------------------------------------------------------------------------


def test_c5_paulsen_sandwich(criterion, perpetuities, ref_spec_factory):
    batch, _ = perpetuities
    spec = ref_spec_factory(resolution=COARSE)
    us = [1.0, 5.0, 10.0]
    table = ruin_table(batch, us)
    drun = simulate_direct(spec, N_DIRECT, SEED)
    ok = True
    parts = []
    for est in table:
        d = direct_ruin_estimate(drun, est.u, reference=batch)
        lo = est.lower - 3 * est.gbar_u_stderr
        hi = est.upper + 3 * est.upper_stderr
        inside = est.upper_defined and lo <= d.frequency <= hi
        explained = d.residual_mass < UNEXPLAINED_MASS
        ok &= inside and explained
        parts.append(
            f"u={est.u:g}: direct {d.frequency:.3e} +- {d.stderr:.1e} in [{lo:.3e}, {hi:.3e}], "
            f"censored {d.censored_fraction:.2%}, residual {d.residual_mass:.1e}"
        )
    criterion("C5 Paulsen sandwich consistency", ok, "; ".join(parts))


# 6 ---------------------------------------------------------------------------


def test_c6_fixed_point(criterion, ref_spec_factory):
    spec = ref_spec_factory(resolution=16)
    fresh = sample_perpetuities(spec, N_FIXED_POINT, SEED).y_inf
    other = sample_perpetuities(spec, N_FIXED_POINT, SEED, start=N_FIXED_POINT).y_inf
    cyc = simulate_cycles(spec, N_FIXED_POINT, SEED)
    mapped = cyc.q + cyc.m * other
    res = sps.ks_2samp(fresh, mapped)
    criterion(
        "C6 fixed point Y = Q + M Y",
        res.pvalue > KS_ALPHA,
        f"two-sample KS D = {res.statistic:.4f}, p = {res.pvalue:.3f} (alpha {KS_ALPHA}), n = {N_FIXED_POINT} per side",
    )


# 7 ---------------------------------------------------------------------------


PURE_JUMP = {
    "uniform": lambda: derive_log_price_model(0.05, 0.0, JumpMeasure(3.0, UniformJumps(-0.4, 0.5))),
    "atomic": lambda: derive_log_price_model(0.05, 0.0, JumpMeasure(2.0, AtomicJumps((-0.3, 0.25), (0.5, 0.5)))),
    "double_exponential": lambda: derive_log_price_model(
        0.05, 0.0, JumpMeasure(2.0, DoubleExponentialLogJumps(4.0, 3.0, 0.4))
    ),
}


@pytest.mark.parametrize("name", sorted(PURE_JUMP))
def test_c7_integrator_convergence(criterion, name):
    model = PURE_JUMP[name]()
    gen = rngmod.stream(SEED, 0, rngmod.AUX)
    t_len = 2.0
    paths = [sample_piecewise_path(model, t_len, gen) for _ in range(100)]
    steps = [t_len / 64 / 2**k for k in range(4)]
    errs = np.zeros(len(steps))
    for p in paths:
        exact = exact_integral(t_len, p.jump_times, p.jump_sizes, p.slope)[0]
        for i, h in enumerate(steps):
            approx = grid_integral(gen, t_len, p.jump_times, p.jump_sizes, p.slope, 0.0, h)[0]
            errs[i] += abs(approx - exact)
    ratios = errs[:-1] / errs[1:]
    ok = bool(np.all((ratios >= RATIO_RANGE[0]) & (ratios <= RATIO_RANGE[1])))
    criterion(
        f"C7 integrator convergence [{name}]",
        ok,
        "error ratios under step halving " + ", ".join(f"{r:.3f}" for r in ratios) + f" (range {RATIO_RANGE})",
    )


# 8 ---------------------------------------------------------------------------


def test_c8_determinism(criterion, tmp_path):
    cfg = tmp_path / "ref.yaml"
    cfg.write_text(
        "version: 1\n"
        "model: {a: 0.08, sigma2: 0.04}\n"
        "insurance:\n"
        "  c: 1.0\n"
        "  claims: {family: exponential, rate: 2.0}\n"
        "  interarrival: {family: exponential, rate: 1.0}\n"
        "run:\n"
        "  seed: 7\n"
        "  n_paths: 400\n"
        "  n_cycles: 2000\n"
        "  direct_paths: 400\n"
        "  grid: {resolution: 8}\n"
        "  u_grid: 'geom:0.05:2:6'\n"
        "  outputs: [cycles, perpetuity]\n"
    )
    outputs = {}
    for w in (1, 4, 8):
        blobs = {}
        for cmd in ("simulate", "ruin"):
            out = tmp_path / f"{cmd}_{w}"
            code = cli.main([cmd, "--config", str(cfg), "--workers", str(w), "--out", str(out)])
            assert code == 0
            for f in sorted(out.glob("*.csv")):
                blobs[f"{cmd}/{f.name}"] = f.read_bytes()
        outputs[w] = blobs
    same = all(outputs[w] == outputs[1] for w in (4, 8))
    criterion(
        "C8 determinism across workers",
        same and len(outputs[1]) == 4,
        f"{len(outputs[1])} CSV files ({', '.join(sorted(outputs[1]))}) byte-identical for workers 1, 4, 8: {same}",
    )


# 9 ---------------------------------------------------------------------------


def test_c9_degenerate_regime(criterion, ref_laws):
    from ruinsim.cycles import CycleSpec, PathGridConfig

    model = gbm(0.01, 0.09)
    beta = find_beta(model)
    ia, cl = ref_laws
    spec = CycleSpec.build(model, ia, cl, 1.0, grid=PathGridConfig(resolution=COARSE))
    horizons = [1.0, 10.0, 100.0, 1000.0]
    hs, freq, se = finite_horizon_ruin(spec, 1.0, horizons, 2000, SEED)
    ok = beta.status is BetaStatus.DEGENERATE_NONPOSITIVE and np.all(np.diff(freq) >= 0) and freq[-1] > freq[0]
    criterion(
        "C9 degenerate regime (qualitative)",
        ok,
        f"2a/sigma2 - 1 = {2 * 0.01 / 0.09 - 1:.3f}, beta status {beta.status.value}; ruin frequency at u = 1 by horizon "
        + ", ".join(f"t={h:g}: {f:.3f}" for h, f in zip(hs, freq)),
    )
