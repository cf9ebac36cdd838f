import math

import numpy as np
import pytest
from scipy import stats

from ruinsim import rng as rngmod
from ruinsim.cycles import (
    CycleSpec,
    PathGridConfig,
    PiecewisePath,
    check_flag_rate,
    discounted_integral_exact,
    discounted_integral_grid,
    sample_piecewise_path,
    simulate_cycle,
    simulate_cycles,
    SaturationError,
)
from ruinsim.distributions import (
    DeterministicTimes,
    DoubleExponentialLogJumps,
    ExponentialClaims,
    ExponentialTimes,
    JumpMeasure,
    UniformClaims,
    UniformJumps,
)
from ruinsim.model import LevyModel, cumulant, derive_log_price_model, gbm


def linear_model(a_v):
    """Deterministic log price ``V_t = a_v t`` (built directly, bypassing validation)."""
    return LevyModel(a=a_v, sigma2=0.0, jumps=JumpMeasure(), a_V=a_v, jumps_V=JumpMeasure())


def test_linear_cycle():
    spec = CycleSpec.build(linear_model(1.0), DeterministicTimes(1.0), UniformClaims(0.5, 1.5), 1.0)
    for i in range(20):
        s = simulate_cycle(spec, rngmod.stream(1, i))
        assert s.M == pytest.approx(math.exp(-1), abs=1e-15)
        assert s.integral == pytest.approx(1 - math.exp(-1), abs=1e-14)
        assert s.Q == pytest.approx(s.M * s.claim - s.integral, abs=1e-14)
        assert 0.5 <= s.claim <= 1.5


def test_zero_drift_cycle():
    spec = CycleSpec.build(linear_model(0.0), DeterministicTimes(2.0), UniformClaims(0.5, 1.5), 0.3)
    s = simulate_cycle(spec, rngmod.stream(2))
    assert s.M == 1.0
    assert s.integral == pytest.approx(2.0, abs=1e-14)
    assert s.Q == pytest.approx(s.claim - 0.6, abs=1e-14)


@pytest.mark.parametrize("v0,slope,d", [(0.0, 1.0, 1.0), (0.3, -2.0, 0.5), (0.0, 1e-12, 2.0), (1.0, 0.0, 3.0)])
def test_exact_segment_integral(v0, slope, d):
    expected = math.exp(-v0) * d if slope == 0 else math.exp(-v0) * -math.expm1(-slope * d) / slope
    assert discounted_integral_exact([(d, v0, slope)]) == pytest.approx(expected, rel=1e-13)


def test_grid_integral_examples():
    assert discounted_integral_grid([0.0, 1.0], [0.0, 0.0]) == 1.0
    assert discounted_integral_grid([0.0, 0.5, 1.0], [0.0, math.log(2), 0.0]) == pytest.approx(0.75)


def test_grid_step_rule():
    g = PathGridConfig()
    assert g.step_for(3.0) == 1 / 512
    assert g.step_for(0.25) == 0.25 / 512
    assert g.refined(2).step_for(3.0) == 1 / 2048
    assert PathGridConfig(base_step=0.1).step_for(5.0) == 0.1
    with pytest.raises(ValueError):
        PathGridConfig(resolution=0)


def brownian_path(n_fine, t_len, drift, sigma, seed):
    rng = np.random.default_rng(seed)
    dt = t_len / n_fine
    inc = drift * dt + sigma * math.sqrt(dt) * rng.standard_normal(n_fine)
    return np.linspace(0.0, t_len, n_fine + 1), np.concatenate(([0.0], np.cumsum(inc)))


def test_grid_integral_cauchy_on_fixed_path():
    times, v = brownian_path(2**16, 1.0, 0.06, 0.2, 7)
    vals = [discounted_integral_grid(times[:: 2**j], v[:: 2**j]) for j in range(10, 0, -1)]
    diffs = np.abs(np.diff(vals))
    fine = discounted_integral_grid(times, v)
    assert diffs[-1] < diffs[0] / 20
    assert abs(vals[-1] - fine) < 1e-5


def test_m_equals_exp_minus_v():
    spec = CycleSpec.build(gbm(0.08, 0.04), ExponentialTimes(1.0), ExponentialClaims(2.0), 1.0)
    b = simulate_cycles(spec, 2000, 3)
    assert np.allclose(b.m, np.exp(-b.v_end), rtol=1e-14, atol=0)
    assert np.allclose(b.q, b.m * b.claim - b.integral, rtol=0, atol=1e-12)


def test_q_bounds():
    spec = CycleSpec.build(gbm(0.08, 0.04), ExponentialTimes(1.0), ExponentialClaims(2.0), 1.5)
    b = simulate_cycles(spec, 5000, 4)
    assert np.all(b.q <= b.m * b.claim + 1e-15)
    assert np.all(b.q >= -1.5 * b.t * b.sup_discount - 1e-12)
    assert np.all(b.integral <= b.t * b.sup_discount + 1e-12)


def test_cycles_are_stationary():
    spec = CycleSpec.build(gbm(0.08, 0.04), ExponentialTimes(1.0), ExponentialClaims(2.0), 1.0, grid=PathGridConfig(resolution=8))
    a = simulate_cycles(spec, 50_000, 5)
    b = simulate_cycles(spec, 50_000, 5, start=50_000)
    assert stats.ks_2samp(a.m, b.m).pvalue > 1e-3
    assert stats.ks_2samp(a.q, b.q).pvalue > 1e-3


def test_log_m_gaussian_for_fixed_time():
    model = gbm(0.1, 0.09)
    spec = CycleSpec.build(model, DeterministicTimes(0.7), ExponentialClaims(1.0), 1.0, grid=PathGridConfig(resolution=4))
    b = simulate_cycles(spec, 20_000, 6)
    z = (-np.log(b.m) - model.drift * 0.7) / math.sqrt(0.09 * 0.7)
    assert stats.kstest(z, "norm").pvalue > 1e-3


@pytest.mark.parametrize(
    "jumps",
    [JumpMeasure(0.8, UniformJumps(-0.3, 0.4)), JumpMeasure(1.5, DoubleExponentialLogJumps(6.0, 5.0, 0.4))],
    ids=["uniform", "dexp"],
)
def test_mgf_of_m_for_jump_models(jumps):
    model = derive_log_price_model(0.05, 0.0, jumps)
    spec = CycleSpec.build(model, DeterministicTimes(1.3), ExponentialClaims(1.0), 1.0)
    b = simulate_cycles(spec, 200_000, 8)
    for q in (0.5, 1.5):
        x = b.m**q
        se = x.std(ddof=1) / math.sqrt(len(x))
        assert abs(x.mean() - math.exp(1.3 * cumulant(model, q))) <= 4 * se


def test_grid_converges_to_exact_for_pure_jumps():
    model = derive_log_price_model(0.05, 0.0, JumpMeasure(2.0, UniformJumps(-0.5, 0.8)))
    base = CycleSpec.build(model, ExponentialTimes(1.0), ExponentialClaims(1.0), 1.0)
    exact = simulate_cycles(base.with_integrator("exact"), 200, 9)
    errs = []
    for r in (4, 16, 64):
        g = simulate_cycles(base.with_integrator("grid").with_grid(PathGridConfig(resolution=r)), 200, 9)
        assert np.allclose(g.m, exact.m, rtol=1e-12, atol=0)
        errs.append(np.mean(np.abs(g.integral - exact.integral)))
    # left-limit node values make the scheme first order at jump times
    assert 2.5 < errs[0] / errs[1] < 6 and 2.5 < errs[1] / errs[2] < 6


def test_piecewise_path_integrals():
    model = derive_log_price_model(0.05, 0.0, JumpMeasure(2.0, UniformJumps(-0.5, 0.8)))
    path = sample_piecewise_path(model, 2.0, np.random.default_rng(3))
    exact = path.exact_integral()
    # first order: each jump costs at most one step times its jump in exp(-V)
    v_pre = path.left_values(path.jump_times)
    jump_var = np.sum(np.abs(np.exp(-v_pre) - np.exp(-v_pre - path.jump_sizes)))
    for step in (1e-3, 1e-4, 1e-5):
        assert abs(path.grid_integral(step) - exact) <= step * jump_var + step**2
    simple = PiecewisePath(1.0, 0.0, np.array([0.5]), np.array([math.log(2)]))
    assert simple.exact_integral() == pytest.approx(0.5 + 0.25)
    assert np.allclose(simple.left_values([0.5, 0.75]), [0.0, math.log(2)])


def test_saturation_flag():
    model = linear_model(-800.0)
    spec = CycleSpec.build(model, DeterministicTimes(1.0), ExponentialClaims(1.0), 1.0, integrator="grid")
    b = simulate_cycles(spec, 10, 1)
    assert b.saturated.all() and np.isnan(b.m).all()
    with pytest.raises(SaturationError):
        check_flag_rate(b.flag_rate)
    assert len(b.valid()) == 0


def test_exact_integrator_rejects_brownian_part():
    with pytest.raises(ValueError, match="sigma2 = 0"):
        CycleSpec.build(gbm(0.1, 0.04), ExponentialTimes(1.0), ExponentialClaims(1.0), 1.0, integrator="exact")


def test_batches_deterministic_and_worker_independent():
    spec = CycleSpec.build(gbm(0.08, 0.04), ExponentialTimes(1.0), ExponentialClaims(2.0), 1.0, grid=PathGridConfig(resolution=8))
    a = simulate_cycles(spec, 300, 11)
    b = simulate_cycles(spec, 300, 11, workers=2)
    c = simulate_cycles(spec, 100, 11, start=200)
    assert np.array_equal(a.q, b.q)
    assert np.array_equal(a.q[200:], c.q)
    s = simulate_cycle(spec, rngmod.stream(11, 5, rngmod.CYCLES))
    assert s.Q == a.q[5]
