import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from ruinsim import rng as rngmod
from ruinsim.stats import RunningMoments, mean_stderr, neumaier_sum


@given(st.integers(0, 2**63), st.integers(0, 10**9), st.sampled_from([rngmod.PERPETUITY, rngmod.CYCLES, rngmod.DIRECT]))
@settings(max_examples=50, deadline=None)
def test_factory_matches_fresh_stream(seed, index, domain):
    factory = rngmod.StreamFactory(seed, domain)
    factory(index + 1).random(7)
    a = factory(index).random(10)
    b = rngmod.stream(seed, index, domain).random(10)
    assert np.array_equal(a, b)


def test_domains_and_indices_differ():
    base = rngmod.stream(1, 0, rngmod.PERPETUITY).random(4)
    assert not np.array_equal(base, rngmod.stream(1, 0, rngmod.DIRECT).random(4))
    assert not np.array_equal(base, rngmod.stream(1, 1, rngmod.PERPETUITY).random(4))
    assert not np.array_equal(base, rngmod.stream(2, 0, rngmod.PERPETUITY).random(4))


def test_factory_normals_match_fresh_stream():
    f = rngmod.StreamFactory(9, rngmod.CYCLES)
    for i in (3, 0, 3):
        assert np.array_equal(f(i).standard_normal(5), rngmod.stream(9, i, rngmod.CYCLES).standard_normal(5))


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=60), st.integers(1, 59))
@settings(max_examples=100, deadline=None)
def test_merge_matches_single_pass(xs, cut):
    cut = min(cut, len(xs) - 1)
    whole = RunningMoments.of(xs)
    merged = RunningMoments.of(xs[:cut]).merge(RunningMoments.of(xs[cut:]))
    assert merged.n == whole.n
    assert math.isclose(merged.mean, whole.mean, rel_tol=1e-9, abs_tol=1e-6)
    assert math.isclose(merged.m2, whole.m2, rel_tol=1e-7, abs_tol=1e-3)


def test_push_matches_of():
    x = np.random.default_rng(0).normal(3.0, 2.0, 1000)
    r = RunningMoments()
    for v in x:
        r.push(v)
    ref = RunningMoments.of(x)
    assert math.isclose(r.mean, ref.mean, rel_tol=1e-12)
    assert math.isclose(r.variance, np.var(x, ddof=1), rel_tol=1e-10)


def test_empty_and_singleton():
    assert RunningMoments.of([]).n == 0
    assert math.isnan(RunningMoments.of([1.0]).stderr)
    r = RunningMoments().merge(RunningMoments.of([1.0, 2.0]))
    assert r.n == 2 and r.mean == 1.5


def test_mean_stderr():
    m, se = mean_stderr([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5
    assert math.isclose(se, math.sqrt(np.var([1, 2, 3, 4], ddof=1) / 4))


def test_neumaier_cancellation():
    assert neumaier_sum([1.0, 1e100, 1.0, -1e100]) == 2.0
    assert neumaier_sum([0.1] * 10) == math.fsum([0.1] * 10)
