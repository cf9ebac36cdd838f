import math

import numpy as np
import pytest

from ruinsim import ExponentialClaims, ExponentialTimes, gbm
from ruinsim.cycles import CycleSpec, PathGridConfig

REF_A = 0.08
REF_SIGMA2 = 0.04
REF_C = 1.0

_CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def ref_model():
    return gbm(REF_A, REF_SIGMA2)


@pytest.fixture(scope="session")
def ref_laws():
    return ExponentialTimes(1.0), ExponentialClaims(2.0)


@pytest.fixture(scope="session")
def ref_spec_factory(ref_model, ref_laws):
    def make(resolution=512, refinement=0):
        ia, cl = ref_laws
        return CycleSpec.build(ref_model, ia, cl, REF_C, grid=PathGridConfig(resolution=resolution, refinement=refinement))

    return make


COARSE = 4
N_PERP = 1_000_000
PERP_SEED = 20240611


@pytest.fixture(scope="session")
def ref_perpetuities(ref_spec_factory):
    """``(batch, seconds)``: 10^6 reference perpetuity draws on the coarse grid."""
    import time

    from ruinsim.ruin import sample_perpetuities

    t0 = time.perf_counter()
    batch = sample_perpetuities(ref_spec_factory(resolution=COARSE), N_PERP, PERP_SEED)
    return batch, time.perf_counter() - t0


@pytest.fixture
def criterion():
    """Record ``(name, passed, detail)``; one line per criterion is printed in
    the terminal summary, and the test then asserts ``passed``."""

    def record(name: str, passed: bool, detail: str):
        _CRITERIA.append((name, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        assert passed, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
