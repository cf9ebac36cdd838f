"""Renewal-cycle simulation of the log price.

A cycle runs from one claim epoch to the next.  It yields the pair

    M = exp(-V_T),     Q = M |xi| - c int_0^T exp(-V_r) dr,

whose i.i.d. copies drive the discrete-time chain ``Y_n``.  Between jumps the
log price is ``drift * t + sigma W_t``; jumps arrive as a compound Poisson
process with log-sizes from the push-forward jump law.  The discounted
integral is exact for ``sigma = 0`` and a trapezoid on a time grid otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from . import rng as rngmod
from .distributions import ClaimLaw, InterarrivalLaw
from .model import LevyModel
from .parallel import run_indexed

DEFAULT_RESOLUTION = 512
MAX_FLAG_RATE = 1e-4


class SaturationError(FloatingPointError):
    """Too many samples hit the exp(-V) range limit."""


@dataclass(frozen=True)
class PathGridConfig:
    """Time grid for the Brownian part.

    With ``base_step=None`` the step is ``min(T, 1) / resolution`` for a cycle
    of length ``T``; each ``refinement`` halves it.
    """

    base_step: float | None = None
    refinement: int = 0
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        if self.base_step is not None and not self.base_step > 0:
            raise ValueError("base_step must be positive")
        if self.refinement < 0:
            raise ValueError("refinement must be >= 0")
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")

    def refined(self, k: int = 1) -> "PathGridConfig":
        return PathGridConfig(self.base_step, self.refinement + k, self.resolution)

    def step_for(self, t_len: float) -> float:
        base = self.base_step if self.base_step is not None else min(t_len, 1.0) / self.resolution
        return base / 2.0**self.refinement


@dataclass(frozen=True)
class CycleSample:
    M: float
    Q: float
    T: float
    v_end: float = math.nan
    integral: float = math.nan
    claim: float = math.nan
    sup_discount: float = math.nan
    n_jumps: int = 0
    saturated: bool = False


@dataclass(frozen=True)
class CycleSpec:
    """Flat parameter arrays consumed by the compiled kernels."""

    cfg: np.ndarray
    jp: np.ndarray

    @classmethod
    def build(
        cls,
        model: LevyModel,
        interarrival: InterarrivalLaw,
        claim: ClaimLaw,
        c: float,
        grid: PathGridConfig | None = None,
        integrator: str = "auto",
    ) -> "CycleSpec":
        if not c > 0:
            raise ValueError("premium rate c must be positive")
        grid = grid or PathGridConfig()
        mode = {"auto": K.MODE_AUTO, "grid": K.MODE_GRID, "exact": K.MODE_EXACT}[integrator]
        if mode == K.MODE_EXACT and model.sigma2 > 0:
            raise ValueError("the exact integrator needs sigma2 = 0")
        cfg = np.zeros(K.CFG_SIZE)
        cfg[K.DRIFT] = model.drift
        cfg[K.SIGMA] = model.sigma
        law = model.jump_law
        if law is not None:
            cfg[K.LAM] = model.jumps.intensity
            cfg[K.JUMP_CODE] = law.code
            jp = np.asarray(law.kernel_params(), dtype=float)
        else:
            jp = np.zeros(1)
        cfg[K.IA_CODE] = interarrival.code
        cfg[K.IA_P0], cfg[K.IA_P1] = interarrival.params()
        cfg[K.CL_CODE] = claim.code
        cfg[K.CL_P0], cfg[K.CL_P1] = claim.params()
        cfg[K.PREMIUM] = c
        cfg[K.RESOLUTION] = grid.resolution
        cfg[K.BASE_STEP] = grid.base_step or 0.0
        cfg[K.REFINE] = grid.refinement
        cfg[K.MODE] = mode
        return cls(cfg, jp)

    def with_integrator(self, integrator: str) -> "CycleSpec":
        cfg = self.cfg.copy()
        cfg[K.MODE] = {"auto": K.MODE_AUTO, "grid": K.MODE_GRID, "exact": K.MODE_EXACT}[integrator]
        return CycleSpec(cfg, self.jp)

    def with_grid(self, grid: PathGridConfig) -> "CycleSpec":
        cfg = self.cfg.copy()
        cfg[K.RESOLUTION] = grid.resolution
        cfg[K.BASE_STEP] = grid.base_step or 0.0
        cfg[K.REFINE] = grid.refinement
        return CycleSpec(cfg, self.jp)


def simulate_cycle(spec: CycleSpec, stream: np.random.Generator) -> CycleSample:
    """Simulate one cycle from ``stream``."""
    out = np.empty(K.OUT_SIZE)
    sat = K.simulate_cycle(stream, spec.cfg, spec.jp, out)
    return CycleSample(
        M=out[K.OUT_M],
        Q=out[K.OUT_Q],
        T=out[K.OUT_T],
        v_end=out[K.OUT_V],
        integral=out[K.OUT_INTEGRAL],
        claim=out[K.OUT_CLAIM],
        sup_discount=out[K.OUT_SUP],
        n_jumps=int(out[K.OUT_JUMPS]),
        saturated=bool(sat),
    )


CYCLE_FIELDS = ("m", "q", "t", "v_end", "integral", "claim", "sup_discount", "n_jumps", "saturated")


def _cycles_chunk(lo: int, hi: int, spec: CycleSpec, seed: int, domain: int) -> dict[str, np.ndarray]:
    factory = rngmod.StreamFactory(seed, domain)
    out = np.empty((hi - lo, K.OUT_SIZE))
    sat = np.zeros(hi - lo, dtype=bool)
    buf = np.empty(K.OUT_SIZE)
    kern = K.cycle_path
    cfg, jp = spec.cfg, spec.jp
    for i in range(lo, hi):
        sat[i - lo] = kern(factory(i), cfg, jp, buf)
        out[i - lo] = buf
    return {
        "m": out[:, K.OUT_M],
        "q": out[:, K.OUT_Q],
        "t": out[:, K.OUT_T],
        "v_end": out[:, K.OUT_V],
        "integral": out[:, K.OUT_INTEGRAL],
        "claim": out[:, K.OUT_CLAIM],
        "sup_discount": out[:, K.OUT_SUP],
        "n_jumps": out[:, K.OUT_JUMPS].astype(np.int64),
        "saturated": sat,
    }


@dataclass
class CycleBatch:
    """Struct-of-arrays view of many cycles, one stream per cycle."""

    m: np.ndarray
    q: np.ndarray
    t: np.ndarray
    v_end: np.ndarray
    integral: np.ndarray
    claim: np.ndarray
    sup_discount: np.ndarray
    n_jumps: np.ndarray
    saturated: np.ndarray

    def __len__(self):
        return len(self.m)

    @property
    def flag_rate(self) -> float:
        return float(self.saturated.mean()) if len(self) else 0.0

    def sample(self, i: int) -> CycleSample:
        return CycleSample(
            self.m[i], self.q[i], self.t[i], self.v_end[i], self.integral[i],
            self.claim[i], self.sup_discount[i], int(self.n_jumps[i]), bool(self.saturated[i]),
        )

    def sample_slice(self, lo: int, hi: int) -> "CycleBatch":
        return CycleBatch(**{f: getattr(self, f)[lo:hi] for f in CYCLE_FIELDS})

    def valid(self) -> "CycleBatch":
        keep = ~self.saturated
        return CycleBatch(**{f: getattr(self, f)[keep] for f in CYCLE_FIELDS})


def simulate_cycles(
    spec: CycleSpec,
    n: int,
    seed: int,
    workers: int = 1,
    start: int = 0,
    domain: int = rngmod.CYCLES,
) -> CycleBatch:
    """Simulate cycles ``start .. start + n - 1``; cycle ``i`` uses stream
    ``(seed, i)`` in ``domain``."""
    res = run_indexed(_cycles_chunk, n, (spec, seed, domain), workers=workers, start=start)
    return CycleBatch(**res)


def check_flag_rate(rate: float, limit: float = MAX_FLAG_RATE) -> None:
    if rate > limit:
        raise SaturationError(f"{rate:.3%} of samples saturated (limit {limit:.3%})")


# ---------------------------------------------------------------------------
# discounted integrals on explicit paths


def discounted_integral_exact(segments) -> float:
    """Exact ``int exp(-V)`` for a piecewise-linear log price.

    ``segments`` is a sequence of ``(duration, start_value, slope)``; on each
    piece ``V = start_value + slope * s``.
    """
    total = 0.0
    for d, v0, slope in segments:
        total += K.segment_integral(float(v0), float(slope), float(d))
    return total


def discounted_integral_grid(times, v_left) -> float:
    """Trapezoid of ``exp(-V)`` over nodes ``times`` using left-limit values
    ``v_left`` (which coincide with ``V`` away from jump times)."""
    times = np.asarray(times, dtype=float)
    f = np.exp(-np.asarray(v_left, dtype=float))
    return float(np.sum(0.5 * np.diff(times) * (f[1:] + f[:-1])))


@dataclass(frozen=True)
class PiecewisePath:
    """Log price without Brownian part on ``[0, t_len]``."""

    t_len: float
    slope: float
    jump_times: np.ndarray
    jump_sizes: np.ndarray

    def segments(self) -> list[tuple[float, float, float]]:
        segs = []
        t, v = 0.0, 0.0
        for tj, yj in zip(self.jump_times, self.jump_sizes):
            segs.append((tj - t, v, self.slope))
            v += self.slope * (tj - t) + yj
            t = tj
        segs.append((self.t_len - t, v, self.slope))
        return segs

    def left_values(self, times) -> np.ndarray:
        """``V(s-)`` at the given times."""
        times = np.asarray(times, dtype=float)
        cum = np.concatenate(([0.0], np.cumsum(self.jump_sizes)))
        n_before = np.searchsorted(self.jump_times, times, side="left")
        return self.slope * times + cum[n_before]

    def grid_nodes(self, step: float) -> np.ndarray:
        k = int(math.floor(self.t_len / step))
        grid = step * np.arange(k + 1)
        nodes = np.union1d(grid, self.jump_times)
        if nodes[-1] < self.t_len:
            nodes = np.append(nodes, self.t_len)
        return nodes

    def grid_integral(self, step: float) -> float:
        nodes = self.grid_nodes(step)
        return discounted_integral_grid(nodes, self.left_values(nodes))

    def exact_integral(self) -> float:
        return discounted_integral_exact(self.segments())


def sample_piecewise_path(model: LevyModel, t_len: float, rng: np.random.Generator) -> PiecewisePath:
    """Draw a pure-jump log-price path on ``[0, t_len]`` (requires sigma2 = 0)."""
    if model.sigma2 != 0:
        raise ValueError("piecewise paths need sigma2 = 0")
    if model.jumps_V.active:
        n = rng.poisson(model.jumps_V.intensity * t_len)
        times = np.sort(t_len * rng.random(n))
        sizes = np.asarray(model.jumps_V.law.sample(rng, n), dtype=float)
    else:
        times = sizes = np.empty(0)
    return PiecewisePath(float(t_len), model.drift, times, sizes)


def sample_log_price(model: LevyModel, t: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Exact draws of ``V_t`` (drift, Gaussian part and compound Poisson jumps)."""
    v = model.drift * t + math.sqrt(model.sigma2 * t) * rng.standard_normal(size)
    if model.jumps_V.active:
        counts = rng.poisson(model.jumps_V.intensity * t, size)
        total = int(counts.sum())
        if total:
            sizes = np.asarray(model.jumps_V.law.sample(rng, total), dtype=float)
            owner = np.repeat(np.arange(size), counts)
            v += np.bincount(owner, weights=sizes, minlength=size)
    return v
