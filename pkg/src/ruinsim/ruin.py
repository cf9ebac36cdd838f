"""Discrete-time reduction, perpetuity sampling and ruin estimates.

Monitoring the reserve only at claim epochs gives ``X_{T_n} = e^{V_{T_n}}(u - Y_n)``
with ``Y_n = sum_{k<=n} A_{k-1} Q_k`` and ``A_n = M_1 ... M_n``.  Ruin is the
event that ``Y_n >= u`` for some ``n``, and the a.s. limit
``Y_inf = sum_n A_n Q_{n+1}`` brackets the ruin probability:

    Gbar(u) <= Psi(u) <= Gbar(u) / Gbar(0),     Gbar(u) = P(Y_inf > u).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from . import rng as rngmod
from .cycles import MAX_FLAG_RATE, CycleBatch, CycleSpec, SaturationError
from .parallel import run_indexed
from .stats import RunningMoments

DELTA_A = 1e-9
N_MAX = 10_000


class NumericalQualityError(RuntimeError):
    """A run's flagged or censored mass exceeds the acceptance threshold."""


@dataclass(frozen=True)
class PerpetuitySample:
    y_inf: float
    n_trunc: int
    a_trunc: float
    flagged: bool


@dataclass
class PerpetuityBatch:
    y_inf: np.ndarray
    n_trunc: np.ndarray
    a_trunc: np.ndarray
    flagged: np.ndarray
    saturated: np.ndarray

    def __len__(self):
        return len(self.y_inf)

    def __getitem__(self, i) -> PerpetuitySample:
        return PerpetuitySample(
            float(self.y_inf[i]), int(self.n_trunc[i]), float(self.a_trunc[i]), bool(self.flagged[i])
        )

    @property
    def flag_rate(self) -> float:
        return float(self.flagged.mean()) if len(self) else 0.0

    @property
    def saturation_count(self) -> int:
        return int(self.saturated.sum())


def perpetuity_from_cycles(m, q, delta_a: float = DELTA_A, n_max: int = N_MAX) -> PerpetuitySample:
    """Accumulate ``sum A_{n-1} Q_n`` over given cycle pairs with the same
    stopping rule as the simulator (``A_n <= delta_a`` or ``n = n_max``).

    ``m`` and ``q`` may be iterables; they are consumed lazily.
    """
    y, a, n = 0.0, 1.0, 0
    for m_n, q_n in zip(m, q):
        y += a * q_n
        a *= m_n
        n += 1
        if a <= delta_a:
            return PerpetuitySample(y, n, a, False)
        if n >= n_max:
            break
    return PerpetuitySample(y, n, a, True)


def _perpetuity_chunk(lo, hi, spec: CycleSpec, seed, domain, delta_a, n_max, skip):
    factory = rngmod.StreamFactory(seed, domain)
    m = hi - lo
    y = np.empty(m)
    n = np.empty(m, dtype=np.int64)
    a = np.empty(m)
    flagged = np.empty(m, dtype=bool)
    sat = np.empty(m, dtype=bool)
    buf = np.empty(K.OUT_SIZE)
    kern = K.perpetuity_path
    cfg, jp = spec.cfg, spec.jp
    for i in range(lo, hi):
        j = i - lo
        y[j], n[j], a[j], flagged[j], sat[j] = kern(factory(i), cfg, jp, delta_a, n_max, skip, buf)
    return {"y_inf": y, "n_trunc": n, "a_trunc": a, "flagged": flagged, "saturated": sat}


def sample_perpetuity(
    spec: CycleSpec,
    stream: np.random.Generator,
    delta_a: float = DELTA_A,
    n_max: int = N_MAX,
    skip: int = 0,
) -> PerpetuitySample:
    """One truncated draw of ``Y_inf`` from ``stream``.

    ``skip`` discards that many leading cycles, giving a draw of the shifted
    tail sum ``Y_{k, inf}``, which has the law of ``Y_inf``.
    """
    if not 0 < delta_a < 1:
        raise ValueError("delta_a must lie in (0, 1)")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    buf = np.empty(K.OUT_SIZE)
    y, n, a, flagged, _ = K.perpetuity_path(stream, spec.cfg, spec.jp, delta_a, n_max, skip, buf)
    return PerpetuitySample(float(y), int(n), float(a), bool(flagged))


def sample_perpetuities(
    spec: CycleSpec,
    n: int,
    seed: int,
    delta_a: float = DELTA_A,
    n_max: int = N_MAX,
    workers: int = 1,
    start: int = 0,
    skip: int = 0,
    domain: int = rngmod.PERPETUITY,
) -> PerpetuityBatch:
    """``n`` perpetuity draws; draw ``i`` uses stream ``(seed, start + i)``."""
    if not 0 < delta_a < 1:
        raise ValueError("delta_a must lie in (0, 1)")
    res = run_indexed(
        _perpetuity_chunk, n, (spec, seed, domain, delta_a, int(n_max), int(skip)), workers=workers, start=start
    )
    return PerpetuityBatch(**res)


# ---------------------------------------------------------------------------
# tail of the perpetuity


@dataclass(frozen=True)
class GbarTable:
    """Empirical exceedance probabilities ``P(Y_inf > u)`` with binomial errors.

    ``n_paths = None`` marks an exact (noise-free) table.
    """

    u: np.ndarray
    gbar: np.ndarray
    stderr: np.ndarray
    n_paths: int | None = None

    @property
    def counts(self) -> np.ndarray | None:
        if self.n_paths is None:
            return None
        return np.rint(self.gbar * self.n_paths).astype(np.int64)

    def __len__(self):
        return len(self.u)

    def select(self, mask) -> "GbarTable":
        return GbarTable(self.u[mask], self.gbar[mask], self.stderr[mask], self.n_paths)


def _values(samples) -> np.ndarray:
    if isinstance(samples, PerpetuityBatch):
        return samples.y_inf
    if len(samples) and isinstance(samples[0], PerpetuitySample):
        return np.array([s.y_inf for s in samples])
    return np.asarray(samples, dtype=float)


def _flagged(samples) -> np.ndarray | None:
    if isinstance(samples, PerpetuityBatch):
        return samples.flagged
    if len(samples) and isinstance(samples[0], PerpetuitySample):
        return np.array([s.flagged for s in samples])
    return None


def estimate_gbar(samples, u_grid, max_flag_rate: float = MAX_FLAG_RATE) -> GbarTable:
    """Exceedance frequencies of the perpetuity samples on ``u_grid``.

    Saturated draws (``nan``) are dropped from numerator and denominator.

    Raises
    ------
    ValueError
        On an empty sample.
    NumericalQualityError
        When more than ``max_flag_rate`` of the samples are flagged.
    """
    y = _values(samples)
    if y.size == 0:
        raise ValueError("no perpetuity samples")
    flags = _flagged(samples)
    if flags is not None and flags.mean() > max_flag_rate:
        raise NumericalQualityError(f"{flags.mean():.4%} of perpetuity samples are flagged")
    y = y[~np.isnan(y)]  # saturated draws
    u = np.atleast_1d(np.asarray(u_grid, dtype=float))
    ys = np.sort(y)
    counts = ys.size - np.searchsorted(ys, u, side="right")
    p = counts / ys.size
    se = np.sqrt(p * (1.0 - p) / ys.size)
    return GbarTable(u, p, se, int(ys.size))


def default_u_grid(samples, count: int = 20, decades: float = 2.0) -> np.ndarray:
    """Geometric grid over ``decades`` ending at the empirical 99.99% quantile.

    The lower end is raised to the 90% quantile when that is larger.
    """
    y = _values(samples)
    y = y[~np.isnan(y)]
    q90, hi = np.quantile(y, [0.90, 0.9999])
    if hi <= 0:
        raise ValueError("the sample has no positive upper tail")
    lo = max(q90, hi / 10**decades)
    return np.geomspace(lo, hi, count)


def parse_u_grid(text: str) -> np.ndarray:
    """``"geom:lo:hi:count"`` or a comma-separated list of values."""
    text = text.strip()
    if text.startswith("geom:"):
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError("expected geom:lo:hi:count")
        lo, hi, count = float(parts[1]), float(parts[2]), int(parts[3])
        if not (0 < lo < hi) or count < 1:
            raise ValueError("need 0 < lo < hi and count >= 1")
        return np.geomspace(lo, hi, count)
    vals = np.array([float(v) for v in text.split(",") if v.strip()])
    if vals.size == 0 or np.any(vals < 0):
        raise ValueError("u values must be non-negative")
    return vals


def ruin_bounds(gbar_u: float, gbar_0: float) -> tuple[float, float]:
    """Lower and upper ruin-probability bounds ``(Gbar(u), Gbar(u)/Gbar(0))``.

    The upper bound is ``nan`` (undefined) when ``Gbar(0) = 0`` in-sample;
    the bracketing needs a perpetuity that is unbounded above, under which
    ``Gbar(0) > 0``, so more paths are the remedy.
    """
    lower = float(gbar_u)
    if gbar_0 <= 0:
        return lower, math.nan
    return lower, float(gbar_u) / float(gbar_0)


@dataclass
class RuinEstimate:
    u: float
    gbar_u: float
    gbar_u_stderr: float
    gbar_0: float
    gbar_0_stderr: float
    lower: float
    upper: float
    n_paths: int
    direct: float = math.nan
    direct_stderr: float = math.nan
    notes: list[str] = field(default_factory=list)

    @property
    def upper_defined(self) -> bool:
        return not math.isnan(self.upper)

    @property
    def upper_stderr(self) -> float:
        """Delta-method error of ``Gbar(u)/Gbar(0)`` from the same sample.

        Both counts come from one sample and ``{Y > u}`` is contained in
        ``{Y > 0}``, so the ratio is a conditional frequency with ``n Gbar(0)``
        trials.
        """
        if not self.upper_defined:
            return math.nan
        r = min(self.upper, 1.0)
        return math.sqrt(r * (1.0 - r) / (self.n_paths * self.gbar_0))


def ruin_table(samples, u_grid) -> list[RuinEstimate]:
    """Paulsen-type bounds at every ``u`` in ``u_grid``."""
    u_grid = np.atleast_1d(np.asarray(u_grid, dtype=float))
    tab = estimate_gbar(samples, np.concatenate(([0.0], u_grid)))
    g0, g0_se = float(tab.gbar[0]), float(tab.stderr[0])
    out = []
    for u, g, se in zip(u_grid, tab.gbar[1:], tab.stderr[1:]):
        lo, up = ruin_bounds(g, g0)
        est = RuinEstimate(float(u), float(g), float(se), g0, g0_se, lo, up, tab.n_paths)
        if not est.upper_defined:
            est.notes.append("Gbar(0) = 0 in-sample; increase n_paths")
        out.append(est)
    return out


# ---------------------------------------------------------------------------
# direct crossing estimator


@dataclass
class DirectRun:
    """Per-path summary of ``Y_n`` run to the discount floor or horizon."""

    y_max: np.ndarray
    y_last: np.ndarray
    a_last: np.ndarray
    n_cycles: np.ndarray
    stop: np.ndarray  # 0 floor, 1 horizon, 2 saturation

    def __len__(self):
        return len(self.y_max)


@dataclass(frozen=True)
class DirectEstimate:
    """Crossing frequency with censoring diagnostics.

    ``residual_mass`` bounds the probability of a crossing after censoring,
    ``(1/n) sum Gbar((u - Y_n)/A_n) / Gbar(0)`` over censored paths, from an
    independent perpetuity sample.
    """

    u: float
    frequency: float
    stderr: float
    n_paths: int
    n_crossed: int
    n_censored_floor: int
    n_censored_horizon: int
    n_saturated: int
    residual_mass: float

    @property
    def censored_fraction(self) -> float:
        return (self.n_censored_floor + self.n_censored_horizon) / self.n_paths


def _direct_chunk(lo, hi, spec: CycleSpec, seed, domain, a_floor, n_max):
    factory = rngmod.StreamFactory(seed, domain)
    m = hi - lo
    y_max = np.empty(m)
    y_last = np.empty(m)
    a_last = np.empty(m)
    n = np.empty(m, dtype=np.int64)
    stop = np.empty(m, dtype=np.int8)
    buf = np.empty(K.OUT_SIZE)
    kern = K.direct_path
    cfg, jp = spec.cfg, spec.jp
    for i in range(lo, hi):
        j = i - lo
        y_max[j], y_last[j], a_last[j], n[j], stop[j] = kern(factory(i), cfg, jp, a_floor, n_max, buf)
    return {"y_max": y_max, "y_last": y_last, "a_last": a_last, "n_cycles": n, "stop": stop}


def simulate_direct(
    spec: CycleSpec,
    n_paths: int,
    seed: int,
    a_floor: float = DELTA_A,
    n_max: int = N_MAX,
    workers: int = 1,
    domain: int = rngmod.DIRECT,
) -> DirectRun:
    res = run_indexed(_direct_chunk, n_paths, (spec, seed, domain, a_floor, int(n_max)), workers=workers)
    return DirectRun(**res)


def direct_ruin_estimate(run: DirectRun, u: float, reference=None) -> DirectEstimate:
    """Fraction of paths with ``Y_n >= u`` before censoring.

    This is biased low: crossings after the discount floor or the cycle
    horizon are not counted.  Their probability is reported as
    ``residual_mass`` when a ``reference`` perpetuity sample is given.
    """
    if not u > 0:
        raise ValueError("u must be positive")
    n = len(run)
    ok = run.stop != 2
    crossed = ok & (run.y_max >= u)
    k = int(crossed.sum())
    p = k / n
    censored = ok & ~crossed
    residual = math.nan
    if reference is not None:
        ys = np.sort(_values(reference))
        g0 = np.mean(ys > 0)
        if g0 > 0:
            x = (u - run.y_last[censored]) / run.a_last[censored]
            tail = (ys.size - np.searchsorted(ys, x, side="right")) / ys.size
            residual = float(np.sum(tail) / g0 / n)
    return DirectEstimate(
        u=float(u),
        frequency=p,
        stderr=math.sqrt(p * (1 - p) / n),
        n_paths=n,
        n_crossed=k,
        n_censored_floor=int(np.sum(censored & (run.stop == 0))),
        n_censored_horizon=int(np.sum(censored & (run.stop == 1))),
        n_saturated=int(np.sum(~ok)),
        residual_mass=residual,
    )


# ---------------------------------------------------------------------------
# finite-horizon ruin


def _horizon_chunk(lo, hi, spec: CycleSpec, seed, domain, u, t_max):
    factory = rngmod.StreamFactory(seed, domain)
    out = np.empty(hi - lo)
    buf = np.empty(K.OUT_SIZE)
    kern = K.horizon_path
    cfg, jp = spec.cfg, spec.jp
    for i in range(lo, hi):
        out[i - lo] = kern(factory(i), cfg, jp, u, t_max, buf)
    return {"tau": out}


def finite_horizon_ruin(
    spec: CycleSpec,
    u: float,
    horizons,
    n_paths: int,
    seed: int,
    workers: int = 1,
    domain: int = rngmod.HORIZON,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Ruin frequency ``P(tau_u <= t)`` for each horizon ``t``.

    Returns ``(horizons, frequencies, stderrs)``; paths share streams across
    horizons so the frequencies are nondecreasing.
    """
    horizons = np.sort(np.atleast_1d(np.asarray(horizons, dtype=float)))
    res = run_indexed(_horizon_chunk, n_paths, (spec, seed, domain, float(u), float(horizons[-1])), workers=workers)
    tau = res["tau"]
    ok = ~np.isnan(tau)
    freq = np.array([np.mean(tau[ok] <= h) for h in horizons])
    se = np.sqrt(freq * (1 - freq) / ok.sum())
    return horizons, freq, se


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float

    def __iter__(self):
        yield self.value
        yield self.stderr


@dataclass(frozen=True)
class KestenDiagnostics:
    """Sample moments behind the implicit-renewal tail theorem."""

    e_m_beta: Estimate
    e_m_beta_logm_plus: Estimate
    e_q_beta: Estimate
    n_cycles: int
    beta: float


def kesten_diagnostics(cycles, beta: float) -> KestenDiagnostics:
    """Means of ``M^beta``, ``M^beta (ln M)^+`` and ``|Q|^beta``."""
    if isinstance(cycles, CycleBatch):
        if cycles.flag_rate > MAX_FLAG_RATE:
            raise SaturationError(f"{cycles.flag_rate:.4%} of cycles saturated")
        cycles = cycles.valid()
        m, q = cycles.m, cycles.q
    else:
        m = np.array([c.M for c in cycles])
        q = np.array([c.Q for c in cycles])
    mb = m**beta
    moments = [RunningMoments.of(mb), RunningMoments.of(mb * np.maximum(np.log(m), 0.0)),
               RunningMoments.of(np.abs(q) ** beta)]
    e1, e2, e3 = (Estimate(r.mean, r.stderr) for r in moments)
    return KestenDiagnostics(e1, e2, e3, len(m), float(beta))


@dataclass
class UnboundednessProbe:
    max_sample: float
    u_grid: np.ndarray
    fraction_above: np.ndarray
    quantile_999: float
    exceptional_class: bool
    notes: list[str] = field(default_factory=list)

    @property
    def max_to_q999(self) -> float:
        return self.max_sample / self.quantile_999 if self.quantile_999 > 0 else math.inf


def empirical_unboundedness_probe(samples, u_grid=None, report=None) -> UnboundednessProbe:
    """Sample maximum and exceedance fractions of the perpetuity draws.

    ``report`` (a condition report) supplies the exceptional-class flag, in
    which unboundedness of the perpetuity additionally needs arbitrarily short
    interarrival times.
    """
    y = _values(samples)
    if u_grid is None:
        u_grid = np.geomspace(max(np.quantile(y, 0.5), 1e-12), max(y.max(), 1e-12), 10)
    u_grid = np.sort(np.atleast_1d(np.asarray(u_grid, dtype=float)))
    ys = np.sort(y)
    frac = (ys.size - np.searchsorted(ys, u_grid, side="right")) / ys.size
    exceptional = bool(report.exceptional_class) if report is not None else False
    probe = UnboundednessProbe(float(ys[-1]), u_grid, frac, float(np.quantile(y, 0.999)), exceptional)
    if exceptional:
        probe.notes.append("exceptional class: unboundedness requires P(T <= t) > 0 for all t > 0")
    if np.ptp(y) == 0:
        probe.notes.append("all samples identical: bounded-looking sample")
    return probe
