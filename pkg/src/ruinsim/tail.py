"""Power-tail estimation for perpetuity samples.

Three views of ``Gbar(u) ~ C+ u^-beta``: the Hill estimator on upper order
statistics, a weighted log-log regression of an exceedance table, and the
median of ``u^beta Gbar(u)`` over a window.  The constant is only meaningful
when the law of ``ln M`` is non-arithmetic, which is asserted by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .ruin import GbarTable, estimate_gbar

Z95 = sps.norm.ppf(0.975)
MIN_COUNT = 50
MIN_POINTS = 5
STABILITY_TOL = 0.20


class InsufficientDataError(ValueError):
    """Too few samples or usable grid points for the requested estimator."""


@dataclass(frozen=True)
class Interval:
    value: float
    lo: float
    hi: float

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


def _upper_order(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    x = x[x > 0]
    return np.sort(x)[::-1]


def hill_estimator(samples, k: int, z: float = Z95) -> Interval:
    """Hill estimate of the tail index from the ``k`` largest samples.

    ``beta = k / sum_{i<=k} ln(X_(n-i+1) / X_(n-k))`` with the asymptotic
    normal interval ``beta (1 +- z / sqrt(k))``.  Non-positive samples are
    ignored.
    """
    if k < 10:
        raise ValueError("k must be at least 10")
    top = _upper_order(samples)
    if top.size < k + 1:
        raise InsufficientDataError(f"need {k + 1} positive samples, have {top.size}")
    s = np.sum(np.log(top[:k]) - math.log(top[k]))
    if not s > 0:
        raise InsufficientDataError("upper order statistics are tied")
    b = k / s
    w = z / math.sqrt(k)
    return Interval(b, b * (1 - w), b * (1 + w))


def default_k(n: int) -> int:
    return int(math.isqrt(n))


@dataclass(frozen=True)
class StabilityScan:
    ks: np.ndarray
    betas: np.ndarray
    relative_range: float
    stable: bool

    @property
    def warning(self) -> str | None:
        if self.stable:
            return None
        return f"no stable tail index: Hill estimates vary by {self.relative_range:.1%} over k"


def hill_stability_scan(samples, n: int | None = None, points: int = 20, tol: float = STABILITY_TOL) -> StabilityScan:
    """Hill estimates over ``k`` in ``[n^0.4, n^0.6]``.

    ``n`` defaults to the sample size; ``k`` is capped by the number of
    positive samples.  The relative range is the drift of a straight-line fit
    of the estimates against ``ln k`` across the scan, divided by their
    median; the raw spread at small ``k`` is mostly sampling noise.
    """
    top = _upper_order(samples)
    n = n if n is not None else len(np.asarray(samples))
    k_lo = max(10, int(math.ceil(n**0.4)))
    k_hi = min(int(n**0.6), top.size - 1)
    if k_hi < k_lo:
        raise InsufficientDataError("too few positive samples for the stability scan")
    ks = np.unique(np.geomspace(k_lo, k_hi, points).astype(int))
    logs = np.log(top[: k_hi + 1])
    csum = np.cumsum(logs)
    betas = ks / (csum[ks - 1] - ks * logs[ks])
    lk = np.log(ks)
    drift = np.polyfit(lk, betas, 1)[0] * np.ptp(lk) if ks.size > 1 else 0.0
    rr = float(abs(drift) / np.median(betas))
    return StabilityScan(ks, betas, rr, rr < tol)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    ci: Interval
    n_points: int
    u_window: tuple[float, float]


def _usable(table: GbarTable, min_count: int) -> np.ndarray:
    ok = table.gbar > 0
    if table.n_paths is not None:
        ok &= table.gbar < 1  # ln Gbar has no sampling variance at 1
        ok &= table.counts >= min_count
    return ok


def tail_window(table: GbarTable, decades: float = 1.0, min_count: int = MIN_COUNT) -> GbarTable:
    """The top ``decades`` of usable ``u`` (those with ``min_count``
    exceedances) ending at the largest usable grid point."""
    ok = _usable(table, min_count) & (table.u > 0)
    if not ok.any():
        raise InsufficientDataError("no grid point has enough exceedances")
    u_hi = table.u[ok].max()
    return table.select(ok & (table.u >= u_hi / 10**decades))


def loglog_slope(table: GbarTable, z: float = Z95, min_count: int = MIN_COUNT, min_points: int = MIN_POINTS) -> SlopeFit:
    """Generalised least squares of ``ln Gbar`` on ``ln u``.

    Exceedance counts at nested thresholds are correlated; for sampled tables
    the delta-method covariance is ``Cov(ln G_i, ln G_j) = (1/G_a - 1) / n``
    with ``a`` the smaller of the two thresholds.  Noise-free tables
    (``n_paths is None``) are fitted unweighted.  The standard error is scaled
    up by the residual chi-square when it exceeds its expectation.
    """
    ok = _usable(table, min_count) & (table.u > 0)
    if ok.sum() < min_points:
        raise InsufficientDataError(f"{int(ok.sum())} usable grid points, need {min_points}")
    order = np.argsort(table.u[ok])
    u = table.u[ok][order]
    x = np.log(u)
    y = np.log(table.gbar[ok][order])
    X = np.column_stack([np.ones_like(x), x])
    if table.n_paths is None:
        prec = np.eye(len(x))
    else:
        g = table.gbar[ok][order]
        v = (1.0 / g - 1.0) / table.n_paths
        idx = np.arange(len(x))
        sigma = v[np.minimum.outer(idx, idx)]
        prec = np.linalg.inv(sigma)
    cov = np.linalg.inv(X.T @ prec @ X)
    coef = cov @ (X.T @ prec @ y)
    resid = y - X @ coef
    dof = len(x) - 2
    if table.n_paths is None:
        scale = float(resid @ resid) / dof if dof > 0 else 0.0
    else:
        chi2 = float(resid @ prec @ resid)
        scale = max(1.0, chi2 / dof) if dof > 0 else 1.0
    se = math.sqrt(cov[1, 1] * scale)
    slope = float(coef[1])
    return SlopeFit(
        slope,
        float(coef[0]),
        se,
        Interval(slope, slope - z * se, slope + z * se),
        int(ok.sum()),
        (float(u[0]), float(u[-1])),
    )


@dataclass(frozen=True)
class CPlusEstimate:
    value: float
    ci: Interval
    trend_slope: float
    trend_pvalue: float
    trend_flag: bool
    conditional: bool
    u_window: tuple[float, float]
    spread: float

    @property
    def label(self) -> str:
        return "conditional on non-arithmetic ln M" if self.conditional else "unconditional"


def estimate_c_plus(
    table: GbarTable,
    beta: float,
    nonarithmetic: bool = True,
    n_boot: int = 1000,
    seed: int = 0,
    alpha: float = 0.05,
    trend_level: float = 0.01,
    trend_change: float = 0.10,
) -> CPlusEstimate:
    """Median of ``u^beta Gbar(u)`` over the rows of ``table``.

    The interval is a percentile bootstrap over table rows.  The trend test
    regresses ``ln(u^beta Gbar)`` on ``ln u`` (by GLS with the nested-count
    covariance for sampled tables) and flags a significant slope
    (level ``trend_level``) that moves the product by more than
    ``trend_change`` across the window.  ``spread`` is the max/min ratio of
    the product minus one.
    """
    ok = (table.gbar > 0) & (table.u > 0)
    if not ok.any():
        raise InsufficientDataError("empty window")
    u = table.u[ok]
    v = u**beta * table.gbar[ok]
    c = float(np.median(v))
    if len(v) > 1:
        rng = np.random.default_rng(seed)
        boots = np.median(v[rng.integers(0, len(v), (n_boot, len(v)))], axis=1)
        lo, hi = np.quantile(boots, [alpha / 2, 1 - alpha / 2])
    else:
        lo = hi = c
    slope, pval = 0.0, 1.0
    if len(v) >= 3 and table.n_paths is not None:
        # sampled rows are correlated, so test the GLS slope of ln Gbar
        fit = loglog_slope(table.select(ok), min_count=0, min_points=3)
        slope = fit.slope + beta
        pval = float(2 * sps.norm.sf(abs(slope) / fit.stderr)) if fit.stderr > 0 else float(slope == 0)
    elif len(v) >= 3:
        fit = sps.linregress(np.log(u), np.log(v))
        slope = float(fit.slope)
        pval = float(fit.pvalue) if np.isfinite(fit.pvalue) else (0.0 if slope != 0 else 1.0)
    change = math.expm1(abs(slope) * math.log(u.max() / u.min())) if len(v) > 1 else 0.0
    flag = pval < trend_level and change > trend_change
    return CPlusEstimate(
        c,
        Interval(c, float(lo), float(hi)),
        slope,
        pval,
        bool(flag),
        bool(nonarithmetic),
        (float(u.min()), float(u.max())),
        float(v.max() / v.min() - 1.0),
    )


@dataclass(frozen=True)
class LatticeCheck:
    """Kolmogorov distance of ``frac(ln M / h)`` from uniform, maximised over
    candidate spans ``h``.  A value near 1 means the sample sits on a lattice."""

    max_distance: float
    span: float
    lattice_suspected: bool


def lattice_heuristic(log_m, n_spans: int = 200, threshold: float = 0.5) -> LatticeCheck:
    x = np.asarray(log_m, dtype=float)
    x = x[np.isfinite(x)]
    if x.size < 2 or np.ptp(x) == 0:
        return LatticeCheck(1.0, 0.0, True)
    s = float(np.std(x))
    best, span = 0.0, math.nan
    n = x.size
    grid = (np.arange(n) + 0.5) / n
    for h in np.geomspace(1e-3 * s, 0.5 * s, n_spans):
        f = np.sort(np.mod(x / h, 1.0))
        d = float(np.max(np.abs(f - grid))) + 0.5 / n
        if d > best:
            best, span = d, float(h)
    return LatticeCheck(best, span, best > threshold)


@dataclass
class TailEstimate:
    beta_hat_hill: Interval
    beta_hat_slope: Interval
    c_plus_hat: CPlusEstimate | None
    k_used: int
    u_window: tuple[float, float]
    stability: StabilityScan | None = None
    slope_fit: SlopeFit | None = None
    warnings: list[str] = field(default_factory=list)

    def discrepancy(self, beta: float) -> dict[str, float]:
        """Distance of each estimate from ``beta`` in half-CI units."""
        out = {}
        for name, iv in (("hill", self.beta_hat_hill), ("slope", self.beta_hat_slope)):
            half = 0.5 * (iv.hi - iv.lo)
            out[name] = (iv.value - beta) / half if half > 0 else math.inf
        return out

    def rows(self) -> list[tuple]:
        """``(estimator, value, ci_lo, ci_hi, k_or_window)`` rows."""
        win = f"{self.u_window[0]!r}:{self.u_window[1]!r}"
        rows = [
            ("hill", self.beta_hat_hill.value, self.beta_hat_hill.lo, self.beta_hat_hill.hi, str(self.k_used)),
            ("loglog_slope", self.beta_hat_slope.value, self.beta_hat_slope.lo, self.beta_hat_slope.hi, win),
        ]
        if self.c_plus_hat is not None:
            c = self.c_plus_hat
            rows.append(("c_plus", c.value, c.ci.lo, c.ci.hi, win))
        return rows


def analyze_tail(
    samples,
    beta: float | None = None,
    u_grid=None,
    k: int | None = None,
    nonarithmetic: bool = False,
    seed: int = 0,
) -> TailEstimate:
    """Hill, log-log and constant estimates from raw perpetuity samples.

    ``u_grid`` defaults to 40 geometric points between the positive-part
    0.1 quantile and the sample maximum; the fit window is the top decade of
    points carrying at least 50 exceedances.  ``C+`` is estimated only when
    ``beta`` is given.
    """
    y = np.asarray(samples, dtype=float)
    n = y.size
    pos = y[y > 0]
    if pos.size < 20:
        raise InsufficientDataError("fewer than 20 positive samples")
    k = k if k is not None else default_k(n)
    k = min(k, pos.size - 1)
    warnings = []
    hill = hill_estimator(pos, k)
    try:
        scan = hill_stability_scan(y)
        if scan.warning:
            warnings.append(scan.warning)
    except InsufficientDataError as e:
        scan = None
        warnings.append(str(e))
    if u_grid is None:
        u_grid = np.geomspace(np.quantile(pos, 0.1), pos.max(), 40)
    table = estimate_gbar(y, u_grid)
    window = tail_window(table)
    fit = loglog_slope(window)
    slope_beta = Interval(-fit.slope, -fit.ci.hi, -fit.ci.lo)
    c_plus = None
    if beta is not None:
        c_plus = estimate_c_plus(window, beta, nonarithmetic=nonarithmetic, seed=seed)
        if c_plus.trend_flag:
            warnings.append("u^beta Gbar(u) trends across the window")
        if not nonarithmetic:
            warnings.append("C+ is reported without a non-arithmetic assertion")
    return TailEstimate(hill, slope_beta, c_plus, k, fit.u_window, scan, fit, warnings)
