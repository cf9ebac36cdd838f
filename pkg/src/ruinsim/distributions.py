"""Interarrival, claim-size and price-jump laws.

All families are frozen dataclasses that can be sampled with a
:class:`numpy.random.Generator` and queried for the closed-form moments the
ruin theory needs (fractional moments of claims, exponential moments of
interarrival times, truncated moments of jumps).  Each family also carries an
integer ``code`` and a parameter vector so the compiled cycle kernel can
sample it without Python callbacks.

Claim laws describe the *magnitude* ``|xi|`` of a claim; the sign is applied
by the simulator.  Jump laws describe the relative price jump ``x > -1`` of
the return process; ``ln(1 + x)`` is the matching jump of the log price.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

INF = math.inf

QUAD_EPSABS = 1e-10


class QuadratureError(ArithmeticError):
    """A jump-measure integral could not be evaluated to tolerance."""


def _expm1_over(z: float, d: float) -> float:
    """``(exp(z*d) - 1) / z`` with the ``z -> 0`` limit ``d``."""
    if z == 0.0:
        return d
    return math.expm1(z * d) / z


def _quad(f: Callable[[float], float], lo: float, hi: float) -> tuple[float, float]:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, lo, hi, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=200)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(str(exc)) from exc
    if not math.isfinite(val):
        raise QuadratureError(f"non-finite integral on [{lo}, {hi}]")
    return val, err


# ---------------------------------------------------------------------------
# interarrival times


class InterarrivalLaw:
    code: int = -1

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def exp_moment(self, eps: float) -> float:
        """``E exp(eps * T)``; ``+inf`` when the moment diverges.

        Negative ``eps`` is allowed (Laplace transform), which is how
        ``E M^p = E exp(T H(p))`` is evaluated for the price factor.
        """
        raise NotImplementedError

    def exp_moment_abscissa(self) -> float:
        """Supremum of ``eps`` with ``E exp(eps T) < inf``."""
        raise NotImplementedError

    def charges_small_times(self) -> bool:
        """Whether ``P(T <= t) > 0`` for every ``t > 0``."""
        raise NotImplementedError

    def params(self) -> tuple[float, float]:
        raise NotImplementedError


@dataclass(frozen=True)
class ExponentialTimes(InterarrivalLaw):
    """Poisson claim arrivals (the Lundberg-Cramer case)."""

    rate: float
    code = 0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def mean(self):
        return 1.0 / self.rate

    def exp_moment(self, eps):
        return self.rate / (self.rate - eps) if eps < self.rate else INF

    def exp_moment_abscissa(self):
        return self.rate

    def charges_small_times(self):
        return True

    def params(self):
        return (self.rate, 0.0)


@dataclass(frozen=True)
class GammaTimes(InterarrivalLaw):
    shape: float
    rate: float
    code = 1

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("shape and rate must be positive")

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def mean(self):
        return self.shape / self.rate

    def exp_moment(self, eps):
        if eps >= self.rate:
            return INF
        return (self.rate / (self.rate - eps)) ** self.shape

    def exp_moment_abscissa(self):
        return self.rate

    def charges_small_times(self):
        return True

    def params(self):
        return (self.shape, self.rate)


@dataclass(frozen=True)
class DeterministicTimes(InterarrivalLaw):
    value: float
    code = 2

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("value must be positive")

    def sample(self, rng, size=None):
        if size is None:
            return float(self.value)
        return np.full(size, float(self.value))

    def mean(self):
        return self.value

    def exp_moment(self, eps):
        return math.exp(eps * self.value)

    def exp_moment_abscissa(self):
        return INF

    def charges_small_times(self):
        return False

    def params(self):
        return (self.value, 0.0)


@dataclass(frozen=True)
class UniformTimes(InterarrivalLaw):
    lo: float
    hi: float
    code = 3

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi):
            raise ValueError("need 0 <= lo < hi")

    def sample(self, rng, size=None):
        return rng.uniform(self.lo, self.hi, size)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def exp_moment(self, eps):
        width = self.hi - self.lo
        return math.exp(eps * self.lo) * _expm1_over(eps, width) / width

    def exp_moment_abscissa(self):
        return INF

    def charges_small_times(self):
        return self.lo == 0.0

    def params(self):
        return (self.lo, self.hi)


# ---------------------------------------------------------------------------
# claim magnitudes


class ClaimLaw:
    code: int = -1
    bounded: bool = False

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def fractional_moment(self, p: float) -> float:
        """``E |xi|^p`` for ``p > 0``; ``+inf`` when it diverges."""
        raise NotImplementedError

    def moment_index(self) -> float:
        """Supremum of ``p`` with ``E |xi|^p < inf``."""
        return INF

    def mean(self) -> float:
        return self.fractional_moment(1.0)

    def params(self) -> tuple[float, float]:
        raise NotImplementedError


@dataclass(frozen=True)
class ExponentialClaims(ClaimLaw):
    rate: float
    code = 0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)

    def fractional_moment(self, p):
        return math.exp(special.gammaln(p + 1.0) - p * math.log(self.rate))

    def params(self):
        return (self.rate, 0.0)


@dataclass(frozen=True)
class ParetoClaims(ClaimLaw):
    """Classical Pareto: ``P(|xi| > x) = (scale / x)^index`` for ``x >= scale``."""

    scale: float
    index: float
    code = 1

    def __post_init__(self):
        if not (self.scale > 0 and self.index > 0):
            raise ValueError("scale and index must be positive")

    def sample(self, rng, size=None):
        # numpy's pareto is the Lomax law; shift to the classical one
        return self.scale * (1.0 + rng.pareto(self.index, size))

    def fractional_moment(self, p):
        if p >= self.index:
            return INF
        return self.scale**p * self.index / (self.index - p)

    def moment_index(self):
        return self.index

    def params(self):
        return (self.scale, self.index)


@dataclass(frozen=True)
class LogNormalClaims(ClaimLaw):
    mu: float
    sigma: float
    code = 2

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def sample(self, rng, size=None):
        return rng.lognormal(self.mu, self.sigma, size)

    def fractional_moment(self, p):
        return math.exp(p * self.mu + 0.5 * p * p * self.sigma**2)

    def params(self):
        return (self.mu, self.sigma)


@dataclass(frozen=True)
class UniformClaims(ClaimLaw):
    lo: float
    hi: float
    code = 3
    bounded = True

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi):
            raise ValueError("need 0 <= lo < hi")

    def sample(self, rng, size=None):
        return rng.uniform(self.lo, self.hi, size)

    def fractional_moment(self, p):
        return (self.hi ** (p + 1) - self.lo ** (p + 1)) / ((p + 1) * (self.hi - self.lo))

    def params(self):
        return (self.lo, self.hi)


# ---------------------------------------------------------------------------
# price jumps

LN2 = math.log(2.0)
# h(ln(1+x)) is non-zero exactly for x in [e^-1 - 1, e - 1]
X_LOG_LO = math.exp(-1.0) - 1.0
X_LOG_HI = math.e - 1.0


class JumpLaw:
    """Probability law of a relative jump ``x`` of the return process.

    Subclasses supply closed forms for the functionals entering the log-price
    triplet and the cumulant; :class:`DensityJumps` falls back to quadrature.
    ``h`` is the truncation ``h(x) = x 1{|x| <= 1}`` and ``hbar = x - h``.
    """

    code: int = -1

    def sample(self, rng: np.random.Generator, size=None):
        """Relative jumps ``x``."""
        raise NotImplementedError

    def sample_log(self, rng: np.random.Generator, size=None):
        """Log-price jumps ``y = ln(1 + x)`` drawn directly."""
        raise NotImplementedError

    def mean_h(self) -> float:
        """``E h(x)``."""
        raise NotImplementedError

    def mean_abs_h(self) -> float:
        """``E |h(x)|``."""
        raise NotImplementedError

    def mean_h_log(self) -> float:
        """``E h(ln(1+x))``."""
        raise NotImplementedError

    def mean_hbar_log(self) -> float:
        """``E hbar(ln(1+x))``; may be ``-inf`` or ``+inf``."""
        raise NotImplementedError

    def laplace_log(self, q: float) -> float:
        """``E (1+x)^(-q)``, ``+inf`` outside the domain."""
        raise NotImplementedError

    def log_domain(self) -> tuple[float, float]:
        """Open interval of ``q`` where :meth:`laplace_log` is finite."""
        raise NotImplementedError

    def prob_negative(self) -> float:
        raise NotImplementedError

    def prob_positive(self) -> float:
        raise NotImplementedError

    def is_lattice(self) -> bool:
        return False

    def kernel_params(self) -> np.ndarray:
        raise NotImplementedError

    def quad_error(self) -> float:
        return 0.0


@dataclass(frozen=True)
class AtomicJumps(JumpLaw):
    """Finitely many jump sizes ``points`` with probabilities ``weights``."""

    points: tuple
    weights: tuple
    code = 1

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        w = np.asarray(self.weights, dtype=float)
        if len(pts) == 0 or len(pts) != len(w):
            raise ValueError("points and weights must be non-empty and of equal length")
        if min(pts) <= -1.0:
            raise ValueError("jump sizes must lie strictly above -1")
        if any(p == 0.0 for p in pts):
            raise ValueError("a jump of size 0 is not a jump")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", tuple(float(x) for x in w / w.sum()))

    @property
    def _x(self):
        return np.array(self.points)

    @property
    def _w(self):
        return np.array(self.weights)

    @property
    def _y(self):
        return np.log1p(self._x)

    def sample(self, rng, size=None):
        return rng.choice(self._x, size=size, p=self._w)

    def sample_log(self, rng, size=None):
        return rng.choice(self._y, size=size, p=self._w)

    def mean_h(self):
        x = self._x
        return float(np.sum(self._w * np.where(np.abs(x) <= 1, x, 0.0)))

    def mean_abs_h(self):
        x = self._x
        return float(np.sum(self._w * np.where(np.abs(x) <= 1, np.abs(x), 0.0)))

    def mean_h_log(self):
        y = self._y
        return float(np.sum(self._w * np.where(np.abs(y) <= 1, y, 0.0)))

    def mean_hbar_log(self):
        y = self._y
        return float(np.sum(self._w * np.where(np.abs(y) > 1, y, 0.0)))

    def laplace_log(self, q):
        return float(np.sum(self._w * np.exp(-q * self._y)))

    def log_domain(self):
        return (-INF, INF)

    def prob_negative(self):
        return float(np.sum(self._w[self._x < 0]))

    def prob_positive(self):
        return float(np.sum(self._w[self._x > 0]))

    def is_lattice(self):
        return True

    def kernel_params(self):
        cw = np.cumsum(self._w)
        cw[-1] = 1.0
        return np.concatenate(([len(self.points)], self._y, cw))


@dataclass(frozen=True)
class UniformJumps(JumpLaw):
    """Relative jumps uniform on ``(lo, hi)`` with ``-1 < lo < hi``."""

    lo: float
    hi: float
    code = 2

    def __post_init__(self):
        if not (-1.0 < self.lo < self.hi < INF):
            raise ValueError("need -1 < lo < hi < inf")

    @property
    def _width(self):
        return self.hi - self.lo

    def sample(self, rng, size=None):
        return rng.uniform(self.lo, self.hi, size)

    def sample_log(self, rng, size=None):
        # inverse CDF of y = ln(1+x)
        return np.log1p(self.lo + self._width * rng.random(size))

    def _int_x(self, lo, hi):
        lo, hi = max(lo, self.lo), min(hi, self.hi)
        return 0.5 * (hi * hi - lo * lo) if hi > lo else 0.0

    def mean_h(self):
        return self._int_x(-1.0, 1.0) / self._width

    def mean_abs_h(self):
        return (self._int_x(0.0, 1.0) - self._int_x(-1.0, 0.0)) / self._width

    @staticmethod
    def _g(x):
        # antiderivative of ln(1+x)
        return (1.0 + x) * math.log1p(x) - (1.0 + x)

    def _int_log(self, lo, hi):
        lo, hi = max(lo, self.lo), min(hi, self.hi)
        return self._g(hi) - self._g(lo) if hi > lo else 0.0

    def mean_h_log(self):
        return self._int_log(X_LOG_LO, X_LOG_HI) / self._width

    def mean_hbar_log(self):
        return (self._int_log(self.lo, self.hi) - self._int_log(X_LOG_LO, X_LOG_HI)) / self._width

    def laplace_log(self, q):
        a, b = math.log1p(self.lo), math.log1p(self.hi)
        # int (1+x)^-q dx = int e^{(1-q) y} dy over [a, b]
        z = 1.0 - q
        return math.exp(z * a) * _expm1_over(z, b - a) / self._width

    def log_domain(self):
        return (-INF, INF)

    def prob_negative(self):
        return max(0.0, min(self.hi, 0.0) - self.lo) / self._width

    def prob_positive(self):
        return max(0.0, self.hi - max(self.lo, 0.0)) / self._width

    def kernel_params(self):
        return np.array([self.lo, self.hi])


@dataclass(frozen=True)
class DoubleExponentialLogJumps(JumpLaw):
    """Kou-type jumps: ``ln(1+x)`` is ``Exp(eta_plus)`` with probability
    ``p_up`` and ``-Exp(eta_minus)`` otherwise.

    The downward tail of the log price makes ``E (1+x)^(-q)`` finite only for
    ``q < eta_minus`` (when ``p_up < 1``) and the upward one only for
    ``q > -eta_plus`` (when ``p_up > 0``).
    """

    eta_plus: float
    eta_minus: float
    p_up: float
    code = 3

    def __post_init__(self):
        if not (self.eta_plus > 0 and self.eta_minus > 0):
            raise ValueError("tail rates must be positive")
        if not 0.0 <= self.p_up <= 1.0:
            raise ValueError("p_up must lie in [0, 1]")

    def sample(self, rng, size=None):
        return np.expm1(self.sample_log(rng, size))

    def sample_log(self, rng, size=None):
        up = rng.random(size) < self.p_up
        e_up = rng.exponential(1.0 / self.eta_plus, size)
        e_dn = rng.exponential(1.0 / self.eta_minus, size)
        return np.where(up, e_up, -e_dn)

    @staticmethod
    def _trunc_mean(eta):
        # int_0^1 y eta e^{-eta y} dy
        return (1.0 - math.exp(-eta) * (1.0 + eta)) / eta

    def _up_h(self):
        # int_0^ln2 (e^y - 1) eta e^{-eta y} dy
        eta = self.eta_plus
        return eta * _expm1_over(1.0 - eta, LN2) + math.expm1(-eta * LN2)

    def mean_h(self):
        p = self.p_up
        return p * self._up_h() - (1.0 - p) / (self.eta_minus + 1.0)

    def mean_abs_h(self):
        p = self.p_up
        return p * self._up_h() + (1.0 - p) / (self.eta_minus + 1.0)

    def mean_h_log(self):
        p = self.p_up
        return p * self._trunc_mean(self.eta_plus) - (1.0 - p) * self._trunc_mean(self.eta_minus)

    def mean_hbar_log(self):
        p = self.p_up
        mean = p / self.eta_plus - (1.0 - p) / self.eta_minus
        return mean - self.mean_h_log()

    def laplace_log(self, q):
        lo, hi = self.log_domain()
        if not lo < q < hi:
            return INF
        p = self.p_up
        val = 0.0
        if p > 0:
            val += p * self.eta_plus / (self.eta_plus + q)
        if p < 1:
            val += (1.0 - p) * self.eta_minus / (self.eta_minus - q)
        return val

    def log_domain(self):
        lo = -self.eta_plus if self.p_up > 0 else -INF
        hi = self.eta_minus if self.p_up < 1 else INF
        return (lo, hi)

    def prob_negative(self):
        return 1.0 - self.p_up

    def prob_positive(self):
        return self.p_up

    def kernel_params(self):
        return np.array([self.eta_plus, self.eta_minus, self.p_up])


@dataclass(frozen=True)
class DensityJumps(JumpLaw):
    """Jumps with an arbitrary density on a bounded interval ``(lo, hi)``.

    Every functional is evaluated by adaptive quadrature (absolute tolerance
    ``1e-10``); a failed integral raises :class:`QuadratureError`.  The law is
    usable for cumulant analysis and Python-level sampling, but not by the
    compiled path simulator.
    """

    pdf: Callable[[float], float]
    lo: float
    hi: float
    _norm: float = field(init=False, repr=False, compare=False)
    _err: list = field(init=False, repr=False, compare=False, default_factory=list)

    def __post_init__(self):
        if not (-1.0 < self.lo < self.hi < INF):
            raise ValueError("need -1 < lo < hi < inf")
        norm, err = _quad(self.pdf, self.lo, self.hi)
        if not norm > 0:
            raise ValueError("density must have positive mass")
        object.__setattr__(self, "_norm", norm)
        self._err.append(err)

    def _e(self, f, lo=None, hi=None):
        lo = self.lo if lo is None else max(lo, self.lo)
        hi = self.hi if hi is None else min(hi, self.hi)
        if hi <= lo:
            return 0.0
        val, err = _quad(lambda x: f(x) * self.pdf(x), lo, hi)
        self._err.append(err / self._norm)
        return val / self._norm

    def quad_error(self):
        return max(self._err)

    def _inverse_cdf_table(self, n=4097):
        xs = np.linspace(self.lo, self.hi, n)
        dens = np.array([self.pdf(x) for x in xs])
        cdf = np.concatenate(([0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))))
        return xs, cdf / cdf[-1]

    def sample(self, rng, size=None):
        xs, cdf = self._inverse_cdf_table()
        return np.interp(rng.random(size), cdf, xs)

    def sample_log(self, rng, size=None):
        return np.log1p(self.sample(rng, size))

    def mean_h(self):
        return self._e(lambda x: x, -1.0, 1.0)

    def mean_abs_h(self):
        return self._e(abs, -1.0, 1.0)

    def mean_h_log(self):
        return self._e(math.log1p, X_LOG_LO, X_LOG_HI)

    def mean_hbar_log(self):
        return self._e(math.log1p) - self.mean_h_log()

    def laplace_log(self, q):
        return self._e(lambda x: (1.0 + x) ** (-q))

    def log_domain(self):
        return (-INF, INF)

    def prob_negative(self):
        return self._e(lambda x: 1.0, None, 0.0)

    def prob_positive(self):
        return self._e(lambda x: 1.0, 0.0, None)

    def kernel_params(self):
        raise NotImplementedError("density jump laws are not supported by the path simulator")


@dataclass(frozen=True)
class LogJumps:
    """Push-forward of a :class:`JumpLaw` under ``x -> ln(1 + x)``."""

    base: JumpLaw

    def sample(self, rng, size=None):
        return self.base.sample_log(rng, size)

    def laplace(self, q: float) -> float:
        """``E exp(-q y)``."""
        return self.base.laplace_log(q)


@dataclass(frozen=True)
class JumpMeasure:
    """Finite jump measure ``intensity * law``; ``intensity = 0`` means no jumps."""

    intensity: float = 0.0
    law: JumpLaw | LogJumps | None = None

    def __post_init__(self):
        if not self.intensity >= 0 or not math.isfinite(self.intensity):
            raise ValueError("jump intensity must be finite and non-negative")
        if self.intensity > 0 and self.law is None:
            raise ValueError("a positive intensity needs a jump law")

    @property
    def active(self) -> bool:
        return self.intensity > 0

    def total(self, per_jump: float) -> float:
        """``Pi(f)`` given ``E f`` under the normalised law."""
        return self.intensity * per_jump if self.active else 0.0
