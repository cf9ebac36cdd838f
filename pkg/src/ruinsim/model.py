"""Levy model of the investment asset and its cumulant generating function.

The relative price ``R`` has triplet ``(a, sigma2, Pi)`` with respect to the
truncation ``h(x) = x 1{|x| <= 1}``; the log price ``V = ln E(R)`` then has
triplet ``(a_V, sigma2, Pi_V)`` with

    a_V  = a - sigma2/2 + Pi(h(ln(1+x)) - h(x)),
    Pi_V = Pi o phi^-1,      phi(x) = ln(1+x),

and ``H(q) = ln E exp(-q V_1)`` is

    H(q) = -a_V q + sigma2 q^2 / 2 + Pi(exp(-q ln(1+x)) - 1 + q h(ln(1+x))).

Only finite jump measures are supported, so every ``Pi``-integral is an
intensity times an expectation under the normalised jump law.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    INF,
    ClaimLaw,
    InterarrivalLaw,
    JumpLaw,
    JumpMeasure,
    LogJumps,
)

ROOT_TOL = 1e-10
ROOT_XTOL = 1e-12


class ModelError(ValueError):
    """Invalid model specification."""


class RootFindingError(ArithmeticError):
    """The root search could not certify a root to the requested tolerance."""


@dataclass(frozen=True)
class LevyModel:
    """Triplet of the relative price and the derived triplet of the log price.

    Build instances with :func:`derive_log_price_model`, which validates the
    input.  Direct construction skips validation and is meant for degenerate
    unit-test fixtures (e.g. a deterministic log price).
    """

    a: float
    sigma2: float
    jumps: JumpMeasure
    a_V: float
    jumps_V: JumpMeasure
    quad_error: float = 0.0

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def jump_law(self) -> JumpLaw | None:
        return self.jumps.law if self.jumps.active else None

    @property
    def drift(self) -> float:
        """Slope of ``V`` between jumps: ``a_V - Pi_V(h)``."""
        if not self.jumps.active:
            return self.a_V
        return self.a_V - self.jumps.intensity * self.jump_law.mean_h_log()


@dataclass(frozen=True)
class CumulantDomain:
    q_lower: float
    q_upper: float

    def __contains__(self, q: float) -> bool:
        return self.q_lower < q < self.q_upper


class BetaStatus(enum.Enum):
    FOUND = "found"
    NO_POSITIVE_ROOT = "no_positive_root"
    DEGENERATE_NONPOSITIVE = "degenerate_nonpositive"


@dataclass(frozen=True)
class BetaResult:
    status: BetaStatus
    h_right_derivative_at_zero: float
    beta: float | None = None
    reason: str = ""
    warnings: tuple[str, ...] = ()

    @property
    def found(self) -> bool:
        return self.status is BetaStatus.FOUND


def gbm(a: float, sigma2: float) -> LevyModel:
    """Geometric Brownian motion asset."""
    return derive_log_price_model(a, sigma2)


def derive_log_price_model(a: float, sigma2: float, jumps: JumpMeasure | None = None) -> LevyModel:
    """Validate ``(a, sigma2, Pi)`` and compute the log-price triplet.

    Raises
    ------
    ModelError
        If the process is deterministic (``sigma2 = 0`` and no jumps) or the
        parameters are out of range.  Jump laws themselves reject support at
        or below ``-1`` when constructed.
    """
    jumps = jumps if jumps is not None else JumpMeasure()
    if not (math.isfinite(a) and math.isfinite(sigma2)):
        raise ModelError("a and sigma2 must be finite")
    if sigma2 < 0:
        raise ModelError("sigma2 must be non-negative")
    if sigma2 == 0 and not jumps.active:
        raise ModelError("deterministic R excluded: sigma2 and the jump measure vanish together")
    if jumps.active and not isinstance(jumps.law, JumpLaw):
        raise ModelError("jumps of R need a JumpLaw on (-1, inf)")

    a_V = a - 0.5 * sigma2
    jumps_V = JumpMeasure()
    quad_error = 0.0
    if jumps.active:
        law = jumps.law
        a_V += jumps.intensity * (law.mean_h_log() - law.mean_h())
        jumps_V = JumpMeasure(jumps.intensity, LogJumps(law))
        quad_error = jumps.intensity * law.quad_error()
    return LevyModel(a=a, sigma2=sigma2, jumps=jumps, a_V=a_V, jumps_V=jumps_V, quad_error=quad_error)


def domain_bounds(model: LevyModel) -> CumulantDomain:
    """Interior ``(q_lower, q_upper)`` of the effective domain of ``H``."""
    if not model.jumps.active:
        return CumulantDomain(-INF, INF)
    lo, hi = model.jump_law.log_domain()
    return CumulantDomain(min(lo, 0.0), max(hi, 0.0))


def cumulant(model: LevyModel, q: float) -> float:
    """``H(q)``; ``+inf`` outside the effective domain."""
    q = float(q)
    if q == 0.0:
        return 0.0
    val = -model.a_V * q + 0.5 * model.sigma2 * q * q
    if model.jumps.active:
        law = model.jump_law
        lap = law.laplace_log(q)
        if not math.isfinite(lap):
            return INF
        val += model.jumps.intensity * (lap - 1.0 + q * law.mean_h_log())
    return val


def cumulant_curve(model: LevyModel, qs) -> np.ndarray:
    return np.array([cumulant(model, q) for q in np.atleast_1d(qs)], dtype=float)


def right_derivative_at_zero(model: LevyModel) -> float:
    """``D+H(0) = -a_V - Pi(hbar(ln(1+x)))``, possibly ``-inf``."""
    val = -model.a_V
    if model.jumps.active:
        if domain_bounds(model).q_upper <= 0:
            return INF
        val -= model.jumps.intensity * model.jump_law.mean_hbar_log()
    return val


def find_beta(
    model: LevyModel,
    tol: float = ROOT_TOL,
    xtol: float = ROOT_XTOL,
    boundary_k: int = 40,
    q_max: float = 2.0**60,
) -> BetaResult:
    """Positive root ``beta`` of ``H`` in ``(0, q_upper)``.

    The bracket is grown geometrically: doubling from ``q = 1`` when the
    domain is unbounded, or through ``q_upper (1 - 2^-k)``, ``k = 1..boundary_k``,
    otherwise.  Bisection then runs until the bracket is narrower than
    ``xtol`` and ``|H(beta)| <= tol``.
    """
    if not tol > 0 or not xtol > 0:
        raise ValueError("tolerances must be positive")
    d0 = right_derivative_at_zero(model)
    if d0 >= 0:
        return BetaResult(
            BetaStatus.DEGENERATE_NONPOSITIVE,
            d0,
            reason=f"D+H(0) = {d0:.6g} >= 0: H has no root in (0, q_upper)",
        )

    q_up = domain_bounds(model).q_upper
    hi = None
    if math.isinf(q_up):
        q = 1.0
        while q <= q_max:
            if cumulant(model, q) > 0:
                hi = q
                break
            q *= 2.0
        if hi is None:
            return BetaResult(
                BetaStatus.NO_POSITIVE_ROOT, d0, reason=f"H stays non-positive up to q = {q_max:.3g}"
            )
    else:
        for k in range(1, boundary_k + 1):
            q = q_up * (1.0 - 2.0**-k)
            if cumulant(model, q) > 0:
                hi = q
                break
        if hi is None:
            return BetaResult(
                BetaStatus.NO_POSITIVE_ROOT,
                d0,
                reason="H < 0 on (0, q_upper) up to the boundary probe",
                warnings=(f"root may lie within 2^-{boundary_k} q_upper of the domain boundary",),
            )

    lo = 0.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        h_mid = cumulant(model, mid)
        if not math.isfinite(h_mid):
            raise RootFindingError(f"H(q) not finite at q = {mid} inside the bracket")
        if h_mid > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= xtol:
            beta = 0.5 * (lo + hi)
            if abs(cumulant(model, beta)) <= tol:
                return BetaResult(BetaStatus.FOUND, d0, beta=beta)
            if beta in (lo, hi):
                break
    raise RootFindingError(
        f"bracket [{lo}, {hi}] collapsed but |H| = {abs(cumulant(model, 0.5 * (lo + hi))):.3g} > {tol}"
    )


# ---------------------------------------------------------------------------
# hypothesis report


class Status(str, enum.Enum):
    PASS = "pass"
    WARN = "warn"
    FAIL = "fail"


@dataclass(frozen=True)
class Check:
    name: str
    status: Status
    detail: str


@dataclass
class ConditionReport:
    beta: BetaResult
    checks: list[Check] = field(default_factory=list)
    exceptional_class: bool = False
    classifier: dict = field(default_factory=dict)

    @property
    def warnings(self) -> list[str]:
        return [f"{c.name}: {c.detail}" for c in self.checks if c.status is not Status.PASS]

    @property
    def worst(self) -> Status:
        statuses = {c.status for c in self.checks}
        if Status.FAIL in statuses:
            return Status.FAIL
        if Status.WARN in statuses:
            return Status.WARN
        return Status.PASS

    def get(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "beta": self.beta.beta,
            "beta_status": self.beta.status.value,
            "d_plus_h0": self.beta.h_right_derivative_at_zero,
            "exceptional_class": self.exceptional_class,
            "classifier": self.classifier,
            "checks": [{"name": c.name, "status": c.status.value, "detail": c.detail} for c in self.checks],
            "overall": self.worst.value,
        }


def classify_regime(model: LevyModel, claim: ClaimLaw) -> dict:
    """Flags of the exceptional class where unboundedness of the perpetuity
    needs ``P(T <= t) > 0`` for all ``t > 0``."""
    sigma_zero = model.sigma2 == 0
    law = model.jump_law
    if law is not None:
        lam = model.jumps.intensity
        pi_abs_h = lam * law.mean_abs_h()
        one_sided = lam * law.prob_negative() * lam * law.prob_positive() == 0
    else:
        pi_abs_h = 0.0
        one_sided = True
    finite_h_mass = 0 < pi_abs_h < INF
    return {
        "sigma_zero": sigma_zero,
        "claims_bounded": bool(claim.bounded),
        "finite_positive_h_mass": finite_h_mass,
        "one_sided_jumps": one_sided,
        "pi_abs_h": pi_abs_h,
    }


def validate_theorem_conditions(
    model: LevyModel,
    claim: ClaimLaw,
    interarrival: InterarrivalLaw,
    beta: BetaResult | None = None,
) -> ConditionReport:
    """Check the hypotheses of the power-law ruin asymptotics.

    Never raises on a violated hypothesis: each one becomes a ``pass``,
    ``warn`` or ``fail`` entry of the report.
    """
    beta = beta if beta is not None else find_beta(model)
    rep = ConditionReport(beta=beta)
    dom = domain_bounds(model)

    if not beta.found:
        rep.checks.append(Check("beta_interior", Status.FAIL, beta.reason or beta.status.value))
        b = None
    else:
        b = beta.beta
        ok = 0 < b < dom.q_upper
        rep.checks.append(
            Check(
                "beta_interior",
                Status.PASS if ok else Status.FAIL,
                f"beta = {b:.10g}, domain = ({dom.q_lower:.6g}, {dom.q_upper:.6g})",
            )
        )

    if b is not None:
        mom = claim.fractional_moment(b)
        rep.checks.append(
            Check(
                "claim_moment",
                Status.PASS if math.isfinite(mom) else Status.FAIL,
                f"E|xi|^beta = {mom:.6g} (moment index {claim.moment_index():.6g})",
            )
        )

    eps_sup = interarrival.exp_moment_abscissa()
    rep.checks.append(
        Check(
            "interarrival_exp_moment",
            Status.PASS if eps_sup > 0 else Status.FAIL,
            f"E exp(eps T) < inf for eps < {eps_sup:.6g}",
        )
    )

    if b is not None and eps_sup > 0:
        # a q in (beta, q_upper) with H(q) <= eps/2 gives E sup exp(-q V) < inf
        eps = min(eps_sup, 1.0) / 2.0
        q = _sup_moment_order(model, b, dom.q_upper, eps / 2.0)
        if q is None:
            rep.checks.append(Check("sup_moment", Status.WARN, "no q > beta with H(q) <= eps/2 found"))
        else:
            rep.checks.append(
                Check(
                    "sup_moment",
                    Status.PASS,
                    f"q = {q:.6g} > beta with H(q) = {cumulant(model, q):.3g} <= eps/2 = {eps / 2:.3g}",
                )
            )

    cls = classify_regime(model, claim)
    rep.classifier = cls
    rep.exceptional_class = (
        cls["sigma_zero"] and cls["claims_bounded"] and cls["finite_positive_h_mass"] and cls["one_sided_jumps"]
    )
    if rep.exceptional_class:
        rep.checks.append(
            Check(
                "exceptional_class",
                Status.WARN,
                "sigma = 0, bounded claims, one-sided jumps with 0 < Pi(|h|) < inf",
            )
        )
        small = interarrival.charges_small_times()
        rep.checks.append(
            Check(
                "small_interarrivals",
                Status.PASS if small else Status.FAIL,
                "P(T <= t) > 0 for all t > 0" if small else "P(T <= t) = 0 for some t > 0",
            )
        )
    return rep


def _sup_moment_order(model, beta, q_upper, level):
    hi = min(q_upper, 2.0 * beta + 1.0)
    for k in range(1, 60):
        q = beta + (hi - beta) * 2.0**-k
        if q >= q_upper:
            continue
        if cumulant(model, q) <= level:
            return q
    return None
