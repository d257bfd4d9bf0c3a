"""Asymptotic tail probabilities for heavy-tailed vectors with normal dependence.

The model: each coordinate has survival function ~ s^{-alpha} / scale_c and the
joint law is a multivariate normal copula with correlation matrix Sigma. For a
tail event at scale t (rectangular exceedance, at-least-i exceedances, or
complement of a box) the probability decays like

    constant * (2 alpha log t)^beta * t^{-a},

and this module computes (constant, a, beta) exactly from the structural QP
solution of each exceedance set: a = alpha * gamma_S, beta = (gamma_S - |I_S|)/2,
and the constant combines the tail constant Upsilon_S with the thresholds
weighted by h. Everything is carried in log space.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import logsumexp

from .gaussian import LOG_TWO_PI, AsymptoticRegimeWarning, UpsilonResult, upsilon
from .linalg import MAX_ENUMERATION_DIM, CorrelationMatrix, IndexSubset
from .qp import SubsetQpSolver

PARETO_EXACT = "pareto-exact"
ASYMPTOTIC_ONLY = "asymptotic-only"

# Two QP values tie (same cone family) when they differ by less than this,
# relative to max(1, gamma). Membership is a discrete decision fed by
# floating-point output; exact block-diagonal ties must be detected.
GAMMA_TIE_REL = 1e-9

H_SUM_TOLERANCE = 1e-10

MIN_EVAL_T = 10.0


class UnsupportedDegeneracy(ValueError):
    """Adjacent cone levels decay at the same rate; the at-least-i constant
    formula assumes a strict gap and is refused rather than silently wrong."""


def _positive_real(value, name: str) -> float:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite real, got {value!r}")
    return float(value)


def _positive_tuple(values, name: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if len(out) == 0:
        raise ValueError(f"{name} must be nonempty")
    for v in out:
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be strictly positive reals, got {v!r}")
    return out


@dataclass(frozen=True)
class MarginalSpec:
    """Shared marginal tail: survival(s) ~ s^{-alpha} / scale_c.

    family "pareto-exact" pins the law to exactly s^{-alpha} on s >= 1
    (scale_c must be 1; the simulator needs the exact inverse cdf), while
    "asymptotic-only" promises just the tail shape, which is all the limit
    formulas use.
    """

    alpha: float
    scale_c: float = 1.0
    family: str = PARETO_EXACT

    def __post_init__(self):
        _positive_real(self.alpha, "alpha")
        _positive_real(self.scale_c, "scale_c")
        if self.family not in (PARETO_EXACT, ASYMPTOTIC_ONLY):
            raise ValueError(
                f"family must be {PARETO_EXACT!r} or {ASYMPTOTIC_ONLY!r}, "
                f"got {self.family!r}"
            )
        if self.family == PARETO_EXACT and self.scale_c != 1.0:
            raise ValueError("pareto-exact family requires scale_c = 1")

    def log_b_inverse(self, t: float) -> float:
        """log(1 / survival(t)) = log scale_c + alpha log t."""
        return math.log(self.scale_c) + self.alpha * math.log(t)


@dataclass(frozen=True)
class Rectangular:
    """Joint exceedance {y : y_s > x_s for every s in subset}."""

    subset: IndexSubset
    thresholds: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "thresholds", _positive_tuple(self.thresholds, "thresholds")
        )
        if len(self.thresholds) != len(self.subset):
            raise ValueError(
                f"need one threshold per coordinate of {self.subset}, "
                f"got {len(self.thresholds)}"
            )


@dataclass(frozen=True)
class AtLeastI:
    """At least ``level`` coordinates exceed their componentwise thresholds."""

    thresholds: tuple[float, ...]
    level: int

    def __post_init__(self):
        object.__setattr__(
            self, "thresholds", _positive_tuple(self.thresholds, "thresholds")
        )
        if not (isinstance(self.level, int) and 1 <= self.level <= len(self.thresholds)):
            raise ValueError(
                f"level must be an integer in 1..{len(self.thresholds)}, "
                f"got {self.level!r}"
            )


@dataclass(frozen=True)
class ComplementBox:
    """Complement of the box [0, x]: some coordinate exceeds its threshold."""

    thresholds: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "thresholds", _positive_tuple(self.thresholds, "thresholds")
        )


TailSetSpec = Union[Rectangular, AtLeastI, ComplementBox]


@dataclass(frozen=True)
class ContributingSet:
    """One exceedance set's share of an estimate.

    subset/active_set are None for a bare marginal contribution with no
    attached coordinate label.
    """

    subset: Optional[IndexSubset]
    active_set: Optional[IndexSubset]
    gamma: float
    log_constant: float


@dataclass(frozen=True)
class AsymptoticEstimate:
    """Decay law log P ~ log_constant + beta log(2 alpha log t) - a log t.

    power_exponent is a, log_log_exponent is beta. An estimate with no
    contributing sets is the symbolic zero of a measure-null event and
    evaluates to -inf.
    """

    log_constant: float
    power_exponent: float
    log_log_exponent: float
    alpha: float
    contributing_sets: tuple[ContributingSet, ...]

    def __post_init__(self):
        _positive_real(self.power_exponent, "power_exponent")
        _positive_real(self.alpha, "alpha")
        if not math.isfinite(self.log_log_exponent):
            raise ValueError(f"log_log_exponent must be finite, got {self.log_log_exponent!r}")
        if len(self.contributing_sets) == 0:
            if self.log_constant != -math.inf:
                raise ValueError("an estimate without contributing sets must be -inf")
        elif not math.isfinite(self.log_constant):
            raise ValueError(f"log_constant must be finite, got {self.log_constant!r}")

    @property
    def is_zero(self) -> bool:
        return len(self.contributing_sets) == 0

    @staticmethod
    def zero(alpha: float, power_exponent: float, log_log_exponent: float = 0.0) -> "AsymptoticEstimate":
        """Symbolic zero for a measure-null set, flagged by is_zero."""
        return AsymptoticEstimate(
            -math.inf, power_exponent, log_log_exponent, alpha, ()
        )

    def evaluate_log(self, t: float) -> float:
        """Log of the approximation at scale t; guarded to t >= 10."""
        if not (isinstance(t, (int, float)) and math.isfinite(t) and t >= MIN_EVAL_T):
            raise ValueError(f"asymptotic evaluation is guarded to t >= {MIN_EVAL_T:g}, got {t!r}")
        if self.is_zero:
            return -math.inf
        return (
            self.log_constant
            + self.log_log_exponent * math.log(2.0 * self.alpha * math.log(t))
            - self.power_exponent * math.log(t)
        )

    def decays_faster_than(self, other: "AsymptoticEstimate") -> bool:
        """True when self/other -> 0 as t grows (self is log-subdominant)."""
        gap = self.power_exponent - other.power_exponent
        if abs(gap) > 1e-12 * max(1.0, abs(other.power_exponent)):
            return gap > 0
        return self.log_log_exponent < other.log_log_exponent - 1e-12


@dataclass(frozen=True)
class TailCoefficients:
    """Structural tail data of one exceedance set: its QP value gamma, active
    set, weights h (parallel to active_set), and tail constant."""

    subset: IndexSubset
    gamma: float
    active_set: IndexSubset
    h: np.ndarray
    upsilon: UpsilonResult

    def __post_init__(self):
        gap = abs(float(np.sum(self.h)) - self.gamma)
        if gap > H_SUM_TOLERANCE:
            raise ValueError(
                f"weights of {self.subset} sum to gamma within {H_SUM_TOLERANCE:g} "
                f"by identity; got gap {gap:.3e}"
            )


def subset_coefficients(
    sigma: CorrelationMatrix,
    subset: IndexSubset,
    solver: Optional[SubsetQpSolver] = None,
    seed: int = 0,
) -> TailCoefficients:
    """Solve the sub-QP for one coordinate subset and attach its tail constant."""
    solver = solver if solver is not None else SubsetQpSolver(sigma)
    sol = solver.solve(subset)
    return TailCoefficients(
        subset=subset,
        gamma=sol.gamma,
        active_set=sol.active_set,
        h=sol.h,
        upsilon=upsilon(sigma, sol, seed=seed),
    )


def _set_log_constant(coeff: TailCoefficients, marg: MarginalSpec, log_x_active: np.ndarray) -> float:
    return (
        coeff.upsilon.log_upsilon
        + 0.5 * coeff.gamma * LOG_TWO_PI
        - coeff.gamma * math.log(marg.scale_c)
        - marg.alpha * float(coeff.h @ log_x_active)
    )


def rect_tail_asymptotic(
    sigma: CorrelationMatrix,
    marg: MarginalSpec,
    rect: Rectangular,
    solver: Optional[SubsetQpSolver] = None,
    seed: int = 0,
) -> AsymptoticEstimate:
    """Decay law of P(X_s > t x_s for all s in subset), |subset| >= 2.

    a = alpha gamma_S, beta = (gamma_S - |I_S|)/2, and the constant folds
    Upsilon_S, (2 pi)^{gamma_S/2}, scale_c^{-gamma_S}, and the active
    thresholds x_s^{-alpha h_s}.
    """
    rect.subset.validate_within(sigma.dim)
    if len(rect.subset) < 2:
        raise ValueError("singleton sets go through marginal_tail")
    coeff = subset_coefficients(sigma, rect.subset, solver=solver, seed=seed)
    pos = coeff.active_set.positions_in(rect.subset)
    log_x_active = np.log(np.asarray(rect.thresholds))[pos]
    log_const = _set_log_constant(coeff, marg, log_x_active)
    return AsymptoticEstimate(
        log_constant=log_const,
        power_exponent=marg.alpha * coeff.gamma,
        log_log_exponent=0.5 * (coeff.gamma - len(coeff.active_set)),
        alpha=marg.alpha,
        contributing_sets=(
            ContributingSet(rect.subset, coeff.active_set, coeff.gamma, log_const),
        ),
    )


def marginal_tail(marg: MarginalSpec, x: float) -> AsymptoticEstimate:
    """Decay law of a single marginal exceedance: x^{-alpha}/scale_c * t^{-alpha}."""
    x = _positive_real(x, "x")
    log_const = -marg.alpha * math.log(x) - math.log(marg.scale_c)
    return AsymptoticEstimate(
        log_constant=log_const,
        power_exponent=marg.alpha,
        log_log_exponent=0.0,
        alpha=marg.alpha,
        contributing_sets=(ContributingSet(None, None, 1.0, log_const),),
    )


@dataclass(frozen=True)
class ConeAnalysis:
    """Which exceedance sets rule the requested simultaneity level.

    gamma is the minimal QP value over subsets of size >= level; alpha the
    cone decay index alpha * gamma; minimizing_family every subset attaining
    it (ties within GAMMA_TIE_REL); min_active_size the smallest active-set
    size across that family; principal_family the members achieving it (only
    they carry limit mass). gamma_next is the level+1 minimum from the same
    enumeration (None at level = d).
    """

    level: int
    dim: int
    gamma: float
    alpha: float
    min_active_size: int
    minimizing_family: tuple[IndexSubset, ...]
    principal_family: tuple[IndexSubset, ...]
    coefficients: tuple[TailCoefficients, ...]
    principal_active: IndexSubset
    marginal: MarginalSpec
    gamma_next: Optional[float]

    def log_scaling_inverse(self, t: float) -> float:
        """Log of the cone-level normalization 1/b_level(t); t >= 10."""
        if not (isinstance(t, (int, float)) and math.isfinite(t) and t >= MIN_EVAL_T):
            raise ValueError(f"cone scaling is guarded to t >= {MIN_EVAL_T:g}, got {t!r}")
        loglog = math.log(2.0 * self.marginal.alpha * math.log(t))
        return (
            -0.5 * self.gamma * LOG_TWO_PI
            + 0.5 * (len(self.principal_active) - self.gamma) * loglog
            + self.gamma * self.marginal.log_b_inverse(t)
        )


def cone_analysis(
    sigma: CorrelationMatrix,
    marg: MarginalSpec,
    level: int,
    solver: Optional[SubsetQpSolver] = None,
    seed: int = 0,
) -> ConeAnalysis:
    """Enumerate all subsets of size >= level and extract the minimizers.

    Capacity-limited to d <= 12 (2^d sub-QPs share one candidate cache).
    """
    d = sigma.dim
    if d > MAX_ENUMERATION_DIM:
        raise ValueError(f"cone analysis supports d <= {MAX_ENUMERATION_DIM}, got d={d}")
    if not (isinstance(level, int) and 2 <= level <= d):
        raise ValueError(f"level must be an integer in 2..{d}, got {level!r}")
    solver = solver if solver is not None else SubsetQpSolver(sigma)

    labels = tuple(range(1, d + 1))
    gammas: dict[tuple[int, ...], float] = {}
    for size in range(level, d + 1):
        for combo in itertools.combinations(labels, size):
            gammas[combo] = solver.solve(IndexSubset(combo)).gamma

    gamma_min = min(gammas.values())
    tol = GAMMA_TIE_REL * max(1.0, gamma_min)
    family = sorted(
        (c for c, g in gammas.items() if g <= gamma_min + tol),
        key=lambda c: (len(c), c),
    )
    coeffs = tuple(
        subset_coefficients(sigma, IndexSubset(c), solver=solver, seed=seed)
        for c in family
    )
    min_active = min(len(c.active_set) for c in coeffs)
    principal = tuple(c.subset for c in coeffs if len(c.active_set) == min_active)
    principal_active = next(
        c.active_set for c in coeffs if len(c.active_set) == min_active
    )
    gamma_next = None
    if level < d:
        gamma_next = min(g for c, g in gammas.items() if len(c) > level)
    return ConeAnalysis(
        level=level,
        dim=d,
        gamma=gamma_min,
        alpha=marg.alpha * gamma_min,
        min_active_size=min_active,
        minimizing_family=tuple(IndexSubset(c) for c in family),
        principal_family=principal,
        coefficients=coeffs,
        principal_active=principal_active,
        marginal=marg,
        gamma_next=gamma_next,
    )


def mu_level_one(marg: MarginalSpec, x) -> float:
    """Limit mass of the box complement under the level-1 scaling: sum x_j^{-alpha}."""
    thresholds = _positive_tuple(x, "x")
    return float(sum(xj ** -marg.alpha for xj in thresholds))


def _qualifying_mass(coeff: TailCoefficients, marg: MarginalSpec, log_x_active: np.ndarray) -> float:
    return math.exp(
        coeff.upsilon.log_upsilon - marg.alpha * float(coeff.h @ log_x_active)
    )


def mu_i_rectangular(cone: ConeAnalysis, rect: Rectangular) -> float:
    """Cone-level limit mass of one rectangular set.

    Nonzero only when the set is in the minimizing family AND its active set
    has the minimal size; every other set is null at this scaling even though
    its own decay law (rect_tail_asymptotic) is nonzero at a faster rate.
    """
    rect.subset.validate_within(cone.dim)
    if len(rect.subset) < cone.level:
        raise ValueError(
            f"set of size {len(rect.subset)} cannot enter the level-{cone.level} cone"
        )
    for coeff in cone.coefficients:
        if coeff.subset.members != rect.subset.members:
            continue
        if len(coeff.active_set) != cone.min_active_size:
            return 0.0
        pos = coeff.active_set.positions_in(rect.subset)
        log_x_active = np.log(np.asarray(rect.thresholds))[pos]
        return _qualifying_mass(coeff, cone.marginal, log_x_active)
    return 0.0


def _require_level_gap(cone: ConeAnalysis) -> None:
    if cone.gamma_next is None:
        return
    tol = GAMMA_TIE_REL * max(1.0, cone.gamma)
    if cone.gamma_next <= cone.gamma + tol:
        raise UnsupportedDegeneracy(
            f"levels {cone.level} and {cone.level + 1} share the decay value "
            f"gamma = {cone.gamma!r}; the at-least-{cone.level} formula "
            "assumes a strict gap between adjacent levels"
        )


def mu_i_at_least(cone: ConeAnalysis, at_least: AtLeastI) -> float:
    """Cone-level limit mass of the at-least-level set: sum of the qualifying
    rectangular masses over minimizers of exactly the cone's level size."""
    if at_least.level != cone.level:
        raise ValueError(
            f"set level {at_least.level} does not match cone level {cone.level}"
        )
    if len(at_least.thresholds) != cone.dim:
        raise ValueError(
            f"need {cone.dim} thresholds, got {len(at_least.thresholds)}"
        )
    _require_level_gap(cone)
    x = np.asarray(at_least.thresholds)
    total = 0.0
    for coeff in cone.coefficients:
        if len(coeff.subset) != cone.level:
            continue
        if len(coeff.active_set) != cone.min_active_size:
            continue
        log_x_active = np.log(x[coeff.active_set.as_indices()])
        total += _qualifying_mass(coeff, cone.marginal, log_x_active)
    return total


def _additive_estimate(marg: MarginalSpec, thresholds: tuple[float, ...]) -> AsymptoticEstimate:
    """Union-of-marginals law: joint exceedances are lower order, so the box
    complement decays like the sum of the single-coordinate tails."""
    consts = [
        -marg.alpha * math.log(xj) - math.log(marg.scale_c) for xj in thresholds
    ]
    contribs = tuple(
        ContributingSet(IndexSubset.of(j + 1), IndexSubset.of(j + 1), 1.0, c)
        for j, c in enumerate(consts)
    )
    return AsymptoticEstimate(
        log_constant=float(logsumexp(consts)),
        power_exponent=marg.alpha,
        log_log_exponent=0.0,
        alpha=marg.alpha,
        contributing_sets=contribs,
    )


def asymptotic_estimate(
    sigma: CorrelationMatrix,
    marg: MarginalSpec,
    tail_set: TailSetSpec,
    seed: int = 0,
) -> AsymptoticEstimate:
    """Dispatch a tail-set specification to its decay law."""
    if isinstance(tail_set, Rectangular):
        tail_set.subset.validate_within(sigma.dim)
        if len(tail_set.subset) == 1:
            return marginal_tail(marg, tail_set.thresholds[0])
        return rect_tail_asymptotic(sigma, marg, tail_set, seed=seed)
    if isinstance(tail_set, ComplementBox):
        if len(tail_set.thresholds) != sigma.dim:
            raise ValueError(
                f"need {sigma.dim} thresholds, got {len(tail_set.thresholds)}"
            )
        return _additive_estimate(marg, tail_set.thresholds)
    if isinstance(tail_set, AtLeastI):
        if len(tail_set.thresholds) != sigma.dim:
            raise ValueError(
                f"need {sigma.dim} thresholds, got {len(tail_set.thresholds)}"
            )
        if tail_set.level == 1:
            return _additive_estimate(marg, tail_set.thresholds)
        cone = cone_analysis(sigma, marg, tail_set.level, seed=seed)
        mu = mu_i_at_least(cone, tail_set)
        base = 0.5 * cone.gamma * LOG_TWO_PI - cone.gamma * math.log(marg.scale_c)
        x = np.asarray(tail_set.thresholds)
        contribs = []
        for coeff in cone.coefficients:
            if len(coeff.subset) != cone.level:
                continue
            if len(coeff.active_set) != cone.min_active_size:
                continue
            log_x_active = np.log(x[coeff.active_set.as_indices()])
            contribs.append(
                ContributingSet(
                    coeff.subset,
                    coeff.active_set,
                    coeff.gamma,
                    base + coeff.upsilon.log_upsilon
                    - marg.alpha * float(coeff.h @ log_x_active),
                )
            )
        return AsymptoticEstimate(
            log_constant=base + math.log(mu),
            power_exponent=marg.alpha * cone.gamma,
            log_log_exponent=0.5 * (cone.gamma - cone.min_active_size),
            alpha=marg.alpha,
            contributing_sets=tuple(contribs),
        )
    raise TypeError(f"unsupported tail set specification: {tail_set!r}")


def tail_probability(
    sigma: CorrelationMatrix,
    marg: MarginalSpec,
    tail_set: TailSetSpec,
    t: float,
    seed: int = 0,
) -> tuple[float, AsymptoticEstimate]:
    """Log asymptotic probability that X/t lands in the tail set, plus its law.

    Requires t >= 10 and warns below t = 100; the formulas are limits and the
    simulation module is the finite-t adjudicator.
    """
    if not (isinstance(t, (int, float)) and math.isfinite(t) and t >= MIN_EVAL_T):
        raise ValueError(f"tail_probability requires t >= {MIN_EVAL_T:g}, got {t!r}")
    if t < 100.0:
        warnings.warn(
            f"tail probability at t={t:g} < 100 sits at the edge of the "
            "asymptotic regime",
            AsymptoticRegimeWarning,
            stacklevel=2,
        )
    est = asymptotic_estimate(sigma, marg, tail_set, seed=seed)
    return est.evaluate_log(t), est


@dataclass(frozen=True)
class BivariateComparison:
    """Joint-tail decay of a correlated normal pair next to its heavy-tailed
    copula twin at the same thresholds. gaussian_log_asym is None when the
    joint-dominated closed form is stated only for nonnegative correlation."""

    gaussian_regime: str
    gaussian_log_asym: Optional[float]
    pareto_log_asym: float


def bivariate_comparison(
    rho: float, alpha: float, x1: float, x2: float, t: float
) -> BivariateComparison:
    """Compare P(Z1 > t x1, Z2 > t x2) with its Pareto-marginal counterpart.

    The normal side switches regime on rho versus min(x1/x2, x2/x1): below it
    both coordinates must stretch jointly; above it the larger threshold's
    exceedance drags the other along and only the worst margin matters. The
    heavy-tailed side never switches; its decay exponent 2 alpha/(1+rho)
    moves continuously with rho.
    """
    if not (isinstance(rho, (int, float)) and -1.0 < rho < 1.0):
        raise ValueError(f"rho must lie in (-1, 1), got {rho!r}")
    alpha = _positive_real(alpha, "alpha")
    x1 = _positive_real(x1, "x1")
    x2 = _positive_real(x2, "x2")
    if not (isinstance(t, (int, float)) and math.isfinite(t) and t > math.e):
        raise ValueError(f"comparison needs t > e, got {t!r}")

    ratio = min(x1 / x2, x2 / x1)
    x_max = max(x1, x2)
    if rho < ratio:
        regime = "joint-dominated"
        if rho >= 0.0:
            x_rho_sq = (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / (1.0 - rho * rho)
            gaussian = (
                1.5 * math.log1p(-rho * rho)
                - math.log((x1 - rho * x2) * (x2 - rho * x1))
                - LOG_TWO_PI
                - 0.5 * t * t * x_rho_sq
                - 2.0 * math.log(t)
            )
        else:
            gaussian = None
    elif rho > ratio:
        regime = "margin-dominated"
        gaussian = -0.5 * LOG_TWO_PI - 0.5 * (t * x_max) ** 2 - math.log(t * x_max)
    else:
        regime = "boundary"
        gaussian = (
            math.log(0.5)
            - 0.5 * LOG_TWO_PI
            - 0.5 * (t * x_max) ** 2
            - math.log(t * x_max)
        )

    pareto = (
        -(2.0 * alpha / (1.0 + rho)) * math.log(t)
        - (rho / (1.0 + rho)) * math.log(2.0 * alpha * math.log(t))
        - (rho / (1.0 + rho)) * LOG_TWO_PI
        + 1.5 * math.log1p(rho)
        - 0.5 * math.log1p(-rho)
        - (alpha / (1.0 + rho)) * math.log(x1 * x2)
    )
    return BivariateComparison(regime, gaussian, pareto)
