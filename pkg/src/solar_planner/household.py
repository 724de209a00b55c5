"""Closed-form solution of one household's product choice and adoption timing.

Demand follows a geometric Brownian motion with income-dependent drift
``mu(r)``; the household discounts at ``lambda(r)``.  Product choice reduces
to comparing ``lambda(r)`` with a cost-only rate threshold, and adoption
timing to a first passage of demand through a threshold ``x_bar(r, delta)``.

Everything here is a pure function of frozen inputs.  The ``*_arrays``
helpers broadcast over numpy arrays of incomes and back the population and
planner integrals; the scalar functions are the public per-household API.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import log_ndtr, ndtr

from .distribution import LogLogisticIncome
from .errors import DegenerateThreshold, ImmediateAdoption, InfeasibleSubsidy, ValidationError

HOURS_PER_YEAR = 8760.0

__all__ = [
    "CostParameters",
    "IncomeModel",
    "SubsidyPolicy",
    "ThresholdKind",
    "ChoiceThreshold",
    "Product",
    "Offer",
    "HouseholdSolution",
    "HouseholdArrays",
    "product_choice_threshold",
    "terminal_cost_coefficients",
    "terminal_cost",
    "adoption_cost",
    "growth_roots",
    "uncorrected_exponent",
    "adoption_threshold",
    "solve_household",
    "value_function",
    "adoption_time_density",
    "adoption_probability",
    "adoption_laplace",
    "household_arrays",
    "first_passage_cdf",
    "first_passage_pdf",
]


@dataclass(frozen=True)
class CostParameters:
    """Prices and technology constants.  Defaults are the reference calibration.

    Units: ``p_b`` and ``p_s`` in $/kWh, ``p_sub`` in $/kW per billing cycle,
    ``K`` in $, ``k`` in $/kW, ``c`` in kW, ``t_b`` in years, ``eta`` in kWh
    generated per cycle, ``epsilon`` in $.
    """

    p_b: float = 0.112
    p_sub: float = 22.0
    K: float = 10_000.0
    k: float = 4_000.0
    c: float = 6.35
    t_b: float = 1.0 / 12.0
    eta: float = 500.0
    p_s: float = 0.112
    epsilon: float = 1.0

    def __post_init__(self):
        for name in ("p_b", "p_sub", "K", "k", "c", "eta", "p_s", "epsilon"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError("must be finite and non-negative", name)
        if not (math.isfinite(self.t_b) and self.t_b > 0):
            raise ValidationError("billing cycle must be positive", "t_b")
        if self.p_s > self.p_b:
            raise ValidationError("credit price cannot exceed the retail price", "p_s")
        if not self.subscription_fee < self.rooftop_cost:
            raise ValidationError(
                "one-cycle subscription fee must be below the rooftop cost", "p_sub"
            )

    @property
    def rooftop_cost(self) -> float:
        return self.K + self.k * self.c

    @property
    def subscription_fee(self) -> float:
        """Subscription payment per billing cycle, $."""
        return self.p_sub * self.c


@dataclass(frozen=True)
class IncomeModel:
    """Income-dependent discount and demand-growth rates.

    By default both rates are affine in the income rank ``F(r)`` of
    ``distribution``: ``lambda(r)`` falls from ``lambda_high`` to
    ``lambda_low`` and ``mu(r)`` rises from ``mu_low`` to ``mu_high``.  Custom
    monotone maps can be injected through ``lambda_fn``/``mu_fn``; a custom
    ``lambda_fn`` needs a matching ``lambda_inverse_fn``.
    """

    lambda_low: float = 0.045
    lambda_high: float = 0.06
    mu_low: float = 0.01
    mu_high: float = 0.04
    sigma: float = 0.20
    x0: float = 1.6 * HOURS_PER_YEAR
    distribution: LogLogisticIncome = field(default_factory=lambda: LogLogisticIncome(70_000.0, 2.5))
    lambda_fn: Optional[Callable] = None
    mu_fn: Optional[Callable] = None
    lambda_inverse_fn: Optional[Callable] = None

    def __post_init__(self):
        for name in ("lambda_low", "lambda_high", "mu_low", "mu_high", "sigma", "x0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError("must be finite and positive", name)
        if self.lambda_low > self.lambda_high:
            raise ValidationError("lambda_low exceeds lambda_high", "lambda_low")
        if self.mu_low > self.mu_high:
            raise ValidationError("mu_low exceeds mu_high", "mu_low")
        if (self.lambda_fn is None) != (self.lambda_inverse_fn is None):
            raise ValidationError("a custom lambda map needs its inverse", "lambda_inverse_fn")
        if self.lambda_fn is None and self.mu_fn is None and not self.lambda_low > self.mu_high:
            # lambda(r) - mu(r) is affine in the rank and smallest at the top
            raise ValidationError(
                "discount rate must exceed demand growth for every income "
                "(lambda(r) > mu(r) requires lambda_low > mu_high)",
                "lambda_low",
            )

    def rank(self, r):
        return self.distribution.cdf(r)

    def lambda_of_r(self, r):
        if self.lambda_fn is not None:
            return self.lambda_fn(r)
        return self.lambda_high - (self.lambda_high - self.lambda_low) * self.rank(r)

    def mu_of_r(self, r):
        if self.mu_fn is not None:
            return self.mu_fn(r)
        return self.mu_low + (self.mu_high - self.mu_low) * self.rank(r)

    def lambda_inverse(self, v: float) -> float:
        """Income at which the discount rate equals ``v`` (``v`` strictly inside the range)."""
        if self.lambda_inverse_fn is not None:
            return self.lambda_inverse_fn(v)
        if not self.lambda_low < v < self.lambda_high:
            raise ValueError("rate outside the open discount-rate range")
        q = (self.lambda_high - v) / (self.lambda_high - self.lambda_low)
        return float(self.distribution.quantile(q))

    def check_rates(self, r_grid) -> None:
        """Raise ``ValidationError`` unless ``lambda > mu > 0`` on ``r_grid``."""
        lam = np.asarray(self.lambda_of_r(r_grid), float)
        mu = np.asarray(self.mu_of_r(r_grid), float)
        if np.any(mu <= 0):
            raise ValidationError("demand growth must be positive", "mu_fn")
        if np.any(lam <= mu):
            raise ValidationError("discount rate must exceed demand growth", "lambda_fn")


@dataclass(frozen=True)
class SubsidyPolicy:
    """Fractional subsidies on rooftop (``delta1``) and subscription (``delta2``)."""

    delta1: float = 0.0
    delta2: float = 0.0

    def __post_init__(self):
        for name in ("delta1", "delta2"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError("subsidy fraction must lie in [0, 1]", name)

    @classmethod
    def homogeneous(cls, delta: float) -> "SubsidyPolicy":
        return cls(delta, delta)

    def as_tuple(self) -> tuple[float, float]:
        return (self.delta1, self.delta2)


class ThresholdKind(enum.Enum):
    ZERO = "zero"
    INFINITE = "infinite"
    FINITE = "finite"


class Product(enum.Enum):
    ROOFTOP = "rooftop"
    SUBSCRIPTION = "subscription"


class Offer(enum.Enum):
    """Which products the planner makes available."""

    BOTH = "both"
    ROOFTOP = "rooftop"
    SUBSCRIPTION = "subscription"


@dataclass(frozen=True)
class ChoiceThreshold:
    """Rate threshold and the income threshold below which subscription wins."""

    lambda_star: float
    kind: ThresholdKind
    r_star: float

    @property
    def is_finite(self) -> bool:
        return self.kind is ThresholdKind.FINITE


@dataclass(frozen=True)
class HouseholdSolution:
    r: float
    lam: float
    mu: float
    A: float
    B: float
    gamma1: float
    gamma2: float
    f_adopt: float
    x_bar: float
    M1: float
    product: Product

    @property
    def immediate(self) -> bool:
        return self.x_bar <= 0.0


def _check_gap(costs: CostParameters, subsidy: SubsidyPolicy) -> float:
    gap = (1 - subsidy.delta1) * costs.rooftop_cost - (1 - subsidy.delta2) * costs.subscription_fee
    if not gap >= costs.epsilon or gap <= 0:
        raise InfeasibleSubsidy(
            f"rooftop-minus-subscription gap {gap:.6g} below epsilon={costs.epsilon:g}"
        )
    return gap


def product_choice_threshold(
    costs: CostParameters,
    subsidy: SubsidyPolicy,
    income: IncomeModel,
    offer: Offer = Offer.BOTH,
) -> ChoiceThreshold:
    """Income threshold separating subscription (below) from rooftop (above) adopters."""
    offer = Offer(offer)
    if offer is Offer.ROOFTOP:
        if subsidy.delta1 >= 1.0:
            raise InfeasibleSubsidy("rooftop fully subsidised")
        return ChoiceThreshold(math.inf, ThresholdKind.ZERO, 0.0)
    if offer is Offer.SUBSCRIPTION:
        return ChoiceThreshold(0.0, ThresholdKind.INFINITE, math.inf)
    _check_gap(costs, subsidy)
    ratio = (1 - subsidy.delta2) * costs.subscription_fee / ((1 - subsidy.delta1) * costs.rooftop_cost)
    lam_star = -math.log1p(-ratio) / costs.t_b
    if lam_star >= income.lambda_high:
        return ChoiceThreshold(lam_star, ThresholdKind.ZERO, 0.0)
    if lam_star <= income.lambda_low:
        return ChoiceThreshold(lam_star, ThresholdKind.INFINITE, math.inf)
    return ChoiceThreshold(lam_star, ThresholdKind.FINITE, income.lambda_inverse(lam_star))


def _coefficients(lam, mu, costs: CostParameters):
    tb = costs.t_b
    A = (costs.p_b / mu) * (-np.expm1(-mu * tb)) / np.expm1((lam - mu) * tb)
    B = costs.p_b * costs.eta / np.expm1(lam * tb)
    return A, B


def terminal_cost_coefficients(costs: CostParameters, income: IncomeModel, r):
    """Slope ``A`` ($ per kWh/yr) and intercept ``B`` ($) of the post-adoption consumption cost."""
    lam, mu = income.lambda_of_r(r), income.mu_of_r(r)
    if np.any(np.asarray(lam) <= np.asarray(mu)) or np.any(np.asarray(mu) <= 0):
        raise ValueError("need lambda(r) > mu(r) > 0")
    return _coefficients(lam, mu, costs)


def _h(y):
    """``(exp(y) - 1 - y) / y**2`` without cancellation near zero."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 0.1
    ys = np.where(small, y, 0.0)
    series = np.zeros_like(ys)
    term = np.full_like(ys, 0.5)
    for n in range(3, 20):
        series = series + term
        term = term * ys / n
    yl = np.where(small, 1.0, y)
    direct = (np.expm1(yl) - yl) / yl**2
    return np.where(small, series, direct)


def _continuation_gap(lam, mu, costs: CostParameters):
    """``p_b/(lambda - mu) - A``: value of never adopting minus the post-adoption slope.

    The two terms agree to about three digits at monthly billing, so the
    difference is formed from the series of ``(e^y - 1)/y`` instead.
    """
    tb = costs.t_b
    nu = lam - mu
    y, z = nu * tb, -mu * tb
    phi_y = 1.0 + y * _h(y)
    return costs.p_b / nu * (y * _h(y) - z * _h(z)) / phi_y


def growth_roots(lam, mu, sigma):
    """Roots ``gamma1 > 1`` and ``gamma2 < 0`` of ``sigma^2 g(g-1)/2 + mu g - lam = 0``."""
    lam = np.asarray(lam, float)
    mu = np.asarray(mu, float)
    s2 = sigma * sigma
    m = mu - 0.5 * s2
    root = np.sqrt(m * m + 2.0 * s2 * lam)
    gamma1 = np.where(m > 0, 2.0 * lam / (root + m), (root - m) / s2)
    gamma2 = np.where(m < 0, -2.0 * lam / (root - m), -(root + m) / s2)
    gamma1_minus_1 = 2.0 * (lam - mu) / (root + mu + 0.5 * s2)
    return gamma1, gamma2, gamma1_minus_1


def uncorrected_exponent(lam, mu, sigma):
    """Exponent ``(sqrt(mu^2 + 2 lam sigma^2) - mu) / sigma^2`` (no Ito correction)."""
    s2 = sigma * sigma
    return 2.0 * lam / (np.sqrt(mu * mu + 2.0 * lam * s2) + mu)


@dataclass(frozen=True)
class HouseholdArrays:
    """Vectorized household quantities on an income grid."""

    r: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    A: np.ndarray
    B: np.ndarray
    gamma1: np.ndarray
    gamma1_minus_1: np.ndarray
    gap: np.ndarray
    f_adopt: np.ndarray
    subscription: np.ndarray
    x_bar: np.ndarray
    immediate: np.ndarray
    sigma: float
    x0: float

    @property
    def a(self):
        """Log-distance to the threshold in volatility units (0 where adoption is immediate)."""
        with np.errstate(divide="ignore"):
            a = np.log(self.x_bar / self.x0) / self.sigma
        return np.where(self.immediate, 0.0, a)

    @property
    def b(self):
        return (self.mu - 0.5 * self.sigma**2) / self.sigma


def household_arrays(
    r,
    subsidy: SubsidyPolicy,
    costs: CostParameters,
    income: IncomeModel,
    threshold: ChoiceThreshold | None = None,
    offer: Offer = Offer.BOTH,
    lam=None,
    mu=None,
) -> HouseholdArrays:
    """Household quantities on a grid of incomes.

    Adoption costs at or below the generation credit ``B`` make adoption
    immediate at any demand; those incomes get ``x_bar = 0``.  ``lam``/``mu``
    may be passed when the caller already has the rates (quadrature in rank).
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if threshold is None:
        threshold = product_choice_threshold(costs, subsidy, income, offer)
    lam = np.asarray(income.lambda_of_r(r) if lam is None else lam, float) * np.ones_like(r)
    mu = np.asarray(income.mu_of_r(r) if mu is None else mu, float) * np.ones_like(r)
    A, B = _coefficients(lam, mu, costs)
    gamma1, _, g1m1 = growth_roots(lam, mu, income.sigma)
    gap = _continuation_gap(lam, mu, costs)
    subscription = r <= threshold.r_star
    perpetuity = (1 - subsidy.delta2) * costs.subscription_fee / (-np.expm1(-lam * costs.t_b))
    f = np.where(subscription, perpetuity, (1 - subsidy.delta1) * costs.rooftop_cost)
    excess = f - B
    x_bar = np.where(excess > 0, (gamma1 / g1m1) * np.maximum(excess, 0.0) / gap, 0.0)
    immediate = income.x0 >= x_bar
    return HouseholdArrays(
        r=r, lam=lam, mu=mu, A=A, B=B, gamma1=gamma1, gamma1_minus_1=g1m1, gap=gap,
        f_adopt=f, subscription=subscription, x_bar=x_bar, immediate=immediate,
        sigma=income.sigma, x0=income.x0,
    )


def adoption_cost(r, subsidy, costs, income, offer: Offer = Offer.BOTH):
    """Upfront-equivalent adoption cost ``f(r, delta)`` of the preferred product, $."""
    h = household_arrays(r, subsidy, costs, income, offer=offer)
    return h.f_adopt[0] if np.ndim(r) == 0 else h.f_adopt


def terminal_cost(x, r, subsidy, costs, income, offer: Offer = Offer.BOTH):
    """Expected discounted cost of adopting at demand ``x`` (kWh/yr): ``A x - B + f``."""
    h = household_arrays(r, subsidy, costs, income, offer=offer)
    out = h.A * np.asarray(x, float) - h.B + h.f_adopt
    return out[0] if out.size == 1 and np.ndim(x) == 0 and np.ndim(r) == 0 else out


def solve_household(r: float, subsidy, costs, income, offer: Offer = Offer.BOTH) -> HouseholdSolution:
    """Threshold, coefficients and value-function constant for one income level."""
    h = household_arrays(r, subsidy, costs, income, offer=offer)
    lam, mu = float(h.lam[0]), float(h.mu[0])
    g1, g2, _ = growth_roots(lam, mu, income.sigma)
    x_bar = float(h.x_bar[0])
    excess = float(h.f_adopt[0] - h.B[0])
    if x_bar > 0:
        m1 = -excess / float(h.gamma1_minus_1[0]) * math.exp(-float(g1) * math.log(x_bar))
    else:
        m1 = 0.0
    return HouseholdSolution(
        r=float(r), lam=lam, mu=mu, A=float(h.A[0]), B=float(h.B[0]),
        gamma1=float(g1), gamma2=float(g2), f_adopt=float(h.f_adopt[0]), x_bar=x_bar, M1=m1,
        product=Product.SUBSCRIPTION if h.subscription[0] else Product.ROOFTOP,
    )


def adoption_threshold(r: float, subsidy, costs, income, offer: Offer = Offer.BOTH,
                       allow_immediate: bool = False) -> float:
    """Demand threshold ``x_bar(r, delta)`` in kWh/yr.

    Raises ``DegenerateThreshold`` when the adoption cost is below the
    generation credit, unless ``allow_immediate`` is set, in which case the
    threshold is 0 (adopt at any demand).
    """
    h = household_arrays(r, subsidy, costs, income, offer=offer)
    if h.f_adopt[0] < h.B[0] and not allow_immediate:
        raise DegenerateThreshold(
            f"adoption cost {h.f_adopt[0]:.6g} below generation credit {h.B[0]:.6g}"
        )
    return float(h.x_bar[0])


def value_function(x, r: float, subsidy, costs, income, offer: Offer = Offer.BOTH):
    """Optimal expected discounted cost at demand ``x`` (kWh/yr)."""
    s = solve_household(r, subsidy, costs, income, offer)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("demand must be non-negative")
    g = s.A * x - s.B + s.f_adopt
    if s.x_bar <= 0:
        out = np.where(x > 0, g, 0.0)
    else:
        waiting = (s.B - s.f_adopt) / (s.gamma1 - 1.0) * np.power(np.minimum(x, s.x_bar) / s.x_bar, s.gamma1)
        waiting = waiting + costs.p_b * x / (s.lam - s.mu)
        out = np.where(x < s.x_bar, waiting, g)
    return out[()] if out.ndim == 0 else out


def first_passage_cdf(T, a, b):
    """``P(max_{s<=T} (b s + W_s) >= a)`` for ``a >= 0``; broadcasts."""
    T = np.asarray(T, float)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(T)
        p = ndtr((b * T - a) / sq) + np.exp(2.0 * a * b + log_ndtr((-a - b * T) / sq))
    p = np.where(T > 0, p, 0.0)
    p = np.where(a <= 0, 1.0, p)
    return np.clip(p, 0.0, 1.0)


def first_passage_pdf(t, a, b):
    t = np.asarray(t, float)
    a = np.asarray(a, float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        d = a / (math.sqrt(2.0 * math.pi) * t**1.5) * np.exp(-((a - b * t) ** 2) / (2.0 * t))
    return np.where(t > 0, d, 0.0)


def _scalar_ab(r, subsidy, costs, income, offer):
    h = household_arrays(r, subsidy, costs, income, offer=offer)
    return float(h.a[0]), float(h.b[0]), bool(h.immediate[0])


def adoption_time_density(t, r: float, subsidy, costs, income, offer: Offer = Offer.BOTH):
    """Density of the optimal adoption time (per year); raises ``ImmediateAdoption`` if ``x0 >= x_bar``."""
    a, b, immediate = _scalar_ab(r, subsidy, costs, income, offer)
    if immediate:
        raise ImmediateAdoption("initial demand at or above the adoption threshold")
    if np.any(np.asarray(t) <= 0):
        raise ValueError("time must be positive")
    out = first_passage_pdf(t, a, b)
    return out[()] if np.ndim(out) == 0 else out


def adoption_probability(T, r: float, subsidy, costs, income, offer: Offer = Offer.BOTH):
    """``P(tau*_r <= T)`` from the running-maximum law of the log-demand."""
    if np.any(np.asarray(T) < 0):
        raise ValueError("horizon must be non-negative")
    a, b, immediate = _scalar_ab(r, subsidy, costs, income, offer)
    if immediate:
        out = np.ones_like(np.asarray(T, float))
    else:
        out = first_passage_cdf(T, a, b)
    return out[()] if np.ndim(out) == 0 else out


def adoption_laplace(r: float, subsidy, costs, income, offer: Offer = Offer.BOTH,
                     exponent: str = "gamma1") -> float:
    """``E[exp(-lambda(r) tau*_r)]``.

    ``exponent="gamma1"`` uses the positive characteristic root (default);
    ``"uncorrected"`` uses the variant without the Ito drift correction and is
    kept only for comparison against simulation.
    """
    h = household_arrays(r, subsidy, costs, income, offer=offer)
    if h.immediate[0]:
        return 1.0
    if exponent == "gamma1":
        e = h.gamma1[0]
    elif exponent == "uncorrected":
        e = uncorrected_exponent(h.lam[0], h.mu[0], income.sigma)
    else:
        raise ValueError(f"unknown exponent {exponent!r}")
    return float(min(1.0, math.exp(e * math.log(income.x0 / h.x_bar[0]))))
