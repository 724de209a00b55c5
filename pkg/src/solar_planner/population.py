"""Aggregation of household adoption behaviour over the income distribution.

Integrals over income are taken in the rank variable ``u = F(r)``, where the
log-logistic weight becomes uniform and the heavy upper tail disappears.
With the default rate maps the discount and growth rates are affine in
``u``, so the integrands are smooth apart from the product switch at the
choice threshold and the kinks where the demand threshold meets the initial
demand; the domain is split at all of those.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .distribution import IncomeInterval, LogLogisticIncome
from .errors import EmptyInterval
from .household import (
    CostParameters,
    IncomeModel,
    Offer,
    SubsidyPolicy,
    ThresholdKind,
    first_passage_cdf,
    first_passage_pdf,
    household_arrays,
    product_choice_threshold,
)
from .quadrature import integrate

__all__ = [
    "income_pdf",
    "income_cdf",
    "income_quantile",
    "RankGrid",
    "population_adoption_probability",
    "population_adoption_density",
    "immediate_adoption_mass",
]

_SCAN_POINTS = 257


def income_pdf(r, dist: LogLogisticIncome):
    return dist.pdf(r)


def income_cdf(r, dist: LogLogisticIncome):
    return dist.cdf(r)


def income_quantile(q, dist: LogLogisticIncome):
    return dist.quantile(q)


class RankGrid:
    """Household quantities as functions of the income rank under ``dist``."""

    def __init__(self, subsidy: SubsidyPolicy, costs: CostParameters, income: IncomeModel,
                 dist: LogLogisticIncome | None = None, offer: Offer = Offer.BOTH):
        self.subsidy = subsidy
        self.costs = costs
        self.income = income
        self.dist = income.distribution if dist is None else dist
        self.offer = Offer(offer)
        self.threshold = product_choice_threshold(costs, subsidy, income, self.offer)
        self._affine = (
            income.lambda_fn is None and income.mu_fn is None and self.dist == income.distribution
        )

    def at(self, u):
        u = np.asarray(u, dtype=float)
        r = self.dist.quantile(u)
        if self._affine:
            inc = self.income
            lam = inc.lambda_high - (inc.lambda_high - inc.lambda_low) * u
            mu = inc.mu_low + (inc.mu_high - inc.mu_low) * u
            return household_arrays(r, self.subsidy, self.costs, inc, self.threshold, self.offer, lam, mu)
        return household_arrays(r, self.subsidy, self.costs, self.income, self.threshold, self.offer)

    def switch_rank(self) -> float | None:
        if self.threshold.kind is ThresholdKind.FINITE:
            return float(self.dist.cdf(self.threshold.r_star))
        return None

    def breakpoints(self, lo: float = 0.0, hi: float = 1.0) -> list[float]:
        """Ranks where the integrands switch product or start adopting immediately."""
        pts = []
        s = self.switch_rank()
        if s is not None:
            pts.append(s)
        edges = sorted({lo, hi, *[p for p in pts if lo < p < hi]})
        x0 = self.income.x0
        for a, b in zip(edges[:-1], edges[1:]):
            # stay off the panel edges so the product classification is unambiguous
            grid = np.linspace(a, b, _SCAN_POINTS)[1:-1]
            if grid.size < 2:
                continue
            diff = self.at(grid).x_bar - x0
            sign = np.sign(diff)
            for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
                root = brentq(lambda v: float(self.at(v).x_bar[0] - x0), grid[i], grid[i + 1],
                              xtol=1e-14, rtol=1e-14)
                pts.append(root)
        return sorted(p for p in pts if lo < p < hi)


def _interval_ranks(interval: IncomeInterval | None, dist: LogLogisticIncome) -> tuple[float, float]:
    if interval is None:
        return 0.0, 1.0
    lo = float(dist.cdf(interval.r_lb)) if interval.r_lb > 0 else 0.0
    hi = 1.0 if np.isinf(interval.r_ub) else float(dist.cdf(interval.r_ub))
    return lo, hi


def population_adoption_probability(
    T: float,
    interval: IncomeInterval | None,
    subsidy: SubsidyPolicy,
    costs: CostParameters,
    income: IncomeModel,
    dist: LogLogisticIncome | None = None,
    offer: Offer = Offer.BOTH,
    tail: float = 0.0,
    grid: RankGrid | None = None,
) -> float:
    """Fraction of households in ``interval`` that adopt by ``T`` years.

    The result is normalized by the interval's population mass; over the full
    income range it is the unconditional adoption probability.  ``tail``
    trims that much rank mass from each open end (used to bound truncation).
    """
    if T < 0:
        raise ValueError("horizon must be non-negative")
    g = RankGrid(subsidy, costs, income, dist, offer) if grid is None else grid
    lo, hi = _interval_ranks(interval, g.dist)
    mass = hi - lo
    if mass < 1e-12:
        raise EmptyInterval(f"income interval carries population mass {mass:.3g}")
    lo, hi = max(lo, tail), min(hi, 1.0 - tail)

    def integrand(u):
        h = g.at(u)
        return np.where(h.immediate, 1.0, first_passage_cdf(T, h.a, h.b))

    value, _ = integrate(integrand, lo, hi, g.breakpoints(lo, hi))
    return min(1.0, max(0.0, value / mass))


def immediate_adoption_mass(subsidy, costs, income, dist=None, offer: Offer = Offer.BOTH,
                            grid: RankGrid | None = None) -> float:
    """Population share whose initial demand already exceeds its threshold (adopts at t = 0)."""
    g = RankGrid(subsidy, costs, income, dist, offer) if grid is None else grid
    edges = [0.0, *g.breakpoints(), 1.0]
    mids = 0.5 * (np.array(edges[:-1]) + np.array(edges[1:]))
    flags = g.at(mids).immediate
    return float(sum(b - a for a, b, f in zip(edges[:-1], edges[1:], flags) if f))


def population_adoption_density(t, subsidy: SubsidyPolicy, costs: CostParameters,
                                income: IncomeModel, dist: LogLogisticIncome | None = None,
                                offer: Offer = Offer.BOTH, grid: RankGrid | None = None):
    """Density (per year) of a random household's adoption time, excluding the mass at 0."""
    g = RankGrid(subsidy, costs, income, dist, offer) if grid is None else grid
    bps = g.breakpoints()
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0):
        raise ValueError("time must be positive")
    out = np.empty_like(ts)
    for i, ti in enumerate(ts):
        def integrand(u, ti=ti):
            h = g.at(u)
            return np.where(h.immediate, 0.0, first_passage_pdf(ti, h.a, h.b))

        out[i] = integrate(integrand, 0.0, 1.0, bps, abs_tol=1e-14)[0]
    return out[0] if np.ndim(t) == 0 else out
