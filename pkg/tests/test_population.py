import math

import numpy as np
import pytest
from scipy import integrate

from solar_planner.distribution import IncomeInterval, LogLogisticIncome
from solar_planner.errors import EmptyInterval
from solar_planner.household import (
    CostParameters,
    IncomeModel,
    Offer,
    SubsidyPolicy,
    adoption_probability,
    adoption_threshold,
    product_choice_threshold,
)
from solar_planner.population import (
    RankGrid,
    immediate_adoption_mass,
    income_cdf,
    income_pdf,
    income_quantile,
    population_adoption_density,
    population_adoption_probability,
)

COSTS = CostParameters()
INCOME = IncomeModel()
DIST = INCOME.distribution


def brute_force_probability(T, subsidy, lo=0.0, hi=math.inf, dist=DIST, income=INCOME, offer=Offer.BOTH):
    """Integrate the per-household probability against the income density in log-income."""
    def f(s):
        r = dist.alpha * math.exp(s)
        p = float(adoption_probability(T, r, subsidy, COSTS, income, offer))
        return p * float(dist.pdf(r)) * r

    s_lo = math.log(lo / dist.alpha) if lo > 0 else -40.0
    s_hi = math.log(hi / dist.alpha) if math.isfinite(hi) else 40.0
    th = product_choice_threshold(COSTS, subsidy, income, offer)
    pts = [math.log(th.r_star / dist.alpha)] if th.kind.value == "finite" else []
    pts = [p for p in pts if s_lo < p < s_hi]
    total = integrate.quad(f, s_lo, s_hi, points=pts or None, limit=400, epsabs=1e-12)[0]
    mass = float(dist.cdf(hi) if math.isfinite(hi) else 1.0) - float(dist.cdf(lo))
    return total / mass


@pytest.mark.parametrize("d,T", [(0.58, 10.0), (0.59, 5.0), (0.59, 10.0), (0.595, 20.0)])
def test_probability_matches_brute_force(d, T):
    s = SubsidyPolicy(d, d)
    got = population_adoption_probability(T, None, s, COSTS, INCOME)
    assert got == pytest.approx(brute_force_probability(T, s), rel=1e-6, abs=1e-10)


def test_heterogeneous_subsidy_with_switch():
    s = SubsidyPolicy(0.6, 0.55)
    assert product_choice_threshold(COSTS, s, INCOME).kind.value == "finite"
    got = population_adoption_probability(10.0, None, s, COSTS, INCOME)
    assert got == pytest.approx(brute_force_probability(10.0, s), rel=1e-6, abs=1e-10)


def test_interval_normalization():
    s = SubsidyPolicy(0.59, 0.59)
    lo, hi = 30_000.0, 120_000.0
    got = population_adoption_probability(10.0, IncomeInterval(lo, hi), s, COSTS, INCOME)
    assert got == pytest.approx(brute_force_probability(10.0, s, lo, hi), rel=1e-6)
    with pytest.raises(EmptyInterval):
        population_adoption_probability(10.0, IncomeInterval(1e12, 2e12), s, COSTS, INCOME)


def test_zero_subsidy_practically_never_adopts():
    assert population_adoption_probability(10.0, None, SubsidyPolicy(0, 0), COSTS, INCOME) < 1e-12


def test_immediate_mass_and_density():
    s = SubsidyPolicy(0.596, 0.596)
    mass = immediate_adoption_mass(s, COSTS, INCOME)
    r = DIST.quantile(np.linspace(0.001, 0.999, 2001))
    xb = np.array([adoption_threshold(v, s, COSTS, INCOME, allow_immediate=True) for v in r])
    assert mass == pytest.approx(np.mean(xb <= INCOME.x0), abs=2e-3)
    assert 0 < mass < 1
    # probability increments are integrals of the density of the non-immediate part
    t0, T = 0.5, 8.0
    dens = integrate.quad(lambda t: population_adoption_density(t, s, COSTS, INCOME), t0, T, limit=100)[0]
    p0 = population_adoption_probability(t0, None, s, COSTS, INCOME)
    prob = population_adoption_probability(T, None, s, COSTS, INCOME)
    assert p0 >= mass
    assert p0 + dens == pytest.approx(prob, rel=1e-6)


def test_probability_increases_with_horizon_and_subsidy():
    ps = [population_adoption_probability(T, None, SubsidyPolicy(0.59, 0.59), COSTS, INCOME) for T in (1, 5, 10, 30)]
    assert np.all(np.diff(ps) > 0)
    qs = [population_adoption_probability(10, None, SubsidyPolicy(d, d), COSTS, INCOME) for d in (0.57, 0.58, 0.59)]
    assert np.all(np.diff(qs) > 0)


def test_rank_grid_breakpoints_find_immediate_switch():
    s = SubsidyPolicy(0.596, 0.596)
    g = RankGrid(s, COSTS, INCOME)
    for u in g.breakpoints():
        r = float(DIST.quantile(u))
        if g.switch_rank() is not None and abs(u - g.switch_rank()) < 1e-12:
            continue
        assert adoption_threshold(r, s, COSTS, INCOME, allow_immediate=True) == pytest.approx(INCOME.x0, rel=1e-8)


def test_wrappers_delegate(dist):
    assert income_pdf(5e4, dist) == dist.pdf(5e4)
    assert income_cdf(5e4, dist) == dist.cdf(5e4)
    assert income_quantile(0.3, dist) == dist.quantile(0.3)


def test_custom_distribution_argument():
    other = LogLogisticIncome.from_gini(70_000, 0.5)
    inc = IncomeModel(distribution=other)
    s = SubsidyPolicy(0.59, 0.59)
    got = population_adoption_probability(10.0, None, s, COSTS, inc, other)
    assert got == pytest.approx(brute_force_probability(10.0, s, dist=other, income=inc), rel=1e-6)
