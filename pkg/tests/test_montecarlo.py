import math

import numpy as np
import pytest

from solar_planner.errors import ValidationError
from solar_planner.household import (
    CostParameters,
    IncomeModel,
    Offer,
    SubsidyPolicy,
    adoption_laplace,
    adoption_probability,
    adoption_threshold,
    terminal_cost_coefficients,
)
from solar_planner.montecarlo import (
    PathEstimate,
    SimulationSpec,
    asian_compensation,
    net_metering_value,
    simulate_first_passage,
    simulate_population_cost,
    subsidy_for_threshold_ratio,
)

COSTS = CostParameters()
INCOME = IncomeModel()
TB = COSTS.t_b
R = 70_000.0


def coarse(n=40_000, horizon=10.0, seed=1, dt=TB):
    return SimulationSpec(n_paths=n, dt=dt, horizon=horizon, seed=seed)


def test_spec_validation_and_steps():
    assert SimulationSpec(dt=0.1, horizon=1.0).n_steps == 10
    assert SimulationSpec(dt=0.3, horizon=1.0).n_steps == 4
    for bad in ({"n_paths": 0}, {"dt": 0.0}, {"horizon": -1.0}, {"seed": -1}, {"seed": 2**64}):
        with pytest.raises(ValidationError):
            SimulationSpec(**bad)
    with pytest.raises(ValidationError):
        SimulationSpec(dt=0.5).check_step(TB)


def test_path_estimate_summary():
    e = PathEstimate.from_samples([1.0, 2.0, 3.0, 4.0])
    assert e.mean == 2.5 and e.n_effective == 4
    assert e.std_error == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert e.ci == pytest.approx((2.5 - 3 * e.std_error, 2.5 + 3 * e.std_error))
    assert e.covers(2.5 + 2 * e.std_error) and not e.covers(2.5 + 4 * e.std_error)
    x = PathEstimate.exact(1.0, 10)
    assert x.z_score(1.0) == 0.0 and math.isinf(x.z_score(0.0))


def test_ratio_subsidy_hits_requested_threshold():
    s = subsidy_for_threshold_ratio(R, 2.5, COSTS, INCOME)
    assert s.delta1 == s.delta2
    assert adoption_threshold(R, s, COSTS, INCOME) / INCOME.x0 == pytest.approx(2.5, rel=1e-10)
    with pytest.raises(ValueError):
        subsidy_for_threshold_ratio(R, 1.0, COSTS, INCOME)


def test_immediate_household_is_exact():
    est = simulate_first_passage(400_000.0, SubsidyPolicy(0.6, 0.6), coarse(100), COSTS, INCOME)
    assert est.immediate
    assert all(p.mean == 1.0 and p.std_error == 0.0 for p in est.probability.values())
    assert est.laplace.mean == 1.0


@pytest.mark.parametrize("ratio", [2.0, 3.0])
def test_first_passage_matches_closed_forms(ratio):
    s = subsidy_for_threshold_ratio(R, ratio, COSTS, INCOME)
    lam = float(INCOME.lambda_of_r(R))
    est = simulate_first_passage(R, s, coarse(horizon=10.0 / lam), COSTS, INCOME)
    for T, p in est.probability.items():
        assert p.covers(adoption_probability(T, R, s, COSTS, INCOME), k=4)
    assert est.laplace.covers(adoption_laplace(R, s, COSTS, INCOME), k=4, atol=est.truncation_bound)
    assert est.horizon >= 10.0 / lam
    assert est.truncation_bound == pytest.approx(math.exp(-lam * est.horizon), rel=1e-12)


def test_probability_horizon_must_be_simulated():
    s = subsidy_for_threshold_ratio(R, 2.0, COSTS, INCOME)
    with pytest.raises(ValidationError):
        simulate_first_passage(R, s, coarse(100, horizon=5.0), COSTS, INCOME, times=(10.0,))


def test_small_volatility_is_deterministic():
    inc = IncomeModel(sigma=0.01)
    s = subsidy_for_threshold_ratio(R, 1.5, COSTS, inc)
    x_bar = adoption_threshold(R, s, COSTS, inc)
    mu = float(inc.mu_of_r(R))
    t_det = math.log(x_bar / inc.x0) / (mu - 0.5 * inc.sigma**2)
    assert 1.0 < t_det < 40.0
    est = simulate_first_passage(R, s, coarse(5000, horizon=2 * t_det, dt=TB / 10), COSTS, inc, times=())
    assert est.hit_time.mean == pytest.approx(t_det, rel=0.01)


def test_standard_error_scales_with_paths():
    s = subsidy_for_threshold_ratio(R, 2.0, COSTS, INCOME)
    small = simulate_first_passage(R, s, coarse(10_000), COSTS, INCOME).probability[10.0]
    large = simulate_first_passage(R, s, coarse(40_000), COSTS, INCOME).probability[10.0]
    assert large.std_error / small.std_error == pytest.approx(0.5, rel=0.1)


def test_halving_the_step_changes_nothing_beyond_noise():
    s = subsidy_for_threshold_ratio(R, 2.5, COSTS, INCOME)
    a = simulate_first_passage(R, s, coarse(dt=TB), COSTS, INCOME).probability[5.0]
    b = simulate_first_passage(R, s, coarse(dt=TB / 2, seed=2), COSTS, INCOME).probability[5.0]
    assert abs(a.mean - b.mean) < 4 * math.hypot(a.std_error, b.std_error)


def test_reproducible_for_a_seed():
    s = subsidy_for_threshold_ratio(R, 2.0, COSTS, INCOME)
    a = simulate_first_passage(R, s, coarse(5000, seed=9), COSTS, INCOME)
    b = simulate_first_passage(R, s, coarse(5000, seed=9), COSTS, INCOME)
    c = simulate_first_passage(R, s, coarse(5000, seed=10), COSTS, INCOME)
    assert a == b
    assert a.probability[10.0].mean != c.probability[10.0].mean


def test_population_cost_zero_cases():
    spec = coarse(1000)
    assert simulate_population_cost(SubsidyPolicy(0, 0), spec, COSTS, INCOME).mean == 0.0
    # everyone subscribes and the subscription is not subsidised
    est = simulate_population_cost(SubsidyPolicy(0.5, 0.0), spec, COSTS, INCOME, offer=Offer.SUBSCRIPTION)
    assert est.mean == 0.0 and est.std_error == 0.0


def test_population_cost_reproducible_and_positive():
    spec = coarse(5000, horizon=50.0)
    a = simulate_population_cost(SubsidyPolicy(0.59, 0.59), spec, COSTS, INCOME)
    b = simulate_population_cost(SubsidyPolicy(0.59, 0.59), spec, COSTS, INCOME, threads=3)
    assert a == b and a.mean > 0


def test_net_metering_sum_matches_cost_coefficients():
    lam, mu = float(INCOME.lambda_of_r(R)), float(INCOME.mu_of_r(R))
    A, B = terminal_cost_coefficients(COSTS, INCOME, R)
    v = net_metering_value(INCOME.x0, lam, mu, COSTS.p_b, COSTS.eta / TB, TB)
    assert v == pytest.approx(A * INCOME.x0 - B, rel=1e-12)
    partial = net_metering_value(INCOME.x0, lam, mu, COSTS.p_b, COSTS.eta / TB, TB, n_cycles=12_000)
    assert partial == pytest.approx(v, rel=1e-6)
    assert net_metering_value(INCOME.x0, lam, mu, COSTS.p_b, 0.0, TB, n_cycles=1) > 0


def test_asian_without_generation_has_no_put_leg():
    spec = SimulationSpec(n_paths=2000, dt=TB / 10, horizon=1.0, seed=3)
    est = asian_compensation(R, 0.0, 0.05, COSTS.p_b, spec, INCOME, n_cycles=24)
    assert est.put_leg.mean == 0.0
    assert est.h.mean == pytest.approx(COSTS.p_b * est.call_leg.mean)


def test_asian_full_buyback_matches_net_metering():
    spec = SimulationSpec(n_paths=20_000, dt=TB / 10, horizon=1.0, seed=4)
    c = COSTS.eta / TB
    n = 120
    est = asian_compensation(R, c, COSTS.p_b, COSTS.p_b, spec, INCOME, n_cycles=n)
    lam, mu = float(INCOME.lambda_of_r(R)), float(INCOME.mu_of_r(R))
    target = net_metering_value(INCOME.x0, lam, mu, COSTS.p_b, c, TB, n_cycles=n)
    assert est.h.covers(target, k=4)
    for _, parity, exact in est.parity:
        assert parity.covers(exact, k=4)


def test_asian_rejects_bad_prices():
    spec = SimulationSpec(n_paths=10, dt=TB, horizon=1.0)
    with pytest.raises(ValidationError):
        asian_compensation(R, 1.0, 0.2, 0.1, spec, INCOME, 12)
    with pytest.raises(ValidationError):
        asian_compensation(R, -1.0, 0.05, 0.1, spec, INCOME, 12)
