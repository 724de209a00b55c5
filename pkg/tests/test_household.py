import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy import integrate, optimize, stats

from solar_planner.errors import DegenerateThreshold, ImmediateAdoption, InfeasibleSubsidy, ValidationError
from solar_planner.household import (
    CostParameters,
    IncomeModel,
    Offer,
    Product,
    SubsidyPolicy,
    ThresholdKind,
    adoption_cost,
    adoption_laplace,
    adoption_probability,
    adoption_threshold,
    adoption_time_density,
    uncorrected_exponent,
    first_passage_cdf,
    growth_roots,
    product_choice_threshold,
    solve_household,
    terminal_cost,
    terminal_cost_coefficients,
    value_function,
)

COSTS = CostParameters()
INCOME = IncomeModel()


def rate_threshold_oracle(costs, subsidy):
    """Discount rate at which the subscription perpetuity equals the rooftop cost (root of the cost gap)."""
    roof = (1 - subsidy.delta1) * costs.rooftop_cost
    sub = (1 - subsidy.delta2) * costs.subscription_fee

    def gap(lam):
        return sub / (-math.expm1(-lam * costs.t_b)) - roof

    return optimize.brentq(gap, 1e-8, 50.0, xtol=1e-15, rtol=1e-15)


def coefficient_oracle(lam, mu, costs):
    """Billing-cycle sums for the post-adoption bill, evaluated term by term."""
    n = np.arange(1, 400_001)
    disc = np.exp(-n * lam * costs.t_b)
    growth = np.exp((mu - lam) * n * costs.t_b)
    A = costs.p_b * math.fsum(growth * (1 - math.exp(-mu * costs.t_b)) / mu)
    B = costs.p_b * costs.eta * math.fsum(disc)
    return A, B


def threshold_cost(b, x, lam, mu, sigma, A, B, f, p_b):
    """Expected discounted cost of the rule "adopt when demand first reaches b", started at x < b."""
    g1 = growth_roots(lam, mu, sigma)[0]
    waiting = p_b * x / (lam - mu)
    return waiting + (A * b - B + f - p_b * b / (lam - mu)) * (x / b) ** g1


subsidies = st.tuples(st.floats(0.0, 0.65), st.floats(0.0, 0.65)).map(lambda t: SubsidyPolicy(*t))
incomes = st.floats(2_000.0, 2_000_000.0)


class TestChoiceThreshold:
    def test_calibration_regime(self):
        th = product_choice_threshold(COSTS, SubsidyPolicy(0, 0), INCOME)
        assert th.kind is ThresholdKind.FINITE
        assert 0.045 < th.lambda_star < 0.06
        assert th.lambda_star == pytest.approx(0.0474496, abs=1e-7)
        assert abs(th.lambda_star - rate_threshold_oracle(COSTS, SubsidyPolicy(0, 0))) < 1e-12

    def test_half_rooftop_subsidy_reaches_zero_case(self):
        th = product_choice_threshold(COSTS, SubsidyPolicy(0.5, 0), INCOME)
        assert th.lambda_star == pytest.approx(0.0950876, abs=1e-7)
        assert th.kind is ThresholdKind.ZERO
        assert th.r_star == 0.0

    def test_infinite_case(self):
        th = product_choice_threshold(COSTS, SubsidyPolicy(0, 0.5), INCOME)
        assert th.kind is ThresholdKind.INFINITE
        assert math.isinf(th.r_star)

    def test_gap_violation_raises(self):
        with pytest.raises(InfeasibleSubsidy):
            product_choice_threshold(COSTS, SubsidyPolicy(1.0, 0.0), INCOME)

    def test_rooftop_only_offer(self):
        th = product_choice_threshold(COSTS, SubsidyPolicy(0.2, 0.0), INCOME, Offer.ROOFTOP)
        assert th.r_star == 0.0
        s = solve_household(30_000, SubsidyPolicy(0.2, 0.0), COSTS, INCOME, Offer.ROOFTOP)
        assert s.product is Product.ROOFTOP

    @given(subsidies)
    def test_matches_root_oracle(self, s):
        gap = (1 - s.delta1) * COSTS.rooftop_cost - (1 - s.delta2) * COSTS.subscription_fee
        assume(gap >= COSTS.epsilon)
        th = product_choice_threshold(COSTS, s, INCOME)
        assert th.lambda_star == pytest.approx(rate_threshold_oracle(COSTS, s), rel=1e-10)

    @given(subsidies, incomes)
    def test_choice_follows_cheaper_product(self, s, r):
        gap = (1 - s.delta1) * COSTS.rooftop_cost - (1 - s.delta2) * COSTS.subscription_fee
        assume(gap >= COSTS.epsilon)
        th = product_choice_threshold(COSTS, s, INCOME)
        lam = float(INCOME.lambda_of_r(r))
        sub = (1 - s.delta2) * COSTS.subscription_fee / (-math.expm1(-lam * COSTS.t_b))
        roof = (1 - s.delta1) * COSTS.rooftop_cost
        assume(abs(sub - roof) > 1e-6 * roof)
        assert (r <= th.r_star) == (sub < roof)


class TestCoefficients:
    @pytest.mark.parametrize("lam,mu", [(0.05, 0.02), (0.045, 0.04), (0.06, 0.01)])
    def test_against_cycle_sums(self, lam, mu):
        inc = IncomeModel(lambda_fn=lambda r: lam + 0 * np.asarray(r), lambda_inverse_fn=lambda v: 0.0,
                          mu_fn=lambda r: mu + 0 * np.asarray(r))
        A, B = terminal_cost_coefficients(COSTS, inc, 5e4)
        A_ref, B_ref = coefficient_oracle(lam, mu, COSTS)
        assert A == pytest.approx(A_ref, rel=1e-10)
        assert B == pytest.approx(B_ref, rel=1e-10)

    def test_known_values(self):
        inc = IncomeModel(lambda_fn=lambda r: 0.05 + 0 * np.asarray(r), lambda_inverse_fn=lambda v: 0.0,
                          mu_fn=lambda r: 0.02 + 0 * np.asarray(r))
        A, B = terminal_cost_coefficients(COSTS, inc, 1.0)
        assert A == pytest.approx(3.725563, abs=5e-6)
        assert B == pytest.approx(13412.019, abs=5e-3)
        assert COSTS.rooftop_cost == 35_400.0

    def test_terminal_cost(self):
        s = SubsidyPolicy(0.2, 0.1)
        h = solve_household(80_000, s, COSTS, INCOME)
        assert terminal_cost(2e4, 80_000, s, COSTS, INCOME) == pytest.approx(h.A * 2e4 - h.B + h.f_adopt)
        assert adoption_cost(80_000, s, COSTS, INCOME) == pytest.approx(h.f_adopt)


class TestGrowthRoots:
    @given(st.floats(0.02, 0.2), st.floats(-0.05, 0.15), st.floats(0.01, 1.0))
    def test_roots_solve_characteristic_equation(self, lam, mu, sigma):
        assume(lam > mu)
        g1, g2, g1m1 = growth_roots(lam, mu, sigma)
        for g in (g1, g2):
            q = 0.5 * sigma**2 * g * (g - 1) + mu * g - lam
            assert abs(q) <= 1e-10 * lam
        assert g1 > 1 > 0 > g2
        assert g1m1 == pytest.approx(g1 - 1, rel=1e-9)

    def test_uncorrected_exponent_differs(self):
        g1 = growth_roots(0.05, 0.02, 0.2)[0]
        l = uncorrected_exponent(0.05, 0.02, 0.2)
        assert l == pytest.approx((math.sqrt(0.02**2 + 2 * 0.05 * 0.04) - 0.02) / 0.04)
        assert abs(l - g1) > 0.1


class TestThreshold:
    @given(subsidies, incomes)
    def test_threshold_minimizes_expected_cost(self, s, r):
        gap = (1 - s.delta1) * COSTS.rooftop_cost - (1 - s.delta2) * COSTS.subscription_fee
        assume(gap >= COSTS.epsilon)
        h = solve_household(r, s, COSTS, INCOME)
        assume(h.x_bar > 2 * INCOME.x0)
        x = INCOME.x0
        args = (x, h.lam, h.mu, INCOME.sigma, h.A, h.B, h.f_adopt, COSTS.p_b)
        res = optimize.minimize_scalar(lambda lb: threshold_cost(math.exp(lb), *args),
                                       bounds=(math.log(1.01 * x), math.log(1e4 * h.x_bar)),
                                       method="bounded", options={"xatol": 1e-10})
        assert math.exp(res.x) == pytest.approx(h.x_bar, rel=1e-4)
        assert value_function(x, r, s, COSTS, INCOME) == pytest.approx(threshold_cost(h.x_bar, *args), rel=1e-12)

    def test_threshold_falls_with_subsidy(self):
        xs = [adoption_threshold(60_000, SubsidyPolicy(d, d), COSTS, INCOME) for d in np.linspace(0, 0.55, 12)]
        assert np.all(np.diff(xs) < 0)

    def test_degenerate_threshold(self):
        s = SubsidyPolicy(0.65, 0.65)
        with pytest.raises(DegenerateThreshold):
            adoption_threshold(60_000, s, COSTS, INCOME)
        assert adoption_threshold(60_000, s, COSTS, INCOME, allow_immediate=True) == 0.0
        assert adoption_probability(1.0, 60_000, s, COSTS, INCOME) == 1.0
        assert adoption_laplace(60_000, s, COSTS, INCOME) == 1.0
        with pytest.raises(ImmediateAdoption):
            adoption_time_density(1.0, 60_000, s, COSTS, INCOME)


class TestValueFunction:
    @given(subsidies, incomes)
    def test_smooth_pasting(self, s, r):
        gap = (1 - s.delta1) * COSTS.rooftop_cost - (1 - s.delta2) * COSTS.subscription_fee
        assume(gap >= COSTS.epsilon)
        h = solve_household(r, s, COSTS, INCOME)
        assume(h.x_bar > 0)
        xb = h.x_bar
        v_in = (h.B - h.f_adopt) / (h.gamma1 - 1) + COSTS.p_b * xb / (h.lam - h.mu)
        g = h.A * xb - h.B + h.f_adopt
        assert v_in == pytest.approx(g, rel=1e-8)
        dv = h.gamma1 * (h.B - h.f_adopt) / ((h.gamma1 - 1) * xb) + COSTS.p_b / (h.lam - h.mu)
        assert dv == pytest.approx(h.A, rel=1e-6)

    @given(subsidies, incomes, st.floats(0.01, 3.0))
    def test_value_bounded_by_alternatives(self, s, r, frac):
        gap = (1 - s.delta1) * COSTS.rooftop_cost - (1 - s.delta2) * COSTS.subscription_fee
        assume(gap >= COSTS.epsilon)
        h = solve_household(r, s, COSTS, INCOME)
        x = frac * max(h.x_bar, INCOME.x0)
        v = value_function(x, r, s, COSTS, INCOME)
        never = COSTS.p_b * x / (h.lam - h.mu)
        now = h.A * x - h.B + h.f_adopt
        tol = 1e-9 * max(abs(never), abs(now))
        assert v <= never + tol
        assert v <= now + tol

    def test_negative_demand_rejected(self):
        with pytest.raises(ValueError):
            value_function(-1.0, 6e4, SubsidyPolicy(0, 0), COSTS, INCOME)


class TestFirstPassage:
    @given(st.floats(0.1, 30.0), st.floats(0.01, 1.0), st.floats(0.1, 100.0))
    def test_cdf_is_inverse_gaussian(self, a, b, T):
        ref = stats.invgauss(mu=1.0 / (a * b), scale=a * a).cdf(T)
        assert first_passage_cdf(T, a, b) == pytest.approx(ref, rel=1e-7, abs=1e-12)

    @pytest.mark.parametrize("b", [-0.3, -0.05, 0.0])
    def test_defective_limit(self, b):
        a = 2.0
        limit = math.exp(2 * a * b) if b < 0 else 1.0
        assert first_passage_cdf(1e9, a, b) == pytest.approx(limit, rel=1e-3)

    def test_density_integrates_to_cdf(self):
        s = SubsidyPolicy(0.59, 0.59)
        r = 90_000
        T = 15.0
        total = integrate.quad(lambda t: adoption_time_density(t, r, s, COSTS, INCOME), 0, T, limit=200)[0]
        assert total == pytest.approx(adoption_probability(T, r, s, COSTS, INCOME), rel=1e-8)

    def test_laplace_transform_of_density(self):
        s = SubsidyPolicy(0.57, 0.57)
        for r in (20_000, 90_000, 400_000):
            lam = float(INCOME.lambda_of_r(r))
            f = lambda t: math.exp(-lam * t) * adoption_time_density(t, r, s, COSTS, INCOME)
            val = integrate.quad(f, 0, 50, limit=400)[0] + integrate.quad(f, 50, np.inf, limit=400)[0]
            assert adoption_laplace(r, s, COSTS, INCOME) == pytest.approx(val, rel=1e-7)

    @given(st.floats(0.1, 10.0), st.floats(-1.0, 1.0), st.floats(0.0, 50.0), st.floats(0.0, 50.0))
    def test_cdf_monotone(self, a, b, t1, t2):
        lo, hi = sorted((t1, t2))
        assert 0.0 <= first_passage_cdf(lo, a, b) <= first_passage_cdf(hi, a, b) + 1e-15 <= 1.0 + 1e-15

    def test_negative_horizon(self):
        with pytest.raises(ValueError):
            adoption_probability(-1.0, 6e4, SubsidyPolicy(0, 0), COSTS, INCOME)


class TestValidation:
    def test_rate_ordering(self):
        with pytest.raises(ValidationError, match="lambda"):
            IncomeModel(lambda_low=0.02, lambda_high=0.03)

    def test_credit_price(self):
        with pytest.raises(ValidationError):
            CostParameters(p_s=0.2)

    def test_subsidy_range(self):
        with pytest.raises(ValidationError):
            SubsidyPolicy(1.2, 0.0)
