"""Upper-level problem: the planner's subsidy cost, feasibility and optimal subsidies.

Households respond to a subsidy through the closed forms in
:mod:`solar_planner.household`; the planner picks ``(delta1, delta2)`` to
minimize the expected discounted subsidy outlay per household subject to an
adoption target ``(Lambda, T)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distribution import IncomeInterval, LogLogisticIncome
from .errors import DegenerateLine, InfeasibleSubsidy, NoFeasiblePolicy, SolarPlannerError, ValidationError
from .household import CostParameters, IncomeModel, Offer, SubsidyPolicy, uncorrected_exponent
from .population import RankGrid, population_adoption_probability
from .quadrature import integrate

__all__ = [
    "PlannerTargets",
    "PolicyEvaluation",
    "GridSpec",
    "PlannerSolution",
    "IsoPreferenceLine",
    "ADOPTION_SLACK",
    "objective_z",
    "feasibility",
    "max_homogeneous_subsidy",
    "solve_homogeneous",
    "solve_heterogeneous",
    "iso_preference_line",
    "sweep_targets",
    "thread_count",
]

ADOPTION_SLACK = 1e-9
_TIE_RTOL = 1e-12


def thread_count() -> int:
    env = os.environ.get("SOLAR_PLANNER_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class PlannerTargets:
    """Adopt at least ``Lambda`` of households in ``interval`` within ``T`` years."""

    Lambda: float
    T: float
    interval: IncomeInterval = field(default_factory=IncomeInterval)

    def __post_init__(self):
        if not 0 <= self.Lambda <= 1:
            raise ValidationError("adoption target must lie in [0, 1]", "Lambda")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValidationError("target horizon must be positive", "T")


@dataclass(frozen=True)
class GridSpec:
    prec: float = 0.05

    def __post_init__(self):
        if not 0 < self.prec <= 0.5:
            raise ValidationError("grid spacing must lie in (0, 0.5]", "prec")

    def values(self) -> np.ndarray:
        """Grid coordinates in ``[0, 1]``; exact ``k/n`` when ``1/prec`` is an integer."""
        n = round(1.0 / self.prec)
        if abs(n * self.prec - 1.0) < 1e-9:
            return np.array([k / n for k in range(n + 1)])
        m = int(math.floor(1.0 / self.prec + 1e-9))
        return np.array([k * self.prec for k in range(m + 1)])


@dataclass(frozen=True)
class PolicyEvaluation:
    subsidy: tuple[float, float]
    z: float
    adoption_prob: float
    feasible: bool
    binding_gap: float
    gap_ok: bool
    in_box: bool


@dataclass(frozen=True)
class PlannerSolution:
    subsidy: SubsidyPolicy
    evaluation: PolicyEvaluation
    feasible_count: int
    evaluated: tuple[PolicyEvaluation, ...] = ()


def objective_z(subsidy: SubsidyPolicy, costs: CostParameters, income: IncomeModel,
                dist: LogLogisticIncome | None = None, offer: Offer = Offer.BOTH,
                exponent: str = "gamma1", grid: RankGrid | None = None) -> float:
    """Expected discounted subsidy paid per household, $.

    Households that never adopt contribute nothing through the discount
    factor; immediate adopters are paid at time zero.
    """
    g = RankGrid(subsidy, costs, income, dist, offer) if grid is None else grid
    if subsidy.delta1 == 0 and subsidy.delta2 == 0:
        return 0.0

    def integrand(u):
        h = g.at(u)
        if exponent == "gamma1":
            e = h.gamma1
        elif exponent == "uncorrected":
            e = uncorrected_exponent(h.lam, h.mu, income.sigma)
        else:
            raise ValueError(f"unknown exponent {exponent!r}")
        with np.errstate(divide="ignore"):
            laplace = np.where(h.immediate, 1.0, np.exp(e * np.log(income.x0 / np.where(h.immediate, 1.0, h.x_bar))))
        laplace = np.minimum(laplace, 1.0)
        pay = np.where(
            h.subscription,
            subsidy.delta2 * costs.subscription_fee / (-np.expm1(-h.lam * costs.t_b)),
            subsidy.delta1 * costs.rooftop_cost,
        )
        return laplace * pay

    value, _ = integrate(integrand, 0.0, 1.0, g.breakpoints(), abs_tol=1e-9, rel_tol=1e-11)
    return value


def _as_pair(subsidy) -> tuple[float, float]:
    if isinstance(subsidy, SubsidyPolicy):
        return subsidy.as_tuple()
    d1, d2 = subsidy
    return float(d1), float(d2)


def feasibility(subsidy, targets: PlannerTargets, costs: CostParameters, income: IncomeModel,
                dist: LogLogisticIncome | None = None, offer: Offer = Offer.BOTH,
                with_objective: bool | str = True) -> PolicyEvaluation:
    """Evaluate every planner constraint; infeasibility is reported, never raised.

    ``with_objective="if_feasible"`` skips the subsidy-cost integral at
    infeasible points.
    """
    d1, d2 = _as_pair(subsidy)
    in_box = 0.0 <= d1 <= 1.0 and 0.0 <= d2 <= 1.0
    gap = (1 - d1) * costs.rooftop_cost - (1 - d2) * costs.subscription_fee
    gap_ok = gap >= costs.epsilon
    if not (in_box and gap_ok):
        return PolicyEvaluation((d1, d2), math.nan, math.nan, False, math.nan, gap_ok, in_box)
    policy = SubsidyPolicy(d1, d2)
    try:
        grid = RankGrid(policy, costs, income, dist, offer)
    except InfeasibleSubsidy:
        return PolicyEvaluation((d1, d2), math.nan, math.nan, False, math.nan, False, in_box)
    prob = population_adoption_probability(targets.T, targets.interval, policy, costs, income,
                                           dist, offer, grid=grid)
    feasible = prob >= targets.Lambda - ADOPTION_SLACK
    want_z = feasible if with_objective == "if_feasible" else bool(with_objective)
    z = objective_z(policy, costs, income, dist, offer, grid=grid) if want_z else math.nan
    return PolicyEvaluation((d1, d2), z, prob, feasible, prob - targets.Lambda, True, True)


def max_homogeneous_subsidy(costs: CostParameters) -> float:
    """Largest common subsidy compatible with the minimum cost gap."""
    d = 1.0 - costs.epsilon / (costs.rooftop_cost - costs.subscription_fee)
    # step below rounding so the gap check in ``feasibility`` passes exactly
    while (1 - d) * costs.rooftop_cost - (1 - d) * costs.subscription_fee < costs.epsilon:
        d = math.nextafter(d, 0.0)
    return d


def solve_homogeneous(targets: PlannerTargets, costs: CostParameters, income: IncomeModel,
                      dist: LogLogisticIncome | None = None, tol: float = 1e-6,
                      offer: Offer = Offer.BOTH) -> PlannerSolution:
    """Smallest feasible common subsidy, found by bisection on the adoption constraint.

    The subsidy cost is increasing in the common subsidy and the adoption
    probability is non-decreasing, so the cheapest feasible policy is the
    left end of the feasible interval.
    """
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    count = 0

    def ok(d: float) -> bool:
        nonlocal count
        count += 1
        return feasibility((d, d), targets, costs, income, dist, offer, with_objective=False).feasible

    hi = max_homogeneous_subsidy(costs)
    if ok(0.0):
        best = 0.0
    else:
        if not ok(hi):
            raise NoFeasiblePolicy(
                f"even the largest admissible common subsidy {hi:.6g} misses the adoption target"
            )
        lo = 0.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if ok(mid):
                hi = mid
            else:
                lo = mid
        best = hi
        if best - 2 * tol >= 0 and ok(best - 2 * tol):
            raise SolarPlannerError("bisection post-check failed: adoption not monotone in subsidy")
    evaluation = feasibility((best, best), targets, costs, income, dist, offer)
    if not evaluation.feasible:
        raise SolarPlannerError("bisection post-check failed: returned policy infeasible")
    return PlannerSolution(SubsidyPolicy(best, best), evaluation, count)


def _pick(evals: Sequence[PolicyEvaluation]) -> PolicyEvaluation:
    feasible = [e for e in evals if e.feasible]
    z_min = min(e.z for e in feasible)
    tied = [e for e in feasible if e.z <= z_min + _TIE_RTOL * max(1.0, abs(z_min))]
    return min(tied, key=lambda e: (e.subsidy[0] + e.subsidy[1], e.subsidy[0]))


def solve_heterogeneous(targets: PlannerTargets, grid: GridSpec, costs: CostParameters,
                        income: IncomeModel, dist: LogLogisticIncome | None = None,
                        offer: Offer = Offer.BOTH, threads: int | None = None) -> PlannerSolution:
    """Exhaustive grid search over ``[0, 1]^2`` at spacing ``grid.prec``.

    Ties in the objective go to the smaller total subsidy, then the smaller
    rooftop subsidy.  Evaluation may run on several threads; results are
    reduced in grid order, so the answer does not depend on scheduling.
    """
    vals = grid.values()
    points = [(d1, d2) for d1 in vals for d2 in vals]
    threads = thread_count() if threads is None else threads

    def run(p):
        return feasibility(p, targets, costs, income, dist, offer, with_objective="if_feasible")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            evals = list(pool.map(run, points))
    else:
        evals = [run(p) for p in points]
    n_feasible = sum(e.feasible for e in evals)
    if n_feasible == 0:
        raise NoFeasiblePolicy(f"no grid point at spacing {grid.prec} meets the targets")
    best = _pick(evals)
    return PlannerSolution(SubsidyPolicy(*best.subsidy), best, n_feasible, tuple(evals))


@dataclass(frozen=True)
class IsoPreferenceLine:
    """Subsidy pairs that leave every household's product choice unchanged.

    Points on ``delta2 = slope * delta1 + intercept`` share the choice
    threshold of the anchor; points above it favour subscription, points
    below favour rooftop.
    """

    anchor: tuple[float, float]
    slope: float
    intercept: float

    def offset(self, subsidy) -> float:
        d1, d2 = _as_pair(subsidy)
        return d2 - (self.slope * d1 + self.intercept)

    def classify(self, subsidy, atol: float = 1e-12) -> str:
        off = self.offset(subsidy)
        if abs(off) <= atol:
            return "on"
        return "above" if off > 0 else "below"


def iso_preference_line(delta0) -> IsoPreferenceLine:
    d1, d2 = _as_pair(delta0)
    if d1 >= 1.0:
        raise DegenerateLine("anchor has a fully subsidised rooftop product")
    q = (1.0 - d2) / (1.0 - d1)
    return IsoPreferenceLine((d1, d2), q, 1.0 - q)


def sweep_targets(lambdas: Sequence[float], horizons: Sequence[float], costs: CostParameters,
                  income: IncomeModel, dist: LogLogisticIncome | None = None, tol: float = 1e-6,
                  interval: IncomeInterval | None = None) -> list[dict]:
    """Optimal common subsidy and its cost over a grid of adoption targets."""
    rows = []
    for lam_target in lambdas:
        for horizon in horizons:
            targets = PlannerTargets(lam_target, horizon, interval or IncomeInterval())
            try:
                sol = solve_homogeneous(targets, costs, income, dist, tol)
                rows.append({
                    "Lambda": lam_target, "T": horizon, "delta": sol.subsidy.delta1,
                    "z": sol.evaluation.z, "adoption_prob": sol.evaluation.adoption_prob,
                    "feasible": True,
                })
            except NoFeasiblePolicy:
                rows.append({
                    "Lambda": lam_target, "T": horizon, "delta": math.nan, "z": math.nan,
                    "adoption_prob": math.nan, "feasible": False,
                })
    return rows
