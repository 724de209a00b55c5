"""Path simulation used as an independent check on the closed forms.

Log-demand is stepped exactly, ``log X_{t+dt} = log X_t + (mu - sigma^2/2) dt
+ sigma sqrt(dt) Z``.  With ``bridge_correction`` a step whose endpoints both
sit below the threshold still registers a crossing with the Brownian-bridge
probability, which makes the law of the crossing step exact for any ``dt``:
``P(tau <= T)`` carries no discretization bias when ``T`` is on the step grid.

Random numbers come from counter-based per-path substreams (see
``_kernels_py``), so estimates are bit-identical for a given seed whatever
the thread count or backend.  Stream 0 drives demand paths, stream 1 the
income draws, stream 2 the billing-cycle paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._backend import get_kernels
from .distribution import LogLogisticIncome
from .errors import ValidationError
from .household import (
    CostParameters,
    IncomeModel,
    Offer,
    SubsidyPolicy,
    household_arrays,
)
from .planner import max_homogeneous_subsidy, thread_count

__all__ = [
    "SimulationSpec",
    "PathEstimate",
    "FirstPassageEstimate",
    "AsianEstimate",
    "simulate_first_passage",
    "simulate_population_cost",
    "asian_compensation",
    "net_metering_value",
    "hit_steps",
    "subsidy_for_threshold_ratio",
]

PATH_STREAM = 0
INCOME_STREAM = 1
BILLING_STREAM = 2
_MAX_SEED = 2**64


@dataclass(frozen=True)
class SimulationSpec:
    """Monte Carlo settings.  ``dt`` and ``horizon`` are in years."""

    n_paths: int = 100_000
    dt: float = (1.0 / 12.0) / 30.0
    horizon: float = 50.0
    seed: int = 0
    bridge_correction: bool = True

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ValidationError("need at least one path", "n_paths")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError("step must be positive", "dt")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValidationError("horizon must be positive", "horizon")
        if int(self.seed) != self.seed or not 0 <= self.seed < _MAX_SEED:
            raise ValidationError("seed must be an unsigned 64-bit integer", "seed")

    def check_step(self, t_b: float) -> None:
        if self.dt > t_b * (1 + 1e-12):
            raise ValidationError("step must not exceed the billing cycle", "dt")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.horizon / self.dt - 1e-9))


@dataclass(frozen=True)
class PathEstimate:
    """Sample mean with its standard error; the reported interval is mean ± 3 SE."""

    mean: float
    std_error: float
    n_effective: int

    @classmethod
    def from_samples(cls, values) -> "PathEstimate":
        v = np.asarray(values, dtype=float)
        n = v.size
        if n == 0:
            return cls(math.nan, math.nan, 0)
        mean = float(v.mean())
        se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(mean, se, n)

    @classmethod
    def exact(cls, value: float, n: int) -> "PathEstimate":
        return cls(float(value), 0.0, n)

    @property
    def ci(self) -> tuple[float, float]:
        return self.mean - 3 * self.std_error, self.mean + 3 * self.std_error

    def z_score(self, target: float) -> float:
        diff = self.mean - target
        if self.std_error == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.std_error

    def covers(self, target: float, k: float = 3.0, atol: float = 0.0) -> bool:
        return abs(self.mean - target) <= k * self.std_error + atol


def hit_steps(log_barrier, drift, sigma: float, spec: SimulationSpec, stream: int = PATH_STREAM,
              threads: int | None = None, backend: str | None = None) -> np.ndarray:
    """Crossing step per path: 0 immediate, k >= 1 in ((k-1) dt, k dt], -1 none by the horizon."""
    kern = get_kernels(backend)
    return kern.first_passage_steps(
        np.asarray(log_barrier, float), np.asarray(drift, float), float(sigma), float(spec.dt),
        spec.n_steps, int(spec.seed), bool(spec.bridge_correction), stream, 0,
        thread_count() if threads is None else threads,
    )


def _discount(k: np.ndarray, lam, dt: float) -> np.ndarray:
    # crossing time taken at the middle of its step
    t = np.where(k > 0, (k - 0.5) * dt, 0.0)
    return np.where(k >= 0, np.exp(-np.asarray(lam) * t), 0.0)


@dataclass(frozen=True)
class FirstPassageEstimate:
    r: float
    x_bar: float
    immediate: bool
    probability: dict = field(default_factory=dict)
    laplace: PathEstimate | None = None
    hit_time: PathEstimate | None = None
    truncation_bound: float = 0.0
    horizon: float = 0.0


def simulate_first_passage(r: float, subsidy: SubsidyPolicy, spec: SimulationSpec,
                           costs: CostParameters, income: IncomeModel, times=(2.0, 5.0, 10.0),
                           offer: Offer = Offer.BOTH, threads: int | None = None,
                           backend: str | None = None) -> FirstPassageEstimate:
    """Empirical ``P(tau <= T)`` for each ``T`` in ``times`` and ``E[exp(-lambda tau)]``.

    Paths that have not crossed by the horizon count as never adopting; the
    discounted estimate is then low by at most ``exp(-lambda * horizon)``,
    reported as ``truncation_bound``.  ``hit_time`` is the mean crossing time
    among paths that crossed.
    """
    spec.check_step(costs.t_b)
    h = household_arrays(r, subsidy, costs, income, offer=offer)
    lam, mu, x_bar = float(h.lam[0]), float(h.mu[0]), float(h.x_bar[0])
    n = spec.n_paths
    times = tuple(float(t) for t in times)
    if any(t > spec.horizon * (1 + 1e-12) for t in times):
        raise ValidationError("probability horizon beyond the simulated horizon", "horizon")
    if bool(h.immediate[0]):
        probs = {t: PathEstimate.exact(1.0, n) for t in times}
        return FirstPassageEstimate(float(r), x_bar, True, probs, PathEstimate.exact(1.0, n),
                                    PathEstimate.exact(0.0, n), 0.0, spec.horizon)
    log_barrier = math.log(x_bar / income.x0)
    drift = mu - 0.5 * income.sigma**2
    k = hit_steps(np.full(n, log_barrier), np.full(n, drift), income.sigma, spec,
                  threads=threads, backend=backend)
    probs = {}
    for t in times:
        last = int(math.floor(t / spec.dt + 1e-9))
        probs[t] = PathEstimate.from_samples((k >= 0) & (k <= last))
    crossed = k[k > 0]
    return FirstPassageEstimate(
        r=float(r),
        x_bar=x_bar,
        immediate=False,
        probability=probs,
        laplace=PathEstimate.from_samples(_discount(k, lam, spec.dt)),
        hit_time=PathEstimate.from_samples((crossed - 0.5) * spec.dt),
        truncation_bound=math.exp(-lam * spec.n_steps * spec.dt),
        horizon=spec.n_steps * spec.dt,
    )


def simulate_population_cost(subsidy: SubsidyPolicy, spec: SimulationSpec, costs: CostParameters,
                             income: IncomeModel, dist: LogLogisticIncome | None = None,
                             offer: Offer = Offer.BOTH, threads: int | None = None,
                             backend: str | None = None) -> PathEstimate:
    """Average discounted subsidy outlay per household, $, by simulation.

    Each path draws its income by inverse CDF from its own substream, picks
    its product by the choice threshold and pays the subsidy when it crosses
    its demand threshold.  Paths with nothing to pay are not stepped.
    """
    spec.check_step(costs.t_b)
    dist = income.distribution if dist is None else dist
    n = spec.n_paths
    if subsidy.delta1 == 0 and subsidy.delta2 == 0:
        return PathEstimate.exact(0.0, n)
    kern = get_kernels(backend)
    u = kern.uniforms(int(spec.seed), INCOME_STREAM, n)
    r = dist.quantile(u)
    h = household_arrays(r, subsidy, costs, income, offer=offer)
    pay = np.where(
        h.subscription,
        subsidy.delta2 * costs.subscription_fee / (-np.expm1(-h.lam * costs.t_b)),
        subsidy.delta1 * costs.rooftop_cost,
    )
    with np.errstate(divide="ignore"):
        log_barrier = np.where(h.immediate, 0.0, np.log(np.where(h.immediate, 1.0, h.x_bar) / income.x0))
    # zero-payment paths are marked immediate so the kernel skips them
    log_barrier = np.where(pay > 0, log_barrier, 0.0)
    drift = h.mu - 0.5 * income.sigma**2
    k = hit_steps(log_barrier, drift, income.sigma, spec, threads=threads, backend=backend)
    return PathEstimate.from_samples(np.where(pay > 0, _discount(k, h.lam, spec.dt) * pay, 0.0))


def net_metering_value(x: float, lam: float, mu: float, p_b: float, c_rate: float, t_b: float,
                       n_cycles: int | None = None) -> float:
    """Expected discounted bill reduction under net metering, $.

    ``sum_n exp(-n lam t_b) p_b t_b (E[avg_n] - c_rate)`` over the first
    ``n_cycles`` cycles (all cycles when ``None``), for demand starting at
    ``x`` kWh/yr and generation ``c_rate`` kWh/yr.
    """
    q = math.exp((mu - lam) * t_b)
    per_unit = p_b * (-math.expm1(-mu * t_b)) / mu if mu != 0 else p_b * t_b
    d = math.exp(-lam * t_b)
    if n_cycles is None:
        demand = per_unit * x * q / (1.0 - q)
        credit = p_b * c_rate * t_b * d / (1.0 - d)
    else:
        demand = per_unit * x * q * (-math.expm1(n_cycles * math.log(q))) / (1.0 - q)
        credit = p_b * c_rate * t_b * d * (-math.expm1(n_cycles * math.log(d))) / (1.0 - d)
    return demand - credit


@dataclass(frozen=True)
class AsianEstimate:
    """Simulated compensation over ``n_cycles`` billing cycles.

    ``parity`` lists, for each reported cycle ``n``, the estimate of
    ``E[avg_n] - c`` (which equals ``call_n - put_n`` path by path) and the
    closed-form GBM target.
    """

    h: PathEstimate
    call_leg: PathEstimate
    put_leg: PathEstimate
    n_cycles: int
    tail_bound: float
    parity: tuple = ()
    mean_average: tuple = ()


def asian_compensation(r: float, c: float, p_s: float, p_b: float, spec: SimulationSpec,
                       income: IncomeModel, n_cycles: int, t_b: float = 1.0 / 12.0,
                       n_report: int = 12, threads: int | None = None,
                       backend: str | None = None) -> AsianEstimate:
    """Expected discounted compensation for generation rate ``c`` (kWh/yr) under net billing.

    Per path ``h = sum_n exp(-n lam t_b) t_b (p_b (avg_n - c)^+ - p_s (c - avg_n)^+)``
    with ``avg_n`` the trapezoidal time average of demand over cycle ``n``.
    The omitted cycles beyond ``n_cycles`` are bounded by ``tail_bound``.
    """
    if not 0 <= p_s <= p_b:
        raise ValidationError("need 0 <= p_s <= p_b", "p_s")
    if n_cycles < 1:
        raise ValidationError("need at least one cycle", "n_cycles")
    if c < 0:
        raise ValidationError("generation rate must be non-negative", "c")
    spec.check_step(t_b)
    steps = max(1, int(round(t_b / spec.dt)))
    lam = float(income.lambda_of_r(r))
    mu = float(income.mu_of_r(r))
    n_report = min(n_report, n_cycles)
    call, put, avgs = get_kernels(backend).asian_cycle_payoffs(
        float(income.x0), mu, float(income.sigma), float(t_b), steps, int(n_cycles), float(c),
        lam, int(spec.n_paths), int(spec.seed), n_report, BILLING_STREAM, 0,
        thread_count() if threads is None else threads,
    )
    x = income.x0
    parity = []
    means = []
    for n in range(1, n_report + 1):
        target = x * (math.exp(mu * n * t_b) - math.exp(mu * (n - 1) * t_b)) / (mu * t_b) - c
        parity.append((n, PathEstimate.from_samples(avgs[:, n - 1] - c), target))
        means.append(PathEstimate.from_samples(avgs[:, n - 1]))
    q = math.exp((mu - lam) * t_b)
    d = math.exp(-lam * t_b)
    tail = (p_b * x * (-math.expm1(-mu * t_b)) / mu * q ** (n_cycles + 1) / (1 - q)
            + p_s * c * t_b * d ** (n_cycles + 1) / (1 - d))
    return AsianEstimate(
        h=PathEstimate.from_samples(p_b * call - p_s * put),
        call_leg=PathEstimate.from_samples(call),
        put_leg=PathEstimate.from_samples(put),
        n_cycles=int(n_cycles),
        tail_bound=float(tail),
        parity=tuple(parity),
        mean_average=tuple(means),
    )


def subsidy_for_threshold_ratio(r: float, ratio: float, costs: CostParameters,
                                income: IncomeModel, offer: Offer = Offer.BOTH) -> SubsidyPolicy:
    """Common subsidy ``(d, d)`` at which ``x_bar(r) / x0`` equals ``ratio``.

    Used to pick test cases whose adoption happens on a simulable time scale.
    """
    if not ratio > 1:
        raise ValueError("ratio must exceed 1 (otherwise adoption is immediate)")

    def gap(d):
        h = household_arrays(r, SubsidyPolicy(d, d), costs, income, offer=offer)
        return float(h.x_bar[0]) / income.x0 - ratio

    hi = max_homogeneous_subsidy(costs)
    if gap(0.0) < 0 or gap(hi) > 0:
        raise ValueError(f"threshold ratio {ratio} not reachable with a common subsidy at r={r}")
    d = brentq(gap, 0.0, hi, xtol=1e-14, rtol=1e-14)
    return SubsidyPolicy(d, d)
