"""User-supplied demand dynamics and adoption costs, and the adopt-now / never-adopt test.

For a demand diffusion ``dX = mu(r, X) dt + sigma(r, X) dW`` with generator
``L g = mu g' + sigma^2 g'' / 2``, the sign of

    Z(x) = -lambda(r) g(x) + L g(x) + w(x)

decides the extreme stopping rules: ``Z >= 0`` everywhere means adopting
immediately is optimal, ``Z < 0`` everywhere means never adopting is.  A grid
can only certify a finite range, so results carry the range that was checked.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NumericalDerivativeFailure, ValidationError
from .household import (
    CostParameters,
    IncomeModel,
    Offer,
    SubsidyPolicy,
    household_arrays,
)

__all__ = [
    "GeneralDynamics",
    "CostComponent",
    "GeneralCosts",
    "StoppingRule",
    "StoppingClassification",
    "generator_apply",
    "classify_extreme_stopping",
    "gbm_dynamics",
    "main_model_costs",
    "main_model_sign_change",
    "DYNAMICS",
    "COSTS",
    "builtin_model",
]

_RICHARDSON_RTOL = 1e-4


@dataclass(frozen=True)
class GeneralDynamics:
    """Drift ``mu(r, x)`` per year and diffusion ``sigma(r, x)`` per sqrt-year."""

    drift: Callable
    diffusion: Callable
    name: str = "custom"

    def coefficients(self, r: float, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        m = np.broadcast_to(np.asarray(self.drift(r, x), dtype=float), x.shape)
        s = np.broadcast_to(np.asarray(self.diffusion(r, x), dtype=float), x.shape)
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(s))):
            raise ValidationError("dynamics must be finite on the grid", "dynamics")
        if np.any(m < 0) or np.any(s < 0):
            raise ValidationError("dynamics must be non-negative on the grid", "dynamics")
        return m, s


@dataclass(frozen=True)
class CostComponent:
    """Net adoption cost ``g_i(x; r, delta)`` of one product, $.

    ``linear`` optionally returns ``(slope, intercept)`` so the generator can
    use exact derivatives.
    """

    fn: Callable
    name: str = "product"
    linear: Optional[Callable] = None

    def __call__(self, x, r, subsidy):
        if self.linear is not None:
            slope, intercept = self.linear(r, subsidy)
            return slope * np.asarray(x, dtype=float) + intercept
        return np.asarray(self.fn(x, r, subsidy), dtype=float)


@dataclass(frozen=True)
class GeneralCosts:
    """Per-product net adoption costs, running cost ``w(x)`` ($/yr) and discount rate ``lambda(r)``."""

    components: tuple
    running_cost: Callable
    discount_rate: Callable
    name: str = "custom"

    def __post_init__(self):
        if len(self.components) == 0:
            raise ValidationError("at least one product cost is required", "components")

    def values(self, x, r, subsidy) -> np.ndarray:
        """Component costs stacked on the first axis."""
        vals = np.stack([np.broadcast_to(c(x, r, subsidy), np.shape(x)) for c in self.components])
        if not np.all(np.isfinite(vals)):
            raise ValidationError("product costs must be finite on the grid", "components")
        return vals

    def net(self, x, r, subsidy) -> np.ndarray:
        """The pointwise cheapest product, ``g = min_i g_i``."""
        return self.values(x, r, subsidy).min(axis=0)


def _centered(fn, x, h):
    fp, f0, fm = fn(x + h), fn(x), fn(x - h)
    return (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h), f0


def _derivatives(fn, x, h):
    """First and second derivatives by two levels of Richardson-extrapolated centered differences."""
    levels = [_centered(fn, x, h / 2**i) for i in range(3)]
    f0 = levels[0][2]
    rich = []
    for order in (0, 1):
        d = [lv[order] for lv in levels]
        rich.append(((4 * d[1] - d[0]) / 3, (4 * d[2] - d[1]) / 3))
    scale1 = np.abs(rich[0][1]) + np.abs(f0) / np.maximum(np.abs(x), h)
    scale2 = np.abs(rich[1][1]) + np.abs(f0) / np.maximum(np.abs(x), h) ** 2
    bad1 = np.abs(rich[0][0] - rich[0][1]) > _RICHARDSON_RTOL * scale1
    bad2 = np.abs(rich[1][0] - rich[1][1]) > _RICHARDSON_RTOL * scale2
    if np.any(bad1 | bad2):
        where = np.asarray(x)[np.nonzero(np.atleast_1d(bad1 | bad2))[0][0]] if np.ndim(x) else x
        raise NumericalDerivativeFailure(
            f"finite-difference estimates inconsistent near x={float(where):.6g}; cost not smooth there"
        )
    return rich[0][1], rich[1][1]


def generator_apply(dynamics: GeneralDynamics, g, r: float, x, h_step: float | None = None,
                    subsidy: SubsidyPolicy | None = None):
    """``mu(r, x) g'(x) + sigma(r, x)^2 g''(x) / 2``.

    ``g`` is a callable of ``x`` or a :class:`CostComponent` (then ``subsidy``
    is needed).  A component with a linear form uses exact derivatives;
    otherwise centered differences with step ``h_step`` (default ``1e-3 |x|``)
    are Richardson-extrapolated and rejected if two levels disagree.
    """
    x = np.asarray(x, dtype=float)
    m, s = dynamics.coefficients(r, x)
    if isinstance(g, CostComponent) and g.linear is not None:
        slope, _ = g.linear(r, subsidy)
        out = m * slope
        return out[()] if out.ndim == 0 else out
    fn = (lambda v: g(v, r, subsidy)) if isinstance(g, CostComponent) else g
    h = 1e-3 * np.maximum(np.abs(x), 1e-6) if h_step is None else np.full_like(x, h_step)
    if np.any(h <= 0):
        raise ValueError("finite-difference step must be positive")
    d1, d2 = _derivatives(fn, x, h)
    out = m * d1 + 0.5 * s * s * d2
    return out[()] if np.ndim(out) == 0 else out


class StoppingRule(enum.Enum):
    ADOPT_IMMEDIATELY = "AdoptImmediately"
    NEVER_ADOPT = "NeverAdopt"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class StoppingClassification:
    """Outcome of the grid test; valid on ``checked_range`` only."""

    rule: StoppingRule
    checked_range: tuple[float, float]
    sign_changes: tuple[float, ...]
    kinks: tuple[float, ...]
    x: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    component_z: np.ndarray = field(repr=False)
    range_certified: bool = True


def _sign_crossings(x: np.ndarray, z: np.ndarray) -> list[float]:
    out = []
    nonneg = z >= 0
    for i in np.nonzero(nonneg[:-1] != nonneg[1:])[0]:
        z0, z1 = z[i], z[i + 1]
        out.append(float(x[i] - z0 * (x[i + 1] - x[i]) / (z1 - z0)) if z1 != z0 else float(x[i]))
    return out


def classify_extreme_stopping(dynamics: GeneralDynamics, costs: GeneralCosts, r: float,
                              subsidy: SubsidyPolicy, x_grid: Sequence[float],
                              h_step: float | None = None) -> StoppingClassification:
    """Classify the optimal rule from the sign of ``Z`` on ``x_grid``.

    Each product cost is differentiated on its own.  The net cost uses the
    derivatives of whichever product is cheapest at each grid point, which
    are its one-sided derivatives at a switch between products; if ``Z``
    changes sign across a switch the result is ``Indeterminate``.
    """
    x = np.asarray(x_grid, dtype=float)
    if x.ndim != 1 or x.size < 100:
        raise ValidationError("grid needs at least 100 points", "x_grid")
    if np.any(np.diff(x) <= 0) or np.any(x <= 0):
        raise ValidationError("grid must be positive and increasing", "x_grid")
    lam = float(costs.discount_rate(r))
    vals = costs.values(x, r, subsidy)
    w = np.broadcast_to(np.asarray(costs.running_cost(x), dtype=float), x.shape)
    comp_z = np.stack([
        -lam * vals[i] + generator_apply(dynamics, c, r, x, h_step, subsidy) + w
        for i, c in enumerate(costs.components)
    ])
    active = vals.argmin(axis=0)
    z = comp_z[active, np.arange(x.size)]
    kinks = []
    straddles = False
    for i in np.nonzero(active[:-1] != active[1:])[0]:
        kinks.append(0.5 * (x[i] + x[i + 1]))
        left = comp_z[active[i], i:i + 2]
        right = comp_z[active[i + 1], i:i + 2]
        if (left.min() < 0 <= right.max()) or (right.min() < 0 <= left.max()):
            straddles = True
    crossings = _sign_crossings(x, z)
    if straddles:
        rule = StoppingRule.INDETERMINATE
    elif np.all(z >= 0):
        rule = StoppingRule.ADOPT_IMMEDIATELY
    elif np.all(z < 0):
        rule = StoppingRule.NEVER_ADOPT
    else:
        rule = StoppingRule.INDETERMINATE
    return StoppingClassification(rule, (float(x[0]), float(x[-1])), tuple(crossings),
                                  tuple(kinks), x, z, comp_z)


def gbm_dynamics(income: IncomeModel) -> GeneralDynamics:
    """Geometric Brownian motion with the income model's growth rate and volatility."""
    return GeneralDynamics(
        drift=lambda r, x: income.mu_of_r(r) * np.asarray(x, float),
        diffusion=lambda r, x: income.sigma * np.asarray(x, float),
        name="gbm",
    )


def main_model_costs(costs: CostParameters, income: IncomeModel) -> GeneralCosts:
    """Subscription and rooftop net costs ``A x - B + f_i`` with running cost ``p_b x``."""

    def coefficients(r, subsidy, product):
        h = household_arrays(r, subsidy, costs, income)
        lam = h.lam[0]
        if product == "subscription":
            f = (1 - subsidy.delta2) * costs.subscription_fee / (-math.expm1(-lam * costs.t_b))
        else:
            f = (1 - subsidy.delta1) * costs.rooftop_cost
        return float(h.A[0]), float(f - h.B[0])

    comps = tuple(
        CostComponent(
            fn=lambda x, r, s, p=p: coefficients(r, s, p)[0] * np.asarray(x, float) + coefficients(r, s, p)[1],
            name=p,
            linear=lambda r, s, p=p: coefficients(r, s, p),
        )
        for p in ("subscription", "rooftop")
    )
    return GeneralCosts(
        components=comps,
        running_cost=lambda x: costs.p_b * np.asarray(x, float),
        discount_rate=lambda r: float(income.lambda_of_r(r)),
        name="main",
    )


def main_model_sign_change(r: float, subsidy: SubsidyPolicy, costs: CostParameters,
                           income: IncomeModel, offer: Offer = Offer.BOTH) -> float:
    """Demand at which ``Z`` turns positive for the built-in model, kWh/yr.

    ``Z(x) = x ((mu - lambda) A + p_b) - lambda (f - B)``, so the crossing is
    ``lambda (f - B) / ((mu - lambda) A + p_b)``.
    """
    h = household_arrays(r, subsidy, costs, income, offer=offer)
    lam, mu, A, B, f = (float(v[0]) for v in (h.lam, h.mu, h.A, h.B, h.f_adopt))
    return lam * (f - B) / ((mu - lam) * A + costs.p_b)


DYNAMICS = {"gbm": gbm_dynamics}
COSTS = {"main": main_model_costs}


def builtin_model(dynamics: str, cost_model: str, costs: CostParameters,
                  income: IncomeModel) -> tuple[GeneralDynamics, GeneralCosts]:
    """Look up named built-in dynamics and costs (as selected in a config file)."""
    try:
        dyn = DYNAMICS[dynamics](income)
    except KeyError:
        raise ValidationError(f"unknown dynamics {dynamics!r}; choose from {sorted(DYNAMICS)}", "dynamics") from None
    try:
        cst = COSTS[cost_model](costs, income)
    except KeyError:
        raise ValidationError(f"unknown cost model {cost_model!r}; choose from {sorted(COSTS)}", "costs") from None
    return dyn, cst
