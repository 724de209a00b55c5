"""Log-logistic income law.

The median income is the scale ``alpha`` and the Gini coefficient is ``1/beta``,
so a region can be described by ``(alpha, gini)`` directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = ["LogLogisticIncome", "IncomeInterval"]


@dataclass(frozen=True)
class LogLogisticIncome:
    """Log-logistic income distribution with scale ``alpha`` and shape ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValidationError("scale must be positive and finite", "alpha")
        if not (np.isfinite(self.beta) and self.beta > 1):
            raise ValidationError("shape must exceed 1 (Gini below 1)", "beta")

    @classmethod
    def from_gini(cls, alpha: float, gini: float) -> "LogLogisticIncome":
        if not 0 < gini < 1:
            raise ValidationError("Gini coefficient must lie in (0, 1)", "gini")
        return cls(alpha=alpha, beta=1.0 / gini)

    @property
    def gini(self) -> float:
        return 1.0 / self.beta

    @property
    def median(self) -> float:
        return self.alpha

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("income must be non-negative")
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            # z / (1 + z)^2 with z = (r/alpha)^beta equals 1 / (4 cosh^2(t/2)), t = log z
            t = self.beta * np.log(r / self.alpha)
            out = self.beta / (4.0 * r * np.cosh(0.5 * t) ** 2)
        out = np.where((r > 0) & np.isfinite(r), out, 0.0)
        return out[()] if out.ndim == 0 else out

    def cdf(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("income must be non-negative")
        with np.errstate(divide="ignore"):
            # 1 / (1 + (r/alpha)^-beta), written to stay accurate in both tails
            t = -self.beta * np.log(r / self.alpha)
        out = np.where(np.isinf(t) & (t > 0), 0.0, 1.0 / (1.0 + np.exp(np.minimum(t, 700.0))))
        return out[()] if out.ndim == 0 else out

    def quantile(self, q):
        q = np.asarray(q, dtype=float)
        if np.any((q <= 0) | (q >= 1)):
            raise ValueError("quantile level must lie strictly inside (0, 1)")
        out = self.alpha * np.exp((np.log(q) - np.log1p(-q)) / self.beta)
        return out[()] if out.ndim == 0 else out

    def sample(self, u):
        """Inverse-CDF transform of uniforms in (0, 1)."""
        return self.quantile(u)


@dataclass(frozen=True)
class IncomeInterval:
    """Income band ``(r_lb, r_ub)`` over which an adoption target is imposed."""

    r_lb: float = 0.0
    r_ub: float = float("inf")

    def __post_init__(self):
        if self.r_lb < 0 or not self.r_lb < self.r_ub:
            raise ValidationError("need 0 <= r_lb < r_ub", "interval")

    @property
    def is_full(self) -> bool:
        return self.r_lb == 0.0 and np.isinf(self.r_ub)
