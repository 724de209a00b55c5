"""Household solar product choice and adoption timing, and the planner's subsidy design.

Households choose between rooftop and subscription solar and time their
adoption optimally under stochastic demand; a planner chooses subsidies for
both products to meet an adoption target at least cost.
"""

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .distribution import IncomeInterval, LogLogisticIncome  # noqa: E402
from .errors import (  # noqa: E402
    CheckFailed,
    DegenerateLine,
    DegenerateThreshold,
    EmptyInterval,
    ImmediateAdoption,
    InfeasibleSubsidy,
    NoFeasiblePolicy,
    NumericalDerivativeFailure,
    ParseError,
    SolarPlannerError,
    ValidationError,
)
from .household import (  # noqa: E402
    CostParameters,
    IncomeModel,
    Offer,
    Product,
    SubsidyPolicy,
    ThresholdKind,
    adoption_laplace,
    adoption_probability,
    adoption_threshold,
    adoption_time_density,
    product_choice_threshold,
    solve_household,
    value_function,
)
from .planner import (  # noqa: E402
    GridSpec,
    PlannerTargets,
    feasibility,
    iso_preference_line,
    objective_z,
    solve_heterogeneous,
    solve_homogeneous,
    sweep_targets,
)
from .population import population_adoption_density, population_adoption_probability  # noqa: E402
