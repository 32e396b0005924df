"""Kyle-type market with mandatory disclosure and oligopolistic market makers."""
from .exceptions import ModelDomainError, NumericalError
from .induction import foc_residuals, second_order_conditions, solve_backward, variance_step
from .model import (
    EquilibriumSolution,
    MarketParams,
    Regime,
    RegimeKind,
    TheoreticalOutcomes,
    informed_value,
    maker_value,
    solve_closed_form,
    theoretical_outcomes,
)
from .simulation import (
    McEstimate,
    PathRecord,
    SimConfig,
    estimate_posterior_variance,
    estimate_price_moments,
    estimate_profits,
    simulate_path,
    simulate_paths,
)

__version__ = "0.1.0"

__all__ = [
    "ModelDomainError",
    "NumericalError",
    "MarketParams",
    "EquilibriumSolution",
    "Regime",
    "RegimeKind",
    "TheoreticalOutcomes",
    "solve_closed_form",
    "theoretical_outcomes",
    "informed_value",
    "maker_value",
    "solve_backward",
    "variance_step",
    "foc_residuals",
    "second_order_conditions",
    "SimConfig",
    "McEstimate",
    "PathRecord",
    "simulate_path",
    "simulate_paths",
    "estimate_profits",
    "estimate_price_moments",
    "estimate_posterior_variance",
]
