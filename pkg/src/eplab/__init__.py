"""Scale-equation solvers and quadratic invariants for oscillators whose
mass varies in time, verified against direct grid quantum mechanics."""

from .ep_solver import (ComplexSplitTrajectory, SigmaTrajectory, SolverMeta,
                        ep_residual, ft_residual, integrate_complex_split,
                        integrate_ft_variant, integrate_modified_ep,
                        pinney_closed_form, pinney_coefficients_from_initial,
                        pinney_lambda_squared, split_linear_residual)
from .errors import (ConfigError, ConstraintError, DegenerateTrajectoryError,
                     DomainError, EPLabError, HermiticityError,
                     InsufficientDataError, InvalidStateError, NumericsError,
                     PositivityError, SingularityError, StiffnessError)
from .invariants import (CoefficientModel, CoefficientTrajectory,
                         ExponentialScenario, TauOdeResidual,
                         coefficient_model_from_trajectory,
                         coefficients_from_sigma, electric_field,
                         exponential_scenario, integrate_coefficient_system,
                         sigma_consistent_init, tau_ode_residual)
from .profiles import (MassProfile, ScenarioConfig, TauFunction, TimeGrid,
                       mass_at, mass_rate_at, scenario_from_dict,
                       scenario_from_json, scenario_to_dict, tau_at)
from .tdse import (GaussianSpec, InvarianceCheck, OperatorMatrix,
                   RefinementStudy, SpatialGrid, WaveState, build_hamiltonian,
                   build_invariant, convergence_order, evolve_crank_nicolson,
                   gaussian_state, invariance_residual, invariant_expectation,
                   run_invariance_check, run_refinement_study)

__version__ = "1.0.0"

__all__ = [
    "__version__",
    # profiles
    "MassProfile", "TauFunction", "TimeGrid", "ScenarioConfig",
    "scenario_from_json", "scenario_from_dict", "scenario_to_dict",
    "mass_at", "mass_rate_at", "tau_at",
    # sigma-equation solvers
    "SigmaTrajectory", "ComplexSplitTrajectory", "SolverMeta",
    "integrate_modified_ep", "integrate_ft_variant", "integrate_complex_split",
    "pinney_closed_form", "pinney_lambda_squared",
    "pinney_coefficients_from_initial", "ep_residual", "ft_residual",
    "split_linear_residual",
    # invariant coefficients
    "CoefficientTrajectory", "CoefficientModel", "ExponentialScenario",
    "TauOdeResidual", "coefficients_from_sigma", "integrate_coefficient_system",
    "electric_field", "tau_ode_residual", "exponential_scenario",
    "sigma_consistent_init", "coefficient_model_from_trajectory",
    # grid quantum mechanics
    "SpatialGrid", "OperatorMatrix", "WaveState", "GaussianSpec",
    "InvarianceCheck", "RefinementStudy", "build_hamiltonian",
    "build_invariant", "gaussian_state", "evolve_crank_nicolson",
    "invariant_expectation", "invariance_residual", "run_invariance_check",
    "run_refinement_study", "convergence_order",
    # errors
    "EPLabError", "ConfigError", "DomainError", "PositivityError",
    "SingularityError", "StiffnessError", "InsufficientDataError",
    "DegenerateTrajectoryError", "ConstraintError", "HermiticityError",
    "InvalidStateError", "NumericsError",
]
