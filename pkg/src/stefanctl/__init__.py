"""Finite-difference state solver and source control for enthalpy-form multiphase Stefan problems."""
from .errors import (
    ConfigError, ConvergenceError, EllipticityError, GraphError, GridError,
    QuadratureError, StefanError, StepSizeError,
)
from .graph import (
    Branch, MollifiedGraph, MonotoneGraph, graph_eval, identity_graph,
    kernel_constant, mollify, mollify_derivative, two_phase_graph,
)
from .grid import (
    CoefficientGrid, Discretization, Domain, ProblemData, build_coefficient_grid,
    build_discretization, steklov_average_cell, steklov_average_prism,
)
from .solver import (
    DiscreteState, SolverConfig, contraction_factor, scalar_monotone_solve,
    solve_state, solve_timestep,
)
from .control import ControlProblem, ControlVector, cost_discrete, discretize_Q, lift_P
from .optimize import OptimizerConfig, projected_descent

__version__ = "0.1.0"

__all__ = [
    "Branch", "CoefficientGrid", "ConfigError", "ControlProblem", "ControlVector", "ConvergenceError",
    "DiscreteState", "Discretization", "Domain", "EllipticityError", "GraphError", "GridError",
    "MollifiedGraph", "MonotoneGraph", "OptimizerConfig", "ProblemData", "QuadratureError", "SolverConfig",
    "StefanError", "StepSizeError", "build_coefficient_grid", "build_discretization", "contraction_factor",
    "cost_discrete", "discretize_Q", "graph_eval", "identity_graph", "kernel_constant", "lift_P", "mollify",
    "mollify_derivative", "projected_descent", "scalar_monotone_solve", "solve_state", "solve_timestep",
    "steklov_average_cell", "steklov_average_prism", "two_phase_graph",
]
