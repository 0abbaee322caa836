"""Numerical laboratory for L^p Markov-type inequalities on cuspidal planar domains."""
from .construct import EpsilonSequence, build_domain, build_profile, log_cusp_domain, synthetic_sequence
from .domain import Box, GraphDomain, LogCusp, PowerCusp, solve_epsilon_n
from .errors import (
    ConfigurationError,
    ConstructionError,
    DomainError,
    FitError,
    MlabError,
    NumericalError,
    PreconditionError,
)
from .jacobi import JacobiParams, jacobi_eval
from .markov import alpha_selector, best_markov_p2, extremal_ratio, fit_exponent, lower_bound_markov_p

__version__ = "0.1.0"
