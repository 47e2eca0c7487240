"""Exact formal theory of linear PDE systems with constant coefficients."""
from .field import Field, QQ, GenericityCondition
from .diffop import DiffPolynomial, DiffOperator, CoordinateChange, adjoint, compose, change_variables
from .jets import JetSystem, from_operator, prolong, project, symbol, pp_procedure
from .sequences import compatibility_operator, cc_chain
from .duality import double_duality, minimum_parametrization, kalman_test
from .catalog import make

__version__ = "0.1.0"
