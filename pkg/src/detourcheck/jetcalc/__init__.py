"""Jet calculus: truncated Taylor arithmetic, expressions, oracles."""

from .expr import Expr, ExprError, jet_eval, parse, to_string
from .jet import (
    Jet,
    JetDomainError,
    jcos,
    jcosh,
    jet_partial,
    jexp,
    jlog,
    jsin,
    jsinh,
    jsqrt,
)
from .kernel import backend_name
from .oracle import fd_coefficient, fd_derivative
from .sampling import SamplePlan, subseed
from .space import JetSpace, get_space, monomial_count

__all__ = [
    "Expr",
    "ExprError",
    "Jet",
    "JetDomainError",
    "JetSpace",
    "SamplePlan",
    "backend_name",
    "fd_coefficient",
    "fd_derivative",
    "get_space",
    "jcos",
    "jcosh",
    "jet_eval",
    "jet_partial",
    "jexp",
    "jlog",
    "jsin",
    "jsinh",
    "jsqrt",
    "monomial_count",
    "parse",
    "subseed",
    "to_string",
]
