"""Finite-domain universal-algebra and quantified-constraint workbench."""

from .errors import BudgetError, ParseError, QforgeError, ValidationError
from .model import Algebra, Domain, OpTable, Relation, Structure, materialize

__all__ = [
    "Algebra",
    "BudgetError",
    "Domain",
    "OpTable",
    "ParseError",
    "QforgeError",
    "Relation",
    "Structure",
    "ValidationError",
    "materialize",
]

__version__ = "0.1.0"
