"""Evaluation of relational Horn logic: Datalog with sort quantification,
existential conclusions and inferred equalities."""

from .engine import CloseConfig, CloseReport, Engine, Mode, Outcome, close
from .phl import PhlError, load_theory, lower_theory, parse_phl
from .structure import Structure
from .theory import RhlTheory, validate_theory

__all__ = [
    "CloseConfig",
    "CloseReport",
    "Engine",
    "Mode",
    "Outcome",
    "PhlError",
    "RhlTheory",
    "Structure",
    "close",
    "load_theory",
    "lower_theory",
    "parse_phl",
    "validate_theory",
]
