"""Embedded LP/SOCP solver and the standard conic form it consumes."""

from .ipm import INFEASIBLE, NUMERICAL_LIMIT, OPTIMAL, UNBOUNDED, ConicSolution, solve
from .standard_form import (
    StandardFormError,
    StandardFormProgram,
    export_standard_form,
    import_standard_form,
)

__all__ = [
    "ConicSolution",
    "INFEASIBLE",
    "NUMERICAL_LIMIT",
    "OPTIMAL",
    "StandardFormError",
    "StandardFormProgram",
    "UNBOUNDED",
    "export_standard_form",
    "import_standard_form",
    "solve",
]
