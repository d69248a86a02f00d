"""Operator-splitting upwind solvers for two-dimensional population balance models."""

from .core import (Axis1D, BoundarySpec, ClosedForm, Constant, Coupled, Field2D, GeneralSource,
                   Grid2D, JaggedMesh, JaggedRow, LinearSink, NoSource, PerAxis, ProblemSpec,
                   SeparableTimeSize, TimeOnly, cfl_numbers, check_stability, stable_dt_split,
                   stable_dt_unsplit)
from .errors import (CompatibilityError, DomainError, EvaluationError, InterpolationError, NumericalError,
                     PBMError, SetupError, StabilityError)
from .schemes import RunResult, SchemeId, advance

__version__ = "0.1.0"
