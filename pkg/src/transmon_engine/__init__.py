"""Steady-state thermodynamics of a driven transmon heat engine."""

from .errors import (AmbiguityError, ConfigError, DomainError, EmptyResultError, EngineError,
                     PreconditionError, SingularityError, ToleranceError, TruncationError)
from .model import (CoherencePhase, EngineParameters, FreqInterpretation, GammaConvention, Knobs,
                    ThermalGap, steady_state_analytic, table1_parameters, to_internal_units)

__version__ = "0.1.0"
