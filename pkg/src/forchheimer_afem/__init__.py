"""Adaptive mixed finite elements for Brinkman-Darcy-Forchheimer flow with
point forces, driven by a weighted residual error estimator."""

from .adaptivity import AdaptiveTrace, TraceRow, adapt, fit_rate
from .estimator import (IndicatorField, error_indicators, global_estimator, local_indicator, mark,
                        multi_source_indicators)
from .exceptions import (AfemError, ConfigError, FitError, GeometryError, IncompatibleDataError,
                         NonconvergenceError, SingularEvaluationError, SingularSystemError,
                         SourcePlacementError, UnsupportedDegreeError)
from .experiments import (ExperimentConfig, parse_config, preset, run, serialize_config,
                          verify_manufactured)
from .mesh import DomainSpec, Mesh, bisect, build_initial_mesh, check_conformity, refine_uniform
from .solver import ProblemData, SolutionPair, picard_solve
from .spaces import MixedSpace, build_space
from .vtk import export_vtk, read_vtk
from .weights import composite_weight, power_weight, unweighted

__version__ = "0.1.0"
