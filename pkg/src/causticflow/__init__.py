"""Caustics, gradient-line phase portraits and separatrix bifurcation
diagrams of planar Lagrangian maps with polynomial generating functions."""

__version__ = "0.1.0"

from .field import (FamilySpec, GeneratingFunction, Poly2, QuadraticPerturbation,
                    elliptic_umbilic_versal, format_poly, normal_form, parse_poly,
                    perturb, pyramid_slice)
from .geometry import Window
from .caustic import (CausticCurve, CriticalLocus, classify_caustic,
                      critical_locus, push_forward, pyramid_slices)
from .flow import (CriticalPoint, FlowOptions, PhasePortrait, Separatrix, classify,
                   moduli_dimension, poincare_index, portrait, portrait_batch,
                   separatrices, solve_critical_points, solve_critical_points_batch)
from .bifurcation import (BifurcationCurve, BifurcationDiagram, BifurcationOptions,
                          ExclusionError, SplittingSample, TrackingContext,
                          TrackingError, assemble_diagram, default_fiber_window,
                          locate_on_segment, splitting, trace_curve, validate_diagram)

__all__ = [
    "__version__",
    "Poly2", "GeneratingFunction", "QuadraticPerturbation", "FamilySpec",
    "normal_form", "perturb", "parse_poly", "format_poly", "pyramid_slice",
    "elliptic_umbilic_versal",
    "Window",
    "CriticalLocus", "CausticCurve", "critical_locus", "push_forward",
    "classify_caustic", "pyramid_slices",
    "CriticalPoint", "Separatrix", "PhasePortrait", "FlowOptions", "classify",
    "solve_critical_points", "solve_critical_points_batch", "poincare_index",
    "separatrices", "portrait", "portrait_batch", "moduli_dimension",
    "SplittingSample", "BifurcationCurve", "BifurcationDiagram",
    "BifurcationOptions", "TrackingContext", "TrackingError", "ExclusionError",
    "splitting", "locate_on_segment", "trace_curve", "assemble_diagram",
    "validate_diagram", "default_fiber_window",
]
