"""Margulis invariants of affine free-group actions on R^{2n+1}."""

__version__ = "0.1.0"

from .affine_group import (
    AffineMap,
    Representation,
    TangentCocycle,
    evaluate,
    interpolate,
    load_representation,
    save_representation,
    scale_translation,
)
from .families import SeededFamily, build_family
from .linalg_core import QuadraticSpace, make_quadratic_space
from .margulis import alpha, alpha_dot, alpha_squared_adjugate, neutral_vector, solve_coboundary
from .spectrum import (
    build_table,
    convexity_scan,
    entropy_estimate,
    intersection_estimate,
    pressure_quadratic,
    properness_scan,
)
from .words import ConjClass, canonical_class, enumerate_classes

__all__ = [
    "AffineMap",
    "ConjClass",
    "QuadraticSpace",
    "Representation",
    "SeededFamily",
    "TangentCocycle",
    "alpha",
    "alpha_dot",
    "alpha_squared_adjugate",
    "build_family",
    "build_table",
    "canonical_class",
    "convexity_scan",
    "entropy_estimate",
    "enumerate_classes",
    "evaluate",
    "interpolate",
    "intersection_estimate",
    "load_representation",
    "make_quadratic_space",
    "neutral_vector",
    "pressure_quadratic",
    "properness_scan",
    "save_representation",
    "scale_translation",
    "solve_coboundary",
]
