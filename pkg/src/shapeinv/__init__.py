"""Rotation-invariant shape descriptors from moment tensors and Hermite expansions."""
from .align import AlignConfig, AlignmentResult, Rotation, grid_oracle_2d, objective, optimize
from .hermite import HermiteCoeffs, Polynomial, encode, hermite_fn, reconstruct, to_polynomial
from .invariants import (
    InvariantCatalog,
    InvariantVector,
    default_catalog,
    feature_vector,
    rotation_equivalence_test,
    similarity_distance,
)
from .io import load_grid, load_points, load_shape
from .shape_model import (
    DegenerateShapeError,
    MomentSet,
    Shape,
    center,
    central_moment,
    covariance,
    expectation,
    moments,
    prepare,
    scale_normalize,
)
from .symtensor import ContractionGraph, SymTensor, evaluate_graph, frobenius, pack_index, rotate, trace_power

__version__ = "0.1.0"
