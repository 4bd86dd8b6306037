"""Compressive sensing tools for CNN structured operators."""

from . import constants, exceptions
from .diagnostics import empirical_rip, exact_model_rip_delta, theorem2_bound
from .helpers import TrialStreams
from .model_sparse import PoolingGeometry, project_model_sparse, sample_model_sparse
from .operator import (
    FilterBank,
    InputGeometry,
    StructuredOperator,
    build_operator,
    coherence,
    new_random_filterbank,
    normalize_rows,
)
from .recovery import feedforward_reconstruct, model_iht, recover_activation

__all__ = (
    "constants",
    "exceptions",
    "FilterBank",
    "InputGeometry",
    "PoolingGeometry",
    "StructuredOperator",
    "TrialStreams",
    "build_operator",
    "coherence",
    "empirical_rip",
    "exact_model_rip_delta",
    "feedforward_reconstruct",
    "model_iht",
    "new_random_filterbank",
    "normalize_rows",
    "project_model_sparse",
    "recover_activation",
    "sample_model_sparse",
    "theorem2_bound",
)
