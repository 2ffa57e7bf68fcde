"""Sparse phase retrieval with redundant dictionaries via l1-analysis."""
from ._rng import GENERATOR_VERSION
from .errors import (BudgetExceeded, DictPhaseError, DomainError, InfeasibleError,
                     MembershipError, PreconditionError, ShapeError)
from .frames import (Frame, analyze, best_k_term_error, is_in_D_sigma_k, make_identity_frame,
                     make_random_tight_frame, synthesize)
from .measure import (MeasurementEnsemble, PhaselessObservation, add_bounded_noise,
                      gaussian_ensemble, phaseless_forward, row_restrict)

__version__ = "0.1.0"

__all__ = [
    "GENERATOR_VERSION", "BudgetExceeded", "DictPhaseError", "DomainError", "InfeasibleError",
    "MembershipError", "PreconditionError", "ShapeError", "Frame", "analyze",
    "best_k_term_error", "is_in_D_sigma_k", "make_identity_frame", "make_random_tight_frame",
    "synthesize", "MeasurementEnsemble", "PhaselessObservation", "add_bounded_noise",
    "gaussian_ensemble", "phaseless_forward", "row_restrict",
]
