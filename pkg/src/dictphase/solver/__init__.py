"""l1-analysis phase retrieval solvers and exact desk-scale oracles."""
from .admm import RecoveryResult, SolverConfig, analysis_basis_pursuit, soft_threshold
from .oracle import oracle_branch_and_bound, oracle_sign_enumeration
from .phase import distance_mod_sign, lift_candidates, pr_l1_analysis, sign_pattern

__all__ = [
    "RecoveryResult", "SolverConfig", "analysis_basis_pursuit", "soft_threshold",
    "oracle_branch_and_bound", "oracle_sign_enumeration",
    "distance_mod_sign", "lift_candidates", "pr_l1_analysis", "sign_pattern",
]
