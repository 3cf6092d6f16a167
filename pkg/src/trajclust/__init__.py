"""Subgroup discovery for longitudinal trajectories.

Fits one spline curve per subject under a concave penalty on all
pairwise coefficient differences.  As the penalty grows, coefficient
vectors fuse; the fused blocks are the estimated subgroups.  The package
covers the full workflow: working covariance estimation, the penalized
solution path, model selection, pooled refits with confidence bands,
clustering metrics and a simulation harness.
"""

from .bspline import DesignMatrix, SplineConfig, design_matrix
from .covariance import WorkingCovariance, estimate_working_covariance
from .data import (LongitudinalDataset, StandardizationRecord, SubjectRecord,
                   load_csv, save_csv, standardize)
from .inference import ConfidenceBand, confidence_bands
from .metrics import (Partition, accuracy, normalized_mutual_information,
                      rand_index, rmse_curve)
from .path import (ClusterResult, PathConfig, SolutionPoint, extract_groups,
                   refit_groups, solve_path)
from .penalty import PenaltyConfig, group_soft_threshold, mcp_prox, mcp_value
from .pipeline import FitReport, fit_dataset
from .selection import SelectionCriterion, bic_score, ch_score, select_lambda
from .simulate import (ReplicationReport, ScenarioConfig, generate,
                       replication_rng, run_replications, true_curves)
from .solver import AdmmConfig, AdmmState, run_admm

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig",
    "AdmmState",
    "ClusterResult",
    "ConfidenceBand",
    "DesignMatrix",
    "FitReport",
    "LongitudinalDataset",
    "Partition",
    "PathConfig",
    "PenaltyConfig",
    "ReplicationReport",
    "ScenarioConfig",
    "SelectionCriterion",
    "SolutionPoint",
    "SplineConfig",
    "StandardizationRecord",
    "SubjectRecord",
    "WorkingCovariance",
    "accuracy",
    "bic_score",
    "ch_score",
    "confidence_bands",
    "design_matrix",
    "estimate_working_covariance",
    "extract_groups",
    "fit_dataset",
    "generate",
    "group_soft_threshold",
    "load_csv",
    "mcp_prox",
    "mcp_value",
    "normalized_mutual_information",
    "rand_index",
    "refit_groups",
    "replication_rng",
    "rmse_curve",
    "run_admm",
    "run_replications",
    "save_csv",
    "select_lambda",
    "solve_path",
    "standardize",
    "true_curves",
    "__version__",
]
