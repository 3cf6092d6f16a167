"""Solution path over the penalty grid and group extraction.

Solves are warm started along an increasing penalty grid.  At each grid
point the split variables that are exactly zero define a graph on the
subjects; its connected components are the estimated subgroups.  After
selecting a grid point the model is refit with one pooled coefficient
vector per subgroup.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.csgraph import connected_components

from ._kernels import pair_indices
from .bspline import basis_matrix
from .metrics import Partition
from .penalty import PenaltyConfig
from .solver import AdmmConfig, AdmmState, default_init, gls_pieces, run_admm

__all__ = [
    "PathConfig",
    "SolutionPoint",
    "ClusterResult",
    "initial_estimates",
    "solve_path",
    "extract_groups",
    "refit_groups",
]


@dataclass(frozen=True)
class PathConfig:
    """Penalty grid: explicit values or a log-spaced range."""

    lambdas: tuple | None = None
    lam_min: float = 0.05
    lam_max: float = 2.0
    num: int = 40

    def __post_init__(self):
        if self.lambdas is None:
            if not (0 < self.lam_min < self.lam_max):
                raise ValueError(
                    f"need 0 < lam_min < lam_max, got "
                    f"[{self.lam_min}, {self.lam_max}]"
                )
            if self.num < 1:
                raise ValueError(f"grid size must be >= 1, got {self.num}")
        else:
            lams = np.asarray(self.lambdas, dtype=float)
            if len(lams) == 0:
                raise ValueError("explicit grid is empty")
            if np.any(lams < 0) or np.any(np.diff(lams) <= 0):
                raise ValueError(
                    "explicit grid must be nonnegative and strictly increasing"
                )

    def grid(self) -> np.ndarray:
        if self.lambdas is not None:
            return np.asarray(self.lambdas, dtype=float)
        return np.geomspace(self.lam_min, self.lam_max, self.num)


@dataclass
class SolutionPoint:
    """Fused fit at one penalty level."""

    lam: float
    gamma: np.ndarray
    membership: Partition
    k_hat: int
    converged: bool
    iterations: int
    primal_norm: float
    dual_norm: float


@dataclass
class ClusterResult:
    """Selected partition with pooled per-group curves."""

    k_hat: int
    membership: Partition
    coefficients: np.ndarray
    knots: np.ndarray = field(repr=False)
    order: int = 3
    lam: float | None = None

    def curve(self, group: int, tgrid) -> np.ndarray:
        """Fitted curve of one group (labels start at 1) on a grid."""
        if not 1 <= group <= self.k_hat:
            raise ValueError(f"group must be in 1..{self.k_hat}, got {group}")
        basis = basis_matrix(self.knots, self.order, tgrid)
        return basis @ self.coefficients[group - 1]

    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.membership.labels)[1:]


def initial_estimates(design, dataset) -> np.ndarray:
    """Per-subject OLS coefficients used to start the path."""
    return default_init(design, dataset).gamma


def extract_groups(delta: np.ndarray, n: int) -> Partition:
    """Connected components of the zero-difference graph.

    A pair belongs to the graph when its split variable is exactly the
    zero vector (the proximal map produces exact zeros).  Labels are
    renumbered 1..K in order of each group's smallest subject index.
    """
    pi, pj = pair_indices(n)
    fused = ~np.any(delta != 0.0, axis=1) if len(delta) else np.zeros(0, bool)
    rows = pi[fused]
    cols = pj[fused]
    graph = scipy.sparse.coo_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n, n)
    )
    _, raw = connected_components(graph, directed=False)
    # renumber so group 1 contains subject 0, etc.
    order = {}
    labels = np.empty(n, dtype=int)
    for i, comp in enumerate(raw):
        if comp not in order:
            order[comp] = len(order) + 1
        labels[i] = order[comp]
    return Partition(labels=labels)


def solve_path(design, dataset, v_blocks, penalty: PenaltyConfig,
               path_config: PathConfig | None = None,
               admm_config: AdmmConfig | None = None) -> list:
    """Warm-started solves over the penalty grid, in increasing order."""
    path_config = path_config or PathConfig()
    admm_config = admm_config or AdmmConfig()
    n = design.n_subjects
    state = default_init(design, dataset)
    points = []
    for lam in path_config.grid():
        state = run_admm(design, dataset, v_blocks, penalty, float(lam),
                         config=admm_config, init=state)
        membership = extract_groups(state.delta, n)
        points.append(SolutionPoint(
            lam=float(lam),
            gamma=state.gamma.copy(),
            membership=membership,
            k_hat=membership.k,
            converged=state.converged,
            iterations=state.iterations,
            primal_norm=state.primal_norm,
            dual_norm=state.dual_norm,
        ))
    return points


def refit_groups(design, dataset, v_blocks, membership: Partition,
                 lam: float | None = None) -> ClusterResult:
    """Pooled generalized least squares fit within each subgroup."""
    if membership.n != design.n_subjects:
        raise ValueError(
            f"membership covers {membership.n} subjects, design has "
            f"{design.n_subjects}"
        )
    gram, xvy = gls_pieces(design, dataset, v_blocks)
    d = design.dim
    groups = membership.groups()
    coefficients = np.empty((len(groups), d))
    for k, members in enumerate(groups):
        lhs = gram[members].sum(axis=0)
        rhs = xvy[members].sum(axis=0)
        try:
            cf = scipy.linalg.cho_factor(lhs, lower=True)
        except scipy.linalg.LinAlgError:
            raise ValueError(
                f"pooled design for group {k + 1} is singular; "
                "use fewer interior knots"
            ) from None
        coefficients[k] = scipy.linalg.cho_solve(cf, rhs)
    return ClusterResult(
        k_hat=len(groups),
        membership=membership,
        coefficients=coefficients,
        knots=design.knots,
        order=design.config.order,
        lam=lam,
    )
