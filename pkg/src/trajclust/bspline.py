"""Clamped B-spline bases and per-subject design matrices.

The basis of order ``q`` (polynomial degree ``q - 1``) with ``J``
interior knots has dimension ``d = J + q``.  Boundary knots are repeated
``q`` times so the basis is clamped: it sums to one everywhere on the
domain and evaluation outside the domain is an error rather than an
extrapolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SplineConfig",
    "DesignMatrix",
    "make_knots",
    "eval_basis",
    "basis_matrix",
    "design_matrix",
]

_KNOT_RULES = ("equal", "quantile")


@dataclass(frozen=True)
class SplineConfig:
    """Order, interior knot count, domain and knot placement rule."""

    order: int = 3
    n_interior: int = 1
    domain: tuple[float, float] = (0.0, 1.0)
    knot_rule: str = "equal"

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if self.n_interior < 0:
            raise ValueError(
                f"number of interior knots must be >= 0, got {self.n_interior}"
            )
        a, b = self.domain
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ValueError(f"domain must satisfy a < b, got {self.domain}")
        if self.knot_rule not in _KNOT_RULES:
            raise ValueError(
                f"knot_rule must be one of {_KNOT_RULES}, got {self.knot_rule!r}"
            )

    @property
    def dim(self) -> int:
        """Number of basis functions, J + q."""
        return self.n_interior + self.order


def make_knots(config: SplineConfig, times=None) -> np.ndarray:
    """Full clamped knot vector of length 2q + J.

    Interior knots are equally spaced on the domain under the "equal"
    rule, or placed at empirical quantiles of ``times`` under the
    "quantile" rule (which then requires ``times``).
    """
    a, b = config.domain
    q, J = config.order, config.n_interior
    if config.knot_rule == "equal":
        interior = a + (b - a) * np.arange(1, J + 1) / (J + 1)
    else:
        if times is None:
            raise ValueError("quantile knot rule requires observed times")
        times = np.asarray(times, dtype=float)
        probs = np.arange(1, J + 1) / (J + 1)
        interior = np.quantile(times, probs) if J > 0 else np.empty(0)
        if J > 0:
            if np.any(interior <= a) or np.any(interior >= b):
                raise ValueError(
                    "quantile knots fall on the domain boundary; "
                    "use fewer interior knots"
                )
            if np.any(np.diff(interior) <= 0):
                raise ValueError(
                    "duplicate quantile knots; use fewer interior knots"
                )
    return np.concatenate([np.full(q, a), interior, np.full(q, b)])


def basis_matrix(knots: np.ndarray, order: int, t) -> np.ndarray:
    """Rows of basis values for each point in ``t``.

    Uses the standard triangular recurrence on the knot span of each
    point.  Each row has at most ``order`` nonzero entries and sums to
    one.  Points outside [knots[0], knots[-1]] raise ValueError.
    """
    knots = np.asarray(knots, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    q = order
    d = len(knots) - q
    if d < q:
        raise ValueError("knot vector too short for the requested order")
    a, b = knots[0], knots[-1]
    if np.any(t < a) or np.any(t > b):
        bad = t[(t < a) | (t > b)][0]
        raise ValueError(f"point {bad} outside basis domain [{a}, {b}]")

    span = np.searchsorted(knots, t, side="right") - 1
    np.clip(span, q - 1, d - 1, out=span)

    npts = len(t)
    vals = np.zeros((npts, q))
    vals[:, 0] = 1.0
    left = np.zeros((npts, q))
    right = np.zeros((npts, q))
    for j in range(1, q):
        left[:, j] = t - knots[span + 1 - j]
        right[:, j] = knots[span + j] - t
        saved = np.zeros(npts)
        for r in range(j):
            tmp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
            vals[:, r] = saved + right[:, r + 1] * tmp
            saved = left[:, j - r] * tmp
        vals[:, j] = saved

    out = np.zeros((npts, d))
    cols = span[:, None] - (q - 1) + np.arange(q)[None, :]
    out[np.arange(npts)[:, None], cols] = vals
    return out


def eval_basis(knots: np.ndarray, order: int, t: float) -> np.ndarray:
    """Basis values at a single point, as a length-d vector."""
    return basis_matrix(knots, order, [float(t)])[0]


@dataclass
class DesignMatrix:
    """Per-subject spline design blocks sharing one knot vector."""

    config: SplineConfig
    knots: np.ndarray
    blocks: list = field(repr=False)

    @property
    def dim(self) -> int:
        return self.config.dim

    @property
    def n_subjects(self) -> int:
        return len(self.blocks)

    def stacked(self) -> np.ndarray:
        return np.vstack(self.blocks)


def design_matrix(dataset, config: SplineConfig) -> DesignMatrix:
    """Build the per-subject design blocks for a dataset.

    Subject order follows the dataset.  Any observation time outside the
    configured domain raises ValueError naming the subject.
    """
    knots = make_knots(config, times=dataset.pooled_times())
    blocks = []
    for subj in dataset.subjects:
        try:
            blocks.append(basis_matrix(knots, config.order, subj.times))
        except ValueError as exc:
            raise ValueError(f"subject {subj.sid!r}: {exc}") from exc
    return DesignMatrix(config=config, knots=knots, blocks=blocks)
