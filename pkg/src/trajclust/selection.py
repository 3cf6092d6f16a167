"""Choosing the penalty level on the solution path.

Three modes are supported: a high-dimensional BIC on the fused fits, the
Calinski-Harabasz index on the initial per-subject estimates, and a
known group count.  Ties always resolve toward the smaller penalty, and
grid points whose solve did not converge are never eligible.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "SelectionCriterion",
    "bic_score",
    "ch_score",
    "select_lambda",
]


@dataclass(frozen=True)
class SelectionCriterion:
    """Parsed selection mode: bic (with constant c), ch, or known-k."""

    kind: str
    c: float = 0.6
    k: int | None = None

    def __post_init__(self):
        if self.kind not in ("bic", "ch", "known-k"):
            raise ValueError(f"unknown criterion kind {self.kind!r}")
        if self.kind == "bic" and self.c <= 0:
            raise ValueError(f"bic constant must be positive, got {self.c}")
        if self.kind == "known-k" and (self.k is None or self.k < 1):
            raise ValueError(f"known-k needs a group count >= 1, got {self.k}")

    @classmethod
    def parse(cls, text: str) -> "SelectionCriterion":
        """Parse "bic", "bic:0.6", "ch" or "known-k:3"."""
        parts = text.strip().lower().split(":")
        kind = parts[0]
        if kind == "bic":
            c = float(parts[1]) if len(parts) > 1 else 0.6
            return cls(kind="bic", c=c)
        if kind == "ch":
            if len(parts) > 1:
                raise ValueError("ch takes no parameter")
            return cls(kind="ch")
        if kind == "known-k":
            if len(parts) != 2:
                raise ValueError("known-k needs a group count, e.g. known-k:2")
            return cls(kind="known-k", k=int(parts[1]))
        raise ValueError(f"cannot parse criterion {text!r}")


def bic_score(design, dataset, corr_blocks, gamma, k_hat: int,
              c: float = 0.6) -> float:
    """log of the correlation-weighted mean squared error plus a
    complexity charge proportional to ``k_hat * d``.

    The charge is ``c * log(log(n d)) * (log N / N) * k_hat * d`` with N
    the total observation count.
    """
    n, d = design.n_subjects, design.dim
    total = 0.0
    big_n = 0
    for X, subj, R, g in zip(design.blocks, dataset.subjects, corr_blocks,
                             gamma):
        r = subj.values - X @ g
        cf = scipy.linalg.cho_factor(R, lower=True)
        total += float(r @ scipy.linalg.cho_solve(cf, r))
        big_n += len(r)
    penalty = c * math.log(math.log(n * d)) * (math.log(big_n) / big_n)
    return math.log(total / big_n) + penalty * k_hat * d


def ch_score(initial_gamma: np.ndarray, membership) -> float:
    """Between/within variance ratio on the initial estimates.

    Undefined for a single group (raises).  A zero within-group scatter
    (including the all-singletons partition) returns +inf as a flag;
    such points are not eligible for selection.
    """
    labels = np.asarray(
        membership.labels if hasattr(membership, "labels") else membership,
        dtype=int,
    )
    gamma = np.asarray(initial_gamma, dtype=float)
    n = gamma.shape[0]
    uniq = np.unique(labels)
    k = len(uniq)
    if k == 1:
        raise ValueError("ch_score is undefined for a single group")
    center = gamma.mean(axis=0)
    between = 0.0
    within = 0.0
    for g in uniq:
        members = gamma[labels == g]
        mu = members.mean(axis=0)
        between += len(members) * float(np.sum((mu - center) ** 2))
        within += float(np.sum((members - mu) ** 2))
    if within == 0.0:
        return math.inf
    return (between / (k - 1)) / (within / (n - k))


def select_lambda(points, criterion: SelectionCriterion,
                  bic_values=None, ch_values=None):
    """Pick one converged path point under the given criterion.

    ``bic_values`` / ``ch_values`` are per-point scores aligned with
    ``points`` (non-finite entries mean undefined).  Returns the chosen
    SolutionPoint; raises if no point qualifies.
    """
    if not points:
        raise ValueError("empty solution path")
    usable = [p.converged for p in points]
    if not any(usable):
        raise ValueError("no path point converged; nothing to select")

    if criterion.kind == "known-k":
        hits = [p for p, ok in zip(points, usable) if ok
                and p.k_hat == criterion.k]
        if not hits:
            attained = sorted({p.k_hat for p, ok in zip(points, usable) if ok})
            raise ValueError(
                f"no converged path point has {criterion.k} groups; "
                f"attained counts: {attained}"
            )
        if len(hits) > 1:
            warnings.warn(
                f"{len(hits)} path points attain k={criterion.k} "
                f"(lambda in [{hits[0].lam:.4g}, {hits[-1].lam:.4g}]); "
                "taking the smallest",
                stacklevel=2,
            )
        return hits[0]

    if criterion.kind == "bic":
        if bic_values is None:
            raise ValueError("bic selection needs bic_values")
        best = None
        for p, ok, score in zip(points, usable, bic_values):
            if not ok or not np.isfinite(score):
                continue
            if best is None or score < best[0]:
                best = (score, p)
        if best is None:
            raise ValueError("no converged path point has a finite bic score")
        return best[1]

    if ch_values is None:
        raise ValueError("ch selection needs ch_values")
    n = points[0].membership.n
    best = None
    for p, ok, score in zip(points, usable, ch_values):
        if not ok or not np.isfinite(score):
            continue
        if not 2 <= p.k_hat <= n - 1:
            continue
        if best is None or score > best[0]:
            best = (score, p)
    if best is None:
        raise ValueError(
            "no converged path point has between 2 and n-1 groups; "
            "the ch criterion cannot select"
        )
    return best[1]
