"""Minimax concave penalty on pairwise coefficient distances.

For a distance t >= 0 the penalty is

    p(t) = lam * t - t^2 / (2 * tau)      if t <= tau * lam
           tau * lam^2 / 2                otherwise,

so the marginal penalty decreases linearly and vanishes beyond
``tau * lam``.  The proximal update used by the solver combines a
groupwise soft threshold with a concavity correction and is exact when
``tau * theta > 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PenaltyConfig",
    "mcp_value",
    "group_soft_threshold",
    "mcp_prox",
]


@dataclass(frozen=True)
class PenaltyConfig:
    """Concavity parameter tau and augmentation step theta."""

    tau: float = 3.0
    theta: float = 1.0

    def __post_init__(self):
        if self.tau <= 0 or self.theta <= 0:
            raise ValueError(
                f"tau and theta must be positive, got tau={self.tau}, "
                f"theta={self.theta}"
            )
        if self.tau * self.theta <= 1.0:
            raise ValueError(
                f"tau * theta must exceed 1 for a well-posed proximal "
                f"update, got {self.tau * self.theta}"
            )


def mcp_value(t, lam: float, tau: float):
    """Penalty value at distance t >= 0 (scalar or array)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("penalty is defined for nonnegative distances")
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    inside = t <= tau * lam
    out = np.where(inside, lam * t - t * t / (2.0 * tau),
                   tau * lam * lam / 2.0)
    return out if out.ndim else float(out)


def group_soft_threshold(z, thr: float) -> np.ndarray:
    """(1 - thr / ||z||)_+ z, with the zero vector mapped to zero."""
    z = np.asarray(z, dtype=float)
    norm = float(np.linalg.norm(z))
    if norm <= thr or norm == 0.0:
        return np.zeros_like(z)
    return (1.0 - thr / norm) * z


def mcp_prox(zeta, lam: float, config: PenaltyConfig) -> np.ndarray:
    """Minimizer of  theta/2 ||zeta - x||^2 + p(||x||).

    Piecewise: below the concavity radius ``tau * lam`` the soft
    threshold is inflated by 1 / (1 - 1/(tau*theta)); beyond it the
    penalty is flat and the input passes through unchanged.
    """
    zeta = np.asarray(zeta, dtype=float)
    norm = float(np.linalg.norm(zeta))
    if norm > config.tau * lam:
        return zeta.copy()
    shrink = 1.0 - 1.0 / (config.tau * config.theta)
    return group_soft_threshold(zeta, lam / config.theta) / shrink
