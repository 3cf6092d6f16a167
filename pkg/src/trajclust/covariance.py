"""Working covariance for within-subject dependence.

Dependence is modeled as exponentially decaying in time distance:
``cov(t, s) = sigma2 * rho ** (kappa * |t - s|)``, with ``kappa`` fixed
so that the two closest pooled time values sit at scaled distance one.
On an equally spaced grid this reduces to an AR(1) structure indexed by
occasion.  The variance and decay parameters are moment estimates from
leverage-corrected per-subject least squares residuals.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "WorkingCovariance",
    "ResidualSet",
    "ols_residuals",
    "scale_kappa",
    "estimate_sigma2",
    "estimate_rho",
    "estimate_working_covariance",
    "covariance_blocks",
]

SIGMA2_FLOOR = 1e-8


@dataclass(frozen=True)
class WorkingCovariance:
    """Variance, decay and time-scaling of the working model."""

    sigma2: float
    rho: float
    kappa: float

    def corr_block(self, times) -> np.ndarray:
        """Correlation matrix rho ** (kappa * |t - s|) for one subject."""
        times = np.asarray(times, dtype=float)
        dist = np.abs(times[:, None] - times[None, :])
        if self.rho == 0.0:
            return np.eye(len(times))
        return self.rho ** (self.kappa * dist)

    def block(self, times) -> np.ndarray:
        """Covariance matrix sigma2 * R for one subject."""
        return self.sigma2 * self.corr_block(times)


@dataclass
class ResidualSet:
    """Leverage-corrected OLS residuals, one array per subject."""

    residuals: list

    def __iter__(self):
        return iter(self.residuals)


def _subject_ols(X: np.ndarray, y: np.ndarray, sid: str):
    m, d = X.shape
    if m <= d:
        raise ValueError(
            f"subject {sid!r} has {m} observations but the basis has "
            f"dimension {d}; residual estimation needs more than d points"
        )
    q_mat, r_mat = np.linalg.qr(X)
    if np.min(np.abs(np.diag(r_mat))) < 1e-10 * max(1.0, np.max(np.abs(r_mat))):
        raise ValueError(
            f"design for subject {sid!r} is singular; "
            "use fewer interior knots"
        )
    coef = np.linalg.solve(r_mat, q_mat.T @ y)
    hat_diag = np.einsum("ij,ij->i", q_mat, q_mat)
    return coef, hat_diag


def ols_residuals(design, dataset) -> ResidualSet:
    """Per-subject OLS residuals divided by (1 - leverage)."""
    out = []
    for X, subj in zip(design.blocks, dataset.subjects):
        coef, hat_diag = _subject_ols(X, subj.values, subj.sid)
        resid = subj.values - X @ coef
        out.append(resid / (1.0 - hat_diag))
    return ResidualSet(residuals=out)


def scale_kappa(pooled_times) -> float:
    """1 / gap between the two smallest distinct pooled time values."""
    distinct = np.unique(np.asarray(pooled_times, dtype=float))
    if len(distinct) < 2:
        raise ValueError("need at least two distinct time values")
    return 1.0 / (distinct[1] - distinct[0])


def estimate_sigma2(residuals: ResidualSet) -> float:
    """Mean over subjects of the per-subject mean squared residual."""
    per_subject = [float(np.mean(r * r)) for r in residuals]
    return max(float(np.mean(per_subject)), SIGMA2_FLOOR)


def estimate_rho(residuals: ResidualSet, dataset, kappa: float,
                 sigma2: float, tol: float = 1e-6) -> float:
    """Lag-one moment estimate of the decay parameter.

    Only adjacent within-subject pairs whose scaled distance
    ``kappa * (t[j+1] - t[j])`` equals one (within ``tol``, relative)
    contribute.  The average product is divided by ``sigma2`` and the
    result clamped to [0, 0.99].
    """
    products = []
    for r, subj in zip(residuals, dataset.subjects):
        gaps = kappa * np.diff(subj.times)
        use = np.abs(gaps - 1.0) <= tol
        if np.any(use):
            prods = r[:-1][use] * r[1:][use]
            products.extend(prods.tolist())
    if not products:
        warnings.warn(
            "no adjacent observations at the base time spacing; "
            "working correlation set to 0",
            stacklevel=2,
        )
        return 0.0
    rho = float(np.mean(products)) / sigma2
    return float(min(max(rho, 0.0), 0.99))


def estimate_working_covariance(design, dataset):
    """Estimate (sigma2, rho, kappa) from OLS residuals.

    Returns the working covariance together with the residual set so
    callers can reuse the residuals.
    """
    residuals = ols_residuals(design, dataset)
    sigma2 = estimate_sigma2(residuals)
    kappa = scale_kappa(dataset.pooled_times())
    rho = estimate_rho(residuals, dataset, kappa, sigma2)
    return WorkingCovariance(sigma2=sigma2, rho=rho, kappa=kappa), residuals


def covariance_blocks(cov: WorkingCovariance, dataset) -> list:
    """Per-subject covariance matrices V_i."""
    return [cov.block(s.times) for s in dataset.subjects]
