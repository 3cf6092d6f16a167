"""Pairwise kernels for the fusion solver.

The inner loop of the solver touches every subject pair once per
iteration, which is the hot path for moderate to large n.  Each kernel
exists in two forms: a loop version compiled with numba when it is
installed, and a vectorized numpy version.  Set ``TRAJCLUST_NO_NUMBA=1``
to force the numpy path (useful for debugging and benchmarking; results
agree to floating point roundoff).
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("TRAJCLUST_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _env in {"1", "true", "yes", "on"}

if not NUMBA_DISABLED:
    try:
        from numba import njit

        HAS_NUMBA = True
    except ImportError:  # pragma: no cover - depends on environment
        HAS_NUMBA = False
else:
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA


def pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays (i, j) for all pairs i < j in lexicographic order."""
    pi, pj = np.triu_indices(n, k=1)
    return pi.astype(np.int64), pj.astype(np.int64)


# ---------------------------------------------------------------------------
# loop implementations (numba compiled when available)
# ---------------------------------------------------------------------------


def _accumulate_rhs_loop(delta, upsilon, pair_i, pair_j, theta, out):
    npairs, d = delta.shape
    for p in range(npairs):
        i = pair_i[p]
        j = pair_j[p]
        for l in range(d):
            v = theta * delta[p, l] - upsilon[p, l]
            out[i, l] += v
            out[j, l] -= v


def _pair_step_loop(gamma, delta, upsilon, pair_i, pair_j, theta, lam, tau,
                    s_out, zbuf):
    npairs, d = delta.shape
    shrink = 1.0 - 1.0 / (tau * theta)
    thr = lam / theta
    big = tau * lam
    r_sq = 0.0
    for p in range(npairs):
        i = pair_i[p]
        j = pair_j[p]
        znorm_sq = 0.0
        for l in range(d):
            z = gamma[i, l] - gamma[j, l] + upsilon[p, l] / theta
            zbuf[l] = z
            znorm_sq += z * z
        znorm = np.sqrt(znorm_sq)
        if znorm > big:
            scale = 1.0
        elif znorm <= thr:
            scale = 0.0
        else:
            scale = (1.0 - thr / znorm) / shrink
        for l in range(d):
            dnew = scale * zbuf[l]
            step = theta * (dnew - delta[p, l])
            s_out[i, l] += step
            s_out[j, l] -= step
            delta[p, l] = dnew
            resid = gamma[i, l] - gamma[j, l] - dnew
            r_sq += resid * resid
            upsilon[p, l] += theta * resid
    return r_sq


# ---------------------------------------------------------------------------
# vectorized numpy implementations
# ---------------------------------------------------------------------------


def accumulate_rhs_numpy(delta, upsilon, pair_i, pair_j, theta, out):
    v = theta * delta - upsilon
    np.add.at(out, pair_i, v)
    np.subtract.at(out, pair_j, v)


def pair_step_numpy(gamma, delta, upsilon, pair_i, pair_j, theta, lam, tau,
                    s_out, zbuf=None):
    diff = gamma[pair_i] - gamma[pair_j]
    zeta = diff + upsilon / theta
    znorm = np.sqrt(np.einsum("pl,pl->p", zeta, zeta))
    thr = lam / theta
    shrink = 1.0 - 1.0 / (tau * theta)
    scale = np.ones_like(znorm)
    inside = znorm <= tau * lam
    with np.errstate(divide="ignore", invalid="ignore"):
        shrunk = (1.0 - thr / znorm) / shrink
    shrunk = np.where(np.isfinite(shrunk), shrunk, 0.0)
    np.maximum(shrunk, 0.0, out=shrunk)
    scale[inside] = shrunk[inside]
    new_delta = scale[:, None] * zeta
    step = theta * (new_delta - delta)
    np.add.at(s_out, pair_i, step)
    np.subtract.at(s_out, pair_j, step)
    delta[:] = new_delta
    resid = diff - new_delta
    upsilon += theta * resid
    return float(np.einsum("pl,pl->", resid, resid))


if USE_NUMBA:
    _accumulate_rhs_nb = njit(cache=True)(_accumulate_rhs_loop)
    _pair_step_nb = njit(cache=True)(_pair_step_loop)
    accumulate_rhs = _accumulate_rhs_nb
    pair_step = _pair_step_nb
else:
    accumulate_rhs = accumulate_rhs_numpy
    pair_step = pair_step_numpy
