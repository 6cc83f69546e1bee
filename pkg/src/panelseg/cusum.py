"""Weighted CUSUM profile and single change point estimate.

``t(i) = w(i,n)^2 * sum_k (sum_{j<=i} (Y[j,k] - mean_k))^2`` for ``i = 1..n-1``;
the estimate is the smallest maximiser of ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, InvalidPanelLength, InvalidWeights
from .model import as_panel_array

TIE_RTOL = 1e-12
# above this many panels the sum over panels is done with exact rounding
COMPENSATED_MIN_D = 10_000


@dataclass(frozen=True)
class CusumProfile:
    t: np.ndarray
    argmax_set: tuple[int, ...]
    estimate: int


def argmax_set(values, rtol: float = TIE_RTOL) -> tuple[int, ...]:
    """All 1-based indices within relative tolerance ``rtol`` of the maximum."""
    values = np.asarray(values, dtype=float)
    top = values.max()
    return tuple(int(i) + 1 for i in np.flatnonzero(values >= top - rtol * abs(top)))


def _centered_cumsums(Y):
    Y = as_panel_array(Y)
    n = Y.shape[0]
    if n < 3:
        raise InvalidPanelLength(f"need n >= 3, got n={n}")
    # ascending j; the i = n row is identically zero and dropped
    return np.cumsum(Y - Y.mean(axis=0), axis=0)[:-1]


def partial_sums(X) -> np.ndarray:
    """``S[i,k] = n^{-1/2} sum_{j<=i} (X[j,k] - mean_k)`` for ``i = 1..n-1``."""
    X = as_panel_array(X)
    return _centered_cumsums(X) / math.sqrt(X.shape[0])


def squared_cumsum_norms(Y) -> np.ndarray:
    """``q(i) = sum_k (sum_{j<=i} (Y[j,k] - mean_k))^2``; weight independent."""
    sums = _centered_cumsums(Y)
    sq = sums * sums
    if sq.shape[1] >= COMPENSATED_MIN_D:
        return np.array([math.fsum(row) for row in sq])
    return sq.sum(axis=1)


def _check_weights(w, n):
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size != n - 1:
        raise InvalidArgument(f"need {n - 1} weights, got shape {w.shape}")
    if not np.all(w > 0) or not np.all(np.isfinite(w)):
        raise InvalidWeights("weights must be strictly positive and finite")
    return w


def profile_from_norms(q, w) -> CusumProfile:
    w = _check_weights(w, len(q) + 1)
    t = w**2 * q
    ties = argmax_set(t)
    return CusumProfile(t, ties, ties[0])


def cusum_statistic(Y, w) -> CusumProfile:
    """Weighted CUSUM profile ``t(1..n-1)`` with its argmax set."""
    Y = as_panel_array(Y)
    _check_weights(w, Y.shape[0])
    return profile_from_norms(squared_cumsum_norms(Y), w)


def estimate_change(Y, w) -> int:
    """Smallest maximiser of the weighted CUSUM profile."""
    return cusum_statistic(Y, w).estimate


def write_profile_csv(path, profile: CusumProfile) -> None:
    with open(path, "w") as fh:
        fh.write("i,t\n")
        for i, t in enumerate(profile.t, start=1):
            fh.write(f"{i},{float(t)!r}\n")
