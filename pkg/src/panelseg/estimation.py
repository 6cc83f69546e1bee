"""Data-driven exact weights.

The exact weights need ``V^2(i) = f_i(Sigma) / sigma^2`` where ``Sigma`` is
the time covariance of a single panel and ``f_i(Sigma) = a_i Sigma a_i^T``.
``Sigma`` is estimated across panels, either with the plain sample covariance
(valid when all panels share the same mean at each time point) or with a
Toeplitz-banded estimate built from a change-free training window.

The centred banded variant first removes per-panel training means; it is a
heuristic that tolerates panel-specific levels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz
from scipy.optimize import nnls

from .errors import InsufficientPanels, InvalidArgument, InvalidTrainingWindow, SolverFailure
from .model import NoiseKind, NoiseModel, as_panel_array
from .weights import WeightScheme, weight_vector


@dataclass(frozen=True)
class CovarianceEstimate:
    matrix: np.ndarray
    method: str  # "natural", "banded", "banded-centered"
    band: int | None = None
    window: tuple[int, int] | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class EstimatedWeights:
    weights: np.ndarray
    fallback_used: bool
    source: str  # "exact-est", "exact-banded", "exact-banded-centered", "exact-reg"
    v_squared: np.ndarray | None = None


def natural_covariance(Y) -> CovarianceEstimate:
    """Sample covariance of the time vector across panels (divisor ``d-1``)."""
    Y = as_panel_array(Y)
    d = Y.shape[1]
    if d <= 1:
        raise InsufficientPanels(f"need d > 1 panels, got {d}")
    Z = Y - Y.mean(axis=1, keepdims=True)
    S = Z @ Z.T / (d - 1)
    return CovarianceEstimate(_symmetrize(S), "natural")


def _symmetrize(S):
    return (S + S.T) / 2


def partial_sum_coefficients(n: int) -> np.ndarray:
    """``(n-1) x n`` matrix of ``a_{i,j}`` with ``S_i = sum_j a_{i,j} eps_j``."""
    i = np.arange(1, n)[:, None]
    j = np.arange(1, n + 1)[None, :]
    return np.where(j <= i, 1 - i / n, -i / n) / np.sqrt(n)


def quadratic_form_f(Sigma, i: int) -> float:
    """``f_i(Sigma) = a_i Sigma a_i^T`` for one index ``i``."""
    Sigma = np.asarray(Sigma, dtype=float)
    n = _check_square(Sigma)
    if not 1 <= i <= n - 1:
        raise InvalidArgument(f"index {i} outside 1..{n - 1}")
    a = partial_sum_coefficients(n)[i - 1]
    return float(a @ Sigma @ a)


def quadratic_forms(Sigma) -> np.ndarray:
    """``f_i(Sigma)`` for all ``i = 1..n-1``."""
    Sigma = np.asarray(Sigma, dtype=float)
    n = _check_square(Sigma)
    A = partial_sum_coefficients(n)
    return np.sum((A @ Sigma) * A, axis=1)


def _check_square(Sigma):
    if Sigma.ndim != 2 or Sigma.shape[0] != Sigma.shape[1] or Sigma.shape[0] < 2:
        raise InvalidArgument(f"expected a square n x n matrix with n >= 2, got {Sigma.shape}")
    return Sigma.shape[0]


def ma1_time_covariance(model: NoiseModel, n: int) -> np.ndarray:
    """Analytic time covariance of one panel of the noise model."""
    if model.kind is NoiseKind.IID:
        return model.sigma2_tilde * np.eye(n)
    s2, phi, t2 = model.sigma2_tilde, model.phi, model.theta**2
    col = np.zeros(n)
    col[0] = (1 + phi**2) * (1 + t2) * s2
    if n > 1:
        col[1] = phi * (1 + t2) * s2
    return toeplitz(col)


def banded_covariance(Y, n1: int, n2: int, h: int = 2, centered: bool = False) -> CovarianceEstimate:
    """Toeplitz-banded covariance from the training window ``n1..n2`` (1-based).

    Lag-``r`` covariances are averaged along the diagonals of the sample
    covariance of the training block and kept up to lag ``h``.
    """
    Y = as_panel_array(Y)
    n, d = Y.shape
    if d <= 1:
        raise InsufficientPanels(f"need d > 1 panels, got {d}")
    if not 1 <= n1 < n2 <= n:
        raise InvalidTrainingWindow(f"need 1 <= n1 < n2 <= n, got n1={n1}, n2={n2}, n={n}")
    if not 0 <= h <= n2 - n1:
        raise InvalidTrainingWindow(f"need 0 <= h <= n2-n1={n2 - n1}, got h={h}")
    block = Y[n1 - 1 : n2]
    if centered:
        block = block - block.mean(axis=0, keepdims=True)
    S = natural_covariance(block).matrix
    xi = np.array([np.mean(np.diagonal(S, r)) for r in range(h + 1)])
    col = np.zeros(n)
    col[: h + 1] = xi
    method = "banded-centered" if centered else "banded"
    return CovarianceEstimate(toeplitz(col), method, band=h, window=(n1, n2))


def estimated_exact_weights(cov: CovarianceEstimate, source: str | None = None) -> EstimatedWeights:
    """Weights ``f_i(Sigma_hat)^{-1/2}``, or standard weights if any ``f_i <= 0``."""
    f = quadratic_forms(cov.matrix)
    if source is None:
        source = {"natural": "exact-est", "banded": "exact-banded",
                  "banded-centered": "exact-banded-centered"}[cov.method]
    n = cov.n
    if np.all(f > 0) and np.all(np.isfinite(f)):
        return EstimatedWeights(f**-0.5, False, source, f)
    return EstimatedWeights(weight_vector(WeightScheme.standard(), n), True, source, f)


def supporting_slopes(w) -> np.ndarray:
    """Slopes ``g_i`` of supporting lines for a convex sequence ``w``.

    Uses the left difference (right difference at the first point); for a
    convex sequence these satisfy ``w[j] >= w[i] + g_i (j - i)`` for all pairs.
    """
    w = np.asarray(w, dtype=float)
    diff = np.diff(w)
    return np.concatenate([diff[:1], diff])


def convexity_violation(w, g=None) -> float:
    """Largest violation of ``w[j] >= w[i] + g_i (j - i)`` over all pairs."""
    w = np.asarray(w, dtype=float)
    if g is None:
        g = supporting_slopes(w)
    idx = np.arange(w.size)
    gap = w[None, :] - w[:, None] - g[:, None] * (idx[None, :] - idx[:, None])
    return float(max(0.0, -gap.min()))


def convex_regression(w_hat, orientation: str = "convex") -> EstimatedWeights:
    """Least-squares projection of ``w_hat`` onto convex (or concave) sequences.

    The feasible set is parametrised as ``a + b*i + sum_k c_k (i - k)_+`` with
    ``c_k >= 0`` for interior knots; the intercept and slope are profiled out
    and the remaining nonnegative least squares problem is solved by an
    active-set method. The returned weights fall back to the standard scheme
    if the fit is not strictly positive.
    """
    w_hat = np.asarray(w_hat, dtype=float)
    if w_hat.ndim != 1 or w_hat.size < 2:
        raise InvalidArgument("need at least two weights")
    if orientation not in ("convex", "concave"):
        raise InvalidArgument(f"orientation must be 'convex' or 'concave', got {orientation!r}")
    sign = 1.0 if orientation == "convex" else -1.0
    fit = sign * _convex_projection(sign * w_hat)
    n = w_hat.size + 1
    if np.all(fit > 0):
        return EstimatedWeights(fit, False, "exact-reg")
    return EstimatedWeights(weight_vector(WeightScheme.standard(), n), True, "exact-reg")


def _convex_projection(y):
    m = y.size
    if m <= 2:
        return y.copy()
    i = np.arange(m, dtype=float)
    affine = np.column_stack([np.ones(m), i])
    hinge = np.maximum(i[:, None] - np.arange(1, m - 1)[None, :], 0.0)
    Q, _ = np.linalg.qr(affine)

    def perp(x):
        return x - Q @ (Q.T @ x)

    scale = max(1.0, float(np.max(np.abs(y))))
    c, _ = nnls(perp(hinge), perp(y) / scale, maxiter=10 * m * m)
    c *= scale
    resid = y - hinge @ c
    coef, *_ = np.linalg.lstsq(affine, resid, rcond=None)
    fit = affine @ coef + hinge @ c
    # hinge coefficients are the second differences of the fit
    if np.any(np.diff(fit, 2) < -1e-8 * scale):
        raise SolverFailure("convex regression returned an infeasible fit",
                            float(-np.diff(fit, 2).min()))
    return fit
