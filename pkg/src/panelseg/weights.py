"""Weighting schemes ``w(i, n)`` and closed-form variance functions ``V^2(i)``.

Weights are defined on ``i = 1..n-1`` only. Every estimator in the package
depends on the weights only up to a positive constant factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NonPositiveVariance
from .model import NoiseKind, NoiseModel


@dataclass(frozen=True)
class WeightScheme:
    """One of ``simple``, ``standard``, ``weighted`` (with ``gamma``) or ``exact``.

    ``exact`` carries the standard deviation profile ``V`` (length ``n-1``)
    and has weights ``1 / V(i)``.
    """

    tag: str
    gamma: float = 0.0
    V: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.tag not in ("simple", "standard", "weighted", "exact"):
            raise InvalidArgument(f"unknown weight scheme {self.tag!r}")
        if self.tag == "weighted" and not 0.0 <= self.gamma <= 0.5:
            raise InvalidArgument(f"gamma must lie in [0, 1/2], got {self.gamma}")
        if self.tag == "exact":
            if self.V is None:
                raise InvalidArgument("exact scheme needs V")
            V = tuple(float(v) for v in np.ravel(self.V))
            if not all(v > 0 for v in V):
                raise NonPositiveVariance("exact scheme needs strictly positive V")
            object.__setattr__(self, "V", V)

    @classmethod
    def simple(cls):
        return cls("simple")

    @classmethod
    def standard(cls):
        return cls("standard")

    @classmethod
    def weighted(cls, gamma):
        return cls("weighted", float(gamma))

    @classmethod
    def exact(cls, V):
        return cls("exact", V=tuple(np.ravel(V)))

    @classmethod
    def exact_for(cls, model: NoiseModel, n: int):
        return cls.exact(np.sqrt(v_squared_vector(model, n)))

    def vector(self, n: int) -> np.ndarray:
        """Weights ``w(1..n-1, n)`` as an array."""
        return weight_vector(self, n)

    def __str__(self):
        if self.tag == "weighted":
            return f"weighted:{self.gamma:g}"
        return self.tag


def _check_index(i, n):
    if n < 2 or not 1 <= i <= n - 1:
        raise InvalidArgument(f"index {i} outside 1..{n - 1}")


def weight(scheme: WeightScheme, i: int, n: int) -> float:
    _check_index(i, n)
    return float(weight_vector(scheme, n)[i - 1])


def weight_vector(scheme: WeightScheme, n: int) -> np.ndarray:
    if n < 2:
        raise InvalidArgument(f"need n >= 2, got {n}")
    x = np.arange(1, n) / n
    base = x * (1 - x)
    if scheme.tag == "simple":
        return np.ones(n - 1)
    if scheme.tag == "standard":
        return base**-0.5
    if scheme.tag == "weighted":
        return base ** (-scheme.gamma)
    V = np.asarray(scheme.V)
    if V.size != n - 1:
        raise InvalidArgument(f"exact scheme has {V.size} entries, need n-1={n - 1}")
    return 1.0 / V


def v_squared(model: NoiseModel, i: int, n: int) -> float:
    """Closed-form ``V^2(i) = Var(S_{i,k}(eps)) / sigma^2``."""
    _check_index(i, n)
    return float(v_squared_vector(model, n)[i - 1])


def v_squared_vector(model: NoiseModel, n: int) -> np.ndarray:
    """``V^2(1..n-1)``.

    IID: ``(i/n)(1 - i/n)``. MA(1): ``C*alpha(phi)*(i/n)(1-i/n) - 2*C*phi/n``
    with ``alpha(phi) = 1 + phi^2 + 2 phi + 2 phi / n`` and
    ``C = (sigma_tilde/sigma)^2 (1 + theta^2)`` (which equals ``1/(1+phi^2)``).
    """
    if n < 2:
        raise InvalidArgument(f"need n >= 2, got {n}")
    x = np.arange(1, n) / n
    base = x * (1 - x)
    if model.kind is NoiseKind.IID:
        return base
    phi = model.phi
    alpha = 1 + phi**2 + 2 * phi + 2 * phi / n
    C = model.sigma2_tilde / model.sigma2 * (1 + model.theta**2)
    return C * alpha * base - 2 * C * phi / n


def exact_weights_from_v(V) -> np.ndarray:
    """Exact weights ``1 / V(i)`` from a standard deviation profile ``V``."""
    V = np.asarray(V, dtype=float)
    if V.ndim != 1 or V.size == 0:
        raise InvalidArgument("V must be a nonempty vector")
    if not np.all(V > 0):
        raise NonPositiveVariance("V must be strictly positive")
    return 1.0 / V


def exact_weights_from_v_squared(V2) -> np.ndarray:
    V2 = np.asarray(V2, dtype=float)
    if not np.all(V2 > 0):
        raise NonPositiveVariance("V^2 must be strictly positive")
    return exact_weights_from_v(np.sqrt(V2))
