"""Deterministic limit objects for the large-``d`` behaviour of the estimators.

As ``d`` grows, ``t(i) / (d n^2 Delta^2)`` converges to the critical function

    C(i; u, n, r) = w(i)^2 * (V(i)^2 * r + H(i, u)^2)

with the tent ``H`` and noise-to-change ratio ``r = sigma^2 / (n Delta^2)``.
The estimators are consistent for ``u`` iff ``C`` has its unique maximum at
``i = u``. Everything here is closed form plus enumeration over integers.

Two unrelated quantities are both often written zeta: the common factors of
the panel model and the limiting location fraction ``u/n``; the latter is
called ``location_fraction`` here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cusum import TIE_RTOL, argmax_set
from .errors import InvalidArgument, OutsideValidity, UnsupportedGamma, VanishingChange
from .weights import WeightScheme, v_squared_vector, weight_vector
from .model import NoiseModel


@dataclass(frozen=True)
class CriticalProfile:
    values: np.ndarray
    argmax: tuple[int, ...]
    u: int
    n: int
    r: float


@dataclass(frozen=True)
class ConsistencyRegion:
    """Consistency bound for ``Weighted(gamma)`` weights under i.i.d. noise.

    ``bound`` is the supremum of ratios ``r`` for which the critical function
    peaks only at ``u`` (``math.inf`` when every ratio works).
    """

    u: int
    n: int
    gamma: float
    bound: float
    u_star: int
    s: float


@dataclass(frozen=True)
class PerfectEstimationCheck:
    ok: bool
    reason: str
    witness: tuple[int, int] | None = None

    def __bool__(self):
        return self.ok


def _check_iu(i, u, n):
    if not (1 <= i <= n - 1 and 1 <= u <= n - 1):
        raise InvalidArgument(f"need 1 <= i, u <= n-1 (i={i}, u={u}, n={n})")


def h_function(i, u: int, n: int):
    """Tent ``H(i,u)``: ``(i/n)(1-u/n)`` for ``i <= u``, ``(u/n)(1-i/n)`` after."""
    arr = np.asarray(i)
    if arr.ndim == 0:
        _check_iu(int(i), u, n)
        return float(min(i, u) / n * (1 - max(i, u) / n))
    if np.any(arr < 1) or np.any(arr > n - 1) or not 1 <= u <= n - 1:
        raise InvalidArgument(f"indices outside 1..{n - 1}")
    return np.minimum(arr, u) / n * (1 - np.maximum(arr, u) / n)


def _resolve_v2(V2, n):
    if V2 is None:
        return v_squared_vector(NoiseModel.iid(), n)
    if isinstance(V2, NoiseModel):
        return v_squared_vector(V2, n)
    V2 = np.asarray(V2, dtype=float)
    if V2.shape != (n - 1,):
        raise InvalidArgument(f"V^2 must have length n-1={n - 1}")
    if not np.all(V2 > 0):
        raise InvalidArgument("V^2 must be strictly positive")
    return V2


def critical_profile(u: int, n: int, r: float, scheme: WeightScheme, V2=None) -> CriticalProfile:
    """``C(i; u, n, r)`` for all ``i``; ``V2`` defaults to the i.i.d. profile.

    ``V2`` may be a vector ``V^2(1..n-1)`` or a :class:`NoiseModel`.
    """
    if not 1 <= u <= n - 1:
        raise InvalidArgument(f"u={u} outside 1..{n - 1}")
    if r < 0:
        raise InvalidArgument("r must be nonnegative")
    V2 = _resolve_v2(V2, n)
    w2 = weight_vector(scheme, n) ** 2
    H = h_function(np.arange(1, n), u, n)
    values = w2 * (V2 * r + H**2)
    return CriticalProfile(values, argmax_set(values, TIE_RTOL), u, n, r)


def critical_function(i: int, u: int, n: int, r: float, scheme: WeightScheme, V2=None) -> float:
    _check_iu(i, u, n)
    return float(critical_profile(u, n, r, scheme, V2).values[i - 1])


def critical_argmax(u: int, n: int, r: float, scheme: WeightScheme, V2=None) -> tuple[int, ...]:
    return critical_profile(u, n, r, scheme, V2).argmax


def assumption_a1(u, n, r, scheme, V2=None) -> bool:
    """True iff the critical function has its unique maximum at ``u``."""
    return critical_argmax(u, n, r, scheme, V2) == (u,)


def noise_change_ratio(sigma2: float, delta2: float, n: int) -> float:
    """``r = sigma^2 / (n * Delta^2)``."""
    if not delta2 > 0:
        raise VanishingChange("average squared change must be positive")
    if not sigma2 > 0:
        raise InvalidArgument("sigma^2 must be positive")
    return sigma2 / (n * delta2)


def check_perfect_estimation(V, n: int, sym_tol: float = 1e-10) -> PerfectEstimationCheck:
    """Symmetry ``V(i) = V(n-i)`` and strict decrease of ``V(i)/i``.

    Under exact weights these two together are equivalent to consistent
    estimation for every change point and every ratio.
    """
    V = np.asarray(V, dtype=float)
    if V.shape != (n - 1,):
        raise InvalidArgument(f"V must have length n-1={n - 1}")
    if not np.all(V > 0):
        raise InvalidArgument("V must be strictly positive")
    asym = np.abs(V - V[::-1]) > sym_tol * np.maximum(np.abs(V), np.abs(V[::-1]))
    if np.any(asym):
        i = int(np.flatnonzero(asym)[0]) + 1
        return PerfectEstimationCheck(False, "asymmetric", (i, n - i))
    ratio = V / np.arange(1, n)
    bad = np.flatnonzero(np.diff(ratio) >= 0)
    if bad.size:
        i = int(bad[0]) + 1
        return PerfectEstimationCheck(False, "V(i)/i not strictly decreasing", (i, i + 1))
    return PerfectEstimationCheck(True, "ok")


def concave_shortcut(V) -> bool:
    """Sufficient check for a strictly concave ``V``: ``V(1) > V(u)/u`` for all ``u >= 2``."""
    V = np.asarray(V, dtype=float)
    if V.size >= 3 and not np.all(np.diff(V, 2) < 0):
        return False
    u = np.arange(2, V.size + 1)
    return bool(np.all(V[0] > V[1:] / u))


def reflected_change_point(u: int, n: int) -> int:
    """``u* = n - u`` for ``u <= floor(n/2)``, else ``u``."""
    if not 1 <= u <= n - 1:
        raise InvalidArgument(f"u={u} outside 1..{n - 1}")
    return n - u if u <= n // 2 else u


def _fg(x, u, n, gamma):
    """``F = w^2 V^2`` and ``G = w^2 ((x/n)(1-u/n))^2`` for i.i.d. noise."""
    base = (x / n) * (1 - x / n)
    w2 = base ** (-2 * gamma)
    return w2 * base, w2 * ((x / n) * (1 - u / n)) ** 2


def ratio_R(y, x, n: int, gamma: float):
    """``R(y, x) = -(G(y) - G(x)) / (F(y) - F(x))`` with ``G`` built for ``u = y``."""
    Fy, Gy = _fg(np.asarray(y, dtype=float), y, n, gamma)
    Fx, Gx = _fg(np.asarray(x, dtype=float), y, n, gamma)
    return -(Gy - Gx) / (Fy - Fx)


def _check_gamma_open(gamma):
    if gamma == 0.5:
        raise UnsupportedGamma("gamma = 1/2 is not covered by the consistency bound")
    if not 0.0 <= gamma < 0.5:
        raise InvalidArgument(f"gamma must lie in [0, 1/2), got {gamma}")


def consistency_bound(u: int, n: int, gamma: float) -> ConsistencyRegion:
    """``bound = min_{n/2 <= i < u*} R(u*, i)`` by enumeration (``inf`` if empty)."""
    _check_gamma_open(gamma)
    us = reflected_change_point(u, n)
    i = np.arange(math.ceil(n / 2), us)
    bound = float(np.min(ratio_R(us, i, n, gamma))) if i.size else math.inf
    return ConsistencyRegion(u, n, gamma, bound, us, us / n)


def adjacent_ratio(u: int, n: int, gamma: float) -> float:
    """``R(u*, u*-1)``: the ratio at which ``C(u*-1) = C(u*)``."""
    _check_gamma_open(gamma)
    us = reflected_change_point(u, n)
    return float(ratio_R(us, us - 1, n, gamma))


def boundary(gamma: float) -> float:
    """Boundary ``B(gamma)`` for the location fraction.

    For ``gamma < 1/2`` the rational expression in ``sqrt(gamma)`` reduces to
    ``1/2 + 1/(2 (1 + 2 sqrt(gamma)))``; ``B(1/2) = 2^{-1/2}``.
    """
    if not 0.0 <= gamma <= 0.5:
        raise InvalidArgument(f"gamma must lie in [0, 1/2], got {gamma}")
    if gamma == 0.5:
        return 2.0**-0.5
    return 0.5 + 0.5 / (1.0 + 2.0 * math.sqrt(gamma))


def boundary_rational(gamma: float) -> float:
    """The unreduced rational form of ``B``; loses precision near ``gamma = 1/2``."""
    g = math.sqrt(gamma)
    num = 4 * gamma**2 + 6 * g**3 - 3 * g - 1
    den = 8 * gamma**2 + 8 * g**3 - 4 * g - 2 * gamma - 1
    return num / den


def bound_limit(location_fraction: float, gamma: float) -> float:
    """Large-``n`` limit of the consistency bound at ``u*/n -> location_fraction``.

    Valid up to ``boundary(gamma)``; for ``gamma = 1/4`` a second branch covers
    ``(3/4, 1)``.
    """
    z = float(location_fraction)
    if not 0.5 < z < 1.0:
        raise InvalidArgument("location fraction must lie in (1/2, 1)")
    if not 0.0 <= gamma < 0.5:
        raise InvalidArgument(f"gamma must lie in [0, 1/2), got {gamma}")
    if gamma == 0.25 and z > 0.75:
        # With s = sqrt(1 - z) the second branch reads
        #   (z-1)^2 (z(z+1) + (z/2 - 1) s - 1) / (z(z-1) + z s / 2);
        # numerator and denominator share the factor (s - 1/2), which
        # vanishes at z = 3/4. Cancelling it keeps the value accurate there.
        s = math.sqrt(1 - z)
        return s**3 * (1 + s) ** 2 * (2 - s) / z
    if z > boundary(gamma):
        raise OutsideValidity(f"location fraction {z} exceeds B({gamma}) = {boundary(gamma)}")
    b = (gamma - 1) / (2 * gamma - 1)
    return z * (1 - z) * (b - z) / (z - 0.5)


def spurious_argmax(scheme: WeightScheme, V2, n: int) -> tuple[int, ...]:
    """Argmax of ``w(i)^2 V(i)^2``: the limit set when the change vanishes."""
    V2 = _resolve_v2(V2, n)
    return argmax_set(weight_vector(scheme, n) ** 2 * V2, TIE_RTOL)


def theory_report(n: int, gamma: float, model: NoiseModel | None = None) -> str:
    """Plain text summary: perfect-estimation verdict and bound per change point."""
    model = model or NoiseModel.iid()
    V2 = v_squared_vector(model, n)
    check = check_perfect_estimation(np.sqrt(V2), n)
    lines = [
        f"n = {n}, noise = {model.kind.value} (phi={model.phi:g}, theta={model.theta:g})",
        f"exact weights give perfect estimation: {'yes' if check.ok else 'no'}"
        + ("" if check.ok else f" ({check.reason}, witness {check.witness})"),
        f"B({gamma:g}) = {boundary(gamma):.12g}",
        f"consistency bound for weighted({gamma:g}) weights, i.i.d. noise:",
        "u,u_star,s,bound",
    ]
    if gamma < 0.5:
        for u in range(1, n):
            reg = consistency_bound(u, n, gamma)
            lines.append(f"{u},{reg.u_star},{reg.s:.6g},{reg.bound:.12g}")
    return "\n".join(lines) + "\n"
