"""Weighted total variation denoising as a group fused LASSO.

Minimising ``0.5*||Y - U||_F^2 + lam * sum_i ||U[i+1] - U[i]|| / w(i)`` over
``U`` is equivalent to

    minimise 0.5*||Ybar - Dbar beta||_F^2 + lam * sum_i ||beta[i]||_2

with ``D[i, j] = w(j)`` for ``i > j`` (1-based), ``Dbar``/``Ybar`` the column
centred ``D``/``Y`` and ``beta[i] = (U[i+1] - U[i]) / w(i)``. Non-zero rows of
``beta`` are the estimated change points.

The solver is cyclic block coordinate descent over an active set of rows,
with exact group soft-thresholding updates and a Newton polish of the active
row norms. It stops only once the KKT conditions hold to the requested
tolerance.

The problem depends on ``Ybar`` only through ``C = Dbar^T Ybar``, and the
group norms are invariant under rotations of the panel axis, so when
``d > n-1`` the panels are rotated onto the ``n-1`` dimensional row space of
``C`` before solving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguousMaximum, InvalidArgument, SolverFailure, TargetCountUnreachable
from .cusum import TIE_RTOL
from .model import as_panel_array

KKT_TOL = 1e-8
MAX_SWEEPS = 100_000


@dataclass(frozen=True)
class DesignMatrix:
    D: np.ndarray
    Dbar: np.ndarray
    w: np.ndarray

    @property
    def n(self) -> int:
        return self.D.shape[0]


@dataclass(frozen=True)
class CorrelationProfile:
    c: np.ndarray  # Dbar^T Ybar, (n-1) x d
    t: np.ndarray  # row norms
    order: np.ndarray  # 1-based indices sorted by increasing t
    M: int
    m: int | None


@dataclass
class LassoSolution:
    beta: np.ndarray
    lam: float
    U: np.ndarray
    change_set: tuple[int, ...]
    kkt_residual: float
    sweeps: int = 0
    objective_history: list = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class SingleChangeSolution:
    u: int
    interval: tuple[float, float]  # (t_m, t_M)
    admissible: tuple[float, float]  # exact lambda range where E(lambda) = {u}
    lam: float
    beta: np.ndarray


@dataclass
class SegmentResult:
    change_set: tuple[int, ...]
    lam: float
    solution: LassoSolution
    path: list  # (lambda, |E|, kkt_residual)


def _check_w(w, n):
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size != n - 1:
        raise InvalidArgument(f"need n-1={n - 1} weights, got shape {w.shape}")
    if not np.all(w > 0) or not np.all(np.isfinite(w)):
        raise InvalidArgument("weights must be strictly positive and finite")
    return w


def design_matrix(w, n: int) -> DesignMatrix:
    """``D[i, j] = w(j)`` for ``i > j`` and its column-centred version."""
    w = _check_w(w, n)
    i = np.arange(1, n + 1)[:, None]
    j = np.arange(1, n)[None, :]
    D = np.where(i > j, w[None, :], 0.0)
    # centred analytically: column j has mean w_j (n - j) / n
    Dbar = w[None, :] * np.where(i > j, j / n, -(n - j) / n)
    return DesignMatrix(D, Dbar, w)


def gram_matrix(w, n: int) -> np.ndarray:
    """``Dbar^T Dbar`` in closed form: ``w_j w_l min(j,l) (n - max(j,l)) / n``."""
    w = _check_w(w, n)
    j = np.arange(1, n)
    lo = np.minimum.outer(j, j)
    hi = np.maximum.outer(j, j)
    return np.outer(w, w) * lo * (n - hi) / n


def correlations(Y, D: DesignMatrix) -> CorrelationProfile:
    """``c = Dbar^T Ybar`` with row norms and the two largest rows."""
    Y = as_panel_array(Y)
    if Y.shape[0] != D.n:
        raise InvalidArgument(f"Y has {Y.shape[0]} rows but D has {D.n}")
    Ybar = Y - Y.mean(axis=0)
    c = D.Dbar.T @ Ybar
    return _profile(c)


def _profile(c):
    t = np.sqrt(np.sum(c * c, axis=1))
    order = np.argsort(t, kind="stable") + 1
    M = int(order[-1])
    m = int(order[-2]) if order.size > 1 else None
    return CorrelationProfile(c, t, order, M, m)


def kkt_residual(Y, D: DesignMatrix, beta, lam: float) -> float:
    """Largest KKT violation of ``beta`` at ``lam``, scaled by ``1 + lam``.

    Non-zero rows need ``G_i = lam * beta_i / ||beta_i||``; zero rows need
    ``||G_i|| <= lam``, where ``G = Dbar^T (Ybar - Dbar beta)``.
    """
    Y = as_panel_array(Y)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (D.n - 1, Y.shape[1]):
        raise InvalidArgument(f"beta must have shape {(D.n - 1, Y.shape[1])}")
    Ybar = Y - Y.mean(axis=0)
    G = D.Dbar.T @ (Ybar - D.Dbar @ beta)
    return _kkt_from_gradient(G, beta, lam)


def _kkt_from_gradient(G, beta, lam):
    nb = np.sqrt(np.sum(beta * beta, axis=1))
    active = nb > 0
    worst = 0.0
    if np.any(active):
        B = beta[active] / nb[active, None]
        worst = float(np.max(np.sqrt(np.sum((G[active] - lam * B) ** 2, axis=1))))
    if np.any(~active):
        gn = np.sqrt(np.sum(G[~active] ** 2, axis=1))
        worst = max(worst, float(np.max(gn)) - lam, 0.0)
    return worst / (1.0 + lam)


class GroupFusedLasso:
    """Solver for one data set and weight vector, reusable across ``lam``."""

    def __init__(self, Y, w, tol: float = KKT_TOL, max_sweeps: int = MAX_SWEEPS):
        Y = as_panel_array(Y)
        n, d = Y.shape
        if n < 3:
            raise InvalidArgument(f"need n >= 3, got n={n}")
        self.Y = Y
        self.n, self.d = n, d
        self.w = _check_w(w, n)
        self.tol = tol
        self.max_sweeps = int(max_sweeps)
        self.design = design_matrix(self.w, n)
        self.gram = gram_matrix(self.w, n)
        Ybar = Y - Y.mean(axis=0)
        self.Ybar = Ybar
        self.c = self.design.Dbar.T @ Ybar
        self.profile = _profile(self.c)
        p = n - 1
        if d > p:
            Q, R = np.linalg.qr(self.c.T)
            self._Q = Q
            self._c_red = R.T
        else:
            self._Q = None
            self._c_red = self.c
        self._half_sq = 0.5 * float(np.sum(Ybar * Ybar))
        self._warm = None

    @property
    def t_max(self) -> float:
        return float(self.profile.t.max())

    # -- helpers in the reduced space ------------------------------------
    def _objective(self, B, GB):
        return self._half_sq - float(np.sum(self._c_red * B)) + 0.5 * float(np.sum(B * GB)) + \
            self._lam * float(np.sum(np.sqrt(np.sum(B * B, axis=1))))

    def _expand(self, B):
        if self._Q is None:
            return B.copy()
        full = np.zeros((B.shape[0], self.d))
        rows = np.flatnonzero(np.any(B != 0, axis=1))
        full[rows] = B[rows] @ self._Q.T
        return full

    def _fit(self, beta):
        rows = np.flatnonzero(np.any(beta != 0, axis=1))
        Dbeta = self.design.D[:, rows] @ beta[rows]
        offset = (self.Y - Dbeta).mean(axis=0)
        return offset[None, :] + Dbeta

    def _newton(self, A, B):
        """Solve the active-set stationarity system in the row norms."""
        lam = self._lam
        gAA = self.gram[np.ix_(A, A)]
        CA = self._c_red[A]
        nu = np.sqrt(np.sum(B[A] ** 2, axis=1))
        if np.any(nu <= 0):
            return None
        eye = np.eye(len(A))
        for _ in range(100):
            K = gAA + lam * np.diag(1.0 / nu)
            Kinv = np.linalg.inv(K)
            BA = Kinv @ CA
            nb = np.sqrt(np.sum(BA * BA, axis=1))
            F = nb - nu
            if np.max(np.abs(F)) <= 1e-15 * max(1.0, float(nu.max())):
                return BA
            if np.any(nb <= 0):
                return None
            J = Kinv * (lam / nu**2)[None, :] * (BA @ BA.T) / nb[:, None] - eye
            try:
                step = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                return None
            s = 1.0
            while np.any(nu + s * step <= 0):
                s *= 0.5
                if s < 1e-12:
                    return None
            nu = nu + s * step
        K = gAA + lam * np.diag(1.0 / nu)
        BA = np.linalg.solve(K, CA)
        nb = np.sqrt(np.sum(BA * BA, axis=1))
        if np.max(np.abs(nb - nu)) <= 1e-12 * max(1.0, float(nu.max())):
            return BA
        return None

    def solve(self, lam: float, warm_start: bool = True) -> LassoSolution:
        """Solve at ``lam`` to KKT tolerance ``self.tol``."""
        lam = float(lam)
        if not lam >= 0 or not math.isfinite(lam):
            raise InvalidArgument(f"lambda must be finite and nonnegative, got {lam}")
        n, d = self.n, self.d
        p = n - 1
        if lam == 0.0:
            diffs = np.diff(self.Y, axis=0)
            beta = diffs / self.w[:, None]
            G = self.c - self.gram @ beta
            res = _kkt_from_gradient(G, beta, 0.0)
            E = tuple(int(i) + 1 for i in np.flatnonzero(np.any(diffs != 0, axis=1)))
            return LassoSolution(beta, 0.0, self.Y.copy(), E, res)
        if lam >= self.t_max:
            beta = np.zeros((p, d))
            return LassoSolution(beta, lam, self._fit(beta), (), 0.0)

        self._lam = lam
        C = self._c_red
        gram = self.gram
        diag = np.diag(gram)
        B = np.zeros_like(C)
        if warm_start and self._warm is not None:
            B = self._warm.copy()
        active = list(np.flatnonzero(np.any(B != 0, axis=1)))
        if not active:
            active = [int(np.argmax(self.profile.t))]
        GB = gram[:, active] @ B[active]
        history = [self._objective(B, GB)]
        sweeps = 0
        res = math.inf
        scale = 1.0 + lam
        while True:
            # block coordinate descent over the active rows
            for _ in range(50):
                biggest = 0.0
                for i in active:
                    s = C[i] - GB[i] + diag[i] * B[i]
                    ns = math.sqrt(float(s @ s))
                    new = (1.0 - lam / ns) * s / diag[i] if ns > lam else np.zeros_like(s)
                    delta = new - B[i]
                    if np.any(delta):
                        GB += np.outer(gram[:, i], delta)
                        B[i] = new
                        biggest = max(biggest, float(np.max(np.abs(delta))) * diag[i])
                sweeps += 1
                history.append(self._objective(B, GB))
                if biggest <= 1e-3 * self.tol * scale or sweeps >= self.max_sweeps:
                    break
            active = [i for i in active if np.any(B[i])]
            if active:
                BA = self._newton(active, B)
                if BA is not None:
                    trial = B.copy()
                    trial[active] = BA
                    trial_GB = gram[:, active] @ BA
                    obj = self._objective(trial, trial_GB)
                    if obj <= history[-1] + 1e-12 * abs(history[-1]):
                        B, GB = trial, trial_GB
                        history.append(obj)
            G = C - GB
            res = _kkt_from_gradient(G, B, lam)
            if res <= self.tol:
                break
            if sweeps >= self.max_sweeps:
                raise SolverFailure(
                    f"no KKT convergence after {sweeps} sweeps (residual {res:.3e})", res
                )
            gn = np.sqrt(np.sum(G * G, axis=1))
            inactive = np.ones(p, dtype=bool)
            inactive[active] = False
            viol = np.flatnonzero(inactive & ((gn - lam) / scale > self.tol))
            if viol.size:
                active = sorted(set(active) | set(int(v) for v in viol))

        self._warm = B.copy()
        beta = self._expand(B)
        rows = np.flatnonzero(np.any(beta != 0, axis=1))
        G_full = self.c - gram[:, rows] @ beta[rows]
        res_full = _kkt_from_gradient(G_full, beta, lam)
        E = tuple(int(i) + 1 for i in rows)
        return LassoSolution(beta, lam, self._fit(beta), E, res_full, sweeps, history)

    # -- single change ---------------------------------------------------
    def single_change(self) -> SingleChangeSolution:
        t = self.profile.t
        if t.size < 2:
            raise AmbiguousMaximum("need at least two candidate change points")
        M, m = self.profile.M, self.profile.m
        tM, tm = float(t[M - 1]), float(t[m - 1])
        if tm * tm >= tM * tM * (1 - TIE_RTOL):
            raise AmbiguousMaximum(f"maximum not unique (t_M={tM!r}, t_m={tm!r})")
        low = self._admissible_low(M - 1)
        lam = 0.5 * (max(low, tm) + tM) if low < tm else 0.5 * (low + tM)
        beta = prop2_beta(self.c, self.gram, M, lam)
        return SingleChangeSolution(M, (tm, tM), (low, tM), lam, beta)

    def _admissible_low(self, Mi):
        """Smallest ``lam0`` such that the one-row solution is optimal on ``(lam0, t_M)``.

        For each other row ``i`` the zero-row condition
        ``||c_i - k_i (t_M - lam)/t_M c_M|| <= lam`` with ``k_i = gram_iM/gram_MM``
        is a quadratic inequality in ``lam``; it holds at ``lam = t_M``.
        """
        c, gram = self.c, self.gram
        tM = float(self.profile.t[Mi])
        cM = c[Mi]
        k = gram[:, Mi] / gram[Mi, Mi]
        cc = np.sum(c * c, axis=1)
        cdot = c @ cM
        low = 0.0
        for i in range(c.shape[0]):
            if i == Mi:
                continue
            # ||c_i - k x c_M||^2 - lam^2 with x = (t_M - lam)/t_M = 1 - lam/t_M
            # q(lam) = a lam^2 + b lam + e
            ki = k[i]
            # ||c_i - ki c_M + ki lam/t_M c_M||^2 - lam^2
            v0 = cc[i] - 2 * ki * cdot[i] + ki * ki * tM * tM
            v1 = 2 * ki / tM * (cdot[i] - ki * tM * tM)
            v2 = ki * ki - 1.0
            roots = np.roots([v2, v1, v0]) if abs(v2) > 0 else (
                np.array([-v0 / v1]) if v1 != 0 else np.array([]))
            real = [float(r.real) for r in np.atleast_1d(roots) if abs(r.imag) <= 1e-12 * tM]
            below = [r for r in real if r < tM * (1 - 1e-14)]
            if below:
                low = max(low, max(below))
        return max(low, 0.0)

    # -- multiple changes ------------------------------------------------
    def segment(self, k_target: int, rel_width: float = 1e-6, max_bisections: int = 60,
                grid_size: int = 200) -> SegmentResult:
        """Largest ``lam`` whose change set has exactly ``k_target`` elements."""
        p = self.n - 1
        if not 1 <= k_target <= p:
            raise InvalidArgument(f"k_target must lie in 1..{p}")
        path = []
        best = None

        def run(lam):
            nonlocal best
            sol = self.solve(lam)
            count = len(sol.change_set)
            path.append((lam, count, sol.kkt_residual))
            if count == k_target and (best is None or lam > best.lam):
                best = sol
            return count

        lo, hi = 0.0, self.t_max
        if hi <= 0:
            raise TargetCountUnreachable("all rows of Y are equal", path)
        for _ in range(max_bisections):
            mid = 0.5 * (lo + hi)
            if run(mid) >= k_target:
                lo = mid
            else:
                hi = mid
            if hi - lo <= rel_width * hi:
                break
        if best is None:
            self._warm = None
            for lam in np.geomspace(self.t_max, self.t_max * 1e-6, grid_size):
                run(float(lam))
        if best is None:
            raise TargetCountUnreachable(
                f"no lambda gives {k_target} change points", path
            )
        return SegmentResult(best.change_set, best.lam, best, path)


def prop2_beta(c, gram, M: int, lam: float) -> np.ndarray:
    """One-row closed-form candidate ``beta_M = alpha c_M`` (1-based ``M``)."""
    Mi = M - 1
    tM = float(np.linalg.norm(c[Mi]))
    beta = np.zeros_like(c)
    beta[Mi] = (tM - lam) / (gram[Mi, Mi] * tM) * c[Mi]
    return beta


def solve(Y, w, lam: float, tol: float = KKT_TOL, max_sweeps: int = MAX_SWEEPS) -> LassoSolution:
    """Solve the weighted total variation problem at ``lam``."""
    return GroupFusedLasso(Y, w, tol, max_sweeps).solve(lam, warm_start=False)


def single_change_solution(Y, w) -> SingleChangeSolution:
    """Single change point and its lambda interval from the closed form."""
    return GroupFusedLasso(Y, w).single_change()


def segment(Y, w, k_target: int) -> SegmentResult:
    """Search lambda for a change set of exactly ``k_target`` points."""
    return GroupFusedLasso(Y, w).segment(k_target)


def write_matrix_csv(path, X) -> None:
    np.savetxt(path, np.asarray(X), delimiter=",", fmt="%.17g")


def write_change_set(path, change_set) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(str(u) for u in change_set) + "\n")


def write_path_csv(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write("lambda,n_changes,kkt_residual\n")
        for lam, count, res in rows:
            fh.write(f"{lam!r},{count},{res!r}\n")
