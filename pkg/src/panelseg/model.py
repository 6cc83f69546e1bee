"""Panel data model: mean structures, noise models and a seeded simulator.

Observations follow ``Y[i, k] = m[i, k] + eps[i, k] + gamma_k * zeta_i`` with
a piecewise constant mean ``m`` whose changes are common to all panels.
Rows index time (``i = 1..n``), columns index panels (``k = 1..d``).
All change point indices in this package are 1-based, matching the usual
convention that a change at ``u`` means rows ``1..u`` and ``u+1..n`` differ.
"""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, InvalidSpec

# Panels are simulated in fixed-size blocks, each block drawn from its own
# Philox substream. Panel k always lands in the same block row, so increasing
# d never changes earlier panels.
PANEL_BLOCK = 512

_STREAM_INNOVATIONS = 0
_STREAM_FACTORS = 1
_STREAM_OFFSETS = 2


@dataclass(frozen=True)
class PanelMatrix:
    """An ``n x d`` observation matrix (rows are time points, columns panels)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise InvalidSpec("panel matrix must be two-dimensional")
        if values.shape[0] < 3:
            raise InvalidSpec(f"need n >= 3 time points, got n={values.shape[0]}")
        if values.shape[1] < 1:
            raise InvalidSpec("need at least one panel")
        if not np.all(np.isfinite(values)):
            raise InvalidSpec("panel matrix contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def as_panel_array(Y) -> np.ndarray:
    """Return the raw ``n x d`` float array behind ``Y``."""
    if isinstance(Y, PanelMatrix):
        return Y.values
    arr = np.asarray(Y, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InvalidArgument("expected an n x d matrix")
    return arr


@dataclass(frozen=True)
class SignalSpec:
    """Piecewise constant common-change mean structure.

    Parameters
    ----------
    n : int
        Time length.
    change_points : sequence of int
        Strictly increasing change points in ``1..n-1``.
    levels : array_like
        ``(P+1, d)`` matrix of segment levels, or a length ``P+1`` vector of
        levels shared by all panels.
    """

    n: int
    change_points: tuple[int, ...]
    levels: np.ndarray

    def __post_init__(self):
        cps = tuple(int(u) for u in self.change_points)
        object.__setattr__(self, "change_points", cps)
        levels = np.array(self.levels, dtype=float, copy=True)
        if levels.ndim == 0:
            levels = levels.reshape(1)
        object.__setattr__(self, "levels", levels)
        if self.n < 3:
            raise InvalidSpec(f"need n >= 3, got {self.n}")
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise InvalidSpec("change points must be strictly increasing")
        if cps and (cps[0] < 1 or cps[-1] > self.n - 1):
            raise InvalidSpec("change points must lie in 1..n-1")
        if levels.ndim > 2 or levels.shape[0] != len(cps) + 1:
            raise InvalidSpec(
                f"levels must have P+1={len(cps) + 1} rows, got shape {levels.shape}"
            )
        if not np.all(np.isfinite(levels)):
            raise InvalidSpec("levels must be finite")

    @classmethod
    def single_change(cls, n, u, before=0.0, after=1.0):
        return cls(n, (u,), np.array([before, after]))

    @classmethod
    def epidemic(cls, n, u1, u2, jump=1.0):
        return cls(n, (u1, u2), np.array([0.0, jump, 0.0]))

    @classmethod
    def constant(cls, n, level=0.0):
        return cls(n, (), np.array([level]))

    @property
    def n_changes(self) -> int:
        return len(self.change_points)

    def level_matrix(self, d: int) -> np.ndarray:
        if self.levels.ndim == 1:
            return np.repeat(self.levels[:, None], d, axis=1)
        if self.levels.shape[1] != d:
            raise InvalidSpec(
                f"levels have {self.levels.shape[1]} columns but d={d}"
            )
        return self.levels


class NoiseKind(str, Enum):
    IID = "iid"
    MA1 = "ma1"


@dataclass(frozen=True)
class NoiseModel:
    """I.i.d. Gaussian noise or MA(1) noise in time and across panels.

    The MA(1) noise is
    ``eps[i,k] = (eta[i,k] + phi*eta[i-1,k]) + theta*(eta[i,k-1] + phi*eta[i-1,k-1])``
    with i.i.d. centred innovations of variance ``sigma2_tilde``. The IID kind
    ignores ``phi`` and ``theta``.
    """

    kind: NoiseKind = NoiseKind.IID
    phi: float = 0.0
    theta: float = 0.0
    sigma2_tilde: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not self.sigma2_tilde > 0 or not math.isfinite(self.sigma2_tilde):
            raise InvalidSpec("sigma2_tilde must be positive and finite")
        if not (math.isfinite(self.phi) and math.isfinite(self.theta)):
            raise InvalidSpec("phi and theta must be finite")

    @classmethod
    def iid(cls, sigma2=1.0):
        return cls(NoiseKind.IID, 0.0, 0.0, sigma2)

    @classmethod
    def ma1(cls, phi, theta=0.0, sigma2_tilde=1.0):
        return cls(NoiseKind.MA1, phi, theta, sigma2_tilde)

    @property
    def sigma2(self) -> float:
        """Marginal noise variance of a single observation."""
        if self.kind is NoiseKind.IID:
            return self.sigma2_tilde
        p2, t2 = self.phi**2, self.theta**2
        return self.sigma2_tilde * (1 + p2 + t2 + p2 * t2)


@dataclass(frozen=True)
class CommonFactorSpec:
    """Loadings for the common factor term ``gamma_k * zeta_i``.

    ``rule`` is ``"harmonic"`` (``gamma_k = k**-0.5``), ``"none"`` or
    ``"explicit"`` (then ``loadings`` holds the vector).
    """

    rule: str = "harmonic"
    loadings: tuple[float, ...] = ()

    def __post_init__(self):
        if self.rule not in ("harmonic", "none", "explicit"):
            raise InvalidSpec(f"unknown loading rule {self.rule!r}")
        loadings = tuple(float(g) for g in self.loadings)
        if not all(math.isfinite(g) for g in loadings):
            raise InvalidSpec("loadings must be finite")
        object.__setattr__(self, "loadings", loadings)

    @classmethod
    def disabled(cls):
        return cls("none")

    @property
    def enabled(self) -> bool:
        return self.rule != "none"

    def gammas(self, d: int) -> np.ndarray:
        if self.rule == "none":
            return np.zeros(d)
        if self.rule == "harmonic":
            return np.arange(1, d + 1, dtype=float) ** -0.5
        if len(self.loadings) != d:
            raise InvalidSpec(f"{len(self.loadings)} explicit loadings for d={d}")
        return np.array(self.loadings)


@dataclass(frozen=True)
class ChangeLocationNoise:
    """Per-panel random shift ``U_k`` of the change locations."""

    enabled: bool = False
    offsets: tuple[int, ...] = (-2, 2)
    probabilities: tuple[float, ...] = (0.5, 0.5)

    def __post_init__(self):
        offsets = tuple(int(o) for o in self.offsets)
        probs = tuple(float(p) for p in self.probabilities)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "probabilities", probs)
        if len(offsets) != len(probs) or not offsets:
            raise InvalidSpec("offsets and probabilities must have equal nonzero length")
        if any(p < 0 for p in probs) or not math.isclose(sum(probs), 1.0, abs_tol=1e-12):
            raise InvalidSpec("offset probabilities must be nonnegative and sum to 1")

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(o for o, p in zip(self.offsets, self.probabilities) if p > 0)


def mean_matrix(spec: SignalSpec, d: int) -> np.ndarray:
    """Expand a :class:`SignalSpec` into its ``n x d`` mean matrix."""
    levels = spec.level_matrix(d)
    seg = np.searchsorted(np.asarray(spec.change_points), np.arange(1, spec.n + 1), side="left")
    return levels[seg].copy()


def delta_average(M, u: int) -> float:
    """Average squared jump ``(1/d) sum_k (M[u+1,k] - M[u,k])**2`` at ``u``."""
    M = as_panel_array(M)
    n = M.shape[0]
    if not 1 <= u <= n - 1:
        raise InvalidArgument(f"u={u} outside 1..{n - 1}")
    jump = M[u] - M[u - 1]
    return float(np.mean(jump**2))


def _substream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def _blocked_normals(seed, n_rows, first_col, n_cols):
    """Standard normals for panel columns ``first_col .. first_col+n_cols-1``.

    Each column is a pure function of (seed, column index).
    """
    out = np.empty((n_rows, n_cols))
    col = first_col
    end = first_col + n_cols
    while col < end:
        block = col // PANEL_BLOCK
        lo = block * PANEL_BLOCK
        hi = min(lo + PANEL_BLOCK, end)
        draws = _substream(seed, _STREAM_INNOVATIONS, block).standard_normal((PANEL_BLOCK, n_rows))
        out[:, col - first_col : hi - first_col] = draws[col - lo : hi - lo].T
        col = hi
    return out


def _blocked_offsets(seed, loc: ChangeLocationNoise, d):
    out = np.empty(d, dtype=int)
    values = np.asarray(loc.offsets)
    probs = np.asarray(loc.probabilities)
    for block in range((d + PANEL_BLOCK - 1) // PANEL_BLOCK):
        lo = block * PANEL_BLOCK
        hi = min(lo + PANEL_BLOCK, d)
        rng = _substream(seed, _STREAM_OFFSETS, block)
        out[lo:hi] = rng.choice(values, size=PANEL_BLOCK, p=probs)[: hi - lo]
    return out


def noise_matrix(noise: NoiseModel, n: int, d: int, seed: int) -> np.ndarray:
    """Simulate the ``n x d`` noise array ``eps`` for the given model."""
    # eta has a burn-in row (eta_{0,k}) and a burn-in column (eta_{i,0})
    eta = _blocked_normals(seed, n + 1, 0, d + 1) * math.sqrt(noise.sigma2_tilde)
    if noise.kind is NoiseKind.IID:
        return eta[1:, 1:].copy()
    phi, theta = noise.phi, noise.theta
    time_ma = eta[1:, :] + phi * eta[:-1, :]
    return time_ma[:, 1:] + theta * time_ma[:, :-1]


def generate_panel(
    signal: SignalSpec,
    noise: NoiseModel,
    factors: CommonFactorSpec | None = None,
    loc_noise: ChangeLocationNoise | None = None,
    d: int = 1,
    seed: int = 0,
) -> PanelMatrix:
    """Simulate one panel data set ``Y = M + eps + gamma_k * zeta_i``.

    Common factors are i.i.d. uniform on ``[-sqrt(3 s2), sqrt(3 s2)]`` with
    ``s2 = noise.sigma2_tilde``, i.e. centred with the innovation variance.
    With ``loc_noise`` enabled each panel gets its own offset ``U_k`` added to
    every change point.
    """
    factors = factors or CommonFactorSpec.disabled()
    loc_noise = loc_noise or ChangeLocationNoise()
    if d < 1:
        raise InvalidSpec("d must be >= 1")
    n = signal.n
    levels = signal.level_matrix(d)

    if loc_noise.enabled and signal.change_points:
        cps = np.asarray(signal.change_points)
        for off in loc_noise.support:
            shifted = cps + off
            if shifted[0] < 1 or shifted[-1] > n - 1:
                raise InvalidSpec(
                    f"change points {tuple(cps)} shifted by {off} leave 1..{n - 1}"
                )
        offsets = _blocked_offsets(seed, loc_noise, d)
        times = np.arange(1, n + 1)[:, None]
        # segment index of row i in panel k: number of shifted change points < i
        seg = ((cps[None, None, :] + offsets[None, :, None]) < times[:, :, None]).sum(axis=2)
        M = np.take_along_axis(levels, seg, axis=0)
    else:
        M = mean_matrix(signal, d)

    Y = M + noise_matrix(noise, n, d, seed)

    if factors.enabled:
        half_width = math.sqrt(3.0 * noise.sigma2_tilde)
        zeta = _substream(seed, _STREAM_FACTORS).uniform(-half_width, half_width, size=n)
        Y += zeta[:, None] * factors.gammas(d)[None, :]
    return PanelMatrix(Y)


# ----------------------------------------------------------------------------
# Files

def read_panel_csv(path) -> PanelMatrix:
    """Read a panel CSV (one row per time point, optional single header row)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise InvalidSpec(f"{path}: empty panel file")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        values = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise InvalidSpec(f"{path}: non-numeric entry ({exc})") from None
    if values.ndim != 2:
        raise InvalidSpec(f"{path}: ragged rows")
    return PanelMatrix(values)


def write_panel_csv(path, Y, header: bool = False) -> None:
    Y = as_panel_array(Y)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow([f"panel{k + 1}" for k in range(Y.shape[1])])
        for row in Y:
            writer.writerow([repr(float(v)) for v in row])


def _parse_scalar(text):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_value(text: str):
    """Parse a spec value: scalar, comma list, or ``;``-separated rows of lists."""
    text = text.strip()
    if ";" in text:
        return [[_parse_scalar(c) for c in row.split(",") if c.strip()] for row in text.split(";")]
    if "," in text:
        return [_parse_scalar(c) for c in text.split(",") if c.strip()]
    return _parse_scalar(text)


def read_key_values(path_or_text, *, is_text=False) -> dict:
    """Read a flat ``key = value`` file (``#`` comments allowed)."""
    text = path_or_text if is_text else Path(path_or_text).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string("[root]\n" + text)
    except configparser.Error as exc:
        raise InvalidSpec(f"malformed key-value file: {exc}") from None
    return {k: parse_value(v) for k, v in parser["root"].items()}


def _as_list(value):
    if value == "" or value is None:
        return []
    return value if isinstance(value, list) else [value]


@dataclass
class SimulationSpec:
    """Everything :func:`generate_panel` needs, as read from a spec file."""

    signal: SignalSpec
    noise: NoiseModel
    factors: CommonFactorSpec = field(default_factory=CommonFactorSpec.disabled)
    loc_noise: ChangeLocationNoise = field(default_factory=ChangeLocationNoise)
    d: int = 1
    seed: int = 0

    def generate(self) -> PanelMatrix:
        return generate_panel(self.signal, self.noise, self.factors, self.loc_noise, self.d, self.seed)


SPEC_KEYS = {
    "n", "d", "change_points", "levels", "noise", "phi", "theta",
    "sigma2_tilde", "factors", "seed", "offsets", "offset_probs",
}


def simulation_spec_from_mapping(values: dict) -> SimulationSpec:
    """Build a :class:`SimulationSpec` from parsed key-value pairs.

    Keys: ``n``, ``d``, ``change_points`` (comma list), ``levels`` (comma list
    of segment levels, or ``;``-separated rows of a ``(P+1) x d`` matrix),
    ``noise`` (``iid``/``ma1``, default ``ma1`` if ``phi`` or ``theta`` given),
    ``phi``, ``theta``, ``sigma2_tilde``, ``factors`` (``harmonic``, ``none``
    or a comma list of loadings), ``seed``, ``offsets``, ``offset_probs``.
    """
    unknown = set(values) - SPEC_KEYS
    if unknown:
        raise InvalidSpec(f"unknown spec keys: {sorted(unknown)}")
    try:
        n = int(values["n"])
        d = int(values.get("d", 1))
        cps = [int(u) for u in _as_list(values.get("change_points", []))]
        levels = values.get("levels")
        if levels is None:
            levels = [float(j % 2) for j in range(len(cps) + 1)]
        levels = np.array(_as_list(levels), dtype=float)
        if levels.ndim == 2 and levels.shape[0] != len(cps) + 1 and levels.shape[1] == len(cps) + 1:
            levels = levels.T
        phi = float(values.get("phi", 0.0))
        theta = float(values.get("theta", 0.0))
        kind = values.get("noise", "ma1" if ("phi" in values or "theta" in values) else "iid")
        noise = NoiseModel(NoiseKind(str(kind).lower()), phi, theta, float(values.get("sigma2_tilde", 1.0)))
        fac = values.get("factors", "none")
        if isinstance(fac, str):
            factors = CommonFactorSpec(fac.lower())
        else:
            factors = CommonFactorSpec("explicit", tuple(_as_list(fac)))
        offsets = _as_list(values.get("offsets", []))
        if offsets:
            probs = _as_list(values.get("offset_probs", [1.0 / len(offsets)] * len(offsets)))
            loc = ChangeLocationNoise(True, tuple(offsets), tuple(probs))
        else:
            loc = ChangeLocationNoise()
        seed = int(values.get("seed", 0))
    except KeyError as exc:
        raise InvalidSpec(f"missing spec key {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidSpec):
            raise
        raise InvalidSpec(str(exc)) from None
    return SimulationSpec(SignalSpec(n, tuple(cps), levels), noise, factors, loc, d, seed)


def read_simulation_spec(path) -> SimulationSpec:
    return simulation_spec_from_mapping(read_key_values(path))


def write_vector_csv(path, values: Sequence[float]) -> None:
    """Write a single-column CSV (one value per line)."""
    with open(path, "w", newline="") as fh:
        for v in values:
            fh.write(f"{float(v)!r}\n")


def read_vector_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and r[0].strip()]
    try:
        return np.array([float(r[-1]) for r in rows])
    except ValueError:
        try:
            return np.array([float(r[-1]) for r in rows[1:]])
        except ValueError as exc:
            raise InvalidSpec(f"{path}: non-numeric entry ({exc})") from None
