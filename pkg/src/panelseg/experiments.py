"""Monte Carlo harness comparing weighting schemes on simulated panels.

Every grid point runs ``repetitions`` independent data sets; all schemes at a
grid point see the same realisations (paired design). Repetition seeds are
derived from ``(seed, grid index, repetition index)`` only, so results do not
depend on the number of worker processes or on the order of the grid.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cusum import squared_cumsum_norms, profile_from_norms
from .errors import InvalidConfig, PanelSegError, ReportIOError
from .estimation import banded_covariance, convex_regression, estimated_exact_weights, natural_covariance
from .gflasso import GroupFusedLasso
from .model import ChangeLocationNoise, CommonFactorSpec, NoiseModel, SignalSpec, generate_panel, read_key_values
from .theory import spurious_argmax
from .weights import WeightScheme, v_squared_vector

SCENARIOS = ("SingleChange", "RandomLocation", "Epidemic", "VanishingChange")
ESTIMATED = ("exact-est", "exact-banded", "exact-banded-centered", "exact-reg")
FIXED = ("simple", "standard", "exact")

SUMMARY_FIELDS = (
    "grid_index", "scheme", "scenario", "change_points", "d", "phi", "theta",
    "sigma2_tilde", "factors", "repetitions", "accuracy", "accuracy_se", "mean",
    "std", "mode", "fallback_rate", "failures",
)


def _check_scheme_name(name: str) -> str:
    if name in FIXED or name in ESTIMATED:
        return name
    if name.startswith("weighted:"):
        try:
            gamma = float(name.split(":", 1)[1])
        except ValueError:
            raise InvalidConfig(f"bad gamma in scheme {name!r}") from None
        if not 0.0 <= gamma <= 0.5:
            raise InvalidConfig(f"gamma must lie in [0, 1/2] in scheme {name!r}")
        return name
    raise InvalidConfig(f"unknown scheme {name!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo study.

    The grid is the Cartesian product of ``change_points``, ``phi``,
    ``theta``, ``sigma2_tilde``, ``factors`` and ``d`` (``d`` varies fastest).
    Each ``change_points`` entry is the full tuple of change points of one
    design; ``VanishingChange`` ignores it and uses a constant mean.

    ``phi == theta == 0`` gives i.i.d. noise with variance ``sigma2_tilde``.
    ``accuracy_mode="support"`` scores ``u_hat in u + support(U)`` and is
    only valid with ``RandomLocation``.
    """

    scenario: str = "SingleChange"
    n: int = 100
    change_points: tuple[tuple[int, ...], ...] = ((70,),)
    d: tuple[int, ...] = (1000,)
    phi: tuple[float, ...] = (0.0,)
    theta: tuple[float, ...] = (0.0,)
    sigma2_tilde: tuple[float, ...] = (1.0,)
    factors: tuple[str, ...] = ("none",)
    jump: float = 1.0
    schemes: tuple[str, ...] = ("standard", "exact")
    repetitions: int = 100
    seed: int = 0
    accuracy_mode: str = "exact"
    offsets: tuple[int, ...] = (-2, 2)
    offset_probs: tuple[float, ...] = (0.5, 0.5)
    n1: int = 1
    n2: int = 20
    h: int = 2
    orientation: str = "convex"
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InvalidConfig(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.repetitions < 1:
            raise InvalidConfig("repetitions must be >= 1")
        if self.workers < 1:
            raise InvalidConfig("workers must be >= 1")
        if self.n < 3:
            raise InvalidConfig("n must be >= 3")
        grids = {
            "change_points": self.change_points, "d": self.d, "phi": self.phi,
            "theta": self.theta, "sigma2_tilde": self.sigma2_tilde,
            "factors": self.factors, "schemes": self.schemes,
        }
        for name, values in grids.items():
            if len(values) == 0:
                raise InvalidConfig(f"grid {name!r} is empty")
        if self.accuracy_mode not in ("exact", "support"):
            raise InvalidConfig(f"accuracy_mode must be 'exact' or 'support', got {self.accuracy_mode!r}")
        if self.accuracy_mode == "support" and self.scenario != "RandomLocation":
            raise InvalidConfig("support accuracy is only defined for RandomLocation")
        if any(d < 2 for d in self.d):
            raise InvalidConfig("every d must be >= 2")
        if any(s <= 0 for s in self.sigma2_tilde):
            raise InvalidConfig("sigma2_tilde must be positive")
        for rule in self.factors:
            if rule not in ("none", "harmonic"):
                raise InvalidConfig(f"factor rule must be 'none' or 'harmonic', got {rule!r}")
        for cps in self.change_points:
            if self.scenario == "VanishingChange":
                continue
            want = 2 if self.scenario == "Epidemic" else 1
            if len(cps) != want:
                raise InvalidConfig(f"{self.scenario} needs {want} change point(s), got {cps}")
            if not all(1 <= u <= self.n - 1 for u in cps) or list(cps) != sorted(set(cps)):
                raise InvalidConfig(f"change points {cps} must be increasing in 1..{self.n - 1}")
        for name in self.schemes:
            _check_scheme_name(name)
        if self.orientation not in ("convex", "concave"):
            raise InvalidConfig("orientation must be 'convex' or 'concave'")
        if self.scenario == "RandomLocation":
            try:
                loc = ChangeLocationNoise(True, self.offsets, self.offset_probs)
            except PanelSegError as exc:
                raise InvalidConfig(str(exc)) from None
            for (u,) in self.change_points:
                if u + min(loc.support) < 1 or u + max(loc.support) > self.n - 1:
                    raise InvalidConfig(f"u={u} shifted by the offsets leaves 1..{self.n - 1}")

    def grid(self) -> list[dict]:
        """Grid points in canonical order, ``d`` varying fastest."""
        points = itertools.product(
            self.change_points, self.phi, self.theta, self.sigma2_tilde, self.factors, self.d
        )
        return [
            dict(change_points=tuple(cps), phi=float(phi), theta=float(theta),
                 sigma2_tilde=float(s2), factors=fac, d=int(d))
            for cps, phi, theta, s2, fac, d in points
        ]


@dataclass(frozen=True)
class SummaryRow:
    grid_index: int
    scheme: str
    scenario: str
    change_points: tuple[int, ...]
    d: int
    phi: float
    theta: float
    sigma2_tilde: float
    factors: str
    repetitions: int
    accuracy: float
    accuracy_se: float
    mean: float
    std: float
    mode: int | None
    fallback_rate: float
    failures: int
    estimates: tuple = field(repr=False, default=())

    def csv_values(self) -> list[str]:
        out = []
        for name in SUMMARY_FIELDS:
            v = getattr(self, name)
            if name == "change_points":
                v = " ".join(str(u) for u in v)
            elif isinstance(v, float):
                v = repr(v)
            elif v is None:
                v = ""
            out.append(str(v))
        return out


@dataclass
class SummaryTable:
    config: ExperimentConfig
    rows: list[SummaryRow]
    seeds: dict[int, list[int]]

    def row(self, scheme: str, grid_index: int = 0) -> SummaryRow:
        for r in self.rows:
            if r.scheme == scheme and r.grid_index == grid_index:
                return r
        raise KeyError((scheme, grid_index))

    def to_csv_text(self) -> str:
        lines = [",".join(SUMMARY_FIELDS)]
        lines += [",".join(r.csv_values()) for r in self.rows]
        return "\n".join(lines) + "\n"


def repetition_seed(master: int, grid_index: int, rep: int) -> int:
    ss = np.random.SeedSequence([master, grid_index, rep])
    return int(ss.generate_state(1, np.uint64)[0])


def _noise(point) -> NoiseModel:
    if point["phi"] == 0.0 and point["theta"] == 0.0:
        return NoiseModel.iid(point["sigma2_tilde"])
    return NoiseModel.ma1(point["phi"], point["theta"], point["sigma2_tilde"])


def _signal(config, point) -> SignalSpec:
    n = config.n
    if config.scenario == "VanishingChange":
        return SignalSpec.constant(n)
    cps = point["change_points"]
    if config.scenario == "Epidemic":
        return SignalSpec.epidemic(n, cps[0], cps[1], config.jump)
    return SignalSpec.single_change(n, cps[0], 0.0, config.jump)


def _weights(name, Y, model, config):
    """Weights and a fallback flag for one scheme on one data set."""
    n = config.n
    if name == "simple":
        return WeightScheme.simple().vector(n), False
    if name == "standard":
        return WeightScheme.standard().vector(n), False
    if name == "exact":
        return WeightScheme.exact_for(model, n).vector(n), False
    if name.startswith("weighted:"):
        return WeightScheme.weighted(float(name.split(":", 1)[1])).vector(n), False
    if name in ("exact-est", "exact-reg"):
        est = estimated_exact_weights(natural_covariance(Y))
        if name == "exact-reg":
            reg = convex_regression(est.weights, config.orientation)
            return reg.weights, est.fallback_used or reg.fallback_used
        return est.weights, est.fallback_used
    centered = name == "exact-banded-centered"
    est = estimated_exact_weights(banded_covariance(Y, config.n1, config.n2, config.h, centered))
    return est.weights, est.fallback_used


def _predicted_set(config, point, name, model):
    """Estimates counted as correct for one scheme at one grid point."""
    n = config.n
    if config.scenario == "VanishingChange":
        if name in FIXED or name.startswith("weighted:"):
            w = _weights(name, None, model, config)[0]
        else:
            # estimated exact weights converge to the exact ones
            w = WeightScheme.exact_for(model, n).vector(n)
        return set(spurious_argmax(WeightScheme.exact(1.0 / w), v_squared_vector(model, n), n))
    (u, *_) = point["change_points"]
    if config.accuracy_mode == "support":
        return {u + s for s in ChangeLocationNoise(True, config.offsets, config.offset_probs).support}
    return {u}


def _one_repetition(args):
    """Estimates for every scheme on one simulated data set.

    Returns ``(estimates, fallbacks)`` keyed by scheme; an estimate of
    ``None`` records an estimator error for that scheme.
    """
    config, point, seed = args
    model = _noise(point)
    factors = CommonFactorSpec(point["factors"])
    loc = (ChangeLocationNoise(True, config.offsets, config.offset_probs)
           if config.scenario == "RandomLocation" else None)
    Y = generate_panel(_signal(config, point), model, factors, loc, point["d"], seed).values
    q = squared_cumsum_norms(Y) if config.scenario != "Epidemic" else None
    estimates, fallbacks = {}, {}
    k = len(point["change_points"])
    for name in config.schemes:
        try:
            w, fb = _weights(name, Y, model, config)
            fallbacks[name] = fb
            if config.scenario == "Epidemic":
                estimates[name] = GroupFusedLasso(Y, w).segment(k).change_set
            else:
                estimates[name] = profile_from_norms(q, w).estimate
        except PanelSegError:
            estimates[name] = None
            fallbacks.setdefault(name, False)
    return estimates, fallbacks


def _summarise(config, gi, point, name, results, model) -> SummaryRow:
    ests = [r[0][name] for r in results]
    fbs = [r[1][name] for r in results]
    ok = [e for e in ests if e is not None]
    reps = len(ests)
    if config.scenario == "Epidemic":
        target = tuple(point["change_points"])
        hits = sum(1 for e in ok if tuple(e) == target)
        mean = std = math.nan
        mode = None
    else:
        good = _predicted_set(config, point, name, model)
        hits = sum(1 for e in ok if e in good)
        arr = np.array(ok, dtype=float)
        mean = float(arr.mean()) if arr.size else math.nan
        std = float(arr.std(ddof=1)) if arr.size > 1 else math.nan
        if arr.size:
            vals, counts = np.unique(arr.astype(int), return_counts=True)
            mode = int(vals[np.argmax(counts)])
        else:
            mode = None
    acc = hits / reps
    se = math.sqrt(acc * (1 - acc) / reps)
    return SummaryRow(
        gi, name, config.scenario, tuple(point["change_points"]), point["d"], point["phi"],
        point["theta"], point["sigma2_tilde"], point["factors"], reps, acc, se, mean, std,
        mode, sum(fbs) / reps, reps - len(ok), tuple(ests),
    )


def run_monte_carlo(config: ExperimentConfig) -> SummaryTable:
    """Run every grid point and scheme; returns one row per (grid point, scheme)."""
    if not isinstance(config, ExperimentConfig):
        raise InvalidConfig("expected an ExperimentConfig")
    rows, seeds = [], {}
    pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for gi, point in enumerate(config.grid()):
            rep_seeds = [repetition_seed(config.seed, gi, r) for r in range(config.repetitions)]
            seeds[gi] = rep_seeds
            jobs = [(config, point, s) for s in rep_seeds]
            # map preserves input order, so the reduction order is fixed
            results = list(pool.map(_one_repetition, jobs)) if pool else [_one_repetition(j) for j in jobs]
            model = _noise(point)
            rows += [_summarise(config, gi, point, name, results, model) for name in config.schemes]
    finally:
        if pool is not None:
            pool.shutdown()
    return SummaryTable(config, rows, seeds)


# ----------------------------------------------------------------------------
# Config files

_TUPLE_KEYS = {"d": int, "phi": float, "theta": float, "sigma2_tilde": float, "factors": str,
               "schemes": str, "offsets": int, "offset_probs": float}
_SCALAR_KEYS = {"scenario": str, "n": int, "jump": float, "repetitions": int, "seed": int,
                "accuracy_mode": str, "n1": int, "n2": int, "h": int, "orientation": str,
                "workers": int}


def _listify(v):
    return v if isinstance(v, list) else [v]


def config_from_mapping(values: dict) -> ExperimentConfig:
    """Build a config from parsed ``key = value`` pairs.

    ``change_points`` lists the grid of single change points for the
    single-change scenarios (``55, 90``); for ``Epidemic`` a comma list is
    one design and ``;`` separates designs (``55, 80; 30, 60``).
    """
    known = set(_TUPLE_KEYS) | set(_SCALAR_KEYS) | {"change_points"}
    unknown = set(values) - known
    if unknown:
        raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    try:
        for key, cast in _SCALAR_KEYS.items():
            if key in values:
                kwargs[key] = cast(values[key])
        for key, cast in _TUPLE_KEYS.items():
            if key in values:
                kwargs[key] = tuple(cast(v) for v in _listify(values[key]) if v != "")
        if "change_points" in values:
            raw = _listify(values["change_points"])
            if any(isinstance(v, list) for v in raw):
                cps = tuple(tuple(int(u) for u in _listify(v)) for v in raw)
            elif kwargs.get("scenario") == "Epidemic":
                cps = (tuple(int(u) for u in raw),)
            else:
                cps = tuple((int(u),) for u in raw)
            kwargs["change_points"] = cps
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"bad config value: {exc}") from None
    return ExperimentConfig(**kwargs)


def read_config(path) -> ExperimentConfig:
    try:
        values = read_key_values(path)
    except PanelSegError as exc:
        raise InvalidConfig(str(exc)) from None
    except OSError as exc:
        raise ReportIOError(f"cannot read config {path}: {exc}") from None
    return config_from_mapping(values)


# ----------------------------------------------------------------------------
# Reports

def _manifest(table: SummaryTable) -> dict:
    from . import __version__

    return {
        "package": "panelseg",
        "version": __version__,
        "config": asdict(table.config),
        "seed_rule": "SeedSequence([seed, grid_index, repetition]).generate_state(1, uint64)",
        "paired_design": True,
        "grid": table.config.grid(),
        "seeds": {str(k): v for k, v in table.seeds.items()},
    }


def _chart_groups(table):
    """Rows grouped by every grid coordinate except ``d``."""
    groups = {}
    for r in table.rows:
        key = (r.change_points, r.phi, r.theta, r.sigma2_tilde, r.factors)
        groups.setdefault(key, []).append(r)
    return groups


def _write_charts(table, out: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    with matplotlib.rc_context({"svg.hashsalt": "panelseg", "svg.fonttype": "none"}):
        for gno, (key, rows) in enumerate(_chart_groups(table).items()):
            cps, phi, theta, s2, fac = key
            fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
            for name in table.config.schemes:
                sel = sorted((r for r in rows if r.scheme == name), key=lambda r: r.d)
                ds = [r.d for r in sel]
                for ax, attr in zip(axes, ("accuracy", "mean", "std")):
                    ax.plot(ds, [getattr(r, attr) for r in sel], marker="o", label=name)
            for ax, attr in zip(axes, ("accuracy", "mean", "std")):
                ax.set_xlabel("d")
                ax.set_title(attr)
            axes[0].set_ylim(-0.02, 1.02)
            axes[0].legend(fontsize="small")
            fig.suptitle(f"u={' '.join(map(str, cps)) or '-'}, phi={phi:g}, theta={theta:g}, "
                         f"sigma2={s2:g}, factors={fac}")
            fig.tight_layout()
            path = out / f"chart_{gno:03d}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)
    return written


def emit_report(table: SummaryTable, path, charts: bool = True) -> list[Path]:
    """Write ``summary.csv``, ``manifest.json`` and SVG charts into ``path``."""
    if not table.rows:
        raise InvalidConfig("refusing to write an empty report")
    out = Path(path)
    try:
        os.makedirs(out, exist_ok=True)
        summary = out / "summary.csv"
        summary.write_text(table.to_csv_text())
        manifest = out / "manifest.json"
        manifest.write_text(json.dumps(_manifest(table), indent=2, sort_keys=True) + "\n")
        written = [summary, manifest]
        if charts:
            written += _write_charts(table, out)
    except OSError as exc:
        raise ReportIOError(f"cannot write report to {out}: {exc}") from None
    return written


def read_summary_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
