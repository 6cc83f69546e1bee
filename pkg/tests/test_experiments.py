from __future__ import annotations

import json
import math

import pytest

from panelseg.errors import InvalidConfig
from panelseg.experiments import (
    ExperimentConfig, SUMMARY_FIELDS, config_from_mapping, emit_report, read_config, read_summary_csv,
    repetition_seed, run_monte_carlo,
)
from panelseg.model import read_key_values


def small(**kw):
    base = dict(scenario="SingleChange", n=20, change_points=((14,),), d=(40,), phi=(-1.0,),
                theta=(1.0,), sigma2_tilde=(1.0,), schemes=("standard", "exact"), repetitions=8, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.mark.parametrize("kw", [
    dict(repetitions=0),
    dict(d=()),
    dict(phi=()),
    dict(schemes=()),
    dict(scenario="Sideways"),
    dict(schemes=("magic",)),
    dict(schemes=("weighted:0.7",)),
    dict(accuracy_mode="support"),
    dict(change_points=((14, 15),)),
    dict(change_points=((20,),)),
    dict(scenario="Epidemic", change_points=((14,),)),
    dict(scenario="RandomLocation", change_points=((18,),)),
    dict(factors=("quadratic",)),
])
def test_invalid_configs(kw):
    with pytest.raises(InvalidConfig):
        small(**kw)


def test_single_grid_point_rows_and_determinism(tmp_path):
    cfg = small()
    a, b = run_monte_carlo(cfg), run_monte_carlo(cfg)
    assert len(a.rows) == 2
    assert a.to_csv_text() == b.to_csv_text()
    emit_report(a, tmp_path / "a")
    emit_report(b, tmp_path / "b")
    for name in ("summary.csv", "manifest.json", "chart_000.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = read_summary_csv(tmp_path / "a" / "summary.csv")
    assert len(rows) == 2 and list(rows[0]) == list(SUMMARY_FIELDS)
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["paired_design"] and manifest["seeds"]["0"] == a.seeds[0]


def test_results_do_not_depend_on_workers():
    cfg = small(d=(30, 60), repetitions=4)
    serial = run_monte_carlo(cfg)
    parallel = run_monte_carlo(ExperimentConfig(**{**cfg.__dict__, "workers": 2}))
    assert serial.to_csv_text() == parallel.to_csv_text()


def test_seeds_depend_only_on_coordinates():
    assert repetition_seed(1, 2, 3) == repetition_seed(1, 2, 3)
    assert len({repetition_seed(1, g, r) for g in range(5) for r in range(50)}) == 250
    cfg = small(d=(40, 80), repetitions=3)
    t = run_monte_carlo(cfg)
    assert t.seeds[1] == [repetition_seed(3, 1, r) for r in range(3)]


def test_paired_design_identical_for_identical_schemes():
    t = run_monte_carlo(small(schemes=("standard", "weighted:0.5"), repetitions=10))
    assert t.rows[0].estimates == t.rows[1].estimates


def test_summary_statistics():
    t = run_monte_carlo(small(repetitions=12))
    for r in t.rows:
        assert 0.0 <= r.accuracy <= 1.0
        assert r.accuracy_se == pytest.approx(math.sqrt(r.accuracy * (1 - r.accuracy) / 12))
        assert r.mean == pytest.approx(sum(r.estimates) / 12)
        assert r.mode in r.estimates
        assert r.fallback_rate == 0.0 and r.failures == 0


def test_support_accuracy():
    cfg = small(scenario="RandomLocation", accuracy_mode="support", sigma2_tilde=(0.01,), d=(200,),
                phi=(0.0,), theta=(0.0,), repetitions=6)
    t = run_monte_carlo(cfg)
    for r in t.rows:
        assert set(r.estimates) <= {12, 16}
        assert r.accuracy == 1.0


def test_vanishing_change_scores_predicted_set():
    cfg = small(scenario="VanishingChange", n=7, change_points=((),), d=(2000,), phi=(0.0,), theta=(0.0,),
                schemes=("weighted:0", "standard"), repetitions=10)
    t = run_monte_carlo(cfg)
    assert t.row("standard").accuracy == 1.0  # every index is predicted
    assert set(t.row("weighted:0").estimates) <= {1, 2, 3, 4, 5, 6}


def test_epidemic_scores_exact_set_equality():
    cfg = small(scenario="Epidemic", n=30, change_points=((10, 20),), d=(50,), phi=(0.0,), theta=(0.0,),
                sigma2_tilde=(0.05,), repetitions=3, schemes=("standard",))
    r = run_monte_carlo(cfg).rows[0]
    assert r.accuracy == 1.0 and all(e == (10, 20) for e in r.estimates)
    assert math.isnan(r.mean) and r.mode is None


def test_estimated_schemes_run_and_record_fallbacks():
    cfg = small(schemes=("exact-est", "exact-banded", "exact-banded-centered", "exact-reg"), n2=10)
    t = run_monte_carlo(cfg)
    assert [r.scheme for r in t.rows] == list(cfg.schemes)
    assert all(0 <= r.fallback_rate <= 1 for r in t.rows)


def test_estimator_errors_are_recorded(monkeypatch):
    from panelseg import experiments
    from panelseg.errors import SolverFailure

    def boom(*a, **k):
        raise SolverFailure("forced", 1.0)

    monkeypatch.setattr(experiments, "convex_regression", boom)
    t = run_monte_carlo(small(schemes=("exact-reg", "standard"), repetitions=3))
    assert t.row("exact-reg").failures == 3 and t.row("exact-reg").accuracy == 0.0
    assert t.row("standard").failures == 0


def test_emit_report_refuses_empty(tmp_path):
    t = run_monte_carlo(small(repetitions=1))
    t.rows = []
    with pytest.raises(InvalidConfig):
        emit_report(t, tmp_path)


def test_config_file_roundtrip(tmp_path):
    path = tmp_path / "bench.txt"
    path.write_text(
        "scenario = Epidemic\nn = 100\nchange_points = 55, 80\nd = 100, 200\nphi = -2, -3.5\n"
        "theta = 0\nsigma2_tilde = 1\nschemes = standard, exact, weighted:0.25\nrepetitions = 5\nseed = 1\n"
    )
    cfg = read_config(path)
    assert cfg.change_points == ((55, 80),)
    assert cfg.phi == (-2.0, -3.5) and cfg.schemes == ("standard", "exact", "weighted:0.25")
    single = config_from_mapping(read_key_values("change_points = 55, 90\nd = 10", is_text=True))
    assert single.change_points == ((55,), (90,)) and single.d == (10,)
    with pytest.raises(InvalidConfig):
        config_from_mapping({"d": 10, "nonsense": 1})
    with pytest.raises(InvalidConfig):
        config_from_mapping({"d": "many"})


def test_grid_order_d_fastest():
    cfg = small(phi=(-1.0, 0.5), d=(10, 20, 30))
    g = cfg.grid()
    assert [p["d"] for p in g] == [10, 20, 30, 10, 20, 30]
    assert [p["phi"] for p in g[:3]] == [-1.0] * 3
