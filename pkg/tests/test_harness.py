"""Tests for the experiment harness: config validation, seed plumbing,
aggregation arithmetic, deterministic CSV emission, and chart structure."""

import math
import pathlib
import xml.etree.ElementTree as ET

import numpy as np
import pytest

import hlearner.harness as harness
from hlearner.harness import (
    AggRow,
    ExperimentConfig,
    ResultTable,
    RunRow,
    aggregate,
    emit_csv,
    load_table,
    run_experiment,
)
from hlearner.plotting import emit_plot

_SVG = "{http://www.w3.org/2000/svg}"

_TINY_TRAIN = {
    "embedding_size": 8,
    "hypernet_hidden": [8],
    "target_hidden": [4],
    "batch_size": 32,
    "max_epochs": 3,
    "patience": 2,
}


def _tiny_config(**over):
    base = dict(
        name="tiny",
        p=4,
        n_continuous=0,
        n_values=(64,),
        k_values=(2,),
        m_values=(2,),
        learners=("slearner",),
        repetitions=1,
        train=dict(_TINY_TRAIN),
        n_test=40,
        sigma_y=0.1,
    )
    base.update(over)
    return ExperimentConfig(**base)


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown experiment config keys"):
        ExperimentConfig.from_dict({"name": "x", "bogus": 1})
    with pytest.raises(ValueError, match="unknown training config keys"):
        _tiny_config(train={"momentum": 0.9})


def test_config_allows_only_one_varying_axis():
    _tiny_config(n_values=(100, 200))  # fine
    with pytest.raises(ValueError, match="one sweep axis"):
        _tiny_config(n_values=(100, 200), m_values=(1, 2))


def test_config_axis_inference():
    assert _tiny_config().axis == "n"
    assert _tiny_config(n_values=(100, 200)).axis == "n"
    assert _tiny_config(m_values=(1, 2)).axis == "m"
    assert _tiny_config(k_values=(2, 3)).axis == "k"


def test_config_validates_treatment_template_and_seed_override():
    with pytest.raises(ValueError, match="continuous"):
        _tiny_config(n_continuous=3, k_values=(2,))
    with pytest.raises(ValueError, match="derived per repetition"):
        _tiny_config(train={"seed": 1})
    with pytest.raises(ValueError, match="unknown learner"):
        _tiny_config(learners=("tlearner",))


def test_config_roundtrip():
    cfg = _tiny_config(n_values=(100, 200), repetitions=3)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_aggregate_hand_values():
    def row(value, seed):
        return RunRow(axis="n", axis_value=100, learner="slearner", seed=seed,
                      pehe_composite=value)

    agg = aggregate([row(1.0, 0), row(2.0, 1), row(3.0, 2)])
    assert len(agg) == 1
    assert agg[0].mean_pehe == pytest.approx(2.0, abs=1e-15)
    assert agg[0].stderr_pehe == pytest.approx(1.0 / math.sqrt(3), rel=1e-12)
    assert agg[0].n_seeds == 3

    single = aggregate([row(5.0, 0)])
    assert single[0].mean_pehe == 5.0 and single[0].stderr_pehe == 0.0

    flat = aggregate([row(4.0, s) for s in range(4)])
    assert flat[0].mean_pehe == 4.0 and flat[0].stderr_pehe == 0.0


def test_aggregate_skips_failed_rows_and_rejects_empty_groups():
    ok = RunRow(axis="n", axis_value=10, learner="a", seed=0, pehe_composite=1.0)
    bad = RunRow(axis="n", axis_value=10, learner="b", seed=0, status="failed",
                 error="boom")
    agg = aggregate([ok, bad])
    assert [a.learner for a in agg] == ["a"]
    with pytest.raises(ValueError, match="empty group"):
        harness._group_stats([])


def test_run_experiment_counts_rows():
    table = run_experiment(_tiny_config())
    assert len(table.raw) == 1
    assert len(table.agg) == 1
    assert table.raw[0].status == "ok"
    assert table.raw[0].pehe_composite >= 0.0
    assert table.raw[0].factual_rmse >= 0.0
    assert table.raw[0].train_seconds > 0.0
    assert len(table.raw[0].pehe_per_outcome) == 2


def test_run_experiment_seed_derivation_is_auditable():
    cfg = _tiny_config(repetitions=3, seed_base=10)
    table = run_experiment(cfg)
    assert sorted(r.seed for r in table.raw) == [10, 11, 12]


def test_run_experiment_fixed_dgp_mode():
    # With a fixed DGP and fixed data seeds per repetition, repetitions
    # still differ (different data draws) but the generator is shared.
    cfg = _tiny_config(repetitions=2, fresh_dgp_per_rep=False, sigma_y=0.0)
    table = run_experiment(cfg)
    values = [r.pehe_composite for r in table.raw]
    assert len(set(values)) == 2


def test_emitted_csvs_are_byte_identical_across_runs(tmp_path):
    cfg = _tiny_config(n_values=(48, 96), repetitions=2, learners=("slearner", "xslearner"))
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    out_a.mkdir(), out_b.mkdir()
    paths_a = emit_csv(run_experiment(cfg), out_a, cfg.name)
    paths_b = emit_csv(run_experiment(cfg), out_b, cfg.name)
    for kind in ("raw", "agg"):
        assert open(paths_a[kind], "rb").read() == open(paths_b[kind], "rb").read()


def _golden_table():
    rows = [
        RunRow(axis="n", axis_value=500, learner="hlearner", seed=0,
               pehe_composite=0.625, pehe_per_outcome=(0.5, 0.75),
               factual_rmse=0.25, train_seconds=1.5),
        RunRow(axis="n", axis_value=500, learner="hlearner", seed=1,
               pehe_composite=0.875, pehe_per_outcome=(1.0, 0.75),
               factual_rmse=0.125, train_seconds=2.0),
        RunRow(axis="n", axis_value=500, learner="slearner", seed=0,
               status="failed",
               error="TrainingDiverged: training diverged at epoch 1, batch 0"),
    ]
    return ResultTable(axis="n", raw=rows, agg=aggregate(rows))


def test_emit_csv_matches_golden_files(tmp_path):
    golden = pathlib.Path(__file__).parent / "golden"
    paths = emit_csv(_golden_table(), tmp_path, "results")
    for kind in ("raw", "agg", "timings"):
        got = open(paths[kind], "rb").read()
        want = (golden / f"results_{kind}.csv").read_bytes()
        assert got == want, f"{kind} table differs from the golden file"


def test_table_roundtrip_identity(tmp_path):
    table = _golden_table()
    paths = emit_csv(table, tmp_path, "rt")
    back = load_table(paths["raw"], paths["agg"], paths["timings"])
    assert back.axis == table.axis
    assert back.raw == table.raw
    assert back.agg == table.agg
    paths2 = emit_csv(back, tmp_path, "rt2")
    for kind in ("raw", "agg", "timings"):
        assert open(paths[kind], "rb").read() == open(paths2[kind], "rb").read()


def test_load_table_recomputes_aggregates_when_absent(tmp_path):
    table = _golden_table()
    paths = emit_csv(table, tmp_path, "re")
    back = load_table(paths["raw"])
    assert back.agg == table.agg


def test_failed_runs_are_recorded_and_do_not_abort(monkeypatch):
    real_train = harness.train

    def flaky(kind, dataset, cfg):
        if kind == "xslearner":
            raise RuntimeError("synthetic failure for testing")
        return real_train(kind, dataset, cfg)

    monkeypatch.setattr(harness, "train", flaky)
    cfg = _tiny_config(learners=("slearner", "xslearner"), repetitions=2)
    table = run_experiment(cfg)
    failed = [r for r in table.raw if r.status == "failed"]
    ok = [r for r in table.raw if r.status == "ok"]
    assert len(failed) == 2 and len(ok) == 2
    assert all("synthetic failure" in r.error for r in failed)
    assert [a.learner for a in table.agg] == ["slearner"]


def _series_info(path):
    tree = ET.parse(path)
    info = {}
    for g in tree.iter(f"{_SVG}g"):
        gid = g.get("id") or ""
        if gid.startswith(("series-", "band-")):
            markers = len(list(g.iter(f"{_SVG}use")))
            line_paths = [p.get("d") for p in g.iter(f"{_SVG}path") if p.get("d", "").startswith("M ")]
            points = line_paths[0].count("L ") + 1 if line_paths else 0
            info[gid] = (markers, points)
    return info


def test_plot_is_deterministic_and_structured(tmp_path):
    agg = [
        AggRow("n", v, learner, 1.0 + 0.01 * v + 0.1 * i, 0.05, 10)
        for i, learner in enumerate(["hlearner", "slearner", "xslearner"])
        for v in (500, 1000, 2000, 4000)
    ]
    table = ResultTable("n", [], agg)
    p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_plot(table, p1)
    emit_plot(table, p2)
    assert p1.read_bytes() == p2.read_bytes()
    info = _series_info(p1)
    series = {k: v for k, v in info.items() if k.startswith("series-")}
    bands = {k: v for k, v in info.items() if k.startswith("band-")}
    assert sorted(series) == ["series-hlearner", "series-slearner", "series-xslearner"]
    assert sorted(bands) == ["band-hlearner", "band-slearner", "band-xslearner"]
    for markers, points in series.values():
        assert markers == 4 and points == 4


def test_plot_single_point_has_one_marker(tmp_path):
    table = ResultTable("n", [], [AggRow("n", 500, "slearner", 1.0, 0.0, 1)])
    path = tmp_path / "single.svg"
    emit_plot(table, path)
    info = _series_info(path)
    assert info["series-slearner"][0] == 1


def test_plot_requires_aggregates(tmp_path):
    with pytest.raises(ValueError, match="aggregate"):
        emit_plot(ResultTable("n", [], []), tmp_path / "x.svg")
