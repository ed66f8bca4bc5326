"""
Tests for configuration loading, data assembly, model ladders and report output.
"""
import numpy as np
import pandas as pd
import pytest

from reading_predictability.config import analysis_defaults
from reading_predictability.models import Measure, MeasureRow, ReportBundle
from reading_predictability.pipeline import (
    FitSettings,
    ModelFitter,
    build_analysis_data,
    emit_reports,
    item_level_correlations,
    join_measures,
    load_analysis_config,
    run_all_predictors,
    run_analysis,
    run_head_to_head,
    run_ladder,
)
from reading_predictability.report_renderer import LADDER_HEADER
from test_data import simulated_frame

FAST = FitSettings(smooth_k=6, gcv_max_outer=3)


def _write_inputs(directory):
    for name in ("stimuli.tsv", "fixations.tsv", "norms.tsv"):
        (directory / name).write_text("x\n", encoding="utf-8")


def test_load_analysis_config(tmp_path, monkeypatch):
    """Test key = value parsing, relative paths and defaults."""
    monkeypatch.delenv(analysis_defaults.OUTPUT_DIR_ENV, raising=False)
    _write_inputs(tmp_path)
    path = tmp_path / "analysis.conf"
    path.write_text(
        "# inputs\n"
        "stimuli = stimuli.tsv\n"
        "fixations = fixations.tsv\n"
        "norms = norms.tsv   # cloze\n"
        "sources = ccp\n"
        "measures = gd, TVT\n"
        "seed = 9\n"
        "output_dir = out\n",
        encoding="utf-8",
    )
    config = load_analysis_config(path)
    assert config.stimuli == tmp_path / "stimuli.tsv"
    assert config.output_dir == tmp_path / "out"
    assert config.measures == [Measure.GD, Measure.TVT]
    assert config.sources == ["ccp"]
    assert config.seed == 9
    assert config.baseline == analysis_defaults.BASELINE_COVARIATES
    assert config.smooth_k == analysis_defaults.SMOOTH_K


def test_output_dir_environment_override(tmp_path, monkeypatch):
    """Test that the environment variable replaces the configured output directory."""
    _write_inputs(tmp_path)
    path = tmp_path / "analysis.conf"
    path.write_text("stimuli = stimuli.tsv\nfixations = fixations.tsv\nnorms = norms.tsv\nsources = ccp\n",
                    encoding="utf-8")
    monkeypatch.setenv(analysis_defaults.OUTPUT_DIR_ENV, str(tmp_path / "elsewhere"))
    assert load_analysis_config(path).output_dir == tmp_path / "elsewhere"


@pytest.mark.parametrize("content", [
    "stimuli = stimuli.tsv\nfixations = fixations.tsv\nnorms = norms.tsv\nsources = ccp\ncolour = blue\n",
    "stimuli = stimuli.tsv\nfixations = fixations.tsv\nnorms = norms.tsv\nsources = ccp\nseed = one\n",
    "stimuli = stimuli.tsv\nfixations = fixations.tsv\nsources = ccp\n",
    "stimuli = stimuli.tsv\nfixations = fixations.tsv\nnorms = norms.tsv\nsources = ngram\n",
    "stimuli = missing.tsv\nfixations = fixations.tsv\nnorms = norms.tsv\nsources = ccp\n",
    "stimuli = stimuli.tsv\nfixations = fixations.tsv\nnorms = norms.tsv\nsources = cloze\n",
    "stimuli = stimuli.tsv\nfixations = fixations.tsv\nnorms = norms.tsv\nsources = ccp\nmeasures = FFD\n",
    "stimuli = stimuli.tsv\nfixations = fixations.tsv\nnorms = norms.tsv\nsources = ccp\nbaseline = age\n",
    "stimuli = stimuli.tsv\nnorms = norms.tsv\nsources = ccp\n",
    "stimuli stimuli.tsv\n",
])
def test_invalid_config(tmp_path, monkeypatch, content):
    """Test configuration errors for unknown keys, bad values and missing inputs."""
    monkeypatch.delenv(analysis_defaults.OUTPUT_DIR_ENV, raising=False)
    _write_inputs(tmp_path)
    path = tmp_path / "analysis.conf"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ValueError):
        load_analysis_config(path)


def test_join_measures(measure_rows, item_predictors):
    """Test the inner join of observations and complete predictor rows."""
    rows = measure_rows[Measure.GD] + [MeasureRow("p1", "s9", 2, Measure.GD, 250.0, 0.5),
                                       MeasureRow("p1", "s1", 2, Measure.GD, 250.0, None)]
    item_predictors[2].complete = False
    frame = join_measures(rows, item_predictors)
    assert len(frame) == 4
    assert set(frame["sentence_id"]) == {"s1", "s2"}
    assert {"value", "landing_position", "ngram_present", "length_present"} <= set(frame.columns)


def test_item_level_correlations(measure_rows, item_predictors):
    """Test correlations of item means with predictors."""
    matrix = item_level_correlations(measure_rows, item_predictors, ["ngram", "ccp"])
    assert matrix.loc["ngram_present", "GD"] == pytest.approx(1.0)
    assert matrix.loc["length_present", "GD"] == pytest.approx(1.0)
    assert matrix.loc["ccp_present", "GD"] == pytest.approx(0.0, abs=1e-12)
    assert matrix.loc["GD", "GD"] == pytest.approx(1.0)
    assert matrix.loc["ngram_last", "GD"] == pytest.approx(1.0)
    assert matrix.loc["ngram_next_raw", "GD"] > 0.8
    assert matrix.loc["ccp_next", "GD"] == pytest.approx(0.0, abs=1e-12)


def test_item_level_correlations_need_three_items(measure_rows, item_predictors):
    """Test the error for fewer than three items."""
    with pytest.raises(ValueError):
        item_level_correlations(measure_rows, item_predictors[:2], ["ngram"])


def test_ladder_layout_and_signal():
    """Test ladder rows and that a real present-word effect is detected."""
    frame = simulated_frame(np.random.default_rng(1), effect=-0.1)
    rows = run_ladder(frame, Measure.GD, ["length_present"], ["ngram"], FAST)
    assert [row.label for row in rows] == ["baseline", "ngram + present", "+ last", "+ next"]
    assert rows[0].deviance is not None and not rows[0].failed
    assert rows[1].significant
    assert rows[1].delta_deviance > 0
    assert rows[1].p_value < 1e-6


def test_constant_predictor_adds_nothing():
    """Test that a constant score leaves the model unchanged."""
    frame = simulated_frame(np.random.default_rng(2))
    frame["ngram_present"] = -2.0
    rows = run_ladder(frame, Measure.GD, ["length_present"], ["ngram"], FAST)
    assert rows[1].delta_deviance == 0.0
    assert rows[1].p_value == 1.0
    assert not rows[1].significant


def test_two_valued_covariate_enters_linearly():
    """Test that binary covariates are fitted as linear terms."""
    frame = simulated_frame(np.random.default_rng(3))
    frame["ngram_present"] = np.where(frame["ngram_present"] > -2.0, 1.0, 0.0)
    summaries, curves, kinds = run_all_predictors(frame, Measure.GD, ["length_present"], ["ngram"], FAST)
    assert kinds["ngram_present"] == "linear"
    assert kinds["length_present"] == "smooth"
    assert [s.term for s in summaries] == ["ngram_present", "length_present", "ngram_last", "ngram_next"]
    assert set(curves) == set(kinds)


def test_ladder_detection_rates():
    """Test power for a real effect and the false-positive rate without one over 100 simulations each."""
    settings = FitSettings(smooth_k=6, gcv_max_outer=3, workers=4)
    hits = sum(run_ladder(simulated_frame(np.random.default_rng(seed), n_items=80, n_subjects=3, effect=-0.1),
                          Measure.GD, ["length_present"], ["ngram"], settings)[1].significant
               for seed in range(100))
    false_alarms = sum(run_ladder(simulated_frame(np.random.default_rng(1000 + seed), n_items=80, n_subjects=3),
                                  Measure.GD, ["length_present"], ["ngram"], settings)[1].significant
                       for seed in range(100))
    assert hits >= 95
    assert false_alarms <= 10


def test_head_to_head_favours_the_informative_source():
    """Test that the source carrying the effect beats cloze scores that carry none."""
    rng = np.random.default_rng(4)
    frame = simulated_frame(rng, effect=-0.1)
    for position in ("present", "last", "next"):
        frame[f"ccp_{position}"] = rng.uniform(-2.5, 2.5, size=len(frame))
    rows = run_head_to_head(frame, Measure.GD, ["length_present"], ["ccp", "ngram"], FAST)
    assert [row.label for row in rows] == ["ngram vs ccp"]
    assert rows[0].delta_deviance > 0


def test_failed_fits_are_reported():
    """Test that a fit failure marks the row instead of stopping the ladder."""
    frame = simulated_frame(np.random.default_rng(5))
    frame.loc[0, "ngram_last"] = np.nan
    rows = run_ladder(frame, Measure.GD, ["length_present"], ["ngram"], FAST)
    assert not rows[1].failed
    assert rows[2].failed and rows[2].error
    assert rows[3].failed


def test_fitter_runs_in_parallel():
    """Test that parallel fitting gives the same results as serial fitting."""
    frame = simulated_frame(np.random.default_rng(6), effect=-0.05)
    terms = [["length_present"], ["length_present", "ngram_present"], ["length_present", "ngram_last"]]
    serial = ModelFitter(frame, FAST).fit_many(terms)
    parallel = ModelFitter(frame, FitSettings(smooth_k=6, gcv_max_outer=3, workers=3)).fit_many(terms)
    for key in serial:
        assert serial[key].fit.gcv == parallel[key].fit.gcv


def test_empty_frame_fails_cleanly():
    """Test ladders over a frame without observations."""
    rows = run_ladder(pd.DataFrame(), Measure.SFD, ["length_present"], ["ngram"], FAST)
    assert all(row.failed for row in rows)


def test_emit_reports_for_empty_bundle(tmp_path):
    """Test header-only tables and the output digests in the manifest."""
    bundle = ReportBundle(ladders={"GD": []}, head_to_head={"GD": []}, manifest={"seed": "1"})
    written = emit_reports(bundle, tmp_path, ["ccp"])
    assert (tmp_path / "ladder_GD.tsv").read_text(encoding="utf-8") == "\t".join(LADDER_HEADER) + "\n"
    manifest = (tmp_path / "manifest.txt").read_text(encoding="utf-8").splitlines()
    assert "seed = 1" in manifest
    assert any(line.startswith("output_sha256_ladder_GD.tsv = ") for line in manifest)
    assert written[-1] == tmp_path / "manifest.txt"


def _reduced_config(toy_dataset):
    config = load_analysis_config(toy_dataset.config)
    config.sources = ["ccp", "ngram"]
    config.baseline = ["landing_position", "length_present", "frequency_present"]
    return config


def test_toy_analysis_end_to_end(toy_dataset, tmp_path, monkeypatch):
    """Test a full run on the toy dataset: reports, manifest counts and determinism."""
    monkeypatch.delenv(analysis_defaults.OUTPUT_DIR_ENV, raising=False)
    bundle = run_analysis(_reduced_config(toy_dataset))
    emit_reports(bundle, tmp_path / "first", ["ccp", "ngram"])
    emit_reports(run_analysis(_reduced_config(toy_dataset)), tmp_path / "second", ["ccp", "ngram"])

    first = sorted(p.relative_to(tmp_path / "first") for p in (tmp_path / "first").rglob("*") if p.is_file())
    second = sorted(p.relative_to(tmp_path / "second") for p in (tmp_path / "second").rglob("*") if p.is_file())
    assert first == second
    for name in first:
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()

    assert [report.measure for report in bundle.filter_reports] == [Measure.SFD, Measure.GD, Measure.TVT]
    for report in bundle.filter_reports:
        name = report.measure.value
        assert bundle.manifest[f"filter_kept_{name}"] == str(report.kept)
        assert bundle.manifest[f"filter_dropped_boundary_{name}"] == str(report.dropped_boundary)
        assert report.kept > 0
        ladder = bundle.ladders[name]
        assert [row.label for row in ladder][-1] == "language models vs ccp"
        assert not ladder[0].failed
        assert (tmp_path / "first" / f"ladder_{name}.tsv").exists()
        assert (tmp_path / "first" / "curves" / f"{name}_ngram_present.csv").exists()
    assert "input_sha256_stimuli" in bundle.manifest


def test_toy_predictability_shortens_reading_times(toy_dataset, monkeypatch):
    """Test that more predictable words have shorter mean gaze durations in the toy data."""
    monkeypatch.delenv(analysis_defaults.OUTPUT_DIR_ENV, raising=False)
    config = _reduced_config(toy_dataset)
    data = build_analysis_data(config)
    matrix = item_level_correlations(data.measure_rows, data.predictors, config.sources)
    assert matrix.loc["ngram_present", "GD"] < 0
    assert set(matrix.columns) == set(matrix.index)


def test_toy_log_scores_beat_raw_probabilities(toy_dataset, monkeypatch):
    """Test that log10 scores of every language model correlate more strongly with reading times than raw ones."""
    monkeypatch.delenv(analysis_defaults.OUTPUT_DIR_ENV, raising=False)
    config = load_analysis_config(toy_dataset.config)
    data = build_analysis_data(config)
    matrix = item_level_correlations(data.measure_rows, data.predictors, config.sources)
    for measure in ("SFD", "GD", "TVT"):
        for source in ("ngram", "topic", "rnn"):
            transformed = abs(matrix.loc[f"{source}_present", measure])
            raw = abs(matrix.loc[f"{source}_present_raw", measure])
            assert transformed > raw, (measure, source)
