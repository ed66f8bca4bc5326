"""
Analysis orchestration: configuration, data assembly, model ladders and report files.
"""
import hashlib
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from . import __version__
from .config import analysis_defaults
from .corpus import TokenizerRules, Vocabulary
from .eyedata import (
    compute_measures,
    filter_measures,
    measure_frame,
    read_fixations,
    sentence_lengths,
    stimulus_word_lengths,
)
from .gam import GamFit, SmoothBasis, build_smooth, compare_models, fit_gam, partial_effect, term_summaries
from .models import (
    LANGUAGE_MODEL_SOURCES,
    POSITIONS,
    SOURCES,
    AnalysisConfig,
    FilterReport,
    LadderRow,
    Measure,
    MeasureRow,
    PartialEffect,
    PredictorRow,
    RawScore,
    ReportBundle,
    SmoothSpec,
    StimulusToken,
    TermSummary,
    predictor_name,
)
from .ngram import load_kn_model
from .report_renderer import ReportRenderer, write_report
from .rnn import load_rnn_model
from .scoring import (
    ScoringSettings,
    align_predictors,
    predictor_frame,
    read_norms,
    read_stimuli,
    score_stimuli,
    summarize_scores,
)
from .topics import load_lda_model

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

KNOWN_COVARIATES = ["landing_position"] + [
    f"{kind}_{position}" for kind in ("length", "frequency") for position in POSITIONS
]

PATH_KEYS = ("ngram_model", "topic_model", "rnn_model", "stimuli", "norms", "fixations", "frequencies", "output_dir")
LIST_KEYS = ("measures", "baseline", "sources")
INT_KEYS = ("seed", "n_protocols", "smooth_k", "fold_in_sweeps", "fold_in_samples", "gcv_max_outer", "workers")
BOOL_KEYS = ("lowercase", "strip_punctuation")
STRING_KEYS = ("basis",)


def _parse_bool(key: str, value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{key}: expected a boolean, got '{value}'")


def _split_list(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def load_analysis_config(path: PathLike) -> AnalysisConfig:
    """
    Load an analysis configuration file.

    The file holds ``key = value`` lines; ``#`` starts a comment, lists are comma
    separated and relative paths are taken relative to the file. The environment
    variable READING_PREDICTABILITY_OUT overrides ``output_dir``.

    Args:
        path: Configuration file

    Returns:
        AnalysisConfig: The validated configuration

    Raises:
        ValueError: On unknown keys, bad values, missing inputs or files that do not exist
    """
    path = Path(path)
    base = path.parent
    values: Dict[str, object] = {}
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{number}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in PATH_KEYS:
                values[key] = (base / value) if not Path(value).is_absolute() else Path(value)
            elif key in LIST_KEYS:
                values[key] = _split_list(value)
            elif key in INT_KEYS:
                try:
                    values[key] = int(value)
                except ValueError:
                    raise ValueError(f"{path}:{number}: {key} must be an integer, got '{value}'") from None
            elif key in BOOL_KEYS:
                values[key] = _parse_bool(key, value)
            elif key in STRING_KEYS:
                values[key] = value
            else:
                raise ValueError(f"{path}:{number}: unknown key '{key}'")

    override = os.environ.get(analysis_defaults.OUTPUT_DIR_ENV)
    if override:
        values["output_dir"] = Path(override)
    values.setdefault("output_dir", Path(analysis_defaults.OUTPUT_DIR))
    if "measures" in values:
        values["measures"] = [_measure(name) for name in values["measures"]]
    else:
        values["measures"] = [Measure(name) for name in analysis_defaults.MEASURES]
    values.setdefault("baseline", list(analysis_defaults.BASELINE_COVARIATES))
    values.setdefault("sources", list(analysis_defaults.SOURCES))
    values.setdefault("seed", analysis_defaults.SEED)
    values.setdefault("smooth_k", analysis_defaults.SMOOTH_K)
    values.setdefault("basis", analysis_defaults.SMOOTH_BASIS)
    for key in ("stimuli", "fixations"):
        if key not in values:
            raise ValueError(f"{path}: missing required key '{key}'")

    config = AnalysisConfig(**values)
    validate_config(config)
    return config


def _measure(name: str) -> Measure:
    try:
        return Measure(name.upper())
    except ValueError:
        raise ValueError(f"unknown measure '{name}'") from None


def validate_config(config: AnalysisConfig) -> None:
    """
    Check that sources, covariates and measures are known and that every referenced input exists.

    Raises:
        ValueError: Describing the first problem found
    """
    unknown = [source for source in config.sources if source not in SOURCES]
    if unknown:
        raise ValueError(f"unknown sources {unknown}")
    unknown = [name for name in config.baseline if name not in KNOWN_COVARIATES]
    if unknown:
        raise ValueError(f"unknown baseline covariates {unknown}")
    for measure in config.measures:
        if measure.value not in analysis_defaults.MEASURE_CUTOFFS_MS:
            raise ValueError(f"no fixation cutoff configured for {measure.value}")
    if config.basis not in ("tp", "cr"):
        raise ValueError(f"unknown basis '{config.basis}'")
    if config.workers < 1:
        raise ValueError(f"workers must be >= 1, got {config.workers}")
    required = {"stimuli": config.stimuli, "fixations": config.fixations}
    if "ccp" in config.sources:
        required["norms"] = config.norms
    for source in LANGUAGE_MODEL_SOURCES:
        if source in config.sources:
            key = "topic_model" if source == "topic" else f"{source}_model"
            required[key] = getattr(config, key)
    if config.frequencies is not None:
        required["frequencies"] = config.frequencies
    for key, value in required.items():
        if value is None:
            raise ValueError(f"'{key}' is required for sources {config.sources}")
        if not Path(value).is_file():
            raise ValueError(f"{key} file does not exist: {value}")


@dataclass
class AnalysisData:
    """Everything the model fits need, derived from the configured inputs."""
    stimuli: List[StimulusToken]
    raw_scores: List[RawScore]
    predictors: List[PredictorRow]
    measure_rows: Dict[Measure, List[MeasureRow]]
    filter_reports: List[FilterReport]
    frames: Dict[Measure, pd.DataFrame] = field(default_factory=dict)


def load_models(config: AnalysisConfig) -> Dict[str, object]:
    loaders = {
        "ngram": (load_kn_model, config.ngram_model),
        "topic": (load_lda_model, config.topic_model),
        "rnn": (load_rnn_model, config.rnn_model),
    }
    models = {}
    for source in LANGUAGE_MODEL_SOURCES:
        if source in config.sources:
            loader, path = loaders[source]
            models[source] = loader(path)
            logger.info("loaded %s model from %s", source, path)
    return models


def frequency_vocabulary(config: AnalysisConfig, models: Mapping[str, object],
                          stimuli: Sequence[StimulusToken]) -> Vocabulary:
    if config.frequencies is not None:
        return Vocabulary.from_tsv(config.frequencies)
    for source in LANGUAGE_MODEL_SOURCES:
        if source in models:
            return models[source].vocab
    counts: Dict[str, int] = {}
    for token in stimuli:
        counts[token.token] = counts.get(token.token, 0) + 1
    ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return Vocabulary(tuple(word for word, _ in ordered), tuple(count for _, count in ordered))


def join_measures(rows: Sequence[MeasureRow], predictors: Sequence[PredictorRow]) -> pd.DataFrame:
    """
    Join filtered observations with complete predictor rows on (sentence_id, word_index).

    Observations without a complete predictor row or a landing position are dropped.
    """
    observations = measure_frame(rows)
    table = predictor_frame(predictors, complete_only=True)
    if table.empty or observations.empty:
        return observations.iloc[0:0]
    joined = observations.merge(table, on=["sentence_id", "word_index"], how="inner", validate="many_to_one")
    joined = joined.dropna(subset=["landing_position"])
    return joined.sort_values(["subject_id", "sentence_id", "word_index"], kind="mergesort").reset_index(drop=True)


def build_analysis_data(config: AnalysisConfig) -> AnalysisData:
    """Score the stimuli, compute and filter the eye-movement measures and join them."""
    rules = TokenizerRules(config.lowercase, config.strip_punctuation)
    stimuli = read_stimuli(config.stimuli, rules)
    norms = read_norms(config.norms, config.n_protocols) if config.norms is not None else {}
    models = load_models(config)
    settings = ScoringSettings(config.fold_in_sweeps, config.fold_in_samples, config.seed, config.n_protocols)
    raw_scores = score_stimuli(stimuli, models, norms, settings)
    predictors = align_predictors(raw_scores, frequency_vocabulary(config, models, stimuli), config.sources)

    measures = compute_measures(read_fixations(config.fixations), stimulus_word_lengths(stimuli))
    lengths = sentence_lengths(stimuli)
    measure_rows: Dict[Measure, List[MeasureRow]] = {}
    reports: List[FilterReport] = []
    frames: Dict[Measure, pd.DataFrame] = {}
    for measure in config.measures:
        rows, report = filter_measures(measures, measure, lengths)
        measure_rows[measure] = rows
        reports.append(report)
        frames[measure] = join_measures(rows, predictors)
        logger.info("%s: %d observations with complete predictors", measure.value, len(frames[measure]))
    return AnalysisData(stimuli, raw_scores, predictors, measure_rows, reports, frames)


def item_level_correlations(measure_rows: Mapping[Measure, Sequence[MeasureRow]],
                            predictors: Sequence[PredictorRow],
                            sources: Sequence[str] = SOURCES) -> pd.DataFrame:
    """
    Pearson correlations of predictors and per-item mean measures.

    Items are (sentence_id, word_index) pairs with a complete predictor row. The
    matrix covers the transformed and raw scores of every source at the present,
    last and next positions, the present-word length and frequency, and one mean
    column per measure. Zero-variance columns give NaN.

    Raises:
        ValueError: If fewer than 3 items remain
    """
    items = predictor_frame(predictors, complete_only=True)
    if len(items) < 3:
        raise ValueError(f"need at least 3 items for correlations, got {len(items)}")
    scores = [predictor_name(source, position) for source in sources for position in POSITIONS]
    columns = scores + [f"{name}_raw" for name in scores] + [
        f"{kind}_present" for kind in ("length", "frequency")]
    for measure, rows in measure_rows.items():
        frame = measure_frame(rows)
        if frame.empty:
            items[measure.value] = np.nan
        else:
            means = frame.groupby(["sentence_id", "word_index"], sort=True)["value"].mean().rename(measure.value)
            items = items.merge(means.reset_index(), on=["sentence_id", "word_index"], how="left")
        columns.append(measure.value)
    numeric = items[columns].apply(pd.to_numeric, errors="coerce")
    return numeric.corr(method="pearson")


@dataclass
class FitSettings:
    smooth_k: int = analysis_defaults.SMOOTH_K
    basis: str = analysis_defaults.SMOOTH_BASIS
    gcv_max_outer: int = analysis_defaults.GCV_MAX_OUTER
    seed: int = analysis_defaults.SEED
    workers: int = 1
    significance: float = analysis_defaults.SIGNIFICANCE_LEVEL


@dataclass
class FitOutcome:
    terms: Tuple[str, ...]
    fit: Optional[GamFit] = None
    error: Optional[str] = None


class ModelFitter:
    """
    Fits GAMs of one response over a fixed data frame, memoized by term list.

    Covariates with at least 3 distinct values enter as smooths, two-valued ones
    linearly and constant ones are left out.
    """

    def __init__(self, frame: pd.DataFrame, settings: Optional[FitSettings] = None):
        self.frame = frame
        self.settings = settings or FitSettings()
        self.response = frame["value"].to_numpy(dtype=np.float64) if "value" in frame else np.empty(0)
        self._bases: Dict[str, SmoothBasis] = {}
        self._basis_errors: Dict[str, str] = {}
        self._outcomes: Dict[Tuple[str, ...], FitOutcome] = {}
        self._lock = threading.Lock()

    def _kind(self, covariate: str) -> str:
        distinct = self.frame[covariate].nunique(dropna=True)
        if distinct >= 3:
            return "smooth"
        return "linear" if distinct == 2 else "constant"

    def _prepare(self, terms: Sequence[str]) -> None:
        for covariate in terms:
            if covariate in self._bases or covariate in self._basis_errors:
                continue
            if covariate not in self.frame:
                self._basis_errors[covariate] = f"no column '{covariate}'"
                continue
            if self._kind(covariate) != "smooth":
                continue
            spec = SmoothSpec(covariate, k=self.settings.smooth_k, basis=self.settings.basis)
            try:
                self._bases[covariate] = build_smooth(self.frame[covariate].to_numpy(dtype=np.float64), spec,
                                                      seed=self.settings.seed)
            except ValueError as e:
                self._basis_errors[covariate] = str(e)

    def _fit(self, terms: Tuple[str, ...]) -> FitOutcome:
        broken = [covariate for covariate in terms if covariate in self._basis_errors]
        if broken:
            return FitOutcome(terms, error=f"{broken[0]}: {self._basis_errors[broken[0]]}")
        smooths, linear = [], []
        for covariate in terms:
            kind = self._kind(covariate)
            if kind == "smooth":
                smooths.append(self._bases[covariate].spec)
            elif kind == "linear":
                linear.append(covariate)
            else:
                logger.warning("covariate '%s' is constant; left out of the model", covariate)
        try:
            fit = fit_gam(self.response, smooths, self.frame, linear_terms=linear, bases=self._bases,
                          max_outer=self.settings.gcv_max_outer)
            return FitOutcome(terms, fit=fit)
        except Exception as e:
            logger.warning("fit with terms %s failed: %s", ", ".join(terms), e)
            return FitOutcome(terms, error=str(e))

    def fit_many(self, term_sets: Sequence[Sequence[str]]) -> Dict[Tuple[str, ...], FitOutcome]:
        """Fit every distinct term list (in parallel when workers > 1)."""
        keys = list(dict.fromkeys(tuple(terms) for terms in term_sets))
        with self._lock:
            pending = [key for key in keys if key not in self._outcomes]
        if pending:
            if len(self.response) == 0:
                outcomes = [FitOutcome(key, error="no observations") for key in pending]
            else:
                self._prepare(sorted({name for key in pending for name in key}))
                if self.settings.workers > 1 and len(pending) > 1:
                    with ThreadPoolExecutor(max_workers=self.settings.workers) as executor:
                        outcomes = list(executor.map(self._fit, pending))
                else:
                    outcomes = [self._fit(key) for key in pending]
            with self._lock:
                for outcome in outcomes:
                    self._outcomes[outcome.terms] = outcome
        return {key: self._outcomes[key] for key in keys}

    def fit(self, terms: Sequence[str]) -> FitOutcome:
        return self.fit_many([terms])[tuple(terms)]


def _source_terms(source: str, positions: Sequence[str] = POSITIONS) -> List[str]:
    return [predictor_name(source, position) for position in positions]


def _compare_row(label: str, source: str, step: str, previous: FitOutcome, current: FitOutcome,
                 significance: float) -> LadderRow:
    if current.fit is None or previous.fit is None:
        error = current.error if current.fit is None else f"reference fit failed: {previous.error}"
        return LadderRow(label, source, step, failed=True, error=error)
    comparison = compare_models(previous.fit, current.fit)
    p_value = comparison.p_value
    return LadderRow(
        label=label,
        source=source,
        step=step,
        gcv=current.fit.gcv,
        r2_adj=current.fit.r2_adj,
        delta_r2_percent=comparison.delta_r2_percent,
        delta_deviance=comparison.delta_deviance,
        delta_edf=comparison.delta_edf,
        chi2=comparison.chi2,
        p_value=p_value,
        significant=bool(p_value == p_value and p_value < significance),
        deviance=current.fit.deviance,
        edf=current.fit.tau,
    )


def run_ladder(frame: pd.DataFrame, measure: Measure, baseline: Sequence[str],
               sources: Sequence[str] = SOURCES, settings: Optional[FitSettings] = None,
               fitter: Optional[ModelFitter] = None) -> List[LadderRow]:
    """
    Build the predictor ladder of one measure.

    For each source the present, last and next scores are added to the baseline one
    at a time, each fit compared with the one before it. A final row compares the
    fit with all language-model scores against the fit with all cloze scores
    (positive deviance favours the language models). Failed fits are marked and
    the ladder continues.

    Returns:
        List[LadderRow]: baseline row, three rows per source, then the combined row
    """
    fitter = fitter or ModelFitter(frame, settings)
    settings = fitter.settings
    baseline = list(baseline)
    chains = {source: [baseline + _source_terms(source, POSITIONS[:i + 1]) for i in range(len(POSITIONS))]
              for source in sources}
    language_models = [source for source in sources if source in LANGUAGE_MODEL_SOURCES]
    combined = baseline + [term for source in language_models for term in _source_terms(source)]
    term_sets = [baseline] + [terms for chain in chains.values() for terms in chain]
    if "ccp" in sources and language_models:
        term_sets.append(combined)
    outcomes = fitter.fit_many(term_sets)

    base = outcomes[tuple(baseline)]
    rows = [LadderRow("baseline", "", "baseline",
                      gcv=base.fit.gcv if base.fit else None,
                      r2_adj=base.fit.r2_adj if base.fit else None,
                      deviance=base.fit.deviance if base.fit else None,
                      edf=base.fit.tau if base.fit else None,
                      failed=base.fit is None, error=base.error)]
    for source, chain in chains.items():
        previous = base
        for position, terms in zip(POSITIONS, chain):
            current = outcomes[tuple(terms)]
            label = f"{source} + {position}" if position == "present" else f"+ {position}"
            rows.append(_compare_row(label, source, position, previous, current, settings.significance))
            previous = current
    if "ccp" in sources and language_models:
        ccp_full = outcomes[tuple(chains["ccp"][-1])]
        rows.append(_compare_row("language models vs ccp", "+".join(language_models), "combined",
                                 ccp_full, outcomes[tuple(combined)], settings.significance))
    logger.info("%s ladder: %d rows, %d failed", measure.value, len(rows), sum(row.failed for row in rows))
    return rows


def run_head_to_head(frame: pd.DataFrame, measure: Measure, baseline: Sequence[str],
                     sources: Sequence[str] = SOURCES, settings: Optional[FitSettings] = None,
                     fitter: Optional[ModelFitter] = None) -> List[LadderRow]:
    """
    Compare each language model with the cloze scores, all three positions each.

    Delta deviance is D(baseline + ccp) - D(baseline + model); positive values mean
    the language model explains the measure better.
    """
    fitter = fitter or ModelFitter(frame, settings)
    settings = fitter.settings
    if "ccp" not in sources:
        return []
    baseline = list(baseline)
    ccp_terms = baseline + _source_terms("ccp")
    language_models = [source for source in sources if source in LANGUAGE_MODEL_SOURCES]
    outcomes = fitter.fit_many([ccp_terms] + [baseline + _source_terms(source) for source in language_models])
    reference = outcomes[tuple(ccp_terms)]
    rows = [_compare_row(f"{source} vs ccp", source, "head_to_head", reference,
                         outcomes[tuple(baseline + _source_terms(source))], settings.significance)
            for source in language_models]
    logger.info("%s head-to-head: %d rows", measure.value, len(rows))
    return rows


def run_all_predictors(frame: pd.DataFrame, measure: Measure, baseline: Sequence[str],
                       sources: Sequence[str] = SOURCES, settings: Optional[FitSettings] = None,
                       fitter: Optional[ModelFitter] = None
                       ) -> Tuple[List[TermSummary], Dict[str, PartialEffect], Dict[str, str]]:
    """
    Fit the baseline with every source at every position.

    Returns:
        Tuple: per-term summaries, partial-effect curves by term and the kind
        (smooth or linear) of every term; all empty if the fit failed
    """
    fitter = fitter or ModelFitter(frame, settings)
    terms = list(baseline) + [term for source in sources for term in _source_terms(source)]
    outcome = fitter.fit(terms)
    if outcome.fit is None:
        logger.warning("%s all-predictors fit failed: %s", measure.value, outcome.error)
        return [], {}, {}
    fit = outcome.fit
    curves = {term: partial_effect(fit, term) for term in fit.terms}
    kinds = {term: fit.term_kind(term) for term in fit.terms}
    return term_summaries(fit), curves, kinds


def _digest(path: Path) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            sha.update(chunk)
    return sha.hexdigest()


def run_analysis(config: AnalysisConfig) -> ReportBundle:
    """Run every configured measure through correlations, ladders, head-to-head and the full model."""
    data = build_analysis_data(config)
    settings = FitSettings(config.smooth_k, config.basis, config.gcv_max_outer, config.seed, config.workers)
    bundle = ReportBundle(filter_reports=data.filter_reports)
    bundle.score_ranges = summarize_scores(data.raw_scores, config.sources)
    try:
        bundle.correlations = item_level_correlations(data.measure_rows, data.predictors, config.sources)
    except ValueError as e:
        logger.warning("correlations skipped: %s", e)

    for measure in config.measures:
        frame = data.frames[measure]
        fitter = ModelFitter(frame, settings)
        bundle.ladders[measure.value] = run_ladder(frame, measure, config.baseline, config.sources, fitter=fitter)
        bundle.head_to_head[measure.value] = run_head_to_head(frame, measure, config.baseline, config.sources,
                                                              fitter=fitter)
        summaries, curves, term_kinds = run_all_predictors(frame, measure, config.baseline, config.sources,
                                                           fitter=fitter)
        bundle.all_predictors[measure.value] = summaries
        bundle.term_kinds.update(term_kinds)
        for term, curve in curves.items():
            bundle.curves[f"{measure.value}/{term}"] = curve
        bundle.manifest[f"rows_model_{measure.value}"] = str(len(frame))

    manifest = bundle.manifest
    manifest["tool_version"] = __version__
    manifest["seed"] = str(config.seed)
    manifest["basis"] = config.basis
    manifest["smooth_k"] = str(config.smooth_k)
    manifest["sources"] = ",".join(config.sources)
    manifest["measures"] = ",".join(measure.value for measure in config.measures)
    manifest["baseline"] = ",".join(config.baseline)
    manifest["rows_stimuli"] = str(len(data.stimuli))
    manifest["rows_predictors"] = str(len(data.predictors))
    manifest["rows_predictors_complete"] = str(sum(row.complete for row in data.predictors))
    for report in data.filter_reports:
        for name in ("kept", "dropped_short", "dropped_long", "dropped_boundary", "missing"):
            manifest[f"filter_{name}_{report.measure.value}"] = str(getattr(report, name))
    for key in PATH_KEYS:
        value = getattr(config, key)
        if key != "output_dir" and value is not None:
            manifest[f"input_sha256_{key}"] = _digest(Path(value))
    return bundle


def emit_reports(bundle: ReportBundle, out_dir: PathLike, sources: Sequence[str] = SOURCES) -> List[Path]:
    """
    Write every table of the bundle plus manifest.txt.

    Output is a pure function of the bundle: no timestamps, fixed column and row
    order. The manifest lists the bundle's entries and a sha256 digest of every
    other file written.

    Raises:
        OSError: If the directory cannot be written
    """
    out_dir = Path(out_dir)
    renderer = ReportRenderer(sources)
    contents: Dict[str, str] = {
        "correlations.tsv": renderer.render_correlations(bundle.correlations),
        "score_ranges.tsv": renderer.render_score_ranges(bundle.score_ranges),
        "filter_counts.tsv": renderer.render_filter_reports(bundle.filter_reports),
    }
    for measure, rows in bundle.ladders.items():
        contents[f"ladder_{measure}.tsv"] = renderer.render_ladder(rows)
    for measure, rows in bundle.head_to_head.items():
        contents[f"head_to_head_{measure}.tsv"] = renderer.render_ladder(rows)
    for measure, summaries in bundle.all_predictors.items():
        contents[f"all_predictors_{measure}.tsv"] = renderer.render_term_summaries(summaries, bundle.term_kinds)
    for key, curve in bundle.curves.items():
        measure, term = key.split("/", 1)
        contents[f"curves/{measure}_{term}.csv"] = renderer.render_curve(curve)

    written = []
    manifest = dict(bundle.manifest)
    for name in sorted(contents):
        written.append(write_report(out_dir / name, contents[name]))
        manifest[f"output_sha256_{name}"] = hashlib.sha256(contents[name].encode("utf-8")).hexdigest()
    written.append(write_report(out_dir / "manifest.txt", renderer.render_manifest(manifest)))
    logger.info("wrote %d report files to %s", len(written), out_dir)
    return written
