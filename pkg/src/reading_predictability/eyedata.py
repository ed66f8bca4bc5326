"""
Viewing-time measures from fixation events and the exclusion filters applied to them.
"""
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd

from .config import analysis_defaults
from .models import FilterReport, FixationEvent, Measure, MeasureRow, StimulusToken, WordMeasures
from .report_renderer import ReportRenderer, write_report

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ItemKey = Tuple[str, int]

FIXATION_COLUMNS = ["subject_id", "sentence_id", "word_index", "order", "duration_ms", "landing_letter"]


def read_fixations(path: PathLike) -> List[FixationEvent]:
    """
    Read fixation events from TSV.

    Required columns are subject_id, sentence_id, word_index, order, duration_ms and
    landing_letter; an optional word_length column is carried along.
    """
    frame = pd.read_csv(path, sep="\t", dtype={"subject_id": str, "sentence_id": str})
    missing = set(FIXATION_COLUMNS) - set(frame.columns)
    if missing:
        raise ValueError(f"{path} lacks columns {sorted(missing)}")
    has_length = "word_length" in frame.columns
    events = []
    for record in frame.to_dict(orient="records"):
        length = record.get("word_length") if has_length else None
        events.append(FixationEvent(
            subject_id=str(record["subject_id"]),
            sentence_id=str(record["sentence_id"]),
            word_index=int(record["word_index"]),
            order=int(record["order"]),
            duration=float(record["duration_ms"]),
            landing_letter=int(record["landing_letter"]),
            word_length=None if length is None or pd.isna(length) else int(length),
        ))
    logger.info("read %d fixation events from %s", len(events), path)
    return events


def stimulus_word_lengths(stimuli: Iterable[StimulusToken]) -> Dict[ItemKey, int]:
    """Letter counts of the stimulus words, keyed by (sentence_id, word_index)."""
    return {(token.sentence_id, token.word_index): len(token.token) for token in stimuli}


def sentence_lengths(stimuli: Iterable[StimulusToken]) -> Dict[str, int]:
    lengths: Dict[str, int] = {}
    for token in stimuli:
        lengths[token.sentence_id] = max(lengths.get(token.sentence_id, 0), token.word_index)
    return lengths


def _trials(events: Iterable[FixationEvent]) -> "OrderedDict[Tuple[str, str], List[FixationEvent]]":
    trials: "OrderedDict[Tuple[str, str], List[FixationEvent]]" = OrderedDict()
    for event in events:
        trial = trials.setdefault((event.subject_id, event.sentence_id), [])
        if trial and event.order <= trial[-1].order:
            raise ValueError(
                f"unordered fixation events for subject {event.subject_id}, sentence {event.sentence_id}: "
                f"order {event.order} follows {trial[-1].order}")
        if event.duration <= 0:
            raise ValueError(f"fixation duration must be positive, got {event.duration}")
        if event.landing_letter < 1:
            raise ValueError(f"landing_letter is 1-based, got {event.landing_letter}")
        trial.append(event)
    return trials


def _word_measures(subject_id: str, sentence_id: str, word_index: int,
                   trial: Sequence[FixationEvent], word_length: Optional[int],
                   count_regression_entries: bool) -> WordMeasures:
    positions = [i for i, event in enumerate(trial) if event.word_index == word_index]
    first = positions[0]
    tvt = sum(trial[i].duration for i in positions)

    entered_by_regression = any(event.word_index > word_index for event in trial[:first])
    run_end = first
    while run_end + 1 < len(trial) and trial[run_end + 1].word_index == word_index:
        run_end += 1
    first_pass = trial[first:run_end + 1]

    if entered_by_regression and not count_regression_entries:
        gd = sfd = None
        first_pass_count = 0
    else:
        gd = sum(event.duration for event in first_pass)
        first_pass_count = len(first_pass)
        sfd = gd if first_pass_count == 1 else None

    length = trial[first].word_length or word_length
    landing = None
    if length:
        if trial[first].landing_letter > length:
            raise ValueError(
                f"landing letter {trial[first].landing_letter} beyond word length {length} "
                f"(sentence {sentence_id}, word {word_index})")
        landing = trial[first].landing_letter / length
    return WordMeasures(subject_id, sentence_id, word_index, sfd, gd, tvt, landing, first_pass_count)


def compute_measures(events: Iterable[FixationEvent],
                     word_lengths: Optional[Mapping[ItemKey, int]] = None,
                     count_regression_entries: bool = False) -> List[WordMeasures]:
    """
    Compute SFD, GD, TVT and landing position for every fixated word.

    The first pass on a word is the run of consecutive fixations starting at its
    first fixation. Words first fixated after a later word was already fixated
    are skipped in first pass: they get GD and SFD absent and TVT present, unless
    ``count_regression_entries`` is set.

    Args:
        events: Fixation events, temporally ordered within each (subject, sentence)
        word_lengths: Letter counts keyed by (sentence_id, word_index); an event's own
            word_length takes precedence
        count_regression_entries (bool): Treat a regression-initiated first fixation
            as a first pass

    Returns:
        List[WordMeasures]: One row per fixated word, in trial order

    Raises:
        ValueError: If events are out of order or carry invalid values
    """
    word_lengths = word_lengths or {}
    measures: List[WordMeasures] = []
    for (subject_id, sentence_id), trial in _trials(events).items():
        for word_index in sorted({event.word_index for event in trial}):
            measures.append(_word_measures(
                subject_id, sentence_id, word_index, trial,
                word_lengths.get((sentence_id, word_index)), count_regression_entries,
            ))
    logger.info("computed measures for %d fixated words", len(measures))
    return measures


def _value(row: Union[WordMeasures, MeasureRow], measure: Measure) -> Optional[float]:
    if isinstance(row, MeasureRow):
        return row.value if row.measure == measure else None
    return row.value(measure)


def filter_measures(table: Sequence[Union[WordMeasures, MeasureRow]], measure: Measure,
                    sentence_lengths: Mapping[str, int],
                    min_ms: float = analysis_defaults.MIN_FIXATION_MS,
                    cutoff_ms: Optional[float] = None) -> Tuple[List[MeasureRow], FilterReport]:
    """
    Keep observations with min_ms <= value < cutoff, outside sentence-first and -last words.

    Args:
        table: Word measures (or already filtered rows, which pass through unchanged)
        measure (Measure): Which measure to extract
        sentence_lengths: Number of words per sentence
        min_ms (float): Shortest kept duration
        cutoff_ms (Optional[float]): Durations at or above it are dropped; defaults to
            the configured cutoff of the measure

    Returns:
        Tuple[List[MeasureRow], FilterReport]: Kept rows and the drop counts
    """
    cutoff = analysis_defaults.MEASURE_CUTOFFS_MS[measure.value] if cutoff_ms is None else cutoff_ms
    report = FilterReport(measure)
    kept: List[MeasureRow] = []
    unknown_sentences = set()
    for row in table:
        length = sentence_lengths.get(row.sentence_id)
        if length is None:
            unknown_sentences.add(row.sentence_id)
        if row.word_index == 1 or row.word_index == length:
            report.dropped_boundary += 1
            continue
        value = _value(row, measure)
        if value is None:
            report.missing += 1
        elif value < min_ms:
            report.dropped_short += 1
        elif value >= cutoff:
            report.dropped_long += 1
        else:
            report.kept += 1
            kept.append(MeasureRow(row.subject_id, row.sentence_id, row.word_index, measure,
                                   float(value), row.landing_position))
    if unknown_sentences:
        logger.warning("no sentence length for %d sentences; only their first words were dropped",
                       len(unknown_sentences))
    logger.info("%s: kept %d, dropped %d short, %d long, %d boundary, %d missing", measure.value,
                report.kept, report.dropped_short, report.dropped_long, report.dropped_boundary, report.missing)
    return kept, report


def measure_frame(rows: Sequence[MeasureRow]) -> pd.DataFrame:
    """Filtered rows as a DataFrame (subject_id, sentence_id, word_index, value, landing_position)."""
    return pd.DataFrame.from_records(
        [{
            "subject_id": row.subject_id,
            "sentence_id": row.sentence_id,
            "word_index": row.word_index,
            "value": row.value,
            "landing_position": row.landing_position,
        } for row in rows],
        columns=["subject_id", "sentence_id", "word_index", "value", "landing_position"],
    )


def write_measures(rows: Sequence[MeasureRow], path: PathLike) -> Path:
    """Write filtered rows as TSV (subject_id, sentence_id, word_index, measure, value, landing_position)."""
    return write_report(path, ReportRenderer([]).render_measures(rows))
