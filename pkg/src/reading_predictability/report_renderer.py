"""
Module for rendering analysis tables as TSV/CSV text.
"""
import csv
import math
from io import StringIO
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd

from .models import (
    POSITIONS,
    FilterReport,
    LadderRow,
    MeasureRow,
    PartialEffect,
    PredictorRow,
    TermSummary,
    predictor_name,
)

MISSING = "NA"

PREDICTOR_COVARIATES = [f"{kind}_{position}" for kind in ("length", "frequency") for position in POSITIONS]

LADDER_HEADER = [
    "label", "source", "step", "gcv", "r2_adj", "delta_r2_percent", "delta_deviance",
    "delta_edf", "chi2", "p_value", "significant", "deviance_df", "deviance", "edf", "failed", "error",
]


def format_value(value: object) -> str:
    """Render a cell: floats with 10 significant digits, missing values as NA."""
    if value is None:
        return MISSING
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return MISSING if math.isnan(value) else format(value, ".10g")
    return str(value)


def deviance_entry(row: LadderRow) -> str:
    """Compact "deviance (df)" cell with a star for significant increments."""
    if row.failed or row.delta_deviance is None:
        return MISSING if row.failed else ""
    star = "*" if row.significant else ""
    return f"{row.delta_deviance:.0f} ({row.delta_edf:.1f}){star}"


class ReportRenderer:
    """Renders analysis results in tab-separated (and curve CSV) formats."""

    def __init__(self, sources: Sequence[str]):
        """
        Initialize the renderer.

        Args:
            sources: Predictability sources in report column order
        """
        self.sources = list(sources)

    def _init_csv_writer(self, delimiter: str = "\t") -> Tuple[StringIO, csv.writer]:
        """Initialize a CSV writer with an in-memory buffer."""
        output_buffer = StringIO()
        csv_writer = csv.writer(
            output_buffer,
            delimiter=delimiter,
            quotechar='"',
            quoting=csv.QUOTE_MINIMAL,
            lineterminator="\n",
        )
        return output_buffer, csv_writer

    def predictor_columns(self) -> List[str]:
        names = [predictor_name(source, position) for source in self.sources for position in POSITIONS]
        return names + [f"{name}_raw" for name in names]

    def render_predictors(self, rows: Iterable[PredictorRow]) -> str:
        """
        Render the predictor table.

        Columns: sentence_id, word_index, token, the six length/frequency covariates,
        the transformed scores (source x position), the raw scores and ``complete``.
        """
        buffer, writer = self._init_csv_writer()
        columns = ["sentence_id", "word_index", "token"] + PREDICTOR_COVARIATES + self.predictor_columns()
        writer.writerow(columns + ["complete"])
        for row in rows:
            record = row.as_record()
            writer.writerow([format_value(record.get(column)) for column in columns]
                            + [format_value(row.complete)])
        return buffer.getvalue()

    def render_measures(self, rows: Iterable[MeasureRow]) -> str:
        buffer, writer = self._init_csv_writer()
        writer.writerow(["subject_id", "sentence_id", "word_index", "measure", "value", "landing_position"])
        for row in rows:
            writer.writerow([row.subject_id, row.sentence_id, row.word_index, row.measure.value,
                             format_value(row.value), format_value(row.landing_position)])
        return buffer.getvalue()

    def render_filter_reports(self, reports: Iterable[FilterReport]) -> str:
        buffer, writer = self._init_csv_writer()
        writer.writerow(["measure", "kept", "dropped_short", "dropped_long", "dropped_boundary", "missing"])
        for report in reports:
            writer.writerow([report.measure.value, report.kept, report.dropped_short, report.dropped_long,
                             report.dropped_boundary, report.missing])
        return buffer.getvalue()

    def render_score_ranges(self, summary: Iterable[Mapping[str, object]]) -> str:
        buffer, writer = self._init_csv_writer()
        writer.writerow(["source", "n", "min", "max", "median"])
        for entry in summary:
            writer.writerow([format_value(entry[column]) for column in ("source", "n", "min", "max", "median")])
        return buffer.getvalue()

    def render_correlations(self, matrix: pd.DataFrame) -> str:
        """Render a correlation matrix with a leading ``variable`` column."""
        buffer, writer = self._init_csv_writer()
        writer.writerow(["variable"] + [str(column) for column in matrix.columns])
        for name, values in matrix.iterrows():
            writer.writerow([str(name)] + [format_value(float(value)) for value in values])
        return buffer.getvalue()

    def render_ladder(self, rows: Iterable[LadderRow]) -> str:
        """Render ladder or head-to-head rows."""
        buffer, writer = self._init_csv_writer()
        writer.writerow(LADDER_HEADER)
        for row in rows:
            writer.writerow([
                row.label, row.source, row.step,
                format_value(row.gcv), format_value(row.r2_adj), format_value(row.delta_r2_percent),
                format_value(row.delta_deviance), format_value(row.delta_edf), format_value(row.chi2),
                format_value(row.p_value), format_value(row.significant), deviance_entry(row),
                format_value(row.deviance), format_value(row.edf), format_value(row.failed),
                row.error or "",
            ])
        return buffer.getvalue()

    def render_term_summaries(self, summaries: Iterable[TermSummary],
                              kinds: Optional[Mapping[str, str]] = None) -> str:
        buffer, writer = self._init_csv_writer()
        writer.writerow(["term", "kind", "edf", "f_value", "p_value"])
        kinds = kinds or {}
        for summary in summaries:
            writer.writerow([summary.term, kinds.get(summary.term, "smooth"), format_value(summary.edf),
                             format_value(summary.f_value), format_value(summary.p_value)])
        return buffer.getvalue()

    def render_curve(self, effect: PartialEffect) -> str:
        """Comma-separated partial-effect curve: grid, effect, se, linear_predictor."""
        buffer, writer = self._init_csv_writer(delimiter=",")
        writer.writerow(["grid", "effect", "se", "linear_predictor"])
        for values in zip(effect.grid, effect.effect, effect.se, effect.linear_predictor):
            writer.writerow([format_value(float(value)) for value in values])
        return buffer.getvalue()

    def render_manifest(self, entries: Mapping[str, str]) -> str:
        """``key = value`` lines in key order."""
        return "".join(f"{key} = {entries[key]}\n" for key in sorted(entries))


def write_report(path: Union[str, Path], content: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(content)
    return path
