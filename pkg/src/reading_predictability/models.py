"""
Data models for stimuli, eye-movement records and analysis results.
"""
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

SOURCES = ("ccp", "ngram", "topic", "rnn")
LANGUAGE_MODEL_SOURCES = ("ngram", "topic", "rnn")
POSITIONS = ("present", "last", "next")


class Measure(Enum):
    """Viewing-time measures."""
    SFD = "SFD"
    GD = "GD"
    TVT = "TVT"


def predictor_name(source: str, position: str) -> str:
    """Column name of a predictability score, e.g. ``ngram_last``."""
    return f"{source}_{position}"


@dataclass
class StimulusToken:
    """One word of a stimulus sentence (word_index is 1-based)."""
    sentence_id: str
    word_index: int
    token: str


@dataclass
class ClozeNorm:
    """Empirical cloze completion proportion of a stimulus word."""
    sentence_id: str
    word_index: int
    word: str
    ccp: float
    n_protocols: int = 83

    def __post_init__(self):
        if not 0.0 <= self.ccp <= 1.0:
            raise ValueError(f"ccp must lie in [0, 1], got {self.ccp}")
        if self.n_protocols < 1:
            raise ValueError(f"n_protocols must be >= 1, got {self.n_protocols}")


@dataclass
class RawScore:
    """Untransformed probabilities of one stimulus token."""
    sentence_id: str
    word_index: int
    token: str
    probabilities: Dict[str, Optional[float]]
    n_protocols: int = 83
    oov: Dict[str, bool] = field(default_factory=dict)
    missing_norm: bool = False

    @property
    def flagged(self) -> bool:
        return self.missing_norm or any(self.oov.values())


@dataclass
class PredictorRow:
    """Aligned present/last/next predictors of one target word."""
    sentence_id: str
    word_index: int
    token: str
    scores: Dict[str, Optional[float]]
    raw_scores: Dict[str, Optional[float]]
    covariates: Dict[str, Optional[float]]
    complete: bool = True

    def as_record(self) -> Dict[str, object]:
        record: Dict[str, object] = {
            "sentence_id": self.sentence_id,
            "word_index": self.word_index,
            "token": self.token,
        }
        record.update(self.covariates)
        record.update(self.scores)
        record.update({f"{name}_raw": value for name, value in self.raw_scores.items()})
        record["complete"] = self.complete
        return record


@dataclass
class FixationEvent:
    """A single fixation, ordered in time within its (subject, sentence) trial."""
    subject_id: str
    sentence_id: str
    word_index: int
    order: int
    duration: float
    landing_letter: int
    word_length: Optional[int] = None


@dataclass
class WordMeasures:
    """Viewing-time measures of one word for one subject."""
    subject_id: str
    sentence_id: str
    word_index: int
    sfd: Optional[float]
    gd: Optional[float]
    tvt: Optional[float]
    landing_position: Optional[float]
    first_pass_count: int

    def value(self, measure: Measure) -> Optional[float]:
        return getattr(self, measure.value.lower())


@dataclass
class MeasureRow:
    """A filtered observation of one measure."""
    subject_id: str
    sentence_id: str
    word_index: int
    measure: Measure
    value: float
    landing_position: Optional[float]


@dataclass
class FilterReport:
    """Row counts of a measure filter pass."""
    measure: Measure
    kept: int = 0
    dropped_short: int = 0
    dropped_long: int = 0
    dropped_boundary: int = 0
    missing: int = 0


@dataclass
class SmoothSpec:
    """Smooth term of a covariate."""
    covariate: str
    k: int = 10
    m: int = 2
    basis: str = "tp"

    def __post_init__(self):
        if self.k < 3:
            raise ValueError(f"basis rank k must be >= 3, got {self.k}")
        if self.m != 2:
            raise ValueError("only penalty order m=2 is supported")
        if self.basis not in ("tp", "cr"):
            raise ValueError(f"unknown basis '{self.basis}'")


@dataclass
class ModelComparison:
    """Analysis-of-deviance comparison of two fits."""
    delta_deviance: float
    delta_edf: float
    chi2: float
    p_value: float
    delta_r2_percent: float
    delta_gcv: float


@dataclass
class TermSummary:
    """Approximate significance of one model term."""
    term: str
    edf: float
    f_value: float
    p_value: float


@dataclass
class PartialEffect:
    """Partial effect of a term over a covariate grid."""
    term: str
    grid: np.ndarray
    effect: np.ndarray
    se: np.ndarray
    linear_predictor: np.ndarray


@dataclass
class LadderRow:
    """One row of a predictor ladder table."""
    label: str
    source: str
    step: str
    gcv: Optional[float] = None
    r2_adj: Optional[float] = None
    delta_r2_percent: Optional[float] = None
    delta_deviance: Optional[float] = None
    delta_edf: Optional[float] = None
    chi2: Optional[float] = None
    p_value: Optional[float] = None
    significant: bool = False
    deviance: Optional[float] = None
    edf: Optional[float] = None
    failed: bool = False
    error: Optional[str] = None


@dataclass
class AnalysisConfig:
    """Inputs and settings of an analysis run."""
    stimuli: Path
    fixations: Path
    output_dir: Path
    norms: Optional[Path] = None
    ngram_model: Optional[Path] = None
    topic_model: Optional[Path] = None
    rnn_model: Optional[Path] = None
    frequencies: Optional[Path] = None
    measures: List[Measure] = field(default_factory=lambda: list(Measure))
    baseline: List[str] = field(default_factory=list)
    sources: List[str] = field(default_factory=lambda: list(SOURCES))
    seed: int = 1
    n_protocols: int = 83
    smooth_k: int = 10
    basis: str = "tp"
    fold_in_sweeps: int = 20
    fold_in_samples: int = 10
    gcv_max_outer: int = 20
    workers: int = 1
    lowercase: bool = True
    strip_punctuation: bool = True


@dataclass
class ReportBundle:
    """All tables, curves and bookkeeping of an analysis run."""
    correlations: pd.DataFrame = field(default_factory=pd.DataFrame)
    score_ranges: List[Dict[str, object]] = field(default_factory=list)
    ladders: Dict[str, List[LadderRow]] = field(default_factory=dict)
    head_to_head: Dict[str, List[LadderRow]] = field(default_factory=dict)
    all_predictors: Dict[str, List[TermSummary]] = field(default_factory=dict)
    curves: Dict[str, PartialEffect] = field(default_factory=dict)
    filter_reports: List[FilterReport] = field(default_factory=list)
    term_kinds: Dict[str, str] = field(default_factory=dict)
    manifest: Dict[str, str] = field(default_factory=dict)
