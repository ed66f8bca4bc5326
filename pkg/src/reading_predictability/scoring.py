"""
Predictability scores of stimulus words: cloze transform, per-model probabilities
and the present/last/next predictor table.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from . import ngram, rnn, topics
from .config import analysis_defaults
from .corpus import TokenizerRules, Vocabulary, frequency_class, tokenize
from .models import (
    LANGUAGE_MODEL_SOURCES,
    POSITIONS,
    SOURCES,
    ClozeNorm,
    PredictorRow,
    RawScore,
    StimulusToken,
    predictor_name,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ItemKey = Tuple[str, int]

# Shift of each position relative to the target word
POSITION_OFFSETS = {"present": 0, "last": -1, "next": 1}


@dataclass
class ScoringSettings:
    """Knobs of the model queries that are not part of the models themselves."""
    fold_in_sweeps: int = analysis_defaults.FOLD_IN_SWEEPS
    fold_in_samples: int = analysis_defaults.FOLD_IN_SAMPLES
    seed: int = analysis_defaults.SEED
    n_protocols: int = analysis_defaults.N_PROTOCOLS


def logit_ccp(ccp: float, n_protocols: int = analysis_defaults.N_PROTOCOLS) -> float:
    """
    Logit transform of a cloze completion probability.

    Proportions of 0 and 1 are replaced by 1/(2n) and 1 - 1/(2n) before
    computing 0.5 * ln(p / (1 - p)).

    Args:
        ccp (float): Completion proportion in [0, 1]
        n_protocols (int): Number of norming protocols n

    Returns:
        float: The transformed value

    Raises:
        ValueError: If n_protocols < 1 or ccp lies outside [0, 1]
    """
    if n_protocols < 1:
        raise ValueError(f"n_protocols must be >= 1, got {n_protocols}")
    if not 0.0 <= ccp <= 1.0:
        raise ValueError(f"ccp must lie in [0, 1], got {ccp}")
    floor = 1.0 / (2 * n_protocols)
    p = min(max(ccp, floor), 1.0 - floor)
    return 0.5 * math.log(p / (1.0 - p))


def normalize_token(raw: str, rules: Optional[TokenizerRules] = None) -> str:
    """Apply the corpus tokenizer rules to one stimulus word."""
    tokens = tokenize(raw, rules)
    return tokens[0] if tokens else raw.strip()


def read_stimuli(path: PathLike, rules: Optional[TokenizerRules] = None) -> List[StimulusToken]:
    """
    Read a stimulus TSV with columns sentence_id, word_index, token.

    Tokens are normalized with the same rules as the training corpora.
    """
    frame = pd.read_csv(path, sep="\t", dtype={"sentence_id": str, "token": str}, keep_default_na=False)
    missing = {"sentence_id", "word_index", "token"} - set(frame.columns)
    if missing:
        raise ValueError(f"{path} lacks columns {sorted(missing)}")
    stimuli = [
        StimulusToken(row.sentence_id, int(row.word_index), normalize_token(row.token, rules))
        for row in frame.itertuples(index=False)
    ]
    logger.info("read %d stimulus tokens from %s", len(stimuli), path)
    return stimuli


def read_norms(path: PathLike, n_protocols: int = analysis_defaults.N_PROTOCOLS) -> Dict[ItemKey, ClozeNorm]:
    """
    Read cloze norms (sentence_id, word_index, ccp[, n_protocols][, word]).

    Rows without an n_protocols column use the given default.
    """
    frame = pd.read_csv(path, sep="\t", dtype={"sentence_id": str}, keep_default_na=False)
    missing = {"sentence_id", "word_index", "ccp"} - set(frame.columns)
    if missing:
        raise ValueError(f"{path} lacks columns {sorted(missing)}")
    norms = {}
    for record in frame.to_dict(orient="records"):
        norm = ClozeNorm(
            sentence_id=str(record["sentence_id"]),
            word_index=int(record["word_index"]),
            word=str(record.get("word", "")),
            ccp=float(record["ccp"]),
            n_protocols=int(record.get("n_protocols", n_protocols)),
        )
        norms[(norm.sentence_id, norm.word_index)] = norm
    return norms


def group_sentences(stimuli: Sequence[StimulusToken]) -> Dict[str, List[StimulusToken]]:
    """Group stimulus tokens by sentence, ordered by word_index, in first-seen sentence order."""
    sentences: Dict[str, List[StimulusToken]] = {}
    for token in stimuli:
        sentences.setdefault(token.sentence_id, []).append(token)
    for sentence_id, tokens in sentences.items():
        tokens.sort(key=lambda t: t.word_index)
        indices = [t.word_index for t in tokens]
        if indices != list(range(1, len(tokens) + 1)):
            raise ValueError(f"sentence {sentence_id} word indices are not 1..{len(tokens)}")
    return sentences


def _model_probabilities(source: str, model, words: Sequence[str],
                         settings: ScoringSettings) -> List[Optional[float]]:
    token_ids = model.encode(words)
    if source == "ngram":
        logs = ngram.score_sentence(model, token_ids)
    elif source == "rnn":
        logs = rnn.score_sentence(model, token_ids)
    elif source == "topic":
        return topics.score_sentence(model, token_ids, settings.fold_in_sweeps,
                                     settings.fold_in_samples, settings.seed)
    else:
        raise ValueError(f"unknown language model source '{source}'")
    return [None if value is None else 10.0 ** value for value in logs]


def score_stimuli(stimuli: Sequence[StimulusToken], models: Mapping[str, object],
                  norms: Mapping[ItemKey, ClozeNorm],
                  settings: Optional[ScoringSettings] = None) -> List[RawScore]:
    """
    Raw probabilities of every stimulus token under each model plus its cloze norm.

    Args:
        stimuli: Stimulus tokens, normalized like the training corpora
        models: Trained models keyed by source ("ngram", "topic", "rnn")
        norms: Cloze norms keyed by (sentence_id, word_index)
        settings (Optional[ScoringSettings]): Fold-in and protocol settings

    Returns:
        List[RawScore]: One entry per token; out-of-vocabulary tokens and tokens
        without a norm are flagged rather than scored
    """
    settings = settings or ScoringSettings()
    unknown = set(models) - set(LANGUAGE_MODEL_SOURCES)
    if unknown:
        raise ValueError(f"unknown model sources {sorted(unknown)}")
    scores: List[RawScore] = []
    for sentence_id, tokens in group_sentences(stimuli).items():
        words = [token.token for token in tokens]
        per_source = {source: _model_probabilities(source, model, words, settings)
                      for source, model in models.items()}
        for position, token in enumerate(tokens):
            norm = norms.get((sentence_id, token.word_index))
            probabilities = {"ccp": norm.ccp if norm else None}
            oov = {}
            for source in models:
                probabilities[source] = per_source[source][position]
                oov[source] = probabilities[source] is None
            scores.append(RawScore(
                sentence_id=sentence_id,
                word_index=token.word_index,
                token=token.token,
                probabilities=probabilities,
                n_protocols=norm.n_protocols if norm else settings.n_protocols,
                oov=oov,
                missing_norm=norm is None,
            ))
    flagged = sum(score.flagged for score in scores)
    if flagged:
        logger.warning("%d of %d stimulus tokens are out of vocabulary or lack a norm", flagged, len(scores))
    return scores


def _transform(source: str, score: RawScore) -> Optional[float]:
    value = score.probabilities.get(source)
    if value is None:
        return None
    if source == "ccp":
        return logit_ccp(value, score.n_protocols)
    return math.log10(value)


def _unusable(score: RawScore, sources: Sequence[str]) -> bool:
    if "ccp" in sources and score.missing_norm:
        return True
    return any(score.oov.get(source, True) for source in sources if source != "ccp")


def _frequency(word: str, frequencies: Vocabulary) -> int:
    # Words missing from the frequency list count as hapaxes
    if word in frequencies:
        return frequency_class(word, frequencies)
    return int(math.floor(math.log2(frequencies.f_max) + 0.5))


def align_predictors(raw_scores: Sequence[RawScore], frequencies: Vocabulary,
                     sources: Sequence[str] = SOURCES) -> List[PredictorRow]:
    """
    Build present/last/next predictor rows for the interior words of every sentence.

    Model probabilities are log10 transformed, cloze proportions logit transformed.
    A row is incomplete when any of its three words is unknown to a model or has no
    norm.

    Args:
        raw_scores: Output of score_stimuli
        frequencies (Vocabulary): Reference counts for the frequency classes
        sources: Predictability sources to include

    Returns:
        List[PredictorRow]: Rows for word indices 2..L-1
    """
    by_sentence: Dict[str, List[RawScore]] = {}
    for score in raw_scores:
        by_sentence.setdefault(score.sentence_id, []).append(score)

    rows: List[PredictorRow] = []
    for sentence_id, scores in by_sentence.items():
        scores = sorted(scores, key=lambda s: s.word_index)
        if len(scores) < 3:
            logger.warning("sentence %s has %d words; no predictor rows", sentence_id, len(scores))
            continue
        for i in range(1, len(scores) - 1):
            transformed: Dict[str, Optional[float]] = {}
            raw: Dict[str, Optional[float]] = {}
            covariates: Dict[str, Optional[float]] = {}
            complete = True
            for position in POSITIONS:
                neighbour = scores[i + POSITION_OFFSETS[position]]
                covariates[f"length_{position}"] = len(neighbour.token)
                covariates[f"frequency_{position}"] = _frequency(neighbour.token, frequencies)
                complete = complete and not _unusable(neighbour, sources)
                for source in sources:
                    name = predictor_name(source, position)
                    raw[name] = neighbour.probabilities.get(source)
                    transformed[name] = _transform(source, neighbour)
            target = scores[i]
            rows.append(PredictorRow(
                sentence_id=sentence_id,
                word_index=target.word_index,
                token=target.token,
                scores=transformed,
                raw_scores=raw,
                covariates=covariates,
                complete=complete,
            ))
    logger.info("aligned %d predictor rows (%d complete)", len(rows), sum(row.complete for row in rows))
    return rows


def summarize_scores(raw_scores: Sequence[RawScore], sources: Sequence[str] = SOURCES) -> List[Dict[str, object]]:
    """Minimum, maximum and median raw probability per source over the scored tokens."""
    summary = []
    for source in sources:
        values = np.array([s.probabilities[source] for s in raw_scores
                           if s.probabilities.get(source) is not None], dtype=np.float64)
        summary.append({
            "source": source,
            "n": int(values.size),
            "min": float(values.min()) if values.size else None,
            "max": float(values.max()) if values.size else None,
            "median": float(np.median(values)) if values.size else None,
        })
    return summary


def predictor_frame(rows: Sequence[PredictorRow], complete_only: bool = True) -> pd.DataFrame:
    """Predictor rows as a DataFrame with one column per covariate, score and raw score."""
    records = [row.as_record() for row in rows if row.complete or not complete_only]
    return pd.DataFrame.from_records(records)
