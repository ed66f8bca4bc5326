"""
Tests for cloze transforms, stimulus scoring and predictor alignment.
"""
import math

import pytest

from reading_predictability.corpus import Vocabulary
from reading_predictability.models import ClozeNorm, StimulusToken
from reading_predictability.ngram import count_ngrams, estimate_kn
from reading_predictability.scoring import (
    ScoringSettings,
    align_predictors,
    group_sentences,
    logit_ccp,
    predictor_frame,
    read_norms,
    read_stimuli,
    score_stimuli,
    summarize_scores,
)
from test_data import raw_score


@pytest.mark.parametrize("ccp,n_protocols,expected", [
    (0.5, 83, 0.0),
    (0.0, 83, -2.553),
    (1.0, 83, 2.553),
    (1 / 166, 83, -2.553),
    (0.9, 83, 0.5 * math.log(9.0)),
    (0.0, 1, 0.0),
])
def test_logit_ccp(ccp, n_protocols, expected):
    """Test the logit transform including the 0 and 1 replacements."""
    assert logit_ccp(ccp, n_protocols) == pytest.approx(expected, abs=1e-3)


@pytest.mark.parametrize("ccp,n_protocols", [(-0.1, 83), (1.2, 83), (0.5, 0)])
def test_logit_ccp_invalid(ccp, n_protocols):
    """Test rejection of proportions outside [0, 1] and of n < 1."""
    with pytest.raises(ValueError):
        logit_ccp(ccp, n_protocols)


def test_logit_ccp_is_monotone():
    """Test that higher proportions give higher scores."""
    values = [logit_ccp(k / 83) for k in range(84)]
    assert all(low <= high for low, high in zip(values, values[1:]))


def test_cloze_norm_validation():
    """Test that norms outside [0, 1] are rejected."""
    with pytest.raises(ValueError):
        ClozeNorm("s1", 2, "cat", 1.5)


def test_read_stimuli_normalizes_tokens(tmp_path):
    """Test stimulus reading with corpus tokenizer rules."""
    path = tmp_path / "stimuli.tsv"
    path.write_text("sentence_id\tword_index\ttoken\ns1\t1\tThe\ns1\t2\tcat.\n", encoding="utf-8")
    assert read_stimuli(path) == [StimulusToken("s1", 1, "the"), StimulusToken("s1", 2, "cat")]


def test_read_norms(tmp_path):
    """Test norm reading with and without a protocol column."""
    path = tmp_path / "norms.tsv"
    path.write_text("sentence_id\tword_index\tword\tccp\ns1\t2\tcat\t0.25\n", encoding="utf-8")
    norms = read_norms(path, n_protocols=40)
    assert norms[("s1", 2)] == ClozeNorm("s1", 2, "cat", 0.25, 40)


def test_group_sentences_requires_dense_indices():
    """Test that gaps in word indices are rejected."""
    with pytest.raises(ValueError):
        group_sentences([StimulusToken("s1", 1, "a"), StimulusToken("s1", 3, "b")])


def test_score_stimuli_flags_unknown_and_missing(tiny_corpus):
    """Test model probabilities, unknown-word flags and missing norms."""
    model = estimate_kn(count_ngrams(tiny_corpus, 3))
    stimuli = [StimulusToken("s1", i, word) for i, word in enumerate(["the", "zebra", "sat"], start=1)]
    norms = {("s1", 1): ClozeNorm("s1", 1, "the", 0.4), ("s1", 3): ClozeNorm("s1", 3, "sat", 0.1)}
    scores = score_stimuli(stimuli, {"ngram": model}, norms, ScoringSettings())
    assert [s.word_index for s in scores] == [1, 2, 3]
    the_id = tiny_corpus.vocab.id_of("the")
    assert scores[0].probabilities["ngram"] == pytest.approx(model.prob(the_id, []))
    assert scores[0].probabilities["ccp"] == 0.4
    assert scores[1].oov["ngram"] and scores[1].missing_norm and scores[1].flagged
    assert not scores[2].flagged


def test_score_stimuli_rejects_unknown_source(tiny_corpus):
    """Test that only language model sources are accepted as models."""
    with pytest.raises(ValueError):
        score_stimuli([StimulusToken("s1", 1, "the")], {"ccp": object()}, {})


def test_align_predictors_positions():
    """Test present/last/next alignment, transforms and covariates."""
    words = ["the", "big", "cat", "sat"]
    probabilities = [0.1, 0.01, 0.001, 0.0001]
    raw = [raw_score("s1", i, word, p, ccp=0.5) for i, (word, p) in enumerate(zip(words, probabilities), start=1)]
    frequencies = Vocabulary(("the", "cat", "big", "sat"), (64, 16, 8, 4))
    rows = align_predictors(raw, frequencies, ["ccp", "ngram"])
    assert [row.word_index for row in rows] == [2, 3]
    first = rows[0]
    assert first.token == "big"
    assert first.scores["ngram_present"] == pytest.approx(-2.0)
    assert first.scores["ngram_last"] == pytest.approx(-1.0)
    assert first.scores["ngram_next"] == pytest.approx(-3.0)
    assert first.scores["ccp_present"] == pytest.approx(0.0)
    assert first.raw_scores["ngram_next"] == pytest.approx(0.001)
    assert first.covariates["length_present"] == 3
    assert first.covariates["frequency_present"] == 3
    assert first.covariates["frequency_last"] == 0
    assert first.complete


def test_align_predictors_marks_incomplete_rows():
    """Test that an unknown neighbour makes the row incomplete."""
    raw = [raw_score("s1", 1, "a", 0.1), raw_score("s1", 2, "b", 0.1),
           raw_score("s1", 3, "c", 0.1, oov=True), raw_score("s1", 4, "d", 0.1), raw_score("s1", 5, "e", 0.1)]
    frequencies = Vocabulary(("a", "b", "d", "e"), (4, 3, 2, 1))
    rows = align_predictors(raw, frequencies, ["ngram"])
    assert [row.complete for row in rows] == [False, False, False]
    assert rows[1].scores["ngram_present"] is None
    # unknown to the frequency list counts as a hapax
    assert rows[1].covariates["frequency_present"] == 2


def test_align_predictors_skips_short_sentences():
    """Test that sentences of fewer than three words give no rows."""
    raw = [raw_score("s1", 1, "a", 0.1), raw_score("s1", 2, "b", 0.1)]
    assert align_predictors(raw, Vocabulary(("a", "b"), (2, 1)), ["ngram"]) == []


def test_predictor_frame_filters_incomplete():
    """Test the DataFrame view with and without incomplete rows."""
    raw = [raw_score("s1", i, w, 0.1) for i, w in enumerate("abcd", start=1)]
    raw[3] = raw_score("s1", 4, "d", 0.1, oov=True)
    rows = align_predictors(raw, Vocabulary(tuple("abcd"), (4, 3, 2, 1)), ["ngram"])
    assert len(predictor_frame(rows)) == 1
    assert len(predictor_frame(rows, complete_only=False)) == 2
    assert "ngram_present_raw" in predictor_frame(rows).columns


def test_summarize_scores():
    """Test per-source ranges over scored tokens."""
    raw = [raw_score("s1", 1, "a", 0.1), raw_score("s1", 2, "b", 0.3), raw_score("s1", 3, "c", 0.2, oov=True)]
    summary = {entry["source"]: entry for entry in summarize_scores(raw, ["ngram"])}
    assert summary["ngram"] == {"source": "ngram", "n": 2, "min": 0.1, "max": 0.3, "median": pytest.approx(0.2)}
