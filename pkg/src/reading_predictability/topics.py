"""
LDA topic model trained by collapsed Gibbs sampling, with fold-in inference of
sentence histories at retrieval time.
"""
import csv
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import analysis_defaults
from .corpus import OutOfVocabularyError, SentenceCorpus, Vocabulary
from .serialization import read_model_file, vocabulary_arrays, vocabulary_from_arrays, write_model_file

logger = logging.getLogger(__name__)

MAGIC = "LPLD1"


@dataclass
class LdaModel:
    """Topic-word statistics of a trained LDA model."""
    n_topics: int
    alpha: float
    beta: float
    vocab: Vocabulary
    topic_word_counts: np.ndarray
    topic_totals: np.ndarray

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @cached_property
    def topic_word_probs(self) -> np.ndarray:
        """N x V matrix of p(w|z) = (n_zw + beta) / (n_z + V beta)."""
        numerator = self.topic_word_counts + self.beta
        return numerator / (self.topic_totals[:, None] + self.vocab_size * self.beta)

    @cached_property
    def word_topic_probs(self) -> np.ndarray:
        return np.ascontiguousarray(self.topic_word_probs.T)

    def encode(self, tokens: Sequence[str]) -> List[Optional[int]]:
        return self.vocab.encode(tokens)


@dataclass
class GibbsState:
    """Token-topic assignments and the count tables they imply."""
    documents: List[np.ndarray]
    assignments: List[np.ndarray]
    doc_topic: np.ndarray
    word_topic: np.ndarray
    topic_totals: np.ndarray
    seed: int

    @property
    def topic_word(self) -> np.ndarray:
        return self.word_topic.T

    @property
    def n_tokens(self) -> int:
        return int(sum(len(doc) for doc in self.documents))

    def recount(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Tally (doc_topic, topic_word, topic_totals) from the assignment vectors."""
        n_topics = self.doc_topic.shape[1]
        doc_topic = np.zeros_like(self.doc_topic)
        word_topic = np.zeros_like(self.word_topic)
        for d, (doc, z) in enumerate(zip(self.documents, self.assignments)):
            doc_topic[d] = np.bincount(z, minlength=n_topics)
            np.add.at(word_topic, (doc, z), 1)
        return doc_topic, word_topic.T, word_topic.sum(axis=0)

    def is_consistent(self) -> bool:
        doc_topic, topic_word, totals = self.recount()
        return (np.array_equal(doc_topic, self.doc_topic)
                and np.array_equal(topic_word, self.topic_word)
                and np.array_equal(totals, self.topic_totals))


def _draw(weights: np.ndarray, uniform: float) -> int:
    cumulative = np.cumsum(weights)
    k = int(np.searchsorted(cumulative, uniform * cumulative[-1], side="right"))
    return min(k, len(weights) - 1)


def train_lda(corpus: SentenceCorpus,
              n_topics: int = analysis_defaults.LDA_TOPICS,
              alpha: float = analysis_defaults.LDA_ALPHA,
              beta: float = analysis_defaults.LDA_BETA,
              sweeps: int = analysis_defaults.LDA_SWEEPS,
              seed: int = analysis_defaults.SEED,
              callback: Optional[Callable[[int, GibbsState], None]] = None) -> LdaModel:
    """
    Train LDA by collapsed Gibbs sampling.

    Each sweep resamples every token's topic from
    p(z|.) ~ (n_dz + alpha)(n_zw + beta)/(n_z + V beta) with the token's own
    assignment removed. The model keeps the final-state topic-word counts.

    Args:
        corpus (SentenceCorpus): Training sentences grouped into documents
        n_topics (int): Number of topics N
        alpha (float): Symmetric document-topic prior
        beta (float): Symmetric topic-word prior
        sweeps (int): Full Gibbs sweeps
        seed (int): Random seed
        callback: Called as callback(sweep, state) after every sweep

    Returns:
        LdaModel: The trained model

    Raises:
        ValueError: If there are no documents, N < 2 or sweeps < 1
    """
    documents = [doc for doc in corpus.documents() if len(doc)]
    if not documents:
        raise ValueError("empty document set")
    if n_topics < 2:
        raise ValueError(f"need at least 2 topics, got {n_topics}")
    if sweeps < 1:
        raise ValueError(f"sweeps must be >= 1, got {sweeps}")

    vocab_size = len(corpus.vocab)
    rng = np.random.default_rng(seed)
    assignments = [rng.integers(n_topics, size=len(doc)) for doc in documents]
    state = GibbsState(
        documents=documents,
        assignments=assignments,
        doc_topic=np.zeros((len(documents), n_topics), dtype=np.int64),
        word_topic=np.zeros((vocab_size, n_topics), dtype=np.int64),
        topic_totals=np.zeros(n_topics, dtype=np.int64),
        seed=seed,
    )
    state.doc_topic, topic_word, state.topic_totals = state.recount()
    state.word_topic = np.ascontiguousarray(topic_word.T)

    denominator_offset = vocab_size * beta
    for sweep in range(1, sweeps + 1):
        word_topic, totals = state.word_topic, state.topic_totals
        for d, doc in enumerate(documents):
            z = state.assignments[d]
            doc_counts = state.doc_topic[d]
            uniforms = rng.random(len(doc))
            for i, w in enumerate(doc.tolist()):
                k = z[i]
                doc_counts[k] -= 1
                word_topic[w, k] -= 1
                totals[k] -= 1
                weights = (doc_counts + alpha) * (word_topic[w] + beta) / (totals + denominator_offset)
                k = _draw(weights, uniforms[i])
                z[i] = k
                doc_counts[k] += 1
                word_topic[w, k] += 1
                totals[k] += 1
        if callback is not None:
            callback(sweep, state)
        if sweep % 100 == 0:
            logger.info("gibbs sweep %d/%d", sweep, sweeps)

    return LdaModel(
        n_topics=n_topics,
        alpha=alpha,
        beta=beta,
        vocab=corpus.vocab,
        topic_word_counts=np.ascontiguousarray(state.topic_word).copy(),
        topic_totals=state.topic_totals.copy(),
    )


def _known_tokens(model: LdaModel, history: Sequence[Optional[int]]) -> List[int]:
    return [t for t in history if t is not None and 0 <= t < model.vocab_size]


def infer_theta(model: LdaModel, history: Sequence[Optional[int]],
                fold_in_sweeps: int = analysis_defaults.FOLD_IN_SWEEPS,
                samples: int = analysis_defaults.FOLD_IN_SAMPLES,
                seed: int = analysis_defaults.SEED) -> np.ndarray:
    """
    Fold a history in as a new document and estimate its topic distribution.

    Topic-word counts stay fixed. theta = (n_dz + alpha)/(|history| + N alpha),
    averaged over the last ``samples`` sweeps. Unknown tokens are dropped.

    Returns:
        np.ndarray: theta, summing to 1
    """
    tokens = _known_tokens(model, history)
    if len(tokens) != len(history):
        logger.warning("dropped %d out-of-vocabulary history tokens", len(history) - len(tokens))
    n_topics = model.n_topics
    if not tokens:
        return np.full(n_topics, 1.0 / n_topics)
    if fold_in_sweeps < 1:
        raise ValueError(f"fold_in_sweeps must be >= 1, got {fold_in_sweeps}")
    samples = max(1, min(samples, fold_in_sweeps))

    word_topic = model.word_topic_probs
    rng = np.random.default_rng(seed)
    z = rng.integers(n_topics, size=len(tokens))
    doc_counts = np.bincount(z, minlength=n_topics)
    normalizer = len(tokens) + n_topics * model.alpha
    theta = np.zeros(n_topics)
    for sweep in range(fold_in_sweeps):
        uniforms = rng.random(len(tokens))
        for i, w in enumerate(tokens):
            doc_counts[z[i]] -= 1
            k = _draw((doc_counts + model.alpha) * word_topic[w], uniforms[i])
            z[i] = k
            doc_counts[k] += 1
        if sweep >= fold_in_sweeps - samples:
            theta += (doc_counts + model.alpha) / normalizer
    return theta / samples


def word_distribution(model: LdaModel, theta: np.ndarray) -> np.ndarray:
    """Mixture sum_i p(w|z_i) theta_i for every word of the vocabulary."""
    return model.word_topic_probs @ theta


def mixture_word_prob(model: LdaModel, w: int, theta: np.ndarray) -> float:
    if not 0 <= w < model.vocab_size:
        raise OutOfVocabularyError(f"out of vocabulary: id {w}")
    return float(model.word_topic_probs[w] @ theta)


def topic_word_prob(model: LdaModel, w: int, history: Sequence[Optional[int]],
                    fold_in_sweeps: int = analysis_defaults.FOLD_IN_SWEEPS,
                    samples: int = analysis_defaults.FOLD_IN_SAMPLES,
                    seed: int = analysis_defaults.SEED,
                    include_current_word: bool = True) -> float:
    """
    Probability of w given its sentence history.

    The inference document is the history plus the current word itself, so the
    word takes part in estimating the topic mixture it is scored under.

    Raises:
        OutOfVocabularyError: If w is not in the vocabulary
    """
    if w is None or not 0 <= w < model.vocab_size:
        raise OutOfVocabularyError(f"out of vocabulary: id {w}")
    document = list(history) + ([w] if include_current_word else [])
    theta = infer_theta(model, document, fold_in_sweeps, samples, seed)
    return mixture_word_prob(model, w, theta)


def score_sentence(model: LdaModel, tokens: Sequence[Optional[int]],
                   fold_in_sweeps: int = analysis_defaults.FOLD_IN_SWEEPS,
                   samples: int = analysis_defaults.FOLD_IN_SAMPLES,
                   seed: int = analysis_defaults.SEED) -> List[Optional[float]]:
    """Per-token topic probabilities; unknown tokens get None and leave the history."""
    scores: List[Optional[float]] = []
    history: List[int] = []
    for token in tokens:
        if token is None or not 0 <= token < model.vocab_size:
            scores.append(None)
            continue
        scores.append(topic_word_prob(model, token, history, fold_in_sweeps, samples, seed))
        history.append(token)
    return scores


def save_lda_model(model: LdaModel, path: Union[str, Path]) -> None:
    write_model_file(path, MAGIC, {
        "n_topics": np.array(model.n_topics),
        "alpha": np.array(model.alpha),
        "beta": np.array(model.beta),
        "topic_word_counts": model.topic_word_counts,
        **vocabulary_arrays(model.vocab),
    })


def load_lda_model(path: Union[str, Path]) -> LdaModel:
    arrays = read_model_file(path, MAGIC)
    counts = arrays["topic_word_counts"].astype(np.int64)
    return LdaModel(
        n_topics=int(arrays["n_topics"]),
        alpha=float(arrays["alpha"]),
        beta=float(arrays["beta"]),
        vocab=vocabulary_from_arrays(arrays),
        topic_word_counts=counts,
        topic_totals=counts.sum(axis=1),
    )


def write_top_words(model: LdaModel, path: Union[str, Path], top_k: int = 10) -> None:
    """Write the top_k words of every topic as TSV (topic, rank, word, probability)."""
    probs = model.topic_word_probs
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(["topic", "rank", "word", "probability"])
        for topic in range(model.n_topics):
            order = np.argsort(-probs[topic], kind="stable")[:top_k]
            for rank, token_id in enumerate(order, start=1):
                writer.writerow([topic, rank, model.vocab.word_of(int(token_id)), f"{probs[topic, token_id]:.6g}"])
