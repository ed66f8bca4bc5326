"""
Interpolated Kneser-Ney n-gram language model.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import analysis_defaults
from .corpus import OutOfVocabularyError, SentenceCorpus, Vocabulary
from .serialization import read_model_file, vocabulary_arrays, vocabulary_from_arrays, write_model_file

logger = logging.getLogger(__name__)

# Padding symbols live outside the dense id range of the vocabulary.
BOS = -1
EOS = -2
UNK = -3

MAGIC = "LPKN1"

NGram = Tuple[int, ...]


@dataclass
class NGramCounts:
    """Raw k-gram counts for k = 1..order over BOS/EOS padded sentences."""
    order: int
    vocab: Vocabulary
    counts: Dict[int, Counter]

    def continuation_counts(self, k: int) -> Counter:
        """Number of distinct words preceding each k-gram (k < order)."""
        if not 1 <= k < self.order:
            raise ValueError(f"continuation counts exist for orders 1..{self.order - 1}")
        return Counter(gram[1:] for gram in self.counts[k + 1])

    def merge(self, other: "NGramCounts") -> "NGramCounts":
        if other.order != self.order or other.vocab != self.vocab:
            raise ValueError("cannot merge counts of different order or vocabulary")
        return NGramCounts(
            self.order,
            self.vocab,
            {k: self.counts[k] + other.counts[k] for k in self.counts},
        )


def _pad(sentence: Sequence[int], order: int) -> List[int]:
    return [BOS] * (order - 1) + list(sentence) + [EOS]


def count_ngrams(corpus: SentenceCorpus, n: int = 3) -> NGramCounts:
    """
    Count all k-grams (k <= n) of the padded corpus.

    Each sentence gets n-1 BOS symbols in front and one EOS at the end. Only
    windows ending on a word or EOS are counted, so BOS is never a predicted event.

    Raises:
        ValueError: If n < 1 or the corpus is empty
    """
    if n < 1:
        raise ValueError(f"n-gram order must be >= 1, got {n}")
    if not len(corpus):
        raise ValueError("empty corpus")
    counts: Dict[int, Counter] = {k: Counter() for k in range(1, n + 1)}
    for sentence in corpus.sentences:
        padded = _pad(sentence, n)
        for end in range(n - 1, len(padded)):
            for k in range(1, n + 1):
                counts[k][tuple(padded[end - k + 1:end + 1])] += 1
    return NGramCounts(n, corpus.vocab, counts)


def merge_counts(*parts: NGramCounts) -> NGramCounts:
    """Merge sharded counts; merging is commutative and associative."""
    if not parts:
        raise ValueError("nothing to merge")
    merged = parts[0]
    for part in parts[1:]:
        merged = merged.merge(part)
    return merged


@dataclass
class KnModel:
    """
    Interpolated Kneser-Ney model.

    ``alphas[k]`` maps an observed k-gram (h, w) to its discounted relative
    frequency and ``gammas[k]`` maps an observed history h to its interpolation
    weight, so that p_k(w|h) = alpha_k(h, w) + gamma_k(h) * p_{k-1}(w|h').
    Order 1 interpolates with the uniform distribution over V + EOS.
    """
    order: int
    discounts: Tuple[float, ...]
    vocab: Vocabulary
    alphas: Dict[int, Dict[NGram, float]]
    gammas: Dict[int, Dict[NGram, float]]

    @property
    def event_count(self) -> int:
        return len(self.vocab) + 1

    def is_event(self, token_id: int) -> bool:
        return token_id == EOS or 0 <= token_id < len(self.vocab)

    def _prob_upto(self, word: int, history: NGram, top: int) -> float:
        prob = self.alphas[1].get((word,), 0.0) + self.gammas[1][()] / self.event_count
        for k in range(2, top + 1):
            context = tuple(history[len(history) - (k - 1):])
            gamma = self.gammas[k].get(context)
            if gamma is None:
                continue
            prob = self.alphas[k].get(context + (word,), 0.0) + gamma * prob
        return prob

    def prob(self, word: int, history: Sequence[int] = ()) -> float:
        """p(word | history); short histories are left-padded with BOS."""
        if not self.is_event(word):
            raise OutOfVocabularyError(f"out of vocabulary: id {word}")
        context = _history(history, self.order)
        return self._prob_upto(word, context, self.order)

    def encode(self, tokens: Sequence[str]) -> List[Optional[int]]:
        return self.vocab.encode(tokens)


def _history(history: Sequence[int], order: int) -> NGram:
    width = order - 1
    if width == 0:
        return ()
    context = tuple(history)[-width:]
    return (BOS,) * (width - len(context)) + context


def _estimate_discount(table: Counter, order: int) -> float:
    histogram = Counter(table.values())
    n1, n2 = histogram.get(1, 0), histogram.get(2, 0)
    if n1 + 2 * n2 > 0:
        discount = n1 / (n1 + 2 * n2)
        if 0.0 < discount < 1.0:
            return discount
    logger.warning(
        "degenerate counts-of-counts at order %d (n1=%d, n2=%d); using D=%.2f",
        order, n1, n2, analysis_defaults.FALLBACK_DISCOUNT,
    )
    return analysis_defaults.FALLBACK_DISCOUNT


def estimate_kn(counts: NGramCounts, discounts: Optional[Sequence[float]] = None) -> KnModel:
    """
    Estimate an interpolated Kneser-Ney model.

    The highest order uses raw counts, lower orders use continuation counts.

    Args:
        counts (NGramCounts): Counts built by count_ngrams
        discounts (Optional[Sequence[float]]): One discount per order (index 0 = unigrams);
            estimated as n1 / (n1 + 2 n2) when omitted

    Returns:
        KnModel: The estimated model
    """
    order = counts.order
    if discounts is not None:
        discounts = tuple(float(d) for d in discounts)
        if len(discounts) != order:
            raise ValueError(f"expected {order} discounts, got {len(discounts)}")
        if any(not 0.0 <= d < 1.0 for d in discounts):
            raise ValueError(f"discounts must lie in [0, 1), got {discounts}")

    tables = {k: (counts.counts[k] if k == order else counts.continuation_counts(k))
              for k in range(1, order + 1)}
    if discounts is None:
        discounts = tuple(_estimate_discount(tables[k], k) for k in range(1, order + 1))

    alphas: Dict[int, Dict[NGram, float]] = {}
    gammas: Dict[int, Dict[NGram, float]] = {}
    for k in range(1, order + 1):
        discount = discounts[k - 1]
        totals: Counter = Counter()
        types: Counter = Counter()
        for gram, count in tables[k].items():
            totals[gram[:-1]] += count
            types[gram[:-1]] += 1
        alphas[k] = {gram: (count - discount) / totals[gram[:-1]] for gram, count in tables[k].items()}
        gammas[k] = {history: discount * types[history] / total for history, total in totals.items()}
    logger.info("estimated %d-gram KN model, discounts %s", order, ", ".join(f"{d:.3f}" for d in discounts))
    return KnModel(order, discounts, counts.vocab, alphas, gammas)


def ngram_logprob(model: KnModel, w: int, history: Sequence[int]) -> float:
    """
    log10 p(w | history).

    Raises:
        OutOfVocabularyError: If w is neither a vocabulary id nor EOS
    """
    return math.log10(model.prob(w, history))


def score_sentence(model: KnModel, tokens: Sequence[Optional[int]],
                   include_eos: bool = False) -> List[Optional[float]]:
    """
    Per-token log10 probabilities of a sentence.

    Token i is conditioned on the padded tokens i-2 and i-1. Unknown tokens (None
    or ids outside the vocabulary) get None and enter later histories as an unseen
    symbol.
    """
    history: List[int] = [BOS] * (model.order - 1)
    scores: List[Optional[float]] = []
    for token in list(tokens) + ([EOS] if include_eos else []):
        if token is None or not model.is_event(token):
            scores.append(None)
            history.append(UNK)
            continue
        scores.append(ngram_logprob(model, token, history))
        history.append(token)
    return scores


def perplexity(model: KnModel, corpus: SentenceCorpus) -> float:
    """Per-event perplexity of a corpus, EOS included."""
    total, events = 0.0, 0
    for sentence in corpus.sentences:
        for score in score_sentence(model, sentence, include_eos=True):
            total += score
            events += 1
    return 10.0 ** (-total / events)


def save_kn_model(model: KnModel, path: Union[str, Path]) -> None:
    arrays = {
        "order": np.array(model.order),
        "discounts": np.array(model.discounts, dtype=np.float64),
        **vocabulary_arrays(model.vocab),
    }
    for k in range(1, model.order + 1):
        grams = list(model.alphas[k])
        histories = list(model.gammas[k])
        arrays[f"alpha_keys_{k}"] = np.array(grams, dtype=np.int64).reshape(len(grams), k)
        arrays[f"alpha_values_{k}"] = np.array([model.alphas[k][g] for g in grams], dtype=np.float64)
        arrays[f"gamma_keys_{k}"] = np.array(histories, dtype=np.int64).reshape(len(histories), k - 1)
        arrays[f"gamma_values_{k}"] = np.array([model.gammas[k][h] for h in histories], dtype=np.float64)
    write_model_file(path, MAGIC, arrays)


def load_kn_model(path: Union[str, Path]) -> KnModel:
    arrays = read_model_file(path, MAGIC)
    order = int(arrays["order"])
    alphas, gammas = {}, {}
    for k in range(1, order + 1):
        alphas[k] = {tuple(int(t) for t in key): float(value)
                     for key, value in zip(arrays[f"alpha_keys_{k}"], arrays[f"alpha_values_{k}"])}
        gammas[k] = {tuple(int(t) for t in key): float(value)
                     for key, value in zip(arrays[f"gamma_keys_{k}"], arrays[f"gamma_values_{k}"])}
    discounts = tuple(float(d) for d in arrays["discounts"])
    return KnModel(order, discounts, vocabulary_from_arrays(arrays), alphas, gammas)


def _symbol(model: KnModel, token_id: int) -> str:
    if token_id == BOS:
        return "<s>"
    if token_id == EOS:
        return "</s>"
    return model.vocab.word_of(token_id)


def write_arpa(model: KnModel, path: Union[str, Path]) -> None:
    """Dump the model in ARPA format (log10 probabilities and backoff weights)."""
    sections = []
    for k in range(1, model.order + 1):
        grams = sorted(model.alphas[k])
        if k == 1:
            grams = sorted(set(grams) | {(token_id,) for token_id in model.vocab.ids} | {(EOS,)})
        lines = []
        for gram in grams:
            prob = model._prob_upto(gram[-1], gram[:-1], k)
            fields = [f"{math.log10(prob):.6f}", " ".join(_symbol(model, t) for t in gram)]
            backoff = model.gammas[k + 1].get(gram) if k < model.order else None
            if backoff is not None:
                fields.append(f"{math.log10(backoff):.6f}" if backoff > 0 else "-99")
            lines.append("\t".join(fields))
        if k == 1 and model.order > 1 and (BOS,) in model.gammas[2]:
            lines.insert(0, f"-99\t<s>\t{math.log10(model.gammas[2][(BOS,)]):.6f}")
        sections.append(lines)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\\data\\\n")
        for k, lines in enumerate(sections, start=1):
            handle.write(f"ngram {k}={len(lines)}\n")
        for k, lines in enumerate(sections, start=1):
            handle.write(f"\n\\{k}-grams:\n")
            handle.write("\n".join(lines) + "\n")
        handle.write("\n\\end\\\n")
