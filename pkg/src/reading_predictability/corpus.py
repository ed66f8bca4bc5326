"""
Corpus ingestion, tokenization, vocabulary construction and frequency classes.
"""
import csv
import logging
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class OutOfVocabularyError(KeyError):
    """Raised when a word or token id is not part of a vocabulary."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "out of vocabulary"


@dataclass(frozen=True)
class TokenizerRules:
    """Switches of the whitespace tokenizer."""
    lowercase: bool = True
    strip_punctuation: bool = True


def _is_punctuation(char: str) -> bool:
    return unicodedata.category(char).startswith("P")


def _strip_punctuation(token: str) -> str:
    start, end = 0, len(token)
    while start < end and _is_punctuation(token[start]):
        start += 1
    while end > start and _is_punctuation(token[end - 1]):
        end -= 1
    return token[start:end]


def tokenize(text: str, rules: Optional[TokenizerRules] = None) -> List[str]:
    """
    Split text into word tokens.

    Tokens are whitespace separated; lowercasing is Unicode aware, so umlauts and
    other non-ASCII letters survive. Leading and trailing punctuation is removed and
    tokens that end up empty are dropped.

    Args:
        text (str): Input text
        rules (Optional[TokenizerRules]): Tokenizer switches, defaults to lowercase + strip

    Returns:
        List[str]: Tokens in input order
    """
    rules = rules or TokenizerRules()
    tokens = []
    for raw in text.split():
        token = raw.lower() if rules.lowercase else raw
        if rules.strip_punctuation:
            token = _strip_punctuation(token)
        if token:
            tokens.append(token)
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    """Dense word <-> id map with token counts. Ids are list positions."""
    words: Tuple[str, ...]
    counts: Tuple[int, ...]
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.words) != len(self.counts):
            raise ValueError("words and counts differ in length")
        index = {word: i for i, word in enumerate(self.words)}
        if len(index) != len(self.words):
            raise ValueError("duplicate words in vocabulary")
        if any(count < 1 for count in self.counts):
            raise ValueError("every vocabulary word needs a count >= 1")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: object) -> bool:
        return word in self._index

    @property
    def ids(self) -> range:
        return range(len(self.words))

    @property
    def total_tokens(self) -> int:
        return sum(self.counts)

    @property
    def f_max(self) -> int:
        return max(self.counts) if self.counts else 0

    def get_id(self, word: str) -> Optional[int]:
        return self._index.get(word)

    def id_of(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise OutOfVocabularyError(f"out of vocabulary: '{word}'") from None

    def word_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.words):
            raise OutOfVocabularyError(f"out of vocabulary: id {token_id}")
        return self.words[token_id]

    def count_of(self, word: str) -> int:
        return self.counts[self.id_of(word)]

    def encode(self, tokens: Sequence[str]) -> List[Optional[int]]:
        """Map tokens to ids; unknown tokens become None."""
        return [self._index.get(token) for token in tokens]

    def decode(self, token_ids: Sequence[int]) -> List[str]:
        return [self.word_of(token_id) for token_id in token_ids]

    def to_tsv(self, path: PathLike) -> None:
        """Write the vocabulary as TSV rows of (word, id, count)."""
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, delimiter="\t", quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
            for token_id, (word, count) in enumerate(zip(self.words, self.counts)):
                writer.writerow([word, token_id, count])

    @classmethod
    def from_tsv(cls, path: PathLike) -> "Vocabulary":
        """
        Read a vocabulary TSV.

        Three-column files (word, id, count) keep their ids. Two-column files
        (word, count), such as reference frequency lists, are ordered by descending
        count with ties broken lexicographically.
        """
        with open(path, encoding="utf-8", newline="") as handle:
            rows = [row for row in csv.reader(handle, delimiter="\t", quoting=csv.QUOTE_MINIMAL) if row]
        if not rows:
            raise ValueError(f"empty vocabulary file {path}")
        if len(rows[0]) >= 3:
            rows.sort(key=lambda row: int(row[1]))
            if [int(row[1]) for row in rows] != list(range(len(rows))):
                raise ValueError(f"vocabulary ids in {path} are not dense")
            return cls(tuple(row[0] for row in rows), tuple(int(row[2]) for row in rows))
        return _vocabulary_from_counts(Counter({row[0]: int(row[1]) for row in rows}), min_count=1)


@dataclass(frozen=True)
class SentenceCorpus:
    """Sentences of token ids, optionally grouped into documents."""
    sentences: Tuple[Tuple[int, ...], ...]
    vocab: Vocabulary
    document_ids: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        size = len(self.vocab)
        for position, sentence in enumerate(self.sentences):
            if not sentence:
                raise ValueError(f"sentence {position} is empty")
            if any(not 0 <= token_id < size for token_id in sentence):
                raise ValueError(f"sentence {position} holds a token id outside the vocabulary")
        if self.document_ids is not None and len(self.document_ids) != len(self.sentences):
            raise ValueError("document_ids must give one document per sentence")

    def __len__(self) -> int:
        return len(self.sentences)

    def documents(self) -> List[np.ndarray]:
        """Token ids per document; without document grouping each sentence is a document."""
        if self.document_ids is None:
            return [np.asarray(sentence, dtype=np.int64) for sentence in self.sentences]
        grouped: Dict[int, List[int]] = {}
        for document_id, sentence in zip(self.document_ids, self.sentences):
            grouped.setdefault(document_id, []).extend(sentence)
        return [np.asarray(grouped[key], dtype=np.int64) for key in sorted(grouped)]


def read_corpus(path: PathLike, rules: Optional[TokenizerRules] = None) -> List[List[List[str]]]:
    """
    Read a UTF-8 corpus with one sentence per line and blank lines between documents.

    Returns:
        List[List[List[str]]]: documents -> sentences -> tokens
    """
    documents: List[List[List[str]]] = []
    current: List[List[str]] = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                if current:
                    documents.append(current)
                    current = []
                continue
            tokens = tokenize(line, rules)
            if tokens:
                current.append(tokens)
    if current:
        documents.append(current)
    logger.info("read %d documents, %d sentences from %s",
                len(documents), sum(len(document) for document in documents), path)
    return documents


def iter_sentences(documents: Iterable[Sequence[Sequence[str]]]) -> Iterable[Sequence[str]]:
    for document in documents:
        yield from document


def _vocabulary_from_counts(counts: Counter, min_count: int) -> Vocabulary:
    kept = sorted(((word, count) for word, count in counts.items() if count >= min_count),
                  key=lambda item: (-item[1], item[0]))
    return Vocabulary(tuple(word for word, _ in kept), tuple(count for _, count in kept))


def build_vocabulary(sentences: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """
    Count tokens and build a dense vocabulary.

    Args:
        sentences: Token sequences
        min_count (int): Words seen fewer times are left out

    Returns:
        Vocabulary: Ids ordered by descending count, ties broken lexicographically

    Raises:
        ValueError: If min_count < 1 or the corpus holds no tokens
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    counts = Counter()
    for sentence in sentences:
        counts.update(sentence)
    if not counts:
        raise ValueError("empty corpus")
    vocab = _vocabulary_from_counts(counts, min_count)
    logger.info("vocabulary: %d of %d word types kept (min_count=%d)", len(vocab), len(counts), min_count)
    return vocab


def encode_corpus(documents: Sequence[Sequence[Sequence[str]]], vocab: Vocabulary) -> SentenceCorpus:
    """Encode tokenized documents; OOV tokens and sentences left empty are dropped."""
    sentences = []
    document_ids = []
    dropped = 0
    for document_id, document in enumerate(documents):
        for tokens in document:
            encoded = tuple(token_id for token_id in vocab.encode(tokens) if token_id is not None)
            dropped += len(tokens) - len(encoded)
            if encoded:
                sentences.append(encoded)
                document_ids.append(document_id)
    if not sentences:
        raise ValueError("empty corpus")
    if dropped:
        logger.info("dropped %d out-of-vocabulary tokens while encoding", dropped)
    return SentenceCorpus(tuple(sentences), vocab, tuple(document_ids))


def frequency_class(word: str, vocab: Vocabulary) -> int:
    """
    Frequency class: the most frequent word is 2**class times more frequent than ``word``.

    The log2 ratio is rounded half up.

    Raises:
        OutOfVocabularyError: If word is not in the vocabulary
    """
    count = vocab.count_of(word)
    return int(math.floor(math.log2(vocab.f_max / count) + 0.5))
