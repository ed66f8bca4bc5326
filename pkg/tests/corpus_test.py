"""
Tests for corpus reading, tokenization and vocabularies.
"""
import pytest

from reading_predictability.corpus import (
    OutOfVocabularyError,
    TokenizerRules,
    Vocabulary,
    build_vocabulary,
    encode_corpus,
    frequency_class,
    read_corpus,
    tokenize,
)


@pytest.mark.parametrize("text,rules,expected", [
    ("The cat, sat.", None, ["the", "cat", "sat"]),
    ("Über die Brücke!", None, ["über", "die", "brücke"]),
    ("\"Hello\" -- world", None, ["hello", "world"]),
    ("The Cat.", TokenizerRules(lowercase=False), ["The", "Cat"]),
    ("don't stop.", TokenizerRules(strip_punctuation=False), ["don't", "stop."]),
    ("", None, []),
])
def test_tokenize(text, rules, expected):
    """Test whitespace tokenization with lowercasing and punctuation stripping."""
    assert tokenize(text, rules) == expected


def test_read_corpus_splits_documents(tmp_path):
    """Test that blank lines separate documents."""
    path = tmp_path / "corpus.txt"
    path.write_text("The cat sat.\nIt ran.\n\n\nA dog barked.\n", encoding="utf-8")
    documents = read_corpus(path)
    assert documents == [[["the", "cat", "sat"], ["it", "ran"]], [["a", "dog", "barked"]]]


def test_build_vocabulary_orders_by_count():
    """Test id order: descending count, ties broken lexicographically."""
    vocab = build_vocabulary([["b", "a", "c", "a"], ["c", "a"]])
    assert vocab.words == ("a", "c", "b")
    assert vocab.counts == (3, 2, 1)
    assert vocab.total_tokens == 6


def test_build_vocabulary_min_count():
    """Test that rare words are left out."""
    vocab = build_vocabulary([["a", "a", "b"]], min_count=2)
    assert vocab.words == ("a",)


@pytest.mark.parametrize("sentences,min_count", [
    ([], 1),
    ([["a"]], 0),
])
def test_build_vocabulary_invalid(sentences, min_count):
    """Test errors for an empty corpus and a non-positive min_count."""
    with pytest.raises(ValueError):
        build_vocabulary(sentences, min_count)


def test_vocabulary_lookup():
    """Test id and word lookup and the out-of-vocabulary error."""
    vocab = Vocabulary(("the", "cat"), (5, 2))
    assert vocab.id_of("cat") == 1
    assert vocab.word_of(0) == "the"
    assert vocab.encode(["cat", "dog"]) == [1, None]
    with pytest.raises(OutOfVocabularyError):
        vocab.id_of("dog")
    with pytest.raises(KeyError):
        vocab.word_of(7)


def test_vocabulary_rejects_duplicates():
    """Test that duplicate words are rejected."""
    with pytest.raises(ValueError):
        Vocabulary(("a", "a"), (1, 1))


def test_vocabulary_tsv(tmp_path):
    """Test writing and reading a vocabulary TSV."""
    vocab = Vocabulary(("the", "cat", "sat"), (5, 2, 1))
    path = tmp_path / "vocab.tsv"
    vocab.to_tsv(path)
    assert path.read_text(encoding="utf-8").splitlines()[1] == "cat\t1\t2"
    assert Vocabulary.from_tsv(path) == vocab


def test_vocabulary_from_frequency_list(tmp_path):
    """Test reading a two-column (word, count) frequency list."""
    path = tmp_path / "freq.tsv"
    path.write_text("rare\t1\ncommon\t100\n", encoding="utf-8")
    vocab = Vocabulary.from_tsv(path)
    assert vocab.words == ("common", "rare")


@pytest.mark.parametrize("word,expected", [
    ("the", 0),
    ("cat", 1),   # log2(64/40) = 0.68 rounds up
    ("sat", 3),   # log2(64/8) = 3
    ("mat", 6),   # log2(64/1) = 6
])
def test_frequency_class(word, expected):
    """Test frequency classes relative to the most frequent word."""
    vocab = Vocabulary(("the", "cat", "sat", "mat"), (64, 40, 8, 1))
    assert frequency_class(word, vocab) == expected


def test_encode_corpus_drops_unknown_tokens(tiny_corpus):
    """Test encoding with document ids and out-of-vocabulary tokens removed."""
    vocab = tiny_corpus.vocab
    corpus = encode_corpus([[["the", "zebra", "cat"], ["zebra"]]], vocab)
    assert corpus.sentences == ((vocab.id_of("the"), vocab.id_of("cat")),)
    assert corpus.document_ids == (0,)


def test_corpus_documents(tiny_corpus):
    """Test that documents concatenate their sentences."""
    documents = tiny_corpus.documents()
    assert len(documents) == 2
    assert len(documents[0]) == 6
    assert len(documents[1]) == 7
