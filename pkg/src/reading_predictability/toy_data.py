"""
Self-contained synthetic dataset: a small topical grammar corpus, trained models,
stimuli, cloze norms and simulated fixations with a log-linear duration truth.
"""
import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from .config import analysis_defaults
from .corpus import build_vocabulary, encode_corpus, iter_sentences, read_corpus
from .models import LANGUAGE_MODEL_SOURCES, SOURCES, StimulusToken
from .ngram import count_ngrams, estimate_kn, save_kn_model
from .rnn import save_rnn_model, train_rnn
from .scoring import ScoringSettings, score_stimuli
from .topics import save_lda_model, train_lda

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TOPIC_WORDS = {
    "kitchen": {
        "noun": ["cook", "bread", "soup", "knife", "oven", "plate"],
        "verb": ["bakes", "cuts", "serves", "heats"],
        "adjective": ["warm", "fresh", "sharp", "hot"],
    },
    "sea": {
        "noun": ["sailor", "boat", "wave", "fish", "harbor", "net"],
        "verb": ["rows", "catches", "sails", "pulls"],
        "adjective": ["calm", "salty", "deep", "wet"],
    },
    "school": {
        "noun": ["tutor", "book", "pupil", "desk", "lesson", "chalk"],
        "verb": ["reads", "writes", "teaches", "opens"],
        "adjective": ["quiet", "long", "new", "clever"],
    },
    "farm": {
        "noun": ["farmer", "cow", "field", "barn", "horse", "seed"],
        "verb": ["plants", "feeds", "ploughs", "milks"],
        "adjective": ["muddy", "green", "old", "strong"],
    },
    "city": {
        "noun": ["driver", "bus", "street", "tower", "market", "bridge"],
        "verb": ["drives", "crosses", "builds", "paints"],
        "adjective": ["busy", "tall", "noisy", "bright"],
    },
}

DETERMINERS = ["the", "a"]
PREPOSITIONS = ["with", "near", "behind"]

TEMPLATES = [
    ["det", "adjective", "noun", "verb", "det", "noun"],
    ["det", "noun", "verb", "det", "adjective", "noun", "prep", "det", "noun"],
    ["det", "noun", "verb", "prep", "det", "noun"],
    ["det", "adjective", "noun", "verb", "det", "noun", "prep", "det", "adjective", "noun"],
]

UNKNOWN_WORD = "zorble"

# Log-linear duration truth: log mu = BASE + LENGTH_SLOPE * (length - 5) + SURPRISAL_SLOPE * sum(log10 p)
BASE_LOG_MS = math.log(220.0)
LENGTH_SLOPE = 0.03
SURPRISAL_SLOPE = -0.08
GAMMA_SHAPE = 8.0
PROBABILITY_FLOOR = 1e-6


@dataclass
class ToyDataset:
    """Paths of a generated toy dataset."""
    root: Path
    corpus: Path
    stimuli: Path
    norms: Path
    fixations: Path
    ngram_model: Path
    topic_model: Path
    rnn_model: Path
    config: Path


class _Grammar:
    def __init__(self, rng: np.random.Generator, topic_share: float = 0.75):
        self.rng = rng
        self.topics = sorted(TOPIC_WORDS)
        self.topic_share = topic_share

    def _pick(self, options: Sequence[str]) -> str:
        return options[int(self.rng.integers(len(options)))]

    def sentence(self, topic: str) -> List[str]:
        template = TEMPLATES[int(self.rng.integers(len(TEMPLATES)))]
        words = []
        for slot in template:
            if slot == "det":
                words.append(self._pick(DETERMINERS))
            elif slot == "prep":
                words.append(self._pick(PREPOSITIONS))
            else:
                source = topic if self.rng.random() < self.topic_share else self._pick(self.topics)
                words.append(self._pick(TOPIC_WORDS[source][slot]))
        return words

    def random_sentence(self) -> List[str]:
        return self.sentence(self._pick(self.topics))

    def document(self, n_sentences: int) -> List[List[str]]:
        topic = self._pick(self.topics)
        return [self.sentence(topic) for _ in range(n_sentences)]


def _write_tsv(path: Path, header: Sequence[str], rows: Sequence[Sequence[object]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_corpus(path: Path, documents: Sequence[Sequence[Sequence[str]]]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n\n".join("\n".join(" ".join(sentence) for sentence in document)
                                 for document in documents) + "\n")


def _stimulus_surface(words: Sequence[str]) -> List[str]:
    surface = list(words)
    surface[0] = surface[0].capitalize()
    surface[-1] = surface[-1] + "."
    return surface


def _simulate_trial(rng: np.random.Generator, means: Sequence[float], lengths: Sequence[int]
                    ) -> List[Tuple[int, float, int]]:
    """Fixations (word_index, duration, landing_letter) of one reading of a sentence."""
    fixations: List[Tuple[int, float, int]] = []
    regressions: List[int] = []
    for index, (mean, length) in enumerate(zip(means, lengths), start=1):
        if rng.random() < (0.15 if length <= 3 else 0.03):
            continue
        gaze = max(1.0, round(mean * rng.gamma(GAMMA_SHAPE, 1.0 / GAMMA_SHAPE)))
        landing = int(rng.integers(1, length + 1))
        if length > 4 and rng.random() < 0.25:
            first = max(1.0, round(gaze * 0.6))
            fixations.append((index, first, landing))
            fixations.append((index, max(1.0, gaze - first), int(rng.integers(1, length + 1))))
        else:
            fixations.append((index, gaze, landing))
        if rng.random() < 0.08:
            regressions.append(index)
    for index in regressions:
        duration = max(1.0, round(150.0 * rng.gamma(GAMMA_SHAPE, 1.0 / GAMMA_SHAPE)))
        fixations.append((index, duration, int(rng.integers(1, lengths[index - 1] + 1))))
    return fixations


def generate_toy_dataset(out_dir: PathLike, seed: int = analysis_defaults.SEED,
                         n_sentences: int = 200, n_subjects: int = 5,
                         train_documents: int = 200, sentences_per_document: int = 5,
                         n_topics: int = len(TOPIC_WORDS), lda_sweeps: int = 50,
                         rnn_hidden: int = 16, rnn_epochs: int = 3,
                         measures: Sequence[str] = tuple(analysis_defaults.MEASURES),
                         sources: Sequence[str] = SOURCES,
                         smooth_k: int = 6, gcv_max_outer: int = 3,
                         unknown_rate: float = 0.03) -> ToyDataset:
    """
    Generate and write the toy dataset.

    Reading times follow log mu = log 220 + 0.03 (length - 5) - 0.08 * (sum of the
    three models' log10 probabilities of the word), with gamma noise of shape 8.

    Args:
        out_dir: Target directory (created if missing)
        seed (int): Seed of every random draw and of model training
        n_sentences (int): Stimulus sentences
        n_subjects (int): Simulated readers
        train_documents (int): Training documents of the models
        unknown_rate (float): Share of stimulus sentences with one unknown word

    Returns:
        ToyDataset: Paths of everything written, including an analysis config file
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    grammar = _Grammar(rng)

    corpus_path = root / "corpus.txt"
    _write_corpus(corpus_path, [grammar.document(sentences_per_document) for _ in range(train_documents)])
    documents = read_corpus(corpus_path)
    vocab = build_vocabulary(iter_sentences(documents))
    corpus = encode_corpus(documents, vocab)

    paths = {
        "ngram": root / "ngram.lpkn",
        "topic": root / "topics.lplda",
        "rnn": root / "rnn.lprn",
    }
    models = {
        "ngram": estimate_kn(count_ngrams(corpus, analysis_defaults.NGRAM_ORDER)),
        "topic": train_lda(corpus, n_topics=n_topics, alpha=0.1, beta=0.01, sweeps=lda_sweeps, seed=seed),
        "rnn": train_rnn(corpus, hidden_size=rnn_hidden, epochs=rnn_epochs, bptt_depth=3, seed=seed),
    }
    save_kn_model(models["ngram"], paths["ngram"])
    save_lda_model(models["topic"], paths["topic"])
    save_rnn_model(models["rnn"], paths["rnn"])

    stimuli: List[StimulusToken] = []
    stimulus_rows = []
    for number in range(1, n_sentences + 1):
        sentence_id = f"s{number:03d}"
        words = grammar.random_sentence()
        if rng.random() < unknown_rate:
            words[int(rng.integers(1, len(words) - 1))] = UNKNOWN_WORD
        for index, (word, surface) in enumerate(zip(words, _stimulus_surface(words)), start=1):
            stimuli.append(StimulusToken(sentence_id, index, word))
            stimulus_rows.append([sentence_id, index, surface])
    stimuli_path = root / "stimuli.tsv"
    _write_tsv(stimuli_path, ["sentence_id", "word_index", "token"], stimulus_rows)

    settings = ScoringSettings(fold_in_sweeps=10, fold_in_samples=5, seed=seed)
    raw_scores = score_stimuli(stimuli, models, {}, settings)

    norm_rows = []
    means: Dict[Tuple[str, int], float] = {}
    for score in raw_scores:
        ngram_p = score.probabilities["ngram"] or 0.0
        ccp = rng.binomial(analysis_defaults.N_PROTOCOLS, min(ngram_p, 1.0)) / analysis_defaults.N_PROTOCOLS
        norm_rows.append([score.sentence_id, score.word_index, score.token, f"{ccp:.6f}",
                          analysis_defaults.N_PROTOCOLS])
        log_probability = sum(math.log10(max(score.probabilities[source] or PROBABILITY_FLOOR, PROBABILITY_FLOOR))
                              for source in LANGUAGE_MODEL_SOURCES)
        means[(score.sentence_id, score.word_index)] = math.exp(
            BASE_LOG_MS + LENGTH_SLOPE * (len(score.token) - 5) + SURPRISAL_SLOPE * log_probability)
    norms_path = root / "norms.tsv"
    _write_tsv(norms_path, ["sentence_id", "word_index", "word", "ccp", "n_protocols"], norm_rows)

    sentences: Dict[str, List[StimulusToken]] = {}
    for token in stimuli:
        sentences.setdefault(token.sentence_id, []).append(token)
    fixation_rows = []
    for subject in range(1, n_subjects + 1):
        subject_id = f"p{subject:02d}"
        for sentence_id, tokens in sentences.items():
            trial = _simulate_trial(rng, [means[(sentence_id, t.word_index)] for t in tokens],
                                    [len(t.token) for t in tokens])
            for order, (word_index, duration, landing) in enumerate(trial, start=1):
                fixation_rows.append([subject_id, sentence_id, word_index, order, int(duration), landing])
    fixations_path = root / "fixations.tsv"
    _write_tsv(fixations_path, ["subject_id", "sentence_id", "word_index", "order", "duration_ms", "landing_letter"],
               fixation_rows)

    config_path = root / "analysis.conf"
    with open(config_path, "w", encoding="utf-8") as handle:
        handle.write("# Toy analysis generated with seed %d\n" % seed)
        handle.write("stimuli = stimuli.tsv\nnorms = norms.tsv\nfixations = fixations.tsv\n")
        handle.write("ngram_model = ngram.lpkn\ntopic_model = topics.lplda\nrnn_model = rnn.lprn\n")
        handle.write("output_dir = reports\n")
        handle.write(f"measures = {', '.join(measures)}\n")
        handle.write(f"sources = {', '.join(sources)}\n")
        handle.write(f"seed = {seed}\nsmooth_k = {smooth_k}\ngcv_max_outer = {gcv_max_outer}\n")
        handle.write("fold_in_sweeps = 10\nfold_in_samples = 5\n")
    logger.info("toy dataset: %d stimulus sentences, %d subjects, %d fixations in %s",
                n_sentences, n_subjects, len(fixation_rows), root)
    return ToyDataset(root, corpus_path, stimuli_path, norms_path, fixations_path,
                      paths["ngram"], paths["topic"], paths["rnn"], config_path)
