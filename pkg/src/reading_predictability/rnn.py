"""
Elman-style recurrent language model with a class-factorized output layer.

Events are the vocabulary ids 0..V-1 plus EOS (id V). The hidden layer is
h' = sigmoid(E[w] + R h + b); outputs are p(class|h) * p(word|class, h), both
softmaxes taken over logits divided by the temperature.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit, logsumexp, softmax

from .config import analysis_defaults
from .corpus import OutOfVocabularyError, SentenceCorpus, Vocabulary
from .serialization import read_model_file, vocabulary_arrays, vocabulary_from_arrays, write_model_file

logger = logging.getLogger(__name__)

MAGIC = "LPRN1"

PARAMETERS = (
    "embedding", "recurrent", "hidden_bias",
    "class_weights", "class_bias", "word_weights", "word_bias",
)


class TrainingError(RuntimeError):
    """Raised when training diverges."""


@dataclass
class RnnModel:
    """Weights of the recurrent language model."""
    vocab: Vocabulary
    embedding: np.ndarray
    recurrent: np.ndarray
    hidden_bias: np.ndarray
    class_weights: np.ndarray
    class_bias: np.ndarray
    word_weights: np.ndarray
    word_bias: np.ndarray
    word_class: np.ndarray
    temperature: float = analysis_defaults.RNN_TEMPERATURE
    initial_activation: float = 0.5
    training_loss: List[float] = field(default_factory=list)

    @property
    def hidden_size(self) -> int:
        return self.recurrent.shape[0]

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def eos_id(self) -> int:
        return len(self.vocab)

    @property
    def event_count(self) -> int:
        return len(self.vocab) + 1

    @property
    def n_classes(self) -> int:
        return self.class_weights.shape[0]

    @cached_property
    def class_members(self) -> List[np.ndarray]:
        return [np.flatnonzero(self.word_class == c) for c in range(self.n_classes)]

    @cached_property
    def position_in_class(self) -> np.ndarray:
        positions = np.empty(self.event_count, dtype=np.int64)
        for members in self.class_members:
            positions[members] = np.arange(len(members))
        return positions

    def encode(self, tokens: Sequence[str]) -> List[Optional[int]]:
        return self.vocab.encode(tokens)


@dataclass
class RnnState:
    """Hidden activation and the context copy feeding the next step."""
    hidden: np.ndarray
    context: np.ndarray


def initial_state(model: RnnModel) -> RnnState:
    activation = np.full(model.hidden_size, model.initial_activation)
    return RnnState(hidden=activation, context=activation.copy())


def _assign_classes(event_counts: np.ndarray, n_classes: int) -> np.ndarray:
    """Frequency bands: classes cover roughly equal shares of the token mass."""
    order = np.argsort(-event_counts, kind="stable")
    cumulative = np.cumsum(event_counts[order]) - event_counts[order]
    bands = np.minimum((cumulative / event_counts.sum() * n_classes).astype(np.int64), n_classes - 1)
    word_class = np.empty(len(event_counts), dtype=np.int64)
    word_class[order] = bands
    _, compact = np.unique(word_class, return_inverse=True)
    return compact.astype(np.int64)


def init_rnn_model(vocab: Vocabulary, hidden_size: int = analysis_defaults.RNN_HIDDEN,
                   n_classes: Optional[int] = None, eos_count: int = 1,
                   temperature: float = analysis_defaults.RNN_TEMPERATURE,
                   seed: int = analysis_defaults.SEED, init_scale: float = 0.1) -> RnnModel:
    """
    Build a randomly initialized model.

    Args:
        vocab (Vocabulary): Input and output vocabulary
        hidden_size (int): Number of hidden units H
        n_classes (Optional[int]): Output classes; one class (exact softmax) for
            small vocabularies, about sqrt(V+1) otherwise
        eos_count (int): Frequency of EOS, used when banding classes
        temperature (float): Output temperature
        seed (int): Random seed
        init_scale (float): Weights are drawn from uniform(-init_scale, init_scale)
    """
    if hidden_size < 1:
        raise ValueError(f"hidden_size must be >= 1, got {hidden_size}")
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    events = len(vocab) + 1
    if n_classes is None:
        n_classes = 1 if events <= analysis_defaults.RNN_FULL_SOFTMAX_LIMIT else int(round(math.sqrt(events)))
    n_classes = max(1, min(n_classes, events))
    event_counts = np.array(list(vocab.counts) + [max(eos_count, 1)], dtype=np.float64)
    word_class = _assign_classes(event_counts, n_classes)
    n_classes = int(word_class.max()) + 1

    rng = np.random.default_rng(seed)

    def uniform(*shape):
        return rng.uniform(-init_scale, init_scale, size=shape)

    return RnnModel(
        vocab=vocab,
        embedding=uniform(len(vocab), hidden_size),
        recurrent=uniform(hidden_size, hidden_size),
        hidden_bias=np.zeros(hidden_size),
        class_weights=uniform(n_classes, hidden_size),
        class_bias=np.zeros(n_classes),
        word_weights=uniform(events, hidden_size),
        word_bias=np.zeros(events),
        word_class=word_class,
        temperature=temperature,
    )


def _check_input(model: RnnModel, token: Optional[int], position: Optional[int] = None) -> int:
    if token is None or not 0 <= token < model.vocab_size:
        where = f" at position {position}" if position is not None else ""
        raise OutOfVocabularyError(f"out of vocabulary{where}: {token!r}")
    return int(token)


def _advance(model: RnnModel, context: np.ndarray, token: int) -> np.ndarray:
    return expit(model.embedding[token] + model.recurrent @ context + model.hidden_bias)


def output_distribution(model: RnnModel, state: RnnState) -> np.ndarray:
    """Distribution over the V+1 events given the state's hidden layer."""
    hidden = state.hidden
    class_probs = softmax((model.class_weights @ hidden + model.class_bias) / model.temperature)
    word_logits = (model.word_weights @ hidden + model.word_bias) / model.temperature
    probs = np.empty(model.event_count)
    for c, members in enumerate(model.class_members):
        probs[members] = class_probs[c] * softmax(word_logits[members])
    return probs


def _event_log_prob(model: RnnModel, hidden: np.ndarray, event: int) -> float:
    c = model.word_class[event]
    members = model.class_members[c]
    class_logits = (model.class_weights @ hidden + model.class_bias) / model.temperature
    word_logits = (model.word_weights[members] @ hidden + model.word_bias[members]) / model.temperature
    return float(class_logits[c] - logsumexp(class_logits)
                 + word_logits[model.position_in_class[event]] - logsumexp(word_logits))


def rnn_step(model: RnnModel, state: RnnState, w: int) -> Tuple[RnnState, np.ndarray]:
    """
    Consume one word.

    Returns:
        Tuple[RnnState, np.ndarray]: The new state (context = new hidden) and the
        distribution over the next event

    Raises:
        OutOfVocabularyError: If w is not a vocabulary id
    """
    token = _check_input(model, w)
    hidden = _advance(model, state.context, token)
    new_state = RnnState(hidden=hidden, context=hidden.copy())
    return new_state, output_distribution(model, new_state)


def prefix_state(model: RnnModel, prefix: Sequence[int]) -> RnnState:
    """State after running the prefix from the initial state."""
    context = initial_state(model).context
    for position, token in enumerate(prefix):
        context = _advance(model, context, _check_input(model, token, position))
    return RnnState(hidden=context, context=context.copy())


def rnn_word_prob(model: RnnModel, prefix: Sequence[int], w: int) -> float:
    """
    log10 probability of w after the prefix.

    Raises:
        OutOfVocabularyError: Naming the offending position of an unknown token
    """
    if w is None or not 0 <= w < model.event_count:
        raise OutOfVocabularyError(f"out of vocabulary at position {len(prefix)}: {w!r}")
    state = prefix_state(model, prefix)
    return _event_log_prob(model, state.hidden, int(w)) / math.log(10)


def score_sentence(model: RnnModel, tokens: Sequence[Optional[int]]) -> List[Optional[float]]:
    """Per-token log10 probabilities; unknown tokens get None and are not fed to the network."""
    context = initial_state(model).context
    scores: List[Optional[float]] = []
    for token in tokens:
        if token is None or not 0 <= token < model.vocab_size:
            scores.append(None)
            continue
        scores.append(_event_log_prob(model, context, int(token)) / math.log(10))
        context = _advance(model, context, int(token))
    return scores


def sentence_loss_and_gradients(model: RnnModel, tokens: Sequence[int],
                                bptt_depth: int = analysis_defaults.RNN_BPTT_DEPTH
                                ) -> Tuple[float, Dict[str, np.ndarray], int]:
    """
    Cross-entropy of a sentence (natural log, EOS included) and its gradients.

    Errors are propagated back through at most ``bptt_depth`` recurrent steps;
    a depth of at least the sentence length gives the exact gradient.

    Returns:
        Tuple[float, Dict[str, np.ndarray], int]: loss, gradients by parameter name, event count
    """
    inputs = [_check_input(model, token, position) for position, token in enumerate(tokens)]
    targets = inputs + [model.eos_id]
    temperature = model.temperature

    hiddens = [initial_state(model).context]
    for token in inputs:
        hiddens.append(_advance(model, hiddens[-1], token))

    grads = {name: np.zeros_like(getattr(model, name)) for name in PARAMETERS}
    loss = 0.0
    for t, target in enumerate(targets):
        hidden = hiddens[t]
        c = model.word_class[target]
        members = model.class_members[c]
        j = model.position_in_class[target]

        class_logits = (model.class_weights @ hidden + model.class_bias) / temperature
        word_logits = (model.word_weights[members] @ hidden + model.word_bias[members]) / temperature
        class_probs = softmax(class_logits)
        word_probs = softmax(word_logits)
        loss -= (class_logits[c] - logsumexp(class_logits)) + (word_logits[j] - logsumexp(word_logits))

        d_class = class_probs.copy()
        d_class[c] -= 1.0
        d_class /= temperature
        d_word = word_probs.copy()
        d_word[j] -= 1.0
        d_word /= temperature

        grads["class_weights"] += np.outer(d_class, hidden)
        grads["class_bias"] += d_class
        grads["word_weights"][members] += np.outer(d_word, hidden)
        grads["word_bias"][members] += d_word
        d_hidden = model.class_weights.T @ d_class + model.word_weights[members].T @ d_word

        step, depth = t, 0
        while step > 0 and depth < bptt_depth:
            current = hiddens[step]
            d_pre = d_hidden * current * (1.0 - current)
            grads["embedding"][inputs[step - 1]] += d_pre
            grads["recurrent"] += np.outer(d_pre, hiddens[step - 1])
            grads["hidden_bias"] += d_pre
            d_hidden = model.recurrent.T @ d_pre
            step -= 1
            depth += 1
    return float(loss), grads, len(targets)


def _corpus_loss(model: RnnModel, corpus: SentenceCorpus) -> float:
    total, events = 0.0, 0
    for sentence in corpus.sentences:
        scores = score_sentence(model, sentence)
        total -= sum(scores) * math.log(10)
        total -= _event_log_prob(model, prefix_state(model, sentence).hidden, model.eos_id)
        events += len(sentence) + 1
    return total / events


def train_rnn(corpus: SentenceCorpus,
              hidden_size: int = analysis_defaults.RNN_HIDDEN,
              epochs: int = analysis_defaults.RNN_EPOCHS,
              learning_rate: float = analysis_defaults.RNN_LEARNING_RATE,
              bptt_depth: int = analysis_defaults.RNN_BPTT_DEPTH,
              seed: int = analysis_defaults.SEED,
              temperature: float = analysis_defaults.RNN_TEMPERATURE,
              n_classes: Optional[int] = None,
              valid_corpus: Optional[SentenceCorpus] = None,
              min_improvement: float = 0.003) -> RnnModel:
    """
    Train by stochastic gradient descent, one update per sentence.

    The hidden state is reset at every sentence boundary. The learning rate is
    halved whenever the monitored loss (validation corpus if given, otherwise the
    epoch's training loss) improves by less than ``min_improvement`` relative.

    Raises:
        ValueError: If the corpus is empty
        TrainingError: If the loss becomes non-finite
    """
    if not len(corpus):
        raise ValueError("empty corpus")
    if bptt_depth < 1:
        raise ValueError(f"bptt_depth must be >= 1, got {bptt_depth}")
    model = init_rnn_model(corpus.vocab, hidden_size, n_classes, eos_count=len(corpus),
                           temperature=temperature, seed=seed)
    rng = np.random.default_rng(seed)
    rate = learning_rate
    previous = None
    for epoch in range(1, epochs + 1):
        total, events = 0.0, 0
        for index in rng.permutation(len(corpus)):
            loss, grads, count = sentence_loss_and_gradients(model, corpus.sentences[index], bptt_depth)
            if not math.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss in epoch {epoch} (learning rate {rate:g} too high?)")
            for name in PARAMETERS:
                getattr(model, name)[...] -= rate * grads[name]
            total += loss
            events += count
        train_loss = total / events
        if not math.isfinite(train_loss):
            raise TrainingError(f"non-finite loss in epoch {epoch} (learning rate {rate:g} too high?)")
        model.training_loss.append(train_loss)
        monitored = _corpus_loss(model, valid_corpus) if valid_corpus is not None else train_loss
        logger.info("epoch %d/%d: loss %.4f (monitored %.4f, rate %g)", epoch, epochs, train_loss, monitored, rate)
        if previous is not None and monitored > previous * (1.0 - min_improvement):
            rate /= 2.0
        previous = monitored if previous is None else min(previous, monitored)
    return model


def perplexity(model: RnnModel, corpus: SentenceCorpus) -> float:
    """Per-event perplexity, EOS included."""
    return math.exp(_corpus_loss(model, corpus))


def save_rnn_model(model: RnnModel, path: Union[str, Path]) -> None:
    arrays = {name: getattr(model, name) for name in PARAMETERS}
    arrays.update({
        "word_class": model.word_class,
        "temperature": np.array(model.temperature),
        "initial_activation": np.array(model.initial_activation),
        **vocabulary_arrays(model.vocab),
    })
    write_model_file(path, MAGIC, arrays)


def load_rnn_model(path: Union[str, Path]) -> RnnModel:
    arrays = read_model_file(path, MAGIC)
    return RnnModel(
        vocab=vocabulary_from_arrays(arrays),
        word_class=arrays["word_class"].astype(np.int64),
        temperature=float(arrays["temperature"]),
        initial_activation=float(arrays["initial_activation"]),
        **{name: arrays[name].astype(np.float64) for name in PARAMETERS},
    )
