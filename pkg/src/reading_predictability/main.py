"""
Main module for the reading-predictability toolkit.
"""
from typing import List, Optional
import argparse
import logging
import sys
from pathlib import Path

from .config import analysis_defaults
from .corpus import TokenizerRules, Vocabulary, build_vocabulary, encode_corpus, iter_sentences, read_corpus
from .eyedata import (
    compute_measures,
    filter_measures,
    read_fixations,
    sentence_lengths,
    stimulus_word_lengths,
    write_measures,
)
from .models import Measure
from .ngram import count_ngrams, estimate_kn, perplexity as ngram_perplexity, save_kn_model, write_arpa
from .pipeline import emit_reports, frequency_vocabulary, load_analysis_config, load_models, run_analysis
from .report_renderer import ReportRenderer, write_report
from .rnn import perplexity as rnn_perplexity, save_rnn_model, train_rnn
from .scoring import ScoringSettings, align_predictors, read_norms, read_stimuli, score_stimuli, summarize_scores
from .topics import save_lda_model, train_lda, write_top_words
from .toy_data import generate_toy_dataset

logger = logging.getLogger(__name__)


def _load_training_corpus(corpus_path: str, vocab_path: Optional[str], min_count: int, rules: TokenizerRules):
    """
    Read, tokenize and encode a training corpus.

    Args:
        corpus_path (str): One sentence per line, blank lines between documents
        vocab_path (Optional[str]): Vocabulary TSV; built from the corpus if None
        min_count (int): Minimum count of words kept when building the vocabulary
        rules (TokenizerRules): Tokenizer switches

    Returns:
        SentenceCorpus: The encoded corpus

    Raises:
        ValueError: If the corpus is empty
    """
    documents = read_corpus(corpus_path, rules)
    vocab = Vocabulary.from_tsv(vocab_path) if vocab_path else build_vocabulary(iter_sentences(documents), min_count)
    return encode_corpus(documents, vocab)


def build_vocab(corpus_path: str, output: str, min_count: int, rules: TokenizerRules) -> None:
    """Build a vocabulary TSV (word, id, count) from a corpus."""
    try:
        documents = read_corpus(corpus_path, rules)
        vocab = build_vocabulary(iter_sentences(documents), min_count)
        vocab.to_tsv(output)
        print(f"Wrote {len(vocab)} words ({vocab.total_tokens} tokens) to {output}")
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


def train_ngram(corpus_path: str, output: str, order: int, vocab_path: Optional[str], min_count: int,
                rules: TokenizerRules, arpa: Optional[str] = None) -> None:
    """Train and save an interpolated Kneser-Ney model."""
    try:
        corpus = _load_training_corpus(corpus_path, vocab_path, min_count, rules)
        model = estimate_kn(count_ngrams(corpus, order))
        save_kn_model(model, output)
        if arpa:
            write_arpa(model, arpa)
        print(f"Saved {order}-gram model to {output}")
        print(f"Discounts: {', '.join(f'{d:.4f}' for d in model.discounts)}")
        print(f"Training perplexity: {ngram_perplexity(model, corpus):.2f}")
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


def train_topics(corpus_path: str, output: str, n_topics: int, alpha: float, beta: float, sweeps: int,
                 seed: int, vocab_path: Optional[str], min_count: int, rules: TokenizerRules,
                 top_words: Optional[str] = None) -> None:
    """Train and save an LDA topic model."""
    try:
        corpus = _load_training_corpus(corpus_path, vocab_path, min_count, rules)
        model = train_lda(corpus, n_topics=n_topics, alpha=alpha, beta=beta, sweeps=sweeps, seed=seed)
        save_lda_model(model, output)
        if top_words:
            write_top_words(model, top_words)
        print(f"Saved {n_topics}-topic model to {output}")
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


def train_recurrent(corpus_path: str, output: str, hidden: int, epochs: int, learning_rate: float,
                    bptt: int, temperature: float, seed: int, vocab_path: Optional[str], min_count: int,
                    rules: TokenizerRules, valid_path: Optional[str] = None) -> None:
    """Train and save the recurrent language model."""
    try:
        corpus = _load_training_corpus(corpus_path, vocab_path, min_count, rules)
        valid = encode_corpus(read_corpus(valid_path, rules), corpus.vocab) if valid_path else None
        model = train_rnn(corpus, hidden_size=hidden, epochs=epochs, learning_rate=learning_rate,
                          bptt_depth=bptt, seed=seed, temperature=temperature, valid_corpus=valid)
        save_rnn_model(model, output)
        print(f"Saved recurrent model ({hidden} hidden units, {model.n_classes} output classes) to {output}")
        if valid is not None:
            print(f"Validation perplexity: {rnn_perplexity(model, valid):.2f}")
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


def score(config_path: str, output: Optional[str] = None) -> None:
    """Score the configured stimuli and write the predictor table and score ranges."""
    try:
        config = load_analysis_config(config_path)
        rules = TokenizerRules(config.lowercase, config.strip_punctuation)
        stimuli = read_stimuli(config.stimuli, rules)
        norms = read_norms(config.norms, config.n_protocols) if config.norms is not None else {}
        models = load_models(config)
        settings = ScoringSettings(config.fold_in_sweeps, config.fold_in_samples, config.seed, config.n_protocols)
        raw_scores = score_stimuli(stimuli, models, norms, settings)
        rows = align_predictors(raw_scores, frequency_vocabulary(config, models, stimuli), config.sources)

        renderer = ReportRenderer(config.sources)
        target = Path(output) if output else Path(config.output_dir) / "predictors.tsv"
        write_report(target, renderer.render_predictors(rows))
        write_report(target.with_name("score_ranges.tsv"),
                     renderer.render_score_ranges(summarize_scores(raw_scores, config.sources)))
        print(f"Wrote {len(rows)} predictor rows ({sum(row.complete for row in rows)} complete) to {target}")
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


def measures(fixations_path: str, stimuli_path: str, output_dir: str, measure_names: List[str],
             rules: TokenizerRules) -> None:
    """Compute, filter and write SFD/GD/TVT observations."""
    try:
        stimuli = read_stimuli(stimuli_path, rules)
        table = compute_measures(read_fixations(fixations_path), stimulus_word_lengths(stimuli))
        lengths = sentence_lengths(stimuli)
        renderer = ReportRenderer([])
        reports = []
        for name in measure_names:
            measure = Measure(name.upper())
            rows, report = filter_measures(table, measure, lengths)
            reports.append(report)
            write_measures(rows, Path(output_dir) / f"measures_{measure.value}.tsv")
        write_report(Path(output_dir) / "filter_counts.tsv", renderer.render_filter_reports(reports))

        print(f"\nFiltered measures in {output_dir}:")
        print("-" * 50)
        for report in reports:
            print(f"{report.measure.value}: kept {report.kept}, dropped {report.dropped_short} short, "
                  f"{report.dropped_long} long, {report.dropped_boundary} boundary, {report.missing} missing")
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


def analyze(config_path: str, seed: Optional[int] = None, workers: Optional[int] = None,
            output_dir: Optional[str] = None) -> None:
    """Run the full analysis and write the report bundle."""
    try:
        config = load_analysis_config(config_path)
        if seed is not None:
            config.seed = seed
        if workers is not None:
            config.workers = workers
        if output_dir is not None:
            config.output_dir = Path(output_dir)
        bundle = run_analysis(config)
        written = emit_reports(bundle, config.output_dir, config.sources)

        print(f"\nAnalysis written to {config.output_dir} ({len(written)} files)")
        print("-" * 50)
        for measure, rows in bundle.ladders.items():
            failed = sum(row.failed for row in rows)
            significant = sum(row.significant for row in rows)
            print(f"{measure}: {len(rows)} ladder rows, {significant} significant, {failed} failed")
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


def generate_toy(output_dir: str, seed: int, sentences: int, subjects: int) -> None:
    """Generate the synthetic toy dataset with trained models and a config file."""
    try:
        dataset = generate_toy_dataset(output_dir, seed=seed, n_sentences=sentences, n_subjects=subjects)
        print(f"Toy dataset written to {dataset.root}")
        print(f"Run: reading-predictability analyze {dataset.config}")
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


def _add_corpus_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("corpus", help="Corpus file: one sentence per line, blank lines between documents")
    parser.add_argument("output", help="Output model file")
    parser.add_argument("--vocab", help="Vocabulary TSV (default: built from the corpus)")
    parser.add_argument("--min-count", type=int, default=1, help="Minimum word count when building the vocabulary")


def _rules(args: argparse.Namespace) -> TokenizerRules:
    return TokenizerRules(lowercase=not args.keep_case, strip_punctuation=not args.keep_punctuation)


def main() -> None:
    """Main entry point for the CLI."""
    parser = argparse.ArgumentParser(description="Word predictability and eye-movement analysis toolkit")
    parser.add_argument("--verbose", action="store_true", help="Log debug messages")
    parser.add_argument("--keep-case", action="store_true", help="Do not lowercase tokens")
    parser.add_argument("--keep-punctuation", action="store_true", help="Do not strip punctuation from tokens")
    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    # Build vocabulary command
    vocab_parser = subparsers.add_parser("build-vocab", help="Build a vocabulary TSV from a corpus")
    vocab_parser.add_argument("corpus", help="Corpus file")
    vocab_parser.add_argument("output", help="Output vocabulary TSV")
    vocab_parser.add_argument("--min-count", type=int, default=1, help="Minimum word count")

    # Train n-gram command
    ngram_parser = subparsers.add_parser("train-ngram", help="Train an interpolated Kneser-Ney model")
    _add_corpus_arguments(ngram_parser)
    ngram_parser.add_argument("--order", type=int, default=analysis_defaults.NGRAM_ORDER, help="N-gram order")
    ngram_parser.add_argument("--arpa", help="Also write the model in ARPA format")

    # Train LDA command
    lda_parser = subparsers.add_parser("train-lda", help="Train an LDA topic model by Gibbs sampling")
    _add_corpus_arguments(lda_parser)
    lda_parser.add_argument("--topics", type=int, default=analysis_defaults.LDA_TOPICS, help="Number of topics")
    lda_parser.add_argument("--alpha", type=float, default=analysis_defaults.LDA_ALPHA, help="Document-topic prior")
    lda_parser.add_argument("--beta", type=float, default=analysis_defaults.LDA_BETA, help="Topic-word prior")
    lda_parser.add_argument("--sweeps", type=int, default=analysis_defaults.LDA_SWEEPS, help="Gibbs sweeps")
    lda_parser.add_argument("--seed", type=int, default=analysis_defaults.SEED, help="Random seed")
    lda_parser.add_argument("--top-words", help="Write the top words of every topic to this TSV")

    # Train RNN command
    rnn_parser = subparsers.add_parser("train-rnn", help="Train the recurrent language model")
    _add_corpus_arguments(rnn_parser)
    rnn_parser.add_argument("--hidden", type=int, default=analysis_defaults.RNN_HIDDEN, help="Hidden units")
    rnn_parser.add_argument("--epochs", type=int, default=analysis_defaults.RNN_EPOCHS, help="Training epochs")
    rnn_parser.add_argument("--learning-rate", type=float, default=analysis_defaults.RNN_LEARNING_RATE,
                            help="Initial learning rate")
    rnn_parser.add_argument("--bptt", type=int, default=analysis_defaults.RNN_BPTT_DEPTH,
                            help="Steps of backpropagation through time")
    rnn_parser.add_argument("--temperature", type=float, default=analysis_defaults.RNN_TEMPERATURE,
                            help="Output temperature")
    rnn_parser.add_argument("--seed", type=int, default=analysis_defaults.SEED, help="Random seed")
    rnn_parser.add_argument("--valid", help="Validation corpus for the learning-rate schedule")

    # Score command
    score_parser = subparsers.add_parser("score", help="Score stimuli and write the predictor table")
    score_parser.add_argument("config", help="Analysis configuration file")
    score_parser.add_argument("--output", help="Predictor TSV (default: <output_dir>/predictors.tsv)")

    # Measures command
    measures_parser = subparsers.add_parser("measures", help="Compute and filter SFD/GD/TVT")
    measures_parser.add_argument("fixations", help="Fixation events TSV")
    measures_parser.add_argument("stimuli", help="Stimulus TSV")
    measures_parser.add_argument("output_dir", help="Directory for the measure tables")
    measures_parser.add_argument("--measure", action="append", choices=[m.value for m in Measure],
                                 help="Measure to write (repeatable; default: all)")

    # Analyze command
    analyze_parser = subparsers.add_parser("analyze", help="Run the full analysis and write all reports")
    analyze_parser.add_argument("config", help="Analysis configuration file")
    analyze_parser.add_argument("--seed", type=int, help="Override the configured seed")
    analyze_parser.add_argument("--workers", type=int, help="Parallel model fits")
    analyze_parser.add_argument("--output-dir", help="Override the configured output directory")

    # Generate toy dataset command
    toy_parser = subparsers.add_parser("generate-toy", help="Generate the synthetic toy dataset")
    toy_parser.add_argument("output_dir", help="Target directory")
    toy_parser.add_argument("--seed", type=int, default=analysis_defaults.SEED, help="Random seed")
    toy_parser.add_argument("--sentences", type=int, default=200, help="Stimulus sentences")
    toy_parser.add_argument("--subjects", type=int, default=5, help="Simulated readers")

    args = parser.parse_args()
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    rules = _rules(args)
    logger.debug("command: %s", args.command)

    if args.command == "build-vocab":
        build_vocab(args.corpus, args.output, args.min_count, rules)
    elif args.command == "train-ngram":
        train_ngram(args.corpus, args.output, args.order, args.vocab, args.min_count, rules, args.arpa)
    elif args.command == "train-lda":
        train_topics(args.corpus, args.output, args.topics, args.alpha, args.beta, args.sweeps, args.seed,
                     args.vocab, args.min_count, rules, args.top_words)
    elif args.command == "train-rnn":
        train_recurrent(args.corpus, args.output, args.hidden, args.epochs, args.learning_rate, args.bptt,
                        args.temperature, args.seed, args.vocab, args.min_count, rules, args.valid)
    elif args.command == "score":
        score(args.config, args.output)
    elif args.command == "measures":
        measures(args.fixations, args.stimuli, args.output_dir, args.measure or list(analysis_defaults.MEASURES),
                 rules)
    elif args.command == "analyze":
        analyze(args.config, args.seed, args.workers, args.output_dir)
    elif args.command == "generate-toy":
        generate_toy(args.output_dir, args.seed, args.sentences, args.subjects)
    else:
        parser.print_help()


if __name__ == "__main__":
    main()
