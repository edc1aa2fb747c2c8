"""Command-line entry point: analyze, generate, score, report, stats.

Exit codes: 0 success, 1 runtime failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import typing
from pathlib import Path

from . import dataset, pipeline, report, textcore
from .config import CliConfig, build_config, config_field_names, load_prompt_overrides
from .embeddings import EmbeddingServiceError, HttpEmbeddings, LexiconEmbeddings
from .providers import (
    AuthError,
    GarbageThresholds,
    ProviderConfig,
    ProviderError,
    UnknownLevel,
)

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    hints = typing.get_type_hints(CliConfig)
    for field in dataclasses.fields(CliConfig):
        flag = "--" + field.name.replace("_", "-")
        if hints[field.name] is bool:
            parser.add_argument(
                flag, dest=field.name, action=argparse.BooleanOptionalAction,
                default=None, help=f"config key {field.name}",
            )
        else:
            parser.add_argument(
                flag, dest=field.name, default=None, metavar="V",
                help=f"config key {field.name}",
            )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="readlevel",
        description="Generate and evaluate readability-controlled paraphrases.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def subcommand(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="path to a JSON config file")
        _add_config_flags(p)
        return p

    p = subcommand("analyze", "score one passage and print its analysis")
    p.add_argument("input", help="path to a text file, or '-' for stdin")

    subcommand("generate", "run the generation pipeline over a corpus")

    p = subcommand("score", "score a completed run")
    p.add_argument("run_id", help="run id under out_dir, or a full run directory path")

    p = subcommand("report", "export summary tables and charts for a scored run")
    p.add_argument("run_id", help="run id under out_dir, or a full run directory path")

    subcommand("stats", "corpus statistics and reading-ease histogram")
    return parser


def _config_from_args(args: argparse.Namespace) -> CliConfig:
    overrides = {name: getattr(args, name) for name in config_field_names()}
    return build_config(args.config, overrides)


def _load_corpus(config: CliConfig) -> dataset.Corpus:
    if not config.corpus_path:
        raise ValueError("corpus_path is required (flag --corpus-path or config file)")
    path = Path(config.corpus_path)
    if path.is_dir():
        return dataset.load_corpus_dir(path)
    return dataset.load_corpus(
        path,
        text_column=config.text_column,
        id_column=config.id_column,
        delimiter=config.delimiter,
    )


def _syllable_lexicon(config: CliConfig) -> dict[str, int] | None:
    if not config.syllable_lexicon:
        return None
    return textcore.load_syllable_lexicon(config.syllable_lexicon)


def _provider_config(config: CliConfig) -> ProviderConfig:
    return ProviderConfig(
        kind=config.provider_kind,
        endpoint=config.endpoint,
        model_name=config.model_name,
        api_key_env=config.api_key_env,
        temperature=config.temperature,
        max_retries=config.max_retries,
        retry_initial_delay=config.retry_initial_delay,
        retry_multiplier=config.retry_multiplier,
        request_timeout=config.request_timeout,
        seed=config.seed,
        max_in_flight=config.max_in_flight,
        requests_per_second=config.requests_per_second,
    )


def _garbage_thresholds(config: CliConfig) -> GarbageThresholds:
    return GarbageThresholds(
        vowelless_ratio=config.garbage_vowelless_ratio,
        vowelless_min_len=config.garbage_vowelless_min_len,
        max_consecutive_repeats=config.garbage_max_repeats,
        nonalpha_ratio=config.garbage_nonalpha_ratio,
        min_tokens=config.garbage_min_tokens,
        source_min_tokens=config.garbage_source_min_tokens,
    )


def _make_embedder(config: CliConfig):
    if config.embeddings_provider == "none":
        return None
    if config.embeddings_provider == "lexicon-file":
        return LexiconEmbeddings(config.embeddings_path, dim=config.embeddings_dim)
    return HttpEmbeddings(config.embeddings_url, model=config.embeddings_model)


def _resolve_run_dir(config: CliConfig, run_id: str) -> Path:
    as_path = Path(run_id)
    if as_path.is_dir() and (as_path / "manifest.json").exists():
        return as_path
    return Path(config.out_dir) / run_id


def cmd_analyze(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    if args.input == "-":
        text = sys.stdin.read()
    else:
        text = Path(args.input).read_text("utf-8")
    analysis = textcore.analyze(text, _syllable_lexicon(config))
    cls = textcore.classify(analysis.fres)
    print(f"words:      {analysis.n_words}")
    print(f"sentences:  {analysis.n_sentences}")
    print(f"syllables:  {analysis.n_syllables}")
    print(f"fres:       {analysis.fres:.2f}")
    if cls is None:
        print("class:      out of range (score outside 0-100)")
    else:
        print(f"class:      {cls.label} ({cls.grade})")
        print(f"meaning:    {cls.description}")
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = _load_corpus(config)
    provider_config = _provider_config(config)
    from .providers import make_provider

    provider = make_provider(provider_config)
    provider.preflight()  # fail before creating any run directory
    manifest = pipeline.make_manifest(
        corpus, provider_config, config.mode, config.targets, run_id=config.run_id
    )
    done = 0

    def progress(_source_id: str) -> None:
        nonlocal done
        done += 1
        if done % 25 == 0 or done == len(corpus):
            print(f"  {done}/{len(corpus)} sources", file=sys.stderr)

    result = pipeline.run(
        manifest,
        corpus,
        config.out_dir,
        provider=provider,
        workers=config.workers,
        garbage_thresholds=_garbage_thresholds(config),
        prompt_overrides=load_prompt_overrides(config.prompts_path),
        progress=progress,
    )
    print(f"run_id: {manifest.run_id}")
    print(
        f"records: {result.written} written, {result.skipped} skipped, "
        f"{result.fallbacks} fallbacks"
    )
    print(f"store: {result.run_dir / 'records.jsonl'}")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    run_dir = _resolve_run_dir(config, args.run_id)
    result = pipeline.score_run(
        run_dir,
        embedder=_make_embedder(config),
        lexicon=_syllable_lexicon(config),
    )
    print(f"scored {result.n_examples} examples / {result.n_pairs} pairs")
    print(f"scores: {result.scores_dir}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    run_dir = _resolve_run_dir(config, args.run_id)
    if not (run_dir / "scores" / "pairs.jsonl").exists():
        raise FileNotFoundError(f"no scores under {run_dir}; run 'score' first")
    manifest = pipeline.load_manifest(run_dir)
    example_rows = pipeline.read_score_rows(run_dir, "individual")
    pair_rows = pipeline.read_score_rows(run_dir, "pairs")
    written = report.export_report(
        run_dir / "report",
        example_rows,
        pair_rows,
        targets=manifest.targets,
        bin_width=config.bin_width,
        min_count=config.min_count,
        charts=config.charts,
        length_in_words=config.length_in_words,
    )
    print(f"wrote {len(written)} files under {run_dir / 'report'}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = _load_corpus(config)
    lexicon = _syllable_lexicon(config)
    stats = dataset.corpus_stats(corpus.entries, lexicon)
    hist = dataset.fres_histogram(corpus.entries, bin_width=config.bin_width, lexicon=lexicon)
    print(f"examples:   {stats.n_examples} (skipped empty: {corpus.skipped_empty})")
    print(f"words:      {stats.words_mean:.1f} +/- {stats.words_std:.1f}")
    print(f"sentences:  {stats.sentences_mean:.1f} +/- {stats.sentences_std:.1f}")
    print(f"paragraphs: {stats.paragraphs_mean:.1f} +/- {stats.paragraphs_std:.1f}")
    print("fres histogram:")
    for start, count in zip(hist.starts, hist.counts):
        print(f"  [{start:7.2f}, {start + hist.bin_width:7.2f}): {count}")
    return 0


_COMMANDS = {
    "analyze": cmd_analyze,
    "generate": cmd_generate,
    "score": cmd_score,
    "report": cmd_report,
    "stats": cmd_stats,
}

_USAGE_ERRORS = (
    textcore.EmptyText,
    dataset.CorpusError,
    UnknownLevel,
    ValueError,
    FileNotFoundError,
    json.JSONDecodeError,
)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except AuthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR  # missing/rejected credential before any records
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (pipeline.PipelineError, ProviderError, EmbeddingServiceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
