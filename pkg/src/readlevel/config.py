"""One flat config shared by every subcommand.

Each field maps one-to-one onto a command-line flag (underscores become
hyphens); values given on the command line win over the config file,
which wins over these defaults.
"""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass
from pathlib import Path

from .pipeline import MODES
from .textcore import TARGET_LEVELS

EMBEDDING_PROVIDERS = ("none", "lexicon-file", "http-service")


@dataclass
class CliConfig:
    # corpus ingestion
    corpus_path: str | None = None
    text_column: str = "text"
    id_column: str | None = None
    delimiter: str = ","
    # provider
    provider_kind: str = "mock"
    endpoint: str | None = None
    model_name: str = "mock"
    api_key_env: str | None = None
    temperature: float = 1.0
    max_retries: int = 3
    retry_initial_delay: float = 0.5
    retry_multiplier: float = 2.0
    request_timeout: float = 60.0
    seed: int = 0
    max_in_flight: int = 4
    requests_per_second: float | None = None
    prompts_path: str | None = None
    # pipeline
    mode: str = "one-step"
    targets: tuple[int, ...] = TARGET_LEVELS
    run_id: str | None = None
    out_dir: str = "runs"
    workers: int = 1
    # garbage detector thresholds
    garbage_vowelless_ratio: float = 0.2
    garbage_vowelless_min_len: int = 4
    garbage_max_repeats: int = 5
    garbage_nonalpha_ratio: float = 0.4
    garbage_min_tokens: int = 3
    garbage_source_min_tokens: int = 30
    # scoring and reporting
    embeddings_provider: str = "none"
    embeddings_path: str | None = None
    embeddings_url: str | None = None
    embeddings_model: str | None = None
    embeddings_dim: int = 64
    syllable_lexicon: str | None = None
    bin_width: float = 5.0
    min_count: int = 10
    charts: bool = False
    length_in_words: bool = False

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.embeddings_provider not in EMBEDDING_PROVIDERS:
            raise ValueError(f"embeddings_provider must be one of {EMBEDDING_PROVIDERS}")
        if list(self.targets) != sorted(set(self.targets)):
            raise ValueError("targets must be strictly increasing")
        known = set(TARGET_LEVELS) | set(_prompt_override_levels(self.prompts_path))
        unknown = [t for t in self.targets if t not in known]
        if unknown:
            raise ValueError(f"targets without a prompt in the catalog: {unknown}")
        if self.embeddings_provider == "http-service" and not self.embeddings_url:
            raise ValueError("http-service embeddings require embeddings_url")


def _prompt_override_levels(prompts_path: str | None) -> list[int]:
    if not prompts_path:
        return []
    return [int(k) for k in json.loads(Path(prompts_path).read_text("utf-8"))]


def load_prompt_overrides(prompts_path: str | None) -> dict[int, str] | None:
    if not prompts_path:
        return None
    raw = json.loads(Path(prompts_path).read_text("utf-8"))
    return {int(level): str(text) for level, text in raw.items()}


def config_field_names() -> list[str]:
    return [f.name for f in dataclasses.fields(CliConfig)]


def _coerce(name: str, hint, raw):
    """Parse a command-line string into the field's declared type."""
    if raw is None or isinstance(raw, bool):
        return raw
    base = hint
    if typing.get_origin(hint) is typing.Union:
        non_none = [a for a in typing.get_args(hint) if a is not type(None)]
        base = non_none[0]
    if name == "targets":
        return tuple(int(part) for part in str(raw).split(",") if part.strip())
    if base is int:
        return int(raw)
    if base is float:
        return float(raw)
    return raw


def build_config(file_path: str | None, overrides: dict) -> CliConfig:
    """Defaults, then the config file, then non-null flag overrides."""
    values: dict = {}
    if file_path:
        data = json.loads(Path(file_path).read_text("utf-8"))
        unknown = set(data) - set(config_field_names())
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    hints = typing.get_type_hints(CliConfig)
    for name in config_field_names():
        raw = overrides.get(name)
        if raw is not None:
            values[name] = _coerce(name, hints[name], raw)
    if "targets" in values and not isinstance(values["targets"], tuple):
        values["targets"] = tuple(int(t) for t in values["targets"])
    config = CliConfig(**values)
    config.validate()
    return config
