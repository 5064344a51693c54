"""Run configuration: YAML file loading, flag precedence, validation.

A run is described by a YAML file with the key tree
``backend.{url,model,embedding_model,timeout_s}``, ``prompts.style``,
``grounding.{domain_file,problem_file}`` and
``pipeline.{concurrency,max_prompt_chars,cache_dir,out_dir}``.
Command-line flags override file values, which override defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import yaml

from .backend import BackendConfig
from .prompts import GroundingContext, PromptStyle, load_grounding

LEVELS = ("segment", "file", "package", "repo")

_KNOWN_KEYS = {
    "backend": {"url", "model", "embedding_model", "timeout_s"},
    "prompts": {"style"},
    "grounding": {"domain_file", "problem_file"},
    "pipeline": {"concurrency", "max_prompt_chars", "cache_dir", "out_dir"},
}


class ConfigError(Exception):
    """A configuration problem that must abort the run (exit code 2)."""


@dataclass(frozen=True)
class RunConfig:
    backend: BackendConfig
    prompt_style: PromptStyle = PromptStyle.STRUCTURED_ONE_SHOT
    grounding_domain_file: Optional[str] = None
    grounding_problem_file: Optional[str] = None
    concurrency: int = 4
    max_prompt_chars: int = 96_000
    cache_dir: str = ".hiersum-cache"
    out_dir: str = "out"
    include_text: bool = False
    mock_mode: bool = False
    level: str = "repo"

    def __post_init__(self) -> None:
        if self.concurrency < 1:
            raise ConfigError("pipeline.concurrency must be a positive integer")
        if self.max_prompt_chars < 1:
            raise ConfigError("pipeline.max_prompt_chars must be a positive integer")
        if self.level not in LEVELS:
            raise ConfigError(f"level must be one of {', '.join(LEVELS)}")
        if bool(self.grounding_domain_file) != bool(self.grounding_problem_file):
            raise ConfigError(
                "grounding requires both domain_file and problem_file, or neither"
            )


def load_config_file(path: str) -> dict:
    """Read and validate the YAML key tree; unknown keys are errors."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(raw) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping at top level")
    for section, keys in data.items():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config section {section!r} in {path}")
        if not isinstance(keys, dict):
            raise ConfigError(f"config section {section!r} must be a mapping")
        for key in keys:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown config key {section}.{key} in {path}")
    return data


def build_run_config(
    file_values: Optional[dict] = None,
    api_key: Optional[str] = None,
    **flags,
) -> RunConfig:
    """Merge defaults, config-file values, and flag overrides (in that order).

    *flags* uses the RunConfig field names plus ``backend_url``, ``model``,
    ``embedding_model`` and ``timeout_s`` for the nested backend settings;
    ``None`` values mean "not given".
    """
    values = file_values or {}
    backend_section = values.get("backend", {})
    prompts_section = values.get("prompts", {})
    grounding_section = values.get("grounding", {})
    pipeline_section = values.get("pipeline", {})

    def pick(flag_name, file_section, file_key, default):
        flag = flags.pop(flag_name, None)
        if flag is not None:
            return flag
        file_value = file_section.get(file_key)
        return default if file_value is None else file_value

    try:
        backend = BackendConfig(
            base_url=pick("backend_url", backend_section, "url", "http://localhost:8000"),
            model_id=pick("model", backend_section, "model", "local-model"),
            embedding_model_id=pick(
                "embedding_model", backend_section, "embedding_model", ""
            ),
            timeout_s=float(pick("timeout_s", backend_section, "timeout_s", 120.0)),
            api_key=api_key,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    style_name = pick(
        "prompt_style", prompts_section, "style", PromptStyle.STRUCTURED_ONE_SHOT.value
    )
    try:
        style = PromptStyle(style_name)
    except ValueError:
        raise ConfigError(
            f"unknown prompt style {style_name!r}; expected one of "
            + ", ".join(s.value for s in PromptStyle)
        ) from None

    try:
        config = RunConfig(
            backend=backend,
            prompt_style=style,
            grounding_domain_file=pick(
                "grounding_domain", grounding_section, "domain_file", None
            ),
            grounding_problem_file=pick(
                "grounding_problem", grounding_section, "problem_file", None
            ),
            concurrency=int(pick("concurrency", pipeline_section, "concurrency", 4)),
            max_prompt_chars=int(
                pick("max_prompt_chars", pipeline_section, "max_prompt_chars", 96_000)
            ),
            cache_dir=str(pick("cache_dir", pipeline_section, "cache_dir", ".hiersum-cache")),
            out_dir=str(pick("out_dir", pipeline_section, "out_dir", "out")),
            include_text=bool(flags.pop("include_text", None) or False),
            mock_mode=bool(flags.pop("mock_mode", None) or False),
            level=flags.pop("level", None) or "repo",
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if flags:
        raise TypeError(f"unknown flag overrides: {sorted(flags)}")
    return config


def with_overrides(config: RunConfig, **changes) -> RunConfig:
    """A copy of *config* with the given fields replaced."""
    return replace(config, **changes)


def grounding_context(config: RunConfig) -> GroundingContext:
    """Load the configured grounding pair, or the ungrounded baseline."""
    if not config.grounding_domain_file:
        return GroundingContext()
    try:
        return load_grounding(
            config.grounding_domain_file, config.grounding_problem_file
        )
    except OSError as exc:
        raise ConfigError(f"cannot read grounding file: {exc}") from exc
