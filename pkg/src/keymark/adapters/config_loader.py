"""YAML run and training configuration files.

Training files hold the sections ``model``, ``weights``, ``mel``,
``training``, ``corpus``, ``attacks`` and ``paths``; evaluation files hold
``evaluation``, ``corpus``, ``attacks`` and ``paths``. Relative paths are
resolved against the directory of the configuration file.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import ValidationError

from ..entities import AttackConfig, RunConfig, TrainConfig
from ..entities.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TRAIN_SECTIONS = {"model", "weights", "mel", "training", "corpus", "attacks", "paths"}
RUN_SECTIONS = {"evaluation", "corpus", "attacks", "paths"}


def read_yaml(path: PathLike) -> Dict[str, Any]:
    """Parse a YAML mapping; an empty file yields an empty mapping."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read configuration {path}: {e}")
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"invalid YAML in {path}: {e}")
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping of sections")
    return document


def _check_sections(document: Dict[str, Any], allowed: set, path: PathLike) -> None:
    unknown = sorted(set(document) - allowed)
    if unknown:
        listing = ", ".join(unknown)
        raise ConfigurationError(f"{path}: unknown sections {listing}; allowed: {', '.join(sorted(allowed))}")


def _resolve(base: Path, value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    candidate = Path(value).expanduser()
    return str(candidate if candidate.is_absolute() else base / candidate)


def _attacks(entries: Optional[List[Any]], path: PathLike) -> Optional[List[AttackConfig]]:
    if entries is None:
        return None
    menu = []
    for index, entry in enumerate(entries):
        if isinstance(entry, str):
            entry = {"op": entry.upper()}
        try:
            menu.append(AttackConfig.model_validate(entry))
        except ValidationError as e:
            raise ConfigurationError(f"{path}: attacks[{index}]: {e}")
    return menu


def _validated(factory, payload: Dict[str, Any], path: PathLike):
    try:
        return factory(payload)
    except ValidationError as e:
        raise ConfigurationError(f"{path}: {e}")


def train_config_from_dict(
    document: Dict[str, Any],
    base: Path = Path("."),
    source: PathLike = "<dict>",
) -> TrainConfig:
    _check_sections(document, TRAIN_SECTIONS, source)
    paths = document.get("paths") or {}
    corpus = dict(document.get("corpus") or {})
    if corpus.get("wav_dir"):
        corpus["wav_dir"] = _resolve(base, corpus["wav_dir"])

    payload: Dict[str, Any] = dict(document.get("training") or {})
    for section in ("model", "weights", "mel"):
        if document.get(section):
            payload[section] = document[section]
    payload["corpus"] = corpus
    attacks = _attacks(document.get("attacks"), source) if "attacks" in document else None
    if attacks is not None:
        payload["attacks"] = attacks
    if paths.get("checkpoint_dir"):
        payload["checkpoint_dir"] = _resolve(base, paths["checkpoint_dir"])
    if paths.get("checkpoint_name"):
        payload["checkpoint_name"] = paths["checkpoint_name"]
    return _validated(TrainConfig.model_validate, payload, source)


def load_train_config(path: PathLike) -> TrainConfig:
    """Read and validate a training configuration file.

    Raises:
        ConfigurationError: On unreadable files, YAML errors or invalid values
    """
    config = train_config_from_dict(read_yaml(path), Path(path).resolve().parent, path)
    logger.debug(f"Loaded training configuration from {path}: {config.steps} steps")
    return config


def run_config_from_dict(
    document: Dict[str, Any],
    base: Path = Path("."),
    source: PathLike = "<dict>",
    report: Optional[str] = None,
) -> RunConfig:
    _check_sections(document, RUN_SECTIONS, source)
    paths = document.get("paths") or {}
    payload: Dict[str, Any] = dict(document.get("evaluation") or {})
    if "corpus" in document:
        payload["corpus"] = document["corpus"] or {}
    attacks = _attacks(document.get("attacks"), source) if "attacks" in document else None
    if attacks is not None:
        payload["attacks"] = attacks
    payload["checkpoint"] = _resolve(base, paths.get("checkpoint"))
    payload["clips"] = [_resolve(base, clip) for clip in paths.get("clips") or []]
    payload["report"] = report or _resolve(base, paths.get("report"))
    if payload["checkpoint"] is None:
        raise ConfigurationError(f"{source}: paths.checkpoint is required")
    return _validated(RunConfig.model_validate, payload, source)


def load_run_config(path: PathLike, report: Optional[str] = None) -> RunConfig:
    """Read and validate an evaluation configuration file.

    ``report`` overrides ``paths.report`` from the file.
    """
    return run_config_from_dict(read_yaml(path), Path(path).resolve().parent, path, report)
