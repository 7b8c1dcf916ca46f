#!/usr/bin/env python3

"""
Flat ``key = value`` configuration files.

Values stay strings until ``coerce`` converts them with the kind their key
declares; numeric kinds go through ``ConfigEval`` so arithmetic is allowed.
"""

import logging
import os
from pathlib import Path

from .errors import ParseError
from .evaluators import ConfigEval

logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "VIREVAL_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs"

TRUE_WORDS = ("1", "true", "yes", "on")
FALSE_WORDS = ("0", "false", "no", "off")
NONE_WORDS = ("", "none", "null")


def default_output_root() -> str:
    return os.environ.get(OUTPUT_ROOT_ENV) or DEFAULT_OUTPUT_ROOT


def read_config_file(path) -> dict:
    """
    :param path: config file, ``#`` starts a comment
    :return: raw string values by key, later lines win
    :rtype: dict
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as err:
        raise ParseError(f"cannot read config file {path}: {err}") from err
    values = {}
    for number, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ParseError(f"expected 'key = value' in {path}", row=number)
        values[key.strip().replace("-", "_")] = value.strip()
    logger.debug("read %d settings from %s", len(values), path)
    return values


def coerce(raw: str, kind: str, key: str = None, evaluator: ConfigEval = None):
    """
    :param raw: string value
    :param kind: ``str``, ``strs``, ``bool``, ``int``, ``float``, ``ints``, ``floats``;
                 a ``?`` suffix makes ``none`` map to ``None``
    :param key: config key for error messages
    :param evaluator: shared ``ConfigEval``, a fresh one is built otherwise
    """
    raw = raw.strip()
    if kind.endswith("?"):
        if raw.lower() in NONE_WORDS:
            return None
        kind = kind[:-1]
    if kind == "str":
        return raw
    if kind == "strs":
        return tuple(item.strip() for item in raw.split(",") if item.strip())
    if kind == "bool":
        if raw.lower() in TRUE_WORDS:
            return True
        if raw.lower() in FALSE_WORDS:
            return False
        raise ParseError(f"expected a boolean, got '{raw}'", column=key)
    evaluator = evaluator or ConfigEval()
    return evaluator.evaluate(raw, kind=kind, key=key)
