"""Shipped default assets: component catalog art and the seed lexicon."""

from __future__ import annotations

from pathlib import Path

_HERE = Path(__file__).resolve().parent


def default_catalog_dir() -> Path:
    return _HERE / "catalog"


def default_lexicon_path() -> Path:
    return _HERE / "lexicon.txt"
