"""Bundled fixture data: the worked-example instance and offline crate bundles."""

from __future__ import annotations

from pathlib import Path

ROOT = Path(__file__).resolve().parent
BUNDLES = ("fig3b", "typosquat_base", "typosquats")


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture, e.g. ``"fig3b"`` or ``"table1.json"``."""
    path = ROOT / name
    if not path.exists():
        raise FileNotFoundError(f"no bundled fixture named {name!r}")
    return path
