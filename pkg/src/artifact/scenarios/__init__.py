"""Bundled scenario configuration files.

These ship inside the package so the CLI can be pointed at a scenario by
name instead of a path.  They are ordinary config YAMLs; copy one out as
a starting point for a custom setup.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path


def list_scenarios() -> list[str]:
    root = resources.files(__package__)
    return sorted(
        entry.name[: -len(".yaml")]
        for entry in root.iterdir()
        if entry.name.endswith(".yaml")
    )


def scenario_path(name: str) -> Path | None:
    """Filesystem path of a bundled scenario, or None if no such name."""
    candidate = resources.files(__package__) / f"{name}.yaml"
    if candidate.is_file():
        return Path(str(candidate))
    return None
