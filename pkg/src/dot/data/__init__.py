"""Bundled toy datasets for demos and smoke tests."""

from pathlib import Path


def toy_dir() -> Path:
    """Directory holding the bundled high-resolution toy instance."""
    return Path(__file__).parent / "toy"
