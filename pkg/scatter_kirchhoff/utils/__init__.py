"""Utility functions for output files and provenance."""

import csv
import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import pydantic
import scipy

CSV_FIELDS = ("k", "x", "y", "z", "re", "im", "method", "level")


def format_float(value: float) -> str:
    """Shortest-safe text form with 17 significant digits"""
    return format(float(value), ".17g")


def stable_hash(payload: Any) -> str:
    """SHA-256 of the canonical JSON form, first 16 hex digits"""
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def module_versions() -> str:
    """Versions of this package and its numerical stack, as one token"""
    from scatter_kirchhoff import __version__

    return (f"scatter_kirchhoff={__version__};numpy={np.__version__};"
            f"scipy={scipy.__version__};pydantic={pydantic.VERSION}")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write rows with LF line endings; floats get 17 significant digits"""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return path


def write_json(path: Path, payload: Any) -> Path:
    """Write sorted, indented JSON followed by a newline"""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, sort_keys=True, indent=2)
        handle.write("\n")
    return path
