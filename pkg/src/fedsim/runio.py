"""Deterministic result persistence.

Every run writes into its own directory named from the command, a stable
config digest, and the seed, so reruns with a new seed never collide and
reruns with the same seed reproduce every file byte for byte.  Files are
written atomically (temp file in the target directory, then rename).  Floats
are serialized with ``repr``, the shortest round-trip form, in both CSV and
JSON, which keeps outputs stable across runs.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from . import __version__
from .config import config_hash

__all__ = [
    "atomic_write_text",
    "write_json",
    "write_csv",
    "run_directory",
    "write_manifest",
]


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(obj):
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def write_json(path, obj) -> None:
    """Serialize with sorted keys and a trailing newline."""
    atomic_write_text(
        path, json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"
    )


def _cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        text = repr(value)
    elif value is None:
        text = ""
    else:
        text = str(value)
    if any(c in text for c in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def write_csv(path, rows: list[dict], columns: list[str] | None = None) -> None:
    """UTF-8 CSV with a header row.

    Column order comes from ``columns`` or from the first row; every row must
    cover the same keys.  Cells are quoted only when they contain a
    separator, so numeric output stays clean.
    """
    if not rows and columns is None:
        raise ValueError("cannot infer columns from an empty row list")
    cols = list(columns) if columns is not None else list(rows[0].keys())
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(_cell(row[c]) for c in cols))
    atomic_write_text(path, "\n".join(lines) + "\n")


def run_directory(out_base, command: str, cfg: dict, seed: int) -> Path:
    """Directory for one run: <out>/<command>-<confighash>-s<seed>."""
    out = Path(out_base) / f"{command}-{config_hash(cfg)}-s{seed}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out_dir, command: str, cfg: dict, seed: int) -> Path:
    """Write the run manifest and the config echo before any result file."""
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "config_hash": config_hash(cfg),
        "seed": seed,
        "version": __version__,
        "run_id": out_dir.name,
    }
    write_json(out_dir / "manifest.json", manifest)
    write_json(out_dir / "config.json", cfg)
    return out_dir / "manifest.json"
