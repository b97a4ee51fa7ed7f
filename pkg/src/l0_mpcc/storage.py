from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pandas as pd

SUCCESS_MARKER = "__SUCCESS"

# --- Small utilities ---------------------------------------------------------


def _local_path(uri: str | Path) -> Path:
    """Turn file:// URIs into local Path objects (or pass-through plain local paths)."""
    uri = str(uri)
    if uri.startswith("file://"):
        return Path(uri.replace("file://", "")).resolve()
    return Path(uri).resolve()


def _tmp_path(final: Path) -> Path:
    return final.with_name(f".{final.name}.tmp")


def fingerprint(payload) -> str:
    """sha256 of the canonical JSON encoding (sorted keys, no whitespace)."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


# --- Existence checks --------------------------------------------------------


def has_success_marker(folder: str | Path) -> bool:
    """
    True if __SUCCESS exists (used by load_results to avoid partial runs).
    """
    return (_local_path(folder) / SUCCESS_MARKER).exists()


# --- Writes (atomic) ---------------------------------------------------------


def write_text_atomic(content: str, path: str | Path) -> Path:
    """
    Write via a sibling temp file, then rename onto the final name.
    Readers never observe a half-written report.
    """
    final = _local_path(path)
    final.parent.mkdir(parents=True, exist_ok=True)
    tmp = _tmp_path(final)
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(content)
    tmp.replace(final)  # atomic rename within the same filesystem
    return final


def write_text(folder: str | Path, name: str, content: str) -> Path:
    """
    Write a small text file (manifest.json, __SUCCESS) inside a result folder.
    """
    return write_text_atomic(content, _local_path(folder) / name)


def write_csv_atomic(df: pd.DataFrame, path: str | Path) -> Path:
    # 17 significant digits so every double survives the round trip.
    return write_text_atomic(df.to_csv(index=False, float_format="%.17g", lineterminator="\n"), path)


def write_parquet_atomic(df: pd.DataFrame, path: str | Path) -> Path:
    final = _local_path(path)
    final.parent.mkdir(parents=True, exist_ok=True)
    tmp = _tmp_path(final)
    df.to_parquet(tmp, index=False)
    tmp.replace(final)
    return final


def mark_success(folder: str | Path) -> Path:
    """Written last, after every other output of a run is in place."""
    return write_text(folder, SUCCESS_MARKER, "")


# --- Reads -------------------------------------------------------------------


def read_parquet(path: str | Path) -> pd.DataFrame:
    return pd.read_parquet(_local_path(path))


def read_csv(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(_local_path(path))
