"""Writers for report tables and data files.

Every table is written as TSV with ``# key: value`` metadata lines on top,
and optionally as JSON Lines (first line holds the metadata). Writes go to a
temporary file in the destination directory and are moved into place with
``os.replace`` so a crashed run never leaves a half-written output.
"""

import contextlib
import json
import math
import os
import tempfile
from collections.abc import Iterable, Iterator, Mapping
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from schema import NA_REP


@contextlib.contextmanager
def atomic_path(path: str | Path) -> Iterator[Path]:
    """Yield a temporary sibling path; move it onto ``path`` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, path)
    finally:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)


def atomic_write_text(path: str | Path, text: str) -> Path:
    with atomic_path(path) as tmp:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return Path(path)


def clean_value(value: Any) -> Any:
    """Convert numpy scalars and NaN into JSON-friendly values (NaN -> None)."""
    if isinstance(value, Mapping):
        return {str(k): clean_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean_value(v) for v in value]
    if isinstance(value, np.ndarray):
        return [clean_value(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    if value is pd.NA:
        return None
    return value


def metadata_header(meta: Mapping[str, Any] | None) -> str:
    if not meta:
        return ""
    lines = []
    for key, value in meta.items():
        if isinstance(value, (list, tuple, dict)):
            value = json.dumps(clean_value(value), ensure_ascii=False)
        lines.append(f"# {key}: {value}\n")
    return "".join(lines)


def metadata_text(meta: Mapping[str, Any] | None) -> str:
    """One-line ``key: value; ...`` rendering for formats with a single description field."""
    return "; ".join(f"{key}: {value}" for key, value in flat_metadata(meta).items())


def flat_metadata(meta: Mapping[str, Any] | None) -> dict[str, str | int | float]:
    """Scalar-only copy of ``meta`` (lists and dicts as JSON, missing values as NA)."""
    flat = {}
    for key, value in (meta or {}).items():
        value = clean_value(value)
        if isinstance(value, (list, dict)):
            value = json.dumps(value, ensure_ascii=False)
        elif value is None:
            value = NA_REP
        elif isinstance(value, bool):
            value = str(value).lower()
        flat[str(key)] = value
    return flat


def frame_to_tsv(df: pd.DataFrame, meta: Mapping[str, Any] | None = None, index: bool = True) -> str:
    body = df.to_csv(sep="\t", na_rep=NA_REP, float_format="%.6f", index=index, lineterminator="\n")
    return metadata_header(meta) + body


def write_table(df: pd.DataFrame, path: str | Path, meta: Mapping[str, Any] | None = None, index: bool = True) -> Path:
    return atomic_write_text(path, frame_to_tsv(df, meta, index=index))


def write_records(rows: Iterable[Mapping[str, Any]], path: str | Path, meta: Mapping[str, Any] | None = None) -> Path:
    lines = []
    if meta:
        lines.append(json.dumps({"meta": clean_value(meta)}, ensure_ascii=False))
    for row in rows:
        lines.append(json.dumps(clean_value(row), ensure_ascii=False))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(obj: Any, path: str | Path) -> Path:
    return atomic_write_text(path, json.dumps(clean_value(obj), ensure_ascii=False, indent=2) + "\n")


def write_outputs(
    df: pd.DataFrame,
    out_dir: str | Path,
    stem: str,
    meta: Mapping[str, Any] | None = None,
    formats: Iterable[str] = ("tsv",),
    index: bool = True,
) -> list[Path]:
    """Write ``df`` as ``<stem>.tsv`` and/or ``<stem>.jsonl`` under ``out_dir``."""
    out_dir = Path(out_dir)
    written = []
    formats = tuple(formats)
    if "tsv" in formats:
        written.append(write_table(df, out_dir / f"{stem}.tsv", meta, index=index))
    if "jsonl" in formats:
        flat = df.reset_index() if index else df
        written.append(write_records(flat.to_dict("records"), out_dir / f"{stem}.jsonl", meta))
    return written
