"""Cleaned article records, publication-year windows and the corpus file.

A ``Corpus`` is built once from validated ``ArticleRecord`` objects and a
``PeriodPartition`` and never changes afterwards. Analyses read it through
the pandas frames it exposes (articles, keyword occurrences, keyword pairs),
which are computed lazily and cached.
"""

import itertools
import json
import logging
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import pandas as pd

from report_io import atomic_write_text
from schema import (
    ALL_LABEL,
    CORPUS_FORMAT,
    FLAG_NO_KEYWORDS,
    RECORD_FIELDS,
    SCHEMA_VERSION,
    DataError,
)

log = logging.getLogger(__name__)


class CorpusError(DataError):
    pass


@dataclass(frozen=True)
class ArticleRecord:
    id: str
    title: str
    year: int
    authors: tuple[str, ...]
    affiliations: tuple[tuple[str, str | None], ...] = ()
    keywords: tuple[str, ...] = ()
    journal: str = ""
    citation_count: int = 0
    doi: str | None = None
    raw_keywords: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        # accept lists from callers and JSON, store tuples
        set_ = object.__setattr__
        set_(self, "authors", tuple(self.authors))
        set_(self, "affiliations", tuple((str(raw), country) for raw, country in self.affiliations))
        set_(self, "keywords", tuple(self.keywords))
        set_(self, "raw_keywords", tuple(self.raw_keywords))
        set_(self, "year", int(self.year))
        set_(self, "citation_count", int(self.citation_count))

        if not str(self.id).strip():
            raise CorpusError("record id is empty")
        if not self.title.strip():
            raise CorpusError(f"record {self.id}: title is empty")
        if not self.authors or not any(a.strip() for a in self.authors):
            raise CorpusError(f"record {self.id}: authors list is empty")
        if any(not k for k in self.keywords):
            raise CorpusError(f"record {self.id}: empty keyword")
        if len(set(self.keywords)) != len(self.keywords):
            raise CorpusError(f"record {self.id}: duplicate keywords")
        if self.citation_count < 0:
            raise CorpusError(f"record {self.id}: negative citation count")

        flags = tuple(sorted(set(self.flags)))
        if not self.keywords and FLAG_NO_KEYWORDS not in flags:
            flags = tuple(sorted(flags + (FLAG_NO_KEYWORDS,)))
        set_(self, "flags", flags)

    @property
    def complete(self) -> bool:
        """True when the record takes part in analyses."""
        return bool(self.keywords)

    @property
    def countries(self) -> tuple[str, ...]:
        """Distinct resolved countries; unknown ones are dropped."""
        return tuple(sorted({c for _, c in self.affiliations if c}))

    def to_dict(self) -> dict[str, Any]:
        row = {
            "id": self.id,
            "title": self.title,
            "year": self.year,
            "authors": list(self.authors),
            "affiliations": [[raw, country] for raw, country in self.affiliations],
            "keywords": list(self.keywords),
            "journal": self.journal,
            "citation_count": self.citation_count,
            "doi": self.doi,
            "raw_keywords": list(self.raw_keywords),
            "flags": list(self.flags),
        }
        return {name: row[name] for name in RECORD_FIELDS}

    @classmethod
    def from_dict(cls, row: dict[str, Any]) -> "ArticleRecord":
        missing = [name for name in RECORD_FIELDS if name not in row]
        if missing:
            raise CorpusError(f"missing fields: {', '.join(missing)}")
        return cls(**{name: row[name] for name in RECORD_FIELDS})


@dataclass(frozen=True)
class PeriodPartition:
    windows: tuple[tuple[int, int], ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        windows = tuple((int(a), int(b)) for a, b in self.windows)
        if len(windows) < 2:
            raise CorpusError("a period partition needs at least 2 windows (growth is undefined otherwise)")
        for start, end in windows:
            if end < start:
                raise CorpusError(f"window {start}-{end} ends before it starts")
        for (_, prev_end), (start, _) in itertools.pairwise(windows):
            if start <= prev_end:
                raise CorpusError("windows must be disjoint and strictly increasing")

        labels = tuple(self.labels) or tuple(f"{a}-{b}" for a, b in windows)
        if len(labels) != len(windows):
            raise CorpusError("one label per window is required")
        if len(set(labels)) != len(labels) or ALL_LABEL in labels:
            raise CorpusError(f"window labels must be unique and may not be {ALL_LABEL!r}")
        object.__setattr__(self, "windows", windows)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_windows(cls, windows: Iterable[Sequence[int]], labels: Iterable[str] | None = None) -> "PeriodPartition":
        return cls(tuple(tuple(w) for w in windows), tuple(labels or ()))

    def __len__(self) -> int:
        return len(self.windows)

    @property
    def start(self) -> int:
        return self.windows[0][0]

    @property
    def end(self) -> int:
        return self.windows[-1][1]

    def window_of(self, year: int) -> int | None:
        for i, (start, end) in enumerate(self.windows):
            if start <= year <= end:
                return i
        return None

    def to_dict(self) -> dict[str, Any]:
        return {"windows": [list(w) for w in self.windows], "labels": list(self.labels)}


def partition_periods(start: int, end: int, width: int) -> PeriodPartition:
    """Equal-width consecutive windows covering ``start..end`` inclusive."""
    if width < 1:
        raise CorpusError("window width must be at least 1 year")
    if end < start + width - 1:
        raise CorpusError(f"range {start}-{end} is shorter than one {width}-year window")
    span = end - start + 1
    if span % width:
        raise CorpusError(
            f"range {start}-{end} ({span} years) does not divide into {width}-year windows; "
            "give an explicit window list instead"
        )
    windows = tuple((s, s + width - 1) for s in range(start, end + 1, width))
    return PeriodPartition(windows)


@dataclass(frozen=True)
class Provenance:
    sources: tuple[str, ...] = ()
    input_count: int = 0
    rejected: dict[str, int] = field(default_factory=dict)
    duplicates: int = 0
    excluded: int = 0
    flagged: int = 0

    @property
    def rejected_total(self) -> int:
        return sum(self.rejected.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "sources": list(self.sources),
            "input_count": self.input_count,
            "rejected": dict(sorted(self.rejected.items())),
            "duplicates": self.duplicates,
            "excluded": self.excluded,
            "flagged": self.flagged,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Provenance":
        return cls(
            sources=tuple(data.get("sources", ())),
            input_count=int(data["input_count"]),
            rejected={str(k): int(v) for k, v in data.get("rejected", {}).items()},
            duplicates=int(data.get("duplicates", 0)),
            excluded=int(data.get("excluded", 0)),
            flagged=int(data.get("flagged", 0)),
        )


@dataclass(frozen=True)
class Corpus:
    records: tuple[ArticleRecord, ...]
    partition: PeriodPartition
    keyword_totals: tuple[int, ...]
    provenance: Provenance

    # --- WINDOWS ---
    @property
    def labels(self) -> tuple[str, ...]:
        return self.partition.labels

    @property
    def n_windows(self) -> int:
        return len(self.partition)

    def window_index(self, window: int | str) -> int:
        if isinstance(window, str):
            if window not in self.labels:
                raise CorpusError(f"unknown window {window!r}; known: {', '.join(self.labels)}")
            return self.labels.index(window)
        if not 0 <= window < self.n_windows:
            raise CorpusError(f"window index {window} out of range")
        return int(window)

    # --- RECORDS ---
    @cached_property
    def analysed(self) -> tuple[ArticleRecord, ...]:
        """Records that take part in analyses (the flagged ones are kept for audit only)."""
        return tuple(r for r in self.records if r.complete)

    @cached_property
    def windows_by_id(self) -> dict[str, int]:
        return {r.id: self.partition.window_of(r.year) for r in self.records}

    @property
    def mean_keywords_per_record(self) -> float:
        return sum(self.keyword_totals) / len(self.analysed)

    # --- FRAMES ---
    @cached_property
    def frame(self) -> pd.DataFrame:
        """One row per analysed article."""
        rows = [
            {
                "id": r.id,
                "year": r.year,
                "window": self.windows_by_id[r.id],
                "n_authors": len(r.authors),
                "n_countries": len(r.countries),
                "citation_count": r.citation_count,
            }
            for r in self.analysed
        ]
        return pd.DataFrame(rows, columns=["id", "year", "window", "n_authors", "n_countries", "citation_count"])

    @cached_property
    def keyword_frame(self) -> pd.DataFrame:
        """One row per (article, keyword); a keyword counts once per article."""
        rows = [(r.id, self.windows_by_id[r.id], kw) for r in self.analysed for kw in r.keywords]
        return pd.DataFrame(rows, columns=["id", "window", "keyword"])

    @cached_property
    def country_frame(self) -> pd.DataFrame:
        """One row per (article, distinct resolved country)."""
        rows = [(r.id, self.windows_by_id[r.id], c) for r in self.analysed for c in r.countries]
        return pd.DataFrame(rows, columns=["id", "window", "country"])

    @cached_property
    def pair_frame(self) -> pd.DataFrame:
        """One row per (article, unordered keyword pair) with ``a < b``."""
        rows = [
            (r.id, self.windows_by_id[r.id], a, b)
            for r in self.analysed
            for a, b in itertools.combinations(sorted(r.keywords), 2)
        ]
        return pd.DataFrame(rows, columns=["id", "window", "a", "b"])

    @cached_property
    def article_counts(self) -> tuple[int, ...]:
        counts = Counter(self.frame["window"])
        return tuple(int(counts.get(w, 0)) for w in range(self.n_windows))

    @cached_property
    def keyword_counts(self) -> pd.DataFrame:
        """Keyword x window occurrence matrix, keywords sorted."""
        return _count_matrix(self.keyword_frame, ["keyword"], self.n_windows)

    @cached_property
    def pair_counts(self) -> pd.DataFrame:
        """(a, b) x window article-count matrix."""
        return _count_matrix(self.pair_frame, ["a", "b"], self.n_windows)

    def records_in(self, window: int | str | None) -> tuple[ArticleRecord, ...]:
        if window is None:
            return self.analysed
        w = self.window_index(window)
        return tuple(r for r in self.analysed if self.windows_by_id[r.id] == w)


def _count_matrix(frame: pd.DataFrame, keys: list[str], n_windows: int) -> pd.DataFrame:
    if frame.empty:
        index = pd.MultiIndex.from_tuples([], names=keys) if len(keys) > 1 else pd.Index([], name=keys[0])
        return pd.DataFrame(0, index=index, columns=range(n_windows), dtype="int64")
    counts = frame.groupby(keys + ["window"]).size().unstack("window", fill_value=0)
    counts = counts.reindex(columns=range(n_windows), fill_value=0).sort_index()
    return counts.astype("int64")


def _assemble(records: Sequence[ArticleRecord], partition: PeriodPartition, provenance: Provenance) -> Corpus:
    if not records:
        raise CorpusError("empty corpus: no record falls inside the configured windows")

    id_counts = Counter(r.id for r in records)
    dupes = sorted(i for i, n in id_counts.items() if n > 1)
    if dupes:
        shown = ", ".join(dupes[:10]) + (" ..." if len(dupes) > 10 else "")
        raise CorpusError(f"duplicate record ids: {shown}")

    expected = provenance.input_count - provenance.rejected_total - provenance.duplicates - provenance.excluded
    if expected != len(records):
        raise CorpusError(
            f"record accounting mismatch: {provenance.input_count} input - {provenance.rejected_total} rejected "
            f"- {provenance.duplicates} duplicates - {provenance.excluded} excluded != {len(records)} records"
        )

    totals = [0] * len(partition)
    complete = 0
    for r in records:
        w = partition.window_of(r.year)
        if w is None:
            raise CorpusError(f"record {r.id} (year {r.year}) is outside every window")
        if r.complete:
            totals[w] += len(r.keywords)
            complete += 1
    if not complete:
        raise CorpusError("empty corpus: no record has keywords")

    return Corpus(tuple(records), partition, tuple(totals), provenance)


def build_corpus(
    records: Iterable[ArticleRecord],
    partition: PeriodPartition,
    *,
    sources: Sequence[str] = (),
    rejected: dict[str, int] | None = None,
    duplicates: int = 0,
) -> Corpus:
    """Index ``records`` against ``partition``; records outside every window are excluded."""
    records = list(records)
    admitted = [r for r in records if partition.window_of(r.year) is not None]
    excluded = len(records) - len(admitted)
    rejected = dict(rejected or {})
    provenance = Provenance(
        sources=tuple(sources),
        input_count=len(records) + sum(rejected.values()) + duplicates,
        rejected=rejected,
        duplicates=duplicates,
        excluded=excluded,
        flagged=sum(1 for r in admitted if not r.complete),
    )
    if excluded:
        log.info("excluded %d records outside %d-%d", excluded, partition.start, partition.end)
    return _assemble(admitted, partition, provenance)


def save_corpus(corpus: Corpus, path: str | Path) -> Path:
    header = {
        "format": CORPUS_FORMAT,
        "schema_version": SCHEMA_VERSION,
        "fields": list(RECORD_FIELDS),
        "records": len(corpus.records),
        "partition": corpus.partition.to_dict(),
        "provenance": corpus.provenance.to_dict(),
    }
    lines = [json.dumps(header, ensure_ascii=False)]
    lines.extend(json.dumps(r.to_dict(), ensure_ascii=False) for r in corpus.records)
    return atomic_write_text(path, "\n".join(lines) + "\n")


def load_corpus(path: str | Path) -> Corpus:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise CorpusError(f"corpus file not found: {path}") from None
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise CorpusError(f"{path}: empty corpus")

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise CorpusError(f"{path}:1: malformed header ({e.msg})") from None
    if not isinstance(header, dict) or header.get("format") != CORPUS_FORMAT:
        raise CorpusError(f"{path}:1: not a {CORPUS_FORMAT} file")
    if header.get("schema_version") != SCHEMA_VERSION:
        raise CorpusError(
            f"{path}: schema version {header.get('schema_version')} is not supported (expected {SCHEMA_VERSION})"
        )

    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            records.append(ArticleRecord.from_dict(json.loads(line)))
        except json.JSONDecodeError as e:
            raise CorpusError(f"{path}:{lineno}: malformed record line ({e.msg})") from None
        except (CorpusError, TypeError, ValueError) as e:
            raise CorpusError(f"{path}:{lineno}: malformed record line ({e})") from None

    if header.get("records") != len(records):
        raise CorpusError(f"{path}: header announces {header.get('records')} records, found {len(records)}")
    if not records:
        raise CorpusError(f"{path}: empty corpus")

    try:
        partition = PeriodPartition.from_windows(header["partition"]["windows"], header["partition"]["labels"])
        provenance = Provenance.from_dict(header["provenance"])
    except (KeyError, TypeError, ValueError) as e:
        raise CorpusError(f"{path}:1: malformed header ({e})") from None
    return _assemble(records, partition, provenance)
