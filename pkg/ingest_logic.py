"""Export parsing and the three-stage cleaning pipeline.

pre-processing   drop records missing essential fields, drop duplicates
processing       fold accents, resolve countries, split and normalize fields
post-processing  rename synonymous keywords to their standard name

``run_ingest`` chains the stages and hands the result to ``build_corpus``.
"""

import contextlib
import hashlib
import itertools
import logging
import re
from collections import Counter
from collections.abc import Iterable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import pandas as pd
from unidecode import unidecode

from corpus_logic import ArticleRecord, Corpus, PeriodPartition, build_corpus, load_corpus
from schema import (
    COL_AFFILIATIONS,
    COL_AUTHORS,
    COL_CITED_BY,
    COL_DOI,
    COL_JOURNAL,
    COL_KEYWORDS,
    COL_TITLE,
    COL_YEAR,
    REASON_EMPTY_AUTHORS,
    REASON_INVALID_YEAR,
    REASON_MISSING_KEYWORDS,
    REASON_MISSING_TITLE,
    REASON_MISSING_YEAR,
    REQUIRED_EXPORT_COLUMNS,
    ConfigError,
    DataError,
    InsightsError,
)

log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent / "data"
DEFAULT_COUNTRIES = DATA_DIR / "countries.txt"
DEFAULT_COUNTRY_ALIASES = DATA_DIR / "country_aliases.tsv"

EXPORT_FORMATS = ("csv-export", "canonical")

HYPHEN_BETWEEN_LETTERS = r"(?<=[a-z])-(?=[a-z])"
DEFAULT_PUNCTUATION_RULES = (
    (HYPHEN_BETWEEN_LETTERS, ""),
    (r"^[\s\"'.,;:]+|[\s\"'.,;:]+$", ""),
)
MAX_RULE_PASSES = 8

# Scopus writes this instead of leaving the author field empty
NO_AUTHOR_PLACEHOLDER = "[no author name available]"

_WHITESPACE = re.compile(r"\s+")
_HYPHEN = re.compile(HYPHEN_BETWEEN_LETTERS)
_YEAR = re.compile(r"\d{4}")
_DOI_PREFIX = re.compile(r"^(https?://(dx\.)?doi\.org/|doi:\s*)", re.IGNORECASE)


class IngestError(DataError):
    pass


@dataclass(frozen=True)
class RawRecord:
    """One export row, verbatim."""

    fields: dict[str, str]
    source: str
    row: int

    def get(self, column: str) -> str:
        value = self.fields.get(column)
        return "" if value is None else str(value)


@dataclass(frozen=True)
class Rejection:
    record: RawRecord
    reason: str


@dataclass(frozen=True)
class NormalizationConfig:
    synonym_table: dict[str, tuple[str, ...]] = field(default_factory=dict)
    country_aliases: dict[str, str] = field(default_factory=dict)
    countries: tuple[str, ...] = ()
    accent_folding: bool = True
    punctuation_rules: tuple[tuple[str, str], ...] = DEFAULT_PUNCTUATION_RULES
    keyword_delimiter: str = ";"
    keep_incomplete: bool = False

    def __post_init__(self):
        object.__setattr__(self, "punctuation_rules", tuple((str(p), str(r)) for p, r in self.punctuation_rules))
        try:
            self.compiled_rules
        except re.error as e:
            raise ConfigError(f"bad punctuation rule: {e}") from None
        # building the indexes validates the tables
        self.variant_index
        self.alias_index

    @cached_property
    def compiled_rules(self) -> tuple[tuple[re.Pattern, str], ...]:
        return tuple((re.compile(p), r) for p, r in self.punctuation_rules)

    @cached_property
    def variant_index(self) -> dict[str, str]:
        """normalized variant (or canonical) -> normalized canonical."""
        canonicals = {normalize_text(c, self): c for c in self.synonym_table}
        index = {c: c for c in canonicals}
        for canonical, variants in self.synonym_table.items():
            c = normalize_text(canonical, self)
            for variant in variants:
                v = normalize_text(variant, self)
                if v == c:
                    continue
                if v in canonicals:
                    raise ConfigError(
                        f"synonym table is not flat: {canonicals[v]!r} is a canonical term and a variant of {canonical!r}"
                    )
                if index.get(v, c) != c:
                    raise ConfigError(f"synonym {variant!r} maps to both {index[v]!r} and {c!r}")
                index[v] = c
        return index

    @cached_property
    def alias_index(self) -> dict[str, str]:
        """normalized alias -> normalized canonical country."""
        index = {normalize_text(a, self): normalize_text(c, self) for a, c in self.country_aliases.items()}
        for alias, canonical in index.items():
            if canonical in index and index[canonical] != canonical:
                raise ConfigError(f"country alias target {canonical!r} is itself an alias")
        return index

    @cached_property
    def country_index(self) -> dict[str, str]:
        """normalized country name -> display name."""
        return {normalize_text(c, self): c for c in self.countries}


# --- TABLE LOADERS ---
def _table_lines(path: str | Path) -> Iterator[tuple[int, list[str]]]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"table not found: {path}")
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, [c.strip() for c in line.split("\t")]


def load_synonym_table(path: str | Path) -> dict[str, tuple[str, ...]]:
    """Tab-separated: canonical term, then its variants."""
    table: dict[str, list[str]] = {}
    for lineno, cols in _table_lines(path):
        cols = [c for c in cols if c]
        if len(cols) < 2:
            raise ConfigError(f"{path}:{lineno}: expected a canonical term followed by at least one variant")
        table.setdefault(cols[0], []).extend(cols[1:])
    return {k: tuple(v) for k, v in table.items()}


def load_country_aliases(path: str | Path) -> dict[str, str]:
    """Tab-separated: alias, canonical country."""
    aliases = {}
    for lineno, cols in _table_lines(path):
        if len(cols) != 2 or not all(cols):
            raise ConfigError(f"{path}:{lineno}: expected 'alias<TAB>country'")
        aliases[cols[0]] = cols[1]
    return aliases


def load_country_list(path: str | Path) -> tuple[str, ...]:
    return tuple(cols[0] for _, cols in _table_lines(path))


def load_normalization(
    synonyms: str | Path | None = None,
    country_aliases: str | Path | None = DEFAULT_COUNTRY_ALIASES,
    countries: str | Path | None = DEFAULT_COUNTRIES,
    **options,
) -> NormalizationConfig:
    return NormalizationConfig(
        synonym_table=load_synonym_table(synonyms) if synonyms else {},
        country_aliases=load_country_aliases(country_aliases) if country_aliases else {},
        countries=load_country_list(countries) if countries else (),
        **options,
    )


@lru_cache(maxsize=1)
def default_normalization() -> NormalizationConfig:
    """Shipped country list and aliases, no synonyms."""
    return load_normalization()


# --- TEXT NORMALIZATION ---
def normalize_text(s: str, config: NormalizationConfig | None = None) -> str:
    """Fold accents, lowercase, apply punctuation rules and collapse whitespace."""
    config = config or DEFAULT_NORMALIZATION
    text = unidecode(s) if config.accent_folding else s
    text = text.casefold()
    for _ in range(MAX_RULE_PASSES):
        before = text
        for pattern, repl in config.compiled_rules:
            text = pattern.sub(repl, text)
        text = _WHITESPACE.sub(" ", text).strip()
        if text == before:
            break
    return text


DEFAULT_NORMALIZATION = NormalizationConfig()


def text_variants(s: str, config: NormalizationConfig | None = None) -> set[str]:
    """Normalized forms of ``s`` with letter-hyphen-letter joined and spaced."""
    config = config or DEFAULT_NORMALIZATION
    folded = (unidecode(s) if config.accent_folding else s).casefold()
    return {normalize_text(s, config), normalize_text(_HYPHEN.sub(" ", folded), config)}


def canonicalize_keyword(raw: str, config: NormalizationConfig | None = None) -> str:
    config = config or DEFAULT_NORMALIZATION
    norm = normalize_text(raw, config)
    index = config.variant_index
    if norm in index:
        return index[norm]
    for variant in sorted(text_variants(raw, config) - {norm}):
        if variant in index:
            return index[variant]
    return norm


def extract_country(affiliation: str, config: NormalizationConfig | None = None) -> str | None:
    """Country named by the last comma-separated segment, or None when unknown."""
    config = config or default_normalization()
    segment = normalize_text(affiliation.rsplit(",", 1)[-1], config)
    if not segment:
        return None
    segment = config.alias_index.get(segment, segment)
    return config.country_index.get(segment)


# --- FIELD SPLITTING ---
def split_authors(field_text: str) -> list[str]:
    text = field_text.strip()
    if not text or text.casefold() == NO_AUTHOR_PLACEHOLDER:
        return []
    sep = ";" if ";" in text else ","
    return [a.strip() for a in text.split(sep) if a.strip()]


def split_affiliations(field_text: str) -> list[str]:
    return [a.strip() for a in field_text.split(";") if a.strip()]


def split_keywords(field_text: str, delimiter: str = ";") -> list[str]:
    # "; " is the usual separator, a bare ";" the fallback; stripping covers both
    return [k.strip() for k in field_text.split(delimiter.strip() or ";") if k.strip()]


def parse_year(text: str) -> int | None:
    text = text.strip()
    return int(text) if _YEAR.fullmatch(text) else None


def clean_doi(text: str) -> str:
    return _DOI_PREFIX.sub("", text.strip()).strip().lower()


def make_record_id(doi: str | None, title: str, year: int) -> str:
    payload = f"doi:{doi}" if doi else f"title:{normalize_text(title)}|{year}"
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:16]


# --- PARSING ---
def parse_export(path: str | Path, fmt: str = "csv-export") -> list[RawRecord]:
    path = Path(path)
    if fmt == "canonical":
        return _canonical_rows(path)
    if fmt != "csv-export":
        raise ConfigError(f"unknown export format {fmt!r}; expected one of {', '.join(EXPORT_FORMATS)}")

    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8-sig")
    except FileNotFoundError:
        raise IngestError(f"export file not found: {path}") from None
    except pd.errors.EmptyDataError:
        raise IngestError(f"{path}: file is empty (no header row)") from None
    except pd.errors.ParserError as e:
        m = re.search(r"(?:row|line) (\d+)", str(e))
        where = f"row {m.group(1)}" if m else "unknown row"
        raise IngestError(f"{path}: unbalanced quotes or malformed row near {where} ({e})") from None

    df.columns = [str(c).strip() for c in df.columns]
    missing = [c for c in REQUIRED_EXPORT_COLUMNS if c not in df.columns]
    if missing:
        raise IngestError(f"{path}: missing required columns: {', '.join(missing)}")

    return [RawRecord(fields=row, source=str(path), row=i) for i, row in enumerate(df.to_dict("records"), start=1)]


def _canonical_rows(path: Path) -> list[RawRecord]:
    corpus = load_corpus(path)
    rows = []
    for i, r in enumerate(corpus.records, start=1):
        fields = {
            COL_AUTHORS: "; ".join(r.authors),
            COL_TITLE: r.title,
            COL_YEAR: str(r.year),
            COL_KEYWORDS: "; ".join(r.raw_keywords or r.keywords),
            COL_AFFILIATIONS: "; ".join(raw for raw, _ in r.affiliations),
            COL_CITED_BY: str(r.citation_count),
            COL_DOI: r.doi or "",
            COL_JOURNAL: r.journal,
        }
        rows.append(RawRecord(fields=fields, source=str(path), row=i))
    return rows


def parse_exports(paths: Sequence[str | Path], fmt: str = "csv-export", workers: int = 4) -> list[list[RawRecord]]:
    """Parse files concurrently; results come back in the order of ``paths``."""
    if not paths:
        raise ConfigError("no input files given")
    with ThreadPoolExecutor(max_workers=max(1, min(workers, len(paths)))) as pool:
        return list(pool.map(lambda p: parse_export(p, fmt), paths))


# --- PRE-PROCESSING ---
def rejection_reason(record: RawRecord, keep_incomplete: bool = False) -> str | None:
    if not record.get(COL_TITLE).strip():
        return REASON_MISSING_TITLE
    if not split_authors(record.get(COL_AUTHORS)):
        return REASON_EMPTY_AUTHORS
    year = record.get(COL_YEAR).strip()
    if not year:
        return REASON_MISSING_YEAR
    if parse_year(year) is None:
        return REASON_INVALID_YEAR
    if not keep_incomplete and not split_keywords(record.get(COL_KEYWORDS)):
        return REASON_MISSING_KEYWORDS
    return None


def preprocess(records: Iterable[RawRecord], keep_incomplete: bool = False) -> tuple[list[RawRecord], list[Rejection]]:
    valid, rejected = [], []
    for record in records:
        reason = rejection_reason(record, keep_incomplete)
        if reason is None:
            valid.append(record)
        else:
            rejected.append(Rejection(record, reason))
    return valid, rejected


def deduplicate(records: Iterable[RawRecord]) -> tuple[list[RawRecord], list[RawRecord]]:
    """First occurrence wins. Match on DOI when both records have one, else on title and year."""
    unique, duplicates = [], []
    seen_dois: set[str] = set()
    seen_titles: dict[tuple[str, str], list[bool]] = {}
    for record in records:
        doi = clean_doi(record.get(COL_DOI))
        year = record.get(COL_YEAR).strip()
        key = (normalize_text(record.get(COL_TITLE)), str(parse_year(year) or year))
        if doi and doi in seen_dois:
            duplicates.append(record)
            continue
        # a title match counts unless both sides carry (different) DOIs
        if any(not (doi and other_has_doi) for other_has_doi in seen_titles.get(key, [])):
            duplicates.append(record)
            continue
        unique.append(record)
        if doi:
            seen_dois.add(doi)
        seen_titles.setdefault(key, []).append(bool(doi))
    return unique, duplicates


# --- PROCESSING + POST-PROCESSING ---
def to_article(record: RawRecord, config: NormalizationConfig | None = None) -> ArticleRecord:
    config = config or default_normalization()
    title = _WHITESPACE.sub(" ", record.get(COL_TITLE)).strip()
    year = parse_year(record.get(COL_YEAR))
    if year is None:
        raise IngestError(f"{record.source} row {record.row}: invalid year {record.get(COL_YEAR)!r}")

    raw_keywords = split_keywords(record.get(COL_KEYWORDS), config.keyword_delimiter)
    keywords = []
    for raw in raw_keywords:
        kw = canonicalize_keyword(raw, config)
        if kw and kw not in keywords:
            keywords.append(kw)

    affiliations = [(a, extract_country(a, config)) for a in split_affiliations(record.get(COL_AFFILIATIONS))]
    cited = record.get(COL_CITED_BY).strip()
    doi = clean_doi(record.get(COL_DOI)) or None

    return ArticleRecord(
        id=make_record_id(doi, title, year),
        title=title,
        year=year,
        authors=tuple(split_authors(record.get(COL_AUTHORS))),
        affiliations=tuple(affiliations),
        keywords=tuple(keywords),
        journal=record.get(COL_JOURNAL).strip(),
        citation_count=int(cited) if cited.isdigit() else 0,
        doi=doi,
        raw_keywords=tuple(raw_keywords),
    )


@dataclass(frozen=True)
class IngestReport:
    parsed: dict[str, int]
    rejected: dict[str, int]
    duplicates: int
    excluded: int
    flagged: int
    stored: int
    raw_keywords: int
    canonical_keywords: int

    @property
    def parsed_total(self) -> int:
        return sum(self.parsed.values())

    def to_frame(self) -> pd.DataFrame:
        rows = [(f"parsed:{src}", n) for src, n in self.parsed.items()]
        rows.append(("parsed", self.parsed_total))
        rows += [(f"rejected:{reason}", n) for reason, n in sorted(self.rejected.items())]
        rows.append(("rejected", sum(self.rejected.values())))
        rows += [
            ("duplicates", self.duplicates),
            ("excluded", self.excluded),
            ("stored", self.stored),
            ("flagged", self.flagged),
            ("distinct_raw_keywords", self.raw_keywords),
            ("distinct_canonical_keywords", self.canonical_keywords),
        ]
        return pd.DataFrame(rows, columns=["stage", "count"]).set_index("stage")


@contextlib.contextmanager
def _stage(name: str) -> Iterator[None]:
    try:
        yield
    except InsightsError as e:
        # data problems become ingest errors, anything else keeps its exit code
        wrapper = IngestError if isinstance(e, DataError) else type(e)
        raise wrapper(f"stage {name}: {e}") from e


def run_ingest(
    paths: Sequence[str | Path],
    config: NormalizationConfig,
    partition: PeriodPartition,
    fmt: str = "csv-export",
    workers: int = 4,
) -> tuple[Corpus, IngestReport]:
    # 1. Parse every export file
    with _stage("parse"):
        batches = parse_exports(paths, fmt, workers)
    parsed = {str(p): len(b) for p, b in zip(paths, batches)}
    log.info("parsed %d rows from %d files", sum(parsed.values()), len(paths))

    # 2. Drop rows that cannot be analysed
    with _stage("preprocess"):
        results = [preprocess(batch, config.keep_incomplete) for batch in batches]
    rejected = Counter(r.reason for _, rej in results for r in rej)
    merged = list(itertools.chain.from_iterable(valid for valid, _ in results))
    log.info("pre-processing rejected %d rows %s", sum(rejected.values()), dict(sorted(rejected.items())))

    # 3. Merge files and remove duplicates
    with _stage("deduplicate"):
        unique, duplicates = deduplicate(merged)
    log.info("removed %d duplicates", len(duplicates))

    # 4. Canonical keywords, countries and authors
    with _stage("normalize"):
        articles = [to_article(r, config) for r in unique]

    # 5. Assign windows and build the corpus
    with _stage("build"):
        corpus = build_corpus(
            articles,
            partition,
            sources=[str(p) for p in paths],
            rejected=dict(sorted(rejected.items())),
            duplicates=len(duplicates),
        )

    # 6. Stage counts
    report = IngestReport(
        parsed=parsed,
        rejected=dict(sorted(rejected.items())),
        duplicates=len(duplicates),
        excluded=corpus.provenance.excluded,
        flagged=corpus.provenance.flagged,
        stored=len(corpus.records),
        raw_keywords=len({normalize_text(k, config) for a in articles for k in a.raw_keywords}),
        canonical_keywords=len({k for a in articles for k in a.keywords}),
    )
    return corpus, report
