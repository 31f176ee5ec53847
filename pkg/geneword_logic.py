"""Gene-words: frequent stems that spawn families of derived keywords.

Pattern markers: ``-tomy`` matches as a suffix, ``lipo-`` as a prefix, and a
bare ``insulin`` anywhere inside a keyword. The bare stem itself never
belongs to its own family.
"""

import logging
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import pandas as pd

from corpus_logic import Corpus
from ingest_logic import normalize_text
from schema import ConfigError

log = logging.getLogger(__name__)

MODES = ("prefix", "suffix", "substring")
SHARE_SCOPES = ("per-family", "all-families")


class GeneWordError(ConfigError):
    pass


@dataclass(frozen=True)
class GeneWordPattern:
    surface: str
    mode: str = "substring"

    def __post_init__(self):
        if not self.surface:
            raise GeneWordError("gene-word pattern is empty after removing affix markers")
        if self.mode not in MODES:
            raise GeneWordError(f"unknown pattern mode {self.mode!r}")

    @classmethod
    def parse(cls, text: str) -> "GeneWordPattern":
        text = text.strip()
        suffix, prefix = text.startswith("-"), text.endswith("-")
        mode = "suffix" if suffix and not prefix else "prefix" if prefix and not suffix else "substring"
        return cls(normalize_text(text.strip("-")), mode)

    def __str__(self) -> str:
        return {"suffix": f"-{self.surface}", "prefix": f"{self.surface}-"}.get(self.mode, self.surface)

    @property
    def is_affix(self) -> bool:
        return self.mode != "substring"

    def regex(self, word_boundary: bool = False) -> re.Pattern:
        s = re.escape(self.surface)
        if self.mode == "prefix":
            return re.compile(rf"(?<!\w){s}")
        if self.mode == "suffix":
            return re.compile(rf"{s}(?!\w)")
        return re.compile(rf"(?<!\w){s}(?!\w)" if word_boundary else s)

    def matches(self, keyword: str, word_boundary: bool = False) -> bool:
        keyword = keyword.casefold()
        return keyword != self.surface and self.regex(word_boundary).search(keyword) is not None


def load_patterns(path: str | Path) -> list[GeneWordPattern]:
    """One pattern per line; ``#`` comments and blank lines are skipped."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise GeneWordError(f"pattern file not found: {path}") from None
    patterns = []
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            pattern = GeneWordPattern.parse(line)
        except GeneWordError as e:
            raise GeneWordError(f"{path}:{lineno}: {e}") from None
        if pattern not in patterns:
            patterns.append(pattern)
    return patterns


def keyword_frequencies(corpus: Corpus) -> pd.Series:
    """Articles per keyword over the whole corpus, highest first, ties by name."""
    freq = corpus.keyword_counts.sum(axis=1)
    order = sorted(freq.index, key=lambda k: (-freq[k], k))
    return freq.loc[order].astype("int64")


def derived_keywords(corpus: Corpus, pattern: GeneWordPattern, word_boundary: bool = False) -> dict[str, int]:
    """Every distinct keyword matching ``pattern`` (the bare stem excluded) with its frequency."""
    regex = pattern.regex(word_boundary)
    freq = corpus.keyword_counts.sum(axis=1)
    return {k: int(n) for k, n in freq.items() if k != pattern.surface and regex.search(k)}


# --- CANDIDATES ---
@dataclass(frozen=True)
class GeneWordThresholds:
    min_self_frequency: int = 100
    max_rank: int = 100
    min_related: int = 10
    min_related_frequency: int = 10
    min_family_share: float = 0.20
    family_share_scope: str = "per-family"
    use_priority: bool = True
    word_boundary: bool = False

    def __post_init__(self):
        if self.family_share_scope not in SHARE_SCOPES:
            raise GeneWordError(f"family_share_scope must be one of {', '.join(SHARE_SCOPES)}")
        if self.max_rank < 1:
            raise GeneWordError("max_rank must be at least 1")
        if not 0.0 <= self.min_family_share <= 1.0:
            raise GeneWordError("min_family_share must lie in [0, 1]")


@dataclass(frozen=True)
class GeneWordCandidate:
    pattern: GeneWordPattern
    frequency: int
    rank: int | None
    related: int
    family_total: int
    family_share: float
    rule1: bool | None
    rule2: bool
    rule3: bool | None

    @property
    def passed(self) -> bool:
        """All applicable rules hold (``None`` means not applicable or disabled)."""
        return all(rule is not False for rule in (self.rule1, self.rule2, self.rule3))


def geneword_candidates(
    corpus: Corpus,
    thresholds: GeneWordThresholds = GeneWordThresholds(),
    patterns: Iterable[GeneWordPattern] = (),
    priority: Iterable[GeneWordPattern | str] | None = None,
) -> list[GeneWordCandidate]:
    """Evaluate the three gene-word rules for every top-ranked keyword and every configured pattern.

    Rule 1 (frequency strictly above ``min_self_frequency`` and rank within
    ``max_rank``) does not apply to affix patterns. Rule 3 is skipped when
    ``priority`` is None or ``use_priority`` is off.
    """
    # 1. Candidate pool: top-ranked keywords plus configured patterns
    freq = keyword_frequencies(corpus)
    ranks = {k: i for i, k in enumerate(freq.index, start=1)}
    grand_total = int(sum(corpus.keyword_totals))

    pool = [GeneWordPattern(k) for k in freq.index[: thresholds.max_rank]]
    for p in patterns:
        if p not in pool:
            pool.append(p)

    # 2. Priority list for rule 3
    allowed = None
    if priority is not None and thresholds.use_priority:
        allowed = {str(p) if isinstance(p, GeneWordPattern) else str(GeneWordPattern.parse(p)) for p in priority}

    # 3. Derived-keyword families and the related-keyword rule
    pooled_share = 0.0
    families = {p: derived_keywords(corpus, p, thresholds.word_boundary) for p in pool}
    related_ok = {
        p: sum(1 for n in fam.values() if n > thresholds.min_related_frequency) >= thresholds.min_related
        for p, fam in families.items()
    }
    if thresholds.family_share_scope == "all-families":
        union: dict[str, int] = {}
        for p, fam in families.items():
            if related_ok[p]:
                union.update(fam)
        pooled_share = sum(union.values()) / grand_total if grand_total else 0.0
        log.info("all-families share of qualifying families: %.3f", pooled_share)

    # 4. Evaluate every rule per candidate
    candidates = []
    for p in pool:
        fam = families[p]
        family_total = sum(fam.values())
        share = family_total / grand_total if grand_total else 0.0
        scoped = share if thresholds.family_share_scope == "per-family" else pooled_share
        self_freq = int(freq.get(p.surface, 0))
        rank = ranks.get(p.surface)
        rule1 = None
        if not p.is_affix:
            rule1 = self_freq > thresholds.min_self_frequency and rank is not None and rank <= thresholds.max_rank
        candidates.append(
            GeneWordCandidate(
                pattern=p,
                frequency=self_freq,
                rank=rank,
                related=sum(1 for n in fam.values() if n > thresholds.min_related_frequency),
                family_total=family_total,
                family_share=share,
                rule1=rule1,
                rule2=related_ok[p] and scoped > thresholds.min_family_share,
                rule3=None if allowed is None else str(p) in allowed,
            )
        )
    log.info("%d of %d gene-word candidates pass", sum(c.passed for c in candidates), len(candidates))
    return candidates


def candidates_frame(candidates: Sequence[GeneWordCandidate]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "gene_word": str(c.pattern),
                "mode": c.pattern.mode,
                "frequency": c.frequency,
                "rank": c.rank if c.rank is not None else pd.NA,
                "related": c.related,
                "family_total": c.family_total,
                "family_share": c.family_share,
                "rule1": "NA" if c.rule1 is None else c.rule1,
                "rule2": c.rule2,
                "rule3": "NA" if c.rule3 is None else c.rule3,
                "passed": c.passed,
            }
            for c in candidates
        ]
    )


# --- REPORT ---
@dataclass(frozen=True)
class GeneWordReport:
    pattern: GeneWordPattern
    derived: tuple[str, ...]
    window_totals: tuple[int, ...]
    total: int
    share: float

    @property
    def derived_count(self) -> int:
        return len(self.derived)

    @property
    def average_exact(self) -> Fraction | None:
        return Fraction(self.total, self.derived_count) if self.derived_count else None

    @property
    def average(self) -> float:
        return float(self.average_exact) if self.average_exact is not None else float("nan")


@dataclass(frozen=True)
class GeneWordSummary:
    labels: tuple[str, ...]
    rows: tuple[GeneWordReport, ...]
    coverage: float

    def frame(self) -> pd.DataFrame:
        records = []
        for r in self.rows:
            record = {"gene_word": str(r.pattern), "mode": r.pattern.mode, "derived_keywords": r.derived_count}
            record.update(zip(self.labels, r.window_totals))
            record.update(total=r.total, average=r.average, share=r.share)
            records.append(record)
        return pd.DataFrame(records, columns=["gene_word", "mode", "derived_keywords", *self.labels, "total", "average", "share"])

    def metadata(self) -> dict:
        return {"coverage": self.coverage, "patterns": len(self.rows)}


def geneword_report(
    corpus: Corpus,
    patterns: Iterable[GeneWordPattern],
    word_boundary: bool = False,
) -> GeneWordSummary:
    """Family size, per-window and total frequency, average per derived keyword and share."""
    matrix = corpus.keyword_counts
    grand_total = int(sum(corpus.keyword_totals))
    rows, covered = [], set()
    for p in patterns:
        derived = sorted(derived_keywords(corpus, p, word_boundary))
        covered.update(derived)
        window_totals = tuple(int(n) for n in matrix.loc[derived].sum()) if derived else (0,) * corpus.n_windows
        total = sum(window_totals)
        rows.append(GeneWordReport(p, tuple(derived), window_totals, total, total / grand_total if grand_total else 0.0))

    coverage = int(matrix.loc[sorted(covered)].to_numpy().sum()) / grand_total if covered and grand_total else 0.0
    log.info("gene-word families cover %.1f%% of all keyword occurrences", coverage * 100)
    return GeneWordSummary(corpus.labels, tuple(rows), coverage)
