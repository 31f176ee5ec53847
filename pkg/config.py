"""Run configuration: one YAML file mapped onto frozen dataclasses.

Relative paths are resolved against the directory of the config file. The
config hash (SHA-256 of the canonical JSON form, output directory left out)
names the run directory and is stamped on every output.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from corpus_logic import CorpusError, PeriodPartition, partition_periods
from geneword_logic import SHARE_SCOPES, GeneWordError, GeneWordThresholds, load_patterns
from graph_logic import UNIVERSES
from ingest_logic import (
    DEFAULT_COUNTRIES,
    DEFAULT_COUNTRY_ALIASES,
    DEFAULT_PUNCTUATION_RULES,
    EXPORT_FORMATS,
    NormalizationConfig,
    load_normalization,
)
from schema import TOOL_VERSION, ConfigError, DataError
from taxonomy_logic import load_taxonomy
from trend_logic import BASES

OUTPUT_FORMATS = ("tsv", "jsonl")


@dataclass(frozen=True)
class PeriodSpec:
    start: int | None = None
    end: int | None = None
    width: int | None = None
    windows: tuple[tuple[int, int], ...] = ()
    labels: tuple[str, ...] = ()

    def partition(self) -> PeriodPartition:
        try:
            if self.windows:
                return PeriodPartition.from_windows(self.windows, self.labels or None)
            if None in (self.start, self.end, self.width):
                raise ConfigError("periods: give start, end and width, or an explicit windows list")
            partition = partition_periods(self.start, self.end, self.width)
            return PeriodPartition(partition.windows, self.labels) if self.labels else partition
        except CorpusError as e:
            raise ConfigError(f"periods: {e}") from None


@dataclass(frozen=True)
class NormalizationSpec:
    synonyms: Path | None = None
    country_aliases: Path | None = DEFAULT_COUNTRY_ALIASES
    countries: Path | None = DEFAULT_COUNTRIES
    accent_folding: bool = True
    punctuation_rules: tuple[tuple[str, str], ...] = DEFAULT_PUNCTUATION_RULES
    keyword_delimiter: str = ";"
    keep_incomplete: bool = False

    def load(self) -> NormalizationConfig:
        return load_normalization(
            self.synonyms,
            self.country_aliases,
            self.countries,
            accent_folding=self.accent_folding,
            punctuation_rules=self.punctuation_rules,
            keyword_delimiter=self.keyword_delimiter,
            keep_incomplete=self.keep_incomplete,
        )


@dataclass(frozen=True)
class TrendSpec:
    min_total_count: int = 5
    basis: str = "share"
    alpha: float = 0.01
    top: int = 20
    pair_percent: bool = False


@dataclass(frozen=True)
class TaxonomySpec:
    path: Path | None = None
    level: int = 2
    single_label: bool = False


@dataclass(frozen=True)
class GeneWordSpec:
    patterns: Path | None = None
    priority: Path | None = None
    min_self_frequency: int = 100
    max_rank: int = 100
    min_related: int = 10
    min_related_frequency: int = 10
    min_family_share: float = 0.20
    family_share_scope: str = "per-family"
    use_priority: bool = True
    word_boundary: bool = False

    def thresholds(self) -> GeneWordThresholds:
        return GeneWordThresholds(
            min_self_frequency=self.min_self_frequency,
            max_rank=self.max_rank,
            min_related=self.min_related,
            min_related_frequency=self.min_related_frequency,
            min_family_share=self.min_family_share,
            family_share_scope=self.family_share_scope,
            use_priority=self.use_priority,
            word_boundary=self.word_boundary,
        )


@dataclass(frozen=True)
class GraphSpec:
    universe: str = "observed"
    export: bool = True


@dataclass(frozen=True)
class MapSpec:
    window: str | None = None
    max_nodes: int = 300
    tol: float = 1e-9
    max_iters: int = 1000
    bandwidth: float | None = None
    grid: int = 200
    max_labels: int = 100


@dataclass(frozen=True)
class RunConfig:
    inputs: tuple[Path, ...] = ()
    input_format: str = "csv-export"
    corpus: Path | None = None
    periods: PeriodSpec = field(default_factory=PeriodSpec)
    normalization: NormalizationSpec = field(default_factory=NormalizationSpec)
    trends: TrendSpec = field(default_factory=TrendSpec)
    taxonomy: TaxonomySpec = field(default_factory=TaxonomySpec)
    genewords: GeneWordSpec = field(default_factory=GeneWordSpec)
    graph: GraphSpec = field(default_factory=GraphSpec)
    map: MapSpec = field(default_factory=MapSpec)
    seed: int = 0
    workers: int = 4
    output_dir: Path = Path("output")
    formats: tuple[str, ...] = ("tsv",)
    source: Path | None = field(default=None, compare=False)

    @property
    def corpus_path(self) -> Path:
        return self.corpus if self.corpus is not None else self.output_dir / "corpus.jsonl"

    def to_dict(self) -> dict[str, Any]:
        data = dataclasses.asdict(self)
        data.pop("source")
        return json.loads(json.dumps(data, default=str))

    @property
    def config_hash(self) -> str:
        data = self.to_dict()
        data.pop("output_dir")
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @property
    def run_dir(self) -> Path:
        return self.output_dir / f"run-{self.config_hash[:12]}"

    def metadata(self) -> dict[str, Any]:
        return {"tool_version": TOOL_VERSION, "config_hash": self.config_hash, "seed": self.seed}

    def with_overrides(self, seed: int | None = None, output_dir: Path | None = None) -> "RunConfig":
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = seed
        if output_dir is not None:
            changes["output_dir"] = Path(output_dir)
        return dataclasses.replace(self, **changes)


# --- YAML LOADING ---
_PATH_FIELDS = {
    "normalization": ("synonyms", "country_aliases", "countries"),
    "taxonomy": ("path",),
    "genewords": ("patterns", "priority"),
}
_SECTIONS = {
    "periods": PeriodSpec,
    "normalization": NormalizationSpec,
    "trends": TrendSpec,
    "taxonomy": TaxonomySpec,
    "genewords": GeneWordSpec,
    "graph": GraphSpec,
    "map": MapSpec,
}


def _resolve(base: Path, value: Any) -> Path | None:
    if value is None or value == "":
        return None
    path = Path(str(value)).expanduser()
    return path if path.is_absolute() else (base / path).resolve()


def _coerce(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_coerce(v) for v in value)
    return value


def _section(name: str, cls: type, raw: Any, base: Path) -> Any:
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{name}: unknown key(s) {', '.join(unknown)}")
    values = {k: _coerce(v) for k, v in raw.items()}
    for key in _PATH_FIELDS.get(name, ()):
        if key in values:
            values[key] = _resolve(base, values[key])
    try:
        return cls(**values)
    except (TypeError, ValueError, GeneWordError) as e:
        raise ConfigError(f"{name}: {e}") from None


def config_from_dict(data: dict[str, Any], base: Path = Path("."), source: Path | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    known = {f.name for f in dataclasses.fields(RunConfig)} - {"source"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")

    inputs = data.get("inputs") or ()
    if isinstance(inputs, str):
        inputs = [inputs]
    sections = {name: _section(name, cls, data.get(name), base) for name, cls in _SECTIONS.items()}
    formats = data.get("formats") or ("tsv",)
    if isinstance(formats, str):
        formats = [formats]
    try:
        return RunConfig(
            inputs=tuple(_resolve(base, p) for p in inputs),
            input_format=str(data.get("input_format", "csv-export")),
            corpus=_resolve(base, data.get("corpus")),
            seed=int(data.get("seed", 0)),
            workers=int(data.get("workers", 4)),
            output_dir=_resolve(base, data.get("output_dir", "output")),
            formats=tuple(str(f) for f in formats),
            source=source,
            **sections,
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad config value: {e}") from None


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML ({e})") from None
    return config_from_dict(data, path.resolve().parent, path)


# --- VALIDATION ---
def validate_config(config: RunConfig, need_inputs: bool = True) -> list[str]:
    """Every problem found, in a stable order; an empty list means the config is usable."""
    problems = []

    if need_inputs and not config.inputs:
        problems.append("inputs: no input files configured")
    for p in config.inputs:
        if not p.is_file():
            problems.append(f"inputs: file not found: {p}")
    if config.input_format not in EXPORT_FORMATS:
        problems.append(f"input_format: {config.input_format!r} is not one of {', '.join(EXPORT_FORMATS)}")
    bad_formats = [f for f in config.formats if f not in OUTPUT_FORMATS]
    if bad_formats:
        problems.append(f"formats: unknown output format(s) {', '.join(bad_formats)}")
    if config.workers < 1:
        problems.append("workers: must be at least 1")

    partition = None
    try:
        partition = config.periods.partition()
    except ConfigError as e:
        problems.append(str(e))

    norm = config.normalization
    for key in ("synonyms", "country_aliases", "countries"):
        path = getattr(norm, key)
        if path is not None and not Path(path).is_file():
            problems.append(f"normalization.{key}: file not found: {path}")
    normalization = None
    if not any(p.startswith("normalization.") for p in problems):
        try:
            normalization = norm.load()
        except ConfigError as e:
            problems.append(f"normalization: {e}")

    trends = config.trends
    if trends.basis not in BASES:
        problems.append(f"trends.basis: {trends.basis!r} is not one of {', '.join(BASES)}")
    if trends.min_total_count < 1:
        problems.append("trends.min_total_count: must be at least 1")
    if not 0 < trends.alpha < 1:
        problems.append("trends.alpha: must lie in (0, 1)")
    if trends.top < 1:
        problems.append("trends.top: must be at least 1")

    tax = config.taxonomy
    if tax.level not in (1, 2):
        problems.append("taxonomy.level: must be 1 or 2")
    if tax.path is not None:
        if not tax.path.is_file():
            problems.append(f"taxonomy.path: file not found: {tax.path}")
        else:
            try:
                load_taxonomy(tax.path, normalization)
            except DataError as e:
                problems.append(f"taxonomy: {e}")

    gw = config.genewords
    if gw.family_share_scope not in SHARE_SCOPES:
        problems.append(f"genewords.family_share_scope: {gw.family_share_scope!r} is not one of {', '.join(SHARE_SCOPES)}")
    else:
        try:
            gw.thresholds()
        except GeneWordError as e:
            problems.append(f"genewords: {e}")
    for key in ("patterns", "priority"):
        path = getattr(gw, key)
        if path is None:
            continue
        try:
            load_patterns(path)
        except GeneWordError as e:
            problems.append(f"genewords.{key}: {e}")

    if config.graph.universe not in UNIVERSES:
        problems.append(f"graph.universe: {config.graph.universe!r} is not one of {', '.join(UNIVERSES)}")

    m = config.map
    if m.max_nodes < 2:
        problems.append("map.max_nodes: must be at least 2")
    if m.grid < 2:
        problems.append("map.grid: must be at least 2")
    if m.bandwidth is not None and not m.bandwidth > 0:
        problems.append("map.bandwidth: must be positive")
    if m.tol <= 0 or m.max_iters < 1:
        problems.append("map: tol must be positive and max_iters at least 1")
    if m.window is not None and partition is not None and m.window not in partition.labels and m.window != "all":
        problems.append(f"map.window: {m.window!r} is not a window label ({', '.join(partition.labels)})")

    return problems
