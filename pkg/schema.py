# schema.py

"""Shared constants: corpus file schema, export columns, report layouts, errors."""

TOOL_NAME = "knowledge-insights"
TOOL_VERSION = "0.3.0"

# --- CANONICAL CORPUS FILE ---
CORPUS_FORMAT = "knowledge-insights-corpus"
SCHEMA_VERSION = 1

# Field order of one record line; docs/corpus_schema.md documents each field.
RECORD_FIELDS = (
    "id",
    "title",
    "year",
    "authors",
    "affiliations",
    "keywords",
    "journal",
    "citation_count",
    "doi",
    "raw_keywords",
    "flags",
)

FLAG_NO_KEYWORDS = "no-keywords"

# --- EXPORT CSV ---
COL_AUTHORS = "Authors"
COL_TITLE = "Title"
COL_YEAR = "Year"
COL_KEYWORDS = "Author Keywords"
COL_AFFILIATIONS = "Affiliations"
COL_CITED_BY = "Cited by"
COL_DOI = "DOI"
COL_JOURNAL = "Source title"

REQUIRED_EXPORT_COLUMNS = (
    COL_AUTHORS,
    COL_TITLE,
    COL_YEAR,
    COL_KEYWORDS,
    COL_AFFILIATIONS,
    COL_CITED_BY,
    COL_DOI,
    COL_JOURNAL,
)

# --- PREPROCESS REASON CODES ---
REASON_MISSING_TITLE = "missing-title"
REASON_EMPTY_AUTHORS = "empty-authors"
REASON_MISSING_YEAR = "missing-year"
REASON_INVALID_YEAR = "invalid-year"
REASON_MISSING_KEYWORDS = "missing-keywords"

# --- REPORTS ---
ALL_LABEL = "all"
UNCATEGORIZED = "(uncategorized)"
NA_REP = "NA"

GRAPH_ROWS = (
    "nodes",
    "edges",
    "average_weighted_degree",
    "mean_node_strength",
    "density",
    "modularity",
    "communities",
    "average_clustering",
)

# --- EXIT CODES ---
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class InsightsError(Exception):
    exit_code = EXIT_INTERNAL


class ConfigError(InsightsError):
    """Bad usage or configuration."""

    exit_code = EXIT_CONFIG


class DataError(InsightsError):
    """Input data that cannot be processed."""

    exit_code = EXIT_DATA
