"""Read-only query interface over cached binary analysis."""
from .api import (DEFAULT_PAGE, DEFAULT_SEARCH_LIMIT, METHODS, REPRESENTATIONS, BinaryAPI, Page, open_binary,
                  paginate, search_texts)
from .dialect import DIALECT, compile_pattern
from .errors import ERROR_CODES, InvalidPage, InvalidPattern, QueryError, UnknownName
from .pipeline import FORMAT_VERSION, STATS, analyze, string_refs
from .store import AnalysisStore, canonical, default_cache_dir

__all__ = [
    "AnalysisStore", "BinaryAPI", "DEFAULT_PAGE", "DEFAULT_SEARCH_LIMIT", "DIALECT", "ERROR_CODES",
    "FORMAT_VERSION", "InvalidPage", "InvalidPattern", "METHODS", "Page", "QueryError", "REPRESENTATIONS",
    "STATS", "UnknownName", "analyze", "canonical", "compile_pattern", "default_cache_dir", "open_binary",
    "paginate", "search_texts", "string_refs",
]
