"""Package data shipped with query_click_graph."""

from __future__ import annotations

from importlib import resources as _resources
from typing import List

__all__ = ["files", "read_lines", "STOPWORDS_FILE", "MINI_EDGES_FILE", "MINI_CATALOG_FILE"]

STOPWORDS_FILE = "stopwords_en.txt"
MINI_EDGES_FILE = "examples/mini_edges.tsv"
MINI_CATALOG_FILE = "examples/mini_catalog.tsv"

files = _resources.files


def read_lines(name: str) -> List[str]:
    """Return the lines of a packaged resource file given its relative name."""
    entry = _resources.files(__name__).joinpath(*name.split("/"))
    return entry.read_text(encoding="utf-8").splitlines()
