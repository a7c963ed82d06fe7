"""Deterministic fixtures: the four-query example graph, random graphs, synthetic logs."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import resources
from .click_graph import BipartiteClickGraph, build_graph
from .evaluation import CategoryCatalog, parse_catalog
from .graph_io import parse_edges
from .log_ingest import CleaningConfig, EdgeTriple, IngestStats

logger = logging.getLogger(__name__)

# Four queries, three URLs; graph totals are overridden to |Q| = 5, |U| = 4
# when reproducing the reference weight table.
TOY_TRIPLES: Tuple[EdgeTriple, ...] = (
    EdgeTriple("yahoo", "www.yahoo.com", 20),
    EdgeTriple("weather", "www.yahoo.com", 10),
    EdgeTriple("weather", "weather.noaa.gov", 10),
    EdgeTriple("travel", "www.yahoo.com", 10),
    EdgeTriple("travel", "www.expedia.com", 2),
    EdgeTriple("map", "www.yahoo.com", 5),
    EdgeTriple("map", "www.expedia.com", 10),
)
TOY_QUERIES = ("yahoo", "weather", "travel", "map")
TOY_URLS = ("www.yahoo.com", "weather.noaa.gov", "www.expedia.com")
TOY_Q_TOTAL = 5
TOY_U_TOTAL = 4

LOG_HEADER = "AnonID\tQuery\tQueryTime\tItemRank\tClickURL"
_TIMESTAMP = "2006-03-01 07:17:12"


def toy_graph() -> BipartiteClickGraph:
    return build_graph(TOY_TRIPLES)


def _as_rng(seed: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_triples(
    seed: int | np.random.Generator,
    max_queries: int = 50,
    max_urls: int = 50,
    max_uf: int = 20,
    density: Optional[float] = None,
) -> List[EdgeTriple]:
    """A random graph where every query and every URL has at least one edge.

    Queries are named ``q000``..., URLs ``d000.com``...; output sorted by (query, url).
    """
    rng = _as_rng(seed)
    m = int(rng.integers(1, max_queries + 1))
    n = int(rng.integers(1, max_urls + 1))
    p = float(rng.uniform(0.02, 0.3)) if density is None else density

    mask = rng.random((m, n)) < p
    mask[np.arange(m), rng.integers(0, n, size=m)] = True
    uncovered = np.flatnonzero(~mask.any(axis=0))
    mask[rng.integers(0, m, size=uncovered.size), uncovered] = True

    rows, cols = np.nonzero(mask)
    ufs = rng.integers(1, max_uf + 1, size=rows.size)
    return [EdgeTriple(f"q{i:03d}", f"d{j:03d}.com", int(uf)) for i, j, uf in zip(rows, cols, ufs)]


def synthetic_query(index: int) -> Tuple[str, str]:
    """Raw log text for query ``index`` and the string it normalizes to."""
    return f"Term{index}, topic{index % 7}!", f"term{index} topic{index % 7}"


def write_synthetic_log(
    path: Path,
    num_lines: int,
    seed: int = 0,
    num_users: int = 2000,
    num_queries: int = 5000,
    num_urls: int = 3000,
    no_click_rate: float = 0.3,
    malformed_rate: float = 0.01,
    config: Optional[CleaningConfig] = None,
) -> IngestStats:
    """Write an AOL-format log and return the stats an ingest of it must report.

    The first line is a header and counts towards ``num_lines``. Counts assume
    ingestion with an empty stop-word list.
    """
    config = config or CleaningConfig()
    rng = _as_rng(seed)
    body = max(num_lines - 1, 0)
    users = rng.integers(0, num_users, size=body)
    # Zipf-like query popularity so the rare-query filter has work to do.
    query_ids = np.minimum(rng.zipf(1.3, size=body) - 1, num_queries - 1)
    url_ids = (query_ids * 7 + rng.integers(0, 3, size=body)) % num_urls
    kind = rng.random(body)
    malformed = kind < malformed_rate
    no_click = (~malformed) & (kind < malformed_rate + no_click_rate)
    clicked = ~(malformed | no_click)

    raw_queries = {}
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        if num_lines:
            handle.write(LOG_HEADER + "\n")
        chunk: List[str] = []
        for pos in range(body):
            qid = int(query_ids[pos])
            text = raw_queries.get(qid)
            if text is None:
                text = raw_queries[qid] = synthetic_query(qid)[0]
            if malformed[pos]:
                chunk.append(f"{users[pos]}\t{text}\n")
            elif no_click[pos]:
                chunk.append(f"{users[pos]}\t{text}\t{_TIMESTAMP}\t\t\n")
            else:
                chunk.append(f"{users[pos]}\t{text}\t{_TIMESTAMP}\t1\thttp://www.site{url_ids[pos]}.com\n")
            if len(chunk) >= 65536:
                handle.writelines(chunk)
                chunk.clear()
        handle.writelines(chunk)

    stats = IngestStats(
        total_lines=num_lines,
        header_lines=1 if num_lines else 0,
        malformed_lines=int(malformed.sum()),
        no_click_lines=int(no_click.sum()),
        click_events=int(clicked.sum()),
    )
    if not stats.click_events:
        logger.info("Wrote synthetic log with %d lines to %s", num_lines, path)
        return stats
    # Distinct (user, query, url) -> per-edge uf -> per-query totals.
    keys = np.unique(np.stack([query_ids[clicked], url_ids[clicked], users[clicked]], axis=1), axis=0)
    edges, uf = np.unique(keys[:, :2], axis=0, return_counts=True)
    stats.distinct_user_edges = int(len(edges))
    _, inverse = np.unique(edges[:, 0], return_inverse=True)
    inverse = inverse.ravel()
    keep = np.bincount(inverse, weights=uf) >= config.min_user_clicks_per_query
    stats.queries_dropped_rare = int((~keep).sum())
    stats.edges_kept = int(keep[inverse].sum())
    logger.info("Wrote synthetic log with %d lines to %s", num_lines, path)
    return stats


def power_law_histogram(
    amplitude: float,
    exponent: float,
    xs: Sequence[float] | np.ndarray = tuple(range(1, 201)),
    noise: float = 0.0,
    seed: int | np.random.Generator = 0,
) -> List[Tuple[float, float]]:
    """Points of y = amplitude * x ** (-exponent); ``noise`` is a log-normal sigma."""
    x = np.asarray(xs, dtype=np.float64)
    y = amplitude * np.power(x, -exponent)
    if noise > 0:
        y = y * np.exp(_as_rng(seed).normal(0.0, noise, size=x.size))
    return [(float(a), float(b)) for a, b in zip(x, y)]


def mini_triples() -> List[EdgeTriple]:
    return parse_edges(resources.read_lines(resources.MINI_EDGES_FILE), resources.MINI_EDGES_FILE)


def mini_graph() -> BipartiteClickGraph:
    """The packaged 20-query graph."""
    return build_graph(mini_triples())


def mini_catalog(config: Optional[CleaningConfig] = None) -> CategoryCatalog:
    return parse_catalog(resources.read_lines(resources.MINI_CATALOG_FILE), config)
