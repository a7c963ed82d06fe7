"""Parse AOL-format search logs into cleaned click records and uf triples."""

from __future__ import annotations

import gzip
import logging
import zlib
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from functools import cached_property
from pathlib import Path
from typing import BinaryIO, Callable, Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

from tqdm import tqdm

from . import resources
from .errors import ConfigError, IngestIOError
from .text_utils import ASCII_PUNCTUATION, load_word_list, normalize_query, normalize_url, punctuation_table

logger = logging.getLogger(__name__)

DEFAULT_MIN_USER_CLICKS = 4
FIELD_COUNT = 5
_HEADER_IDS = {"anonid", "userid", "user_id"}
_GZIP_MAGIC = b"\x1f\x8b"
_TICK_EVERY = 65536


@dataclass(frozen=True)
class RawLogLine:
    user_id: str
    query: str
    timestamp: str
    rank: Optional[int]
    click_url: str


class ClickRecord(NamedTuple):
    user_id: str
    query: str
    url: str


class EdgeTriple(NamedTuple):
    query: str
    url: str
    uf: int


@dataclass(frozen=True)
class CleaningConfig:
    stopwords: frozenset[str] = frozenset()
    min_user_clicks_per_query: int = DEFAULT_MIN_USER_CLICKS
    punctuation: str = ASCII_PUNCTUATION

    def __post_init__(self) -> None:
        if self.min_user_clicks_per_query < 1:
            raise ConfigError("min_user_clicks_per_query must be at least 1.")

    @cached_property
    def table(self) -> Dict[int, str]:
        return punctuation_table(self.punctuation)

    def normalize(self, query: str) -> str:
        return normalize_query(query, self.stopwords, self.table)


@dataclass
class IngestStats:
    """Line accounting for one or more parsed sources.

    ``click_events`` counts every yielded click before user dedup, i.e. the
    raw click-frequency basis. The last three fields are filled by
    :func:`ingest_files` once deduplication and filtering have run.
    """

    total_lines: int = 0
    header_lines: int = 0
    malformed_lines: int = 0
    no_click_lines: int = 0
    empty_query_lines: int = 0
    click_events: int = 0
    distinct_user_edges: int = 0
    queries_dropped_rare: int = 0
    edges_kept: int = 0

    def merge(self, other: "IngestStats") -> "IngestStats":
        return IngestStats(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})

    def to_dict(self) -> Dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_stopwords(path: Optional[Path] = None, use_default: bool = True) -> frozenset[str]:
    """Resolve the stop-word list from an explicit file or the packaged default."""
    if path is not None:
        candidate = path.expanduser()
        if not candidate.is_file():
            raise ConfigError(f"Stop-word file not found: {candidate}")
        words = load_word_list(candidate.read_text(encoding="utf-8").splitlines())
        logger.debug("Loaded %d stop words from %s", len(words), candidate)
        return words
    if not use_default:
        return frozenset()
    words = load_word_list(resources.read_lines(resources.STOPWORDS_FILE))
    logger.debug("Loaded %d packaged stop words", len(words))
    return words


def open_log(path: Path) -> BinaryIO:
    """Open a log file for binary reading, gunzipping when the magic bytes say so."""
    try:
        with path.open("rb") as handle:
            magic = handle.read(2)
        if magic == _GZIP_MAGIC:
            return gzip.open(path, "rb")  # type: ignore[return-value]
        return path.open("rb")
    except OSError as exc:
        raise IngestIOError(f"Cannot open log {path}: {exc}", offset=0) from exc


def _decode(raw: bytes) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        return raw.decode("latin-1")


def split_log_line(line: str) -> Optional[RawLogLine]:
    """Split one TSV line into its five AOL columns; ``None`` when malformed."""
    parts = line.rstrip("\r\n").split("\t")
    if len(parts) != FIELD_COUNT:
        return None
    user_id, query, timestamp, rank_text, click_url = parts
    rank_text = rank_text.strip()
    rank = int(rank_text) if rank_text.isdigit() else None
    return RawLogLine(user_id.strip(), query, timestamp, rank, click_url.strip())


def _is_header(line: RawLogLine) -> bool:
    return line.user_id.lower() in _HEADER_IDS


def parse_log(
    source: BinaryIO,
    config: CleaningConfig,
    stats: Optional[IngestStats] = None,
    on_lines: Optional[Callable[[int], None]] = None,
) -> Iterator[ClickRecord]:
    """Stream cleaned click records out of an AOL-format byte source.

    ``stats`` is updated in place while the generator is consumed. Malformed
    lines are counted and skipped; only a failing read raises. ``on_lines``
    receives line-count increments for progress display.
    """
    stats = stats if stats is not None else IngestStats()
    normalized: Dict[str, str] = {}
    offset = 0
    line_no = 0
    iterator = iter(source)
    while True:
        try:
            raw = next(iterator)
        except StopIteration:
            break
        except (OSError, EOFError, zlib.error) as exc:
            raise IngestIOError(f"Failed reading log: {exc}", offset=offset) from exc
        line_no += 1
        offset += len(raw)
        stats.total_lines += 1
        if on_lines is not None and line_no % _TICK_EVERY == 0:
            on_lines(_TICK_EVERY)

        parsed = split_log_line(_decode(raw))
        if parsed is None:
            stats.malformed_lines += 1
            logger.debug("Malformed line %d skipped.", line_no)
            continue
        if line_no == 1 and _is_header(parsed):
            stats.header_lines += 1
            continue
        if not parsed.click_url:
            stats.no_click_lines += 1
            continue

        query = normalized.get(parsed.query)
        if query is None:
            query = config.normalize(parsed.query)
            normalized[parsed.query] = query
        if not query:
            stats.empty_query_lines += 1
            continue
        stats.click_events += 1
        yield ClickRecord(parsed.user_id, query, normalize_url(parsed.click_url))

    if on_lines is not None and line_no % _TICK_EVERY:
        on_lines(line_no % _TICK_EVERY)


def dedupe_user_frequency(records: Iterable[ClickRecord]) -> List[EdgeTriple]:
    """Count distinct users per (query, url); output sorted by (query, url)."""
    distinct = {(record.user_id, record.query, record.url) for record in records}
    counts = Counter((query, url) for _, query, url in distinct)
    return [EdgeTriple(query, url, uf) for (query, url), uf in sorted(counts.items())]


def filter_rare_queries(triples: Sequence[EdgeTriple], config: CleaningConfig) -> List[EdgeTriple]:
    """Keep the edges of queries whose summed uf reaches the configured threshold."""
    totals: Counter[str] = Counter()
    for triple in triples:
        totals[triple.query] += triple.uf
    threshold = config.min_user_clicks_per_query
    kept = [triple for triple in triples if totals[triple.query] >= threshold]
    dropped = sum(1 for total in totals.values() if total < threshold)
    logger.debug("Rare-query filter (threshold=%d) dropped %d queries.", threshold, dropped)
    return kept


def _parse_path(
    path: Path,
    config: CleaningConfig,
    on_lines: Optional[Callable[[int], None]],
) -> Tuple[List[ClickRecord], IngestStats]:
    stats = IngestStats()
    with open_log(path) as source:
        records = list(parse_log(source, config, stats, on_lines))
    logger.info(
        "Parsed %s: %d lines, %d clicks, %d malformed, %d without click.",
        path,
        stats.total_lines,
        stats.click_events,
        stats.malformed_lines,
        stats.no_click_lines,
    )
    return records, stats


def ingest_files(
    paths: Sequence[Path],
    config: CleaningConfig,
    workers: int = 1,
    show_progress: bool = False,
) -> Tuple[List[EdgeTriple], IngestStats]:
    """Parse, dedupe and filter several logs; returns sorted triples and merged stats."""
    with tqdm(unit=" lines", disable=not show_progress, leave=False) as ticker:
        if workers > 1 and len(paths) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda p: _parse_path(p, config, ticker.update), paths))
        else:
            results = [_parse_path(path, config, ticker.update) for path in paths]

    stats = IngestStats()
    records: List[ClickRecord] = []
    for part_records, part_stats in results:
        stats = stats.merge(part_stats)
        records.extend(part_records)

    triples = dedupe_user_frequency(records)
    stats.distinct_user_edges = len(triples)
    kept = filter_rare_queries(triples, config)
    stats.queries_dropped_rare = len({t.query for t in triples}) - len({t.query for t in kept})
    stats.edges_kept = len(kept)
    logger.info(
        "Ingest complete: %d click events -> %d uf edges -> %d edges after filtering.",
        stats.click_events,
        stats.distinct_user_edges,
        stats.edges_kept,
    )
    return kept, stats
