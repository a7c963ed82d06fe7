"""On-disk artifacts: edge TSV, graph snapshots, weighted TSV and histograms."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Sequence, TextIO, Tuple

from .click_graph import BipartiteClickGraph, build_graph
from .errors import SnapshotFormatError
from .log_ingest import EdgeTriple
from .weighting import WeightedGraph

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST_FILE = "manifest.json"
EDGES_FILE = "edges.tsv"
QUERIES_FILE = "queries.tsv"
URLS_FILE = "urls.tsv"


def _split_rows(lines: Iterable[str], columns: int, source: object) -> Iterator[Tuple[int, List[str]]]:
    for line_no, line in enumerate(lines, start=1):
        line = line.rstrip("\n").rstrip("\r")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != columns:
            raise SnapshotFormatError(f"{source}:{line_no}: expected {columns} columns, got {len(parts)}.")
        yield line_no, parts


def _read_rows(path: Path, columns: int) -> Iterator[Tuple[int, List[str]]]:
    if not path.is_file():
        raise SnapshotFormatError(f"File not found: {path}")
    with path.open("r", encoding="utf-8", newline="") as handle:
        yield from _split_rows(handle, columns, path)


def format_edges(triples: Iterable[EdgeTriple], handle: TextIO) -> int:
    count = 0
    for query, url, uf in triples:
        handle.write(f"{query}\t{url}\t{uf}\n")
        count += 1
    return count


def write_edges(triples: Sequence[EdgeTriple], path: Path) -> None:
    """Write ``query \\t url \\t uf`` lines, UTF-8 with LF endings."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        count = format_edges(triples, handle)
    logger.info("Dumped %d edges to %s", count, path)


def _to_triples(rows: Iterable[Tuple[int, List[str]]], source: object) -> List[EdgeTriple]:
    triples: List[EdgeTriple] = []
    for line_no, (query, url, uf_text) in rows:
        try:
            uf = int(uf_text)
        except ValueError as exc:
            raise SnapshotFormatError(f"{source}:{line_no}: user frequency {uf_text!r} is not an integer.") from exc
        if uf < 1:
            raise SnapshotFormatError(f"{source}:{line_no}: user frequency must be at least 1, got {uf}.")
        triples.append(EdgeTriple(query, url, uf))
    return triples


def parse_edges(lines: Iterable[str], source: object = "<edges>") -> List[EdgeTriple]:
    return _to_triples(_split_rows(lines, 3, source), source)


def read_edges(path: Path) -> List[EdgeTriple]:
    return _to_triples(_read_rows(path, 3), path)


def _write_dictionary(names: Sequence[str], path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for idx, name in enumerate(names):
            handle.write(f"{idx}\t{name}\n")


def _read_dictionary(path: Path) -> List[str]:
    names: List[str] = []
    for line_no, (idx_text, name) in _read_rows(path, 2):
        if idx_text != str(len(names)):
            raise SnapshotFormatError(f"{path}:{line_no}: expected id {len(names)}, got {idx_text!r}.")
        names.append(name)
    return names


def save_snapshot(graph: BipartiteClickGraph, directory: Path) -> None:
    """Persist a graph as manifest + edge list + both id dictionaries."""
    directory.mkdir(parents=True, exist_ok=True)
    write_edges(graph.triples(), directory / EDGES_FILE)
    _write_dictionary(graph.queries.names, directory / QUERIES_FILE)
    _write_dictionary(graph.urls.names, directory / URLS_FILE)
    manifest = {
        "format_version": FORMAT_VERSION,
        "num_queries": graph.num_queries,
        "num_urls": graph.num_urls,
        "num_edges": graph.num_edges,
    }
    (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    logger.info("Dumped graph snapshot to %s", directory)


def load_snapshot(directory: Path) -> BipartiteClickGraph:
    manifest_path = directory / MANIFEST_FILE
    if not manifest_path.is_file():
        raise SnapshotFormatError(f"Snapshot manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SnapshotFormatError(f"Snapshot manifest is not valid JSON: {exc}") from exc
    version = manifest.get("format_version") if isinstance(manifest, dict) else None
    if version != FORMAT_VERSION:
        raise SnapshotFormatError(f"Unsupported snapshot format_version {version!r}; expected {FORMAT_VERSION}.")

    graph = build_graph(read_edges(directory / EDGES_FILE))
    queries = _read_dictionary(directory / QUERIES_FILE)
    urls = _read_dictionary(directory / URLS_FILE)
    if tuple(queries) != graph.queries.names or tuple(urls) != graph.urls.names:
        raise SnapshotFormatError(f"Snapshot dictionaries in {directory} disagree with its edge list.")
    if manifest.get("num_edges", graph.num_edges) != graph.num_edges:
        raise SnapshotFormatError(
            f"Snapshot manifest lists {manifest['num_edges']} edges but {graph.num_edges} were read."
        )
    return graph


def load_graph(path: Path) -> BipartiteClickGraph:
    """Build a graph from either a snapshot directory or a plain edge TSV."""
    if path.is_dir():
        return load_snapshot(path)
    return build_graph(read_edges(path))


def format_weighted(weighted: WeightedGraph, handle: TextIO) -> None:
    handle.write(
        f"# model={weighted.model.value} q_total={weighted.q_total} u_total={weighted.u_total}\n"
    )
    graph = weighted.base
    values = weighted.values
    for row in range(graph.num_queries):
        query = graph.queries.name_of(row)
        start, end = values.indptr[row], values.indptr[row + 1]
        for col, value in zip(values.indices[start:end], values.data[start:end]):
            handle.write(f"{query}\t{graph.urls.name_of(int(col))}\t{value:.6g}\n")


def write_weighted(weighted: WeightedGraph, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        format_weighted(weighted, handle)
    logger.info("Dumped %s edge values to %s", weighted.model.label, path)


def read_histogram(path: Path) -> List[Tuple[float, float]]:
    """Read ``x \\t y`` pairs; ``#`` lines are comments."""
    points: List[Tuple[float, float]] = []
    for line_no, (x_text, y_text) in _read_rows(path, 2):
        try:
            points.append((float(x_text), float(y_text)))
        except ValueError as exc:
            raise SnapshotFormatError(f"{path}:{line_no}: histogram values must be numeric.") from exc
    return points


def write_histogram(hist: Sequence[Tuple[float, float]], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for x, y in hist:
            handle.write(f"{x}\t{y}\n")
    logger.info("Dumped histogram to %s", path)


def write_json(payload: Dict[str, Any], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    logger.info("Dumped JSON to %s", path)
