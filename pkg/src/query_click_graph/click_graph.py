"""Sparse query-URL bipartite click graph, degree profile and power-law fitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse, stats

from .errors import DegenerateFitError, DuplicateEdgeError, UnknownQueryError
from .log_ingest import EdgeTriple

logger = logging.getLogger(__name__)

_PROFILE_CHUNK = 4096


class IdDictionary:
    """Bidirectional string <-> dense id map; ids follow lexicographic order."""

    __slots__ = ("_names", "_ids")

    def __init__(self, names: Iterable[str]) -> None:
        self._names: Tuple[str, ...] = tuple(sorted(set(names)))
        self._ids: Dict[str, int] = {name: idx for idx, name in enumerate(self._names)}

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: object) -> bool:
        return name in self._ids

    def __iter__(self):
        return iter(self._names)

    def id_of(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError as exc:
            raise UnknownQueryError(f"Unknown entry: {name!r}") from exc

    def name_of(self, idx: int) -> str:
        return self._names[idx]

    @property
    def names(self) -> Tuple[str, ...]:
        return self._names


@dataclass(frozen=True, eq=False)
class UrlDegreeProfile:
    q_of_d: np.ndarray
    u_of_d: np.ndarray


@dataclass(frozen=True, eq=False)
class BipartiteClickGraph:
    """Immutable M x N user-frequency matrix with row (query) and column (URL) views.

    ``by_query`` is an M x N CSR matrix and ``by_url`` its N x M transpose,
    also CSR, so the rows of each give the sorted incident edges.
    """

    queries: IdDictionary
    urls: IdDictionary
    by_query: sparse.csr_matrix
    by_url: sparse.csr_matrix = field(repr=False)

    @property
    def num_queries(self) -> int:
        return len(self.queries)

    @property
    def num_urls(self) -> int:
        return len(self.urls)

    @property
    def num_edges(self) -> int:
        return int(self.by_query.nnz)

    @property
    def total_uf(self) -> int:
        return int(self.by_query.data.sum())

    def edges_of_query(self, query_id: int) -> List[Tuple[int, int]]:
        start, end = self.by_query.indptr[query_id], self.by_query.indptr[query_id + 1]
        return list(zip(self.by_query.indices[start:end].tolist(), self.by_query.data[start:end].tolist()))

    def edges_of_url(self, url_id: int) -> List[Tuple[int, int]]:
        start, end = self.by_url.indptr[url_id], self.by_url.indptr[url_id + 1]
        return list(zip(self.by_url.indices[start:end].tolist(), self.by_url.data[start:end].tolist()))

    @cached_property
    def query_totals(self) -> np.ndarray:
        """S_i: the summed user frequency of every query."""
        return np.asarray(self.by_query.sum(axis=1), dtype=np.float64).ravel()

    @cached_property
    def degree_profile(self) -> UrlDegreeProfile:
        return compute_degree_profile(self)

    def triples(self) -> List[EdgeTriple]:
        coo = self.by_query.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return [
            EdgeTriple(self.queries.name_of(int(coo.row[k])), self.urls.name_of(int(coo.col[k])), int(coo.data[k]))
            for k in order
        ]


def build_graph(triples: Iterable[Tuple[str, str, int]]) -> BipartiteClickGraph:
    """Assign lexicographic ids and assemble both adjacency views."""
    edges = [EdgeTriple(str(q), str(u), int(uf)) for q, u, uf in triples]
    seen = set()
    for edge in edges:
        key = (edge.query, edge.url)
        if key in seen:
            raise DuplicateEdgeError(f"Duplicate edge ({edge.query!r}, {edge.url!r}).")
        if edge.uf < 1:
            raise ValueError(f"User frequency must be >= 1, got {edge.uf} for ({edge.query!r}, {edge.url!r}).")
        seen.add(key)

    queries = IdDictionary(edge.query for edge in edges)
    urls = IdDictionary(edge.url for edge in edges)
    rows = np.fromiter((queries.id_of(e.query) for e in edges), dtype=np.int64, count=len(edges))
    cols = np.fromiter((urls.id_of(e.url) for e in edges), dtype=np.int64, count=len(edges))
    data = np.fromiter((e.uf for e in edges), dtype=np.int64, count=len(edges))

    by_query = sparse.csr_matrix((data, (rows, cols)), shape=(len(queries), len(urls)), dtype=np.int64)
    by_query.sort_indices()
    by_url = by_query.T.tocsr()
    by_url.sort_indices()
    logger.info("Built click graph: %d queries, %d URLs, %d edges.", len(queries), len(urls), len(edges))
    return BipartiteClickGraph(queries=queries, urls=urls, by_query=by_query, by_url=by_url)


def compute_degree_profile(graph: BipartiteClickGraph) -> UrlDegreeProfile:
    """q(d_j) = incident query count; u(d_j) = URLs one query-hop away, d_j included."""
    q_of_d = np.diff(graph.by_url.indptr).astype(np.int64)

    pattern_q = graph.by_query.copy()
    pattern_q.data = np.ones_like(pattern_q.data, dtype=np.int32)
    pattern_u = graph.by_url.copy()
    pattern_u.data = np.ones_like(pattern_u.data, dtype=np.int32)

    u_of_d = np.zeros(graph.num_urls, dtype=np.int64)
    for start in range(0, graph.num_urls, _PROFILE_CHUNK):
        stop = min(start + _PROFILE_CHUNK, graph.num_urls)
        reach = pattern_u[start:stop] @ pattern_q
        u_of_d[start:stop] = np.diff(reach.indptr)
    return UrlDegreeProfile(q_of_d=q_of_d, u_of_d=u_of_d)


def degree_histogram(values: Sequence[int] | np.ndarray) -> List[Tuple[int, int]]:
    """(value, number of URLs with that value) pairs, ascending by value."""
    array = np.asarray(values)
    if array.size == 0:
        raise ValueError("degree_histogram needs at least one value.")
    xs, ys = np.unique(array, return_counts=True)
    return [(int(x), int(y)) for x, y in zip(xs, ys)]


@dataclass(frozen=True)
class PowerLawFit:
    """y = A * x ** (-B), fitted by least squares on (ln x, ln y)."""

    A: float
    B: float
    r_squared: float

    def predict(self, x: float | np.ndarray) -> float | np.ndarray:
        return self.A * np.power(x, -self.B)

    def to_dict(self) -> Dict[str, float]:
        return {"A": self.A, "B": self.B, "r_squared": self.r_squared}


def fit_power_law(hist: Sequence[Tuple[float, float]]) -> PowerLawFit:
    points = np.asarray([(x, y) for x, y in hist if x >= 1 and y >= 1], dtype=np.float64)
    if len(points) < 3:
        raise DegenerateFitError(f"Power-law fit needs at least 3 points with x, y >= 1; got {len(points)}.")
    log_x = np.log(points[:, 0])
    log_y = np.log(points[:, 1])
    if np.ptp(log_x) == 0:
        raise DegenerateFitError("Power-law fit needs more than one distinct x value.")

    result = stats.linregress(log_x, log_y)
    residual = log_y - (result.intercept + result.slope * log_x)
    ss_tot = float(np.sum((log_y - log_y.mean()) ** 2))
    ss_res = float(np.sum(residual**2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(A=float(np.exp(result.intercept)), B=-float(result.slope), r_squared=r_squared)


@dataclass(frozen=True)
class GraphStats:
    num_queries: int
    num_urls: int
    num_edges: int
    total_uf: int
    q_histogram: List[Tuple[int, int]]
    u_histogram: List[Tuple[int, int]]
    q_fit: Optional[PowerLawFit]
    u_fit: Optional[PowerLawFit]

    @property
    def avg_clicks_per_query(self) -> float:
        return self.total_uf / self.num_queries if self.num_queries else 0.0

    @property
    def avg_clicks_per_url(self) -> float:
        return self.total_uf / self.num_urls if self.num_urls else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "M": self.num_queries,
            "N": self.num_urls,
            "edges": self.num_edges,
            "total_uf": self.total_uf,
            "avg_clicks_per_query": self.avg_clicks_per_query,
            "avg_clicks_per_url": self.avg_clicks_per_url,
            "q_of_d_histogram": [list(pair) for pair in self.q_histogram],
            "u_of_d_histogram": [list(pair) for pair in self.u_histogram],
            "q_of_d_fit": self.q_fit.to_dict() if self.q_fit else None,
            "u_of_d_fit": self.u_fit.to_dict() if self.u_fit else None,
        }


def _try_fit(hist: List[Tuple[int, int]], label: str) -> Optional[PowerLawFit]:
    try:
        return fit_power_law(hist)
    except DegenerateFitError as exc:
        logger.warning("No power-law fit for %s: %s", label, exc)
        return None


def summarize_graph(graph: BipartiteClickGraph) -> GraphStats:
    if graph.num_urls == 0:
        return GraphStats(graph.num_queries, 0, 0, 0, [], [], None, None)
    profile = graph.degree_profile
    q_hist = degree_histogram(profile.q_of_d)
    u_hist = degree_histogram(profile.u_of_d)
    return GraphStats(
        num_queries=graph.num_queries,
        num_urls=graph.num_urls,
        num_edges=graph.num_edges,
        total_uf=graph.total_uf,
        q_histogram=q_hist,
        u_histogram=u_hist,
        q_fit=_try_fit(q_hist, "q(d)"),
        u_fit=_try_fit(u_hist, "u(d)"),
    )


def lookup_query(graph: BipartiteClickGraph, query: str | int) -> int:
    """Resolve a query string (or an already numeric id) to its id."""
    if isinstance(query, (int, np.integer)):
        if not 0 <= int(query) < graph.num_queries:
            raise UnknownQueryError(f"Query id {query} out of range [0, {graph.num_queries}).")
        return int(query)
    return graph.queries.id_of(query)

