"""Transition matrices and query-to-query similarity on a weighted click graph."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from .click_graph import lookup_query
from .errors import ConfigError, ZeroVectorError
from .weighting import WeightedGraph

logger = logging.getLogger(__name__)


class Method(str, Enum):
    COSINE = "cosine"
    JACCARD = "jaccard"
    PPR = "ppr"


def _scale_rows(matrix: sparse.csr_matrix) -> Tuple[sparse.csr_matrix, np.ndarray]:
    """Divide each row by its sum, keeping the stored pattern; returns the zero-row mask."""
    sums = np.asarray(matrix.sum(axis=1), dtype=np.float64).ravel()
    zero_rows = sums <= 0
    inverse = np.zeros_like(sums)
    np.divide(1.0, sums, out=inverse, where=~zero_rows)
    counts = np.diff(matrix.indptr)
    scaled = sparse.csr_matrix(
        (matrix.data * np.repeat(inverse, counts), matrix.indices.copy(), matrix.indptr.copy()),
        shape=matrix.shape,
    )
    return scaled, zero_rows


@dataclass(frozen=True, eq=False)
class TransitionMatrices:
    """Row-stochastic P_q2d (M x N) and P_d2q (N x M).

    Rows whose edge values sum to zero stay all-zero and are flagged in
    ``zero_query_rows`` / ``zero_url_rows``.
    """

    weighted: WeightedGraph
    p_q2d: sparse.csr_matrix
    p_d2q: sparse.csr_matrix
    zero_query_rows: np.ndarray
    zero_url_rows: np.ndarray

    @property
    def num_queries(self) -> int:
        return self.p_q2d.shape[0]

    @cached_property
    def p_q2q(self) -> sparse.csr_matrix:
        return q2q_step(self)

    @cached_property
    def propagation(self) -> sparse.csr_matrix:
        """P_q2q transposed, so one PPR step is a single sparse mat-vec."""
        return self.p_q2q.T.tocsr()

    @cached_property
    def row_norms(self) -> np.ndarray:
        squared = self.p_q2d.multiply(self.p_q2d).sum(axis=1)
        return np.sqrt(np.asarray(squared, dtype=np.float64).ravel())

    def query_row(self, query_id: int) -> Tuple[np.ndarray, np.ndarray]:
        start, end = self.p_q2d.indptr[query_id], self.p_q2d.indptr[query_id + 1]
        return self.p_q2d.indices[start:end], self.p_q2d.data[start:end]


def normalize(weighted: WeightedGraph) -> TransitionMatrices:
    p_q2d, zero_query_rows = _scale_rows(weighted.values)
    p_d2q, zero_url_rows = _scale_rows(weighted.values.T.tocsr())
    if zero_query_rows.any():
        logger.debug("%d queries have no probability mass under %s.", int(zero_query_rows.sum()), weighted.model.label)
    return TransitionMatrices(
        weighted=weighted,
        p_q2d=p_q2d,
        p_d2q=p_d2q,
        zero_query_rows=zero_query_rows,
        zero_url_rows=zero_url_rows,
    )


def _nonzero_row(t: TransitionMatrices, query_id: int) -> Tuple[np.ndarray, np.ndarray]:
    if t.zero_query_rows[query_id]:
        raise ZeroVectorError(f"Query {query_id} has an all-zero transition row.")
    return t.query_row(query_id)


def _aligned(
    left: Tuple[np.ndarray, np.ndarray],
    right: Tuple[np.ndarray, np.ndarray],
) -> Tuple[np.ndarray, np.ndarray]:
    """Both rows expanded over the union of their supports, ascending by URL id."""
    union = np.union1d(left[0], right[0])
    a = np.zeros(len(union))
    b = np.zeros(len(union))
    a[np.searchsorted(union, left[0])] = left[1]
    b[np.searchsorted(union, right[0])] = right[1]
    return a, b


def cosine_similarity(t: TransitionMatrices, i: int, j: int) -> float:
    a, b = _aligned(_nonzero_row(t, i), _nonzero_row(t, j))
    return float(np.dot(a, b) / (t.row_norms[i] * t.row_norms[j]))


def jaccard_similarity(t: TransitionMatrices, i: int, j: int, binary: bool = False) -> float:
    """Generalized Jaccard: sum of elementwise minima over sum of maxima.

    With ``binary`` the rows are reduced to their supports first.
    """
    a, b = _aligned(_nonzero_row(t, i), _nonzero_row(t, j))
    if binary:
        a = (a > 0).astype(np.float64)
        b = (b > 0).astype(np.float64)
    return float(np.minimum(a, b).sum() / np.maximum(a, b).sum())


def q2q_step(t: TransitionMatrices) -> sparse.csr_matrix:
    """P_q2q = P_q2d . P_d2q, the two-hop query-to-query walk."""
    product = (t.p_q2d @ t.p_d2q).tocsr()
    product.sort_indices()
    return product


@dataclass(frozen=True)
class PprParams:
    alpha: float
    steps: int
    source: int

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie strictly between 0 and 1, got {self.alpha}.")
        if self.steps < 0:
            raise ConfigError(f"steps must be non-negative, got {self.steps}.")


def personalized_pagerank(t: TransitionMatrices, params: PprParams) -> np.ndarray:
    """R^{n+1} = (1 - alpha) R^n + alpha P_q2q^T R^n, starting from the source indicator.

    A source whose transition row is all zero has no outgoing mass to spread
    and raises ``ZeroVectorError``.
    """
    source = lookup_query(t.weighted.base, params.source)
    if t.zero_query_rows[source]:
        name = t.weighted.base.queries.name_of(source)
        raise ZeroVectorError(f"Query {name!r} has an all-zero transition row; PPR is undefined.")
    scores = np.zeros(t.num_queries)
    scores[source] = 1.0
    for _ in range(params.steps):
        scores = (1.0 - params.alpha) * scores + params.alpha * (t.propagation @ scores)
    return scores


@dataclass(frozen=True)
class SimilarityResult:
    source: int
    method: Method
    entries: Tuple[Tuple[int, float], ...]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def query_ids(self) -> List[int]:
        return [query_id for query_id, _ in self.entries]

    def named(self, t: TransitionMatrices) -> List[Tuple[str, float]]:
        names = t.weighted.base.queries
        return [(names.name_of(query_id), score) for query_id, score in self.entries]

    def to_dict(self, t: TransitionMatrices) -> Dict[str, object]:
        return {
            "source": t.weighted.base.queries.name_of(self.source),
            "method": self.method.value,
            "results": [
                {"rank": rank, "query": name, "score": score}
                for rank, (name, score) in enumerate(self.named(t), start=1)
            ],
        }


def _candidates(t: TransitionMatrices, source: int) -> np.ndarray:
    """Queries sharing at least one URL with ``source`` (source excluded)."""
    urls, _ = t.query_row(source)
    if urls.size == 0:
        return np.empty(0, dtype=np.int64)
    neighbours = np.unique(t.p_d2q[urls].indices)
    return neighbours[neighbours != source]


def _cosine_scores(t: TransitionMatrices, source: int, candidates: np.ndarray) -> np.ndarray:
    dots = np.asarray((t.p_q2d[candidates] @ t.p_q2d[source].T).toarray(), dtype=np.float64).ravel()
    norms = t.row_norms[candidates] * t.row_norms[source]
    scores = np.zeros(len(candidates))
    np.divide(dots, norms, out=scores, where=norms > 0)
    return scores


def _jaccard_scores(t: TransitionMatrices, source: int, candidates: np.ndarray, binary: bool) -> np.ndarray:
    rows = t.p_q2d[candidates]
    repeated = t.p_q2d[np.full(len(candidates), source)]
    if binary:
        rows = (rows > 0).astype(np.float64)
        repeated = (repeated > 0).astype(np.float64)
    low = np.asarray(rows.minimum(repeated).sum(axis=1), dtype=np.float64).ravel()
    high = np.asarray(rows.maximum(repeated).sum(axis=1), dtype=np.float64).ravel()
    scores = np.zeros(len(candidates))
    np.divide(low, high, out=scores, where=high > 0)
    return scores


def _rank(source: int, method: Method, ids: np.ndarray, scores: np.ndarray, k: int) -> SimilarityResult:
    keep = scores > 0
    ids, scores = ids[keep], scores[keep]
    order = np.lexsort((ids, -scores))[:k]
    entries = tuple((int(ids[pos]), float(scores[pos])) for pos in order)
    return SimilarityResult(source=source, method=method, entries=entries)


def top_k_similar(
    t: TransitionMatrices,
    source: int | str,
    method: Method | str,
    k: int = 10,
    ppr_params: Optional[PprParams] = None,
    binary_jaccard: bool = False,
) -> SimilarityResult:
    """Top-k queries for ``source``, ties broken by ascending query id.

    Cosine and Jaccard only score queries sharing a URL with the source, and
    zero scores are dropped. PPR ranks every query with positive mass.
    """
    method = Method(method)
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}.")
    source_id = lookup_query(t.weighted.base, source)
    if t.zero_query_rows[source_id]:
        logger.debug("Query %d has no probability mass; returning no results.", source_id)
        return SimilarityResult(source=source_id, method=method, entries=())

    if method is Method.PPR:
        if ppr_params is None:
            raise ConfigError("PPR ranking requires alpha and steps.")
        params = PprParams(alpha=ppr_params.alpha, steps=ppr_params.steps, source=source_id)
        scores = personalized_pagerank(t, params)
        scores[source_id] = 0.0
        return _rank(source_id, method, np.arange(t.num_queries), scores, k)

    candidates = _candidates(t, source_id)
    candidates = candidates[~t.zero_query_rows[candidates]]
    if candidates.size == 0:
        return SimilarityResult(source=source_id, method=method, entries=())
    if method is Method.COSINE:
        scores = _cosine_scores(t, source_id, candidates)
    else:
        scores = _jaccard_scores(t, source_id, candidates, binary_jaccard)
    return _rank(source_id, method, candidates, scores, k)
