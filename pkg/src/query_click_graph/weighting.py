"""Per-URL global weights (IQF, IUF) and edge values under the four query models."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional

import numpy as np
from scipy import sparse

from .click_graph import BipartiteClickGraph, UrlDegreeProfile
from .errors import InvalidWeightSchemeError

logger = logging.getLogger(__name__)


class GlobalWeightKind(str, Enum):
    IQF = "iqf"
    IUF = "iuf"


class WeightModel(str, Enum):
    UF = "uf"
    UF_IQF = "uf-iqf"
    UFW_IQF = "ufw-iqf"
    UFW_IUF = "ufw-iuf"

    @property
    def global_kind(self) -> Optional[GlobalWeightKind]:
        if self is WeightModel.UF:
            return None
        if self is WeightModel.UFW_IUF:
            return GlobalWeightKind.IUF
        return GlobalWeightKind.IQF

    @property
    def label(self) -> str:
        return self.value.upper()


def iqf(profile: UrlDegreeProfile, q_total: int) -> np.ndarray:
    """g(d_j) = ln(|Q| / q(d_j))."""
    return np.log(q_total / profile.q_of_d.astype(np.float64))


def iuf(profile: UrlDegreeProfile, u_total: int) -> np.ndarray:
    """g(d_j) = ln(|U| / u(d_j))."""
    return np.log(u_total / profile.u_of_d.astype(np.float64))


@dataclass(frozen=True)
class GlobalWeightScheme:
    kind: GlobalWeightKind
    q_total: int
    u_total: int

    def validate(self, profile: UrlDegreeProfile) -> None:
        if self.q_total < 1 or self.u_total < 1:
            raise InvalidWeightSchemeError("Q_total and U_total must be at least 1.")
        if profile.q_of_d.size and self.q_total < int(profile.q_of_d.max()):
            raise InvalidWeightSchemeError(
                f"Q_total={self.q_total} is below the largest q(d)={int(profile.q_of_d.max())}."
            )
        if profile.u_of_d.size and self.u_total < int(profile.u_of_d.max()):
            raise InvalidWeightSchemeError(
                f"U_total={self.u_total} is below the largest u(d)={int(profile.u_of_d.max())}."
            )

    def weights(self, profile: UrlDegreeProfile) -> np.ndarray:
        if self.kind is GlobalWeightKind.IQF:
            return iqf(profile, self.q_total)
        return iuf(profile, self.u_total)


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Edge values v_ij on the exact sparsity pattern of ``base``.

    Zero-valued edges (g(d_j) = 0) stay stored explicitly so the pattern
    matches the base graph entry for entry.
    """

    base: BipartiteClickGraph
    model: WeightModel
    values: sparse.csr_matrix
    global_weights: Optional[np.ndarray]
    q_total: int
    u_total: int

    @property
    def num_queries(self) -> int:
        return self.base.num_queries

    @property
    def num_urls(self) -> int:
        return self.base.num_urls

    def value(self, query_id: int, url_id: int) -> float:
        start, end = self.values.indptr[query_id], self.values.indptr[query_id + 1]
        cols = self.values.indices[start:end]
        pos = np.searchsorted(cols, url_id)
        if pos < len(cols) and cols[pos] == url_id:
            return float(self.values.data[start + pos])
        return 0.0


def weigh_edges(
    graph: BipartiteClickGraph,
    model: WeightModel | str,
    q_total: Optional[int] = None,
    u_total: Optional[int] = None,
) -> WeightedGraph:
    """Compute v_ij for every edge of ``graph`` under ``model``.

    ``q_total`` / ``u_total`` default to the graph's own M and N; they can be
    inflated to keep every global weight positive.
    """
    model = WeightModel(model)
    q_total = graph.num_queries if q_total is None else int(q_total)
    u_total = graph.num_urls if u_total is None else int(u_total)

    base = graph.by_query
    uf = base.data.astype(np.float64)
    cols = base.indices
    rows = np.repeat(np.arange(graph.num_queries), np.diff(base.indptr))

    global_weights: Optional[np.ndarray] = None
    kind = model.global_kind
    if kind is not None:
        scheme = GlobalWeightScheme(kind, q_total, u_total)
        scheme.validate(graph.degree_profile)
        global_weights = scheme.weights(graph.degree_profile)

    if model is WeightModel.UF:
        data = uf
    elif model is WeightModel.UF_IQF:
        data = uf * global_weights[cols]
    else:
        totals = graph.query_totals[rows]
        data = global_weights[cols] / np.log(math.e + totals / uf)

    values = sparse.csr_matrix(
        (data, cols.copy(), base.indptr.copy()),
        shape=base.shape,
    )
    logger.info(
        "Weighted %d edges with %s (Q_total=%d, U_total=%d).",
        base.nnz,
        model.label,
        q_total,
        u_total,
    )
    return WeightedGraph(
        base=graph,
        model=model,
        values=values,
        global_weights=global_weights,
        q_total=q_total,
        u_total=u_total,
    )


class WeightingCache:
    """Lazily weighs one graph under several models, keeping each result."""

    def __init__(
        self,
        graph: BipartiteClickGraph,
        q_total: Optional[int] = None,
        u_total: Optional[int] = None,
    ) -> None:
        self.graph = graph
        self.q_total = q_total
        self.u_total = u_total
        self._cache: Dict[WeightModel, WeightedGraph] = {}

    def get(self, model: WeightModel | str) -> WeightedGraph:
        model = WeightModel(model)
        if model not in self._cache:
            self._cache[model] = weigh_edges(self.graph, model, self.q_total, self.u_total)
        return self._cache[model]


@dataclass(frozen=True)
class ConsistencyReport:
    """Within-query URL pairs ordered by global weight, and how many edges disagree."""

    model: WeightModel
    pairs: int
    violations: int

    @property
    def rate(self) -> float:
        return self.violations / self.pairs if self.pairs else 0.0

    def to_dict(self) -> Dict[str, object]:
        return {"model": self.model.value, "pairs": self.pairs, "violations": self.violations, "rate": self.rate}


def consistency_report(weighted: WeightedGraph) -> ConsistencyReport:
    """Count pairs with g(d_j) > g(d_k) but v_ij <= v_ik inside each query row.

    Models without a global weight of their own are judged against IQF.
    """
    reference = weighted.global_weights
    if reference is None:
        reference = iqf(weighted.base.degree_profile, weighted.q_total)

    values = weighted.values
    pairs = 0
    violations = 0
    for row in range(values.shape[0]):
        start, end = values.indptr[row], values.indptr[row + 1]
        if end - start < 2:
            continue
        g = reference[values.indices[start:end]]
        v = values.data[start:end]
        ordered = g[:, None] > g[None, :]
        pairs += int(ordered.sum())
        violations += int((ordered & (v[:, None] <= v[None, :])).sum())
    return ConsistencyReport(model=weighted.model, pairs=pairs, violations=violations)
