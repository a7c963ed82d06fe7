"""Directory-path relevance, P@n / L@n and the sampled evaluation harness."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, EmptySampleError, MissingCategoryError
from .log_ingest import CleaningConfig
from .similarity import Method, PprParams, TransitionMatrices, normalize, top_k_similar
from .text_utils import token_count
from .weighting import WeightedGraph

logger = logging.getLogger(__name__)

DEFAULT_MAX_PATHS = 5
SEGMENT_SEPARATOR = ">"
PATH_SEPARATOR = "|"


@dataclass(frozen=True)
class CategoryPath:
    segments: Tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("A category path needs at least one segment.")

    @classmethod
    def parse(cls, text: str, separator: str = SEGMENT_SEPARATOR) -> "CategoryPath":
        return cls(tuple(part.strip() for part in text.split(separator) if part.strip()))

    @property
    def keys(self) -> Tuple[str, ...]:
        return tuple(segment.strip().casefold() for segment in self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    def __str__(self) -> str:
        return f" {SEGMENT_SEPARATOR} ".join(self.segments)


def path_similarity(a: CategoryPath, b: CategoryPath) -> float:
    """Longest run of segments shared by both paths over the longer path's length.

    The run may start anywhere, so ``Regional > Caribbean > Haiti > X`` and
    ``Society > History > By-Region > Caribbean > Haiti`` share ``Caribbean > Haiti``.
    """
    left, right = a.keys, b.keys
    longest = 0
    previous = [0] * (len(right) + 1)
    for i in range(1, len(left) + 1):
        current = [0] * (len(right) + 1)
        for j in range(1, len(right) + 1):
            if left[i - 1] == right[j - 1]:
                current[j] = previous[j - 1] + 1
                longest = max(longest, current[j])
        previous = current
    return longest / max(len(a), len(b))


@dataclass
class CategoryCatalog:
    """Query string -> up to ``max_paths`` directory paths."""

    entries: Dict[str, Tuple[CategoryPath, ...]] = field(default_factory=dict)
    max_paths: int = DEFAULT_MAX_PATHS

    def __contains__(self, query: object) -> bool:
        return query in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def paths(self, query: str) -> Tuple[CategoryPath, ...]:
        try:
            return self.entries[query]
        except KeyError as exc:
            raise MissingCategoryError(f"No category entry for query {query!r}.") from exc

    def add(self, query: str, paths: Iterable[CategoryPath]) -> None:
        merged = list(self.entries.get(query, ()))
        for path in paths:
            if len(merged) >= self.max_paths:
                break
            if path not in merged:
                merged.append(path)
        if merged:
            self.entries[query] = tuple(merged)


def parse_catalog(
    lines: Iterable[str],
    config: Optional[CleaningConfig] = None,
    max_paths: int = DEFAULT_MAX_PATHS,
) -> CategoryCatalog:
    """Read ``query \\t path1 | path2`` lines; queries are normalized like the log."""
    config = config or CleaningConfig()
    catalog = CategoryCatalog(max_paths=max_paths)
    for line_no, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        query_text, sep, path_text = line.partition("\t")
        query = config.normalize(query_text)
        if not sep or not query:
            logger.debug("Catalog line %d skipped: %r", line_no, line)
            continue
        paths = [CategoryPath.parse(chunk) for chunk in path_text.split(PATH_SEPARATOR) if chunk.strip()]
        catalog.add(query, paths)
    logger.info("Loaded category catalog with %d queries.", len(catalog))
    return catalog


def load_catalog(path: Path, config: Optional[CleaningConfig] = None, max_paths: int = DEFAULT_MAX_PATHS) -> CategoryCatalog:
    if not path.is_file():
        raise ConfigError(f"Catalog file not found: {path}")
    return parse_catalog(path.read_text(encoding="utf-8").splitlines(), config, max_paths)


def query_pair_similarity(catalog: CategoryCatalog, q: str, r: str) -> float:
    """Best path similarity over all pairs of the two queries' paths."""
    left = catalog.paths(q)
    right = catalog.paths(r)
    return max(path_similarity(a, b) for a in left for b in right)


def precision_at_n(catalog: CategoryCatalog, q: str, results: Sequence[str], n: int) -> float:
    """Mean relevance of the top-n results; missing results and uncatalogued ones count 0."""
    if n < 1:
        raise ValueError("n must be at least 1.")
    total = 0.0
    for result in results[:n]:
        if result in catalog:
            total += query_pair_similarity(catalog, q, result)
    return total / n


def length_at_n(results: Sequence[str], n: int) -> float:
    """Mean token count of the top-n results, averaged over the results present."""
    if n < 1:
        raise ValueError("n must be at least 1.")
    top = results[:n]
    if not top:
        return 0.0
    return sum(token_count(result) for result in top) / len(top)


@dataclass
class _QueryScores:
    """Per-query contribution; merged in sample order so totals are reproducible."""

    precision: np.ndarray
    length: float
    has_results: bool


@dataclass
class ReportRow:
    model: str
    method: str
    precision: List[float]
    length: float
    evaluated: int
    empty_results: int

    def p_at(self, n: int) -> float:
        return self.precision[n - 1]

    def to_dict(self) -> Dict[str, object]:
        payload: Dict[str, object] = {"model": self.model, "method": self.method}
        payload.update({f"P@{n}": value for n, value in enumerate(self.precision, start=1)})
        payload[f"L@{len(self.precision)}"] = self.length
        payload["evaluated"] = self.evaluated
        payload["empty_results"] = self.empty_results
        return payload


@dataclass
class EvalReport:
    seed: int
    k: int
    sample_size: int
    sampled: int
    skipped: int
    rows: List[ReportRow] = field(default_factory=list)
    ppr: Optional[Dict[str, float]] = None

    @property
    def evaluated(self) -> int:
        return self.sampled - self.skipped

    def row(self, model: str, method: str) -> ReportRow:
        for row in self.rows:
            if row.model == model and row.method == method:
                return row
        raise KeyError((model, method))

    def to_dict(self) -> Dict[str, object]:
        return {
            "seed": self.seed,
            "k": self.k,
            "sample_size": self.sample_size,
            "sampled": self.sampled,
            "evaluated": self.evaluated,
            "skipped": self.skipped,
            "ppr": self.ppr,
            "rows": [row.to_dict() for row in self.rows],
        }

    def render_table(self) -> str:
        """Fixed-width table: one block per method, models as columns."""
        models = list(dict.fromkeys(row.model for row in self.rows))
        methods = list(dict.fromkeys(row.method for row in self.rows))
        width = max([10] + [len(model) + 2 for model in models])
        lines = [
            f"# seed={self.seed} sampled={self.sampled} evaluated={self.evaluated} skipped={self.skipped}",
            f"{'method':<10}{'metric':<8}" + "".join(f"{model:>{width}}" for model in models),
        ]
        for method in methods:
            for metric in ("P@1", f"P@{self.k}", f"L@{self.k}"):
                cells = []
                for model in models:
                    row = self.row(model, method)
                    value = row.length if metric.startswith("L") else row.p_at(int(metric[2:]))
                    cells.append(f"{value:>{width}.4f}")
                lines.append(f"{method:<10}{metric:<8}" + "".join(cells))
        return "\n".join(lines) + "\n"


def draw_sample(
    base_queries: Sequence[str],
    catalog: CategoryCatalog,
    sample_size: int,
    seed: int,
    restrict_to_catalog: bool = True,
) -> List[str]:
    """Seeded sample of query strings, in the order they were drawn."""
    pool = [query for query in base_queries if query in catalog] if restrict_to_catalog else list(base_queries)
    if not pool:
        return []
    rng = np.random.default_rng(seed)
    size = min(sample_size, len(pool))
    picks = rng.choice(len(pool), size=size, replace=False)
    return [pool[int(index)] for index in picks]


def _score_query(
    t: TransitionMatrices,
    catalog: CategoryCatalog,
    query: str,
    method: Method,
    k: int,
    ppr_params: Optional[PprParams],
    binary_jaccard: bool,
) -> _QueryScores:
    result = top_k_similar(t, query, method, k, ppr_params=ppr_params, binary_jaccard=binary_jaccard)
    names = [name for name, _ in result.named(t)]
    precision = np.array([precision_at_n(catalog, query, names, n) for n in range(1, k + 1)])
    return _QueryScores(precision=precision, length=length_at_n(names, k), has_results=bool(names))


def _evaluate_cell(
    t: TransitionMatrices,
    catalog: CategoryCatalog,
    queries: Sequence[str],
    method: Method,
    k: int,
    ppr_params: Optional[PprParams],
    binary_jaccard: bool,
    workers: int,
) -> ReportRow:
    def task(query: str) -> _QueryScores:
        return _score_query(t, catalog, query, method, k, ppr_params, binary_jaccard)

    if workers > 1 and len(queries) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(task, queries))
    else:
        parts = [task(query) for query in queries]

    precision_sum = np.zeros(k)
    length_sum = 0.0
    with_results = 0
    for part in parts:
        precision_sum += part.precision
        if part.has_results:
            length_sum += part.length
            with_results += 1
    count = len(parts)
    return ReportRow(
        model=t.weighted.model.label,
        method=method.value,
        precision=(precision_sum / count).tolist() if count else [0.0] * k,
        length=length_sum / with_results if with_results else 0.0,
        evaluated=count,
        empty_results=count - with_results,
    )


@dataclass(frozen=True)
class EvalSettings:
    sample_size: int = 500
    k: int = 10
    seed: int = 0
    alpha: float = 0.5
    steps: int = 1
    binary_jaccard: bool = False
    restrict_to_catalog: bool = True
    workers: int = 1

    def __post_init__(self) -> None:
        if self.sample_size < 1:
            raise ConfigError("sample_size must be at least 1.")
        if self.k < 1:
            raise ConfigError("k must be at least 1.")


def _check_shared_base(graphs: Sequence[WeightedGraph]) -> None:
    if not graphs:
        raise ConfigError("At least one weighted graph is required.")
    base = graphs[0].base
    if any(graph.base is not base for graph in graphs[1:]):
        raise ConfigError("All weighted graphs must share the same base graph.")


def run_evaluation(
    graphs: Sequence[WeightedGraph],
    methods: Sequence[Method | str],
    catalog: CategoryCatalog,
    settings: EvalSettings = EvalSettings(),
) -> EvalReport:
    """Evaluate every model x method on one shared seeded query sample."""
    _check_shared_base(graphs)
    base = graphs[0].base
    sample = draw_sample(base.queries.names, catalog, settings.sample_size, settings.seed, settings.restrict_to_catalog)
    evaluated = [query for query in sample if query in catalog]
    skipped = len(sample) - len(evaluated)
    if not evaluated:
        raise EmptySampleError("No sampled query has a category entry.")
    logger.info("Evaluating %d sampled queries (%d skipped, seed=%d).", len(evaluated), skipped, settings.seed)

    methods = [Method(method) for method in methods]
    report = EvalReport(
        seed=settings.seed,
        k=settings.k,
        sample_size=settings.sample_size,
        sampled=len(sample),
        skipped=skipped,
    )
    if Method.PPR in methods:
        report.ppr = {"alpha": settings.alpha, "steps": settings.steps}
    for graph in graphs:
        t = normalize(graph)
        for method in methods:
            ppr_params = PprParams(settings.alpha, settings.steps, 0) if method is Method.PPR else None
            row = _evaluate_cell(
                t, catalog, evaluated, method, settings.k, ppr_params, settings.binary_jaccard, settings.workers
            )
            logger.info("%s / %s: P@1=%.4f P@%d=%.4f", row.model, row.method, row.p_at(1), settings.k, row.p_at(settings.k))
            report.rows.append(row)
    return report


@dataclass
class StepSweepReport:
    """P@k and L@k of personalized PageRank per model, jumping constant and step."""

    seed: int
    k: int
    evaluated: int
    steps: List[int]
    precision: Dict[Tuple[str, float], List[float]] = field(default_factory=dict)
    length: Dict[Tuple[str, float], List[float]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return {
            "seed": self.seed,
            "k": self.k,
            "evaluated": self.evaluated,
            "steps": self.steps,
            "curves": [
                {"model": model, "alpha": alpha, f"P@{self.k}": self.precision[(model, alpha)], f"L@{self.k}": self.length[(model, alpha)]}
                for model, alpha in self.precision
            ],
        }

    def render_table(self) -> str:
        header = f"{'model':<10}{'alpha':>7}{'metric':>8}" + "".join(f"{f'step {s}':>10}" for s in self.steps)
        lines = [f"# seed={self.seed} evaluated={self.evaluated}", header]
        for (model, alpha), curve in self.precision.items():
            lines.append(f"{model:<10}{alpha:>7.2f}{f'P@{self.k}':>8}" + "".join(f"{v:>10.4f}" for v in curve))
            lengths = self.length[(model, alpha)]
            lines.append(f"{model:<10}{alpha:>7.2f}{f'L@{self.k}':>8}" + "".join(f"{v:>10.4f}" for v in lengths))
        return "\n".join(lines) + "\n"


def run_ppr_step_sweep(
    graphs: Sequence[WeightedGraph],
    catalog: CategoryCatalog,
    alphas: Sequence[float] = (0.5, 0.1),
    max_steps: int = 5,
    settings: EvalSettings = EvalSettings(),
) -> StepSweepReport:
    """Track how PPR precision and result length move as the walk gets longer."""
    _check_shared_base(graphs)
    if max_steps < 1:
        raise ConfigError("max_steps must be at least 1.")
    base = graphs[0].base
    sample = draw_sample(base.queries.names, catalog, settings.sample_size, settings.seed, True)
    if not sample:
        raise EmptySampleError("No sampled query has a category entry.")

    steps = list(range(1, max_steps + 1))
    report = StepSweepReport(seed=settings.seed, k=settings.k, evaluated=len(sample), steps=steps)
    for graph in graphs:
        t = normalize(graph)
        for alpha in alphas:
            precision_curve: List[float] = []
            length_curve: List[float] = []
            for step in steps:
                row = _evaluate_cell(
                    t,
                    catalog,
                    sample,
                    Method.PPR,
                    settings.k,
                    PprParams(alpha, step, 0),
                    False,
                    settings.workers,
                )
                precision_curve.append(row.p_at(settings.k))
                length_curve.append(row.length)
            report.precision[(graph.model.label, float(alpha))] = precision_curve
            report.length[(graph.model.label, float(alpha))] = length_curve
    return report
