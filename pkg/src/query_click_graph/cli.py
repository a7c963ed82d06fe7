"""Command line interface for query_click_graph."""

from __future__ import annotations

import io
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import click

from . import __version__, fixtures, graph_io, resources
from .click_graph import BipartiteClickGraph, build_graph, fit_power_law, summarize_graph
from .errors import ClickGraphError
from .evaluation import EvalSettings, load_catalog, run_evaluation, run_ppr_step_sweep
from .log_ingest import DEFAULT_MIN_USER_CLICKS, CleaningConfig, ingest_files, load_stopwords
from .similarity import Method, PprParams, normalize, personalized_pagerank, top_k_similar
from .weighting import WeightedGraph, WeightingCache, WeightModel, consistency_report

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

logger = logging.getLogger(__name__)

MODEL_NAMES = [model.value for model in WeightModel]
METHOD_NAMES = [method.value for method in Method]
FIXTURE_KINDS = ["toy", "mini", "mini-catalog", "random", "log", "powerlaw"]


class CommandError(click.ClickException):
    """ClickException that keeps the exit code of the library error behind it."""

    def __init__(self, message: str, exit_code: int = 1) -> None:
        super().__init__(message)
        self.exit_code = exit_code


class _PipelineGroup(click.Group):
    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except ClickGraphError as exc:
            raise CommandError(str(exc), exit_code=exc.exit_code) from exc


@dataclass(frozen=True)
class RunConfig:
    threads: int
    output_format: str
    seed: int
    verbose: bool


def _setup_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)


def _version_callback(ctx: click.Context, param: click.Option, value: bool) -> None:
    if not value or ctx.resilient_parsing:
        return
    click.echo(f"query_click_graph {__version__}")
    ctx.exit()


def _emit(text: str, out_path: Optional[Path]) -> None:
    if out_path is None:
        click.echo(text, nl=False)
        return
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(text, encoding="utf-8")
    logger.info("Wrote %s", out_path)


def _to_json(payload: Any) -> str:
    return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"


def _cleaning_config(stopwords: Optional[Path], no_stopwords: bool, min_user_clicks: int) -> CleaningConfig:
    if stopwords is not None and no_stopwords:
        raise click.UsageError("--stopwords and --no-stopwords are mutually exclusive.")
    words = load_stopwords(stopwords, use_default=not no_stopwords)
    return CleaningConfig(stopwords=words, min_user_clicks_per_query=min_user_clicks)


def _weighting(graph: BipartiteClickGraph, q_total: Optional[int], u_total: Optional[int]) -> WeightingCache:
    return WeightingCache(graph, q_total=q_total, u_total=u_total)


GRAPH_ARGUMENT = click.argument("graph_path", metavar="GRAPH", type=click.Path(exists=True, path_type=Path))
OUT_OPTION = click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Write output here instead of stdout.")
Q_TOTAL_OPTION = click.option("--q-total", type=click.IntRange(min=1), default=None, help="|Q| used by IQF (default: number of queries).")
U_TOTAL_OPTION = click.option("--u-total", type=click.IntRange(min=1), default=None, help="|U| used by IUF (default: number of URLs).")
STOPWORDS_OPTION = click.option("--stopwords", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="Stop-word file, one word per line.")
NO_STOPWORDS_OPTION = click.option("--no-stopwords", is_flag=True, help="Disable stop-word removal.")


@click.group(
    cls=_PipelineGroup,
    context_settings={"help_option_names": ["-h", "--help"]},
    help="Build, weight and query bipartite query-URL click graphs from search logs.",
)
@click.option(
    "--version",
    "show_version",
    is_flag=True,
    callback=_version_callback,
    expose_value=False,
    is_eager=True,
    help="Show the query_click_graph version and exit.",
)
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker threads (default: available CPUs).")
@click.option("--format", "output_format", type=click.Choice(["tsv", "json"]), default="tsv", show_default=True, help="Output format for result commands.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for sampling and fixture generation.")
@click.option("--verbose", is_flag=True, help="Enable verbose logging.")
@click.pass_context
def main(ctx: click.Context, threads: Optional[int], output_format: str, seed: int, verbose: bool) -> None:
    _setup_logging(verbose)
    ctx.obj = RunConfig(threads=threads or os.cpu_count() or 1, output_format=output_format, seed=seed, verbose=verbose)


@main.command(help="Parse AOL-format logs into a deduplicated query/url/uf edge file.")
@click.argument("logs", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Edge TSV to write.")
@click.option("--stats", "stats_path", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Write ingest statistics JSON here (default: stdout).")
@click.option("--snapshot", "snapshot_dir", type=click.Path(file_okay=False, path_type=Path), default=None, help="Also save a graph snapshot directory.")
@STOPWORDS_OPTION
@NO_STOPWORDS_OPTION
@click.option("--min-user-clicks", type=click.IntRange(min=1), default=DEFAULT_MIN_USER_CLICKS, show_default=True, help="Drop queries whose summed user frequency is below this.")
@click.pass_obj
def ingest(
    run: RunConfig,
    logs: Tuple[Path, ...],
    out_path: Path,
    stats_path: Optional[Path],
    snapshot_dir: Optional[Path],
    stopwords: Optional[Path],
    no_stopwords: bool,
    min_user_clicks: int,
) -> None:
    config = _cleaning_config(stopwords, no_stopwords, min_user_clicks)
    show_progress = click.get_text_stream("stderr").isatty()
    triples, stats = ingest_files(list(logs), config, workers=run.threads, show_progress=show_progress)
    graph_io.write_edges(triples, out_path)
    if snapshot_dir is not None:
        graph_io.save_snapshot(build_graph(triples), snapshot_dir)
    payload = stats.to_dict()
    if stats_path is not None:
        graph_io.write_json(payload, stats_path)
    else:
        click.echo(_to_json(payload), nl=False)


@main.command(help="Report graph size, degree histograms and power-law fits as JSON.")
@GRAPH_ARGUMENT
@OUT_OPTION
@click.option("--q-hist", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Also write the q(d) histogram TSV.")
@click.option("--u-hist", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Also write the u(d) histogram TSV.")
def stats(graph_path: Path, out_path: Optional[Path], q_hist: Optional[Path], u_hist: Optional[Path]) -> None:
    summary = summarize_graph(graph_io.load_graph(graph_path))
    if q_hist is not None:
        graph_io.write_histogram(summary.q_histogram, q_hist)
    if u_hist is not None:
        graph_io.write_histogram(summary.u_histogram, u_hist)
    _emit(_to_json(summary.to_dict()), out_path)


@main.command(help="Compute edge values under one query model and write them as TSV.")
@GRAPH_ARGUMENT
@click.option("--model", type=click.Choice(MODEL_NAMES), required=True, help="Query model.")
@Q_TOTAL_OPTION
@U_TOTAL_OPTION
@OUT_OPTION
@click.option("--report", is_flag=True, help="Print the global-consistency report to stderr.")
def weight(
    graph_path: Path,
    model: str,
    q_total: Optional[int],
    u_total: Optional[int],
    out_path: Optional[Path],
    report: bool,
) -> None:
    weighted = _weighting(graph_io.load_graph(graph_path), q_total, u_total).get(model)
    if out_path is not None:
        graph_io.write_weighted(weighted, out_path)
    else:
        buffer = io.StringIO()
        graph_io.format_weighted(weighted, buffer)
        _emit(buffer.getvalue(), None)
    if report:
        summary = consistency_report(weighted)
        click.echo(_to_json(summary.to_dict()), err=True, nl=False)


def _similar_text(run: RunConfig, payload: Dict[str, Any]) -> str:
    if run.output_format == "json":
        return _to_json(payload)
    lines = [f"{entry['rank']}\t{entry['query']}\t{entry['score']:.6g}" for entry in payload["results"]]
    return "".join(line + "\n" for line in lines)


@main.command(help="List the k queries most similar to --query.")
@GRAPH_ARGUMENT
@click.option("--query", required=True, help="Source query (as stored in the graph).")
@click.option("--method", type=click.Choice(METHOD_NAMES), default="cosine", show_default=True)
@click.option("--model", type=click.Choice(MODEL_NAMES), default=WeightModel.UFW_IQF.value, show_default=True)
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--alpha", type=float, default=0.5, show_default=True, help="PPR jumping constant.")
@click.option("--steps", type=click.IntRange(min=0), default=1, show_default=True, help="PPR iterations.")
@click.option("--binary-jaccard", is_flag=True, help="Compare URL supports instead of weighted rows.")
@Q_TOTAL_OPTION
@U_TOTAL_OPTION
@OUT_OPTION
@click.pass_obj
def similar(
    run: RunConfig,
    graph_path: Path,
    query: str,
    method: str,
    model: str,
    k: int,
    alpha: float,
    steps: int,
    binary_jaccard: bool,
    q_total: Optional[int],
    u_total: Optional[int],
    out_path: Optional[Path],
) -> None:
    weighted = _weighting(graph_io.load_graph(graph_path), q_total, u_total).get(model)
    t = normalize(weighted)
    ppr_params = PprParams(alpha, steps, 0) if method == Method.PPR.value else None
    result = top_k_similar(t, query, method, k, ppr_params=ppr_params, binary_jaccard=binary_jaccard)
    _emit(_similar_text(run, result.to_dict(t)), out_path)


@main.command(help="Print the personalized PageRank vector seeded at --query.")
@GRAPH_ARGUMENT
@click.option("--query", required=True, help="Source query (as stored in the graph).")
@click.option("--alpha", type=float, default=0.5, show_default=True)
@click.option("--steps", type=click.IntRange(min=0), default=1, show_default=True)
@click.option("--model", type=click.Choice(MODEL_NAMES), default=WeightModel.UFW_IQF.value, show_default=True)
@Q_TOTAL_OPTION
@U_TOTAL_OPTION
@OUT_OPTION
@click.pass_obj
def ppr(
    run: RunConfig,
    graph_path: Path,
    query: str,
    alpha: float,
    steps: int,
    model: str,
    q_total: Optional[int],
    u_total: Optional[int],
    out_path: Optional[Path],
) -> None:
    graph = graph_io.load_graph(graph_path)
    t = normalize(_weighting(graph, q_total, u_total).get(model))
    source = graph.queries.id_of(query)
    scores = personalized_pagerank(t, PprParams(alpha, steps, source))
    nonzero = [(graph.queries.name_of(idx), float(scores[idx])) for idx in range(graph.num_queries) if scores[idx] != 0.0]
    if run.output_format == "json":
        payload = {"source": query, "alpha": alpha, "steps": steps, "scores": dict(nonzero)}
        _emit(_to_json(payload), out_path)
    else:
        _emit("".join(f"{name}\t{score:.12g}\n" for name, score in nonzero), out_path)


def _weighted_graphs(
    graph_path: Path,
    models: Sequence[str],
    q_total: Optional[int],
    u_total: Optional[int],
) -> List[WeightedGraph]:
    cache = _weighting(graph_io.load_graph(graph_path), q_total, u_total)
    return [cache.get(model) for model in (models or MODEL_NAMES)]


@main.command(name="eval", help="Sample queries and report P@n and L@n per model and method.")
@GRAPH_ARGUMENT
@click.option("--catalog", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True, help="Category catalog TSV.")
@click.option("--model", "models", type=click.Choice(MODEL_NAMES), multiple=True, help="Models to compare (default: all).")
@click.option("--method", "methods", type=click.Choice(METHOD_NAMES), multiple=True, help="Methods to compare (default: all).")
@click.option("--sample-size", type=click.IntRange(min=1), default=500, show_default=True)
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--alpha", type=float, default=0.5, show_default=True)
@click.option("--steps", type=click.IntRange(min=0), default=1, show_default=True)
@click.option("--binary-jaccard", is_flag=True)
@click.option("--all-queries", is_flag=True, help="Sample from every graph query; uncatalogued ones are skipped and counted.")
@STOPWORDS_OPTION
@NO_STOPWORDS_OPTION
@Q_TOTAL_OPTION
@U_TOTAL_OPTION
@OUT_OPTION
@click.pass_obj
def evaluate(
    run: RunConfig,
    graph_path: Path,
    catalog: Path,
    models: Tuple[str, ...],
    methods: Tuple[str, ...],
    sample_size: int,
    k: int,
    alpha: float,
    steps: int,
    binary_jaccard: bool,
    all_queries: bool,
    stopwords: Optional[Path],
    no_stopwords: bool,
    q_total: Optional[int],
    u_total: Optional[int],
    out_path: Optional[Path],
) -> None:
    config = _cleaning_config(stopwords, no_stopwords, DEFAULT_MIN_USER_CLICKS)
    settings = EvalSettings(
        sample_size=sample_size,
        k=k,
        seed=run.seed,
        alpha=alpha,
        steps=steps,
        binary_jaccard=binary_jaccard,
        restrict_to_catalog=not all_queries,
        workers=run.threads,
    )
    graphs = _weighted_graphs(graph_path, models, q_total, u_total)
    report = run_evaluation(graphs, methods or METHOD_NAMES, load_catalog(catalog, config), settings)
    text = _to_json(report.to_dict()) if run.output_format == "json" else report.render_table()
    _emit(text, out_path)


@main.command(name="ppr-sweep", help="Track PPR P@k and L@k over walk lengths 1..--max-steps.")
@GRAPH_ARGUMENT
@click.option("--catalog", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True, help="Category catalog TSV.")
@click.option("--model", "models", type=click.Choice(MODEL_NAMES), multiple=True, help="Models to compare (default: all).")
@click.option("--alpha", "alphas", type=float, multiple=True, help="Jumping constants (default: 0.5 and 0.1).")
@click.option("--max-steps", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--sample-size", type=click.IntRange(min=1), default=500, show_default=True)
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True)
@STOPWORDS_OPTION
@NO_STOPWORDS_OPTION
@Q_TOTAL_OPTION
@U_TOTAL_OPTION
@OUT_OPTION
@click.pass_obj
def ppr_sweep(
    run: RunConfig,
    graph_path: Path,
    catalog: Path,
    models: Tuple[str, ...],
    alphas: Tuple[float, ...],
    max_steps: int,
    sample_size: int,
    k: int,
    stopwords: Optional[Path],
    no_stopwords: bool,
    q_total: Optional[int],
    u_total: Optional[int],
    out_path: Optional[Path],
) -> None:
    config = _cleaning_config(stopwords, no_stopwords, DEFAULT_MIN_USER_CLICKS)
    settings = EvalSettings(sample_size=sample_size, k=k, seed=run.seed, workers=run.threads)
    graphs = _weighted_graphs(graph_path, models, q_total, u_total)
    report = run_ppr_step_sweep(graphs, load_catalog(catalog, config), alphas or (0.5, 0.1), max_steps, settings)
    text = _to_json(report.to_dict()) if run.output_format == "json" else report.render_table()
    _emit(text, out_path)


@main.command(name="fit-powerlaw", help="Fit y = A * x^-B to a histogram TSV by log-log least squares.")
@click.argument("histogram", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@OUT_OPTION
@click.pass_obj
def fit_powerlaw(run: RunConfig, histogram: Path, out_path: Optional[Path]) -> None:
    fit = fit_power_law(graph_io.read_histogram(histogram))
    if run.output_format == "json":
        _emit(_to_json(fit.to_dict()), out_path)
    else:
        _emit("".join(f"{key}\t{value:.12g}\n" for key, value in fit.to_dict().items()), out_path)


@main.command(name="gen-fixture", help="Write a deterministic fixture file (edges, catalog, log or histogram).")
@click.argument("kind", type=click.Choice(FIXTURE_KINDS))
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--lines", type=click.IntRange(min=0), default=1000, show_default=True, help="Line count for the synthetic log.")
@click.option("--max-queries", type=click.IntRange(min=1), default=50, show_default=True)
@click.option("--max-urls", type=click.IntRange(min=1), default=50, show_default=True)
@click.option("--amplitude", type=float, default=31395.0, show_default=True)
@click.option("--exponent", type=float, default=1.45, show_default=True)
@click.option("--noise", type=click.FloatRange(min=0.0), default=0.0, show_default=True, help="Log-normal sigma for power-law noise.")
@click.pass_obj
def gen_fixture(
    run: RunConfig,
    kind: str,
    out_path: Path,
    lines: int,
    max_queries: int,
    max_urls: int,
    amplitude: float,
    exponent: float,
    noise: float,
) -> None:
    if kind == "toy":
        graph_io.write_edges(list(fixtures.TOY_TRIPLES), out_path)
    elif kind == "mini":
        graph_io.write_edges(fixtures.mini_triples(), out_path)
    elif kind == "mini-catalog":
        _emit("\n".join(resources.read_lines(resources.MINI_CATALOG_FILE)) + "\n", out_path)
    elif kind == "random":
        triples = fixtures.random_triples(run.seed, max_queries=max_queries, max_urls=max_urls)
        graph_io.write_edges(triples, out_path)
    elif kind == "log":
        out_path.parent.mkdir(parents=True, exist_ok=True)
        expected = fixtures.write_synthetic_log(out_path, lines, seed=run.seed)
        click.echo(_to_json(expected.to_dict()), nl=False)
    else:
        hist = fixtures.power_law_histogram(amplitude, exponent, noise=noise, seed=run.seed)
        graph_io.write_histogram(hist, out_path)
