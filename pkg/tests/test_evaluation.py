import itertools

import numpy as np
import pytest

from query_click_graph import fixtures
from query_click_graph.click_graph import build_graph
from query_click_graph.errors import ConfigError, EmptySampleError, MissingCategoryError
from query_click_graph.evaluation import (
    CategoryCatalog,
    CategoryPath,
    EvalSettings,
    draw_sample,
    length_at_n,
    load_catalog,
    parse_catalog,
    path_similarity,
    precision_at_n,
    query_pair_similarity,
    run_evaluation,
    run_ppr_step_sweep,
)
from query_click_graph.log_ingest import CleaningConfig
from query_click_graph.similarity import Method
from query_click_graph.weighting import WeightingCache, WeightModel, weigh_edges

HAITI = CategoryPath.parse("Regional > Caribbean > Haiti > Guides-and-Directories")
HAITI_NEWS = CategoryPath.parse("Regional > Caribbean > Haiti > News-and-Media")
HAITI_HISTORY = CategoryPath.parse("Society > History > By-Region > Caribbean > Haiti")

HAND_CATALOG = [
    "haiti\tRegional > Caribbean > Haiti > Guides-and-Directories",
    "haiti news\tRegional > Caribbean > Haiti > News-and-Media",
    "haiti history\tSociety > History > By-Region > Caribbean > Haiti",
    "weather\tScience > Earth-Sciences > Meteorology",
]


def _hand_graph():
    return build_graph(
        [
            ("haiti", "haiti.com", 2),
            ("haiti history", "haiti.com", 1),
            ("haiti news", "haiti.com", 1),
            ("haiti news", "news.com", 1),
            ("weather", "weather.com", 5),
        ]
    )


def test_path_similarity_shared_prefix():
    assert path_similarity(HAITI, HAITI_NEWS) == pytest.approx(3 / 4)
    assert path_similarity(HAITI_NEWS, HAITI) == pytest.approx(3 / 4)


def test_path_similarity_two_of_five():
    # Caribbean > Haiti is shared away from the root of the history path.
    assert path_similarity(HAITI, HAITI_HISTORY) == pytest.approx(2 / 5)
    assert path_similarity(HAITI_HISTORY, HAITI) == pytest.approx(2 / 5)
    assert path_similarity(HAITI_NEWS, HAITI_HISTORY) == pytest.approx(2 / 5)


def test_path_similarity_disjoint_paths():
    weather = CategoryPath.parse("Science > Earth-Sciences > Meteorology")
    assert path_similarity(HAITI, weather) == 0.0


@pytest.mark.parametrize("seed", range(20))
def test_path_similarity_matches_run_oracle(seed):
    rng = np.random.default_rng(seed)
    segments = ["A", "B", "C"]
    a = tuple(rng.choice(segments, size=int(rng.integers(1, 7))))
    b = tuple(rng.choice(segments, size=int(rng.integers(1, 7))))
    runs = {a[i:j] for i in range(len(a)) for j in range(i + 1, len(a) + 1)}
    shared = [
        len(run) for run in runs if any(b[k : k + len(run)] == run for k in range(len(b) - len(run) + 1))
    ]
    expected = max(shared, default=0) / max(len(a), len(b))
    assert path_similarity(CategoryPath(a), CategoryPath(b)) == pytest.approx(expected)


def test_path_similarity_identical_and_case():
    assert path_similarity(HAITI, HAITI) == 1.0
    shouty = CategoryPath.parse("REGIONAL>caribbean> Haiti >guides-and-directories")
    assert path_similarity(HAITI, shouty) == 1.0


def test_category_path_parse_and_render():
    assert HAITI.segments == ("Regional", "Caribbean", "Haiti", "Guides-and-Directories")
    assert len(HAITI_HISTORY) == 5
    assert str(HAITI_NEWS) == "Regional > Caribbean > Haiti > News-and-Media"
    with pytest.raises(ValueError):
        CategoryPath.parse(" > ")


def test_parse_catalog_normalizes_queries_and_caps_paths():
    lines = [
        "# comment",
        "",
        "Haiti, News!\tA > B | A > C",
        "many\t" + " | ".join(f"Top > P{i}" for i in range(8)),
        "no tab here",
    ]
    catalog = parse_catalog(lines)
    assert "haiti news" in catalog
    assert len(catalog) == 2
    assert [str(p) for p in catalog.paths("haiti news")] == ["A > B", "A > C"]
    assert len(catalog.paths("many")) == 5


def test_catalog_add_merges_without_duplicates():
    catalog = CategoryCatalog(max_paths=2)
    catalog.add("q", [HAITI])
    catalog.add("q", [HAITI, HAITI_NEWS, HAITI_HISTORY])
    assert catalog.paths("q") == (HAITI, HAITI_NEWS)


def test_load_catalog_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_catalog(tmp_path / "missing.tsv")


def test_load_catalog_applies_stopwords(tmp_path):
    path = tmp_path / "catalog.tsv"
    path.write_text("The Weather\tScience > Weather\n", encoding="utf-8")
    catalog = load_catalog(path, CleaningConfig(stopwords=frozenset({"the"})))
    assert "weather" in catalog


def test_query_pair_similarity_takes_best_pair():
    catalog = parse_catalog(HAND_CATALOG)
    assert query_pair_similarity(catalog, "haiti", "haiti news") == pytest.approx(0.75)
    assert query_pair_similarity(catalog, "haiti", "weather") == 0.0
    catalog.add("haiti", [HAITI_HISTORY])
    assert query_pair_similarity(catalog, "haiti", "haiti history") == 1.0
    with pytest.raises(MissingCategoryError):
        query_pair_similarity(catalog, "haiti", "hotel deals")


@pytest.mark.parametrize("seed", range(20))
def test_query_pair_similarity_matches_exhaustive_max(seed):
    rng = np.random.default_rng(seed)
    segments = ["A", "B", "C"]

    def random_path():
        return CategoryPath(tuple(rng.choice(segments, size=int(rng.integers(1, 5)))))

    left = [random_path() for _ in range(3)]
    right = [random_path() for _ in range(3)]
    catalog = CategoryCatalog()
    catalog.add("l", left)
    catalog.add("r", right)
    expected = max(path_similarity(a, b) for a, b in itertools.product(catalog.paths("l"), catalog.paths("r")))
    assert query_pair_similarity(catalog, "l", "r") == expected


def test_precision_at_n():
    catalog = CategoryCatalog()
    catalog.add("q", [CategoryPath.parse("A > B > C > D")])
    catalog.add("r1", [CategoryPath.parse("A > B > C > E")])
    catalog.add("r2", [CategoryPath.parse("A > B > X > Y > Z")])
    assert precision_at_n(catalog, "q", ["r1", "r2"], 2) == pytest.approx(0.575)
    assert precision_at_n(catalog, "q", ["r1"], 2) == pytest.approx(0.375)
    assert precision_at_n(catalog, "q", ["unknown", "r1"], 2) == pytest.approx(0.375)
    assert precision_at_n(catalog, "q", [], 3) == 0.0
    assert precision_at_n(catalog, "q", ["q"], 1) == 1.0
    with pytest.raises(ValueError):
        precision_at_n(catalog, "q", ["r1"], 0)


def test_length_at_n():
    assert length_at_n(["haiti news", "metropole haiti news"], 2) == pytest.approx(2.5)
    assert length_at_n(["haiti"], 1) == 1.0
    assert length_at_n(["haiti news", "metropole haiti news", "x"], 1) == 2.0
    assert length_at_n([], 10) == 0.0


def test_length_at_n_matches_token_oracle():
    rng = np.random.default_rng(7)
    words = ["haiti", "news", "port", "au", "prince", "map"]
    results = [" ".join(rng.choice(words, size=int(rng.integers(1, 5)))) for _ in range(10)]
    expected = sum(len(result.split()) for result in results) / 10
    assert length_at_n(results, 10) == pytest.approx(expected)


def test_hand_traced_cosine_evaluation():
    graph = _hand_graph()
    catalog = parse_catalog(HAND_CATALOG)
    report = run_evaluation([weigh_edges(graph, WeightModel.UF)], [Method.COSINE], catalog, EvalSettings(k=2))
    row = report.row("UF", "cosine")
    # haiti -> [haiti history, haiti news]: sims 2/5, 3/4
    # haiti news -> [haiti, haiti history]: sims 3/4, 2/5
    # haiti history -> [haiti, haiti news]: sims 2/5, 2/5
    # weather has no neighbours.
    assert report.sampled == 4 and report.skipped == 0
    assert row.p_at(1) == pytest.approx((0.4 + 0.75 + 0.4) / 4)
    assert row.p_at(2) == pytest.approx((0.575 + 0.575 + 0.4) / 4)
    assert row.length == pytest.approx((2 + 1.5 + 1.5) / 3)
    assert row.empty_results == 1
    assert report.ppr is None


def _mini_cache():
    graph = fixtures.mini_graph()
    return WeightingCache(graph, q_total=graph.num_queries + 1, u_total=graph.num_urls + 1)


def test_mini_evaluation_is_deterministic():
    cache = _mini_cache()
    catalog = fixtures.mini_catalog()
    graphs = [cache.get(model) for model in WeightModel]
    settings = EvalSettings(sample_size=8, k=5, seed=3)
    first = run_evaluation(graphs, list(Method), catalog, settings)
    second = run_evaluation(graphs, list(Method), catalog, settings)
    assert first.to_dict() == second.to_dict()
    assert len(first.rows) == len(WeightModel) * len(Method)
    assert first.ppr == {"alpha": 0.5, "steps": 1}
    for row in first.rows:
        assert all(0.0 <= value <= 1.0 for value in row.precision)
        assert row.length == 0.0 or row.length >= 1.0


def test_same_model_twice_gives_identical_rows():
    cache = _mini_cache()
    graph = cache.get(WeightModel.UFW_IQF)
    report = run_evaluation([graph, graph], [Method.JACCARD], fixtures.mini_catalog(), EvalSettings(k=3))
    assert report.rows[0] == report.rows[1]


def test_threaded_evaluation_matches_serial():
    cache = _mini_cache()
    graphs = [cache.get(WeightModel.UF), cache.get(WeightModel.UFW_IUF)]
    catalog = fixtures.mini_catalog()
    serial = run_evaluation(graphs, ["cosine", "ppr"], catalog, EvalSettings(k=4, workers=1))
    threaded = run_evaluation(graphs, ["cosine", "ppr"], catalog, EvalSettings(k=4, workers=4))
    assert serial.to_dict() == threaded.to_dict()


def test_all_queries_sample_counts_uncatalogued_as_skipped():
    cache = _mini_cache()
    catalog = fixtures.mini_catalog()
    settings = EvalSettings(sample_size=100, restrict_to_catalog=False)
    report = run_evaluation([cache.get(WeightModel.UF)], [Method.COSINE], catalog, settings)
    assert report.sampled == 20
    # "hotel deals" is the only graph query without a catalog entry.
    assert report.skipped == 1
    assert report.evaluated == report.rows[0].evaluated == 19


def test_empty_sample_raises():
    graph = fixtures.mini_graph()
    catalog = parse_catalog(["nowhere\tA > B"])
    with pytest.raises(EmptySampleError):
        run_evaluation([weigh_edges(graph, WeightModel.UF)], [Method.COSINE], catalog)


def test_graphs_must_share_base():
    first = weigh_edges(fixtures.mini_graph(), WeightModel.UF)
    second = weigh_edges(fixtures.mini_graph(), WeightModel.UF)
    with pytest.raises(ConfigError):
        run_evaluation([first, second], [Method.COSINE], fixtures.mini_catalog())
    with pytest.raises(ConfigError):
        run_evaluation([], [Method.COSINE], fixtures.mini_catalog())


def test_settings_validation():
    with pytest.raises(ConfigError):
        EvalSettings(sample_size=0)
    with pytest.raises(ConfigError):
        EvalSettings(k=0)


def test_draw_sample_is_seeded_and_without_replacement():
    graph = fixtures.mini_graph()
    catalog = fixtures.mini_catalog()
    first = draw_sample(graph.queries.names, catalog, 10, seed=11)
    assert first == draw_sample(graph.queries.names, catalog, 10, seed=11)
    assert len(set(first)) == 10
    assert all(query in catalog for query in first)
    assert draw_sample([], catalog, 10, seed=0) == []


def test_report_rendering():
    cache = _mini_cache()
    report = run_evaluation(
        [cache.get(WeightModel.UF), cache.get(WeightModel.UFW_IQF)],
        [Method.COSINE, Method.JACCARD],
        fixtures.mini_catalog(),
        EvalSettings(k=3),
    )
    table = report.render_table()
    assert table.startswith("# seed=0")
    assert "UFW-IQF" in table.splitlines()[1]
    assert sum(line.startswith("jaccard") for line in table.splitlines()) == 3
    payload = report.row("UF", "cosine").to_dict()
    assert set(payload) == {"model", "method", "P@1", "P@2", "P@3", "L@3", "evaluated", "empty_results"}
    with pytest.raises(KeyError):
        report.row("UF", "ppr")


def test_ppr_step_sweep_shape():
    cache = _mini_cache()
    graphs = [cache.get(WeightModel.UF), cache.get(WeightModel.UFW_IQF)]
    report = run_ppr_step_sweep(graphs, fixtures.mini_catalog(), alphas=(0.5, 0.1), max_steps=3, settings=EvalSettings(k=5))
    assert report.steps == [1, 2, 3]
    assert set(report.precision) == {("UF", 0.5), ("UF", 0.1), ("UFW-IQF", 0.5), ("UFW-IQF", 0.1)}
    for curve in report.precision.values():
        assert len(curve) == 3
        assert all(0.0 <= value <= 1.0 for value in curve)
    assert len(report.to_dict()["curves"]) == 4
    assert report.render_table().count("P@5") == 4


def test_ppr_step_sweep_validation():
    graph = weigh_edges(fixtures.mini_graph(), WeightModel.UF)
    with pytest.raises(ConfigError):
        run_ppr_step_sweep([graph], fixtures.mini_catalog(), max_steps=0)
    with pytest.raises(EmptySampleError):
        run_ppr_step_sweep([graph], parse_catalog(["nowhere\tA > B"]))
