import numpy as np
import pytest

from query_click_graph import fixtures
from query_click_graph.click_graph import build_graph
from query_click_graph.errors import ConfigError, UnknownQueryError, ZeroVectorError
from query_click_graph.similarity import (
    Method,
    PprParams,
    cosine_similarity,
    jaccard_similarity,
    normalize,
    personalized_pagerank,
    q2q_step,
    top_k_similar,
)
from query_click_graph.weighting import WeightModel, weigh_edges


def _uf(graph):
    return normalize(weigh_edges(graph, WeightModel.UF))


def _stochastic(matrix):
    sums = matrix.sum(axis=1, keepdims=True)
    out = np.zeros_like(matrix)
    np.divide(matrix, sums, out=out, where=sums > 0)
    return out


def _oracle(values):
    p_q2d = _stochastic(values)
    p_d2q = _stochastic(values.T)
    return p_q2d, p_d2q, p_q2d @ p_d2q


def _oracle_cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def _oracle_jaccard(a, b):
    return float(np.minimum(a, b).sum() / np.maximum(a, b).sum())


def _oracle_ppr(p_q2q, source, alpha, steps):
    scores = np.zeros(p_q2q.shape[0])
    scores[source] = 1.0
    for _ in range(steps):
        scores = (1 - alpha) * scores + alpha * p_q2q.T @ scores
    return scores


def _oracle_top_k(p_q2d, source, score_fn, k):
    support = p_q2d[source] > 0
    ranked = []
    for other in range(p_q2d.shape[0]):
        if other == source or not p_q2d[other].any() or not (support & (p_q2d[other] > 0)).any():
            continue
        score = score_fn(p_q2d[source], p_q2d[other])
        if score > 0:
            ranked.append((-score, other))
    ranked.sort()
    return [(other, -neg) for neg, other in ranked[:k]]


def _assert_same_ranking(got, ranked, k):
    expected = ranked[:k]
    assert len(got) == len(expected)
    np.testing.assert_allclose([s for _, s in got], [s for _, s in expected], atol=1e-10)
    for (got_id, got_score), (expected_id, _) in zip(got, expected):
        if got_id != expected_id:
            # Only rounding-level ties may swap places.
            oracle_scores = dict(ranked)
            assert got_id in oracle_scores
            assert oracle_scores[got_id] == pytest.approx(got_score, abs=1e-10)


def test_single_edge_graph():
    t = _uf(build_graph([("a", "x.com", 3)]))
    assert t.p_q2d.toarray().tolist() == [[1.0]]
    assert t.p_d2q.toarray().tolist() == [[1.0]]
    assert q2q_step(t).toarray().tolist() == [[1.0]]
    for steps in range(4):
        assert personalized_pagerank(t, PprParams(0.3, steps, 0)).tolist() == [1.0]


def test_toy_cosine_and_jaccard(toy):
    t = _uf(toy)
    yahoo = toy.queries.id_of("yahoo")
    weather = toy.queries.id_of("weather")
    assert cosine_similarity(t, yahoo, weather) == pytest.approx(0.70710678, abs=1e-8)
    assert jaccard_similarity(t, yahoo, weather) == pytest.approx(1 / 3)
    assert jaccard_similarity(t, yahoo, weather, binary=True) == pytest.approx(1 / 2)


def test_toy_self_transition(toy):
    t = _uf(toy)
    yahoo = toy.queries.id_of("yahoo")
    assert t.p_q2q[yahoo, yahoo] == pytest.approx(20 / 45)


def test_identical_and_disjoint_rows():
    graph = build_graph([("a", "x.com", 2), ("b", "x.com", 5), ("c", "y.com", 1)])
    t = _uf(graph)
    assert cosine_similarity(t, 0, 1) == pytest.approx(1.0)
    assert jaccard_similarity(t, 0, 1) == pytest.approx(1.0)
    assert cosine_similarity(t, 0, 2) == 0.0
    assert jaccard_similarity(t, 0, 2) == 0.0


def test_zero_row_query(toy):
    # Default |Q| = 4 zeroes www.yahoo.com, the only URL of "yahoo".
    t = normalize(weigh_edges(toy, WeightModel.UF_IQF))
    yahoo = toy.queries.id_of("yahoo")
    assert t.zero_query_rows[yahoo]
    assert t.p_q2d[yahoo].sum() == 0.0
    with pytest.raises(ZeroVectorError):
        cosine_similarity(t, yahoo, toy.queries.id_of("map"))
    assert len(top_k_similar(t, "yahoo", Method.COSINE)) == 0


def test_ppr_zero_row_source_raises(toy):
    t = normalize(weigh_edges(toy, WeightModel.UF_IQF))
    yahoo = toy.queries.id_of("yahoo")
    with pytest.raises(ZeroVectorError, match="yahoo"):
        personalized_pagerank(t, PprParams(0.5, 3, yahoo))
    assert len(top_k_similar(t, "yahoo", Method.PPR, ppr_params=PprParams(0.5, 3, yahoo))) == 0
    # Mass never leaks into a zero-row query from a live source.
    for source in ("map", "travel", "weather"):
        scores = personalized_pagerank(t, PprParams(0.5, 3, toy.queries.id_of(source)))
        assert scores.sum() == pytest.approx(1.0, abs=1e-9)
        assert scores[yahoo] == 0.0


def test_ppr_zero_steps_is_indicator(toy):
    t = _uf(toy)
    scores = personalized_pagerank(t, PprParams(0.5, 0, 2))
    assert scores.tolist() == [0.0, 0.0, 1.0, 0.0]


@pytest.mark.parametrize("alpha,steps", [(0.0, 1), (1.0, 1), (0.5, -1)])
def test_ppr_params_validation(alpha, steps):
    with pytest.raises(ConfigError):
        PprParams(alpha, steps, 0)


def test_top_k_validation(toy):
    t = _uf(toy)
    with pytest.raises(ConfigError):
        top_k_similar(t, "map", Method.COSINE, k=0)
    with pytest.raises(ConfigError):
        top_k_similar(t, "map", Method.PPR)
    with pytest.raises(UnknownQueryError):
        top_k_similar(t, "nothing", Method.COSINE)


def test_top_k_shorter_than_k_and_unique_support():
    graph = build_graph([("a", "x.com", 1), ("b", "x.com", 1), ("c", "z.com", 4)])
    t = _uf(graph)
    result = top_k_similar(t, "a", "cosine", k=10)
    assert result.query_ids == [1]
    assert len(top_k_similar(t, "c", "jaccard", k=10)) == 0


def test_single_query_graph_has_no_neighbours():
    t = _uf(build_graph([("solo", "x.com", 1), ("solo", "y.com", 2)]))
    assert len(top_k_similar(t, "solo", Method.COSINE, k=10)) == 0


def test_ties_broken_by_query_id():
    graph = build_graph([("src", "x.com", 1), ("b", "x.com", 1), ("a", "x.com", 1)])
    t = _uf(graph)
    result = top_k_similar(t, "src", Method.JACCARD, k=5)
    assert [name for name, _ in result.named(t)] == ["a", "b"]


def test_result_to_dict(toy):
    t = _uf(toy)
    payload = top_k_similar(t, "weather", Method.COSINE, k=2).to_dict(t)
    assert payload["source"] == "weather"
    assert [entry["rank"] for entry in payload["results"]] == [1, 2]


@pytest.mark.parametrize("seed", range(200))
def test_sparse_operations_match_dense_oracles(seed):
    rng = np.random.default_rng(seed)
    graph = build_graph(fixtures.random_triples(rng, max_queries=100, max_urls=100))
    model = [WeightModel.UF, WeightModel.UF_IQF, WeightModel.UFW_IQF, WeightModel.UFW_IUF][seed % 4]
    weighted = weigh_edges(graph, model, q_total=graph.num_queries + 1, u_total=graph.num_urls + 1)
    t = normalize(weighted)
    p_q2d, p_d2q, p_q2q = _oracle(weighted.values.toarray())

    np.testing.assert_allclose(t.p_q2d.toarray(), p_q2d, atol=1e-12)
    np.testing.assert_allclose(t.p_d2q.toarray(), p_d2q, atol=1e-12)
    np.testing.assert_allclose(t.p_q2q.toarray(), p_q2q, atol=1e-12)
    for matrix in (t.p_q2d, t.p_d2q, t.p_q2q):
        sums = np.asarray(matrix.sum(axis=1)).ravel()
        nonzero = sums > 0
        np.testing.assert_allclose(sums[nonzero], 1.0, atol=1e-9)

    m = graph.num_queries
    for _ in range(10):
        i, j = (int(x) for x in rng.integers(0, m, size=2))
        assert cosine_similarity(t, i, j) == pytest.approx(_oracle_cosine(p_q2d[i], p_q2d[j]), abs=1e-10)
        assert jaccard_similarity(t, i, j) == pytest.approx(_oracle_jaccard(p_q2d[i], p_q2d[j]), abs=1e-10)

    source = int(rng.integers(0, m))
    for method, score_fn in ((Method.COSINE, _oracle_cosine), (Method.JACCARD, _oracle_jaccard)):
        got = top_k_similar(t, source, method, k=10).entries
        ranked = _oracle_top_k(p_q2d, source, score_fn, None)
        _assert_same_ranking(got, ranked, 10)

    for alpha in (0.1, 0.5):
        steps = int(rng.integers(0, 11))
        got = personalized_pagerank(t, PprParams(alpha, steps, source))
        np.testing.assert_allclose(got, _oracle_ppr(p_q2q, source, alpha, steps), atol=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_ppr_conserves_mass(seed):
    graph = build_graph(fixtures.random_triples(seed, max_queries=60, max_urls=60))
    t = normalize(weigh_edges(graph, WeightModel.UFW_IQF, q_total=graph.num_queries + 1))
    for steps in (1, 10, 50):
        scores = personalized_pagerank(t, PprParams(0.5, steps, 0))
        assert scores.sum() == pytest.approx(1.0, abs=1e-9)
        assert (scores >= 0).all()


def test_ppr_top_k_excludes_source(toy):
    t = _uf(toy)
    result = top_k_similar(t, "map", Method.PPR, k=10, ppr_params=PprParams(0.5, 2, 0))
    assert toy.queries.id_of("map") not in result.query_ids
    assert len(result) == 3
    scores = [score for _, score in result.entries]
    assert scores == sorted(scores, reverse=True)
