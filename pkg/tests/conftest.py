import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

PROJECT_ROOT = Path(__file__).resolve().parents[1]
SRC_DIR = PROJECT_ROOT / "src"
if str(SRC_DIR) not in sys.path:
    sys.path.insert(0, str(SRC_DIR))

settings.register_profile("default", max_examples=100, deadline=None)
settings.register_profile("ci", max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from query_click_graph import fixtures  # noqa: E402
from query_click_graph.click_graph import BipartiteClickGraph  # noqa: E402


@pytest.fixture
def toy() -> BipartiteClickGraph:
    return fixtures.toy_graph()


@pytest.fixture
def toy_edges(tmp_path: Path) -> Path:
    path = tmp_path / "toy.tsv"
    path.write_text("".join(f"{q}\t{u}\t{uf}\n" for q, u, uf in sorted(fixtures.TOY_TRIPLES)), encoding="utf-8")
    return path
