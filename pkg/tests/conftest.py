from pathlib import Path

import pytest

from graphnls.graph import load_graph

GRAPHS = Path(__file__).resolve().parent.parent / "graphs"
GOLDEN = Path(__file__).resolve().parent / "golden"


@pytest.fixture
def graph_file():
    def get(name: str) -> Path:
        return GRAPHS / f"{name}.json"
    return get


@pytest.fixture
def graph(graph_file):
    return lambda name: load_graph(graph_file(name))
