import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphnls.errors import GraphError
from graphnls.graph import Edge, MetricGraph, tip_graph
from graphnls.grid import GraphFunction, Grid


def test_layout_and_weights(graph):
    g = graph("two_cycles")
    grid = Grid.uniform(g, 0.05, halfline_length=3.0)
    # the pinned zero at each truncation point carries no unknown
    total = sum(e.length for e in g.edges) + sum(3.0 - grid.step(h) / 2 for h in grid.halfline_names)
    assert float(np.sum(grid.weights)) == pytest.approx(total, rel=1e-12)
    core = grid.partial_weights(grid.core_names)
    assert float(np.sum(core)) == pytest.approx(sum(e.length for e in g.edges), rel=1e-12)
    assert all(c % 2 == 0 for c in grid.cells.values())


def test_stiffness_kills_constants_on_compact_part():
    g = MetricGraph(("a", "b"), (Edge("e1", "a", "b", 1.0), Edge("e2", "b", "a", 2.0)))
    grid = Grid(g, {"e1": 10, "e2": 20})
    K = grid.stiffness
    assert np.allclose(K @ np.ones(grid.n_nodes), 0.0)
    assert abs(K - K.T).max() == 0.0


def test_stiffness_is_dirichlet_energy():
    grid = Grid(tip_graph(), {"pendant": 200, "h_plus": 200, "h_minus": 200}, 4.0)
    # u = x on the pendant, 0 on the half-lines except a linear ramp down
    u = GraphFunction.from_callables(grid, {
        "pendant": lambda x: 1.0 + x,
        "h_plus": lambda x: 1.0 - x / 4.0,
        "h_minus": lambda x: 1.0 - x / 4.0,
    })
    assert float(u.values @ (grid.stiffness @ u.values)) == pytest.approx(1.0 + 2 * 0.25, rel=1e-12)


def test_discontinuity_rejected():
    grid = Grid(tip_graph(), {"pendant": 4, "h_plus": 4, "h_minus": 4}, 1.0)
    arrays = {n: np.ones(5) for n in grid.names}
    arrays["h_plus"] = np.array([2.0, 1.0, 1.0, 1.0, 0.0])
    with pytest.raises(GraphError):
        GraphFunction.from_edge_arrays(grid, arrays)


def test_bad_inputs():
    with pytest.raises(GraphError):
        Grid(tip_graph(), {"pendant": 4}, 1.0)
    with pytest.raises(GraphError):
        Grid(tip_graph(), {"pendant": 4, "h_plus": 4, "h_minus": 4}, 0.0)
    grid = Grid(tip_graph(), {"pendant": 4, "h_plus": 4, "h_minus": 4}, 1.0)
    with pytest.raises(ValueError):
        GraphFunction(grid, np.zeros(3))
    with pytest.raises(ValueError):
        GraphFunction(grid, np.full(grid.n_nodes, np.nan))


def test_refined_grid():
    grid = Grid(tip_graph(), {"pendant": 4, "h_plus": 6, "h_minus": 6}, 2.0)
    fine = grid.refined(2)
    assert fine.cells == {"pendant": 8, "h_plus": 12, "h_minus": 12}
    assert fine.spans == grid.spans


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.floats(0.5, 10.0))
def test_trapezoid_exact_for_linear(n1, n2, L):
    grid = Grid(tip_graph(), {"pendant": n1, "h_plus": n2, "h_minus": n2}, L)
    u = GraphFunction.from_callables(grid, {
        "pendant": lambda x: 1.0 + x,
        "h_plus": lambda x: 1.0 - x / L,
        "h_minus": lambda x: 1.0 - x / L,
    })
    # trapezoid integrates linear functions exactly
    assert float(grid.weights @ u.values) == pytest.approx(1.5 + 2 * L / 2, rel=1e-12)
