import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphnls.constants import MU_HALFLINE, MU_LINE
from graphnls.errors import GraphError
from graphnls.graph import (Case, Edge, HalfLine, MetricGraph, classify, graph_from_dict,
                            halfline_graph, line_graph, normalize, parse_graph, remove_halfline,
                            star_graph, theorem_hypotheses, tip_graph)

TIP_DOC = {
    "vertices": ["v0", "v1"],
    "edges": [{"from": "v0", "to": "v1", "length": 1.0}],
    "halflines": [{"at": "v0"}, {"at": "v0"}],
}


def test_parse_tip_document():
    g = parse_graph(json.dumps(TIP_DOC))
    assert len(g.halflines) == 2
    assert g.terminal_points == ["v1"]
    assert g.edges[0].length == 1.0


def test_parse_single_halfline():
    g = parse_graph('{"vertices": ["o"], "halflines": [{"at": "o"}]}')
    assert len(g.halflines) == 1 and not g.edges
    assert g.terminal_points == ["o"]


@pytest.mark.parametrize("doc", [
    {"vertices": ["a", "b"], "edges": [{"from": "a", "to": "b", "length": 0.0}]},
    {"vertices": ["a", "b"], "edges": [{"from": "a", "to": "b", "length": -1.0}]},
    {"vertices": ["a", "b"], "halflines": [{"at": "a"}]},
    {"vertices": ["a"], "halflines": [{"at": "z"}]},
    {"vertices": ["a"], "halflines": [{"at": "a", "colour": "red"}]},
    {"vertices": [], "halflines": []},
    {"vertices": ["a"], "extra": 1},
])
def test_invalid_documents(doc):
    with pytest.raises(GraphError):
        graph_from_dict(doc)


def test_malformed_json():
    with pytest.raises(GraphError):
        parse_graph("{not json")


def test_compact_rejected_on_request():
    doc = {"vertices": ["a", "b"], "edges": [{"from": "a", "to": "b", "length": 1.0}]}
    with pytest.raises(GraphError):
        parse_graph(json.dumps(doc), require_noncompact=True)


def test_normalize_merges_chains():
    g = MetricGraph(("a", "m", "b"),
                    (Edge("e1", "a", "m", 1.0), Edge("e2", "m", "b", 2.5)),
                    (HalfLine("h1", "a"), HalfLine("h2", "a")))
    n = normalize(g)
    assert n.vertices == ("a", "b")
    assert len(n.edges) == 1 and n.edges[0].length == pytest.approx(3.5)
    assert normalize(n) == n


def test_normalize_keeps_line_vertex():
    assert normalize(line_graph()) == line_graph()


def test_normalize_absorbs_edge_into_halfline():
    g = MetricGraph(("a", "b"), (Edge("e", "a", "b", 1.0),),
                    (HalfLine("h1", "a"), HalfLine("h2", "a"), HalfLine("h3", "b")))
    n = normalize(g)
    assert not n.edges
    assert {h.at for h in n.halflines} == {"a"}


def test_classify_tip(graph):
    r = classify(graph("tip"))
    assert r.case is Case.CASE1
    assert r.critical_mass.kind == "MuHalfLine"
    assert r.critical_mass.lo == pytest.approx(MU_HALFLINE)


def test_classify_two_cycles(graph):
    r = classify(graph("two_cycles"))
    assert r.case is Case.CASE2 and r.cycle_covering
    assert r.critical_mass.lo == pytest.approx(MU_LINE)
    assert theorem_hypotheses(graph("two_cycles"))["satisfied"]


def test_classify_signpost(graph):
    r = classify(graph("signpost"))
    assert r.case is Case.CASE4
    cm = r.critical_mass
    assert cm.kind == "Interval" and cm.lo_open
    assert cm.lo == pytest.approx(MU_HALFLINE) and cm.hi == pytest.approx(MU_LINE)


def test_signpost_is_ring_minus_one_halfline(graph):
    ring = graph("ring_three")
    assert classify(ring).case is Case.CASE2
    sub = remove_halfline(ring, "ell_star")
    assert classify(sub).case is Case.CASE4
    hyp = theorem_hypotheses(ring)
    assert not hyp["satisfied"]
    assert hyp["per_halfline"]["ell_star"] is False


def test_classify_tadpole_and_halfline(graph):
    assert classify(graph("tadpole")).case is Case.CASE3
    assert classify(halfline_graph()).case is Case.CASE1


def test_classify_compact_rejected():
    g = MetricGraph(("a", "b"), (Edge("e", "a", "b", 1.0),))
    with pytest.raises(GraphError):
        classify(g)


def test_remove_halfline_line_gives_halfline():
    g = remove_halfline(line_graph(), "h_plus")
    assert len(g.halflines) == 1 and not g.edges
    assert classify(g).case is Case.CASE1


def test_remove_halfline_tip_stays_case1():
    g = remove_halfline(tip_graph(), "h_plus")
    # the pendant and the remaining half-line merge into one longer half-line
    assert len(g.halflines) == 1
    assert g.terminal_points == ["v1"]
    assert classify(g).case is Case.CASE1


def test_remove_only_halfline_is_compact():
    g = remove_halfline(halfline_graph(), "h")
    assert g.compact
    with pytest.raises(GraphError):
        classify(g)


def test_remove_unknown_halfline():
    with pytest.raises(GraphError):
        remove_halfline(tip_graph(), "nope")


def test_hypotheses():
    assert theorem_hypotheses(tip_graph())["satisfied"]
    assert theorem_hypotheses(tip_graph())["subcase"] == "tip"
    # no bounded edge
    assert not theorem_hypotheses(line_graph())["satisfied"]
    assert not theorem_hypotheses(star_graph(3))["satisfied"]


def test_roundtrip_dict(graph):
    for name in ("tip", "two_cycles", "signpost", "ring_three"):
        g = graph(name)
        assert graph_from_dict(g.to_dict()) == g


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 5), st.integers(1, 4), st.data())
def test_random_graph_classification(nv, extra, m, data):
    # random connected multigraph: a spanning path plus extra edges, m half-lines
    verts = tuple(f"v{i}" for i in range(nv))
    edges = [Edge(f"p{i}", verts[i], verts[i + 1], 1.0 + i) for i in range(nv - 1)]
    for j in range(extra):
        a = data.draw(st.sampled_from(verts))
        b = data.draw(st.sampled_from(verts))
        edges.append(Edge(f"x{j}", a, b, 0.5 + j))
    hls = tuple(HalfLine(f"h{k}", data.draw(st.sampled_from(verts))) for k in range(m))
    g = normalize(MetricGraph(verts, tuple(edges), hls))
    r = classify(g)
    # the four cases are mutually exclusive and determined as documented
    if r.terminal_points:
        assert r.case is Case.CASE1
    elif r.cycle_covering:
        assert r.case is Case.CASE2 and r.num_halflines >= 2
    elif r.num_halflines == 1:
        assert r.case is Case.CASE3
    else:
        assert r.case is Case.CASE4
    assert normalize(g) == g
    assert sum(g.degree(v) for v in g.vertices) == 2 * len(g.edges) + len(g.halflines)
