"""Finite metric graphs with half-lines, and their topological classification.

A graph is stored as finite vertices, bounded edges ``(start, end, length)``
and half-lines attached at a vertex.  Half-lines are attachment records, not
edges of infinite length.  Every public constructor returns a *normalized*
graph: chains through degree-2 vertices are merged (lengths summed), except
for the line, which is the only graph that needs a degree-2 vertex.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import networkx as nx

from graphnls.constants import MU_HALFLINE, MU_LINE
from graphnls.errors import GraphError


@dataclass(frozen=True)
class Edge:
    name: str
    start: str
    end: str
    length: float

    @property
    def is_loop(self) -> bool:
        return self.start == self.end


@dataclass(frozen=True)
class HalfLine:
    name: str
    at: str


@dataclass(frozen=True)
class MetricGraph:
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...] = ()
    halflines: tuple[HalfLine, ...] = ()

    def __post_init__(self):
        names = [e.name for e in self.edges] + [h.name for h in self.halflines]
        if len(set(names)) != len(names):
            raise GraphError(f"duplicate edge names in {names}")
        if len(set(self.vertices)) != len(self.vertices):
            raise GraphError("duplicate vertex ids")
        known = set(self.vertices)
        for e in self.edges:
            if e.start not in known or e.end not in known:
                raise GraphError(f"edge {e.name!r} references an unknown vertex")
            if not e.length > 0:
                raise GraphError(f"edge {e.name!r} has nonpositive length {e.length}")
        for h in self.halflines:
            if h.at not in known:
                raise GraphError(f"half-line {h.name!r} attached to unknown vertex {h.at!r}")
        if not self.vertices:
            raise GraphError("graph has no vertices")
        if not _connected(self.vertices, self.edges):
            raise GraphError("graph is not connected")

    @property
    def compact(self) -> bool:
        return not self.halflines

    @property
    def edge_names(self) -> list[str]:
        return [e.name for e in self.edges]

    @property
    def halfline_names(self) -> list[str]:
        return [h.name for h in self.halflines]

    def edge(self, name: str) -> Edge:
        for e in self.edges:
            if e.name == name:
                return e
        raise KeyError(name)

    def halfline(self, name: str) -> HalfLine:
        for h in self.halflines:
            if h.name == name:
                return h
        raise KeyError(name)

    def degree(self, v: str) -> int:
        d = sum((e.start == v) + (e.end == v) for e in self.edges)
        return d + sum(h.at == v for h in self.halflines)

    @property
    def terminal_points(self) -> list[str]:
        return [v for v in self.vertices if self.degree(v) == 1]

    def to_dict(self) -> dict[str, Any]:
        return {
            "vertices": list(self.vertices),
            "edges": [
                {"from": e.start, "to": e.end, "length": e.length, "name": e.name}
                for e in self.edges
            ],
            "halflines": [{"at": h.at, "name": h.name} for h in self.halflines],
        }


def _connected(vertices, edges) -> bool:
    g = nx.MultiGraph()
    g.add_nodes_from(vertices)
    g.add_edges_from((e.start, e.end) for e in edges)
    return nx.is_connected(g)


def normalize(g: MetricGraph) -> MetricGraph:
    """Merge degree-2 chains; idempotent."""
    vertices = list(g.vertices)
    edges = list(g.edges)
    halflines = list(g.halflines)
    changed = True
    while changed:
        changed = False
        for v in vertices:
            ends = [(e, e.start == v, e.end == v) for e in edges if v in (e.start, e.end)]
            hls = [h for h in halflines if h.at == v]
            degree = sum(s + t for _, s, t in ends) + len(hls)
            if degree != 2:
                continue
            if len(ends) == 2:
                (e1, s1, _), (e2, s2, _) = ends
                a = e1.end if s1 else e1.start
                b = e2.end if s2 else e2.start
                merged = Edge(f"{e1.name}+{e2.name}", a, b, e1.length + e2.length)
                edges = [merged if e is e1 else e for e in edges if e is not e2]
            elif len(ends) == 1 and len(hls) == 1:
                e, s, t = ends[0]
                if s and t:  # loop at v: compact circle hanging off nothing
                    continue
                other = e.end if s else e.start
                edges = [x for x in edges if x is not e]
                halflines = [HalfLine(h.name, other) if h is hls[0] else h for h in halflines]
            else:
                # two half-lines (the real line) or a lone loop: nothing to merge
                continue
            vertices.remove(v)
            changed = True
            break
    return MetricGraph(tuple(vertices), tuple(edges), tuple(halflines))


_TOP_KEYS = {"vertices", "edges", "halflines"}
_EDGE_KEYS = {"from", "to", "length", "name"}
_HALFLINE_KEYS = {"at", "name"}


def graph_from_dict(doc: dict[str, Any]) -> MetricGraph:
    if not isinstance(doc, dict):
        raise GraphError("graph document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise GraphError(f"unknown keys {sorted(unknown)}")
    try:
        vertices = tuple(str(v) for v in doc["vertices"])
        raw_edges = doc.get("edges", [])
        raw_hl = doc.get("halflines", [])
        edges = []
        for i, e in enumerate(raw_edges):
            bad = set(e) - _EDGE_KEYS
            if bad:
                raise GraphError(f"unknown edge keys {sorted(bad)}")
            edges.append(Edge(str(e.get("name", f"e{i}")), str(e["from"]), str(e["to"]),
                              float(e["length"])))
        halflines = []
        for i, h in enumerate(raw_hl):
            bad = set(h) - _HALFLINE_KEYS
            if bad:
                raise GraphError(f"unknown half-line keys {sorted(bad)}")
            halflines.append(HalfLine(str(h.get("name", f"h{i}")), str(h["at"])))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, GraphError):
            raise
        raise GraphError(f"malformed graph document: {exc!r}") from exc
    return normalize(MetricGraph(vertices, tuple(edges), tuple(halflines)))


def parse_graph(text: str, *, require_noncompact: bool = False) -> MetricGraph:
    """Parse a JSON graph description into a normalized :class:`MetricGraph`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"malformed JSON: {exc}") from exc
    g = graph_from_dict(doc)
    if require_noncompact and g.compact:
        raise GraphError("graph is compact (no half-lines)")
    return g


def load_graph(path, **kw) -> MetricGraph:
    with open(path) as fh:
        return parse_graph(fh.read(), **kw)


def remove_halfline(g: MetricGraph, name: str) -> MetricGraph:
    """The graph with half-line ``name`` (and its point at infinity) removed."""
    if name not in g.halfline_names:
        raise GraphError(f"unknown half-line {name!r}")
    rest = tuple(h for h in g.halflines if h.name != name)
    return normalize(MetricGraph(g.vertices, g.edges, rest))


class Case(str, Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"
    CASE3 = "Case3"
    CASE4 = "Case4"


@dataclass(frozen=True)
class CriticalMass:
    kind: str  # MuHalfLine | MuLine | Interval | Unknown
    lo: float | None = None
    hi: float | None = None
    lo_open: bool = False
    hi_open: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi,
                "lo_open": self.lo_open, "hi_open": self.hi_open}

    @property
    def known(self) -> bool:
        return self.kind in ("MuHalfLine", "MuLine")


MU_HALFLINE_EXACT = CriticalMass("MuHalfLine", MU_HALFLINE, MU_HALFLINE)
MU_LINE_EXACT = CriticalMass("MuLine", MU_LINE, MU_LINE)


@dataclass(frozen=True)
class TopologyReport:
    terminal_points: list[str]
    num_halflines: int
    has_compact_core: bool
    cycle_covering: bool
    case: Case
    critical_mass: CriticalMass
    bridges: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "terminal_points": self.terminal_points,
            "num_halflines": self.num_halflines,
            "has_compact_core": self.has_compact_core,
            "cycle_covering": self.cycle_covering,
            "case": self.case.value,
            "critical_mass": self.critical_mass.to_dict(),
            "bridges": self.bridges,
        }


def _bridge_sides(g: MetricGraph, e: Edge) -> list[set[str]] | None:
    """Vertex sets of the two components of G minus e, or None if e is no bridge."""
    if e.is_loop:
        return None
    mg = nx.MultiGraph()
    mg.add_nodes_from(g.vertices)
    mg.add_edges_from((x.start, x.end) for x in g.edges if x is not e)
    comps = list(nx.connected_components(mg))
    return comps if len(comps) == 2 else None


def classify(g: MetricGraph) -> TopologyReport:
    """Sort a non-compact graph into the four mutually exclusive cases."""
    if g.compact:
        raise GraphError("classification requires a non-compact graph")
    tips = g.terminal_points
    m = len(g.halflines)
    attached = {h.at for h in g.halflines}
    bridges = []
    all_unbounded = True
    for e in g.edges:
        sides = _bridge_sides(g, e)
        if sides is None:
            continue
        bridges.append(e.name)
        if not all(side & attached for side in sides):
            all_unbounded = False
    covering = m >= 2 and not tips and all_unbounded

    if tips:
        case, crit = Case.CASE1, MU_HALFLINE_EXACT
    elif covering:
        case, crit = Case.CASE2, MU_LINE_EXACT
    elif m == 1:
        case, crit = Case.CASE3, MU_HALFLINE_EXACT
    else:
        # known only to lie strictly above the half-line value
        case, crit = Case.CASE4, CriticalMass("Interval", MU_HALFLINE, MU_LINE, lo_open=True)
    return TopologyReport(tips, m, bool(g.edges), covering, case, crit, bridges)


def theorem_hypotheses(g: MetricGraph) -> dict[str, Any]:
    """Check the structural hypotheses under which local minimizers exist.

    Needs at least two half-lines, a bounded edge, and a critical mass that
    does not change when any single half-line is removed.  Case-4 graphs have
    an unknown critical mass and therefore never pass.
    """
    rep = classify(g)
    checks = {
        "two_halflines": rep.num_halflines >= 2,
        "bounded_edge": rep.has_compact_core,
    }
    preserved = rep.critical_mass.known
    per_line = {}
    if rep.num_halflines >= 2:
        for name in g.halfline_names:
            sub = classify(remove_halfline(g, name)).critical_mass
            ok = sub.known and sub.kind == rep.critical_mass.kind
            per_line[name] = ok
            preserved = preserved and ok
    checks["critical_mass_preserved"] = preserved and rep.num_halflines >= 2
    return {
        "satisfied": all(checks.values()),
        "checks": checks,
        "per_halfline": per_line,
        "case": rep.case.value,
        "subcase": "tip" if rep.case is Case.CASE1 else "notip",
    }


# -- standard graphs ------------------------------------------------------------

def tip_graph(pendant: float = 1.0) -> MetricGraph:
    """Two half-lines and a pendant of the given length, all meeting at ``v0``."""
    return MetricGraph(
        ("v0", "v1"),
        (Edge("pendant", "v0", "v1", pendant),),
        (HalfLine("h_plus", "v0"), HalfLine("h_minus", "v0")),
    )


def line_graph() -> MetricGraph:
    return MetricGraph(("o",), (), (HalfLine("h_plus", "o"), HalfLine("h_minus", "o")))


def halfline_graph() -> MetricGraph:
    return MetricGraph(("o",), (), (HalfLine("h", "o"),))


def star_graph(k: int) -> MetricGraph:
    return MetricGraph(("o",), (), tuple(HalfLine(f"h{i}", "o") for i in range(k)))
