"""Uniform per-edge grids on a metric graph and discretized functions on them.

Unknowns are stored in one flat vector: the finite-vertex values first (one
shared value per vertex, which is what makes every discrete function
continuous), then the interior samples of each bounded edge, then those of
each half-line.  Half-lines are truncated at a finite length where the sample
is pinned to zero and not stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from graphnls.errors import GraphError
from graphnls.graph import MetricGraph

DEFAULT_HALFLINE_LENGTH = 40.0


def _even(n: int) -> int:
    n = max(int(n), 2)
    return n + (n % 2)


class Grid:
    """Node layout, lumped masses and the P1 stiffness matrix of a graph."""

    def __init__(self, graph: MetricGraph, cells: Mapping[str, int],
                 halfline_length: float | Mapping[str, float] = DEFAULT_HALFLINE_LENGTH):
        if graph.compact and not graph.edges:
            raise GraphError("cannot grid a graph without edges")
        self.graph = graph
        if not isinstance(halfline_length, Mapping):
            halfline_length = {name: float(halfline_length) for name in graph.halfline_names}
        self.spans: dict[str, float] = {}
        self.cells: dict[str, int] = {}
        self.is_halfline: dict[str, bool] = {}
        self.vertex_index = {v: i for i, v in enumerate(graph.vertices)}
        names = graph.edge_names + graph.halfline_names
        missing = set(names) - set(cells)
        if missing:
            raise GraphError(f"no cell count for {sorted(missing)}")
        for e in graph.edges:
            self.spans[e.name] = e.length
            self.is_halfline[e.name] = False
        for h in graph.halflines:
            L = float(halfline_length[h.name])
            if not L > 0:
                raise GraphError(f"half-line truncation must be positive, got {L}")
            self.spans[h.name] = L
            self.is_halfline[h.name] = True
        self.names = names
        offset = len(graph.vertices)
        self._idx: dict[str, np.ndarray] = {}
        for name in names:
            n = _even(cells[name])
            self.cells[name] = n
            idx = np.empty(n + 1, dtype=np.intp)
            idx[1:n] = np.arange(offset, offset + n - 1)
            offset += n - 1
            if self.is_halfline[name]:
                idx[0] = self.vertex_index[graph.halfline(name).at]
                idx[n] = -1
            else:
                e = graph.edge(name)
                idx[0] = self.vertex_index[e.start]
                idx[n] = self.vertex_index[e.end]
            self._idx[name] = idx
        self.n_nodes = offset
        self._weights = None
        self._stiffness = None

    @classmethod
    def uniform(cls, graph: MetricGraph, h: float, *,
                halfline_length: float = DEFAULT_HALFLINE_LENGTH,
                h_halfline: float | None = None) -> "Grid":
        """Grid with step close to ``h`` on bounded edges (``h_halfline`` on half-lines)."""
        hh = h if h_halfline is None else h_halfline
        cells = {e.name: math.ceil(e.length / h) for e in graph.edges}
        cells.update({name: math.ceil(halfline_length / hh) for name in graph.halfline_names})
        return cls(graph, cells, halfline_length)

    # -- layout ---------------------------------------------------------------

    def index(self, name: str) -> np.ndarray:
        """Flat indices of the N+1 samples of an edge; -1 marks the pinned zero."""
        return self._idx[name]

    def step(self, name: str) -> float:
        return self.spans[name] / self.cells[name]

    def x(self, name: str) -> np.ndarray:
        return np.linspace(0.0, self.spans[name], self.cells[name] + 1)

    @property
    def core_names(self) -> list[str]:
        return self.graph.edge_names

    @property
    def halfline_names(self) -> list[str]:
        return self.graph.halfline_names

    @property
    def h_min(self) -> float:
        return min(self.step(n) for n in self.names)

    def edge_values(self, flat: np.ndarray, name: str) -> np.ndarray:
        return np.append(flat, 0.0)[self._idx[name]]

    def vertex_ends(self, v: str) -> list[tuple[str, bool]]:
        """(edge name, at_start) for every edge end incident to vertex ``v``."""
        out = []
        for e in self.graph.edges:
            if e.start == v:
                out.append((e.name, True))
            if e.end == v:
                out.append((e.name, False))
        out.extend((h.name, True) for h in self.graph.halflines if h.at == v)
        return out

    def interior_nodes(self, names: Iterable[str] | None = None) -> np.ndarray:
        names = self.names if names is None else names
        return np.concatenate([self._idx[n][1:-1] for n in names]) if names else \
            np.empty(0, dtype=np.intp)

    # -- lumped (trapezoid) discretization ------------------------------------

    def edge_weights(self, name: str) -> np.ndarray:
        h = self.step(name)
        w = np.full(self.cells[name] + 1, h)
        w[0] = w[-1] = h / 2
        return w

    @property
    def weights(self) -> np.ndarray:
        """Lumped mass per node (trapezoid rule)."""
        if self._weights is None:
            w = np.zeros(self.n_nodes + 1)
            for name in self.names:
                np.add.at(w, self._idx[name], self.edge_weights(name))
            self._weights = w[:-1]
            self._weights.flags.writeable = False
        return self._weights

    def partial_weights(self, names: Iterable[str]) -> np.ndarray:
        """Lumped weights counting only the listed edges."""
        w = np.zeros(self.n_nodes + 1)
        for name in names:
            np.add.at(w, self._idx[name], self.edge_weights(name))
        return w[:-1]

    @property
    def stiffness(self) -> sp.csr_matrix:
        """P1 stiffness matrix K with u.K.u = integral of |u'|^2."""
        if self._stiffness is None:
            rows, cols, vals = [], [], []
            for name in self.names:
                idx = self._idx[name]
                k = 1.0 / self.step(name)
                i, j = idx[:-1], idx[1:]
                for a, b, s in ((i, i, k), (j, j, k), (i, j, -k), (j, i, -k)):
                    keep = (a >= 0) & (b >= 0)
                    rows.append(a[keep])
                    cols.append(b[keep])
                    vals.append(np.full(keep.sum(), s))
            K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(self.n_nodes, self.n_nodes)).tocsr()
            K.sum_duplicates()
            self._stiffness = K
        return self._stiffness

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.graph, {n: c * factor for n, c in self.cells.items()},
                    {n: self.spans[n] for n in self.halfline_names})


@dataclass(frozen=True)
class GraphFunction:
    """A continuous real function sampled on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise ValueError(f"expected {self.grid.n_nodes} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite samples")
        object.__setattr__(self, "values", v)

    @property
    def graph(self) -> MetricGraph:
        return self.grid.graph

    def edge(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        return self.grid.x(name), self.grid.edge_values(self.values, name)

    def vertex_value(self, v: str) -> float:
        return float(self.values[self.grid.vertex_index[v]])

    def with_values(self, values: np.ndarray) -> "GraphFunction":
        return GraphFunction(self.grid, values)

    def __sub__(self, other: "GraphFunction") -> "GraphFunction":
        if other.grid is not self.grid:
            raise ValueError("functions live on different grids")
        return GraphFunction(self.grid, self.values - other.values)

    @classmethod
    def zeros(cls, grid: Grid) -> "GraphFunction":
        return cls(grid, np.zeros(grid.n_nodes))

    @classmethod
    def from_edge_arrays(cls, grid: Grid, arrays: Mapping[str, np.ndarray],
                         atol: float = 1e-8) -> "GraphFunction":
        """Assemble from full per-edge sample arrays, checking vertex continuity."""
        flat = np.zeros(grid.n_nodes + 1)
        seen = np.zeros(grid.n_nodes + 1, dtype=bool)
        for name in grid.names:
            a = np.asarray(arrays[name], dtype=float)
            idx = grid.index(name)
            if a.shape != idx.shape:
                raise GraphError(f"edge {name!r}: expected {idx.size} samples, got {a.size}")
            for k in (0, -1):
                j = idx[k]
                if j < 0:
                    continue
                if seen[j] and abs(flat[j] - a[k]) > atol * max(1.0, abs(a[k])):
                    raise GraphError(f"discontinuity at vertex of edge {name!r}: "
                                     f"{flat[j]!r} vs {a[k]!r}")
                flat[j] = a[k]
                seen[j] = True
            flat[idx[1:-1]] = a[1:-1]
        return cls(grid, flat[:-1])

    @classmethod
    def from_callables(cls, grid: Grid,
                       funcs: Mapping[str, Callable[[np.ndarray], np.ndarray]],
                       atol: float = 1e-8) -> "GraphFunction":
        arrays = {}
        for name in grid.names:
            a = np.asarray(funcs[name](grid.x(name)), dtype=float) * np.ones(grid.cells[name] + 1)
            if grid.is_halfline[name]:
                a = a.copy()
                a[-1] = 0.0
            arrays[name] = a
        return cls.from_edge_arrays(grid, arrays, atol)
