"""Stationary states of the mass-critical NLS energy on non-compact metric graphs."""

from graphnls.constants import MU_HALFLINE, MU_LINE
from graphnls.graph import MetricGraph, classify, parse_graph, remove_halfline
from graphnls.grid import Grid, GraphFunction

__all__ = [
    "MU_HALFLINE",
    "MU_LINE",
    "MetricGraph",
    "Grid",
    "GraphFunction",
    "classify",
    "parse_graph",
    "remove_halfline",
]

__version__ = "0.1.0"
