"""Bandwidth-optimal all-to-all schedules for direct-connect topologies.

Solves max-concurrent multi-commodity flow over arbitrary directed
topologies, lowers the solutions to time-stepped or path-based chunked
schedules, and evaluates topologies against analytical lower bounds.
"""

__version__ = "0.1.0"

from .graphs import Digraph, GraphError, load_graph, save_graph   # noqa: F401
