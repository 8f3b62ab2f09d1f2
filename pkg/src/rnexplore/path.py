"""Graph distances from the node nearest the robot, kept up to date incrementally."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from rnexplore.rrg import RrgGraph


def cost(d_xn: float) -> float:
    """Exponential distance cost; 1 at the anchor, 0 for unreachable nodes."""
    if math.isinf(d_xn):
        return 0.0
    if d_xn < 0:
        raise ValueError("distance must be non-negative")
    return math.exp(-d_xn)


@dataclass
class PathTable:
    anchor: int
    dist: list[float] = field(default_factory=list)
    pred: list[int | None] = field(default_factory=list)  # predecessor edge id per node
    pops: int = 0  # heap pops of the last (re)computation, for complexity checks

    def grow(self, n: int) -> None:
        while len(self.dist) < n:
            self.dist.append(math.inf)
            self.pred.append(None)

    def path_to(self, graph: RrgGraph, node_id: int) -> list[int]:
        """Node ids from the anchor to ``node_id`` along predecessor edges."""
        if math.isinf(self.dist[node_id]):
            raise ValueError(f"node {node_id} is unreachable from anchor {self.anchor}")
        out = [node_id]
        while out[-1] != self.anchor:
            out.append(graph.edges[self.pred[out[-1]]].other(out[-1]))
        out.reverse()
        return out


def _relax(graph: RrgGraph, table: PathTable, heap: list) -> list[int]:
    changed = []
    while heap:
        d, u = heapq.heappop(heap)
        table.pops += 1
        if d > table.dist[u]:
            continue  # stale entry
        for v, e in graph.neighbors(u):
            nd = d + e.length
            if nd < table.dist[v]:
                table.dist[v] = nd
                table.pred[v] = e.id
                changed.append(v)
                heapq.heappush(heap, (nd, v))
    return changed


def rebuild(graph: RrgGraph, anchor: int) -> PathTable:
    """Dijkstra from ``anchor`` over all edge lengths."""
    table = PathTable(anchor)
    table.grow(len(graph))
    table.dist[anchor] = 0.0
    _relax(graph, table, [(0.0, anchor)])
    return table


def insert_node(table: PathTable, graph: RrgGraph, n_new: int) -> list[int]:
    """Account for a freshly connected node; returns ids whose distance changed.

    The new node takes its distance from its best neighbour, then a
    relaxation seeded at the new node lowers any entry it can improve.
    Nothing is reset, so untouched nodes keep their values.
    """
    table.grow(len(graph))
    best, best_edge = math.inf, None
    for v, e in graph.neighbors(n_new):
        d = table.dist[v] + e.length
        if d < best or (d == best and best_edge is not None and e.id < best_edge):
            best, best_edge = d, e.id
    table.dist[n_new] = best
    table.pred[n_new] = best_edge
    table.pops = 0
    if math.isinf(best):
        return [n_new]
    return [n_new] + _relax(graph, table, [(best, n_new)])


def nearest_node(graph: RrgGraph, robot_xy) -> int:
    return graph.index.nearest(robot_xy)[0]


def shortest_path(graph: RrgGraph, source: int, target: int) -> list[int]:
    """Node ids of a shortest path between two arbitrary nodes."""
    return rebuild(graph, source).path_to(graph, target)
