"""The exploration graph: storage, spatial index, sampling and expansion.

Node positions are 3D but all graph geometry (edge lengths, spacing,
neighbour search) is measured in the horizontal plane; node heights are
assigned later by ground snapping.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from rnexplore.errors import ConfigError
from rnexplore.steer import RobotFootprint, steer
from rnexplore.world import GridMap2D, Tile


class NodeStatus(Enum):
    INITIAL = "initial"
    GAIN_PENDING = "gain_pending"
    ACTIVE_GOAL = "active_goal"
    VISITED = "visited"
    EXPLORED = "explored"
    FAILED = "failed"


class Mode(Enum):
    GRAPH = "graph"
    TREE = "tree"


@dataclass
class Node:
    id: int
    position: np.ndarray
    status: NodeStatus = NodeStatus.INITIAL
    gain: int | None = None  # None until first evaluated, -1 when no ground was found
    best_yaw: float | None = None
    gcr: float | None = None
    d_xn: float = math.inf
    path_edge: int | None = None
    gain_stamp: int | None = None

    @property
    def xy(self) -> np.ndarray:
        return self.position[:2]


@dataclass(frozen=True)
class Edge:
    id: int
    a: int
    b: int
    length: float

    def other(self, node_id: int) -> int:
        return self.b if node_id == self.a else self.a


class SpatialIndex:
    """Nearest and radius queries over 2D points with incremental inserts.

    Points go to a small linear-scan buffer that is periodically merged into
    a k-d tree. Ties are broken towards the smaller id.
    """

    def __init__(self, rebuild_at: int = 32):
        self._ids: list[int] = []
        self._pts: list[tuple[float, float]] = []
        self._tree = None
        self._tree_n = 0
        self._rebuild_at = rebuild_at

    def __len__(self):
        return len(self._ids)

    def add(self, node_id: int, xy) -> None:
        self._ids.append(node_id)
        self._pts.append((float(xy[0]), float(xy[1])))
        if len(self._ids) - self._tree_n >= max(self._rebuild_at, int(math.sqrt(len(self._ids)))):
            self._tree = cKDTree(np.array(self._pts))
            self._tree_n = len(self._ids)

    def _buffer(self):
        return range(self._tree_n, len(self._ids))

    def nearest(self, xy) -> tuple[int, float]:
        if not self._ids:
            raise LookupError("empty index")
        x, y = float(xy[0]), float(xy[1])
        best = (math.inf, -1)
        if self._tree is not None:
            d, i = self._tree.query((x, y), k=1)
            # distance ties inside the tree: collect all at that distance
            for j in self._tree.query_ball_point((x, y), d + 1e-12):
                dj = math.hypot(self._pts[j][0] - x, self._pts[j][1] - y)
                best = min(best, (dj, self._ids[j]))
        for j in self._buffer():
            dj = math.hypot(self._pts[j][0] - x, self._pts[j][1] - y)
            best = min(best, (dj, self._ids[j]))
        return best[1], best[0]

    def within(self, xy, radius: float) -> list[int]:
        """Ids with distance <= radius, sorted by (distance, id)."""
        x, y = float(xy[0]), float(xy[1])
        found = []
        cand = list(self._buffer())
        if self._tree is not None:
            cand.extend(self._tree.query_ball_point((x, y), radius + 1e-9))
        for j in cand:
            dj = math.hypot(self._pts[j][0] - x, self._pts[j][1] - y)
            if dj <= radius:
                found.append((dj, self._ids[j]))
        found.sort()
        return [i for _, i in found]


@dataclass
class RrgGraph:
    d_min: float = 1.0
    d_max: float = 2.0
    mode: Mode = Mode.GRAPH
    local_sampling: bool = True
    r_ls: float = 5.0
    footprint: RobotFootprint = field(default_factory=lambda: RobotFootprint(0.35, 0.5))
    nodes: list[Node] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)
    adjacency: list[list[int]] = field(default_factory=list)  # node id -> edge ids
    index: SpatialIndex = field(default_factory=SpatialIndex)

    def __post_init__(self):
        if not 0 < self.d_min <= self.d_max:
            raise ConfigError("graph needs 0 < d_min <= d_max")
        if self.r_ls <= 0:
            raise ConfigError("r_ls must be positive")

    def __len__(self):
        return len(self.nodes)

    def add_node(self, position, status=NodeStatus.INITIAL) -> Node:
        node = Node(len(self.nodes), np.array(position, dtype=float).reshape(3), status)
        self.nodes.append(node)
        self.adjacency.append([])
        self.index.add(node.id, node.xy)
        return node

    def add_edge(self, a: int, b: int) -> Edge:
        if a == b:
            raise ValueError("self loop")
        if self.edge_between(a, b) is not None:
            raise ValueError(f"edge {a}-{b} already exists")
        pa, pb = self.nodes[a].xy, self.nodes[b].xy
        edge = Edge(len(self.edges), a, b, math.hypot(pb[0] - pa[0], pb[1] - pa[1]))
        self.edges.append(edge)
        self.adjacency[a].append(edge.id)
        self.adjacency[b].append(edge.id)
        return edge

    def edge_between(self, a: int, b: int) -> Edge | None:
        for eid in self.adjacency[a]:
            if self.edges[eid].other(a) == b:
                return self.edges[eid]
        return None

    def neighbors(self, node_id: int):
        """Yield ``(neighbor_id, edge)`` pairs."""
        for eid in self.adjacency[node_id]:
            e = self.edges[eid]
            yield e.other(node_id), e

    def reachable_from(self, root: int = 0) -> set[int]:
        seen = {root}
        todo = deque([root])
        while todo:
            u = todo.popleft()
            for v, _ in self.neighbors(u):
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return seen

    def snapshot(self) -> str:
        """Line-oriented dump: ``node <id> <x> <y> <z> <status> <gain> <yaw> <d_xn>`` then edges."""
        out = []
        for n in self.nodes:
            gain = "nan" if n.gain is None else str(n.gain)
            yaw = "nan" if n.best_yaw is None else f"{n.best_yaw:.6f}"
            x, y, z = n.position
            out.append(f"node {n.id} {x:.6f} {y:.6f} {z:.6f} {n.status.value} {gain} {yaw} {n.d_xn:.6f}")
        for e in self.edges:
            out.append(f"edge {e.id} {e.a} {e.b} {e.length:.6f}")
        return "\n".join(out) + "\n"


def init_graph(x_pos, **params) -> RrgGraph:
    """New graph holding only a root node at ``x_pos``."""
    graph = RrgGraph(**params)
    root = graph.add_node(x_pos)
    root.d_xn = 0.0
    return graph


def sample_point(grid: GridMap2D, rng: np.random.Generator):
    """Uniform draw over the known part of ``grid``; ``None`` unless the tile is traversable."""
    bounds = grid.known_bounds()
    if bounds is None:
        return None
    x0, y0, x1, y1 = bounds
    p = np.array([x0 + rng.random() * (x1 - x0), y0 + rng.random() * (y1 - y0)])
    return p if grid.state(*grid.tile_of(p)) == Tile.TRAVERSABLE else None


def sample_point_local(grid: GridMap2D, robot_xy, r_ls: float, rng: np.random.Generator):
    """Uniform draw over the disc of radius ``r_ls`` around the robot, same acceptance rule."""
    if r_ls <= 0:
        raise ValueError("r_ls must be positive")
    while True:
        u, v = rng.random() * 2 - 1, rng.random() * 2 - 1
        if u * u + v * v <= 1.0:
            break
    p = np.array([robot_xy[0] + u * r_ls, robot_xy[1] + v * r_ls])
    return p if grid.state(*grid.tile_of(p)) == Tile.TRAVERSABLE else None


def align_sample_point(candidate, x_near, d_max: float) -> np.ndarray:
    """Pull ``candidate`` onto the segment towards ``x_near`` when it is farther than ``d_max``."""
    c = np.asarray(candidate, dtype=float)[:2]
    n = np.asarray(x_near, dtype=float)[:2]
    d = math.hypot(*(c - n))
    if d <= d_max:
        return c.copy()
    return n + (c - n) * (d_max / d)


def snap_to_tile(grid: GridMap2D, xy) -> np.ndarray:
    return grid.center_of(*grid.tile_of(xy))


@dataclass(frozen=True)
class Expansion:
    node: int | None
    neighbors: tuple[int, ...] = ()
    reason: str | None = None

    def __bool__(self):
        return self.node is not None


def _place(graph: RrgGraph, candidate, grid: GridMap2D):
    """Final position for ``candidate`` and the nearest node, or a rejection reason."""
    near_id, d = graph.index.nearest(candidate)
    if d < graph.d_min:
        return None, near_id, "too_close"
    x_near = graph.nodes[near_id].xy
    if graph.mode is Mode.TREE:
        p = np.asarray(candidate, dtype=float)[:2]
        return x_near + (p - x_near) * (graph.d_min / d), near_id, None
    p = snap_to_tile(grid, align_sample_point(candidate, x_near, graph.d_max))
    if math.hypot(*(p - x_near)) > graph.d_max:
        # snapping pushed it outwards; pull in by one tile diagonal and snap again
        inset = graph.d_max - grid.resolution * math.sqrt(0.5)
        p = snap_to_tile(grid, align_sample_point(candidate, x_near, inset))
    return p, near_id, None


def expand(graph: RrgGraph, candidate, grid: GridMap2D) -> Expansion:
    """Try to insert ``candidate`` and connect it; one iteration of graph growth."""
    p, near_id, reason = _place(graph, candidate, grid)
    if reason:
        return Expansion(None, reason=reason)
    if not grid.contains(p):
        return Expansion(None, reason="no_connection")
    near2, d2 = graph.index.nearest(p)
    if d2 < graph.d_min - 1e-9:
        return Expansion(None, reason="too_close")

    if graph.mode is Mode.TREE:
        targets = [near_id]
    else:
        targets = graph.index.within(p, graph.d_max)
    connected = tuple(t for t in targets if steer(grid, p, graph.nodes[t].xy, graph.footprint))
    if not connected:
        return Expansion(None, reason="no_connection")

    z = float(np.mean([graph.nodes[t].position[2] for t in connected]))
    node = graph.add_node((p[0], p[1], z))
    for t in connected:
        graph.add_edge(node.id, t)
    return Expansion(node.id, connected)
