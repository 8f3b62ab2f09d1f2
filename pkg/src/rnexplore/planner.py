"""Goal selection: candidate ordering, decoupled gain work, interrupts and the exit timer."""

from __future__ import annotations

import bisect
import math
from collections import deque
from dataclasses import dataclass, field

from rnexplore.errors import ProtocolError
from rnexplore.gain import GainResult, PollPointSet, evaluate_gain, snap_to_ground, update_status
from rnexplore.path import PathTable, cost
from rnexplore.rrg import NodeStatus, RrgGraph
from rnexplore.world import VoxelMap

ELIGIBLE = (NodeStatus.INITIAL, NodeStatus.ACTIVE_GOAL)
EVENTS = ("goal_selected", "goal_reached", "goal_failed", "goal_aborted", "terminated")


def _rank(node):
    return (-node.gcr, node.d_xn, node.id)


class CandidateQueue:
    """Nodes with a computed gain and an eligible status, best gain-cost ratio first."""

    def __init__(self, graph: RrgGraph):
        self.graph = graph
        self.members: set[int] = set()

    def __len__(self):
        return len(self.members)

    def __contains__(self, node_id):
        return node_id in self.members

    def sync(self, node_id: int) -> None:
        node = self.graph.nodes[node_id]
        if node.gain is not None and node.gain >= 0 and node.status in ELIGIBLE:
            self.members.add(node_id)
        else:
            self.members.discard(node_id)

    def head(self):
        if not self.members:
            return None
        nodes = self.graph.nodes
        return min((nodes[i] for i in self.members), key=_rank).id

    def ordered(self) -> list[int]:
        nodes = self.graph.nodes
        return [n.id for n in sorted((nodes[i] for i in self.members), key=_rank)]


class GainWorkQueue:
    """Nodes awaiting evaluation, nearest to a reference robot position first."""

    def __init__(self, graph: RrgGraph, ref_xy=(0.0, 0.0)):
        self.graph = graph
        self.ref = (float(ref_xy[0]), float(ref_xy[1]))
        self._items: list[tuple[float, int]] = []
        self._ids: set[int] = set()

    def __len__(self):
        return len(self._items)

    def __contains__(self, node_id):
        return node_id in self._ids

    def _key(self, node_id):
        x, y = self.graph.nodes[node_id].xy
        return (math.hypot(x - self.ref[0], y - self.ref[1]), node_id)

    def push(self, node_id: int) -> bool:
        if node_id in self._ids:
            return False
        bisect.insort(self._items, self._key(node_id))
        self._ids.add(node_id)
        return True

    def pop(self) -> int:
        _, node_id = self._items.pop(0)
        self._ids.discard(node_id)
        return node_id

    def reorder(self, ref_xy) -> None:
        self.ref = (float(ref_xy[0]), float(ref_xy[1]))
        self._items = sorted(self._key(i) for i in self._ids)

    def ids(self) -> list[int]:
        return [i for _, i in self._items]


@dataclass
class ExitTimer:
    t_exit: float
    armed_at: float | None = None

    @property
    def armed(self) -> bool:
        return self.armed_at is not None

    def disarm(self) -> None:
        self.armed_at = None

    def update(self, idle: bool, now: float) -> None:
        if not idle:
            self.armed_at = None
        elif self.armed_at is None:
            self.armed_at = now

    def expired(self, now: float) -> bool:
        return self.armed_at is not None and now - self.armed_at >= self.t_exit - 1e-9


@dataclass
class GoalState:
    node: int | None = None
    outcome: str = "pending"


@dataclass
class PlannerParams:
    g_min: float = 0.05
    t_exit: float = 10.0
    r_max: float = 4.0
    h_fov: float = 2 * math.pi
    interrupt_margin: float = 0.0


@dataclass
class GainJob:
    node: int
    result: GainResult
    height: float | None


class GainWorker:
    """Evaluates queued nodes against the robot map at a fixed simulated cost per node.

    Finished evaluations are posted to ``mailbox`` in completion order; the
    tick loop drains it. The cost per node is what makes the drain schedule
    part of the run configuration.
    """

    def __init__(self, graph, work: GainWorkQueue, vmap: VoxelMap, pollset: PollPointSet,
                 h_fov: float, h_sensor: float, h_max: float, robot_height: float,
                 eval_time: float = 0.01):
        self.graph = graph
        self.work = work
        self.vmap = vmap
        self.pollset = pollset
        self.h_fov = h_fov
        self.h_sensor = h_sensor
        self.h_max = h_max
        self.robot_height = robot_height
        self.eval_time = eval_time
        self.budget = 0.0
        self.mailbox: deque[GainJob] = deque()
        self.evaluations = 0

    def evaluate(self, node_id: int) -> GainJob:
        node = self.graph.nodes[node_id]
        heights = [self.graph.nodes[v].position[2] for v, _ in self.graph.neighbors(node_id)]
        if node_id == 0:
            heights = []  # the root keeps the spawn height as its starting guess
        z = snap_to_ground(self.vmap, node.xy, heights, self.h_sensor, self.h_max,
                           self.robot_height, z_default=node.position[2])
        self.evaluations += 1
        if z is None:
            return GainJob(node_id, GainResult(-1, None), None)
        res = evaluate_gain(self.vmap, self.pollset, (node.xy[0], node.xy[1], z), self.h_fov)
        return GainJob(node_id, res, z)

    def advance(self, dt: float) -> None:
        self.budget += dt
        while self.work and self.budget >= self.eval_time - 1e-12:
            self.budget -= self.eval_time
            self.mailbox.append(self.evaluate(self.work.pop()))
        if not self.work:
            self.budget = min(self.budget, self.eval_time)


class Planner:
    def __init__(self, graph: RrgGraph, table: PathTable, pollset: PollPointSet, params: PlannerParams):
        self.graph = graph
        self.table = table
        self.pollset = pollset
        self.params = params
        self.g_max = pollset.g_max(params.h_fov)
        self.candidates = CandidateQueue(graph)
        self.work = GainWorkQueue(graph, graph.nodes[0].xy)
        self.timer = ExitTimer(params.t_exit)
        self.goal = GoalState()
        self.events: list[str] = []
        self.first_result_time: float | None = None
        self.first_goal_time: float | None = None

    # -- bookkeeping -------------------------------------------------------

    def log(self, tick: int, event: str, node: int, gcr: float | None) -> None:
        assert event in EVENTS
        g = 0.0 if gcr is None else gcr
        self.events.append(f"tick {tick} event {event} node {node} gcr {g:.6g}")

    def refresh(self, node_ids=None) -> None:
        """Recompute d_xn-dependent fields and queue membership."""
        ids = range(len(self.graph)) if node_ids is None else node_ids
        nodes = self.graph.nodes
        for i in ids:
            n = nodes[i]
            n.d_xn = self.table.dist[i]
            n.path_edge = self.table.pred[i]
            n.gcr = n.gain * cost(n.d_xn) if n.gain is not None and n.gain >= 0 else None
            self.candidates.sync(i)

    def set_table(self, table: PathTable, robot_xy) -> None:
        self.table = table
        self.refresh()
        self.work.reorder(robot_xy)

    def register_node(self, node_id: int) -> None:
        node = self.graph.nodes[node_id]
        if node.gain is None:
            node.status = NodeStatus.GAIN_PENDING
        self.work.push(node_id)
        if node.status is not NodeStatus.EXPLORED:
            self.timer.disarm()

    # -- gain results ------------------------------------------------------

    def apply(self, job: GainJob, tick: int, now: float) -> None:
        node = self.graph.nodes[job.node]
        res = job.result
        if self.first_result_time is None:
            self.first_result_time = now
        prev = NodeStatus.INITIAL if node.status is NodeStatus.GAIN_PENDING else node.status
        if res.gain >= 0:
            new = update_status(prev, res.gain, self.g_max, self.params.g_min,
                                node.best_yaw, res.best_yaw, self.pollset.delta_phi)
        else:
            new = NodeStatus.FAILED
        node.gain = res.gain
        node.best_yaw = res.best_yaw
        node.gain_stamp = tick
        if job.height is not None:
            node.position[2] = job.height
        if node.id == self.goal.node:
            if new is NodeStatus.INITIAL:
                new = NodeStatus.ACTIVE_GOAL
            else:
                # the goal lost its value while travelling; drop it
                node.status = new
                self.refresh([node.id])
                self.log(tick, "goal_aborted", node.id, node.gcr)
                self.goal = GoalState()
                return
        node.status = new
        self.refresh([node.id])

    def drain(self, mailbox: deque, tick: int, now: float) -> int:
        n = 0
        while mailbox:
            self.apply(mailbox.popleft(), tick, now)
            n += 1
        return n

    # -- goals -------------------------------------------------------------

    def select_nbv(self, tick: int, now: float = 0.0):
        head = self.candidates.head()
        if head is None:
            return None
        node = self.graph.nodes[head]
        node.status = NodeStatus.ACTIVE_GOAL
        self.goal = GoalState(head)
        if self.first_goal_time is None:
            self.first_goal_time = now
        self.log(tick, "goal_selected", head, node.gcr)
        return head

    def maybe_interrupt(self, tick: int, robot_xy, moved: bool, now: float = 0.0):
        """Switch to a strictly better candidate; returns the new goal or ``None``."""
        if self.goal.node is None:
            raise ProtocolError("no active goal to interrupt")
        head = self.candidates.head()
        if head is None or head == self.goal.node:
            return None
        current = self.graph.nodes[self.goal.node]
        if self.graph.nodes[head].gcr > current.gcr + self.params.interrupt_margin:
            self.on_goal_event("aborted", tick, robot_xy, moved)
            return self.select_nbv(tick, now)
        return None

    def on_goal_event(self, kind: str, tick: int, robot_xy, moved: bool) -> list[int]:
        """Close the active goal; returns the nodes queued for re-evaluation."""
        if self.goal.node is None:
            raise ProtocolError(f"goal {kind} without an active goal")
        node = self.graph.nodes[self.goal.node]
        status, event = {
            "reached": (NodeStatus.VISITED, "goal_reached"),
            "failed": (NodeStatus.FAILED, "goal_failed"),
            "aborted": (NodeStatus.INITIAL, "goal_aborted"),
        }[kind]
        node.status = status
        self.candidates.sync(node.id)
        self.log(tick, event, node.id, node.gcr)
        self.goal = GoalState(outcome=kind)
        if not moved:
            return []
        return self.recalculate_around(robot_xy, extra=node.id)

    def recalculate_around(self, robot_xy, extra: int | None = None) -> list[int]:
        radius = 2 * self.params.r_max
        ids = self.graph.index.within(robot_xy, radius)
        if extra is not None and extra not in ids:
            ids.append(extra)
        queued = []
        for i in ids:
            if self.graph.nodes[i].status in (NodeStatus.EXPLORED, NodeStatus.FAILED):
                continue
            if self.work.push(i):
                queued.append(i)
        return queued

    def check_termination(self, now: float) -> bool:
        idle = len(self.candidates) == 0 and self.goal.node is None
        self.timer.update(idle, now)
        return self.timer.expired(now)

    def verify(self) -> None:
        """Full consistency scan of the queue and goal invariants (debug aid)."""
        nodes = self.graph.nodes
        for i in self.candidates.members:
            n = nodes[i]
            assert n.gain is not None and n.gain >= 0, i
            assert n.status in ELIGIBLE, (i, n.status)
            assert n.d_xn == self.table.dist[i], i
            assert n.gcr == n.gain * cost(n.d_xn), i
        goals = [n.id for n in nodes if n.status is NodeStatus.ACTIVE_GOAL]
        assert len(goals) <= 1, goals
        if self.goal.node is not None:
            assert goals == [self.goal.node], (goals, self.goal.node)
        else:
            assert not goals, goals
