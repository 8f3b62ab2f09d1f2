"""Deterministic closed-loop exploration runs on a tick clock."""

from __future__ import annotations

import dataclasses
import math
import statistics
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from rnexplore.errors import ConfigError
from rnexplore.gain import build_pollset, wrap_angle
from rnexplore.path import PathTable, insert_node, nearest_node, rebuild, shortest_path
from rnexplore.planner import GainWorker, Planner, PlannerParams
from rnexplore.rrg import Mode, RrgGraph, expand, init_graph, sample_point, sample_point_local
from rnexplore.steer import RobotFootprint, check_disc
from rnexplore.world import (
    Cell, SensorModel, Tile, VoxelMap, derive_grid, load_environment_file, mapped_volume,
    reachable_free, simulate_scan,
)

VARIANTS = {
    "rne": (Mode.GRAPH, True),
    "rrg": (Mode.GRAPH, False),
    "rrt+ls": (Mode.TREE, True),
    "rrt": (Mode.TREE, False),
}

METRICS_HEADER = "tick,sim_time_s,path_length_m,mapped_volume_m3,nodes,edges"


@dataclass
class ScenarioConfig:
    environment: str = ""
    spawn_x: float = 0.0
    spawn_y: float = 0.0
    spawn_yaw: float = 0.0
    # sensor
    h_fov_deg: float = 360.0
    v_min_deg: float = -67.5
    v_max_deg: float = 67.5
    r_min: float = 0.3
    r_max: float = 4.0
    h_sensor: float = 0.5
    n_azimuth: int = 360
    n_elevation: int = 541
    # robot
    r_robot: float = 0.35
    w_robot: float = 0.5
    robot_height: float = 0.5
    step_tolerance: float = 0.15
    linear_speed: float = 1.0
    angular_speed: float = 1.5
    # planner
    d_min: float = 1.0
    d_max: float = 2.0
    r_ls: float = 5.0
    delta_r: float = 0.1
    delta_theta_deg: float = 10.0
    delta_phi_deg: float = 10.0
    g_min: float = 0.05
    t_exit: float = 10.0
    h_max: float = 0.3
    interrupt_margin: float = 0.0
    # run
    mode: str = "graph"
    local_sampling: bool = True
    seed: int = 1
    tick: float = 0.02
    scan_interval: float = 1.0
    gain_eval_time: float = 0.01
    time_limit: float = 1800.0

    _POSITIVE = (
        "r_max", "h_sensor", "n_azimuth", "n_elevation", "r_robot", "w_robot", "robot_height",
        "linear_speed", "angular_speed", "d_min", "d_max", "r_ls", "delta_r", "delta_theta_deg",
        "delta_phi_deg", "t_exit", "h_max", "tick", "scan_interval", "gain_eval_time", "time_limit",
    )

    @classmethod
    def from_file(cls, path, **overrides) -> "ScenarioConfig":
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping of parameters")
        data.update({k: v for k, v in overrides.items() if v is not None})
        if "environment" in data and not Path(data["environment"]).is_absolute():
            data["environment"] = str(path.parent / data["environment"])
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        names = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(names))
        if unknown:
            raise ConfigError(f"unknown scenario keys: {', '.join(unknown)}")
        kwargs = {}
        for k, v in data.items():
            typ = type(getattr(cls, k)) if hasattr(cls, k) else str
            try:
                if typ is bool and isinstance(v, str):
                    v = {"on": True, "true": True, "off": False, "false": False}[v.lower()]
                kwargs[k] = typ(v)
            except (KeyError, TypeError, ValueError):
                raise ConfigError(f"bad value for {k}: {v!r}") from None
        cfg = cls(**kwargs)
        cfg.check()
        return cfg

    def check(self) -> None:
        for name in self._POSITIVE:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.mode not in ("graph", "tree"):
            raise ConfigError(f"mode must be graph or tree, not {self.mode!r}")
        if self.d_min > self.d_max:
            raise ConfigError("d_min must not exceed d_max")
        if not 0 <= self.g_min <= 1:
            raise ConfigError("g_min must lie in [0, 1]")
        self.footprint()
        self.sensor()

    def footprint(self) -> RobotFootprint:
        return RobotFootprint(self.r_robot, self.w_robot)

    def sensor(self) -> SensorModel:
        return SensorModel(
            math.radians(self.h_fov_deg), math.radians(self.v_min_deg), math.radians(self.v_max_deg),
            self.r_min, self.r_max, self.h_sensor, self.n_azimuth, self.n_elevation,
        )

    def with_variant(self, name: str) -> "ScenarioConfig":
        mode, ls = VARIANTS[name]
        return dataclasses.replace(self, mode=mode.value, local_sampling=ls)


@dataclass
class RobotState:
    x: float
    y: float
    z: float
    yaw: float

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def pose(self) -> tuple[float, float, float, float]:
        return self.x, self.y, self.z, self.yaw


@dataclass
class RunMetrics:
    ticks: list[int] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    path_length: list[float] = field(default_factory=list)
    volume: list[float] = field(default_factory=list)
    nodes: list[int] = field(default_factory=list)
    edges: list[int] = field(default_factory=list)

    def append(self, tick, t, length, volume, nodes, edges):
        self.ticks.append(tick)
        self.times.append(t)
        self.path_length.append(length)
        self.volume.append(volume)
        self.nodes.append(nodes)
        self.edges.append(edges)

    @property
    def duration(self) -> float:
        return self.times[-1] if self.times else 0.0

    @property
    def final_path_length(self) -> float:
        return self.path_length[-1] if self.path_length else 0.0

    @property
    def final_volume(self) -> float:
        return self.volume[-1] if self.volume else 0.0

    def to_csv(self) -> str:
        rows = [METRICS_HEADER]
        for row in zip(self.ticks, self.times, self.path_length, self.volume, self.nodes, self.edges):
            rows.append(f"{row[0]},{row[1]:.3f},{row[2]:.6f},{row[3]:.6f},{row[4]},{row[5]}")
        return "\n".join(rows) + "\n"


class Simulation:
    """One exploration run. ``step`` advances the world by a single tick."""

    def __init__(self, config: ScenarioConfig, truth: VoxelMap | None = None):
        config.check()
        self.config = config
        self.truth = truth if truth is not None else load_environment_file(config.environment)
        self.sensor = config.sensor()
        self.footprint = config.footprint()
        self.truth_grid = derive_grid(self.truth, config.robot_height, config.step_tolerance)
        problems = spawn_problems(config, self.truth, self.truth_grid)
        if problems:
            raise ConfigError("; ".join(problems))

        self.rng = np.random.default_rng(config.seed)
        self.dt = config.tick
        self.robot_map = VoxelMap.unknown_like(self.truth)
        ground = self._truth_ground(config.spawn_x, config.spawn_y)
        self.robot = RobotState(config.spawn_x, config.spawn_y, ground + config.h_sensor, config.spawn_yaw)

        self.graph: RrgGraph = init_graph(
            (self.robot.x, self.robot.y, self.robot.z),
            d_min=config.d_min, d_max=config.d_max, mode=Mode(config.mode),
            local_sampling=config.local_sampling, r_ls=config.r_ls, footprint=self.footprint,
        )
        self.pollset = build_pollset(
            self.sensor, config.delta_r, math.radians(config.delta_theta_deg), math.radians(config.delta_phi_deg)
        )
        params = PlannerParams(config.g_min, config.t_exit, config.r_max, self.sensor.h_fov, config.interrupt_margin)
        self.planner = Planner(self.graph, rebuild(self.graph, 0), self.pollset, params)
        self.planner.refresh()
        self.worker = GainWorker(
            self.graph, self.planner.work, self.robot_map, self.pollset, self.sensor.h_fov,
            config.h_sensor, config.h_max, config.robot_height, config.gain_eval_time,
        )

        self.tick = 0
        self.time = 0.0
        self.path_length = 0.0
        self.route: deque[int] = deque()
        self.at_node: int | None = 0
        self.edge_from: int | None = 0
        self.moved = False
        self.last_scan = 0.0
        self.finished = False
        self.reason: str | None = None
        self.metrics = RunMetrics()

        self._scan()
        self.planner.register_node(0)
        self.metrics.append(0, 0.0, 0.0, self._volume, len(self.graph), len(self.graph.edges))

    # -- helpers -----------------------------------------------------------

    @property
    def table(self) -> PathTable:
        return self.planner.table

    @property
    def events(self) -> list[str]:
        return self.planner.events

    def _truth_ground(self, x, y) -> float:
        ix, iy = self.truth_grid.tile_of((x, y))
        g = self.truth_grid.ground[ix, iy]
        if np.isnan(g):
            raise ConfigError(f"no ground under ({x:.2f}, {y:.2f})")
        return float(g)

    def _scan(self) -> None:
        simulate_scan(self.truth, self.robot_map, self.robot.pose, self.sensor)
        self._clear_footprint()
        self.last_scan = self.time
        self.grid = derive_grid(self.robot_map, self.config.robot_height, self.config.step_tolerance)
        self._volume = mapped_volume(self.robot_map)

    def _clear_footprint(self) -> None:
        """The robot knows the space its own body occupies: copy the truth under its disc."""
        e, r = self.truth.edge, self.config.r_robot
        ox, oy, oz = self.truth.origin
        nx, ny, nz = self.truth.dims
        i0 = max(0, math.floor((self.robot.x - r - ox) / e))
        i1 = min(nx, math.floor((self.robot.x + r - ox) / e) + 1)
        j0 = max(0, math.floor((self.robot.y - r - oy) / e))
        j1 = min(ny, math.floor((self.robot.y + r - oy) / e) + 1)
        ground = self.robot.z - self.config.h_sensor
        k0 = max(0, math.floor((ground - oz) / e + 1e-9) - 1)
        k1 = min(nz, k0 + 1 + math.ceil(self.config.robot_height / e - 1e-9) + 1)
        xs = ox + (np.arange(i0, i1) + 0.5) * e
        ys = oy + (np.arange(j0, j1) + 0.5) * e
        inside = (xs[:, None] - self.robot.x) ** 2 + (ys[None, :] - self.robot.y) ** 2 <= r * r
        block = self.robot_map.cells[i0:i1, j0:j1, k0:k1]
        truth = self.truth.cells[i0:i1, j0:j1, k0:k1]
        mask = inside[:, :, None] & (block == Cell.UNKNOWN)
        block[mask] = truth[mask]

    def _tile_ok(self, node_id: int) -> bool:
        return self.grid.state(*self.grid.tile_of(self.graph.nodes[node_id].xy)) == Tile.TRAVERSABLE

    def _plan_route(self, goal: int) -> None:
        if self.at_node is not None:
            start = self.at_node
        elif self.route and self._tile_ok(self.route[0]):
            start = self.route[0]
        else:
            start = self.edge_from
        if start == self.table.anchor:
            path = self.table.path_to(self.graph, goal)
        else:
            path = shortest_path(self.graph, start, goal)
        if self.at_node is not None:
            path = path[1:]
        self.route = deque(path)

    # -- tick phases -------------------------------------------------------

    def _move(self) -> bool:
        """Turn-then-drive along the route; returns True if a scan happened."""
        c = self.config
        if not self.route:
            goal = self.graph.nodes[self.planner.goal.node]
            if not self.sensor.full_circle and goal.best_yaw is not None:
                facing = wrap_angle(goal.best_yaw + (self.pollset.window_bins(self.sensor.h_fov) - 1)
                                    * self.pollset.delta_phi / 2)
                if self._turn_towards(facing):
                    return False
            self._scan()
            self.planner.on_goal_event("reached", self.tick, self.robot.xy, self.moved)
            self.moved = False
            return True

        target = self.route[0]
        if not self._tile_ok(target):
            self.planner.on_goal_event("failed", self.tick, self.robot.xy, self.moved)
            self.moved = False
            self.route.clear()
            return False
        tx, ty = self.graph.nodes[target].xy
        dist = math.hypot(tx - self.robot.x, ty - self.robot.y)
        if dist > 1e-9 and self._turn_towards(math.atan2(ty - self.robot.y, tx - self.robot.x)):
            return False
        if self.at_node is not None:
            self.edge_from = self.at_node
            self.at_node = None
        step = c.linear_speed * self.dt
        if dist <= step + 1e-9:
            self.robot.x, self.robot.y = float(tx), float(ty)
            self.path_length += dist
            self.at_node = target
            self.route.popleft()
            arrived = True
        else:
            self.robot.x += (tx - self.robot.x) * step / dist
            self.robot.y += (ty - self.robot.y) * step / dist
            self.path_length += step
            arrived = False
        self.moved = True
        self.robot.z = self._truth_ground(self.robot.x, self.robot.y) + c.h_sensor
        if arrived:
            self._scan()
        return arrived

    def _turn_towards(self, heading: float) -> bool:
        """Rotate for this tick if not yet facing ``heading``; True if the tick was spent turning."""
        err = wrap_angle(heading - self.robot.yaw)
        if abs(err) <= 1e-9:
            return False
        turn = min(abs(err), self.config.angular_speed * self.dt)
        self.robot.yaw = wrap_angle(self.robot.yaw + math.copysign(turn, err))
        self.moved = True
        return True

    def _expand(self, candidate) -> None:
        if candidate is None:
            return
        res = expand(self.graph, candidate, self.grid)
        if not res:
            return
        changed = insert_node(self.table, self.graph, res.node)
        self.planner.refresh(changed)
        self.planner.register_node(res.node)

    def _select_goal(self) -> None:
        p = self.planner
        if p.goal.node is None:
            goal = p.select_nbv(self.tick, self.time)
        else:
            goal = p.maybe_interrupt(self.tick, self.robot.xy, self.moved, self.time)
            if goal is not None:
                self.moved = False
        if goal is not None:
            self._plan_route(goal)

    def step(self) -> None:
        if self.finished:
            raise RuntimeError("run already finished")
        self.tick += 1
        self.time = self.tick * self.dt
        c = self.config

        if self.planner.goal.node is not None:
            self._move()
        if self.time - self.last_scan >= c.scan_interval - 1e-9:
            self._scan()

        self.worker.advance(self.dt)
        self.planner.drain(self.worker.mailbox, self.tick, self.time)
        self._select_goal()

        self._expand(sample_point(self.grid, self.rng))
        if self.graph.local_sampling:
            self._expand(sample_point_local(self.grid, self.robot.xy, self.graph.r_ls, self.rng))

        anchor = nearest_node(self.graph, self.robot.xy)
        if anchor != self.table.anchor:
            self.planner.set_table(rebuild(self.graph, anchor), self.robot.xy)

        if self.planner.check_termination(self.time):
            self.finished, self.reason = True, "terminated"
        elif self.time >= c.time_limit - 1e-9:
            self.finished, self.reason = True, "time_limit"
        if self.finished:
            self.planner.log(self.tick, "terminated", -1, None)
        self.metrics.append(self.tick, self.time, self.path_length, self._volume,
                            len(self.graph), len(self.graph.edges))

    def run(self) -> "RunResult":
        while not self.finished:
            self.step()
        return RunResult(self.config, self.reason, self.metrics, self.events, self.robot_map, self.graph,
                         self.coverage())

    def coverage(self) -> float:
        """Fraction of truth-free voxels reachable from the spawn that the robot has observed."""
        reach = reachable_free(self.truth, self.robot_start())
        total = int(reach.sum())
        if total == 0:
            return 1.0
        seen = np.count_nonzero(reach & (self.robot_map.cells == Cell.FREE))
        return seen / total

    def robot_start(self):
        c = self.config
        return (c.spawn_x, c.spawn_y, self._truth_ground(c.spawn_x, c.spawn_y) + self.truth.edge / 2)


@dataclass
class RunResult:
    config: ScenarioConfig
    reason: str
    metrics: RunMetrics
    events: list[str]
    robot_map: VoxelMap
    graph: RrgGraph
    coverage: float

    @property
    def natural(self) -> bool:
        return self.reason == "terminated"


def run_to_completion(config: ScenarioConfig, truth: VoxelMap | None = None) -> RunResult:
    return Simulation(config, truth).run()


def spawn_problems(config: ScenarioConfig, truth: VoxelMap, truth_grid=None) -> list[str]:
    if truth_grid is None:
        truth_grid = derive_grid(truth, config.robot_height, config.step_tolerance)
    xy = (config.spawn_x, config.spawn_y)
    if not truth_grid.contains(xy):
        return ["spawn outside the environment"]
    if truth_grid.state(*truth_grid.tile_of(xy)) != Tile.TRAVERSABLE:
        return ["spawn not traversable"]
    if not check_disc(truth_grid, xy, config.r_robot):
        return ["spawn footprint not traversable"]
    return []


SUMMARY_COLUMNS = (
    "variant", "runs", "duration_mu_s", "duration_sigma_s", "path_length_mu_m", "path_length_sigma_m",
    "mapped_volume_mu_m3", "mapped_volume_sigma_m3", "duration_rel", "path_length_rel", "mapped_volume_rel",
)


def compare_variants(tables: dict[str, list[tuple[float, float, float]]]) -> list[dict]:
    """Per-variant mean and population std of (duration, path length, mapped volume).

    Relative columns compare each variant's means with the first variant's.
    """
    rows = []
    ref = None
    for name, runs in tables.items():
        if len(runs) < 2:
            raise ValueError(f"variant {name} needs at least two runs")
        cols = list(zip(*runs))
        mu = [statistics.fmean(c) for c in cols]
        sigma = [statistics.pstdev(c) for c in cols]
        if ref is None:
            ref = mu
        rel = [(m - r) / r if r else 0.0 for m, r in zip(mu, ref)]
        rows.append({
            "variant": name, "runs": len(runs),
            "duration_mu_s": mu[0], "duration_sigma_s": sigma[0],
            "path_length_mu_m": mu[1], "path_length_sigma_m": sigma[1],
            "mapped_volume_mu_m3": mu[2], "mapped_volume_sigma_m3": sigma[2],
            "duration_rel": rel[0], "path_length_rel": rel[1], "mapped_volume_rel": rel[2],
        })
    return rows


def format_summary(rows: list[dict]) -> str:
    out = ["# sigma = population standard deviation; *_rel = relative change of the mean vs. the first row",
           ",".join(SUMMARY_COLUMNS)]
    for r in rows:
        vals = []
        for c in SUMMARY_COLUMNS:
            v = r[c]
            vals.append(f"{v:.4f}" if isinstance(v, float) else str(v))
        out.append(",".join(vals))
    return "\n".join(out) + "\n"
