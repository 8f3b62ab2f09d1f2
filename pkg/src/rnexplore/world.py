"""Voxel worlds, the derived traversability grid and the simulated range sensor.

Cell states are stored as ``uint8`` codes in dense numpy arrays indexed
``[x, y, z]`` (voxels) or ``[x, y]`` (tiles).
"""

from __future__ import annotations

import gzip
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from rnexplore import _kernels
from rnexplore.errors import ConfigError, ParseError

HEADER = "voxelworld"
_CHARS = {".": 1, "#": 2, "?": 0}


class Cell(IntEnum):
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


class Tile(IntEnum):
    UNKNOWN = 0
    TRAVERSABLE = 1
    OBSTACLE = 2


@dataclass
class VoxelMap:
    origin: np.ndarray
    edge: float
    cells: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        self.edge = float(self.edge)
        if self.edge <= 0:
            raise ConfigError("voxel edge length must be positive")
        self.cells = np.ascontiguousarray(self.cells, dtype=np.uint8)

    @classmethod
    def unknown(cls, dims, edge, origin=(0.0, 0.0, 0.0)) -> "VoxelMap":
        return cls(origin, edge, np.zeros(tuple(dims), dtype=np.uint8))

    @classmethod
    def unknown_like(cls, other: "VoxelMap") -> "VoxelMap":
        return cls(other.origin.copy(), other.edge, np.zeros_like(other.cells))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.cells.shape)

    @property
    def extent(self) -> np.ndarray:
        return np.array(self.dims, dtype=float) * self.edge

    def copy(self) -> "VoxelMap":
        return VoxelMap(self.origin.copy(), self.edge, self.cells.copy())

    def index_of(self, point):
        """Voxel index containing ``point``, or ``None`` outside the map."""
        idx = np.floor((np.asarray(point, dtype=float) - self.origin) / self.edge).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.cells.shape):
            return None
        return tuple(int(i) for i in idx)

    def state_at(self, point) -> Cell:
        idx = self.index_of(point)
        if idx is None:
            return Cell.UNKNOWN
        return Cell(int(self.cells[idx]))

    def center_of(self, idx) -> np.ndarray:
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.edge

    def count(self, state: Cell) -> int:
        return int(np.count_nonzero(self.cells == state))


@dataclass
class GridMap2D:
    origin: np.ndarray
    resolution: float
    cells: np.ndarray
    ground: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(2)
        self.cells = np.asarray(self.cells, dtype=np.uint8)
        if self.ground is None:
            self.ground = np.full(self.cells.shape, np.nan)

    @classmethod
    def filled(cls, dims, resolution, state=Tile.TRAVERSABLE, origin=(0.0, 0.0)) -> "GridMap2D":
        return cls(origin, resolution, np.full(tuple(dims), int(state), dtype=np.uint8))

    @property
    def dims(self) -> tuple[int, int]:
        return tuple(int(d) for d in self.cells.shape)

    def tile_of(self, xy) -> tuple[int, int]:
        """Tile index containing ``xy``; may lie outside the grid."""
        ix = math.floor((xy[0] - self.origin[0]) / self.resolution)
        iy = math.floor((xy[1] - self.origin[1]) / self.resolution)
        return ix, iy

    def in_bounds(self, ix, iy) -> bool:
        return 0 <= ix < self.cells.shape[0] and 0 <= iy < self.cells.shape[1]

    def contains(self, xy) -> bool:
        return self.in_bounds(*self.tile_of(xy))

    def center_of(self, ix, iy) -> np.ndarray:
        return self.origin + (np.array([ix, iy], dtype=float) + 0.5) * self.resolution

    def state(self, ix, iy) -> Tile:
        if not self.in_bounds(ix, iy):
            return Tile.UNKNOWN
        return Tile(int(self.cells[ix, iy]))

    def known_bounds(self):
        """Bounding rectangle ``(xmin, ymin, xmax, ymax)`` of all known tiles, or ``None``."""
        known = self.cells != Tile.UNKNOWN
        if not known.any():
            return None
        xs = np.flatnonzero(known.any(axis=1))
        ys = np.flatnonzero(known.any(axis=0))
        lo = self.origin + np.array([xs[0], ys[0]]) * self.resolution
        hi = self.origin + np.array([xs[-1] + 1, ys[-1] + 1]) * self.resolution
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])


@dataclass(frozen=True)
class SensorModel:
    """Range sensor mounted ``h_sensor`` above the ground; angles in radians."""

    h_fov: float = 2 * math.pi
    v_min: float = -math.radians(67.5)
    v_max: float = math.radians(67.5)
    r_min: float = 0.3
    r_max: float = 4.0
    h_sensor: float = 0.5
    n_azimuth: int = 360
    n_elevation: int = 541

    def __post_init__(self):
        if not 0 < self.h_fov <= 2 * math.pi + 1e-12:
            raise ConfigError("horizontal FoV must lie in (0, 2*pi]")
        if not self.v_min < self.v_max:
            raise ConfigError("vertical FoV needs v_min < v_max")
        if not self.v_max - self.v_min <= 2 * math.pi + 1e-12:
            raise ConfigError("vertical FoV must lie in (0, 2*pi]")
        if not 0 <= self.r_min < self.r_max:
            raise ConfigError("sensor range needs 0 <= r_min < r_max")
        if self.n_azimuth < 1 or self.n_elevation < 1:
            raise ConfigError("sensor needs at least one ray per axis")

    @property
    def full_circle(self) -> bool:
        return self.h_fov >= 2 * math.pi - 1e-9

    def ray_directions(self, yaw: float) -> np.ndarray:
        """Unit vectors of the scan lattice for a sensor facing ``yaw``."""
        if self.full_circle:
            az = yaw + np.arange(self.n_azimuth) * (2 * math.pi / self.n_azimuth)
        elif self.n_azimuth == 1:
            az = np.array([yaw])
        else:
            az = yaw + np.linspace(-self.h_fov / 2, self.h_fov / 2, self.n_azimuth)
        if self.n_elevation == 1:
            el = np.array([(self.v_min + self.v_max) / 2])
        else:
            el = np.linspace(self.v_min, self.v_max, self.n_elevation)
        a, e = np.meshgrid(az, el, indexing="ij")
        a, e = a.ravel(), e.ravel()
        ce = np.cos(e)
        return np.ascontiguousarray(np.stack([ce * np.cos(a), ce * np.sin(a), np.sin(e)], axis=1))


def load_environment(text: str) -> VoxelMap:
    """Parse a layered-ASCII world into a fully known ground-truth map."""
    return parse_voxelmap(text, allow_unknown=False)


def load_environment_file(path) -> VoxelMap:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rt", encoding="ascii") as fh:
            text = fh.read()
    else:
        text = path.read_text(encoding="ascii")
    return load_environment(text)


def parse_voxelmap(text: str, allow_unknown: bool = True) -> VoxelMap:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty environment text", line=1)
    head = lines[0].split()
    if len(head) != 5 or head[0] != HEADER:
        raise ParseError(f"expected '{HEADER} <nx> <ny> <nz> <e_V>'", line=1)
    try:
        nx, ny, nz = (int(v) for v in head[1:4])
        edge = float(head[4])
    except ValueError:
        raise ParseError("header dimensions must be integers and e_V a number", line=1) from None
    if min(nx, ny, nz) < 1 or not edge > 0:
        raise ParseError("header dimensions and e_V must be positive", line=1)

    allowed = dict(_CHARS)
    if not allow_unknown:
        del allowed["?"]
    lut = np.full(256, 255, dtype=np.uint8)
    for ch, code in allowed.items():
        lut[ord(ch)] = code
    cells = np.zeros((nx, ny, nz), dtype=np.uint8)
    lineno = 1
    pos = 1
    for z in range(nz):
        if z > 0:
            if pos >= len(lines) or lines[pos].strip() != "--":
                raise ParseError(f"expected '--' before layer {z}", line=pos + 1)
            pos += 1
        for y in range(ny):
            lineno = pos + 1
            if pos >= len(lines):
                raise ParseError(f"layer {z} has fewer than {ny} rows", line=lineno)
            row = lines[pos].rstrip("\r")
            if row.strip() == "--":
                raise ParseError(f"layer {z} has {y} rows, expected {ny}", line=lineno)
            if len(row) != nx:
                raise ParseError(f"row has {len(row)} cells, expected {nx}", line=lineno)
            codes = lut[np.frombuffer(row.encode("latin-1", "replace"), dtype=np.uint8)]
            if (codes == 255).any():
                ch = row[int(np.argmax(codes == 255))]
                raise ParseError(f"illegal cell character {ch!r}", line=lineno)
            cells[:, y, z] = codes
            pos += 1
    rest = [i for i in range(pos, len(lines)) if lines[i].strip()]
    if rest:
        raise ParseError("unexpected content after the last layer", line=rest[0] + 1)
    return VoxelMap((0.0, 0.0, 0.0), edge, cells)


def format_voxelmap(vmap: VoxelMap) -> str:
    """Serialize a map; unknown voxels are written as ``?``."""
    nx, ny, nz = vmap.dims
    lut = np.array(["?", ".", "#"])
    out = [f"{HEADER} {nx} {ny} {nz} {vmap.edge:g}"]
    for z in range(nz):
        if z > 0:
            out.append("--")
        chars = lut[vmap.cells[:, :, z]]
        out.extend("".join(chars[:, y]) for y in range(ny))
    return "\n".join(out) + "\n"


def simulate_scan(truth: VoxelMap, robot_map: VoxelMap, pose, sensor: SensorModel) -> VoxelMap:
    """Integrate one scan taken at ``pose = (x, y, z, yaw)`` into ``robot_map`` in place.

    ``z`` is the sensor height in world coordinates. Rays are marched at half
    the voxel edge; everything before the first occupied truth voxel becomes
    free and the hit voxel becomes occupied. Known voxels never revert.
    """
    if truth.cells.shape != robot_map.cells.shape or truth.edge != robot_map.edge:
        raise ConfigError("truth and robot map must share geometry")
    x, y, z, yaw = (float(v) for v in pose)
    dirs = sensor.ray_directions(yaw)
    _kernels.march_rays(
        truth.cells, robot_map.cells, truth.origin, truth.edge,
        np.array([x, y, z]), dirs, sensor.r_min, sensor.r_max, truth.edge / 2,
    )
    return robot_map


def _band_voxels(robot_height: float, edge: float) -> int:
    return max(1, math.ceil(robot_height / edge - 1e-9))


def ground_levels(vmap: VoxelMap, robot_height: float):
    """Per column: index of the highest standable voxel (-1 if none) and a blocked flag.

    A voxel is standable when it is occupied and the ``robot_height`` band
    above it is entirely observed free. A column is blocked when some
    occupied voxel has another occupied voxel inside its band (stacked
    occupancy such as a wall); a lone slab like a ceiling does not block.
    """
    cells = vmap.cells
    nz = cells.shape[2]
    hb = _band_voxels(robot_height, vmap.edge)
    occ = cells == Cell.OCCUPIED
    free = cells == Cell.FREE

    # run[..., z]: consecutive free voxels starting at z going up
    run = np.zeros(cells.shape, dtype=np.int32)
    run[..., nz - 1] = free[..., nz - 1]
    for z in range(nz - 2, -1, -1):
        run[..., z] = (run[..., z + 1] + 1) * free[..., z]
    occ_cum = np.concatenate(
        [np.zeros(cells.shape[:2] + (1,), dtype=np.int32), np.cumsum(occ, axis=2, dtype=np.int32)], axis=2
    )

    valid = np.zeros(cells.shape, dtype=bool)
    zmax = nz - hb  # standable voxels need z + hb <= nz - 1
    if zmax > 0:
        valid[..., :zmax] = occ[..., :zmax] & (run[..., 1 : zmax + 1] >= hb)
    # occupied voxels inside the band above (clipped at the map top)
    top = np.minimum(np.arange(nz) + hb + 1, nz)
    intruded = (occ_cum[..., top] - occ_cum[..., 1 : nz + 1]) > 0
    blocked = occ & intruded
    has = valid.any(axis=2)
    gz = np.where(has, nz - 1 - np.argmax(valid[..., ::-1], axis=2), -1)
    return gz, blocked.any(axis=2)


def derive_grid(robot_map: VoxelMap, robot_height: float, step_tolerance: float) -> GridMap2D:
    """Traversability grid at the voxel resolution.

    Traversable: standable ground exists and no 4-neighbour's ground differs
    by more than ``step_tolerance``. Obstacle: a step violation, or no ground
    but a blocked column. Unknown otherwise.
    """
    gz, blocked = ground_levels(robot_map, robot_height)
    has = gz >= 0
    ground = np.where(has, robot_map.origin[2] + (gz + 1) * robot_map.edge, np.nan)

    step = np.zeros(gz.shape, dtype=bool)
    for axis in (0, 1):
        a = ground
        diff = np.abs(np.diff(a, axis=axis))
        bad = np.nan_to_num(diff, nan=0.0) > step_tolerance + 1e-9
        lo = [slice(None), slice(None)]
        hi = [slice(None), slice(None)]
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        step[tuple(lo)] |= bad
        step[tuple(hi)] |= bad

    cells = np.full(gz.shape, Tile.UNKNOWN, dtype=np.uint8)
    cells[has] = Tile.TRAVERSABLE
    cells[has & step] = Tile.OBSTACLE
    cells[~has & blocked] = Tile.OBSTACLE
    return GridMap2D(robot_map.origin[:2].copy(), robot_map.edge, cells, ground)


def mapped_volume(robot_map: VoxelMap) -> float:
    return int(np.count_nonzero(robot_map.cells)) * robot_map.edge ** 3


def reachable_free(truth: VoxelMap, start) -> np.ndarray:
    """Boolean mask of truth-free voxels 6-connected to the voxel containing ``start``."""
    from scipy import ndimage

    free = truth.cells == Cell.FREE
    labels, _ = ndimage.label(free)
    idx = truth.index_of(start)
    if idx is None or labels[idx] == 0:
        return np.zeros_like(free)
    return labels == labels[idx]
