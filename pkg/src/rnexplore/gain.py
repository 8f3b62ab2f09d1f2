"""Sparse ray polling: expected new-voxel counts at graph nodes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rnexplore.errors import ConfigError
from rnexplore.rrg import NodeStatus
from rnexplore.world import Cell, SensorModel, VoxelMap, _band_voxels

_TOL = 1e-9
_OUTSIDE = 3


def index_range(lo: float, hi: float, step: float) -> range:
    """Integers ``i`` with ``lo / step <= i <= hi / step`` (tolerant to float round-off)."""
    return range(math.ceil(lo / step - _TOL), math.floor(hi / step + _TOL) + 1)


@dataclass(frozen=True)
class PollPointSet:
    delta_r: float
    delta_theta: float
    delta_phi: float
    i_range: range
    j_range: range
    n_k: int
    offsets: np.ndarray  # (n_k, n_j, n_i, 3), rays ordered by ascending range

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.n_k, len(self.j_range), len(self.i_range)

    def __len__(self):
        return self.n_k * len(self.j_range) * len(self.i_range)

    @property
    def ranges(self) -> np.ndarray:
        return np.array(self.i_range) * self.delta_r

    @property
    def elevations(self) -> np.ndarray:
        return np.array(self.j_range) * self.delta_theta

    @property
    def azimuths(self) -> np.ndarray:
        return np.arange(self.n_k) * self.delta_phi

    def window_bins(self, h_fov: float) -> int:
        return min(self.n_k, max(1, round(h_fov / self.delta_phi)))

    def g_max(self, h_fov: float) -> int:
        """Poll points inside one horizontal-FoV window."""
        return self.window_bins(h_fov) * len(self.j_range) * len(self.i_range)


def build_pollset(sensor: SensorModel, delta_r: float, delta_theta: float, delta_phi: float) -> PollPointSet:
    if min(delta_r, delta_theta, delta_phi) <= 0:
        raise ConfigError("poll step sizes must be positive")
    i_range = index_range(sensor.r_min, sensor.r_max, delta_r)
    j_range = index_range(sensor.v_min, sensor.v_max, delta_theta)
    n_k = math.ceil(2 * math.pi / delta_phi - _TOL)
    if len(i_range) == 0 or len(j_range) == 0 or n_k == 0:
        raise ConfigError("poll step sizes leave an empty bin range")
    r = np.array(i_range) * delta_r
    th = np.array(j_range) * delta_theta
    ph = np.arange(n_k) * delta_phi
    P, T, R = np.meshgrid(ph, th, r, indexing="ij")
    offsets = np.stack([R * np.cos(T) * np.cos(P), R * np.cos(T) * np.sin(P), R * np.sin(T)], axis=-1)
    return PollPointSet(delta_r, delta_theta, delta_phi, i_range, j_range, n_k, offsets)


@dataclass(frozen=True)
class GainResult:
    gain: int
    best_yaw: float | None
    bin_gains: np.ndarray | None = None
    window: int = 1
    delta_phi: float = 0.0

    @property
    def facing_yaw(self) -> float | None:
        """Centre of the best window, where the sensor should point."""
        if self.best_yaw is None:
            return None
        return wrap_angle(self.best_yaw + (self.window - 1) * self.delta_phi / 2)


UNREACHABLE = GainResult(-1, None)


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def _standable(col: np.ndarray, z: int, hb: int) -> bool:
    if z + hb >= col.size or col[z] != Cell.OCCUPIED:
        return False
    return bool(np.all(col[z + 1 : z + 1 + hb] == Cell.FREE))


def snap_to_ground(
    vmap: VoxelMap,
    xy,
    neighbor_heights,
    h_sensor: float,
    h_max: float,
    robot_height: float,
    z_default: float | None = None,
) -> float | None:
    """Sensor height above the local ground at ``xy``, or ``None`` when unreachable.

    The search starts at the ground level implied by the mean neighbour
    height and polls the column downwards, then upwards, accepting only
    results within ``h_max`` of that starting height.
    """
    heights = list(neighbor_heights)
    if heights:
        z_init = float(np.mean(heights))
    elif z_default is not None:
        z_init = float(z_default)
    else:
        raise ValueError("need neighbour heights or a default height")
    idx = vmap.index_of((xy[0], xy[1], vmap.origin[2]))
    if idx is None:
        return None
    col = vmap.cells[idx[0], idx[1], :]
    hb = _band_voxels(robot_height, vmap.edge)
    e, oz = vmap.edge, vmap.origin[2]
    expected = z_init - h_sensor
    lo, hi = expected - h_max - _TOL, expected + h_max + _TOL

    def surface(z):
        return oz + (z + 1) * e

    z0 = math.floor((expected - oz) / e + _TOL) - 1  # voxel whose top face is at or below expected
    order = list(range(min(z0, col.size - 1), -1, -1)) + list(range(max(z0 + 1, 0), col.size))
    for z in order:
        s = surface(z)
        if not lo <= s <= hi:
            continue
        if _standable(col, z, hb):
            return s + h_sensor
    return None


def evaluate_gain(vmap: VoxelMap, pollset: PollPointSet, position, h_fov: float) -> GainResult:
    """Count unknown poll points seen from ``position`` inside the best yaw window.

    Each ray is walked outwards; an occupied poll (or leaving the map) ends
    the ray. Poll points are counted, not deduplicated per voxel.
    """
    pts = pollset.offsets + np.asarray(position, dtype=float)
    idx = np.floor((pts - vmap.origin) / vmap.edge).astype(np.intp)
    dims = np.array(vmap.cells.shape)
    inside = np.all((idx >= 0) & (idx < dims), axis=-1)
    state = np.full(inside.shape, _OUTSIDE, dtype=np.uint8)
    ii = idx[inside]
    state[inside] = vmap.cells[ii[:, 0], ii[:, 1], ii[:, 2]]

    stop = (state == Cell.OCCUPIED) | (state == _OUTSIDE)
    n_i = state.shape[-1]
    first = np.where(stop.any(axis=-1), stop.argmax(axis=-1), n_i)
    live = np.arange(n_i) < first[..., None]
    bins = np.count_nonzero(live & (state == Cell.UNKNOWN), axis=(1, 2))

    w = pollset.window_bins(h_fov)
    ext = np.concatenate([bins, bins[: w - 1]]) if w > 1 else bins
    csum = np.concatenate([[0], np.cumsum(ext)])
    sums = csum[w : w + pollset.n_k] - csum[: pollset.n_k]
    start = int(np.argmax(sums))
    return GainResult(int(sums[start]), start * pollset.delta_phi, bins, w, pollset.delta_phi)


def update_status(
    status: NodeStatus,
    gain: int,
    g_max: int,
    g_min: float,
    yaw_prev: float | None,
    yaw_new: float | None,
    yaw_tolerance: float,
) -> NodeStatus:
    """Next node status after a gain evaluation."""
    if gain < 0:
        return NodeStatus.FAILED
    if gain / g_max < g_min:
        return NodeStatus.EXPLORED
    if (
        status is NodeStatus.VISITED
        and yaw_prev is not None
        and yaw_new is not None
        and abs(wrap_angle(yaw_new - yaw_prev)) <= yaw_tolerance + _TOL
    ):
        return NodeStatus.EXPLORED
    return NodeStatus.INITIAL
