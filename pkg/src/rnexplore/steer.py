"""Traversability check for a candidate edge on the 2D grid.

A connection from a new sample to an existing node is accepted when every
tile whose centre lies inside the robot disc at the sample, or inside the
corridor towards the node, is traversable. Shapes are scanned as slices of
constant tile row ``iy``, each slice from its minimum to its maximum ``ix``.
Tiles outside the grid count as unknown.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rnexplore.errors import ConfigError
from rnexplore.world import GridMap2D, Tile

# Tile centres within EPS of a shape boundary count as inside.
EPS = 1e-9


@dataclass(frozen=True)
class RobotFootprint:
    r_robot: float
    w_robot: float

    def __post_init__(self):
        if not self.w_robot > 0:
            raise ConfigError("w_robot must be positive")
        if self.r_robot < self.w_robot / 2:
            raise ConfigError(
                f"footprint needs r_robot >= w_robot / 2 (got r_robot={self.r_robot}, w_robot={self.w_robot})"
            )

    @property
    def d_diff(self) -> float:
        return math.sqrt(max(self.r_robot**2 - (self.w_robot / 2) ** 2, 0.0))


@dataclass(frozen=True)
class SteerResult:
    ok: bool
    tile: tuple[int, int] | None = None
    visited: int = 0

    def __bool__(self):
        return self.ok


def corridor_remainder(x_rand, x_n, fp: RobotFootprint) -> tuple[float, float]:
    """Return ``(d_diff, d_rem)``: how far the corridor is inset at each end, and its length."""
    d = math.hypot(x_n[0] - x_rand[0], x_n[1] - x_rand[1])
    if d <= 0:
        raise ValueError("corridor endpoints coincide")
    d_diff = fp.d_diff
    return d_diff, max(d - 2 * d_diff, 0.0)


def _row_span(grid: GridMap2D, y_lo: float, y_hi: float) -> range:
    res, oy = grid.resolution, grid.origin[1]
    lo = math.ceil((y_lo - oy) / res - 0.5)
    hi = math.floor((y_hi - oy) / res - 0.5)
    return range(lo, hi + 1)


def _scan_slice(grid, iy, x_lo, x_hi, visited):
    """Check tiles of row ``iy`` with centres in ``[x_lo, x_hi]``; returns ``(blocking, visited)``."""
    res, ox = grid.resolution, grid.origin[0]
    lo = math.ceil((x_lo - ox) / res - 0.5)
    hi = math.floor((x_hi - ox) / res - 0.5)
    if hi < lo:
        return None, visited
    nx, ny = grid.cells.shape
    if lo < 0 or not 0 <= iy < ny:
        return (lo, iy), visited + 1
    stop = min(hi, nx - 1)
    row = grid.cells[lo : stop + 1, iy]
    bad = np.flatnonzero(row != Tile.TRAVERSABLE)
    if bad.size:
        return (lo + int(bad[0]), iy), visited + int(bad[0]) + 1
    if hi > stop:
        return (max(lo, nx), iy), visited + row.size + 1
    return None, visited + row.size


def check_disc(grid: GridMap2D, center, radius: float, _visited: int = 0) -> SteerResult:
    """All tiles with centres inside the disc must be traversable."""
    cx, cy = float(center[0]), float(center[1])
    r = radius + EPS
    oy, res = grid.origin[1], grid.resolution
    visited = _visited
    for iy in _row_span(grid, cy - r, cy + r):
        yc = oy + (iy + 0.5) * res
        dy = yc - cy
        h2 = r * r - dy * dy
        if h2 < 0:
            continue
        half = math.sqrt(h2)
        tile, visited = _scan_slice(grid, iy, cx - half, cx + half, visited)
        if tile is not None:
            return SteerResult(False, tile, visited)
    return SteerResult(True, None, visited)


def _linear_bounds(x0, slope, offset, lo, hi):
    """x-interval where ``lo <= offset + slope * (x - x0) <= hi``; ``None`` if empty."""
    if slope == 0.0:
        if lo <= offset <= hi:
            return -math.inf, math.inf
        return None
    a = x0 + (lo - offset) / slope
    b = x0 + (hi - offset) / slope
    return (a, b) if a <= b else (b, a)


def check_corridor(grid: GridMap2D, start, end, width: float, _visited: int = 0) -> SteerResult:
    """All tiles with centres inside the ``width``-wide rectangle along ``start -> end``."""
    ax, ay = float(start[0]), float(start[1])
    bx, by = float(end[0]), float(end[1])
    length = math.hypot(bx - ax, by - ay)
    visited = _visited
    if length <= 0:
        return SteerResult(True, None, visited)
    ux, uy = (bx - ax) / length, (by - ay) / length
    px, py = -uy, ux
    hw = width / 2
    corners_y = [ay + hw * py, ay - hw * py, by + hw * py, by - hw * py]
    oy, res = grid.origin[1], grid.resolution
    for iy in _row_span(grid, min(corners_y) - EPS, max(corners_y) + EPS):
        yc = oy + (iy + 0.5) * res
        dy = yc - ay
        along = _linear_bounds(ax, ux, dy * uy, -EPS, length + EPS)
        across = _linear_bounds(ax, px, dy * py, -hw - EPS, hw + EPS)
        if along is None or across is None:
            continue
        x_lo, x_hi = max(along[0], across[0]), min(along[1], across[1])
        if x_lo > x_hi:
            continue
        tile, visited = _scan_slice(grid, iy, x_lo, x_hi, visited)
        if tile is not None:
            return SteerResult(False, tile, visited)
    return SteerResult(True, None, visited)


def corridor_segment(x_rand, x_n, fp: RobotFootprint):
    """End points of the shortened corridor between the two robot discs."""
    d_diff, d_rem = corridor_remainder(x_rand, x_n, fp)
    d = math.hypot(x_n[0] - x_rand[0], x_n[1] - x_rand[1])
    ux, uy = (x_n[0] - x_rand[0]) / d, (x_n[1] - x_rand[1]) / d
    s = min(d_diff, d / 2)
    start = (x_rand[0] + s * ux, x_rand[1] + s * uy)
    end = (start[0] + d_rem * ux, start[1] + d_rem * uy)
    return start, end, d_rem


def steer(grid: GridMap2D, x_rand, x_n, fp: RobotFootprint) -> SteerResult:
    """Can the robot travel from ``x_rand`` to ``x_n``?

    Checks the corridor first, then the disc around ``x_rand``. The disc
    around ``x_n`` was checked when that node was inserted.
    """
    start, end, d_rem = corridor_segment(x_rand, x_n, fp)
    visited = 0
    if d_rem > 0:
        res = check_corridor(grid, start, end, fp.w_robot)
        if not res:
            return res
        visited = res.visited
    return check_disc(grid, x_rand, fp.r_robot, visited)
