import math
from pathlib import Path

import numpy as np
import pytest

from rnexplore.world import Cell, GridMap2D, SensorModel, Tile, VoxelMap

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "rnexplore" / "scenarios"


def flat_world(nx=20, ny=20, nz=10, edge=0.1, origin=(0.0, 0.0, 0.0)):
    """Occupied floor layer, everything above free."""
    cells = np.full((nx, ny, nz), Cell.FREE, dtype=np.uint8)
    cells[:, :, 0] = Cell.OCCUPIED
    return VoxelMap(origin, edge, cells)


def grid_of(rows, resolution=0.1):
    """Build a grid from strings: '.' traversable, '#' obstacle, '?' unknown; row 0 is y = 0."""
    lut = {".": Tile.TRAVERSABLE, "#": Tile.OBSTACLE, "?": Tile.UNKNOWN}
    cells = np.array([[lut[c] for c in row] for row in rows], dtype=np.uint8).T
    return GridMap2D(np.zeros(2), resolution, cells)


def wide_sensor(**kw):
    args = dict(h_fov=2 * math.pi, v_min=math.radians(-67.5), v_max=math.radians(67.5),
                r_min=0.3, r_max=4.0, h_sensor=0.5, n_azimuth=360, n_elevation=541)
    args.update(kw)
    return SensorModel(**args)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
