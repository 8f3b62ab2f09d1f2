"""Compiled inner loops for ray marching over dense voxel arrays."""

import math

import numpy as np
from numba import njit

UNKNOWN = np.uint8(0)
FREE = np.uint8(1)
OCCUPIED = np.uint8(2)


@njit(cache=True)
def march_rays(truth, robot, origin, edge, start, dirs, r_min, r_max, step):
    """Integrate one scan of ``dirs`` rays into ``robot``; returns newly known count."""
    nx, ny, nz = truth.shape
    n_steps = int(math.floor(r_max / step + 1e-9))
    inv = 1.0 / edge
    newly = 0
    for r in range(dirs.shape[0]):
        dx = dirs[r, 0]
        dy = dirs[r, 1]
        dz = dirs[r, 2]
        for s in range(n_steps + 1):
            t = s * step
            ix = int(math.floor((start[0] + t * dx - origin[0]) * inv))
            iy = int(math.floor((start[1] + t * dy - origin[1]) * inv))
            iz = int(math.floor((start[2] + t * dz - origin[2]) * inv))
            if ix < 0 or iy < 0 or iz < 0 or ix >= nx or iy >= ny or iz >= nz:
                break
            observed = t >= r_min - 1e-12
            if truth[ix, iy, iz] == OCCUPIED:
                if observed and robot[ix, iy, iz] != OCCUPIED:
                    if robot[ix, iy, iz] == UNKNOWN:
                        newly += 1
                    robot[ix, iy, iz] = OCCUPIED
                break
            if observed and robot[ix, iy, iz] == UNKNOWN:
                robot[ix, iy, iz] = FREE
                newly += 1
    return newly
