"""Regenerate the shipped scenario worlds under src/rnexplore/scenarios.

Every world has an occupied floor layer, a ceiling layer and full-height
walls, so the free space is a single closed volume per connected region.
"""

import gzip
from pathlib import Path

import numpy as np

from rnexplore.world import Cell, VoxelMap, format_voxelmap

OUT = Path(__file__).resolve().parents[1] / "src" / "rnexplore" / "scenarios"
EDGE = 0.1
NZ = 25  # floor, 23 free layers, ceiling: 2.5 m overall


def shell(nx, ny):
    cells = np.full((nx, ny, NZ), Cell.FREE, dtype=np.uint8)
    cells[:, :, 0] = Cell.OCCUPIED
    cells[:, :, -1] = Cell.OCCUPIED
    for sl in (np.s_[:2, :], np.s_[-2:, :], np.s_[:, :2], np.s_[:, -2:]):
        cells[sl] = Cell.OCCUPIED
    return cells


def box(cells, x0, y0, x1, y1, top=None):
    """Fill metres [x0, x1) x [y0, y1) from the floor to ``top`` voxels (default: ceiling)."""
    i0, j0, i1, j1 = (int(round(v / EDGE)) for v in (x0, y0, x1, y1))
    cells[i0:i1, j0:j1, 1 : (top or NZ)] = Cell.OCCUPIED


def room():
    cells = shell(60, 60)
    box(cells, 2.0, 3.5, 3.0, 4.5)
    box(cells, 4.0, 1.0, 4.6, 2.2)
    return cells


def pocket():
    cells = shell(40, 40)
    box(cells, 1.2, 1.2, 2.6, 1.4)
    box(cells, 1.2, 2.4, 2.6, 2.6)
    box(cells, 1.2, 1.2, 1.4, 2.6)
    box(cells, 2.4, 1.2, 2.6, 2.6)
    return cells


def maze(n, cell_m, seed, loops):
    """Depth-first maze on an n x n lattice of ``cell_m`` metre cells, plus extra openings."""
    rng = np.random.default_rng(seed)
    size = int(round(n * cell_m / EDGE))
    cells = shell(size, size)
    open_e = np.zeros((n, n, 2), dtype=bool)  # passage to +x / +y neighbour
    seen = np.zeros((n, n), dtype=bool)
    stack = [(0, 0)]
    seen[0, 0] = True
    while stack:
        x, y = stack[-1]
        nbrs = [(x + dx, y + dy) for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))
                if 0 <= x + dx < n and 0 <= y + dy < n and not seen[x + dx, y + dy]]
        if not nbrs:
            stack.pop()
            continue
        nx_, ny_ = nbrs[rng.integers(len(nbrs))]
        if nx_ != x:
            open_e[min(x, nx_), y, 0] = True
        else:
            open_e[x, min(y, ny_), 1] = True
        seen[nx_, ny_] = True
        stack.append((nx_, ny_))
    closed = np.argwhere(~open_e[:-1, :, 0])
    for k in rng.permutation(len(closed))[:loops]:
        open_e[closed[k][0], closed[k][1], 0] = True

    t = 0.2
    for i in range(n):
        for j in range(n):
            x, y = i * cell_m, j * cell_m
            if i < n - 1 and not open_e[i, j, 0]:
                box(cells, x + cell_m - t / 2, y - t / 2 if j else 0, x + cell_m + t / 2, y + cell_m + t / 2)
            if j < n - 1 and not open_e[i, j, 1]:
                box(cells, x - t / 2 if i else 0, y + cell_m - t / 2, x + cell_m + t / 2, y + cell_m + t / 2)
    return cells


def indoor():
    """25 x 25 m office-like floor: a ring corridor with rooms off it."""
    cells = shell(250, 250)
    box(cells, 6.0, 6.0, 19.0, 19.0)  # core
    box(cells, 0.0, 4.0, 25.0, 4.2)  # south rooms
    for k in range(4):
        cells[int((2.5 + 6 * k) / EDGE):int((3.7 + 6 * k) / EDGE), 40:42, 1:NZ - 1] = Cell.FREE
    box(cells, 0.0, 21.0, 25.0, 21.2)
    for k in range(4):
        cells[int((2.5 + 6 * k) / EDGE):int((3.7 + 6 * k) / EDGE), 210:212, 1:NZ - 1] = Cell.FREE
    for k in range(1, 4):
        box(cells, 6.0 * k, 0.0, 6.0 * k + 0.2, 4.0)
        box(cells, 6.0 * k, 21.0, 6.0 * k + 0.2, 25.0)
    box(cells, 9.0, 1.5, 10.0, 2.5)
    box(cells, 15.0, 22.5, 16.0, 23.5)
    return cells


SCENARIOS = {
    "room": (room, 1.0, 1.0, "room.txt"),
    "pocket": (pocket, 1.9, 1.9, "pocket.txt"),
    "maze12": (lambda: maze(6, 2.0, 7, 4), 1.0, 1.0, "maze12.txt"),
    "indoor25": (indoor, 2.0, 12.0, "indoor25.txt.gz"),
}


G_MIN = 0.03


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, (build, sx, sy, fname) in SCENARIOS.items():
        text = format_voxelmap(VoxelMap((0.0, 0.0, 0.0), EDGE, build()))
        path = OUT / fname
        if fname.endswith(".gz"):
            # fixed mtime keeps the archive byte-stable across regenerations
            with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as fh:
                fh.write(text.encode("ascii"))
        else:
            path.write_text(text)
        (OUT / f"{name}.yaml").write_text(
            f"environment: {fname}\nspawn_x: {sx}\nspawn_y: {sy}\nspawn_yaw: 0.0\nseed: 1\n"
            # walls inside sensor range cap the reachable gain ratio in these small worlds
            f"g_min: {G_MIN}\n"
        )
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
