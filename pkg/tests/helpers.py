"""Shared fixtures: meshes the generators do not produce."""

import tempfile
from pathlib import Path

import numpy as np
from scipy.spatial import Voronoi

from prdg.mesh import compact, read_native, write_native


def voronoi_mesh(n_sites: int, seed: int = 0):
    """Bounded Voronoi tessellation of the unit square, read back from the native format.

    Sites are mirrored across the four sides, so the cells of the original
    sites are convex polygons that tile the square exactly.
    """
    rng = np.random.default_rng(seed)
    pts = 0.05 + 0.9 * rng.random((n_sites, 2))
    mirrored = [pts,
                np.column_stack([-pts[:, 0], pts[:, 1]]),
                np.column_stack([2 - pts[:, 0], pts[:, 1]]),
                np.column_stack([pts[:, 0], -pts[:, 1]]),
                np.column_stack([pts[:, 0], 2 - pts[:, 1]])]
    vor = Voronoi(np.concatenate(mirrored))
    verts = np.clip(vor.vertices, 0.0, 1.0)
    cells = []
    for i in range(n_sites):
        region = vor.regions[vor.point_region[i]]
        c = verts[region].mean(0)
        ang = np.arctan2(verts[region, 1] - c[1], verts[region, 0] - c[0])
        cells.append([region[j] for j in np.argsort(ang)])
    mesh = compact(verts, cells)
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "voronoi.txt"
        write_native(mesh, path)
        return read_native(path)


# one verdict line per acceptance criterion, printed by conftest.py
ACCEPTANCE: dict = {}
