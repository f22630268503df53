"""
Conforming 2D polygonal meshes: topology, geometric caches, generators and I/O.

Cells are vertex-index loops in counter-clockwise order.  Faces are stored
once, with the cell that traverses the face as (v0 -> v1) on the left; the
face normal is the outward normal of the left cell, so on interior faces it
points from the left cell into the right cell.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

BOUNDARY = -1


class MeshError(ValueError):
    """Base class for mesh construction problems."""


class TopologyError(MeshError):
    """The cell list does not form a conforming mesh."""


class MeshParseError(MeshError):
    """A mesh file could not be parsed."""

    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True)
class FaceSide:
    """One trace of a face: which face, which side, and the sign of the normal."""

    face: int
    side: str  # "left" or "right"
    cell: int

    @property
    def normal_sign(self) -> float:
        # the stored normal is outward for the left cell
        return 1.0 if self.side == "left" else -1.0


def polygon_area(pts: np.ndarray) -> float:
    """Signed shoelace area (positive for counter-clockwise loops)."""
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def polygon_diameter(pts: np.ndarray) -> float:
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segments_intersect(p1, p2, q1, q2) -> bool:
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True

    def on_seg(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    if d1 == 0 and on_seg(q1, q2, p1):
        return True
    if d2 == 0 and on_seg(q1, q2, p2):
        return True
    if d3 == 0 and on_seg(p1, p2, q1):
        return True
    if d4 == 0 and on_seg(p1, p2, q2):
        return True
    return False


def is_simple_polygon(pts: np.ndarray) -> bool:
    k = len(pts)
    if k < 3:
        return False
    for i in range(k):
        a, b = pts[i], pts[(i + 1) % k]
        for j in range(i + 1, k):
            # adjacent edges share a vertex by construction
            if j == i or (j + 1) % k == i or j == (i + 1) % k:
                continue
            if _segments_intersect(a, b, pts[j], pts[(j + 1) % k]):
                return False
    return True


def is_convex_polygon(pts: np.ndarray, tol: float = 1e-14) -> bool:
    k = len(pts)
    scale = polygon_diameter(pts) ** 2
    for i in range(k):
        if _cross(pts[i - 1], pts[i], pts[(i + 1) % k]) < -tol * scale:
            return False
    return True


def _point_in_triangle(p, a, b, c) -> bool:
    return _cross(a, b, p) >= 0 and _cross(b, c, p) >= 0 and _cross(c, a, p) >= 0


def subtriangulate(pts: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple counter-clockwise polygon.

    Returns local vertex-index triples.  Convex polygons get a fan from the
    first vertex, others are ear-clipped; either way there are exactly
    ``len(pts) - 2`` triangles.
    """
    pts = np.asarray(pts, dtype=float)
    k = len(pts)
    if not is_simple_polygon(pts):
        raise MeshError("polygon is not simple (self-intersecting or degenerate)")
    if polygon_area(pts) <= 0:
        raise MeshError("polygon is not counter-clockwise")
    if k == 3:
        return [(0, 1, 2)]
    if is_convex_polygon(pts):
        return [(0, i, i + 1) for i in range(1, k - 1)]

    idx = list(range(k))
    tris = []
    while len(idx) > 3:
        n = len(idx)
        for t in range(n):
            i0, i1, i2 = idx[t - 1], idx[t], idx[(t + 1) % n]
            a, b, c = pts[i0], pts[i1], pts[i2]
            if _cross(a, b, c) <= 0:
                continue
            if any(_point_in_triangle(pts[j], a, b, c)
                   for j in idx if j not in (i0, i1, i2)):
                continue
            tris.append((i0, i1, i2))
            del idx[t]
            break
        else:
            raise MeshError("ear clipping failed; polygon is degenerate")
    tris.append(tuple(idx))
    return tris


@dataclass(eq=False)
class PolyMesh:
    """Conforming polygonal mesh with cached topology and geometry.

    Treat instances as immutable once built.
    """

    vertices: np.ndarray
    cells: list[np.ndarray]
    # filled in by __post_init__
    faces: np.ndarray = field(init=False, repr=False)          # (nf, 2) vertex ids
    face_cells: np.ndarray = field(init=False, repr=False)     # (nf, 2) left, right or BOUNDARY
    face_length: np.ndarray = field(init=False, repr=False)
    face_normal: np.ndarray = field(init=False, repr=False)
    cell_faces: list[np.ndarray] = field(init=False, repr=False)
    area: np.ndarray = field(init=False, repr=False)
    barycenter: np.ndarray = field(init=False, repr=False)
    diameter: np.ndarray = field(init=False, repr=False)
    subtriangles: list[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (n, 2) array")
        self.cells = [np.asarray(c, dtype=np.int64) for c in self.cells]
        if not self.cells:
            raise MeshError("mesh has no cells")
        nv = len(self.vertices)
        ncell = len(self.cells)
        self.area = np.empty(ncell)
        self.barycenter = np.empty((ncell, 2))
        self.diameter = np.empty(ncell)
        self.subtriangles = []
        for k, c in enumerate(self.cells):
            if len(c) < 3 or c.min() < 0 or c.max() >= nv:
                raise MeshError(f"cell {k} has invalid vertex indices")
            if len(set(c.tolist())) != len(c):
                raise MeshError(f"cell {k} repeats a vertex")
            pts = self.vertices[c]
            a = polygon_area(pts)
            if a <= 0:
                raise MeshError(f"cell {k} is not counter-clockwise or has zero area")
            try:
                tris = subtriangulate(pts)
            except MeshError as exc:
                raise MeshError(f"cell {k}: {exc}") from None
            self.area[k] = a
            self.barycenter[k] = polygon_centroid(pts)
            self.diameter[k] = polygon_diameter(pts)
            self.subtriangles.append(c[np.array(tris, dtype=np.int64)])
        self._build_faces()

    def _build_faces(self):
        lookup: dict[tuple[int, int], int] = {}
        faces = []
        face_cells = []
        cell_faces = []
        for k, c in enumerate(self.cells):
            ids = []
            for a, b in zip(c.tolist(), np.roll(c, -1).tolist()):
                key = (min(a, b), max(a, b))
                f = lookup.get(key)
                if f is None:
                    lookup[key] = len(faces)
                    ids.append(len(faces))
                    faces.append((a, b))
                    face_cells.append([k, BOUNDARY])
                    continue
                if face_cells[f][1] != BOUNDARY:
                    raise TopologyError(
                        f"face {f} (vertices {key}) is shared by more than two cells "
                        f"({face_cells[f][0]}, {face_cells[f][1]}, {k})")
                if faces[f] != (b, a):
                    raise TopologyError(
                        f"face {f} (vertices {key}) is traversed in the same direction "
                        f"by cells {face_cells[f][0]} and {k}; overlapping or duplicated cells")
                face_cells[f][1] = k
                ids.append(f)
            cell_faces.append(np.array(ids, dtype=np.int64))
        self.faces = np.array(faces, dtype=np.int64)
        self.face_cells = np.array(face_cells, dtype=np.int64)
        self.cell_faces = cell_faces
        d = self.vertices[self.faces[:, 1]] - self.vertices[self.faces[:, 0]]
        self.face_length = np.hypot(d[:, 0], d[:, 1])
        self.face_normal = np.column_stack([d[:, 1], -d[:, 0]]) / self.face_length[:, None]
        self._check_hanging_nodes()

    def _check_hanging_nodes(self):
        bf = self.boundary_faces
        if len(bf) == 0:
            return
        ends = self.faces[bf]
        p0 = self.vertices[ends[:, 0]]
        p1 = self.vertices[ends[:, 1]]
        cand = np.unique(ends.ravel())
        q = self.vertices[cand]
        d = p1 - p0
        L2 = (d ** 2).sum(1)
        # projection parameter and distance of every boundary vertex onto every boundary face
        chunk = 512
        for s in range(0, len(bf), chunk):
            sl = slice(s, s + chunk)
            rel = q[None, :, :] - p0[sl, None, :]
            t = (rel * d[sl, None, :]).sum(-1) / L2[sl, None]
            cross = rel[..., 0] * d[sl, None, 1] - rel[..., 1] * d[sl, None, 0]
            dist = np.abs(cross) / np.sqrt(L2[sl, None])
            tol = 1e-10 * np.sqrt(L2[sl, None])
            hit = (t > 1e-10) & (t < 1 - 1e-10) & (dist < tol)
            if hit.any():
                i, j = np.argwhere(hit)[0]
                f = bf[s + i]
                raise TopologyError(
                    f"face {f} (vertices {tuple(self.faces[f])}) has hanging node {cand[j]}; "
                    "mesh is not conforming")

    # -- convenience views ------------------------------------------------

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] != BOUNDARY)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] == BOUNDARY)

    @property
    def h(self) -> float:
        return float(self.diameter.max())

    def neighbors(self, k: int) -> list[int]:
        out = []
        for f in self.cell_faces[k]:
            l, r = self.face_cells[f]
            other = r if l == k else l
            if other != BOUNDARY:
                out.append(int(other))
        return out

    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(k) for k in range(self.n_cells)]

    def face_sides(self, f: int) -> list[FaceSide]:
        l, r = self.face_cells[f]
        sides = [FaceSide(f, "left", int(l))]
        if r != BOUNDARY:
            sides.append(FaceSide(f, "right", int(r)))
        return sides

    def shape_regularity(self) -> float:
        """Max over cells of h_K / rho_K, rho_K the largest sub-triangle inradius."""
        sigma = 0.0
        for k, tris in enumerate(self.subtriangles):
            best = 0.0
            for t in tris:
                p = self.vertices[t]
                e = np.linalg.norm(p - np.roll(p, -1, axis=0), axis=1)
                a = abs(polygon_area(p))
                best = max(best, 2.0 * a / e.sum())
            sigma = max(sigma, self.diameter[k] / best)
        return float(sigma)

    def summary(self) -> dict:
        return {
            "vertices": len(self.vertices),
            "cells": self.n_cells,
            "faces": self.n_faces,
            "interior_faces": len(self.interior_faces),
            "boundary_faces": len(self.boundary_faces),
            "area": float(self.area.sum()),
            "h": self.h,
            "sigma": self.shape_regularity(),
            "cell_sizes": dict(sorted(
                {int(s): int(n) for s, n in zip(*np.unique([len(c) for c in self.cells],
                                                           return_counts=True))}.items())),
        }


# -- generators -------------------------------------------------------------

def _grid_vertices(nx, ny, x0, x1, y0, y1):
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def generate_structured_tri(n: int, domain=(0.0, 1.0, 0.0, 1.0)) -> PolyMesh:
    """Split an n-by-n grid of the rectangle (x0, x1, y0, y1) into 2n^2 triangles."""
    if n < 1:
        raise ValueError("need at least one subdivision per axis")
    x0, x1, y0, y1 = domain
    verts = _grid_vertices(n, n, x0, x1, y0, y1)
    cells = []
    for j in range(n):
        for i in range(n):
            a = j * (n + 1) + i
            b, c, d = a + 1, a + n + 2, a + n + 1
            cells.append([a, b, c])
            cells.append([a, c, d])
    return PolyMesh(verts, cells)


def generate_perturbed_tri(n: int, amplitude: float = 0.2, seed: int = 0,
                           domain=(0.0, 1.0, 0.0, 1.0)) -> PolyMesh:
    """Structured triangles with interior vertices moved randomly by up to ``amplitude`` cells.

    Diagonals are flipped at random too, so the result has no grid symmetry.
    """
    if n < 1:
        raise ValueError("need at least one subdivision per axis")
    if not 0 <= amplitude < 0.5:
        raise ValueError("amplitude must be in [0, 0.5)")
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = domain
    verts = _grid_vertices(n, n, x0, x1, y0, y1)
    step = np.array([(x1 - x0) / n, (y1 - y0) / n])
    I, J = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    inner = ((I > 0) & (I < n) & (J > 0) & (J < n)).ravel()
    verts[inner] += rng.uniform(-amplitude, amplitude, (inner.sum(), 2)) * step
    flip = rng.random((n, n)) < 0.5
    cells = []
    for j in range(n):
        for i in range(n):
            a = j * (n + 1) + i
            b, c, d = a + 1, a + n + 2, a + n + 1
            if flip[j, i]:
                cells += [[a, b, d], [b, c, d]]
            else:
                cells += [[a, b, c], [a, c, d]]
    return PolyMesh(verts, cells)


def generate_structured_mixed(n: int, domain=(0.0, 1.0, 0.0, 1.0)) -> PolyMesh:
    """Checkerboard of quadrilaterals and diagonally split squares."""
    if n < 1:
        raise ValueError("need at least one subdivision per axis")
    x0, x1, y0, y1 = domain
    verts = _grid_vertices(n, n, x0, x1, y0, y1)
    cells = []
    for j in range(n):
        for i in range(n):
            a = j * (n + 1) + i
            b, c, d = a + 1, a + n + 2, a + n + 1
            if (i + j) % 2 == 0:
                cells.append([a, b, c, d])
            else:
                cells.append([a, b, d])
                cells.append([b, c, d])
    return PolyMesh(verts, cells)


def generate_lshape_tri(n: int) -> PolyMesh:
    """Triangulate (-1,1)^2 minus [0,1)x(-1,0] with squares of side 1/n.

    The mesh has 6n^2 triangles and the reentrant corner (0, 0) is a vertex.
    """
    if n < 1:
        raise ValueError("refinement level must be >= 1")
    m = 2 * n
    verts = _grid_vertices(m, m, -1.0, 1.0, -1.0, 1.0)
    cells = []
    for j in range(m):
        for i in range(m):
            if i >= n and j < n:
                continue
            a = j * (m + 1) + i
            b, c, d = a + 1, a + m + 2, a + m + 1
            cells.append([a, b, c])
            cells.append([a, c, d])
    return compact(verts, cells)


def generate_chain(n: int, length: float = 1.0, width: float | None = None) -> PolyMesh:
    """A single row of n rectangles on [0, length]; a 2D stand-in for a 1D mesh."""
    if n < 1:
        raise ValueError("need at least one cell")
    width = length / n if width is None else width
    xs = np.linspace(0.0, length, n + 1)
    verts = np.concatenate([np.column_stack([xs, np.zeros_like(xs)]),
                            np.column_stack([xs, np.full_like(xs, width)])])
    cells = [[i, i + 1, n + 2 + i, n + 1 + i] for i in range(n)]
    return PolyMesh(verts, cells)


def compact(vertices, cells) -> PolyMesh:
    """Drop unreferenced vertices and renumber before building the mesh."""
    vertices = np.asarray(vertices, dtype=float)
    used = np.unique(np.concatenate([np.asarray(c) for c in cells]))
    remap = -np.ones(len(vertices), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return PolyMesh(vertices[used], [remap[np.asarray(c)] for c in cells])


# -- native format ------------------------------------------------------------

def write_native(mesh: PolyMesh, path) -> None:
    """Write ``NV NC``, the vertex lines, then ``k i1 ... ik`` per cell."""
    lines = [f"{len(mesh.vertices)} {mesh.n_cells}"]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in mesh.vertices]
    lines += [" ".join([str(len(c))] + [str(int(i)) for i in c]) for c in mesh.cells]
    Path(path).write_text("\n".join(lines) + "\n")


def read_native(path) -> PolyMesh:
    path = Path(path)
    rows = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.split("#", 1)[0].strip()
            if s:
                rows.append((lineno, s.split()))
    if not rows:
        raise MeshParseError(path, 1, "empty mesh file")
    lineno, head = rows[0]
    try:
        nv, nc = (int(t) for t in head)
    except ValueError:
        raise MeshParseError(path, lineno, "expected header 'NV NC'") from None
    if len(rows) != 1 + nv + nc:
        last = rows[-1][0] if rows else 1
        raise MeshParseError(path, last, f"expected {nv} vertex and {nc} cell lines, "
                                         f"found {len(rows) - 1} data lines")
    verts = np.empty((nv, 2))
    for i in range(nv):
        lineno, tok = rows[1 + i]
        if len(tok) != 2:
            raise MeshParseError(path, lineno, "vertex line needs two coordinates")
        try:
            verts[i] = [float(tok[0]), float(tok[1])]
        except ValueError:
            raise MeshParseError(path, lineno, "bad vertex coordinate") from None
    cells = []
    for i in range(nc):
        lineno, tok = rows[1 + nv + i]
        try:
            vals = [int(t) for t in tok]
        except ValueError:
            raise MeshParseError(path, lineno, "bad cell entry") from None
        if vals[0] != len(vals) - 1 or vals[0] < 3:
            raise MeshParseError(path, lineno, "cell vertex count does not match the line")
        if min(vals[1:]) < 0 or max(vals[1:]) >= nv:
            raise MeshParseError(path, lineno, "vertex index out of range")
        cells.append(vals[1:])
    return PolyMesh(verts, cells)


# -- gmsh 2.2 ASCII -----------------------------------------------------------

_GMSH_KEEP = {2: 3, 3: 4}


def import_msh(path) -> PolyMesh:
    """Read a Gmsh 2.2 ASCII file, keeping triangles (type 2) and quads (type 3)."""
    path = Path(path)
    lines = path.read_text().splitlines()
    pos = 0

    def expect(tag):
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines) or lines[pos].strip() != tag:
            raise MeshParseError(path, pos + 1, f"expected {tag}")
        pos += 1

    nodes: dict[int, int] = {}
    coords = []
    cells = []
    skipped: dict[int, int] = {}
    seen_nodes = seen_elems = False
    while pos < len(lines):
        tag = lines[pos].strip()
        if not tag:
            pos += 1
            continue
        if tag == "$MeshFormat":
            pos += 1
            tok = lines[pos].split() if pos < len(lines) else []
            if len(tok) < 3 or not tok[0].startswith("2"):
                raise MeshParseError(path, pos + 1, "only MSH version 2.x ASCII is supported")
            if tok[1] != "0":
                raise MeshParseError(path, pos + 1, "binary MSH files are not supported")
            pos += 1
            expect("$EndMeshFormat")
        elif tag == "$Nodes":
            pos += 1
            try:
                count = int(lines[pos])
            except (ValueError, IndexError):
                raise MeshParseError(path, pos + 1, "bad node count") from None
            for _ in range(count):
                pos += 1
                try:
                    tok = lines[pos].split()
                    nodes[int(tok[0])] = len(coords)
                    coords.append((float(tok[1]), float(tok[2])))
                except (ValueError, IndexError):
                    raise MeshParseError(path, pos + 1, "bad node line") from None
            pos += 1
            expect("$EndNodes")
            seen_nodes = True
        elif tag == "$Elements":
            pos += 1
            try:
                count = int(lines[pos])
            except (ValueError, IndexError):
                raise MeshParseError(path, pos + 1, "bad element count") from None
            for _ in range(count):
                pos += 1
                try:
                    tok = [int(t) for t in lines[pos].split()]
                    etype, ntags = tok[1], tok[2]
                    conn = tok[3 + ntags:]
                except (ValueError, IndexError):
                    raise MeshParseError(path, pos + 1, "bad element line") from None
                if etype not in _GMSH_KEEP:
                    skipped[etype] = skipped.get(etype, 0) + 1
                    continue
                if len(conn) != _GMSH_KEEP[etype]:
                    raise MeshParseError(path, pos + 1, "wrong node count for element type")
                try:
                    cells.append([nodes[t] for t in conn])
                except KeyError as exc:
                    raise MeshParseError(path, pos + 1, f"unknown node tag {exc.args[0]}") from None
            pos += 1
            expect("$EndElements")
            seen_elems = True
        else:
            # skip unknown sections such as $PhysicalNames
            end = "$End" + tag[1:]
            while pos < len(lines) and lines[pos].strip() != end:
                pos += 1
            pos += 1
    if not (seen_nodes and seen_elems):
        raise MeshParseError(path, len(lines), "missing $Nodes or $Elements section")
    if skipped:
        log.warning("%s: ignored elements of types %s", path, dict(sorted(skipped.items())))
    if not cells:
        raise MeshParseError(path, len(lines), "no triangle or quadrilateral elements")
    verts = np.array(coords)
    for c in cells:
        if polygon_area(verts[c]) < 0:
            c.reverse()
    return compact(verts, cells)


def load_mesh(path) -> PolyMesh:
    """Dispatch on extension: ``.msh`` is Gmsh, anything else the native format."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"mesh file not found: {path}")
    if path.suffix.lower() == ".msh":
        return import_msh(path)
    return read_native(path)
