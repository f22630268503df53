import math

import numpy as np
import pytest

from prdg.mesh import (
    BOUNDARY, MeshError, MeshParseError, PolyMesh, TopologyError, compact,
    generate_chain, generate_lshape_tri, generate_perturbed_tri, generate_structured_mixed,
    generate_structured_tri, import_msh, load_mesh, polygon_area, read_native, subtriangulate,
    write_native,
)

from .helpers import voronoi_mesh


def all_meshes():
    return [
        generate_structured_tri(1),
        generate_structured_tri(5),
        generate_structured_tri(3, (0.0, 2.0, 0.0, 1.0)),
        generate_structured_mixed(4),
        generate_lshape_tri(2),
        generate_perturbed_tri(6, 0.25, seed=3),
        generate_chain(5),
        voronoi_mesh(30, seed=1),
    ]


MESHES = all_meshes()


def test_structured_tri_counts():
    m = generate_structured_tri(1)
    assert m.n_cells == 2
    assert m.area.sum() == pytest.approx(1.0, abs=1e-14)

    m = generate_structured_tri(10)
    assert m.n_cells == 200
    np.testing.assert_allclose(m.diameter, math.sqrt(2) / 10, rtol=1e-13)
    assert m.h == pytest.approx(math.sqrt(2) / 10)

    m = generate_structured_tri(2, (0.0, 2.0, 0.0, 1.0))
    assert m.n_cells == 8
    assert m.area.sum() == pytest.approx(2.0, rel=1e-14)


@pytest.mark.parametrize("gen", [generate_structured_tri, generate_lshape_tri, generate_structured_mixed])
def test_generators_reject_zero(gen):
    with pytest.raises(ValueError):
        gen(0)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_lshape(n):
    m = generate_lshape_tri(n)
    assert m.n_cells == 6 * n * n
    assert m.area.sum() == pytest.approx(3.0, abs=1e-12)
    corner = np.flatnonzero(np.all(np.abs(m.vertices) < 1e-15, axis=1))
    assert len(corner) == 1
    bverts = set(m.faces[m.boundary_faces].ravel().tolist())
    assert int(corner[0]) in bverts
    # nothing inside the excluded quadrant
    assert not np.any((m.barycenter[:, 0] > 0) & (m.barycenter[:, 1] < 0))


@pytest.mark.parametrize("n", [1, 2, 4])
def test_lshape_refinement_halves_h(n):
    ratio = generate_lshape_tri(2 * n).h / generate_lshape_tri(n).h
    assert 0.45 <= ratio <= 0.55


@pytest.mark.parametrize("mesh", MESHES, ids=lambda m: f"{m.n_cells}cells")
def test_mesh_invariants(mesh):
    # every interior face has two cells, boundary faces one
    counts = np.zeros(mesh.n_faces, dtype=int)
    for fs in mesh.cell_faces:
        counts[fs] += 1
    interior = mesh.face_cells[:, 1] != BOUNDARY
    assert np.all(counts[interior] == 2)
    assert np.all(counts[~interior] == 1)

    assert np.all(mesh.area > 0)
    for k, c in enumerate(mesh.cells):
        assert polygon_area(mesh.vertices[c]) > 0
        tri_area = sum(abs(polygon_area(mesh.vertices[t])) for t in mesh.subtriangles[k])
        assert tri_area == pytest.approx(mesh.area[k], rel=1e-12)
        assert len(mesh.subtriangles[k]) <= len(c) - 2

    np.testing.assert_allclose(np.linalg.norm(mesh.face_normal, axis=1), 1.0, atol=1e-14)

    # interior normals point from the left barycenter towards the right one
    f = mesh.interior_faces
    d = mesh.barycenter[mesh.face_cells[f, 1]] - mesh.barycenter[mesh.face_cells[f, 0]]
    assert np.all((d * mesh.face_normal[f]).sum(1) > 0)

    # closure: sum of h_e n_e (outward) over each cell vanishes
    for k, fs in enumerate(mesh.cell_faces):
        sign = np.where(mesh.face_cells[fs, 0] == k, 1.0, -1.0)
        s = (sign[:, None] * mesh.face_length[fs, None] * mesh.face_normal[fs]).sum(0)
        assert np.abs(s).max() < 1e-12

    for k, fs in enumerate(mesh.cell_faces):
        assert np.all(mesh.face_length[fs] <= mesh.diameter[k] * (1 + 1e-14))


@pytest.mark.parametrize("mesh", [generate_structured_tri(8), generate_structured_mixed(6),
                                  generate_lshape_tri(3)])
def test_shape_regularity_bounded(mesh):
    assert mesh.shape_regularity() < 50


def test_domain_area_sums():
    assert generate_structured_mixed(7).area.sum() == pytest.approx(1.0, rel=1e-10)
    assert generate_perturbed_tri(9, 0.3, seed=2).area.sum() == pytest.approx(1.0, rel=1e-10)


# -- sub-triangulation ------------------------------------------------------

def test_subtriangulate_triangle_is_identity():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert subtriangulate(tri) == [(0, 1, 2)]


def test_subtriangulate_convex_quad():
    quad = np.array([[0.0, 0.0], [2.0, 0.0], [2.5, 1.0], [0.0, 1.5]])
    tris = subtriangulate(quad)
    assert len(tris) == 2
    assert sum(polygon_area(quad[list(t)]) for t in tris) == pytest.approx(polygon_area(quad))


def test_subtriangulate_hexagon():
    th = np.arange(6) * np.pi / 3
    hexa = np.column_stack([np.cos(th), np.sin(th)])
    tris = subtriangulate(hexa)
    assert 4 <= len(tris) <= 6
    assert sum(polygon_area(hexa[list(t)]) for t in tris) == pytest.approx(3 * math.sqrt(3) / 2, rel=1e-14)


def test_subtriangulate_nonconvex():
    # an L-shaped hexagon forces ear clipping
    poly = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], dtype=float)
    tris = subtriangulate(poly)
    assert len(tris) == 4
    assert all(polygon_area(poly[list(t)]) > 0 for t in tris)
    assert sum(polygon_area(poly[list(t)]) for t in tris) == pytest.approx(3.0)


def test_subtriangulate_rejects_bowtie():
    bowtie = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)
    with pytest.raises(MeshError):
        subtriangulate(bowtie)


# -- topology errors --------------------------------------------------------

def test_duplicated_cell_rejected():
    verts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    with pytest.raises(TopologyError, match="face"):
        PolyMesh(verts, [[0, 1, 2, 3], [0, 1, 2, 3]])


def test_hanging_node_rejected():
    verts = np.array([[0, 0], [1, 0], [2, 0], [2, 1], [1, 1], [0, 1], [1, 0.5]], dtype=float)
    # vertex 6 sits on the edge 1-4 of the left square but is not one of its vertices
    cells = [[0, 1, 4, 5], [1, 2, 3, 6], [6, 3, 4]]
    with pytest.raises(TopologyError, match="hanging node"):
        PolyMesh(verts, cells)


def test_clockwise_cell_rejected():
    verts = np.array([[0, 0], [1, 0], [0, 1]], dtype=float)
    with pytest.raises(MeshError):
        PolyMesh(verts, [[0, 2, 1]])


# -- file formats -----------------------------------------------------------

@pytest.mark.parametrize("mesh", [generate_perturbed_tri(4, 0.3, seed=7), voronoi_mesh(20, seed=4)],
                         ids=["perturbed", "voronoi"])
def test_native_roundtrip_bit_exact(mesh, tmp_path):
    p = tmp_path / "m.txt"
    write_native(mesh, p)
    back = read_native(p)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert all(np.array_equal(a, b) for a, b in zip(back.cells, mesh.cells))
    p2 = tmp_path / "m2.txt"
    write_native(back, p2)
    assert p.read_bytes() == p2.read_bytes()


def test_native_single_quad(tmp_path):
    p = tmp_path / "q.txt"
    p.write_text("4 1\n0 0\n1 0\n1 1\n0 1\n4 0 1 2 3\n")
    m = read_native(p)
    assert m.n_cells == 1 and len(m.boundary_faces) == 4 and len(m.interior_faces) == 0


def test_native_two_triangles(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("4 2\n0 0\n1 0\n1 1\n0 1\n3 0 1 2\n3 0 2 3\n")
    m = read_native(p)
    assert len(m.interior_faces) == 1 and len(m.boundary_faces) == 4


def test_native_duplicate_cell(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("3 2\n0 0\n1 0\n0 1\n3 0 1 2\n3 0 1 2\n")
    with pytest.raises(TopologyError):
        read_native(p)


def test_native_parse_error_has_line_number(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("3 1\n0 0\n1 zero\n0 1\n3 0 1 2\n")
    with pytest.raises(MeshParseError) as exc:
        read_native(p)
    assert exc.value.lineno == 3


MSH_TWO_TRI = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
7
1 15 2 0 1 1
2 1 2 0 1 1 2
3 1 2 0 2 2 3
4 1 2 0 3 3 4
5 1 2 0 4 4 1
6 2 2 0 1 1 2 3
7 2 2 0 1 1 4 3
$EndElements
"""


def test_msh_two_triangles(tmp_path, caplog):
    p = tmp_path / "two.msh"
    p.write_text(MSH_TWO_TRI)
    with caplog.at_level("WARNING"):
        m = import_msh(p)
    assert m.n_cells == 2
    assert len(m.interior_faces) == 1 and len(m.boundary_faces) == 4
    # the clockwise second triangle was reoriented
    assert np.all(m.area > 0)
    assert "ignored" in caplog.text


def test_msh_mixed_quad_tri(tmp_path):
    p = tmp_path / "mixed.msh"
    p.write_text("""$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
6
10 0 0 0
11 1 0 0
12 2 0 0
13 0 1 0
14 1 1 0
15 2 1 0
$EndNodes
$Elements
3
1 3 2 0 1 10 11 14 13
2 2 2 0 1 11 12 15
3 2 2 0 1 11 15 14
$EndElements
""")
    m = load_mesh(p)
    assert sorted(len(c) for c in m.cells) == [3, 3, 4]
    assert m.area.sum() == pytest.approx(2.0)
    assert len(m.interior_faces) == 2


def test_msh_parse_error_line(tmp_path):
    p = tmp_path / "bad.msh"
    p.write_text(MSH_TWO_TRI.replace("3 1 1 0", "3 1 x 0"))
    with pytest.raises(MeshParseError) as exc:
        import_msh(p)
    assert exc.value.lineno == 8


def test_compact_drops_unused_vertices():
    verts = np.array([[9, 9], [0, 0], [1, 0], [0, 1]], dtype=float)
    m = compact(verts, [[1, 2, 3]])
    assert len(m.vertices) == 3 and m.area[0] == pytest.approx(0.5)
