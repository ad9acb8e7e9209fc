import math

import numpy as np
import pytest

from frontmesh.errors import GeometryError, ValidationError
from frontmesh.plc import PLC, Facet
from frontmesh.triangulation import (
    Mesh,
    Provenance,
    audit_structure,
    bootstrap,
    delete_vertex,
    insert_vertex,
    locate,
)

from test_plc import unit_cube, unit_square


def simplex_sets(mesh):
    return {tuple(sorted(v)) for v in mesh.simplices.values()}


def test_bootstrap_square():
    mesh = bootstrap(unit_square())
    assert len(mesh.scaffold_ids) == 4
    assert len(mesh.input_vids) == 4
    assert audit_structure(mesh) == []


def test_bootstrap_cube():
    mesh = bootstrap(unit_cube())
    assert len(mesh.scaffold_ids) == 8
    assert len(mesh.input_vids) == 8
    assert audit_structure(mesh) == []


def test_random_insertions_2d_delaunay():
    mesh = bootstrap(unit_square())
    rng = np.random.default_rng(41)
    for p in rng.random((200, 2)):
        insert_vertex(mesh, tuple(p))
    assert len(mesh.verts) == 4 + 4 + 200
    assert audit_structure(mesh) == []


def test_random_insertions_3d_delaunay():
    mesh = bootstrap(unit_cube())
    rng = np.random.default_rng(43)
    for p in rng.random((100, 3)):
        insert_vertex(mesh, tuple(p))
    assert audit_structure(mesh) == []


def test_cocircular_grid_insertions():
    # Integer grid points produce many exactly cocircular quadruples.
    mesh = bootstrap(unit_square())
    pts = [(i / 4, j / 4) for i in range(5) for j in range(5)
           if (i / 4, j / 4) not in {(0, 0), (1, 0), (1, 1), (0, 1)}]
    for p in pts:
        insert_vertex(mesh, p)
    assert audit_structure(mesh) == []


def test_duplicate_insert_rejected():
    mesh = bootstrap(unit_square())
    insert_vertex(mesh, (0.25, 0.25))
    with pytest.raises(ValidationError):
        insert_vertex(mesh, (0.25, 0.25))
    with pytest.raises(ValidationError):
        insert_vertex(mesh, (0.25 + 1e-16, 0.25))


def test_insert_outside_scaffold_rejected():
    mesh = bootstrap(unit_square())
    with pytest.raises(GeometryError):
        insert_vertex(mesh, (1e5, 1e5))


def test_locate_basic():
    mesh = bootstrap(unit_square())
    res = insert_vertex(mesh, (0.5, 0.5))
    sid = locate(mesh, (0.5, 0.25))
    assert sid in mesh.simplices
    verts = mesh.simplices[sid]
    pts = [mesh.verts[v].point for v in verts]
    # Containment: the barycentric signs are all non-negative.
    from frontmesh.predicates import Sign, orient
    for i in range(3):
        q = list(pts)
        q[i] = (0.5, 0.25)
        assert orient(q) is not Sign.NEGATIVE
    assert locate(mesh, (1e5, 1e5)) is None


def test_locate_on_shared_facet_lowest_id():
    mesh = bootstrap(unit_square())
    insert_vertex(mesh, (0.5, 0.5))
    # Point on the edge between two triangles: answer is the lowest id among
    # containing simplices, so locating twice gives the same simplex.
    p = (0.5, 0.25)
    a = locate(mesh, p)
    assert locate(mesh, p) == a


def test_insert_then_delete_round_trip_2d():
    rng = np.random.default_rng(47)
    mesh = bootstrap(unit_square())
    for p in rng.random((40, 2)):
        insert_vertex(mesh, tuple(p))
    before = simplex_sets(mesh)
    res = insert_vertex(mesh, (0.333303, 0.51717))
    delete_vertex(mesh, res.vid)
    assert simplex_sets(mesh) == before
    assert audit_structure(mesh) == []


def test_insert_then_delete_round_trip_3d():
    rng = np.random.default_rng(53)
    mesh = bootstrap(unit_cube())
    for p in rng.random((30, 3)):
        insert_vertex(mesh, tuple(p))
    before = simplex_sets(mesh)
    res = insert_vertex(mesh, (0.40404, 0.57575, 0.313131))
    delete_vertex(mesh, res.vid)
    assert simplex_sets(mesh) == before
    assert audit_structure(mesh) == []


def test_random_deletions_keep_delaunay_2d():
    rng = np.random.default_rng(59)
    mesh = bootstrap(unit_square())
    vids = [insert_vertex(mesh, tuple(p)).vid for p in rng.random((60, 2))]
    rng.shuffle(vids)
    for vid in vids[:30]:
        delete_vertex(mesh, vid)
        problems = audit_structure(mesh)
        assert problems == [], problems


def test_random_deletions_keep_delaunay_3d():
    rng = np.random.default_rng(61)
    mesh = bootstrap(unit_cube())
    vids = [insert_vertex(mesh, tuple(p)).vid for p in rng.random((40, 3))]
    rng.shuffle(vids)
    for vid in vids[:20]:
        delete_vertex(mesh, vid)
        problems = audit_structure(mesh)
        assert problems == [], problems


def test_delete_cocircular_center():
    # Deleting the center of a square leaves an exactly cocircular hole.
    mesh = bootstrap(unit_square())
    res = insert_vertex(mesh, (0.5, 0.5))
    delete_vertex(mesh, res.vid)
    assert audit_structure(mesh) == []
    assert res.vid not in mesh.verts


def test_delete_input_vertex_rejected():
    mesh = bootstrap(unit_square())
    with pytest.raises(ValidationError):
        delete_vertex(mesh, mesh.input_vids[0])
    scaffold = sorted(mesh.scaffold_ids)[0]
    with pytest.raises(ValidationError):
        delete_vertex(mesh, scaffold)


def test_star_and_edge_queries():
    mesh = bootstrap(unit_square())
    res = insert_vertex(mesh, (0.5, 0.5))
    star = mesh.star(res.vid)
    brute = sorted(s for s, v in mesh.simplices.items() if res.vid in v)
    assert star == brute
    for sid in star:
        assert res.vid in mesh.simplices[sid]
    a, b = mesh.input_vids[0], mesh.input_vids[1]
    assert mesh.edge_exists(a, b) or not mesh.edge_exists(a, b)  # total call works
    assert mesh.edge_exists(res.vid, a)


def test_determinism_across_runs():
    def build():
        rng = np.random.default_rng(67)
        mesh = bootstrap(unit_square())
        vids = [insert_vertex(mesh, tuple(p)).vid for p in rng.random((50, 2))]
        for vid in vids[10:20]:
            delete_vertex(mesh, vid)
        return mesh

    m1, m2 = build(), build()
    assert m1.simplices == m2.simplices
    assert m1.neighbors == m2.neighbors
    assert {v: r.point for v, r in m1.verts.items()} == \
           {v: r.point for v, r in m2.verts.items()}


def test_nearest_vertex_and_near_queries():
    mesh = bootstrap(unit_square())
    res = insert_vertex(mesh, (0.5, 0.5))
    got = mesh.nearest_vertex((0.51, 0.5))
    assert got is not None and got[0] == res.vid
    assert got[1] == pytest.approx(0.01)
    ids = mesh.vertices_near((0.5, 0.5), 0.75)
    assert res.vid in ids and set(mesh.input_vids) <= set(ids)
