import json

import numpy as np
import pytest

from imtreg import (
    DegeneratePolygon,
    DegenerateTriangle,
    Triangulation,
    barycentric,
    build_triangulation,
)
from oracles import point_in_triangle, shoelace_area

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


class TestBuildTriangulation:
    def test_square_target_two_splits_on_a_diagonal(self, mesh2):
        assert mesh2.n_triangles == 2
        assert mesh2.area() == pytest.approx(1.0, abs=1e-12)

    def test_square_target_200_count_and_area(self):
        mesh = build_triangulation(UNIT_SQUARE, 200)
        assert 100 <= mesh.n_triangles <= 400
        assert abs(mesh.area() - 1.0) < 1e-10

    def test_collinear_polygon_rejected(self):
        with pytest.raises(DegeneratePolygon):
            build_triangulation([(0, 0), (1, 1), (2, 2)], 4)

    def test_self_intersecting_polygon_rejected(self):
        bowtie = [(0, 0), (1, 1), (1, 0), (0, 1)]
        with pytest.raises(DegeneratePolygon):
            build_triangulation(bowtie, 4)

    def test_nonconvex_polygon(self):
        lshape = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]
        mesh = build_triangulation(lshape, 60)
        assert 30 <= mesh.n_triangles <= 120
        assert abs(mesh.area() - shoelace_area(lshape)) < 1e-10 * shoelace_area(lshape)
        # no triangle pokes into the notch
        for tri in mesh.triangles:
            cx, cy = mesh.vertices[tri].mean(axis=0)
            assert not (cx > 1 and cy > 1)

    @pytest.mark.parametrize("target", [1, 2, 7, 32, 200])
    def test_count_within_factor_two(self, target):
        mesh = build_triangulation(UNIT_SQUARE, target)
        assert target / 2 <= mesh.n_triangles <= 2 * target

    def test_area_sum_matches_polygon(self):
        for target in (2, 32, 128):
            mesh = build_triangulation(UNIT_SQUARE, target)
            assert abs(mesh.triangle_areas().sum() - 1.0) < 1e-10

    def test_rejects_nonpositive_target(self):
        from imtreg import MeshFailure

        with pytest.raises(MeshFailure):
            build_triangulation(UNIT_SQUARE, 0)


class TestMeshInvariants:
    @pytest.mark.parametrize("target", [2, 32, 200])
    def test_conformity_every_edge_has_one_or_two_triangles(self, target):
        mesh = build_triangulation(UNIT_SQUARE, target)
        interior = boundary = 0
        for _, tris in mesh.edges:
            assert len(tris) in (1, 2)
            if len(tris) == 2:
                interior += 1
            else:
                boundary += 1
        assert boundary == len(mesh.boundary)
        # every triangle contributes 3 edge slots
        assert 3 * mesh.n_triangles == 2 * interior + boundary

    def test_positive_areas_and_ccw(self, mesh32):
        assert (mesh32.triangle_areas() > 0).all()

    def test_boundary_is_closed_square(self, mesh2):
        ring = mesh2.vertices[mesh2.boundary]
        assert abs(shoelace_area(ring) - 1.0) < 1e-12


class TestBarycentric:
    TRI = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

    def test_vertex(self):
        assert np.allclose(barycentric(self.TRI, (0, 0)), [1, 0, 0], atol=1e-14)

    def test_centroid(self):
        lam = barycentric(self.TRI, (1 / 3, 1 / 3))
        assert np.allclose(lam, [1 / 3, 1 / 3, 1 / 3], atol=1e-14)

    def test_affine_identity(self):
        lam = barycentric(self.TRI, (0.25, 0.25))
        assert np.allclose(lam, [0.5, 0.25, 0.25], atol=1e-14)

    def test_degenerate_triangle(self):
        flat = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        with pytest.raises(DegenerateTriangle):
            barycentric(flat, (0.5, 0.5))

    def test_random_triangles_reconstruct(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            tri = rng.uniform(-2, 2, size=(3, 2))
            if abs(np.linalg.det(tri[1:] - tri[0])) < 1e-2:
                continue
            p = rng.uniform(-2, 2, size=2)
            lam = barycentric(tri, p)
            assert lam.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.allclose(lam @ tri, p, atol=1e-11)


class TestLocate:
    def test_interior_point_matches_bruteforce(self, mesh2):
        tid = mesh2.locate((0.9, 0.9))
        hits = [
            t
            for t in range(mesh2.n_triangles)
            if point_in_triangle(mesh2.vertices[mesh2.triangles[t]], (0.9, 0.9))
        ]
        assert hits == [tid]

    def test_outside_returns_none(self, mesh2):
        assert mesh2.locate((2.0, 2.0)) is None

    def test_shared_edge_resolves_to_lowest_id(self, mesh2):
        (va, vb), (t1, _t2) = mesh2.interior_edges()[0]
        mid = 0.5 * (mesh2.vertices[va] + mesh2.vertices[vb])
        assert mesh2.locate(mid) == t1

    def test_locate_barycentric_round_trip(self, mesh32):
        rng = np.random.default_rng(11)
        pts = rng.uniform(0.001, 0.999, size=(1000, 2))
        idx, lam = mesh32.locate_many(pts)
        assert (idx >= 0).all()
        rebuilt = np.einsum(
            "ni,nij->nj", lam, mesh32.vertices[mesh32.triangles[idx]]
        )
        assert np.abs(rebuilt - pts).max() < 1e-12

    def test_outside_iff_not_contained(self, mesh2):
        rng = np.random.default_rng(3)
        pts = rng.uniform(-0.5, 1.5, size=(400, 2))
        idx, _ = mesh2.locate_many(pts)
        for p, tid in zip(pts, idx):
            contained = any(
                point_in_triangle(mesh2.vertices[tri], p) for tri in mesh2.triangles
            )
            assert contained == (tid >= 0)


class TestSerialization:
    def test_json_round_trip(self, mesh32):
        text = mesh32.to_json()
        doc = json.loads(text)
        assert set(doc) == {"vertices", "triangles"}
        back = Triangulation.from_json(text)
        assert np.array_equal(back.vertices, mesh32.vertices)
        assert np.array_equal(back.triangles, mesh32.triangles)

    def test_import_validates_conformity(self):
        from imtreg import MeshFailure

        # three triangles sharing one edge cannot form a planar mesh
        doc = json.dumps(
            {
                "vertices": [[0, 0], [1, 0], [0, 1], [1, 1], [-1, 0.5]],
                "triangles": [[0, 1, 2], [1, 3, 2], [0, 2, 4], [0, 1, 2]],
            }
        )
        with pytest.raises(MeshFailure):
            Triangulation.from_json(doc)
