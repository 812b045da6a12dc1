"""Triangulations of 2D polygonal domains: construction and point queries.

A mesh is a conforming triangulation (triangles meet only in shared vertices
or full shared edges) with counterclockwise triangles. Meshes are immutable
after construction and safe to share across threads.
"""

import json

import numpy as np
from scipy.spatial import Delaunay
from shapely.geometry import Point, Polygon

from . import _kernels
from .errors import DegeneratePolygon, DegenerateTriangle, MeshFailure

_AREA_RTOL = 1e-10
_LOCATE_TOL = 1e-12


def signed_area(vertices):
    """Signed area of a closed polygon given as an (n, 2) array (shoelace)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def triangle_signed_area(a, b, c):
    """Signed area of triangle (a, b, c); positive when counterclockwise."""
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))


def barycentric(tri_vertices, p):
    """Barycentric coordinates of point ``p`` in a single triangle.

    Parameters
    ----------
    tri_vertices : (3, 2) array of vertex coordinates.
    p : (2,) point.

    Returns
    -------
    (3,) coordinates summing to 1 with p = sum(lam_i * v_i).

    Raises
    ------
    DegenerateTriangle
        If the triangle has numerically zero area.
    """
    v = np.asarray(tri_vertices, dtype=float)
    scale = max(np.abs(v).max(), 1.0)
    area2 = 2.0 * triangle_signed_area(v[0], v[1], v[2])
    if abs(area2) < 1e-14 * scale * scale:
        raise DegenerateTriangle("triangle has zero area")
    mat = np.array([[v[0, 0], v[1, 0], v[2, 0]], [v[0, 1], v[1, 1], v[2, 1]], [1.0, 1.0, 1.0]])
    lam = np.linalg.solve(mat, np.array([p[0], p[1], 1.0]))
    return lam


class Triangulation:
    """Conforming triangle mesh of a simple polygon.

    Attributes
    ----------
    vertices : (V, 2) float array
    triangles : (T, 3) int array, counterclockwise vertex indices
    edges : list of ((va, vb), (tri ids...)) with va < vb, sorted by vertex pair
    boundary : ordered vertex indices of the boundary polygon (closed loop,
        first vertex is the smallest boundary index)
    """

    def __init__(self, vertices, triangles):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        tris = np.asarray(triangles, dtype=np.int64).copy()
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshFailure("vertices must be an (n, 2) array")
        if not np.all(np.isfinite(self.vertices)):
            raise MeshFailure("non-finite vertex coordinates")
        # enforce counterclockwise orientation
        for t in range(tris.shape[0]):
            a, b, c = self.vertices[tris[t]]
            sa = triangle_signed_area(a, b, c)
            if sa < 0:
                tris[t, 1], tris[t, 2] = tris[t, 2], tris[t, 1]
        self.triangles = np.ascontiguousarray(tris)
        self._validate()
        self._build_edges()
        self._build_locators()

    # -- construction helpers -------------------------------------------------

    def _validate(self):
        areas = self.triangle_areas()
        scale = max(float(np.abs(self.vertices).max()), 1.0)
        if np.any(areas <= 1e-14 * scale * scale):
            raise MeshFailure("mesh contains a zero-area triangle")

    def _build_edges(self):
        incident = {}
        for t, (i, j, k) in enumerate(self.triangles):
            for a, b in ((i, j), (j, k), (k, i)):
                key = (min(a, b), max(a, b))
                incident.setdefault(key, []).append(t)
        for key, tris in incident.items():
            if len(tris) > 2:
                raise MeshFailure(f"edge {key} shared by {len(tris)} triangles")
        self.edges = [(key, tuple(sorted(tris))) for key, tris in sorted(incident.items())]
        boundary_edges = [key for key, tris in self.edges if len(tris) == 1]
        self.boundary = self._walk_boundary(boundary_edges)

    def _walk_boundary(self, boundary_edges):
        if not boundary_edges:
            raise MeshFailure("mesh has no boundary")
        nbr = {}
        for a, b in boundary_edges:
            nbr.setdefault(a, []).append(b)
            nbr.setdefault(b, []).append(a)
        if any(len(v) != 2 for v in nbr.values()):
            raise MeshFailure("boundary is not a single closed loop")
        start = min(nbr)
        loop = [start]
        prev, cur = None, start
        while True:
            a, b = nbr[cur]
            nxt = b if a == prev else a
            if nxt == start:
                break
            loop.append(nxt)
            prev, cur = cur, nxt
            if len(loop) > len(boundary_edges):
                raise MeshFailure("boundary walk did not close")
        if len(loop) != len(boundary_edges):
            raise MeshFailure("boundary has more than one loop (holes unsupported)")
        # orient the loop counterclockwise for a stable contract
        if signed_area(self.vertices[loop]) < 0:
            loop = [loop[0]] + loop[1:][::-1]
        return loop

    def _build_locators(self):
        t = self.triangles.shape[0]
        inv_maps = np.empty((t, 3, 3))
        for i, (a, b, c) in enumerate(self.triangles):
            v = self.vertices[[a, b, c]]
            mat = np.array(
                [[v[0, 0], v[1, 0], v[2, 0]], [v[0, 1], v[1, 1], v[2, 1]], [1.0, 1.0, 1.0]]
            )
            inv_maps[i] = np.linalg.inv(mat)
        self._inv_maps = np.ascontiguousarray(inv_maps)

    # -- queries ---------------------------------------------------------------

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    def triangle_areas(self):
        v = self.vertices
        a = v[self.triangles[:, 0]]
        b = v[self.triangles[:, 1]]
        c = v[self.triangles[:, 2]]
        return 0.5 * (
            (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
            - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
        )

    def area(self):
        return float(self.triangle_areas().sum())

    def interior_edges(self):
        """Edges incident to exactly two triangles, as ((va, vb), (t1, t2))."""
        return [(key, tris) for key, tris in self.edges if len(tris) == 2]

    def locate_many(self, points):
        """Locate many points at once.

        Returns (idx, lam): triangle id per point (-1 outside) and barycentric
        coordinates. Points on shared edges resolve to the lowest triangle id.
        """
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        return _kernels.locate_points(self._inv_maps, pts, _LOCATE_TOL)

    def locate(self, p):
        """Triangle id containing point ``p`` or None when outside the mesh."""
        idx, _ = self.locate_many(np.asarray(p, dtype=float)[None, :])
        return None if idx[0] < 0 else int(idx[0])

    def barycentric(self, tri_id, p):
        """Barycentric coordinates of ``p`` with respect to triangle ``tri_id``."""
        return barycentric(self.vertices[self.triangles[tri_id]], p)

    # -- serialization ----------------------------------------------------------

    def to_json(self):
        return json.dumps(
            {
                "vertices": self.vertices.tolist(),
                "triangles": self.triangles.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(np.array(doc["vertices"], dtype=float), np.array(doc["triangles"], dtype=int))


def _polygon_or_raise(boundary_polygon):
    pts = np.asarray(boundary_polygon, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise DegeneratePolygon("polygon needs at least 3 two-dimensional vertices")
    if not np.all(np.isfinite(pts)):
        raise DegeneratePolygon("polygon has non-finite coordinates")
    poly = Polygon(pts)
    if not poly.is_valid or not poly.is_simple:
        raise DegeneratePolygon("polygon is self-intersecting or otherwise invalid")
    if poly.area <= 1e-14 * max(1.0, float(np.abs(pts).max()) ** 2):
        raise DegeneratePolygon("polygon has zero area")
    if signed_area(pts) < 0:
        pts = pts[::-1].copy()
    return pts, Polygon(pts)


def _is_axis_aligned_rectangle(pts):
    if pts.shape[0] != 4:
        return False
    xs, ys = np.unique(pts[:, 0]), np.unique(pts[:, 1])
    if len(xs) != 2 or len(ys) != 2:
        return False
    corners = {(x, y) for x in xs for y in ys}
    return {(p[0], p[1]) for p in pts} == corners


def _structured_rectangle_mesh(pts, target):
    """Uniform mesh of an axis-aligned rectangle: k x k cells, 2 triangles each.

    Cells are split along the anti-diagonal; the lower-left triangle of each
    cell is emitted first so it carries the lower id.
    """
    x0, x1 = pts[:, 0].min(), pts[:, 0].max()
    y0, y1 = pts[:, 1].min(), pts[:, 1].max()
    k = max(1, int(round(np.sqrt(target / 2.0))))
    while 2 * k * k > 2 * target and k > 1:
        k -= 1
    while 2 * k * k * 2 < target:
        k += 1
    xs = np.linspace(x0, x1, k + 1)
    ys = np.linspace(y0, y1, k + 1)
    verts = np.array([(x, y) for y in ys for x in xs])
    tris = []
    for row in range(k):
        for col in range(k):
            v00 = row * (k + 1) + col
            v10 = v00 + 1
            v01 = v00 + (k + 1)
            v11 = v01 + 1
            tris.append((v00, v10, v01))  # lower-left
            tris.append((v10, v11, v01))  # upper-right
    return Triangulation(verts, np.array(tris))


def _delaunay_mesh(pts, poly, target):
    area = poly.area
    spacing = np.sqrt(2.0 * area / target)
    for attempt in range(6):
        boundary_pts = []
        ring = np.vstack([pts, pts[:1]])
        for a, b in zip(ring[:-1], ring[1:]):
            seg = np.linalg.norm(b - a)
            nseg = max(1, int(np.ceil(seg / spacing)))
            for s in range(nseg):
                boundary_pts.append(a + (b - a) * (s / nseg))
        boundary_pts = np.array(boundary_pts)
        xmin, ymin = pts.min(axis=0)
        xmax, ymax = pts.max(axis=0)
        gx = np.arange(xmin + spacing / 2, xmax, spacing)
        gy = np.arange(ymin + spacing / 2, ymax, spacing)
        interior = poly.buffer(-0.35 * spacing)
        grid = [
            (x, y) for x in gx for y in gy if interior.contains(Point(x, y))
        ]
        points = boundary_pts if not grid else np.vstack([boundary_pts, np.array(grid)])
        # drop (near-)duplicates to keep qhull happy
        rounded = np.round(points / (1e-9 * max(1.0, spacing))).astype(np.int64)
        _, keep = np.unique(rounded, axis=0, return_index=True)
        points = points[np.sort(keep)]
        if points.shape[0] < 3:
            spacing *= 0.5
            continue
        dela = Delaunay(points)
        centroids = points[dela.simplices].mean(axis=1)
        inside = np.array([poly.contains(Point(c)) for c in centroids])
        tris = dela.simplices[inside]
        # drop slivers
        v = points
        a, b, c = v[tris[:, 0]], v[tris[:, 1]], v[tris[:, 2]]
        areas = 0.5 * np.abs(
            (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
            - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
        )
        tris = tris[areas > 1e-12 * area]
        if tris.shape[0] == 0:
            spacing *= 0.75
            continue
        used = np.unique(tris)
        remap = -np.ones(points.shape[0], dtype=np.int64)
        remap[used] = np.arange(used.size)
        try:
            mesh = Triangulation(points[used], remap[tris])
        except MeshFailure:
            spacing *= 0.75
            continue
        count_ok = target / 2.0 <= mesh.n_triangles <= 2.0 * target
        area_ok = abs(mesh.area() - area) <= _AREA_RTOL * area
        if count_ok and area_ok:
            return mesh
        if not area_ok:
            spacing *= 0.75
            continue
        spacing *= np.sqrt(mesh.n_triangles / target)
    raise MeshFailure("could not build a conforming mesh at the requested size")


def build_triangulation(boundary_polygon, target_triangle_count):
    """Mesh the interior of a simple polygon.

    The triangle count lands within a factor of 2 of ``target_triangle_count``
    (Delaunay-style refinement cannot hit exact counts). Axis-aligned
    rectangles take a structured fast path that is itself a valid Delaunay
    triangulation; other polygons go through constrained point placement plus
    scipy's Delaunay with outside-triangle filtering.

    Raises
    ------
    DegeneratePolygon
        For self-intersecting, collinear, or zero-area input.
    MeshFailure
        When refinement cannot satisfy the mesh invariants.
    """
    if target_triangle_count < 1:
        raise MeshFailure("target_triangle_count must be >= 1")
    pts, poly = _polygon_or_raise(boundary_polygon)
    if _is_axis_aligned_rectangle(pts):
        mesh = _structured_rectangle_mesh(pts, target_triangle_count)
    else:
        mesh = _delaunay_mesh(pts, poly, target_triangle_count)
    if abs(mesh.area() - poly.area) > _AREA_RTOL * poly.area:
        raise MeshFailure("mesh area does not match polygon area")
    return mesh
