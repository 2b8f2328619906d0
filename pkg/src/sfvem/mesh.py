"""Conforming polygonal tessellations: construction, import, and queries.

A :class:`PolyMesh` stores vertices and CCW polygon loops and derives the
edge topology on construction.  Generators produce the three mesh families
used by the experiment harness (distorted cartesian grids, concave star
grids, Lloyd-relaxed clipped Voronoi) on the unit square or the L-shaped
domain; each generated mesh remembers its recipe so uniform refinement can
regenerate the family with doubled resolution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    edge_vectors,
    is_convex,
    is_simple,
    kernel_chebyshev_center,
    polygon_centroid,
    polygon_diameter,
    signed_area,
)

UNIT_SQUARE = "unit_square"
L_SHAPE = "l_shape"

_L_SHAPE_LOOP = np.array([
    [-1.0, -1.0], [0.0, -1.0], [0.0, 0.0], [1.0, 0.0],
    [1.0, 1.0], [-1.0, 1.0],
])


class MeshError(ValueError):
    """A mesh violates a structural invariant."""


class MeshFormatError(MeshError):
    """A mesh file could not be parsed; carries the offending line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RefinementError(RuntimeError):
    """Uniform refinement requested on a mesh without a generator recipe."""


def domain_polygon(domain) -> np.ndarray:
    """Boundary loop of a named domain or an (xmin, xmax, ymin, ymax) box."""
    if isinstance(domain, str):
        if domain == UNIT_SQUARE:
            return np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        if domain == L_SHAPE:
            return _L_SHAPE_LOOP.copy()
        raise ValueError(f"unknown domain {domain!r}")
    x0, x1, y0, y1 = domain
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])


def domain_area(domain) -> float:
    return signed_area(domain_polygon(domain))


class PolyMesh:
    """Immutable conforming polygonal tessellation.

    Parameters
    ----------
    vertices : (n, 2) array
        Vertex coordinates.
    polygons : sequence of int arrays
        Counter-clockwise vertex loops.
    region_id : (m,) int array, optional
        Per-polygon tag selecting the piecewise-constant diffusion value.
    recipe : dict, optional
        Generator family and parameters, kept for uniform refinement.

    Construction validates simplicity, orientation, conformity (each edge
    shared by at most two polygons, no vertex interior to another polygon's
    edge) and derives edge topology, boundary flags and size measures.
    """

    def __init__(self, vertices, polygons, region_id=None, recipe=None,
                 validate: bool = True):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.polygons = [np.asarray(p, dtype=int) for p in polygons]
        if region_id is None:
            region_id = np.zeros(len(self.polygons), dtype=int)
        self.region_id = np.asarray(region_id, dtype=int)
        self.recipe = recipe
        if len(self.region_id) != len(self.polygons):
            raise MeshError("region_id length does not match polygon count")
        self._build_topology()
        if validate:
            self._validate()

    # -- construction helpers ------------------------------------------------

    def _build_topology(self):
        edge_index: dict = {}
        edges = []
        edge_polys: list = []
        self.polygon_edges = []
        self.polygon_edge_reversed = []
        for pi, loop in enumerate(self.polygons):
            eids = np.empty(len(loop), dtype=int)
            rev = np.empty(len(loop), dtype=bool)
            for j in range(len(loop)):
                a, b = int(loop[j]), int(loop[(j + 1) % len(loop)])
                key = (min(a, b), max(a, b))
                eid = edge_index.get(key)
                if eid is None:
                    eid = len(edges)
                    edge_index[key] = eid
                    edges.append(key)
                    edge_polys.append([])
                edge_polys[eid].append(pi)
                eids[j] = eid
                rev[j] = a > b
            self.polygon_edges.append(eids)
            self.polygon_edge_reversed.append(rev)
        self.edges = np.array(edges, dtype=int).reshape(-1, 2)
        self.edge_polygons = [tuple(p) for p in edge_polys]
        self.boundary_edge = np.array([len(p) == 1 for p in edge_polys])
        self.areas = np.array([signed_area(self.vertices[p])
                               for p in self.polygons])
        self.centroids = np.array([polygon_centroid(self.vertices[p])
                                   for p in self.polygons])
        self.diameters = np.array([polygon_diameter(self.vertices[p])
                                   for p in self.polygons])
        self.edge_lengths = np.linalg.norm(
            self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]],
            axis=1) if len(self.edges) else np.zeros(0)
        bverts = np.zeros(len(self.vertices), dtype=bool)
        if len(self.edges):
            bverts[self.edges[self.boundary_edge].ravel()] = True
        self.boundary_vertex = bverts

    def _validate(self):
        for pi, loop in enumerate(self.polygons):
            if len(loop) < 3:
                raise MeshError(f"polygon {pi} has fewer than 3 vertices")
            if len(np.unique(loop)) != len(loop):
                raise MeshError(f"polygon {pi} repeats a vertex")
            if loop.min() < 0 or loop.max() >= len(self.vertices):
                raise MeshError(f"polygon {pi} references a missing vertex")
            if self.areas[pi] <= 0:
                raise MeshError(f"polygon {pi} is not CCW (area "
                                f"{self.areas[pi]:.3e})")
            if not is_simple(self.vertices[loop]):
                raise MeshError(f"polygon {pi} is self-intersecting")
        for eid, polys in enumerate(self.edge_polygons):
            if len(polys) > 2:
                a, b = self.edges[eid]
                raise MeshError(f"edge ({a}, {b}) shared by {len(polys)} "
                                "polygons")
        self._check_hanging_nodes()

    def _check_hanging_nodes(self):
        # a nonconforming interface leaves both halves flagged as boundary;
        # detect any vertex strictly inside a boundary edge
        for eid in np.flatnonzero(self.boundary_edge):
            a, b = self.edges[eid]
            pa, pb = self.vertices[a], self.vertices[b]
            direction = pb - pa
            length2 = direction @ direction
            tol = 1e-9 * np.sqrt(length2)
            rel = self.vertices - pa
            t = (rel @ direction) / length2
            dist = np.abs(rel[:, 0] * direction[1] - rel[:, 1] * direction[0])
            dist /= np.sqrt(length2)
            inside = (dist < tol) & (t > 1e-9) & (t < 1 - 1e-9)
            inside[[a, b]] = False
            if inside.any():
                v = int(np.flatnonzero(inside)[0])
                raise MeshError(
                    f"hanging node: vertex {v} lies inside edge ({a}, {b})")

    # -- queries --------------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_polygons(self) -> int:
        return len(self.polygons)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    def polygon_coords(self, i: int) -> np.ndarray:
        return self.vertices[self.polygons[i]]

    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_edge)

    def with_regions(self, region_id) -> "PolyMesh":
        """Copy of the mesh carrying new per-polygon region tags."""
        out = PolyMesh.__new__(PolyMesh)
        out.__dict__.update(self.__dict__)
        out.region_id = np.asarray(region_id, dtype=int)
        if len(out.region_id) != self.n_polygons:
            raise MeshError("region_id length does not match polygon count")
        return out

    def edge_outward_normal(self, polygon: int, local_edge: int) -> np.ndarray:
        loop = self.vertices[self.polygons[polygon]]
        _, normals, _ = edge_vectors(loop)
        return normals[local_edge]


# ---------------------------------------------------------------------------
# patches and quality


@dataclass(frozen=True)
class Patch:
    """A named set of polygons around an element or edge."""

    kind: str
    members: tuple


@dataclass
class MeshQualityReport:
    """Shape-regularity measurements backing the mesh assumptions."""

    star_radius: np.ndarray         # inradius of each polygon kernel
    min_edge_ratio: np.ndarray      # min edge length / diameter, per polygon
    max_vertex_count: int
    max_elements_per_vertex: int
    worst_ratio: float              # min over polygons of both ratios

    def violations(self, threshold: float = 0.0) -> np.ndarray:
        per_poly = np.minimum(self.star_radius, self.min_edge_ratio)
        return np.flatnonzero(per_poly <= threshold)


@dataclass
class MeshPatches:
    """All patch collections plus the quality report."""

    vertex_neighborhoods: list      # per polygon: Patch over shared vertices
    edge_patches: list              # per edge: the incident polygons
    extended_edge_patches: list     # per edge: union of neighborhoods
    element_edge_patches: list      # per polygon: union of its edge patches
    quality: MeshQualityReport


def quality_report(mesh: PolyMesh) -> MeshQualityReport:
    rho = np.empty(mesh.n_polygons)
    edge_ratio = np.empty(mesh.n_polygons)
    for i, loop in enumerate(mesh.polygons):
        coords = mesh.vertices[loop]
        _, radius = kernel_chebyshev_center(coords)
        rho[i] = max(radius, 0.0) / mesh.diameters[i]
        _, _, lengths = edge_vectors(coords)
        edge_ratio[i] = lengths.min() / mesh.diameters[i]
    counts = np.zeros(mesh.n_vertices, dtype=int)
    for loop in mesh.polygons:
        counts[loop] += 1
    worst = float(np.minimum(rho, edge_ratio).min()) if mesh.n_polygons else 0.0
    return MeshQualityReport(
        star_radius=rho,
        min_edge_ratio=edge_ratio,
        max_vertex_count=max(len(p) for p in mesh.polygons),
        max_elements_per_vertex=int(counts.max()),
        worst_ratio=worst,
    )


def build_patches(mesh: PolyMesh) -> MeshPatches:
    """Vertex- and edge-based element patches plus the quality report.

    The vertex neighborhood of a polygon collects every polygon sharing at
    least one vertex with it (itself included); edge patches collect the one
    or two polygons incident to an edge.
    """
    vertex_to_polys: list = [[] for _ in range(mesh.n_vertices)]
    for pi, loop in enumerate(mesh.polygons):
        for v in loop:
            vertex_to_polys[v].append(pi)
    neighborhoods = []
    for pi, loop in enumerate(mesh.polygons):
        members = set()
        for v in loop:
            members.update(vertex_to_polys[v])
        neighborhoods.append(Patch("vertex_neighborhood",
                                   tuple(sorted(members))))
    edge_patches = [Patch("edge", tuple(sorted(p)))
                    for p in mesh.edge_polygons]
    extended = []
    for polys in mesh.edge_polygons:
        members = set()
        for pi in polys:
            members.update(neighborhoods[pi].members)
        extended.append(Patch("extended_edge", tuple(sorted(members))))
    element_edge = []
    for pi in range(mesh.n_polygons):
        members = set()
        for eid in mesh.polygon_edges[pi]:
            members.update(mesh.edge_polygons[eid])
        element_edge.append(Patch("element_edge", tuple(sorted(members))))
    return MeshPatches(neighborhoods, edge_patches, extended, element_edge,
                       quality_report(mesh))


# ---------------------------------------------------------------------------
# generators


def _grid_cells(n: int, domain):
    """Axis-aligned grid over the domain bounding box, cut to the domain."""
    loop = domain_polygon(domain)
    x0, x1 = loop[:, 0].min(), loop[:, 0].max()
    y0, y1 = loop[:, 1].min(), loop[:, 1].max()
    if domain == L_SHAPE and n % 2:
        raise MeshError("L-shape grids need an even cell count per side")
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    vid = -np.ones((n + 1, n + 1), dtype=int)
    verts = []
    cells = []
    for j in range(n):
        for i in range(n):
            cx = 0.5 * (xs[i] + xs[i + 1])
            cy = 0.5 * (ys[j] + ys[j + 1])
            if domain == L_SHAPE and cx > 0 and cy < 0:
                continue
            corner_ids = []
            for (ii, jj) in ((i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)):
                if vid[ii, jj] < 0:
                    vid[ii, jj] = len(verts)
                    verts.append((xs[ii], ys[jj]))
                corner_ids.append(vid[ii, jj])
            cells.append(corner_ids)
    return np.array(verts), cells, (xs[1] - xs[0], ys[1] - ys[0])


def generate_distorted_cartesian(n: int, distortion: float = 0.0,
                                 seed: int = 0, domain=UNIT_SQUARE,
                                 interfaces: Optional[tuple] = None,
                                 max_attempts: int = 100) -> PolyMesh:
    """Cartesian grid with randomly displaced interior vertices.

    Every interior vertex moves by a uniform random vector bounded
    componentwise by ``distortion`` times the cell size; boundary vertices
    stay put and vertices on declared interface lines slide only along
    them, so piecewise-constant data stays aligned.  Displacements that
    break convexity are redrawn a bounded number of times.
    """
    if n < 2:
        raise MeshError("need at least 2 cells per side")
    if not 0.0 <= distortion < 0.5:
        raise MeshError("distortion must lie in [0, 0.5)")
    verts, cells, spacing = _grid_cells(n, domain)
    base = PolyMesh(verts, cells)
    recipe = {"family": "distorted", "n": n, "distortion": distortion,
              "seed": seed, "domain": domain, "interfaces": interfaces}
    if distortion == 0.0:
        return PolyMesh(verts, cells, recipe=recipe)
    rng = np.random.default_rng(seed)
    x_lines, y_lines = interfaces if interfaces else ((), ())
    movable = ~base.boundary_vertex
    bound = distortion * np.asarray(spacing)
    for _ in range(max_attempts):
        shift = rng.uniform(-bound, bound, size=verts.shape)
        shift[~movable] = 0.0
        for line in x_lines:
            shift[np.abs(verts[:, 0] - line) < 1e-12, 0] = 0.0
        for line in y_lines:
            shift[np.abs(verts[:, 1] - line) < 1e-12, 1] = 0.0
        moved = verts + shift
        if all(is_convex(moved[c], tol=1e-12 * spacing[0] * spacing[1]) and
               signed_area(moved[c]) > 0 for c in cells):
            return PolyMesh(moved, cells, recipe=recipe)
    raise MeshError("could not find a convex displacement; "
                    "reduce the distortion")


def generate_star_concave(n: int, concavity: float = 0.3, domain=UNIT_SQUARE,
                          interfaces: Optional[tuple] = None) -> PolyMesh:
    """Checkerboard of concave star octagons and matching filler octagons.

    Every grid edge gains a midpoint vertex; midpoints of interior edges are
    pulled toward the centroid of their star-colored cell by the concavity
    factor, denting the star cells and bulging the fillers, while boundary
    and interface midpoints stay in place to preserve conformity and
    alignment.
    """
    if n < 2 or n % 2:
        raise MeshError("star concave grids need an even n >= 2")
    if not 0.0 < concavity < 1.0:
        raise MeshError("concavity must lie in (0, 1)")
    verts, cells, spacing = _grid_cells(n, domain)
    base = PolyMesh(verts, cells)
    x_lines, y_lines = interfaces if interfaces else ((), ())

    centers = base.centroids
    star = np.zeros(base.n_polygons, dtype=bool)
    for pi in range(base.n_polygons):
        i = int(round((centers[pi, 0] - verts[:, 0].min()) / spacing[0] - 0.5))
        j = int(round((centers[pi, 1] - verts[:, 1].min()) / spacing[1] - 0.5))
        star[pi] = (i + j) % 2 == 0

    coords = [tuple(v) for v in verts]
    midpoint_id = np.empty(base.n_edges, dtype=int)
    for eid, (a, b) in enumerate(base.edges):
        mid = 0.5 * (verts[a] + verts[b])
        if not base.boundary_edge[eid]:
            owners = [p for p in base.edge_polygons[eid] if star[p]]
            pinned = (any(abs(mid[0] - line) < 1e-12 for line in x_lines) or
                      any(abs(mid[1] - line) < 1e-12 for line in y_lines))
            if owners and not pinned:
                mid = mid + concavity * (centers[owners[0]] - mid)
        midpoint_id[eid] = len(coords)
        coords.append(tuple(mid))

    octagons = []
    for pi, loop in enumerate(base.polygons):
        ring = []
        for j in range(4):
            ring.append(int(loop[j]))
            ring.append(int(midpoint_id[base.polygon_edges[pi][j]]))
        octagons.append(ring)
    recipe = {"family": "starconcave", "n": n, "concavity": concavity,
              "domain": domain, "interfaces": interfaces}
    mesh = PolyMesh(np.array(coords), octagons, recipe=recipe)
    report = quality_report(mesh)
    if report.star_radius.min() <= 0:
        raise MeshError("concavity produced a polygon with empty kernel")
    return mesh


def _far_ghosts(boundary: np.ndarray) -> np.ndarray:
    """Distant points bounding every real Voronoi region.

    Their bisectors with any seed inside the domain stay far outside it, so
    clipping against the domain polygon is unaffected.
    """
    span = boundary.max() - boundary.min()
    center = boundary.mean(axis=0)
    return center + 10 * span * np.array(
        [[1, 1], [-1, 1], [-1, -1], [1, -1], [1, 0], [0, 1], [-1, 0], [0, -1]])


def _clipped_voronoi_cells(points: np.ndarray, boundary: np.ndarray, region,
                           strict: bool = True):
    from scipy.spatial import Voronoi
    import shapely
    from shapely.geometry import Point, Polygon as ShapelyPolygon

    vor = Voronoi(np.vstack([points, _far_ghosts(boundary)]))
    cells = []
    for i in range(len(points)):
        ids = vor.regions[vor.point_region[i]]
        if -1 in ids or len(ids) < 3:
            raise MeshError("unbounded Voronoi cell; seeds degenerate")
        cell = ShapelyPolygon(vor.vertices[ids])
        if not cell.is_valid:
            cell = cell.buffer(0)
        clipped = cell.intersection(region)
        if clipped.geom_type == "MultiPolygon" and not strict:
            # territory wrapped around the notch mid-relaxation: keep the
            # piece holding the seed and let later sweeps separate the rest
            seat = Point(points[i])
            clipped = max(clipped.geoms,
                          key=lambda g: (g.contains(seat), g.area))
        if clipped.is_empty or clipped.geom_type != "Polygon":
            raise MeshError("Voronoi cell clipped to a degenerate shape")
        cells.append(shapely.geometry.polygon.orient(clipped))
    return cells


def generate_voronoi_lloyd(n: int, iterations: int = 50, seed: int = 0,
                           domain=UNIT_SQUARE, initial_points=None,
                           collapse: float = 0.12) -> PolyMesh:
    """Clipped Voronoi tessellation of n seeds after Lloyd relaxation.

    The Voronoi cells of the seeds are intersected with the domain polygon,
    which partitions the domain exactly; Lloyd steps move each seed to its
    cell centroid.  A final pass welds edges shorter than ``collapse`` times
    the nominal seed spacing (interior clusters merge to their mean,
    boundary clusters stay on their boundary segment) to remove the tiny
    edges raw Voronoi diagrams produce.  Coincident seeds are rejected.
    """
    from shapely.geometry import Polygon as ShapelyPolygon

    if n < 4:
        raise MeshError("need at least 4 seeds")
    boundary = domain_polygon(domain)
    region = ShapelyPolygon(boundary)
    rng = np.random.default_rng(seed)
    if initial_points is not None:
        points = np.asarray(initial_points, dtype=float).copy()
        if len(points) != n:
            raise MeshError("initial_points length does not match n")
    else:
        points = _sample_in_domain(rng, n, boundary, region)

    for step in range(iterations + 1):
        diffs = points[:, None, :] - points[None, :, :]
        dist = np.sqrt((diffs**2).sum(axis=2)) + np.eye(n)
        if dist.min() < 1e-12:
            raise MeshError("coincident Voronoi seeds")
        cells = _clipped_voronoi_cells(points, boundary, region,
                                       strict=(step == iterations))
        points = np.array([[c.centroid.x, c.centroid.y] for c in cells])

    spacing = np.sqrt(region.area / n)
    loops = [np.asarray(c.exterior.coords)[:-1] for c in cells]
    verts, polys = _merge_vertices(loops, tol=1e-9 * spacing)
    if collapse > 0:
        verts, polys = _collapse_short_edges(verts, polys, boundary,
                                             collapse * spacing)
    recipe = {"family": "voronoi", "n": n, "iterations": iterations,
              "seed": seed, "domain": domain}
    return PolyMesh(verts, polys, recipe=recipe)


def _collapse_short_edges(verts: np.ndarray, polys, boundary: np.ndarray,
                          tol: float):
    """Weld endpoint clusters of edges shorter than tol.

    Interior clusters collapse to their centroid, which leaves the traced
    domain area untouched; clusters with boundary vertices keep a boundary
    representative (a domain corner when present) so the boundary polyline
    stays exactly on the domain outline.
    """
    parent = list(range(len(verts)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for loop in polys:
        for j in range(len(loop)):
            a, b = int(loop[j]), int(loop[(j + 1) % len(loop)])
            if np.linalg.norm(verts[a] - verts[b]) < tol:
                parent[find(a)] = find(b)

    clusters: dict = {}
    for v in range(len(verts)):
        clusters.setdefault(find(v), []).append(v)

    seg_dirs = np.roll(boundary, -1, axis=0) - boundary
    out_verts: list = []
    remap = np.empty(len(verts), dtype=int)
    for members in clusters.values():
        rep = None
        if len(members) > 1:
            pts = verts[members]
            corner = next((c for c in boundary
                           if np.any(np.all(np.abs(pts - c) < 1e-9, axis=1))),
                          None)
            if corner is not None:
                rep = np.asarray(corner, float)
            else:
                on_seg = [_boundary_segment(p, boundary, seg_dirs)
                          for p in pts]
                segs = {s for s in on_seg if s is not None}
                if len(segs) == 1:
                    rep = pts[[i for i, s in enumerate(on_seg)
                               if s is not None]].mean(axis=0)
                elif not segs:
                    rep = pts.mean(axis=0)
                # straddling two boundary segments: leave the cluster alone
        if rep is not None:
            idx = len(out_verts)
            out_verts.append(rep)
            remap[members] = idx
        else:
            for v in members:
                remap[v] = len(out_verts)
                out_verts.append(verts[v])

    new_polys = []
    for loop in polys:
        ids = [int(remap[int(v)]) for v in loop]
        cleaned = [ids[i] for i in range(len(ids))
                   if ids[i] != ids[(i + 1) % len(ids)]]
        if len(cleaned) >= 3:
            new_polys.append(np.array(cleaned, dtype=int))
    return np.array(out_verts), new_polys


def _boundary_segment(p, boundary: np.ndarray, seg_dirs: np.ndarray):
    for i in range(len(boundary)):
        d = seg_dirs[i]
        rel = p - boundary[i]
        t = (rel @ d) / (d @ d)
        off = abs(rel[0] * d[1] - rel[1] * d[0]) / np.linalg.norm(d)
        if off < 1e-9 and -1e-9 <= t <= 1 + 1e-9:
            return i
    return None


def _sample_in_domain(rng, n, boundary, region) -> np.ndarray:
    from shapely.geometry import Point

    x0, x1 = boundary[:, 0].min(), boundary[:, 0].max()
    y0, y1 = boundary[:, 1].min(), boundary[:, 1].max()
    out = []
    while len(out) < n:
        cand = rng.uniform((x0, y0), (x1, y1), size=(4 * n, 2))
        for p in cand:
            if region.contains(Point(p)):
                out.append(p)
                if len(out) == n:
                    break
    return np.array(out)


def _merge_vertices(loops: Sequence[np.ndarray], tol: float):
    """Weld nearly coincident vertices across polygon loops."""
    coords: list = []
    buckets: dict = {}

    def lookup(p):
        key = (round(p[0] / tol), round(p[1] / tol))
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for idx in buckets.get((key[0] + dx, key[1] + dy), ()):
                    if abs(coords[idx][0] - p[0]) <= tol and \
                       abs(coords[idx][1] - p[1]) <= tol:
                        return idx
        idx = len(coords)
        coords.append((float(p[0]), float(p[1])))
        buckets.setdefault(key, []).append(idx)
        return idx

    polys = []
    for loop in loops:
        ids = [lookup(p) for p in loop]
        cleaned = [ids[i] for i in range(len(ids))
                   if ids[i] != ids[(i + 1) % len(ids)]]
        polys.append(np.array(cleaned, dtype=int))
    return np.array(coords), polys


def refine_uniform(mesh: PolyMesh) -> PolyMesh:
    """Regenerate the mesh's family with doubled resolution.

    Grid families double the per-side cell count; the Voronoi family
    quadruples the seed count so the mesh size roughly halves.  Imported
    meshes carry no recipe and are refused.
    """
    if not mesh.recipe:
        raise RefinementError("mesh was not produced by a generator; "
                              "uniform refinement is unsupported")
    r = dict(mesh.recipe)
    family = r.pop("family")
    if family == "distorted":
        return generate_distorted_cartesian(2 * r["n"], r["distortion"],
                                            r["seed"], r["domain"],
                                            r["interfaces"])
    if family == "starconcave":
        return generate_star_concave(2 * r["n"], r["concavity"], r["domain"],
                                     r["interfaces"])
    if family == "voronoi":
        return generate_voronoi_lloyd(4 * r["n"], r["iterations"], r["seed"],
                                      r["domain"])
    raise RefinementError(f"unknown generator family {family!r}")


# ---------------------------------------------------------------------------
# file format


def save_mesh(mesh: PolyMesh, path) -> None:
    """Write the text format: header, vertices, polygons, optional regions."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("sfvem-mesh 1\n")
        f.write(f"vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        f.write(f"polygons {mesh.n_polygons}\n")
        for loop in mesh.polygons:
            f.write(" ".join([str(len(loop))] + [str(int(v)) for v in loop]))
            f.write("\n")
        if np.any(mesh.region_id != 0):
            f.write(f"regions {mesh.n_polygons}\n")
            for r in mesh.region_id:
                f.write(f"{int(r)}\n")


class _Tokens:
    """Whitespace token stream tracking line numbers, '#' starts a comment."""

    def __init__(self, path):
        self.items = []
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                text = line.split("#", 1)[0]
                for tok in text.split():
                    self.items.append((tok, lineno))
        self.pos = 0
        self.line = 1

    def next(self, what: str) -> str:
        if self.pos >= len(self.items):
            raise MeshFormatError(f"unexpected end of file, expected {what}",
                                  self.line)
        tok, self.line = self.items[self.pos]
        self.pos += 1
        return tok

    def next_int(self, what: str) -> int:
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise MeshFormatError(f"expected integer {what}, got {tok!r}",
                                  self.line) from None

    def next_float(self, what: str) -> float:
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise MeshFormatError(f"expected number {what}, got {tok!r}",
                                  self.line) from None

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.items)


def load_mesh(path) -> PolyMesh:
    """Parse the text format and validate the resulting mesh.

    Boundary edges are always recomputed from polygon incidence rather than
    read from the file.  Malformed counts, non-CCW loops and nonconforming
    edges raise :class:`MeshFormatError` / :class:`MeshError` with context.
    """
    toks = _Tokens(path)
    magic, version = toks.next("header"), toks.next("format version")
    if magic != "sfvem-mesh" or version != "1":
        raise MeshFormatError(
            f"bad header {magic!r} {version!r}, expected 'sfvem-mesh 1'",
            toks.line)
    if toks.next("'vertices' keyword") != "vertices":
        raise MeshFormatError("expected 'vertices' section", toks.line)
    nv = toks.next_int("vertex count")
    if nv < 3:
        raise MeshFormatError(f"vertex count {nv} too small", toks.line)
    verts = np.array([[toks.next_float("x"), toks.next_float("y")]
                      for _ in range(nv)])
    if toks.next("'polygons' keyword") != "polygons":
        raise MeshFormatError("expected 'polygons' section", toks.line)
    npoly = toks.next_int("polygon count")
    polys = []
    for _ in range(npoly):
        cnt = toks.next_int("vertex count of polygon")
        if cnt < 3:
            raise MeshFormatError(f"polygon with {cnt} vertices", toks.line)
        loop = [toks.next_int("vertex index") for _ in range(cnt)]
        if min(loop) < 0 or max(loop) >= nv:
            raise MeshFormatError("vertex index out of range", toks.line)
        polys.append(loop)
    regions = None
    if not toks.exhausted:
        if toks.next("'regions' keyword") != "regions":
            raise MeshFormatError("expected 'regions' section", toks.line)
        cnt = toks.next_int("region count")
        if cnt != npoly:
            raise MeshFormatError(
                f"region count {cnt} does not match polygon count {npoly}",
                toks.line)
        regions = [toks.next_int("region id") for _ in range(cnt)]
    if not toks.exhausted:
        raise MeshFormatError("trailing content after mesh data", toks.line)
    return PolyMesh(verts, polys, region_id=regions)
