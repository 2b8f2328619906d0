"""Planar polygon primitives shared by the mesh and basis layers.

All polygons are simple vertex loops in counter-clockwise order, given as
``(n, 2)`` float arrays.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog


def cross2(u, v) -> float:
    """z-component of the cross product of two planar vectors."""
    return float(u[0] * v[1] - u[1] * v[0])


def signed_area(vertices: np.ndarray) -> float:
    """Shoelace signed area; positive for counter-clockwise loops."""
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_centroid(vertices: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon."""
    x, y = vertices[:, 0], vertices[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * np.sum(cross)
    if abs(area) < 1e-300:
        return vertices.mean(axis=0)
    cx = np.sum((x + xn) * cross) / (6.0 * area)
    cy = np.sum((y + yn) * cross) / (6.0 * area)
    return np.array([cx, cy])


def polygon_diameter(vertices: np.ndarray) -> float:
    """Largest pairwise vertex distance."""
    diff = vertices[:, None, :] - vertices[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=2)).max())


def edge_vectors(vertices: np.ndarray):
    """Per-edge tangents, outward unit normals and lengths (CCW loop)."""
    tang = np.roll(vertices, -1, axis=0) - vertices
    lengths = np.linalg.norm(tang, axis=1)
    unit = tang / lengths[:, None]
    # interior lies left of a CCW traversal, so outward is the right normal
    normals = np.column_stack([unit[:, 1], -unit[:, 0]])
    return tang, normals, lengths


def is_convex(vertices: np.ndarray, tol: float = 0.0) -> bool:
    """True when every corner makes a non-right turn (CCW loop)."""
    e = np.roll(vertices, -1, axis=0) - vertices
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    return bool(np.all(cross >= -tol))


def is_simple(vertices: np.ndarray) -> bool:
    """Brute-force segment intersection test for loop simplicity."""
    n = len(vertices)
    if n < 3:
        return False
    segs = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # shared endpoint
            if _segments_cross(*segs[i], *segs[j]):
                return False
    return True


def _segments_cross(p0, p1, q0, q1) -> bool:
    d1 = cross2(p1 - p0, q0 - p0)
    d2 = cross2(p1 - p0, q1 - p0)
    d3 = cross2(q1 - q0, p0 - q0)
    d4 = cross2(q1 - q0, p1 - q0)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    return False


def kernel_chebyshev_center(vertices: np.ndarray):
    """Chebyshev center and radius of the polygon kernel.

    The kernel is the intersection of the inner half-planes of all edges,
    i.e. the locus of points seeing the whole polygon.  For convex polygons
    it coincides with the polygon itself.  An empty kernel yields a
    non-positive radius.

    Returns
    -------
    (center, radius) : (ndarray, float)
    """
    _, normals, _ = edge_vectors(vertices)
    inward = -normals
    # maximize r  s.t.  inward_i . x - r >= inward_i . v_i
    a_ub = np.column_stack([-inward, np.ones(len(vertices))])
    b_ub = -np.einsum("ij,ij->i", inward, vertices)
    bounds = [(None, None), (None, None), (None, None)]
    res = linprog(c=[0.0, 0.0, -1.0], A_ub=a_ub, b_ub=b_ub, bounds=bounds,
                  method="highs")
    if not res.success:
        return polygon_centroid(vertices), -1.0
    center = np.array(res.x[:2])
    return center, float(res.x[2])


def interior_anchor(vertices: np.ndarray) -> np.ndarray:
    """A point seeing the full polygon, used to fan-triangulate.

    Uses the centroid when it lies in the kernel (the common convex case),
    otherwise the Chebyshev center of the kernel.  Raises ``ValueError``
    when the kernel is empty; callers fall back to ear clipping.
    """
    centroid = polygon_centroid(vertices)
    _, normals, _ = edge_vectors(vertices)
    gaps = np.einsum("ij,ij->i", normals, centroid[None, :] - vertices)
    if np.all(gaps <= -1e-12 * polygon_diameter(vertices)):
        return centroid
    center, radius = kernel_chebyshev_center(vertices)
    if radius <= 0.0:
        raise ValueError("polygon has an empty kernel")
    return center


def ear_clip(vertices: np.ndarray) -> list:
    """Triangulate a simple CCW polygon into index triples by ear clipping."""
    idx = list(range(len(vertices)))
    triangles = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(vertices) ** 2:
            raise ValueError("ear clipping failed; polygon may be degenerate")
        n = len(idx)
        clipped = False
        for j in range(n):
            i0, i1, i2 = idx[(j - 1) % n], idx[j], idx[(j + 1) % n]
            a, b, c = vertices[i0], vertices[i1], vertices[i2]
            if cross2(b - a, c - b) <= 0:
                continue  # reflex corner
            if any(_in_triangle(vertices[m], a, b, c)
                   for m in idx if m not in (i0, i1, i2)):
                continue
            triangles.append((i0, i1, i2))
            idx.pop(j)
            clipped = True
            break
        if not clipped:
            raise ValueError("ear clipping failed; polygon may be non-simple")
    triangles.append(tuple(idx))
    return triangles


def _in_triangle(p, a, b, c) -> bool:
    d0 = cross2(b - a, p - a)
    d1 = cross2(c - b, p - b)
    d2 = cross2(a - c, p - c)
    return (d0 >= 0) and (d1 >= 0) and (d2 >= 0)
