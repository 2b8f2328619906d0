"""Shared helpers: random element shapes and global interpolation."""

import numpy as np
import pytest

from sfvem.polybasis import LocalElement
from sfvem.projectors import interpolate


def random_triangle(rng):
    while True:
        pts = rng.uniform(-1.0, 1.0, size=(3, 2))
        d1, d2 = pts[1] - pts[0], pts[2] - pts[0]
        area = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])
        if abs(area) > 0.1:
            return pts if area > 0 else pts[::-1]


def random_quad(rng):
    base = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return base + rng.uniform(-0.2, 0.2, size=(4, 2))


def star_octagon(rng=None, pull=0.3):
    """Concave 4-pointed star: square corners, midpoints pulled inward."""
    if rng is not None:
        pull = rng.uniform(0.15, 0.45)
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    center = np.array([0.5, 0.5])
    ring = []
    for i in range(4):
        ring.append(corners[i])
        mid = 0.5 * (corners[i] + corners[(i + 1) % 4])
        ring.append(mid + pull * (center - mid))
    return np.array(ring)


def shape_zoo(rng, count):
    """Cycle of triangles, distorted quads and concave star octagons."""
    makers = (random_triangle, random_quad, star_octagon)
    return [makers[i % 3](rng) for i in range(count)]


def global_interpolate(mesh, dofmap, degree, func):
    """Dof vector interpolating a (continuous) function on the whole mesh."""
    values = np.zeros(dofmap.total)
    positions = dofmap.nodal_positions()
    values[: len(positions)] = func(positions)
    nm = dofmap.n_moment
    for pi in range(mesh.n_polygons):
        if nm == 0:
            break
        elem = LocalElement(mesh.polygon_coords(pi))
        local = interpolate(elem, degree, func)
        start = dofmap.moment_base + pi * nm
        values[start: start + nm] = local[-nm:]
    return values


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
