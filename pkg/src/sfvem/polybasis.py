"""Scaled monomial bases, the enlarged gradient space, and exact quadrature.

Scalar polynomials on an element are expanded in scaled monomials

    m_a(x) = ((x - c) / h)^a1 * ((y - c) / h)^a2,   |a| <= degree,

ordered graded-lexicographically, where ``c`` is the element centroid and
``h`` its diameter.  Gradients of the discrete solution are projected onto
the vector space spanned by position-scaled monomials of degree up to
``k - 2`` together with curls of monomials of degree up to ``k + extra``;
the enlargement ``extra`` is chosen per element so that the projected
stiffness keeps a one-dimensional (constant) kernel.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import (
    cross2,
    ear_clip,
    edge_vectors,
    interior_anchor,
    polygon_centroid,
    polygon_diameter,
    signed_area,
)


def polynomial_dim(degree: int) -> int:
    """Dimension of bivariate polynomials of total degree <= degree."""
    if degree < 0:
        return 0
    return (degree + 1) * (degree + 2) // 2


@lru_cache(maxsize=None)
def monomial_exponents(degree: int) -> np.ndarray:
    """Exponent pairs in graded-lexicographic order, shape (dim, 2)."""
    exps = [(d - i, i) for d in range(degree + 1) for i in range(d + 1)]
    arr = np.array(exps if exps else np.zeros((0, 2)), dtype=int).reshape(-1, 2)
    arr.setflags(write=False)
    return arr


def monomial_index(a: int, b: int) -> int:
    return polynomial_dim(a + b - 1) + b


def select_enlargement(degree: int, n_vertices: int) -> int:
    """Smallest enlargement making the gradient space large enough.

    Returns the least ``extra >= 0`` with
    ``dim P_{degree+extra} >= degree * n_vertices``, which is exactly the
    count needed for the projected local form to control all degrees of
    freedom up to the constant mode.  Runtime kernel verification may still
    raise it on unfavourable geometries.
    """
    if degree < 1 or n_vertices < 3:
        raise ValueError("need degree >= 1 and n_vertices >= 3")
    extra = 0
    while polynomial_dim(degree + extra) < degree * n_vertices:
        extra += 1
    return extra


class ScaledMonomialBasis:
    """Monomials of the shifted, diameter-scaled coordinates of an element."""

    def __init__(self, centroid, diameter: float, degree: int):
        self.centroid = np.asarray(centroid, dtype=float)
        self.diameter = float(diameter)
        self.degree = int(degree)
        self.exponents = monomial_exponents(degree)

    def __len__(self) -> int:
        return len(self.exponents)

    def _scaled(self, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - self.centroid) / self.diameter

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Values at points, shape (n_points, n_members)."""
        xi = self._scaled(points)
        px = np.power(xi[:, 0:1], np.arange(self.degree + 1))
        py = np.power(xi[:, 1:2], np.arange(self.degree + 1))
        return px[:, self.exponents[:, 0]] * py[:, self.exponents[:, 1]]

    def grad(self, points: np.ndarray) -> np.ndarray:
        """Gradients at points, shape (n_points, n_members, 2)."""
        xi = self._scaled(points)
        pw = np.power(xi[:, :, None], np.arange(self.degree + 1))
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        out = np.zeros((len(xi), len(self), 2))
        ax = np.where(a > 0, a - 1, 0)
        by = np.where(b > 0, b - 1, 0)
        out[:, :, 0] = a * pw[:, 0, ax] * pw[:, 1, b] / self.diameter
        out[:, :, 1] = b * pw[:, 0, a] * pw[:, 1, by] / self.diameter
        # masked columns of x^(a-1) for a=0 evaluated as x^0; zero them out
        out[:, a == 0, 0] = 0.0
        out[:, b == 0, 1] = 0.0
        return out

    def gradient_matrices(self):
        """Coefficient operators (Dx, Dy) mapping member coefficients of
        degree ``d`` polynomials to coefficients of their derivatives in the
        degree ``d - 1`` basis; each has shape (dim(d-1), dim(d))."""
        nd, nlow = len(self), polynomial_dim(self.degree - 1)
        dx = np.zeros((nlow, nd))
        dy = np.zeros((nlow, nd))
        for i, (a, b) in enumerate(self.exponents):
            if a > 0:
                dx[monomial_index(a - 1, b), i] = a / self.diameter
            if b > 0:
                dy[monomial_index(a, b - 1), i] = b / self.diameter
        return dx, dy

    def laplacian_matrix(self) -> np.ndarray:
        """Coefficients of member Laplacians in the degree-2 lower basis."""
        nd, nlow = len(self), polynomial_dim(self.degree - 2)
        lap = np.zeros((nlow, nd))
        h2 = self.diameter**2
        for i, (a, b) in enumerate(self.exponents):
            if a >= 2:
                lap[monomial_index(a - 2, b), i] += a * (a - 1) / h2
            if b >= 2:
                lap[monomial_index(a, b - 2), i] += b * (b - 1) / h2
        return lap


class VectorPolySpace:
    """Enlarged vector-polynomial space for gradient projection.

    The ordered basis is ``xi * m_a`` over the degree ``k - 2`` monomials
    (``xi`` the scaled position vector) followed by ``curl m_b`` over the
    degree ``1 .. k + extra`` monomials, with ``curl p = (dp/dy, -dp/dx)``.
    Members are stored through component coefficients in the scaled monomial
    basis of degree ``max(k - 1, k + extra - 1)``.
    """

    def __init__(self, basis: ScaledMonomialBasis, degree: int, extra: int):
        if basis.degree < degree + extra:
            raise ValueError("component basis degree too small")
        self.degree = int(degree)
        self.extra = int(extra)
        self.n_position = polynomial_dim(degree - 2)
        n_curl = polynomial_dim(degree + extra) - 1
        self.dimension = self.n_position + n_curl
        comp_degree = max(degree - 1, degree + extra - 1)
        self.components = ScaledMonomialBasis(basis.centroid, basis.diameter,
                                              comp_degree)
        ncomp = len(self.components)
        h = basis.diameter
        cx = np.zeros((self.dimension, ncomp))
        cy = np.zeros((self.dimension, ncomp))
        for i, (a, b) in enumerate(monomial_exponents(degree - 2)):
            cx[i, monomial_index(a + 1, b)] = 1.0
            cy[i, monomial_index(a, b + 1)] = 1.0
        curl_exps = monomial_exponents(degree + extra)[1:]
        for j, (a, b) in enumerate(curl_exps):
            i = self.n_position + j
            if b > 0:
                cx[i, monomial_index(a, b - 1)] = b / h
            if a > 0:
                cy[i, monomial_index(a - 1, b)] = -a / h
        self.coeff_x = cx
        self.coeff_y = cy
        self.curl_exponents = curl_exps

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Member values at points, shape (n_points, dimension, 2)."""
        vals = self.components.eval(points)
        out = np.empty((vals.shape[0], self.dimension, 2))
        out[:, :, 0] = vals @ self.coeff_x.T
        out[:, :, 1] = vals @ self.coeff_y.T
        return out

    def divergence_matrix(self) -> np.ndarray:
        """Member divergences as coefficients in the degree ``k - 2`` basis.

        Curl members are divergence free; the position members satisfy
        ``div(xi m_a) = (2 + |a|) m_a / h``.
        """
        nlow = polynomial_dim(self.degree - 2)
        div = np.zeros((self.dimension, nlow))
        h = self.components.diameter
        for i, (a, b) in enumerate(monomial_exponents(self.degree - 2)):
            div[i, i] = (2 + a + b) / h
        return div


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Points and positive weights integrating over a region exactly up to
    the rule's construction degree."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ values)


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    """Gauss nodes and weights on [-1, 1], exact to degree 2n - 1."""
    nodes, weights = np.polynomial.legendre.leggauss(max(n, 1))
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=None)
def gauss_lobatto(n: int):
    """Gauss-Lobatto nodes and weights on [-1, 1], n >= 2 points.

    Includes both endpoints; exact for polynomials up to degree 2n - 3.
    """
    if n < 2:
        raise ValueError("Gauss-Lobatto needs at least two points")
    if n == 2:
        nodes, weights = np.array([-1.0, 1.0]), np.array([1.0, 1.0])
    else:
        coeff = np.zeros(n)
        coeff[n - 1] = 1.0
        leg = np.polynomial.legendre.Legendre(coeff)
        interior = np.sort(leg.deriv().roots().real)
        nodes = np.concatenate([[-1.0], interior, [1.0]])
        weights = 2.0 / (n * (n - 1) * leg(nodes) ** 2)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def segment_rule(p0, p1, degree: int) -> QuadratureRule:
    """Gauss rule along the physical segment p0 -> p1."""
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    nodes, weights = gauss_legendre((degree + 2) // 2)
    pts = p0 + 0.5 * (nodes[:, None] + 1.0) * (p1 - p0)
    length = np.linalg.norm(p1 - p0)
    return QuadratureRule(pts, weights * 0.5 * length, degree)


@lru_cache(maxsize=None)
def _reference_triangle_rule(degree: int):
    # collapsed tensor Gauss via (u, v) -> (u(1-v), uv), Jacobian u; a degree
    # d integrand becomes degree d+1 in u and d in v
    nu = (degree + 3) // 2
    nv = (degree + 2) // 2
    xu, wu = gauss_legendre(nu)
    xv, wv = gauss_legendre(nv)
    u = 0.5 * (xu + 1.0)
    v = 0.5 * (xv + 1.0)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ww = 0.25 * np.outer(wu, wv) * uu
    pts = np.column_stack([(uu * (1.0 - vv)).ravel(), (uu * vv).ravel()])
    return pts, ww.ravel()


def triangle_rule(a, b, c, degree: int) -> QuadratureRule:
    """Positive-weight rule on the physical triangle (a, b, c)."""
    ref_pts, ref_w = _reference_triangle_rule(degree)
    a, b, c = (np.asarray(p, float) for p in (a, b, c))
    pts = a + ref_pts[:, 0:1] * (b - a) + ref_pts[:, 1:2] * (c - a)
    jac = abs(cross2(b - a, c - a))
    return QuadratureRule(pts, ref_w * jac, degree)


def _fan_triangles(vertices: np.ndarray):
    try:
        anchor = interior_anchor(vertices)
        return [(anchor, vertices[i], vertices[(i + 1) % len(vertices)])
                for i in range(len(vertices))]
    except ValueError:
        tris = ear_clip(vertices)
        return [(vertices[i], vertices[j], vertices[k]) for i, j, k in tris]


def polygon_rule(vertices: np.ndarray, degree: int,
                 grade_corner=None, grade_depth: int = 3) -> QuadratureRule:
    """Quadrature on a simple polygon by fan (or ear-clip) triangulation.

    When ``grade_corner`` matches a polygon vertex, triangles touching it
    are split geometrically toward the corner ``grade_depth`` times so the
    rule better resolves point singularities there.
    """
    pieces = []
    corner = None if grade_corner is None else np.asarray(grade_corner, float)
    for tri in _fan_triangles(vertices):
        if corner is not None and any(np.allclose(p, corner, atol=1e-12)
                                      for p in tri):
            pieces.extend(_graded_split(tri, corner, grade_depth))
        else:
            pieces.append(tri)
    rules = [triangle_rule(*tri, degree) for tri in pieces]
    pts = np.vstack([r.points for r in rules])
    w = np.concatenate([r.weights for r in rules])
    return QuadratureRule(pts, w, degree)


def _graded_split(tri, corner, depth: int):
    """Geometric refinement of a triangle toward one of its vertices."""
    order = sorted(range(3), key=lambda i: np.linalg.norm(tri[i] - corner))
    s, a, b = tri[order[0]], tri[order[1]], tri[order[2]]
    pieces = []
    for level in range(depth):
        lo, hi = 0.5 ** (level + 1), 0.5**level
        a0, b0 = s + lo * (a - s), s + lo * (b - s)
        a1, b1 = s + hi * (a - s), s + hi * (b - s)
        pieces.append((a0, a1, b1))
        pieces.append((a0, b1, b0))
    lo = 0.5**depth
    pieces.append((s, s + lo * (a - s), s + lo * (b - s)))
    return pieces


# ---------------------------------------------------------------------------
# exact integrals and element bundle


def integrate_monomials(vertices: np.ndarray, centroid, diameter: float,
                        degree: int) -> np.ndarray:
    """Exact integrals of the scaled monomials over the polygon.

    Uses the divergence theorem with the radial field
    ``F = (x - c) m_a / (2 + |a|)``, whose flux through a straight edge has
    the constant factor ``(v - c) . n``; edge integrals are then exact
    one-dimensional Gauss quadratures.
    """
    basis = ScaledMonomialBasis(centroid, diameter, degree)
    _, normals, _ = edge_vectors(vertices)
    total = np.zeros(len(basis))
    orders = basis.exponents.sum(axis=1)
    n = len(vertices)
    for i in range(n):
        p0, p1 = vertices[i], vertices[(i + 1) % n]
        dist = float((p0 - basis.centroid) @ normals[i])
        rule = segment_rule(p0, p1, degree)
        total += dist * (rule.weights @ basis.eval(rule.points))
    return total / (2.0 + orders)


def monomial_mass_matrix(integrals: np.ndarray, degree: int) -> np.ndarray:
    """Mass matrix of scaled monomials from integrals up to 2 * degree."""
    exps = monomial_exponents(degree)
    pair = exps[:, None, :] + exps[None, :, :]
    total = pair.sum(axis=2)
    idx = total * (total + 1) // 2 + pair[:, :, 1]
    return integrals[idx]


def gram_matrix(space: VectorPolySpace, rule: QuadratureRule) -> np.ndarray:
    """L2 Gram matrix of the vector space members by quadrature."""
    vals = space.eval(rule.points)
    g = np.einsum("q,qid,qjd->ij", rule.weights, vals, vals, optimize=True)
    return 0.5 * (g + g.T)


def gram_matrix_exact(space: VectorPolySpace,
                      integrals: np.ndarray) -> np.ndarray:
    """Gram matrix through exact monomial integrals (oracle route)."""
    mass = monomial_mass_matrix(integrals, space.components.degree)
    g = space.coeff_x @ mass @ space.coeff_x.T
    g += space.coeff_y @ mass @ space.coeff_y.T
    return 0.5 * (g + g.T)


class LocalElement:
    """Geometry, bases, quadrature and exact integrals for one polygon."""

    def __init__(self, vertices: np.ndarray, grade_corner=None,
                 grade_depth: int = 3):
        self.vertices = np.asarray(vertices, dtype=float)
        self.area = signed_area(self.vertices)
        if self.area <= 0:
            raise ValueError("element polygon must be CCW with positive area")
        self.centroid = polygon_centroid(self.vertices)
        self.diameter = polygon_diameter(self.vertices)
        self.tangents, self.normals, self.edge_lengths = edge_vectors(
            self.vertices)
        self.n_vertices = len(self.vertices)
        self.grade_corner = grade_corner
        self.grade_depth = grade_depth
        self._bases: dict = {}
        self._rules: dict = {}
        self._integrals: dict = {}

    def basis(self, degree: int) -> ScaledMonomialBasis:
        if degree not in self._bases:
            self._bases[degree] = ScaledMonomialBasis(self.centroid,
                                                      self.diameter, degree)
        return self._bases[degree]

    def interior_rule(self, degree: int) -> QuadratureRule:
        if degree not in self._rules:
            self._rules[degree] = polygon_rule(self.vertices, degree,
                                               self.grade_corner,
                                               self.grade_depth)
        return self._rules[degree]

    def monomial_integrals(self, degree: int) -> np.ndarray:
        if degree not in self._integrals:
            self._integrals[degree] = integrate_monomials(
                self.vertices, self.centroid, self.diameter, degree)
        return self._integrals[degree]

    def mass_matrix(self, degree: int) -> np.ndarray:
        return monomial_mass_matrix(self.monomial_integrals(2 * degree),
                                    degree)

    def edge_rule(self, i: int, degree: int) -> QuadratureRule:
        p0 = self.vertices[i]
        p1 = self.vertices[(i + 1) % self.n_vertices]
        return segment_rule(p0, p1, degree)
