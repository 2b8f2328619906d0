"""Per-element degrees of freedom and the computable projection matrices.

A local function of degree ``k`` on a polygon with ``nv`` vertices is
identified by its vertex values, ``k - 1`` interior Gauss-Lobatto values per
edge, and ``k (k - 1) / 2`` internal moments (scaled by the inverse area)
against the degree ``k - 2`` scaled monomials.  From these data alone three
projections are computable:

* the energy projection onto degree ``k`` polynomials (integration by parts
  moves everything to internal moments and edge traces),
* the full moment matrix against all degree ``k`` monomials (top-degree
  moments inherited from the energy projection),
* the L2 projection of the gradient onto the enlarged vector space, which
  defines the local stiffness without any stabilization term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .polybasis import (
    LocalElement,
    VectorPolySpace,
    gauss_lobatto,
    gram_matrix,
    monomial_exponents,
    polynomial_dim,
    select_enlargement,
)

KERNEL_RTOL = 1e-10        # numerical kernel cutoff, relative to mean diagonal
GRAM_CONDITION_LIMIT = 1e14
MAX_EXTRA_BEYOND_DEGREE = 10


class ElementVerificationError(RuntimeError):
    """Raised when no admissible enlargement yields a rank-one kernel."""

    def __init__(self, message: str, vertices=None):
        if vertices is not None:
            message += "\nelement vertices:\n" + np.array2string(
                np.asarray(vertices), precision=17)
        super().__init__(message)
        self.vertices = vertices


@dataclass(frozen=True)
class ElementDofs:
    """Local dof layout: vertices, edge interiors, then internal moments."""

    degree: int
    n_vertices: int

    @property
    def per_edge(self) -> int:
        return self.degree - 1

    @property
    def n_edge(self) -> int:
        return self.n_vertices * self.per_edge

    @property
    def n_moment(self) -> int:
        return self.degree * (self.degree - 1) // 2

    @property
    def total(self) -> int:
        return self.n_vertices + self.n_edge + self.n_moment

    def edge_block(self, i: int) -> slice:
        start = self.n_vertices + i * self.per_edge
        return slice(start, start + self.per_edge)

    @property
    def moment_block(self) -> slice:
        return slice(self.n_vertices + self.n_edge, self.total)

    def edge_trace_ids(self, i: int) -> np.ndarray:
        """Dofs of the degree-k trace on edge i, ordered along the edge."""
        nxt = (i + 1) % self.n_vertices
        block = self.edge_block(i)
        return np.array([i, *range(block.start, block.stop), nxt])


def edge_nodes(elem: LocalElement, i: int, degree: int) -> np.ndarray:
    """Physical Gauss-Lobatto nodes on edge i (endpoints included)."""
    ref, _ = gauss_lobatto(degree + 1)
    p0 = elem.vertices[i]
    p1 = elem.vertices[(i + 1) % elem.n_vertices]
    return p0 + 0.5 * (ref[:, None] + 1.0) * (p1 - p0)


def dof_coordinates(elem: LocalElement, degree: int) -> np.ndarray:
    """Coordinates of the nodal (vertex and edge) dofs in local order."""
    coords = [elem.vertices]
    if degree > 1:
        for i in range(elem.n_vertices):
            coords.append(edge_nodes(elem, i, degree)[1:-1])
    return np.vstack(coords)


def interpolate(elem: LocalElement, degree: int, func) -> np.ndarray:
    """Dof vector of a function: nodal values plus scaled moments."""
    layout = ElementDofs(degree, elem.n_vertices)
    dofs = np.zeros(layout.total)
    pts = dof_coordinates(elem, degree)
    dofs[: len(pts)] = func(pts)
    if layout.n_moment:
        rule = elem.interior_rule(2 * degree + 2)
        vals = func(rule.points)
        mono = elem.basis(degree - 2).eval(rule.points)
        dofs[layout.moment_block] = (rule.weights * vals) @ mono / elem.area
    return dofs


def interpolate_poly(elem: LocalElement, degree: int,
                     coeffs: np.ndarray) -> np.ndarray:
    """Dof vector of a polynomial given by scaled-monomial coefficients.

    Moments are taken from the exact monomial mass matrix, so polynomial
    reproduction tests are free of quadrature error.
    """
    layout = ElementDofs(degree, elem.n_vertices)
    basis = elem.basis(degree)
    dofs = np.zeros(layout.total)
    pts = dof_coordinates(elem, degree)
    dofs[: len(pts)] = basis.eval(pts) @ coeffs
    if layout.n_moment:
        mass = elem.mass_matrix(degree)
        dofs[layout.moment_block] = (
            mass[: layout.n_moment, :] @ coeffs) / elem.area
    return dofs


def h1_projection_matrix(elem: LocalElement, degree: int) -> np.ndarray:
    """Energy projection of the local basis onto degree-k polynomials.

    Column ``j`` holds the scaled-monomial coefficients of the projection of
    the basis function dual to dof ``j``.  The gradient orthogonality system
    is closed by the interior mean for ``degree > 1`` and the boundary mean
    for ``degree == 1``.
    """
    layout = ElementDofs(degree, elem.n_vertices)
    nk = polynomial_dim(degree)
    basis = elem.basis(degree)

    dx, dy = basis.gradient_matrices()
    mass_low = elem.mass_matrix(degree - 1) if degree > 1 else \
        np.array([[elem.area]])
    stiff = dx.T @ mass_low @ dx + dy.T @ mass_low @ dy

    rhs = np.zeros((nk, layout.total))
    if layout.n_moment:
        lap = basis.laplacian_matrix()
        rhs[:, layout.moment_block] -= elem.area * lap.T
    ref, ref_w = gauss_lobatto(degree + 1)
    for i in range(elem.n_vertices):
        nodes = edge_nodes(elem, i, degree)
        w = ref_w * 0.5 * elem.edge_lengths[i]
        dn = basis.grad(nodes) @ elem.normals[i]
        rhs[:, layout.edge_trace_ids(i)] += (w[:, None] * dn).T

    constraint = np.zeros(nk)
    closure = np.zeros(layout.total)
    if degree > 1:
        constraint[:] = elem.monomial_integrals(degree)
        closure[layout.moment_block.start] = elem.area
    else:
        for i in range(elem.n_vertices):
            rule = elem.edge_rule(i, degree)
            constraint += rule.weights @ basis.eval(rule.points)
            w = ref_w * 0.5 * elem.edge_lengths[i]
            np.add.at(closure, layout.edge_trace_ids(i), w)

    bordered = np.zeros((nk + 1, nk + 1))
    bordered[:nk, :nk] = stiff
    bordered[:nk, nk] = constraint
    bordered[nk, :nk] = constraint
    full_rhs = np.vstack([rhs, closure])
    sol = np.linalg.solve(bordered, full_rhs)
    return sol[:nk]


def full_moment_matrix(elem: LocalElement, degree: int,
                       h1_proj: np.ndarray) -> np.ndarray:
    """Moments of every basis function against all degree-k monomials.

    Rows up to degree ``k - 2`` come straight from the moment dofs; the top
    two degrees use the moments of the energy projection, exact for members
    of the local space by the enhancement constraint.
    """
    layout = ElementDofs(degree, elem.n_vertices)
    nk = polynomial_dim(degree)
    nlow = polynomial_dim(degree - 2)
    mass = elem.mass_matrix(degree)
    moments = mass @ h1_proj
    if nlow:
        moments[:nlow, :] = 0.0
        moments[:nlow, layout.moment_block] = elem.area * np.eye(nlow)
    return moments


def gradient_projection_matrix(elem: LocalElement, degree: int,
                               space: VectorPolySpace,
                               gram: np.ndarray) -> np.ndarray:
    """L2 projection of the basis gradients onto the enlarged space.

    Right sides use only dof data: position members integrate by parts into
    internal moments plus an edge term with constant normal distance factor;
    curl members are divergence free and reduce to edge trace integrals of
    the Lagrange interpolant through the Gauss-Lobatto nodes.
    """
    layout = ElementDofs(degree, elem.n_vertices)
    rhs = np.zeros((space.dimension, layout.total))
    h = elem.diameter
    low_exps = monomial_exponents(degree - 2)
    nlow = len(low_exps)

    if nlow:
        orders = low_exps.sum(axis=1)
        rhs[np.arange(nlow), layout.moment_block.start + np.arange(nlow)] = \
            -(2.0 + orders) / h * elem.area

    ref, ref_w = gauss_lobatto(degree + 1)
    edge_gauss_degree = 2 * degree + space.extra
    for i in range(elem.n_vertices):
        normal = elem.normals[i]
        trace_ids = layout.edge_trace_ids(i)
        if nlow:
            nodes = edge_nodes(elem, i, degree)
            w = ref_w * 0.5 * elem.edge_lengths[i]
            dist = float((elem.vertices[i] - elem.centroid) @ normal) / h
            mono = elem.basis(degree - 2).eval(nodes)
            rhs[:nlow][:, trace_ids] += dist * (w[:, None] * mono).T
        rule = elem.edge_rule(i, edge_gauss_degree)
        lagr = _lagrange_matrix(ref, elem.vertices[i],
                                elem.vertices[(i + 1) % elem.n_vertices],
                                rule.points)
        grads = elem.basis(degree + space.extra).grad(rule.points)
        curl_n = grads[:, 1:, 1] * normal[0] - grads[:, 1:, 0] * normal[1]
        rhs[nlow:][:, trace_ids] += (curl_n * rule.weights[:, None]).T @ lagr

    return scipy.linalg.solve(gram, rhs, assume_a="sym")


def _lagrange_matrix(ref_nodes: np.ndarray, p0, p1,
                     points: np.ndarray) -> np.ndarray:
    """Evaluation matrix of the 1D Lagrange basis on ref_nodes at points."""
    direction = p1 - p0
    t = ((points - p0) @ direction) / (direction @ direction)
    s = 2.0 * t - 1.0
    n = len(ref_nodes)
    out = np.ones((len(points), n))
    for j in range(n):
        for m in range(n):
            if m != j:
                out[:, j] *= (s - ref_nodes[m]) / (ref_nodes[j] - ref_nodes[m])
    return out


@dataclass
class LocalProjectors:
    """Per-element cache of verified projection data."""

    degree: int
    enlargement: int
    diffusion: float
    h1: np.ndarray
    moments: np.ndarray
    grad_proj: np.ndarray
    gram: np.ndarray
    space: VectorPolySpace
    stiffness: np.ndarray
    kernel_eigenvalues: np.ndarray = field(repr=False, default=None)


def verify_coercivity(elem: LocalElement, degree: int,
                      diffusion: float = 1.0,
                      start_enlargement: int | None = None) -> LocalProjectors:
    """Build projectors at the smallest enlargement with a rank-one kernel.

    Starting from the dimension-count default, the enlargement is increased
    whenever the projected stiffness has spurious near-null modes (or the
    Gram matrix is numerically singular), up to ``degree + 10``.
    """
    extra = (select_enlargement(degree, elem.n_vertices)
             if start_enlargement is None else start_enlargement)
    h1 = h1_projection_matrix(elem, degree)
    moments = full_moment_matrix(elem, degree, h1)
    last_reason = "enlargement range exhausted"
    while extra <= degree + MAX_EXTRA_BEYOND_DEGREE:
        space = VectorPolySpace(elem.basis(degree + extra), degree, extra)
        rule = elem.interior_rule(2 * (degree + extra) + 2)
        gram = gram_matrix(space, rule)
        if np.linalg.cond(gram) > GRAM_CONDITION_LIMIT:
            last_reason = f"singular Gram matrix at enlargement {extra}"
            extra += 1
            continue
        grad_proj = gradient_projection_matrix(elem, degree, space, gram)
        base = grad_proj.T @ gram @ grad_proj
        base = 0.5 * (base + base.T)
        eigenvalues = np.linalg.eigvalsh(base)
        cutoff = KERNEL_RTOL * np.trace(base) / base.shape[0]
        kernel_dim = int(np.count_nonzero(eigenvalues < cutoff))
        if kernel_dim == 1:
            return LocalProjectors(degree, extra, diffusion, h1, moments,
                                   grad_proj, gram, space,
                                   diffusion * base, eigenvalues)
        last_reason = (f"kernel dimension {kernel_dim} at enlargement "
                       f"{extra}")
        extra += 1
    raise ElementVerificationError(
        f"coercivity verification failed for degree {degree}: {last_reason}",
        elem.vertices)
