"""Global numbering, assembly of the discrete problem, and the sparse solve.

The global matrix scatters the verified per-element stiffness blocks; the
right side pairs the L2 projection of the load with the full moment matrix
of each element, so only dof data is ever needed.  Dirichlet data is imposed
by elimination, keeping the reduced system symmetric positive definite.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .mesh import PolyMesh
from .polybasis import LocalElement, gauss_lobatto
from .projectors import LocalProjectors, verify_coercivity


class AssemblyError(RuntimeError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass
class DofMap:
    """Global indices: vertex dofs, edge-interior dofs, element moments.

    Edge dofs are stored along the canonical edge direction (ascending
    vertex index); elements traversing an edge backwards see the reversed
    slice, so both sides address identical unknowns.
    """

    mesh: PolyMesh
    degree: int

    def __post_init__(self):
        k = self.degree
        self.per_edge = k - 1
        self.n_moment = k * (k - 1) // 2
        self.edge_base = self.mesh.n_vertices
        self.moment_base = self.edge_base + self.mesh.n_edges * self.per_edge
        self.total = self.moment_base + self.mesh.n_polygons * self.n_moment

    def edge_dofs(self, edge: int) -> np.ndarray:
        start = self.edge_base + edge * self.per_edge
        return np.arange(start, start + self.per_edge)

    def cell_dofs(self, pi: int) -> np.ndarray:
        mesh = self.mesh
        loop = mesh.polygons[pi]
        ids = [loop]
        for j, eid in enumerate(mesh.polygon_edges[pi]):
            block = self.edge_dofs(eid)
            if mesh.polygon_edge_reversed[pi][j]:
                block = block[::-1]
            ids.append(block)
        start = self.moment_base + pi * self.n_moment
        ids.append(np.arange(start, start + self.n_moment))
        return np.concatenate(ids).astype(int)

    def boundary_dofs(self) -> np.ndarray:
        mesh = self.mesh
        flags = np.zeros(self.total, dtype=bool)
        flags[: mesh.n_vertices] = mesh.boundary_vertex
        for eid in np.flatnonzero(mesh.boundary_edge):
            flags[self.edge_dofs(eid)] = True
        return flags

    def nodal_positions(self) -> np.ndarray:
        """Coordinates of every vertex and edge dof (canonical order)."""
        mesh = self.mesh
        coords = [mesh.vertices]
        if self.per_edge:
            ref, _ = gauss_lobatto(self.degree + 1)
            interior = 0.5 * (ref[1:-1, None] + 1.0)
            for a, b in mesh.edges:
                pa, pb = mesh.vertices[a], mesh.vertices[b]
                coords.append(pa + interior * (pb - pa))
        return np.vstack(coords)


@dataclass
class ElementCache:
    """Everything the estimator pass reuses for one element."""

    index: int
    element: LocalElement
    projectors: LocalProjectors
    diffusion: float
    dofs: np.ndarray
    load_coeffs: np.ndarray
    load_rule_degree: int


@dataclass
class LinearSystem:
    """Reduced SPD system with the Dirichlet lifting folded into the rhs."""

    matrix: scipy.sparse.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    dirichlet_values: np.ndarray
    total: int

    def expand(self, reduced: np.ndarray) -> np.ndarray:
        full = self.dirichlet_values.copy()
        full[self.free] = reduced
        return full


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("SFVEM_THREADS", "1")))
    except ValueError:
        return 1


def _build_cache(args) -> ElementCache:
    (pi, coords, degree, kval, load, dofs, grade_corner, depth) = args
    corner = None
    if grade_corner is not None and np.any(
            np.all(np.abs(coords - grade_corner) < 1e-12, axis=1)):
        corner = grade_corner
    elem = LocalElement(coords, grade_corner=corner, grade_depth=depth)
    proj = verify_coercivity(elem, degree, diffusion=kval)
    rule_degree = max(2 * (degree + proj.enlargement) + 2, 2 * degree + 4)
    rule = elem.interior_rule(rule_degree)
    mono = elem.basis(degree).eval(rule.points)
    rhs = (rule.weights * load(rule.points)) @ mono
    fcoef = np.linalg.solve(elem.mass_matrix(degree), rhs)
    return ElementCache(pi, elem, proj, kval, dofs, fcoef, rule_degree)


def assemble(mesh: PolyMesh, degree: int, diffusion, load, dirichlet=None,
             grade_corner=None, grade_depth: int = 3):
    """Assemble the discrete problem on a mesh.

    Parameters
    ----------
    diffusion : scalar or (n_polygons,) array
        Piecewise-constant diffusion value per polygon.
    load : callable
        Vectorized source term, ``(n, 2) -> (n,)``.
    dirichlet : callable, optional
        Boundary data interpolated at boundary vertex and edge nodes; zero
        when omitted.
    grade_corner : point, optional
        Vertex toward which element quadrature is geometrically graded
        (singular-load runs).

    Returns
    -------
    (LinearSystem, list[ElementCache], DofMap)
    """
    kvals = np.broadcast_to(np.asarray(diffusion, dtype=float),
                            (mesh.n_polygons,))
    if np.any(kvals <= 0):
        raise AssemblyError("diffusion values must be positive")
    dofmap = DofMap(mesh, degree)
    jobs = [(pi, mesh.polygon_coords(pi), degree, float(kvals[pi]), load,
             dofmap.cell_dofs(pi), grade_corner, grade_depth)
            for pi in range(mesh.n_polygons)]
    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            caches = list(pool.map(_build_cache, jobs))
    else:
        caches = [_build_cache(job) for job in jobs]

    rows, cols, vals = [], [], []
    rhs = np.zeros(dofmap.total)
    for cache in caches:
        ids = cache.dofs
        stiff = cache.projectors.stiffness
        rows.append(np.repeat(ids, len(ids)))
        cols.append(np.tile(ids, len(ids)))
        vals.append(stiff.ravel())
        rhs[ids] += cache.projectors.moments.T @ cache.load_coeffs
    matrix = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dofmap.total, dofmap.total)).tocsr()

    fixed = dofmap.boundary_dofs()
    values = np.zeros(dofmap.total)
    if dirichlet is not None:
        positions = dofmap.nodal_positions()
        nodal_fixed = fixed[: len(positions)]
        values[: len(positions)][nodal_fixed] = dirichlet(
            positions[nodal_fixed])
    free = ~fixed
    reduced = matrix[free][:, free].tocsr()
    lifted = rhs[free] - matrix[free][:, fixed] @ values[fixed]
    system = LinearSystem(reduced, lifted, free, values, dofmap.total)
    return system, caches, dofmap


def solve(system: LinearSystem, method: str = "direct",
          rtol: float = 1e-12) -> np.ndarray:
    """Solve the reduced system and expand to the full dof vector.

    The direct route is a sparse LU factorization; the iterative route is
    diagonally preconditioned conjugate gradients.  Both are checked against
    the stated relative residual.
    """
    if method not in ("direct", "cg"):
        raise ValueError(f"unknown solver {method!r}")
    a, b = system.matrix, system.rhs
    if a.shape[0] == 0:
        return system.expand(np.zeros(0))
    if method == "direct":
        x = scipy.sparse.linalg.spsolve(a.tocsc(), b)
    elif method == "cg":
        diag = a.diagonal()
        if np.any(diag <= 0):
            raise SolverError("non-positive diagonal; system is not SPD")
        precond = scipy.sparse.diags(1.0 / diag)
        x, info = scipy.sparse.linalg.cg(a, b, rtol=rtol, atol=0.0, M=precond,
                                         maxiter=20 * a.shape[0])
        if info != 0:
            raise SolverError(f"conjugate gradients failed (info={info})")
    scale = np.linalg.norm(b)
    residual = np.linalg.norm(a @ x - b)
    if not np.isfinite(residual) or (scale > 0 and residual > 1e-8 * scale):
        raise SolverError(
            f"solver residual {residual:.3e} too large (|b|={scale:.3e}); "
            "assembly may have produced a singular system")
    return system.expand(x)
