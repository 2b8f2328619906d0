import numpy as np
import pytest

from sfvem.polybasis import (
    LocalElement,
    gram_matrix_exact,
    polynomial_dim,
)
from sfvem.projectors import (
    ElementDofs,
    ElementVerificationError,
    KERNEL_RTOL,
    full_moment_matrix,
    h1_projection_matrix,
    interpolate,
    interpolate_poly,
    verify_coercivity,
)

from conftest import shape_zoo

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
PENTAGON = np.array([[0.0, 0.0], [1.1, -0.1], [1.5, 0.8], [0.6, 1.3],
                     [-0.2, 0.9]])


def test_dof_layout_counts():
    for k in (1, 2, 3):
        for nv in (3, 4, 8):
            layout = ElementDofs(k, nv)
            assert layout.total == k * nv + k * (k - 1) // 2
            ids = layout.edge_trace_ids(0)
            assert len(ids) == k + 1
            assert ids[0] == 0 and ids[-1] == 1


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_h1_projection_reproduces_polynomials(degree, rng):
    for verts in shape_zoo(rng, 6):
        elem = LocalElement(verts)
        proj = h1_projection_matrix(elem, degree)
        nk = polynomial_dim(degree)
        for t in range(nk):
            coeffs = np.zeros(nk)
            coeffs[t] = 1.0
            dofs = interpolate_poly(elem, degree, coeffs)
            assert np.abs(proj @ dofs - coeffs).max() < 1e-11


def test_h1_projection_idempotent(rng):
    elem = LocalElement(PENTAGON)
    for degree in (1, 2, 3):
        proj = h1_projection_matrix(elem, degree)
        layout = ElementDofs(degree, elem.n_vertices)
        dofs = rng.standard_normal(layout.total)
        coeffs = proj @ dofs
        again = proj @ interpolate_poly(elem, degree, coeffs)
        assert np.abs(again - coeffs).max() < 1e-11 * max(
            1.0, np.abs(coeffs).max())


def test_h1_projection_linear_ramp_on_square():
    # dofs (0, 1, 1, 0) on the unit square are the trace of x
    elem = LocalElement(UNIT_SQUARE)
    proj = h1_projection_matrix(elem, 1)
    coeffs = proj @ np.array([0.0, 1.0, 1.0, 0.0])
    pts = np.array([[0.3, 0.8], [0.7, 0.2]])
    vals = elem.basis(1).eval(pts) @ coeffs
    assert np.abs(vals - pts[:, 0]).max() < 1e-12
    # gradient orthogonality via boundary quadrature: for p in {x, y},
    # <grad p, grad(phi - proj phi)> = boundary integral of the trace gap
    # times dp/dn (p is harmonic)
    for t in range(4):
        dofs = np.zeros(4)
        dofs[t] = 1.0
        c = proj @ dofs
        for direction in (np.array([1.0, 0.0]), np.array([0.0, 1.0])):
            acc = 0.0
            for i in range(4):
                rule = elem.edge_rule(i, 3)
                trace = _edge_trace_k1(elem, i, dofs, rule.points)
                poly_vals = elem.basis(1).eval(rule.points) @ c
                dn = direction @ elem.normals[i]
                acc += rule.weights @ ((trace - poly_vals) * dn)
            assert abs(acc) < 1e-13


def _edge_trace_k1(elem, i, dofs, points):
    a = elem.vertices[i]
    b = elem.vertices[(i + 1) % elem.n_vertices]
    t = ((points - a) @ (b - a)) / ((b - a) @ (b - a))
    nxt = (i + 1) % elem.n_vertices
    return dofs[i] * (1 - t) + dofs[nxt] * t


def test_h1_projection_mean_constraints(rng):
    for verts in (UNIT_SQUARE, PENTAGON):
        elem = LocalElement(verts)
        # k = 1 pins the boundary mean of the projection to the trace mean
        proj = h1_projection_matrix(elem, 1)
        dofs = rng.standard_normal(elem.n_vertices)
        coeffs = proj @ dofs
        lhs = rhs = 0.0
        for i in range(elem.n_vertices):
            rule = elem.edge_rule(i, 3)
            lhs += rule.weights @ (elem.basis(1).eval(rule.points) @ coeffs)
            rhs += rule.weights @ _edge_trace_k1(elem, i, dofs, rule.points)
        assert abs(lhs - rhs) < 1e-12
        # k > 1 pins the interior mean to the first moment dof
        for degree in (2, 3):
            proj = h1_projection_matrix(elem, degree)
            layout = ElementDofs(degree, elem.n_vertices)
            dofs = rng.standard_normal(layout.total)
            coeffs = proj @ dofs
            interior_mean = elem.monomial_integrals(degree) @ coeffs
            assert abs(interior_mean -
                       elem.area * dofs[layout.moment_block.start]) < 1e-12


def test_full_moments_match_exact_for_polynomials(rng):
    for degree in (1, 2, 3):
        elem = LocalElement(PENTAGON)
        proj = h1_projection_matrix(elem, degree)
        moments = full_moment_matrix(elem, degree, proj)
        nk = polynomial_dim(degree)
        coeffs = rng.standard_normal(nk)
        dofs = interpolate_poly(elem, degree, coeffs)
        exact = elem.mass_matrix(degree) @ coeffs
        scale = np.abs(exact).max()
        assert np.abs(moments @ dofs - exact).max() < 1e-12 * scale


def test_moment_dual_basis_and_constant():
    elem = LocalElement(PENTAGON)
    degree = 3
    layout = ElementDofs(degree, elem.n_vertices)
    proj = h1_projection_matrix(elem, degree)
    moments = full_moment_matrix(elem, degree, proj)
    # basis function dual to the first internal moment
    dofs = np.zeros(layout.total)
    dofs[layout.moment_block.start] = 1.0
    low = moments[: layout.n_moment] @ dofs
    expected = np.zeros(layout.n_moment)
    expected[0] = elem.area
    assert np.abs(low - expected).max() < 1e-14
    # constant function: zeroth moment equals the area
    ones = interpolate_poly(elem, degree, np.eye(polynomial_dim(degree))[0])
    assert abs((moments @ ones)[0] - elem.area) < 1e-13


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_gradient_projection_reproduces_gradients(degree, rng):
    for verts in shape_zoo(rng, 6):
        elem = LocalElement(verts)
        proj = verify_coercivity(elem, degree)
        nk = polynomial_dim(degree)
        coeffs = rng.standard_normal(nk)
        dofs = interpolate_poly(elem, degree, coeffs)
        field_coeffs = proj.grad_proj @ dofs
        pts = elem.interior_rule(4).points
        field = np.einsum("qid,i->qd", proj.space.eval(pts), field_coeffs)
        exact = np.einsum("qid,i->qd", elem.basis(degree).grad(pts), coeffs)
        scale = max(1.0, np.abs(exact).max())
        assert np.abs(field - exact).max() < 1e-11 * scale
        # constants project to the zero field
        const = interpolate_poly(elem, degree, np.eye(nk)[0])
        assert np.abs(proj.grad_proj @ const).max() < \
            1e-11 * max(1.0, np.abs(proj.grad_proj).max())


def test_gradient_projection_orthogonality_residual(rng):
    # residual of the defining system evaluated with the independently
    # computed exact Gram matrix
    for degree in (1, 2, 3):
        for verts in (PENTAGON, UNIT_SQUARE):
            elem = LocalElement(verts)
            proj = verify_coercivity(elem, degree)
            space = proj.space
            exact_gram = gram_matrix_exact(
                space,
                elem.monomial_integrals(2 * space.components.degree))
            rhs = proj.gram @ proj.grad_proj
            residual = exact_gram @ proj.grad_proj - rhs
            scale = max(1.0, np.abs(rhs).max())
            assert np.abs(residual).max() < 1e-11 * scale


def test_verify_coercivity_square_kernel():
    elem = LocalElement(UNIT_SQUARE)
    for degree in (1, 2, 3):
        proj = verify_coercivity(elem, degree)
        base = proj.stiffness / proj.diffusion
        assert np.array_equal(proj.stiffness, proj.stiffness.T)
        eigs = np.linalg.eigvalsh(base)
        cutoff = KERNEL_RTOL * np.trace(base) / base.shape[0]
        assert int(np.count_nonzero(eigs < cutoff)) == 1
        assert eigs.min() > -1e-12 * np.abs(base).max()


def test_verify_coercivity_constants_in_kernel():
    elem = LocalElement(UNIT_SQUARE)
    for degree in (1, 2, 3):
        proj = verify_coercivity(elem, degree, diffusion=3.7)
        const = interpolate_poly(elem, degree,
                                 np.eye(polynomial_dim(degree))[0])
        assert np.abs(proj.stiffness @ const).max() < 1e-12 * max(
            1.0, np.abs(proj.stiffness).max())


def test_verify_coercivity_escalates_forced_underresolution():
    # 4 dofs cannot be controlled by the two-dimensional degree-1 curl
    # space, so starting from zero enlargement must escalate
    elem = LocalElement(UNIT_SQUARE)
    proj = verify_coercivity(elem, 1, start_enlargement=0)
    assert proj.enlargement >= 1


def test_stiffness_patch_identity(rng):
    # dofs(p)^T S dofs(q) equals the weighted gradient product for
    # polynomials p, q
    kval = 2.5
    for degree in (1, 2, 3):
        for verts in shape_zoo(rng, 3):
            elem = LocalElement(verts)
            proj = verify_coercivity(elem, degree, diffusion=kval)
            nk = polynomial_dim(degree)
            p, q = rng.standard_normal((2, nk))
            dp = interpolate_poly(elem, degree, p)
            dq = interpolate_poly(elem, degree, q)
            basis = elem.basis(degree)
            dx, dy = basis.gradient_matrices()
            mass = elem.mass_matrix(degree - 1) if degree > 1 else \
                np.array([[elem.area]])
            exact = kval * (p @ (dx.T @ mass @ dx + dy.T @ mass @ dy) @ q)
            got = dp @ proj.stiffness @ dq
            assert abs(got - exact) < 1e-11 * max(1.0, abs(exact))


def test_interpolate_function_agrees_with_poly_route(rng):
    elem = LocalElement(PENTAGON)
    for degree in (2, 3):
        nk = polynomial_dim(degree)
        coeffs = rng.standard_normal(nk)
        basis = elem.basis(degree)
        via_func = interpolate(elem, degree,
                               lambda p: basis.eval(p) @ coeffs)
        via_poly = interpolate_poly(elem, degree, coeffs)
        assert np.abs(via_func - via_poly).max() < 1e-12


def test_verification_error_reports_geometry():
    elem = LocalElement(UNIT_SQUARE)
    try:
        # impossible demand: kernel check with a huge forced start makes the
        # loop run out immediately past the cap
        verify_coercivity(elem, 1, start_enlargement=100)
    except ElementVerificationError as err:
        assert "vertices" in str(err)
    else:
        raise AssertionError("expected verification failure")
