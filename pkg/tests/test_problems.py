import numpy as np
import pytest
import sympy as sp

from sfvem.mesh import domain_polygon
from sfvem.problems import (
    PROBLEM_NAMES,
    _ramp_factory,
    get_problem,
    make_test2,
    make_test3,
)

ALL_PROBLEMS = [get_problem(name) for name in PROBLEM_NAMES]


def _interior_samples(problem, rng, count=100):
    """Random interior points away from interfaces and singularities."""
    loop = domain_polygon(problem.domain)
    lo, hi = loop.min(axis=0), loop.max(axis=0)
    pts = []
    while len(pts) < count:
        p = rng.uniform(lo + 0.01, hi - 0.01)
        if problem.domain == "l_shape" and p[0] > -0.01 and p[1] < 0.01:
            continue
        if any(abs(p[0] - line) < 0.02 for line in problem.interface_lines[0]):
            continue
        if any(abs(p[1] - line) < 0.02 for line in problem.interface_lines[1]):
            continue
        if any(np.hypot(p[0] - s[0], p[1] - s[1]) < 0.05
               for s in problem.singular_points):
            continue
        pts.append(p)
    return np.array(pts)


@pytest.mark.parametrize("problem", ALL_PROBLEMS, ids=lambda p: p.name)
def test_pde_residual_by_finite_differences(problem, rng):
    # -div(K grad u) = f with the divergence taken by central differences
    # of the analytic gradient (step 1e-6); the gradient itself is checked
    # against the solution separately, closing the chain u -> grad u -> f
    pts = _interior_samples(problem, rng)
    step = 1e-6
    grad = problem.gradient
    div = (grad(pts + [step, 0])[:, 0] - grad(pts - [step, 0])[:, 0] +
           grad(pts + [0, step])[:, 1] - grad(pts - [0, step])[:, 1]) / \
        (2 * step)
    k = problem.diffusion_at(pts)
    residual = -k * div - problem.load(pts)
    scale = max(1.0, np.abs(problem.load(pts)).max())
    assert np.abs(residual).max() < 1e-6 * scale


@pytest.mark.parametrize("problem", ALL_PROBLEMS, ids=lambda p: p.name)
def test_gradient_by_finite_differences(problem, rng):
    pts = _interior_samples(problem, rng)
    step = 1e-6
    u = problem.solution
    fd = np.column_stack([
        (u(pts + [step, 0]) - u(pts - [step, 0])) / (2 * step),
        (u(pts + [0, step]) - u(pts - [0, step])) / (2 * step),
    ])
    grad = problem.gradient(pts)
    scale = max(1.0, np.abs(grad).max())
    assert np.abs(grad - fd).max() < 1e-6 * scale


@pytest.mark.parametrize("problem", ALL_PROBLEMS, ids=lambda p: p.name)
def test_boundary_data_matches_solution(problem, rng):
    loop = domain_polygon(problem.domain)
    pts = []
    for i in range(len(loop)):
        a, b = loop[i], loop[(i + 1) % len(loop)]
        t = rng.uniform(0, 1, size=25)
        pts.append(a + t[:, None] * (b - a))
    pts = np.vstack(pts)
    assert np.abs(problem.boundary(pts) - problem.solution(pts)).max() < 1e-12


def test_test1_symbolic_laplacian_oracle():
    x, y = sp.symbols("x y")
    u = sp.sin(2 * sp.pi * x) * sp.sin(2 * sp.pi * y)
    f = sp.simplify(-sp.diff(u, x, 2) - sp.diff(u, y, 2))
    f_func = sp.lambdify((x, y), f)
    problem = get_problem("test1")
    pts = np.array([[0.25, 0.25], [0.1, 0.7], [0.8, 0.37]])
    assert np.abs(problem.load(pts) -
                  f_func(pts[:, 0], pts[:, 1])).max() < 1e-12
    assert abs(problem.solution(np.array([[0.25, 0.25]]))[0] - 1.0) < 1e-15
    assert abs(problem.load(np.array([[0.25, 0.25]]))[0] -
               8 * np.pi**2) < 1e-12
    assert np.abs(problem.gradient(np.array([[0.0, 0.0]]))).max() < 1e-15


@pytest.mark.parametrize("variant,kpair", [("g1", (10.0, 1.0)),
                                           ("g2", (1e-3, 1.0))])
def test_test2_interface_continuity(variant, kpair):
    k_left, k_right = kpair
    ramp, ramp_d, c = _ramp_factory(k_left, k_right)
    # value continuity at the interface, from the two closed forms
    left = -(0.5 * 0.5**2 + c * 0.5) / k_left
    right = -(0.5 * 0.5**2 + c * 0.5 - c - 0.5) / k_right
    assert abs(left - right) < 1e-14
    # flux continuity: both one-sided fluxes equal -(0.5 + c)
    assert abs(k_left * (-(0.5 + c) / k_left) - -(0.5 + c)) < 1e-15
    assert abs(k_left * ramp_d(np.array([0.5 - 1e-13]))[()] -
               k_right * ramp_d(np.array([0.5 + 1e-13]))[()]) < 1e-12
    # endpoints vanish
    assert abs(ramp(np.array([0.0]))[0]) < 1e-15
    assert abs(ramp(np.array([1.0]))[0]) < 1e-14


def test_hump_double_root_at_midpoint():
    problem = make_test2("g1")
    pts = np.array([[0.3, 0.5], [0.7, 0.5]])
    assert np.abs(problem.solution(pts)).max() < 1e-15
    assert np.abs(problem.gradient(pts)[:, 1]).max() < 1e-14


def test_test2_symbolic_load_oracle():
    x, y = sp.symbols("x y")
    for variant, (ka, kb) in (("g1", (10, 1)),
                              ("g2", (sp.Rational(1, 1000), 1))):
        c = -(3 * ka + kb) / (4 * (ka + kb))
        hump = y * (1 - y) * (y - sp.Rational(1, 2)) ** 2
        problem = make_test2(variant)
        for k, xi in ((ka, -(x**2 / 2 + c * x) / ka),
                      (kb, -(x**2 / 2 + c * x - c - sp.Rational(1, 2)) / kb)):
            u = xi * hump
            f = sp.simplify(-k * (sp.diff(u, x, 2) + sp.diff(u, y, 2)))
            f_func = sp.lambdify((x, y), f)
            side = 0.2 if k == ka else 0.8
            pts = np.array([[side, 0.3], [side, 0.81]])
            assert np.abs(problem.load(pts) -
                          f_func(pts[:, 0], pts[:, 1])).max() < 1e-12


def test_test3_regions_and_contrast():
    g4 = make_test3("g4")
    assert g4.diffusion_values.max() / g4.diffusion_values.min() == 1e12
    g3 = make_test3("g3")
    point = np.array([[0.75, 0.25]])
    region = g3.region_of(point)[0]
    assert g3.diffusion_values[region] == 1e-3
    # u continuous across the vertical interface inside each strip
    for y in (0.25, 0.75):
        left = g3.solution(np.array([[0.5 - 1e-10, y]]))[0]
        right = g3.solution(np.array([[0.5 + 1e-10, y]]))[0]
        assert abs(left - right) < 1e-9
    # flux K du/dx continuous across the vertical interface
    for y in (0.2, 0.9):
        pl = np.array([[0.5 - 1e-10, y]])
        pr = np.array([[0.5 + 1e-10, y]])
        fl = g3.diffusion_at(pl)[0] * g3.gradient(pl)[0, 0]
        fr = g3.diffusion_at(pr)[0] * g3.gradient(pr)[0, 0]
        assert abs(fl - fr) < 1e-9


def test_test4_polar_formulas():
    problem = get_problem("test4")
    theta = np.linspace(0.51 * np.pi, 1.99 * np.pi, 7)
    arc = np.column_stack([np.cos(theta), np.sin(theta)])
    assert np.abs(problem.solution(arc) - 1.0).max() < 1e-14
    # symbolic check of the radial Laplacian: lap(r^a) = a^2 r^(a-2)
    x, y = sp.symbols("x y")
    u = (x**2 + y**2) ** sp.Rational(1, 3)
    f = -sp.diff(u, x, 2) - sp.diff(u, y, 2)
    f_func = sp.lambdify((x, y), sp.simplify(f))
    pts = np.array([[-0.5, 0.0], [0.25, 0.25], [-0.3, -0.72]])
    assert np.abs(problem.load(pts) - f_func(pts[:, 0], pts[:, 1])).max() \
        < 1e-12
    rho = 0.5
    expect = -(4.0 / 9.0) * rho ** (-4.0 / 3.0)
    assert abs(problem.load(np.array([[-rho, 0.0]]))[0] - expect) < 1e-13
    assert problem.singular_points == ((0.0, 0.0),)


def test_unknown_problem_rejected():
    with pytest.raises(ValueError):
        get_problem("test9")
