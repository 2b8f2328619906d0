"""Manufactured benchmark problems: diffusion maps, solutions, and loads.

Four problem families drive the experiment harness: a smooth sine solution
with unit diffusion, two-region and four-region checkerboard diffusion
jumps with a separable piecewise solution, and the L-shaped domain with a
radial corner singularity.  All callables are vectorized over ``(n, 2)``
point arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .mesh import L_SHAPE, UNIT_SQUARE


@dataclass
class ProblemSpec:
    """A diffusion problem with known solution on a fixed domain."""

    name: str
    domain: str
    diffusion_values: np.ndarray
    region_of: Callable[[np.ndarray], np.ndarray]
    solution: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    load: Callable[[np.ndarray], np.ndarray]
    boundary: Callable[[np.ndarray], np.ndarray]
    singular_points: Tuple = ()
    interface_lines: Tuple = ((), ())

    def diffusion_per_polygon(self, mesh) -> np.ndarray:
        """Piecewise-constant diffusion sampled at polygon centroids."""
        return self.diffusion_values[self.region_of(mesh.centroids)]

    def diffusion_at(self, points: np.ndarray) -> np.ndarray:
        return self.diffusion_values[self.region_of(np.atleast_2d(points))]


def _zeros_region(points: np.ndarray) -> np.ndarray:
    return np.zeros(len(np.atleast_2d(points)), dtype=int)


def make_test1() -> ProblemSpec:
    """Unit diffusion with the product-of-sines solution on the square."""
    two_pi = 2.0 * np.pi

    def solution(p):
        p = np.atleast_2d(p)
        return np.sin(two_pi * p[:, 0]) * np.sin(two_pi * p[:, 1])

    def gradient(p):
        p = np.atleast_2d(p)
        sx, cx = np.sin(two_pi * p[:, 0]), np.cos(two_pi * p[:, 0])
        sy, cy = np.sin(two_pi * p[:, 1]), np.cos(two_pi * p[:, 1])
        return np.column_stack([two_pi * cx * sy, two_pi * sx * cy])

    def load(p):
        return 2.0 * two_pi**2 * solution(p)

    return ProblemSpec(
        name="test1", domain=UNIT_SQUARE,
        diffusion_values=np.array([1.0]), region_of=_zeros_region,
        solution=solution, gradient=gradient, load=load,
        boundary=lambda p: np.zeros(len(np.atleast_2d(p))),
    )


def _ramp_factory(k_left: float, k_right: float):
    """One-dimensional piecewise-quadratic profile vanishing at 0 and 1.

    The linear coefficient is tuned so both the value and the flux
    ``k * d/dx`` match at the midpoint interface; the flux equals
    ``-(x + c)`` on both sides, and ``k * d2/dx2 = -1`` everywhere.
    """
    c = -(3.0 * k_left + k_right) / (4.0 * (k_left + k_right))

    def value(x):
        left = -(0.5 * x**2 + c * x) / k_left
        right = -(0.5 * x**2 + c * x - c - 0.5) / k_right
        return np.where(x <= 0.5, left, right)

    def derivative(x):
        return np.where(x <= 0.5, -(x + c) / k_left, -(x + c) / k_right)

    return value, derivative, c


def _hump(y):
    # y (1 - y) (y - 1/2)^2
    return y * (1.0 - y) * (y - 0.5) ** 2


def _hump_d1(y):
    return -4.0 * y**3 + 6.0 * y**2 - 2.5 * y + 0.25


def _hump_d2(y):
    return -12.0 * y**2 + 12.0 * y - 2.5


def make_test2(variant: str = "g1") -> ProblemSpec:
    """Two vertical diffusion regions with a flux-matched separable solution.

    ``g1`` jumps from 10 to 1 across x = 0.5; ``g2`` from 1e-3 to 1.
    """
    values = {"g1": (10.0, 1.0), "g2": (1e-3, 1.0)}
    try:
        k_left, k_right = values[variant]
    except KeyError:
        raise ValueError(f"unknown test2 variant {variant!r}") from None
    ramp, ramp_d, _ = _ramp_factory(k_left, k_right)
    diffusion = np.array([k_left, k_right])

    def region_of(p):
        p = np.atleast_2d(p)
        return (p[:, 0] > 0.5).astype(int)

    def solution(p):
        p = np.atleast_2d(p)
        return ramp(p[:, 0]) * _hump(p[:, 1])

    def gradient(p):
        p = np.atleast_2d(p)
        x, y = p[:, 0], p[:, 1]
        return np.column_stack([ramp_d(x) * _hump(y), ramp(x) * _hump_d1(y)])

    def load(p):
        p = np.atleast_2d(p)
        x, y = p[:, 0], p[:, 1]
        k = diffusion[region_of(p)]
        return _hump(y) - k * ramp(x) * _hump_d2(y)

    return ProblemSpec(
        name=f"test2-{variant}", domain=UNIT_SQUARE,
        diffusion_values=diffusion, region_of=region_of,
        solution=solution, gradient=gradient, load=load,
        boundary=lambda p: np.zeros(len(np.atleast_2d(p))),
        interface_lines=((0.5,), ()),
    )


def make_test3(variant: str = "g3") -> ProblemSpec:
    """Four-quadrant diffusion without quasi-monotone arrangement.

    Quadrant values (lower-left, lower-right, upper-left, upper-right):
    ``g3`` uses (1, 1e-3, 1e-2, 10) and ``g4`` (1, 1e-7, 1e-2, 1e5).  The
    vertical profile has a double root at the horizontal interface, so only
    the vertical midline carries a genuine flux matching condition, handled
    per horizontal strip.
    """
    values = {"g3": (1.0, 1e-3, 1e-2, 10.0), "g4": (1.0, 1e-7, 1e-2, 1e5)}
    try:
        k11, k12, k21, k22 = values[variant]
    except KeyError:
        raise ValueError(f"unknown test3 variant {variant!r}") from None
    low_ramp, low_ramp_d, _ = _ramp_factory(k11, k12)
    high_ramp, high_ramp_d, _ = _ramp_factory(k21, k22)
    diffusion = np.array([k11, k12, k21, k22])

    def region_of(p):
        p = np.atleast_2d(p)
        return ((p[:, 0] >= 0.5).astype(int) +
                2 * (p[:, 1] >= 0.5).astype(int))

    def _ramp(x, y):
        return np.where(y < 0.5, low_ramp(x), high_ramp(x))

    def _ramp_d(x, y):
        return np.where(y < 0.5, low_ramp_d(x), high_ramp_d(x))

    def solution(p):
        p = np.atleast_2d(p)
        return _ramp(p[:, 0], p[:, 1]) * _hump(p[:, 1])

    def gradient(p):
        p = np.atleast_2d(p)
        x, y = p[:, 0], p[:, 1]
        return np.column_stack([_ramp_d(x, y) * _hump(y),
                                _ramp(x, y) * _hump_d1(y)])

    def load(p):
        p = np.atleast_2d(p)
        x, y = p[:, 0], p[:, 1]
        k = diffusion[region_of(p)]
        return _hump(y) - k * _ramp(x, y) * _hump_d2(y)

    return ProblemSpec(
        name=f"test3-{variant}", domain=UNIT_SQUARE,
        diffusion_values=diffusion, region_of=region_of,
        solution=solution, gradient=gradient, load=load,
        boundary=lambda p: np.zeros(len(np.atleast_2d(p))),
        interface_lines=((0.5,), (0.5,)),
    )


def make_test4() -> ProblemSpec:
    """Radial two-thirds power solution on the L-shaped domain.

    The solution is bounded but its gradient and load blow up at the
    reentrant corner; quadrature rules exclude the origin by construction
    and runs may grade element quadrature toward it.
    """

    def solution(p):
        p = np.atleast_2d(p)
        return (p[:, 0] ** 2 + p[:, 1] ** 2) ** (1.0 / 3.0)

    def gradient(p):
        p = np.atleast_2d(p)
        r2 = p[:, 0] ** 2 + p[:, 1] ** 2
        factor = (2.0 / 3.0) * r2 ** (-2.0 / 3.0)
        return factor[:, None] * p

    def load(p):
        p = np.atleast_2d(p)
        r2 = p[:, 0] ** 2 + p[:, 1] ** 2
        return -(4.0 / 9.0) * r2 ** (-2.0 / 3.0)

    return ProblemSpec(
        name="test4", domain=L_SHAPE,
        diffusion_values=np.array([1.0]), region_of=_zeros_region,
        solution=solution, gradient=gradient, load=load,
        boundary=solution,
        singular_points=((0.0, 0.0),),
    )


_REGISTRY = {
    "test1": make_test1,
    "test2-g1": lambda: make_test2("g1"),
    "test2-g2": lambda: make_test2("g2"),
    "test3-g3": lambda: make_test3("g3"),
    "test3-g4": lambda: make_test3("g4"),
    "test4": make_test4,
}

PROBLEM_NAMES = tuple(sorted(_REGISTRY))


def get_problem(name: str) -> ProblemSpec:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from "
                         f"{', '.join(PROBLEM_NAMES)}") from None
    return factory()
