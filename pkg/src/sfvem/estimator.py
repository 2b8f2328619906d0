"""Residual error estimator, data oscillation, and the effectivity index.

The local indicator combines the volume residual of the projected flux with
the interior-edge jumps of that flux, each weighted by the local mesh size
and the piecewise diffusion:

    indicator_E^2 = (h_E^2 / K_E) |r_E|_E^2
                  + 1/2 * sum_edges (h_e / K_sum_e) |jump_e|_e^2

where ``r_E`` is the cached load projection plus the divergence of the
projected flux, ``K_sum_e`` adds the diffusion of the one or two incident
elements, and the half splits every interior edge between its two owners.
The error is measured against the projected gradient of the discrete
solution, and the effectivity index is the ratio of the global estimator to
that error (data oscillation is reported separately, never folded in).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assembly import ElementCache
from .mesh import PolyMesh
from .polybasis import polynomial_dim, segment_rule


@dataclass
class EstimatorReport:
    """Per-element indicator splits and the derived global quantities."""

    volume_sq: np.ndarray
    edge_sq: np.ndarray
    indicator_sq: np.ndarray
    oscillation_sq: np.ndarray
    error_sq: Optional[np.ndarray]

    @property
    def estimator(self) -> float:
        return float(np.sqrt(self.indicator_sq.sum()))

    @property
    def oscillation(self) -> float:
        return float(np.sqrt(self.oscillation_sq.sum()))

    @property
    def error(self) -> Optional[float]:
        if self.error_sq is None:
            return None
        return float(np.sqrt(self.error_sq.sum()))

    @property
    def effectivity(self) -> float:
        err = self.error
        if err is None or err < 1e-14:
            return float("nan")
        return self.estimator / err

    @property
    def effectivity_defined(self) -> bool:
        return self.error is not None and self.error >= 1e-14


def gradient_field_coeffs(cache: ElementCache,
                          solution: np.ndarray) -> np.ndarray:
    """Coefficients of the projected gradient of u_h on one element."""
    return cache.projectors.grad_proj @ solution[cache.dofs]


def element_residual(cache: ElementCache, field_coeffs: np.ndarray):
    """Volume residual in the degree-k monomial basis and its L2 norm.

    Only the position members of the gradient space carry divergence; the
    result stays a degree-k polynomial regardless of the enlargement.
    """
    proj = cache.projectors
    k = proj.degree
    coeffs = cache.load_coeffs.copy()
    nlow = polynomial_dim(k - 2)
    if nlow:
        div = proj.space.divergence_matrix()
        coeffs[:nlow] += cache.diffusion * (field_coeffs @ div)
    mass = cache.element.mass_matrix(k)
    norm_sq = float(coeffs @ mass @ coeffs)
    return coeffs, np.sqrt(max(norm_sq, 0.0))


def edge_jump(mesh: PolyMesh, edge_id: int, caches, field_coeffs,
              rule_degree: Optional[int] = None):
    """Flux jump of the projected gradient across an interior edge.

    Returns the jump values at edge Gauss points together with the rule and
    the L2 norm over the edge.  Calling this on a boundary edge violates the
    contract (jumps only enter on interior edges).
    """
    polys = mesh.edge_polygons[edge_id]
    if len(polys) != 2:
        raise ValueError(f"edge {edge_id} is not interior")
    if rule_degree is None:
        rule_degree = 2 * max(caches[pi].projectors.degree +
                              caches[pi].projectors.enlargement
                              for pi in polys)
    a, b = mesh.edges[edge_id]
    rule = segment_rule(mesh.vertices[a], mesh.vertices[b], rule_degree)
    values = np.zeros(len(rule.points))
    for pi in polys:
        cache = caches[pi]
        local = list(mesh.polygon_edges[pi]).index(edge_id)
        normal = cache.element.normals[local]
        field = cache.projectors.space.eval(rule.points)
        vec = np.einsum("qid,i->qd", field, field_coeffs[pi])
        values += cache.diffusion * (vec @ normal)
    norm = float(np.sqrt(max(rule.weights @ values**2, 0.0)))
    return values, rule, norm


def data_oscillation(cache: ElementCache, load) -> float:
    """L2 distance between the load and its cached degree-k projection."""
    rule = cache.element.interior_rule(cache.load_rule_degree)
    approx = cache.element.basis(cache.projectors.degree).eval(rule.points)
    gap = load(rule.points) - approx @ cache.load_coeffs
    return float(np.sqrt(max(rule.weights @ gap**2, 0.0)))


def element_error_sq(cache: ElementCache, field_coeffs: np.ndarray,
                  exact_gradient) -> float:
    """Squared diffusion-weighted L2 gap between exact and projected gradients."""
    rule = cache.element.interior_rule(cache.load_rule_degree)
    field = cache.projectors.space.eval(rule.points)
    vec = np.einsum("qid,i->qd", field, field_coeffs)
    gap = exact_gradient(rule.points) - vec
    return cache.diffusion * float(rule.weights @ (gap**2).sum(axis=1))


def estimate(mesh: PolyMesh, caches, solution: np.ndarray, load,
             exact_gradient=None) -> EstimatorReport:
    """Assemble the full estimator report for a solved problem."""
    n = mesh.n_polygons
    volume_sq = np.zeros(n)
    edge_sq = np.zeros(n)
    osc_sq = np.zeros(n)
    error_sq = np.zeros(n) if exact_gradient is not None else None
    fields = [gradient_field_coeffs(c, solution) for c in caches]

    for cache in caches:
        pi = cache.index
        h, kval = cache.element.diameter, cache.diffusion
        _, rnorm = element_residual(cache, fields[pi])
        volume_sq[pi] = h**2 / kval * rnorm**2
        osc_sq[pi] = h**2 / kval * data_oscillation(cache, load) ** 2
        if error_sq is not None:
            error_sq[pi] = element_error_sq(cache, fields[pi], exact_gradient)

    for eid in mesh.interior_edges():
        polys = mesh.edge_polygons[eid]
        _, _, jnorm = edge_jump(mesh, eid, caches, fields)
        k_sum = sum(caches[pi].diffusion for pi in polys)
        term = mesh.edge_lengths[eid] / k_sum * jnorm**2
        for pi in polys:
            edge_sq[pi] += 0.5 * term

    return EstimatorReport(volume_sq, edge_sq, volume_sq + edge_sq, osc_sq,
                           error_sq)
