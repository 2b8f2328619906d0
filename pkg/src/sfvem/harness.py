"""Refinement studies: drive mesh -> solve -> estimate and report tables.

A run walks a sequence of uniformly refined meshes of one family, solving
the selected benchmark problem at fixed polynomial degree on each level and
recording mesh size, error, estimator, data oscillation, the effectivity
index and the observed convergence rates.  Rows serialize to CSV with the
fixed header and optionally to a log-log SVG plot.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import mesh as meshmod
from .assembly import assemble, solve
from .estimator import estimate
from .mesh import PolyMesh, load_mesh
from .problems import ProblemSpec, get_problem

CSV_HEADER = "h,elements,dofs,error,eta,F,epsilon,rate,ell_min,ell_max"

MESH_FAMILIES = ("distorted", "starconcave", "voronoi")


class ConfigError(ValueError):
    """A run configuration that cannot be executed."""


@dataclass
class RunConfig:
    """Parameters of one refinement study."""

    problem: str = "test1"
    mesh_family: str = "distorted"      # family name or a mesh file path
    degree: int = 1
    levels: int = 3
    n0: int = 8
    seed: int = 0
    distortion: float = 0.2
    concavity: float = 0.3
    lloyd_iterations: int = 50
    csv_path: Optional[str] = None
    svg_path: Optional[str] = None
    grade_corner: bool = False
    solver: str = "direct"

    def validate(self) -> None:
        if self.degree < 1:
            raise ConfigError("degree must be at least 1")
        if self.levels < 1:
            raise ConfigError("need at least one refinement level")
        is_file = self.mesh_family not in MESH_FAMILIES
        if is_file and self.levels > 1:
            raise ConfigError("file meshes cannot be uniformly refined; "
                              "use --levels 1")


@dataclass
class ConvergenceRow:
    """One refinement level of a convergence study."""

    h: float
    elements: int
    dofs: int
    error: float
    estimator: float
    oscillation: float
    effectivity: float
    rate: Optional[float]
    estimator_rate: Optional[float]
    enlargement_min: int
    enlargement_max: int


def _base_mesh(config: RunConfig, problem: ProblemSpec) -> PolyMesh:
    family = config.mesh_family
    domain = problem.domain
    interfaces = problem.interface_lines
    has_interfaces = any(len(lines) for lines in interfaces)
    if family == "distorted":
        return meshmod.generate_distorted_cartesian(
            config.n0, config.distortion, config.seed, domain,
            interfaces if has_interfaces else None)
    if family == "starconcave":
        return meshmod.generate_star_concave(
            config.n0, config.concavity, domain,
            interfaces if has_interfaces else None)
    if family == "voronoi":
        if has_interfaces:
            raise ConfigError(
                f"problem {problem.name} needs meshes aligned to its "
                "diffusion interfaces; the voronoi family cannot comply")
        return meshmod.generate_voronoi_lloyd(
            config.n0 ** 2, config.lloyd_iterations, config.seed, domain)
    mesh = load_mesh(family)
    gap = abs(mesh.areas.sum() - meshmod.domain_area(domain))
    if gap > 1e-9 * meshmod.domain_area(domain):
        raise ConfigError(
            f"mesh file {family} does not tile the {domain} domain of "
            f"problem {problem.name}")
    return mesh


ROUNDOFF_FLOOR = 1e-12   # below this, quantities sit in the patch-test
                         # regime and rates are meaningless


def _local_rate(prev: ConvergenceRow, h: float, err: float,
                eta: float):
    dh = np.log2(prev.h / h)
    rate = np.log2(prev.error / err) / dh \
        if err > ROUNDOFF_FLOOR and prev.error > ROUNDOFF_FLOOR else None
    erate = np.log2(prev.estimator / eta) / dh \
        if eta > ROUNDOFF_FLOOR and prev.estimator > ROUNDOFF_FLOOR else None
    return rate, erate


def run_convergence(config: RunConfig):
    """Execute the refinement study described by the configuration.

    Returns
    -------
    (rows, summary) : (list[ConvergenceRow], dict)
        The summary carries the average rates of the error and of the
        estimator and the effectivity band over the last three levels.
    """
    config.validate()
    problem = get_problem(config.problem)
    rows: List[ConvergenceRow] = []
    mesh = None
    for level in range(config.levels):
        mesh = _base_mesh(config, problem) if level == 0 else \
            meshmod.refine_uniform(mesh)
        mesh = mesh.with_regions(problem.region_of(mesh.centroids))
        diffusion = problem.diffusion_values[mesh.region_id]
        corner = problem.singular_points[0] if (
            config.grade_corner and problem.singular_points) else None
        system, caches, dofmap = assemble(
            mesh, config.degree, diffusion, problem.load, problem.boundary,
            grade_corner=np.asarray(corner) if corner is not None else None)
        solution = solve(system, method=config.solver)
        report = estimate(mesh, caches, solution, problem.load,
                          problem.gradient)
        enl = [c.projectors.enlargement for c in caches]
        rate = erate = None
        if rows:
            rate, erate = _local_rate(rows[-1], mesh.h, report.error,
                                      report.estimator)
        rows.append(ConvergenceRow(
            h=mesh.h, elements=mesh.n_polygons, dofs=dofmap.total,
            error=report.error, estimator=report.estimator,
            oscillation=report.oscillation, effectivity=report.effectivity,
            rate=rate, estimator_rate=erate,
            enlargement_min=min(enl), enlargement_max=max(enl)))

    rates = [r.rate for r in rows if r.rate is not None]
    erates = [r.estimator_rate for r in rows if r.estimator_rate is not None]
    tail = [r.effectivity for r in rows[-3:]
            if np.isfinite(r.effectivity)]
    summary = {
        "average_rate": float(np.mean(rates)) if rates else None,
        "average_estimator_rate": float(np.mean(erates)) if erates else None,
        "effectivity_band": (min(tail), max(tail)) if tail else None,
    }
    if config.csv_path:
        emit_csv(rows, config.csv_path)
    if config.svg_path:
        emit_svg(rows, config.svg_path)
    return rows, summary


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and not np.isfinite(x)):
        return ""
    if isinstance(x, float):
        return repr(float(x))  # shortest round-trip form, parses bit-exact
    return str(x)


def render_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(",".join([
            _fmt(r.h), _fmt(r.elements), _fmt(r.dofs), _fmt(r.error),
            _fmt(r.estimator), _fmt(r.oscillation), _fmt(r.effectivity),
            _fmt(r.rate), _fmt(r.enlargement_min), _fmt(r.enlargement_max),
        ]))
    return "\n".join(lines) + "\n"


def emit_csv(rows, path) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(render_csv(rows))


def fitted_slope(rows, attribute: str = "error") -> float:
    """Least-squares slope of log(quantity) against log(h)."""
    h = np.log([r.h for r in rows])
    q = np.log([getattr(r, attribute) for r in rows])
    return float(np.polyfit(h, q, 1)[0])


def emit_svg(rows, path) -> None:
    """Log-log plot of error and estimator versus mesh size."""
    if not rows:
        raise ValueError("no rows to plot")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 4))
        h = [r.h for r in rows]
        ax.loglog(h, [r.error for r in rows], "o-", label="error")
        ax.loglog(h, [r.estimator for r in rows], "s--", label="estimator")
        slope = fitted_slope(rows)
        ax.set_xlabel("h")
        ax.set_ylabel("error / estimator")
        ax.set_title(f"slope={slope:.3f}")
        ax.legend()
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg")
        plt.close(fig)
    with open(path, "w", encoding="utf-8") as f:
        f.write(buf.getvalue())


def format_table(rows) -> str:
    """Human-readable fixed-width table of a run, for terminal output."""
    header = (f"{'h':>12} {'cells':>7} {'dofs':>8} {'error':>12} "
              f"{'eta':>12} {'F':>12} {'eps':>8} {'rate':>6}")
    lines = [header]
    for r in rows:
        rate = f"{r.rate:6.3f}" if r.rate is not None else "     -"
        lines.append(
            f"{r.h:12.6g} {r.elements:7d} {r.dofs:8d} {r.error:12.5e} "
            f"{r.estimator:12.5e} {r.oscillation:12.5e} "
            f"{r.effectivity:8.3f} {rate}")
    return "\n".join(lines)
