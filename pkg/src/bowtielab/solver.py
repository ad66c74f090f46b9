"""Exterior potential problems on the bow-tie geometry.

Each inclusion carries a single-layer density plus an unknown boundary
constant.  The background problem enforces zero net charge per inclusion
(zero flux); the unit-flux problem drives a unit charge exchange between
the two inclusions.  Both share one dense collocation matrix and one LU
factorization.  Normal convention on inclusion boundaries follows the
exterior problem: fluxes are measured with the normal pointing into the
inclusion, so the flux through an inclusion equals its total density.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from . import layers
from .corrector import CorrectorSolution
from .errors import DomainError, SolverGateError
from .geometry import BowTieGeometry, Inclusion, gap_exponent
from .singular import SingularBasis, singular_basis

BC_RESIDUAL_GATE = 1e-7
COND_WARN = 1e13

# check-point coordinates (scaled, per panel) for the boundary residual gate;
# deliberately off the collocation nodes
CHECK_TAUS = np.array([-0.9, -0.4, 0.2, 0.7])


@dataclass(frozen=True)
class GradingSpec:
    """Mesh grading toward the vertices and around the caps."""

    vertex_h: float = 1e-8  # innermost panel length at each vertex
    ratio: float = 0.8  # geometric grading ratio toward singular points
    edge_h_max: float = 0.02  # panel-size cap on the straight edges
    cap_h: float = 0.025  # panel-size cap on the circular cap
    tangency_h: float = 3e-4  # innermost panel at the edge/cap tangency
    max_unknowns: int = 6000

    def refined(self, factor: float = 2.0) -> "GradingSpec":
        return replace(
            self,
            edge_h_max=self.edge_h_max / factor,
            cap_h=self.cap_h / factor,
            tangency_h=self.tangency_h / factor,
        )


@dataclass(frozen=True)
class BoundaryMesh:
    geometry: BowTieGeometry
    panels: layers.PanelSet
    inclusion_id: np.ndarray  # (n_panels,) values 1 or 2
    grading: GradingSpec

    @property
    def n_panels(self) -> int:
        return self.panels.n

    @property
    def n_unknowns(self) -> int:
        return layers.N_BASIS * self.panels.n + 2


def _graded_two_sided(total, h_left, h_right, h_max, ratio):
    """Breakpoints on [0, total] graded toward both ends with distinct h0."""
    left = layers.graded_breaks(total / 2.0, h_left, h_max, ratio)
    right = layers.graded_breaks(total / 2.0, h_right, h_max, ratio)
    return np.concatenate([left[:-1], total - right[::-1]])


def _inclusion_polyline(inc: Inclusion, grading: GradingSpec) -> np.ndarray:
    """Closed polyline for one inclusion, exactly symmetric about the x-axis."""
    cap_len = inc.cap_radius * 2.0 * inc.cap_half_sweep
    edge_breaks = _graded_two_sided(
        inc.edge_len, grading.vertex_h, grading.tangency_h, grading.edge_h_max, grading.ratio
    )
    half_cap = layers.graded_breaks(
        cap_len / 2.0, grading.tangency_h, grading.cap_h, grading.ratio
    )
    s_upper = np.concatenate([edge_breaks[:-1], inc.edge_len + half_cap[:-1]])
    upper = inc.boundary_point(s_upper)
    far = inc.boundary_point(np.array([inc.edge_len + cap_len / 2.0]))
    lower = upper[1:][::-1] * np.array([1.0, -1.0])
    return np.vstack([upper, far, lower])


def build_mesh(geometry: BowTieGeometry, grading: GradingSpec | None = None) -> BoundaryMesh:
    grading = grading or GradingSpec()
    if grading.vertex_h > geometry.eps / 20.0:
        grading = replace(grading, vertex_h=geometry.eps / 20.0)
    sets = []
    ids = []
    for j in (1, 2):
        poly = _inclusion_polyline(geometry.inclusion(j), grading)
        ps = layers.panels_from_polyline(poly, closed=True)
        sets.append(ps)
        ids.append(np.full(ps.n, j, dtype=int))
    panels = sets[0].concat(sets[1])
    mesh = BoundaryMesh(
        geometry=geometry,
        panels=panels,
        inclusion_id=np.concatenate(ids),
        grading=grading,
    )
    if mesh.n_unknowns > grading.max_unknowns:
        raise SolverGateError(
            f"mesh needs {mesh.n_unknowns} unknowns, above the cap {grading.max_unknowns}"
        )
    return mesh


@dataclass
class AssembledOperator:
    """Factorized collocation system shared by both potential problems."""

    mesh: BoundaryMesh
    lu: tuple
    col_scale: np.ndarray
    node_inclusion: np.ndarray  # inclusion id per collocation node
    cond_estimate: float

    @property
    def n_coef(self) -> int:
        return layers.N_BASIS * self.mesh.n_panels


def assemble(
    geometry: BowTieGeometry,
    grading: GradingSpec | None = None,
    auto_refine: bool = True,
) -> AssembledOperator:
    """Build the mesh and factorize the bordered collocation matrix."""
    mesh = build_mesh(geometry, grading)
    asm = _assemble_mesh(mesh)
    if asm.cond_estimate > COND_WARN:
        warnings.warn(
            f"collocation matrix condition estimate {asm.cond_estimate:.2e}; refining grading",
            stacklevel=2,
        )
        if auto_refine:
            mesh = build_mesh(geometry, mesh.grading.refined(1.5))
            asm = _assemble_mesh(mesh)
    return asm


def _assemble_mesh(mesh: BoundaryMesh) -> AssembledOperator:
    panels = mesh.panels
    n_coef = layers.N_BASIS * panels.n
    A = layers.collocation_matrix(panels)
    node_inc = np.repeat(mesh.inclusion_id, layers.N_BASIS)

    M = np.zeros((n_coef + 2, n_coef + 2))
    M[:n_coef, :n_coef] = A
    M[:n_coef, n_coef] = -(node_inc == 1).astype(float)
    M[:n_coef, n_coef + 1] = -(node_inc == 2).astype(float)
    charge = layers.charge_row(panels)
    coef_inc = np.repeat(mesh.inclusion_id, layers.N_BASIS)
    M[n_coef, :n_coef] = charge * (coef_inc == 1)
    M[n_coef + 1, :n_coef] = charge * (coef_inc == 2)

    col_scale = np.max(np.abs(M), axis=0)
    col_scale[col_scale == 0.0] = 1.0
    M /= col_scale[None, :]

    anorm = np.max(np.abs(M).sum(axis=1))
    lu = sla.lu_factor(M)
    gecon = sla.get_lapack_funcs("gecon", (M,))
    rcond, _ = gecon(lu[0], anorm, norm="I")
    cond = 1.0 / max(rcond, 1e-300)
    return AssembledOperator(
        mesh=mesh, lu=lu, col_scale=col_scale, node_inclusion=node_inc, cond_estimate=cond
    )


@dataclass(frozen=True)
class PotentialSolution:
    """Solved exterior potential: layer coefficients plus boundary constants."""

    kind: str  # "background" or "unit-flux"
    mesh: BoundaryMesh
    coef: np.ndarray  # (n_panels * 3,)
    constants: tuple[float, float]
    h: tuple[float, float]  # background coefficients (0, 0) for unit-flux
    bc_residual: float
    cond_estimate: float

    @property
    def geometry(self) -> BowTieGeometry:
        return self.mesh.geometry

    def boundary_value(self, j: int) -> float:
        return self.constants[j - 1]

    def value(self, X, check: bool = True) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(X, dtype=float))
        if check and np.any(self.geometry.contains(pts)):
            raise DomainError("point(s) inside an inclusion")
        out = layers.potential(self.mesh.panels, self.coef, pts)
        hx, hy = self.h
        return out + hx * pts[:, 0] + hy * pts[:, 1]

    def gradient(self, X, check: bool = True) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(X, dtype=float))
        if check and np.any(self.geometry.contains(pts)):
            raise DomainError("point(s) inside an inclusion")
        out = layers.gradient(self.mesh.panels, self.coef, pts)
        out[:, 0] += self.h[0]
        out[:, 1] += self.h[1]
        return out

    def flux(self, j: int) -> float:
        """Total flux through inclusion j (normal pointing into the inclusion)."""
        charge = layers.charge_row(self.mesh.panels)
        mask = np.repeat(self.mesh.inclusion_id == j, layers.N_BASIS)
        return float((charge * mask) @ self.coef)

    def boundary_flux_moment(self, hx: float, hy: float) -> float:
        """int h * d_nu(potential) ds over both boundaries (nu into inclusions).

        The interior trace of the solved potential is constant, so the normal
        derivative equals the layer density pointwise.
        """
        return float(layers.linear_moment_row(self.mesh.panels, hx, hy) @ self.coef)


def _solve(asm: AssembledOperator, rhs: np.ndarray):
    y = sla.lu_solve(asm.lu, rhs)
    x = y / asm.col_scale
    return x[: asm.n_coef], (float(x[asm.n_coef]), float(x[asm.n_coef + 1]))


def _bc_residual(mesh: BoundaryMesh, coef, constants, h) -> float:
    pts = mesh.panels.nodes(CHECK_TAUS)
    vals = layers.potential(mesh.panels, coef, pts)
    vals += h[0] * pts[:, 0] + h[1] * pts[:, 1]
    target = np.repeat(
        np.where(mesh.inclusion_id == 1, constants[0], constants[1]), CHECK_TAUS.size
    )
    return float(np.max(np.abs(vals - target)))


def solve_background(
    asm: AssembledOperator,
    h: tuple[float, float],
    residual_gate: float = BC_RESIDUAL_GATE,
) -> PotentialSolution:
    """Background problem: equipotential inclusions, zero net flux each,
    potential approaching the linear background at infinity."""
    nodes = asm.mesh.panels.nodes()
    rhs = np.zeros(asm.n_coef + 2)
    rhs[: asm.n_coef] = -(h[0] * nodes[:, 0] + h[1] * nodes[:, 1])
    coef, consts = _solve(asm, rhs)
    sol = PotentialSolution(
        kind="background",
        mesh=asm.mesh,
        coef=coef,
        constants=consts,
        h=(float(h[0]), float(h[1])),
        bc_residual=_bc_residual(asm.mesh, coef, consts, h),
        cond_estimate=asm.cond_estimate,
    )
    if residual_gate is not None and sol.bc_residual > residual_gate:
        raise SolverGateError(
            f"background solve boundary residual {sol.bc_residual:.3e} > gate {residual_gate:.1e}"
        )
    return sol


def solve_unit_flux(
    asm: AssembledOperator,
    residual_gate: float = BC_RESIDUAL_GATE,
) -> PotentialSolution:
    """Unit-flux problem: fluxes -1 and +1, decay at infinity."""
    rhs = np.zeros(asm.n_coef + 2)
    rhs[asm.n_coef] = -1.0
    rhs[asm.n_coef + 1] = +1.0
    coef, consts = _solve(asm, rhs)
    sol = PotentialSolution(
        kind="unit-flux",
        mesh=asm.mesh,
        coef=coef,
        constants=consts,
        h=(0.0, 0.0),
        bc_residual=_bc_residual(asm.mesh, coef, consts, (0.0, 0.0)),
        cond_estimate=asm.cond_estimate,
    )
    if residual_gate is not None and sol.bc_residual > residual_gate:
        raise SolverGateError(
            f"unit-flux solve boundary residual {sol.bc_residual:.3e} > gate {residual_gate:.1e}"
        )
    if not (sol.constants[0] < 0.0 < sol.constants[1]):
        raise SolverGateError(
            f"unit-flux boundary values not ordered: d1={sol.constants[0]:.3e}, d2={sol.constants[1]:.3e}"
        )
    return sol


def eval_gradient(sol: PotentialSolution, X) -> np.ndarray:
    """Gradient of a solved potential at strictly exterior points."""
    return sol.gradient(X, check=True)


@dataclass(frozen=True)
class EtaView:
    """Affine renormalization of the unit-flux potential to values 0 and 1."""

    qsol: PotentialSolution

    @property
    def delta(self) -> float:
        d1, d2 = self.qsol.constants
        return d2 - d1

    @property
    def eta0(self) -> float:
        d1, d2 = self.qsol.constants
        return -d1 / (d2 - d1)

    def value(self, X, check: bool = True) -> np.ndarray:
        d1, _ = self.qsol.constants
        return (self.qsol.value(X, check=check) - d1) / self.delta

    def gradient(self, X, check: bool = True) -> np.ndarray:
        return self.qsol.gradient(X, check=check) / self.delta


def eta_from_q(qsol: PotentialSolution) -> EtaView:
    return EtaView(qsol=qsol)


@dataclass(frozen=True)
class DerivedConstants:
    delta_q: float
    delta_u: float
    c_u: float
    a_eps: float
    eta0: float


def derived_constants(usol: PotentialSolution, qsol: PotentialSolution) -> DerivedConstants:
    geom = usol.geometry
    d1, d2 = qsol.constants
    c1, c2 = usol.constants
    delta_q = d2 - d1
    if abs(delta_q) < 1e-12:
        raise SolverGateError(f"delta_q={delta_q:.3e} below the noise floor")
    delta_u = c2 - c1
    gamma = gap_exponent(geom.angles)
    log_eps = abs(math.log(geom.eps))
    return DerivedConstants(
        delta_q=float(delta_q),
        delta_u=float(delta_u),
        c_u=float(delta_u / delta_q),
        a_eps=float(delta_u * gamma * log_eps / math.pi),
        eta0=float(-d1 / delta_q),
    )


@dataclass(frozen=True)
class IdentityCheck:
    """Both sides of the boundary-moment identity for the potential gap."""

    delta_u: float
    flux_moment: float

    @property
    def abs_residual(self) -> float:
        return abs(self.delta_u - self.flux_moment)

    @property
    def rel_residual(self) -> float:
        scale = abs(self.delta_u)
        return self.abs_residual / scale if scale > 1e-14 else float("nan")


def potential_difference_identity(
    usol: PotentialSolution, qsol: PotentialSolution
) -> IdentityCheck:
    """Checks delta_u against the boundary moment of the unit-flux density."""
    return IdentityCheck(
        delta_u=usol.constants[1] - usol.constants[0],
        flux_moment=qsol.boundary_flux_moment(*usol.h),
    )


# ---------------------------------------------------------------------------
# Independent quadrature diagnostics
# ---------------------------------------------------------------------------


def _enclosing_circle(geom: BowTieGeometry, j: int):
    """Circle threading the gap and enclosing only inclusion j."""
    inc = geom.inclusion(j)
    far_x = inc.cap_center[0] + inc.sign * (inc.cap_radius + 0.5)
    center = np.array([0.5 * far_x, 0.0])
    radius = abs(0.5 * far_x)
    top = np.array([inc.cap_center[0], inc.cap_radius])
    assert np.linalg.norm(top - center) < radius, "circle does not enclose the cap"
    return center, radius


def _circle_quadrature(geom: BowTieGeometry, j: int, n_gauss: int = 8):
    """Quadrature nodes/weights/normals on the enclosing circle, graded toward the gap."""
    center, radius = _enclosing_circle(geom, j)
    # nearest approach to the boundaries happens where the circle crosses the gap
    gap_angle = math.pi if center[0] > 0 else 0.0
    h0 = geom.eps / (20.0 * radius)
    breaks = layers.graded_breaks_bidirectional(2.0 * math.pi, h0, 0.05, 0.7)
    breaks = (breaks + gap_angle) % (2.0 * math.pi)
    breaks = np.sort(np.unique(np.concatenate([breaks, [0.0, 2.0 * math.pi]])))
    gx, gw = np.polynomial.legendre.leggauss(n_gauss)
    mid = 0.5 * (breaks[:-1] + breaks[1:])
    half = 0.5 * np.diff(breaks)
    th = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    w = (half[:, None] * gw[None, :]).ravel() * radius
    normals = np.column_stack([np.cos(th), np.sin(th)])
    pts = center + radius * normals
    return pts, w, normals


def flux_by_circle_quadrature(sol: PotentialSolution, j: int) -> float:
    """Flux through inclusion j recomputed on an enclosing circle.

    Sign convention matches `PotentialSolution.flux` (normal into the inclusion).
    """
    pts, w, normals = _circle_quadrature(sol.geometry, j)
    grad = sol.gradient(pts, check=False)
    return float(-np.sum(w * (grad[:, 0] * normals[:, 0] + grad[:, 1] * normals[:, 1])))


def circulation_by_circle_quadrature(sol: PotentialSolution, j: int = 2) -> float:
    """Circulation of the gradient around the enclosing circle (zero for any gradient)."""
    pts, w, normals = _circle_quadrature(sol.geometry, j)
    tang = np.column_stack([-normals[:, 1], normals[:, 0]])
    grad = sol.gradient(pts, check=False)
    return float(np.sum(w * (grad[:, 0] * tang[:, 0] + grad[:, 1] * tang[:, 1])))


def mean_value_residual(
    sol: PotentialSolution, n_circles: int = 50, seed: int = 0, n_quad: int = 64
) -> float:
    """Max residual of the circle mean-value property at random exterior circles."""
    rng = np.random.default_rng(seed)
    geom = sol.geometry
    th = np.linspace(0.0, 2.0 * math.pi, n_quad, endpoint=False)
    ring = np.column_stack([np.cos(th), np.sin(th)])
    worst = 0.0
    found = 0
    while found < n_circles:
        c = rng.uniform([-3.5, -3.5], [3.5, 3.5])
        r = rng.uniform(0.05, 0.6)
        pts = c + r * ring
        if np.any(geom.contains(np.vstack([pts, c]))):
            continue
        # test points spanning the circle interior guard against enclosing a boundary
        if np.any(geom.contains(c + 0.5 * r * ring)):
            continue
        vals = sol.value(pts, check=False)
        center = sol.value(np.array([c]), check=False)[0]
        scale = max(1.0, float(np.max(np.abs(vals))))
        worst = max(worst, abs(float(np.mean(vals)) - center) / scale)
        found += 1
    return worst


# ---------------------------------------------------------------------------
# Decomposition residuals against the explicit singular fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecompositionResiduals:
    """Pointwise residuals of the two gradient decompositions with their bounds."""

    points: np.ndarray
    valid: np.ndarray
    grad_u: np.ndarray
    wedge_residual: np.ndarray  # |grad u - leading wedge term|
    corner_residual: np.ndarray  # |grad u - leading corner-difference term|
    wedge_bound: np.ndarray
    corner_bound: np.ndarray

    @property
    def wedge_ratio_sup(self) -> float:
        m = self.valid & (np.abs(self.wedge_bound) > 0)
        return float(np.max(self.wedge_residual[m] / self.wedge_bound[m]))

    @property
    def corner_ratio_sup(self) -> float:
        m = self.valid & (np.abs(self.corner_bound) > 0)
        return float(np.max(self.corner_residual[m] / self.corner_bound[m]))


def h_sup_norm(h: tuple[float, float], radius: float = 4.0) -> float:
    """Sup of the linear background over the reference disk."""
    return radius * math.hypot(h[0], h[1])


def decomposition_residuals(
    usol: PotentialSolution,
    corrector: CorrectorSolution,
    a_eps: float,
    X: np.ndarray,
    basis: SingularBasis | None = None,
    delta1: float | None = None,
) -> DecompositionResiduals:
    """Residuals of the wedge and corner-difference leading terms at points X.

    Points outside the validity region (inside an inclusion, or outside the
    disk of radius delta1) are flagged invalid rather than rejected.
    """
    geom = usol.geometry
    eps = geom.eps
    delta1 = delta1 if delta1 is not None else geom.delta / 2.0
    basis = basis or singular_basis(geom.angles)
    pts = np.atleast_2d(np.asarray(X, dtype=float))
    r_origin = np.hypot(pts[:, 0], pts[:, 1])
    valid = (~geom.contains(pts)) & (r_origin <= delta1) & (r_origin > 0.0)

    grad_u = np.zeros_like(pts)
    grad_u[valid] = usol.gradient(pts[valid], check=False)

    scaled = pts / eps
    log_eps = abs(math.log(eps))
    amp = a_eps / (eps * log_eps)

    wedge = np.zeros_like(pts)
    corner = np.zeros_like(pts)
    if np.any(valid):
        gphi, _ = basis.gap_angle_gradient(scaled[valid], check=False)
        gw = corrector.grad_w(scaled[valid])
        wedge[valid] = amp * (gphi + gw)
        comb = basis.combined_gradient(corrector.b, scaled[valid], check=False)
        corner[valid] = amp * corrector.a * comb

    h_norm = h_sup_norm(usol.h)
    beta1, beta2 = basis.betas
    with np.errstate(divide="ignore"):
        wedge_bound = h_norm * (r_origin ** (beta1 - 1.0) + r_origin ** (beta2 - 1.0))
        d1 = np.hypot(pts[:, 0] - geom.vertex(1)[0], pts[:, 1])
        d2 = np.hypot(pts[:, 0] - geom.vertex(2)[0], pts[:, 1])
        corner_bound = h_norm * (
            1.0 / (eps * log_eps) + d1 ** (beta1 - 1.0) + d2 ** (beta2 - 1.0)
        )

    res_w = np.hypot(*(grad_u - wedge).T)
    res_c = np.hypot(*(grad_u - corner).T)
    return DecompositionResiduals(
        points=pts,
        valid=valid,
        grad_u=grad_u,
        wedge_residual=res_w,
        corner_residual=res_c,
        wedge_bound=wedge_bound,
        corner_bound=corner_bound,
    )
