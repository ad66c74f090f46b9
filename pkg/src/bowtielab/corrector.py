"""Bounded corrector on the cone-exterior at unit scale.

Solves for the equalized angle potential: the bounded harmonic function on
the cone exterior taking the value 0 on one cone boundary and pi/gamma on
the other.  The corrector w is that potential minus the gap angle; it
decays like rho^(-gamma) from the gap apex.  The unbounded domain is
truncated by a large square carrying Dirichlet data (gap angle plus the
fitted decay tail), iterated until the tail coefficients stabilize.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from . import layers
from .errors import CorrectorError, DomainError
from .geometry import ApertureAngles, cone_frame, gap_apex, gap_exponent
from .singular import SingularBasis, singular_basis

FILE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class CorrectorGrading:
    vertex_h: float = 1e-8  # innermost panel at the cone vertices
    ratio: float = 0.8
    edge_h_max: float = 0.3  # panel cap on the cone edges
    trunc_h: float = 0.55  # panel cap on the truncation square
    junction_h: float = 1e-3  # innermost panel at edge/square junctions
    max_unknowns: int = 12000

    def refined(self, factor: float = 2.0) -> "CorrectorGrading":
        return replace(
            self,
            edge_h_max=self.edge_h_max / factor,
            trunc_h=self.trunc_h / factor,
            junction_h=self.junction_h / factor,
        )


def _graded_two_sided(total, h_left, h_right, h_max, ratio):
    left = layers.graded_breaks(total / 2.0, h_left, h_max, ratio)
    right = layers.graded_breaks(total / 2.0, h_right, h_max, ratio)
    return np.concatenate([left[:-1], total - right[::-1]])


def _ray_box_exit(origin: np.ndarray, direction: np.ndarray, half: float) -> float:
    """First positive parameter where origin + t*direction leaves [-half, half]^2."""
    ts = []
    for d in range(2):
        if direction[d] > 0:
            ts.append((half - origin[d]) / direction[d])
        elif direction[d] < 0:
            ts.append((-half - origin[d]) / direction[d])
    return min(ts)


def _upper_path_param(pt: np.ndarray, half: float) -> float:
    """Position of a point on the upper square path (R,0)->(R,R)->(-R,R)->(-R,0)."""
    x, y = pt
    if abs(x - half) < 1e-9 * half:
        return y
    if abs(y - half) < 1e-9 * half:
        return half + (half - x)
    if abs(x + half) < 1e-9 * half:
        return 3.0 * half + (half - y)
    raise ValueError(f"point {pt} not on the upper square path")


def _upper_path_point(s: np.ndarray, half: float) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    out = np.empty(s.shape + (2,))
    m1 = s <= half
    m2 = (s > half) & (s <= 3.0 * half)
    m3 = s > 3.0 * half
    out[m1] = np.stack([np.full(np.sum(m1), half), s[m1]], axis=-1)
    out[m2] = np.stack([half - (s[m2] - half), np.full(np.sum(m2), half)], axis=-1)
    out[m3] = np.stack([np.full(np.sum(m3), -half), half - (s[m3] - 3.0 * half)], axis=-1)
    return out


@dataclass(frozen=True)
class CorrectorSolution:
    """Layer representation of the equalized angle potential plus its tail."""

    angles: ApertureAngles
    gamma: float
    rho0: float
    trunc_radius: float  # minimum apex distance to the truncation boundary
    square_half: float
    panels: layers.PanelSet
    coef: np.ndarray
    const: float
    tail: np.ndarray  # decay-mode coefficients a_n, n = 1..n_modes
    a: float
    b: float
    diagnostics: dict = field(repr=False)
    basis: SingularBasis = field(repr=False)

    @property
    def opening(self) -> float:
        return math.pi / self.gamma

    # -- evaluation ---------------------------------------------------------

    def _use_tail(self, pts: np.ndarray) -> np.ndarray:
        d = pts - self.basis.gap.q
        rho_star = np.hypot(d[..., 0], np.abs(pts[..., 1]) - self.basis.gap.q[1])
        inside = (np.max(np.abs(pts), axis=-1) < self.square_half) & (
            rho_star < 0.9 * self.trunc_radius
        )
        return ~inside

    def potential(self, X, check: bool = True) -> np.ndarray:
        """The equalized angle potential (gap angle plus corrector)."""
        pts = np.atleast_2d(np.asarray(X, dtype=float))
        if check and np.any(~self.basis.exterior_mask(pts)):
            raise DomainError("point(s) inside a cone")
        out = np.empty(pts.shape[0])
        tail = self._use_tail(pts)
        if np.any(~tail):
            out[~tail] = layers.potential(self.panels, self.coef, pts[~tail]) + self.const
        if np.any(tail):
            out[tail] = self.basis.gap_angle(pts[tail], check=False) + self.tail_w(pts[tail])
        return out

    def w(self, X, check: bool = True) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(X, dtype=float))
        return self.potential(pts, check=check) - self.basis.gap_angle(pts, check=check)

    def grad_potential(self, X, check: bool = True) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(X, dtype=float))
        if check and np.any(~self.basis.exterior_mask(pts)):
            raise DomainError("point(s) inside a cone")
        out = np.empty_like(pts)
        tail = self._use_tail(pts)
        if np.any(~tail):
            out[~tail] = layers.gradient(self.panels, self.coef, pts[~tail])
        if np.any(tail):
            gphi, _ = self.basis.gap_angle_gradient(pts[tail], check=False)
            out[tail] = gphi + self.tail_grad_w(pts[tail])
        return out

    def grad_w(self, X, check: bool = True) -> np.ndarray:
        """Gradient of the corrector; one-sided (upper) on the gap axis."""
        pts = np.atleast_2d(np.asarray(X, dtype=float))
        gphi, _ = self.basis.gap_angle_gradient(pts, check=check)
        return self.grad_potential(pts, check=False) - gphi

    # -- decay tail -----------------------------------------------------------

    def _tail_polar(self, pts: np.ndarray):
        q = self.basis.gap.q
        xs = np.stack([pts[..., 0], np.abs(pts[..., 1])], axis=-1)
        d = xs - q
        rho = np.hypot(d[..., 0], d[..., 1])
        psi = np.arctan2(d[..., 1], d[..., 0])
        phi = self.basis.gap.reference_angle - psi
        return rho, phi, d

    def tail_w(self, X) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(X, dtype=float))
        rho, phi, _ = self._tail_polar(pts)
        if np.any(rho <= self.rho0):
            raise DomainError("tail series evaluated inside the apex disk")
        out = np.zeros(pts.shape[0])
        for n, an in enumerate(self.tail, start=1):
            out += an * rho ** (-n * self.gamma) * np.sin(n * self.gamma * phi)
        return out

    def tail_grad_w(self, X) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(X, dtype=float))
        rho, phi, d = self._tail_polar(pts)
        if np.any(rho <= self.rho0):
            raise DomainError("tail series evaluated inside the apex disk")
        rho_hat = d / rho[:, None]
        # unit vector of increasing phi in the upper half-plane
        phi_hat = np.stack([rho_hat[:, 1], -rho_hat[:, 0]], axis=-1)
        out = np.zeros_like(pts)
        for n, an in enumerate(self.tail, start=1):
            k = n * self.gamma
            amp = an * k * rho ** (-k - 1.0)
            out += amp[:, None] * (
                -np.sin(k * phi)[:, None] * rho_hat + np.cos(k * phi)[:, None] * phi_hat
            )
        out[pts[:, 1] < 0.0, 1] *= -1.0
        return out

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        payload = {
            "format_version": FILE_FORMAT_VERSION,
            "alpha1": self.angles.alpha1,
            "alpha2": self.angles.alpha2,
            "gamma": self.gamma,
            "rho0": self.rho0,
            "trunc_radius": self.trunc_radius,
            "square_half": self.square_half,
            "panel_a": self.panels.a.tolist(),
            "panel_b": self.panels.b.tolist(),
            "coef": self.coef.tolist(),
            "const": self.const,
            "tail": self.tail.tolist(),
            "a": self.a,
            "b": self.b,
            "diagnostics": self.diagnostics,
        }
        Path(path).write_text(json.dumps(payload))

    @staticmethod
    def load(path) -> "CorrectorSolution":
        payload = json.loads(Path(path).read_text())
        if payload.get("format_version") != FILE_FORMAT_VERSION:
            raise CorrectorError(
                f"unsupported corrector file version {payload.get('format_version')!r}"
            )
        angles = ApertureAngles(payload["alpha1"], payload["alpha2"])
        return CorrectorSolution(
            angles=angles,
            gamma=payload["gamma"],
            rho0=payload["rho0"],
            trunc_radius=payload["trunc_radius"],
            square_half=payload["square_half"],
            panels=layers.PanelSet(np.array(payload["panel_a"]), np.array(payload["panel_b"])),
            coef=np.array(payload["coef"]),
            const=payload["const"],
            tail=np.array(payload["tail"]),
            a=payload["a"],
            b=payload["b"],
            diagnostics=payload["diagnostics"],
            basis=singular_basis(angles),
        )


def _build_boundary(angles: ApertureAngles, square_half: float, grading: CorrectorGrading):
    """Upper-half boundary pieces mirrored to the lower half.

    Returns (panels, edge_mask bool array set on cone-edge panels,
    cone_id array with 1/2 on edge panels and 0 on the truncation).
    """
    pieces = []  # (points, kind) with kind 0 = truncation, 1, 2 = cone edge
    exits = {}
    for j in (1, 2):
        frame = cone_frame(angles, j)
        t_exit = _ray_box_exit(frame.vertex, frame.reference_ray, square_half)
        breaks = _graded_two_sided(
            t_exit, grading.vertex_h, grading.junction_h, grading.edge_h_max, grading.ratio
        )
        pts = frame.vertex + breaks[:, None] * frame.reference_ray
        pieces.append((pts, j))
        exits[j] = frame.vertex + t_exit * frame.reference_ray

    s2 = _upper_path_param(exits[2], square_half)
    s1 = _upper_path_param(exits[1], square_half)
    if not s2 < s1:
        raise CorrectorError("cone edges exit the truncation square out of order")
    cuts = [s for s in (square_half, 3.0 * square_half) if s2 < s < s1]
    stops = [s2, *cuts, s1]
    for lo, hi in zip(stops[:-1], stops[1:]):
        breaks = _graded_two_sided(
            hi - lo, grading.junction_h, grading.junction_h, grading.trunc_h, grading.ratio
        )
        pieces.append((_upper_path_point(lo + breaks, square_half), 0))

    a_list, b_list, kind = [], [], []
    for pts, k in pieces:
        a_list.append(pts[:-1])
        b_list.append(pts[1:])
        kind.append(np.full(pts.shape[0] - 1, k, dtype=int))
    # mirror to the lower half-plane
    flip = np.array([1.0, -1.0])
    for pts, k in pieces:
        a_list.append(pts[:-1] * flip)
        b_list.append(pts[1:] * flip)
        kind.append(np.full(pts.shape[0] - 1, k, dtype=int))
    panels = layers.PanelSet(np.vstack(a_list), np.vstack(b_list))
    return panels, np.concatenate(kind)


def solve_corrector(
    angles: ApertureAngles,
    trunc_radius: float | None = None,
    grading: CorrectorGrading | None = None,
    n_modes: int = 8,
    tail_passes: int = 3,
    tail_tol: float = 1e-4,
) -> CorrectorSolution:
    """Solve for the equalized angle potential and extract the corner coefficients.

    `trunc_radius` is the minimum distance from the gap apex to the truncation
    boundary; it must be at least 8x the apex-to-vertex distance.
    """
    grading = grading or CorrectorGrading()
    basis = singular_basis(angles)
    gamma = gap_exponent(angles)
    q = gap_apex(angles)
    rho0 = max(
        float(np.linalg.norm(basis.frame(1).vertex - q)),
        float(np.linalg.norm(basis.frame(2).vertex - q)),
    )
    if trunc_radius is None:
        trunc_radius = 32.0 * rho0
    if trunc_radius < 8.0 * rho0:
        raise CorrectorError(
            f"truncation radius {trunc_radius:.3g} below the minimum {8.0 * rho0:.3g}"
        )
    square_half = trunc_radius + float(np.max(np.abs(q)))

    panels, kind = _build_boundary(angles, square_half, grading)
    n_coef = layers.N_BASIS * panels.n + 1
    if n_coef > grading.max_unknowns:
        raise CorrectorError(f"corrector mesh needs {n_coef} unknowns")

    A = layers.collocation_matrix(panels)
    n = A.shape[1]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A
    M[:n, -1] = 1.0
    M[-1, :n] = layers.charge_row(panels)
    col_scale = np.max(np.abs(M), axis=0)
    M /= col_scale[None, :]
    lu = sla.lu_factor(M)

    nodes = panels.nodes()
    node_kind = np.repeat(kind, layers.N_BASIS)
    opening = math.pi / gamma
    data = np.zeros(n)
    data[node_kind == 2] = opening
    trunc_nodes = nodes[node_kind == 0]
    phi_trunc = basis.gap_angle(trunc_nodes, check=False)

    tail = np.zeros(n_modes)
    coef = np.zeros(n)
    const = 0.0
    sol_stub = None
    # fit close to the apex disk: the decay modes amplify trace noise like
    # radius^(n*gamma), so a far arc cannot resolve the higher modes
    fit_radius = 1.5 * rho0
    for _ in range(max(1, tail_passes)):
        g = data.copy()
        g[node_kind == 0] = phi_trunc
        if sol_stub is not None:
            g[node_kind == 0] = phi_trunc + sol_stub.tail_w(trunc_nodes)
        rhs = np.concatenate([g, [0.0]])
        x = sla.lu_solve(lu, rhs) / col_scale
        coef, const = x[:-1], float(x[-1])
        sol_stub = CorrectorSolution(
            angles=angles,
            gamma=gamma,
            rho0=rho0,
            trunc_radius=trunc_radius,
            square_half=square_half,
            panels=panels,
            coef=coef,
            const=const,
            tail=tail,
            a=1.0,
            b=1.0,
            diagnostics={},
            basis=basis,
        )
        tail = fit_tail(sol_stub, fit_radius, n_modes)
        sol_stub = replace(sol_stub, tail=tail)

    # quality diagnostics
    check_pts = panels.nodes(np.array([-0.9, -0.4, 0.2, 0.7]))
    check_kind = np.repeat(kind, 4)
    vals = layers.potential(panels, coef, check_pts) + const
    target = np.zeros_like(vals)
    target[check_kind == 2] = opening
    m0 = check_kind == 0
    target[m0] = basis.gap_angle(check_pts[m0], check=False) + sol_stub.tail_w(check_pts[m0])
    bc_residual = float(np.max(np.abs(vals - target)))
    tail_at_trunc = float(np.sum(np.abs(tail) * trunc_radius ** (-gamma * np.arange(1, n_modes + 1))))
    # truncation error estimate: the first mode NOT carried by the imposed data
    unfitted = float(np.abs(tail[-1]) * trunc_radius ** (-gamma * n_modes))
    if unfitted > tail_tol * opening:
        raise CorrectorError(
            f"estimated truncation error {unfitted:.3e} exceeds tolerance; "
            f"increase trunc_radius"
        )

    a, b = _extract_corner_coefficients(sol_stub)
    diagnostics = {
        "bc_residual": bc_residual,
        "tail_at_truncation": tail_at_trunc,
        "truncation_error_estimate": unfitted,
        "n_panels": int(panels.n),
        "n_unknowns": int(n + 1),
    }
    return replace(sol_stub, a=a, b=b, diagnostics=diagnostics)


def fit_tail(sol: CorrectorSolution, radius: float, n_modes: int, n_quad: int = 256) -> np.ndarray:
    """Decay-mode coefficients from the corrector trace on an apex-centered arc."""
    gamma = sol.gamma
    opening = math.pi / gamma
    x, wts = np.polynomial.legendre.leggauss(n_quad)
    phi = 0.5 * opening * (x + 1.0)
    w_phi = 0.5 * opening * wts
    psi = sol.basis.gap.reference_angle - phi
    pts = sol.basis.gap.q + radius * np.stack([np.cos(psi), np.sin(psi)], axis=-1)
    w_vals = layers.potential(sol.panels, sol.coef, pts) + sol.const
    w_vals -= sol.basis.gap_angle(pts, check=False)
    out = np.empty(n_modes)
    for n in range(1, n_modes + 1):
        proj = float(np.sum(w_vals * np.sin(n * gamma * phi) * w_phi))
        out[n - 1] = (2.0 / opening) * proj * radius ** (n * gamma)
    return out


def _arc_integral(sol: CorrectorSolution, j: int, values_fn, n_quad: int = 256) -> float:
    """Quadrature of sin(beta_j * theta) * values over the half-radius arc at vertex j."""
    frame = sol.basis.frame(j)
    beta = sol.basis.beta(j)
    sweep = frame.exterior_sweep
    x, wts = np.polynomial.legendre.leggauss(n_quad)
    theta = 0.5 * sweep * (x + 1.0)
    w_theta = 0.5 * sweep * wts
    psi = frame.reference_angle + frame.orientation * theta
    pts = frame.vertex + 0.5 * np.stack([np.cos(psi), np.sin(psi)], axis=-1)
    vals = values_fn(pts)
    return float(np.sum(np.sin(beta * theta) * vals * w_theta))


def _extract_corner_coefficients(sol: CorrectorSolution) -> tuple[float, float]:
    """Leading corner coefficients of the potential at each vertex.

    The potential behaves like a * (corner field 1) at the first vertex and
    like opening - a*b * (corner field 2) at the second; both coefficients
    come from half-radius arc integrals against the leading angular mode.
    """
    opening = sol.opening
    beta1, beta2 = sol.basis.betas

    def phi_vals(pts):
        return layers.potential(sol.panels, sol.coef, pts) + sol.const

    a = (beta1 * 2.0 ** (beta1 + 1.0) / math.pi) * _arc_integral(sol, 1, phi_vals)
    a_tilde = (beta2 * 2.0 ** (beta2 + 1.0) / math.pi) * _arc_integral(
        sol, 2, lambda pts: opening - phi_vals(pts)
    )
    if not (a > 0.0 and a_tilde > 0.0):
        raise CorrectorError(f"non-positive corner coefficients a={a:.3e}, a~={a_tilde:.3e}")
    return a, a_tilde / a
