"""Single-layer potentials on straight panels with closed-form integrals.

Densities are discontinuous quadratics per panel in the scaled coordinate
tau = 2t/L in [-1, 1].  All potential and gradient influence coefficients
are exact (elementary antiderivatives of the log kernel), so evaluation
arbitrarily close to a panel needs no special quadrature.  Kernel
convention: G(x, y) = -log|x - y| / (2*pi).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_INV2PI = 1.0 / (2.0 * np.pi)
# Gauss-Legendre nodes used for collocation (3 per panel)
GAUSS3 = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
N_BASIS = 3


@dataclass(frozen=True)
class PanelSet:
    """Straight panels given by endpoint arrays of shape (n, 2)."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.atleast_2d(np.asarray(self.a, dtype=float)))
        object.__setattr__(self, "b", np.atleast_2d(np.asarray(self.b, dtype=float)))

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.a + self.b)

    @property
    def length(self) -> np.ndarray:
        d = self.b - self.a
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def tangent(self) -> np.ndarray:
        d = self.b - self.a
        return d / self.length[:, None]

    @property
    def normal(self) -> np.ndarray:
        """Quarter-turn of the tangent: (-t_y, t_x)."""
        t = self.tangent
        return np.column_stack([-t[:, 1], t[:, 0]])

    def nodes(self, taus: np.ndarray = GAUSS3) -> np.ndarray:
        """Points at scaled coordinates `taus` on every panel, shape (n*k, 2)."""
        half = 0.5 * self.length[:, None] * self.tangent
        pts = self.mid[:, None, :] + taus[None, :, None] * half[:, None, :]
        return pts.reshape(-1, 2)

    def concat(self, other: "PanelSet") -> "PanelSet":
        return PanelSet(np.vstack([self.a, other.a]), np.vstack([self.b, other.b]))


def panels_from_polyline(points: np.ndarray, closed: bool = False) -> PanelSet:
    pts = np.asarray(points, dtype=float)
    if closed:
        return PanelSet(pts, np.roll(pts, -1, axis=0))
    return PanelSet(pts[:-1], pts[1:])


def graded_breaks(total: float, h0: float, h_max: float, ratio: float) -> np.ndarray:
    """Breakpoints on [0, total], panel sizes growing geometrically from h0.

    Sizes start at h0 at the 0-end and grow by 1/ratio until h_max; the
    rest is split uniformly (no sliver remainder panels).
    """
    if total <= h0:
        return np.array([0.0, total])
    sizes = []
    h = h0
    acc = 0.0
    while acc + h < total and h < h_max:
        sizes.append(h)
        acc += h
        h = min(h / ratio, h_max)
    rem = total - acc
    if h >= h_max:
        n_uniform = max(1, int(np.ceil(rem / h_max)))
        sizes.extend([rem / n_uniform] * n_uniform)
    elif sizes and rem < 0.5 * sizes[-1]:
        sizes[-1] += rem
    else:
        sizes.append(rem)
    return np.concatenate([[0.0], np.cumsum(sizes)])


def graded_breaks_bidirectional(total: float, h0: float, h_max: float, ratio: float) -> np.ndarray:
    """Breakpoints graded toward both ends of [0, total]."""
    half = graded_breaks(total / 2.0, h0, h_max, ratio)
    return np.concatenate([half[:-1], total - half[::-1]])


def _safe_log(x: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(x, 1e-300))


def _eta_atan(u: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """eta * arctan(u / eta), continuous value 0 at eta = 0."""
    out = np.zeros(np.broadcast(u, eta).shape)
    nz = eta != 0.0
    out[nz] = eta[nz] * np.arctan(u[nz] / eta[nz])
    return out


def _atan_diff(u2: np.ndarray, u1: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """arctan(u2/eta) - arctan(u1/eta); 0 on the eta = 0 line outside the panel."""
    out = np.zeros(np.broadcast(u2, eta).shape)
    nz = eta != 0.0
    out[nz] = np.arctan(u2[nz] / eta[nz]) - np.arctan(u1[nz] / eta[nz])
    return out


def _local_coords(panels: PanelSet, targets: np.ndarray):
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    d = t[:, None, :] - panels.mid[None, :, :]
    tau = panels.tangent
    nrm = panels.normal
    xi = d[:, :, 0] * tau[None, :, 0] + d[:, :, 1] * tau[None, :, 1]
    eta = d[:, :, 0] * nrm[None, :, 0] + d[:, :, 1] * nrm[None, :, 1]
    return xi, eta


# far-field quadrature: the closed forms lose digits when the target distance
# is large against the panel (difference of O(d^3) antiderivatives); beyond
# FAR_FACTOR panel lengths a plain Gauss rule is exact to machine precision
FAR_FACTOR = 3.0
_FX, _FW = np.polynomial.legendre.leggauss(10)


def _far_mask(xi: np.ndarray, eta: np.ndarray, L: np.ndarray) -> np.ndarray:
    d = np.hypot(np.maximum(np.abs(xi) - 0.5 * L, 0.0), eta)
    return d > FAR_FACTOR * L


def potential_coeffs(panels: PanelSet, targets: np.ndarray) -> np.ndarray:
    """Influence matrix (m, n, 3): potential of basis {1, tau, tau^2} per panel.

    Valid for any target, including points on the panels themselves.
    """
    xi, eta = _local_coords(panels, targets)
    L = panels.length[None, :]
    u1 = -0.5 * L - xi
    u2 = 0.5 * L - xi
    e2 = eta * eta
    d1 = u1 * u1 + e2
    d2 = u2 * u2 + e2
    ln1 = _safe_log(d1)
    ln2 = _safe_log(d2)

    # antiderivatives of (1/2) ln(u^2 + eta^2) and of u, u^2 times it
    def A0(u, dsq, ln):
        return 0.5 * u * ln - u + _eta_atan(u, eta)

    I0 = A0(u2, d2, ln2) - A0(u1, d1, ln1)
    B = 0.25 * (d2 * ln2 - d1 * ln1) - 0.25 * (u2 * u2 - u1 * u1)
    I1 = xi * I0 + B

    def C0(u, ln):
        # integral of u^2 * (1/2) ln(u^2+eta^2): (u^3/6) ln - (1/3)(u^3/3 - eta^2 u + eta^3 atan(u/eta))
        u3 = u * u * u
        return u3 / 6.0 * ln - (u3 / 9.0 - e2 * u / 3.0 + e2 * _eta_atan(u, eta) / 3.0)

    I2 = C0(u2, ln2) - C0(u1, ln1) + 2.0 * xi * B + xi * xi * I0

    s = 2.0 / L
    out = np.stack([I0, s * I1, s * s * I2], axis=-1)

    far = _far_mask(xi, eta, L)
    if np.any(far):
        ti, pj = np.nonzero(far)
        xi_f, eta_f, L_f = xi[far], eta[far], L[0, pj] if L.ndim == 2 else L[pj]
        acc = np.zeros((xi_f.size, N_BASIS))
        for gx, gw in zip(_FX, _FW):
            du = xi_f - 0.5 * L_f * gx
            lnr = 0.5 * np.log(du * du + eta_f * eta_f)
            w = gw * 0.5 * L_f
            acc[:, 0] += w * lnr
            acc[:, 1] += w * lnr * gx
            acc[:, 2] += w * lnr * gx * gx
        out[ti, pj, :] = acc
    return -_INV2PI * out


def gradient_coeffs(panels: PanelSet, targets: np.ndarray) -> np.ndarray:
    """Influence array (m, n, 3, 2): gradient of each basis function's potential.

    Not valid for targets lying on a panel (use jump relations there).
    """
    xi, eta = _local_coords(panels, targets)
    L = panels.length[None, :]
    u1 = -0.5 * L - xi
    u2 = 0.5 * L - xi
    e2 = eta * eta
    d1 = u1 * u1 + e2
    d2 = u2 * u2 + e2
    ln1 = _safe_log(d1)
    ln2 = _safe_log(d2)
    dln = 0.5 * (ln2 - ln1)
    datan = _atan_diff(u2, u1, eta)

    dI0_dxi = -dln
    dI0_deta = datan

    # d/dxi of int t (1/2) ln: -(u - eta atan(u/eta))| - xi * dln
    int_u2 = (u2 - _eta_atan(u2, eta)) - (u1 - _eta_atan(u1, eta))
    dI1_dxi = -int_u2 - xi * dln
    dI1_deta = eta * dln + xi * datan

    # d/dxi of int t^2 (1/2) ln: -(int u^3/d^2 + 2 xi int u^2/d^2 + xi^2 int u/d^2)
    int_u3 = 0.5 * (u2 * u2 - u1 * u1) - e2 * dln
    dI2_dxi = -(int_u3 + 2.0 * xi * int_u2 + xi * xi * dln)
    # d/eta: int t^2 eta/d^2 = eta*int u^2/d^2... expanded about t = u + xi
    dI2_deta = eta * int_u2 + 2.0 * xi * eta * dln + xi * xi * datan

    s = 2.0 / L
    gxi = np.stack([dI0_dxi, s * dI1_dxi, s * s * dI2_dxi], axis=-1)
    geta = np.stack([dI0_deta, s * dI1_deta, s * s * dI2_deta], axis=-1)

    far = _far_mask(xi, eta, L)
    if np.any(far):
        ti, pj = np.nonzero(far)
        xi_f, eta_f, L_f = xi[far], eta[far], L[0, pj] if L.ndim == 2 else L[pj]
        acc_xi = np.zeros((xi_f.size, N_BASIS))
        acc_eta = np.zeros((xi_f.size, N_BASIS))
        for g, gw in zip(_FX, _FW):
            du = xi_f - 0.5 * L_f * g
            r2 = du * du + eta_f * eta_f
            w = gw * 0.5 * L_f / r2
            for k, fac in enumerate((1.0, g, g * g)):
                acc_xi[:, k] += w * du * fac
                acc_eta[:, k] += w * eta_f * fac
        gxi[ti, pj, :] = acc_xi
        geta[ti, pj, :] = acc_eta

    tau = panels.tangent
    nrm = panels.normal
    grad = (
        gxi[..., None] * tau[None, :, None, :]
        + geta[..., None] * nrm[None, :, None, :]
    )
    return -_INV2PI * grad


def potential(panels: PanelSet, coef: np.ndarray, targets: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Potential of the density with coefficients coef (n, 3) at targets (m, 2)."""
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    out = np.empty(t.shape[0])
    c = coef.reshape(panels.n, N_BASIS)
    for i0 in range(0, t.shape[0], chunk):
        block = potential_coeffs(panels, t[i0 : i0 + chunk])
        out[i0 : i0 + chunk] = np.einsum("mnk,nk->m", block, c)
    return out


def gradient(panels: PanelSet, coef: np.ndarray, targets: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Gradient of the density potential at targets (m, 2) -> (m, 2)."""
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    out = np.empty((t.shape[0], 2))
    c = coef.reshape(panels.n, N_BASIS)
    for i0 in range(0, t.shape[0], chunk):
        block = gradient_coeffs(panels, t[i0 : i0 + chunk])
        out[i0 : i0 + chunk] = np.einsum("mnkd,nk->md", block, c)
    return out


def collocation_matrix(panels: PanelSet, chunk: int = 1024) -> np.ndarray:
    """Square potential matrix at the 3 Gauss nodes of every panel.

    Row order: panel-major, node-minor; column order: panel-major,
    basis-minor.  Shape (3n, 3n).
    """
    nodes = panels.nodes()
    m = nodes.shape[0]
    out = np.empty((m, panels.n * N_BASIS))
    for i0 in range(0, m, chunk):
        block = potential_coeffs(panels, nodes[i0 : i0 + chunk])
        out[i0 : i0 + chunk] = block.reshape(block.shape[0], -1)
    return out


def charge_row(panels: PanelSet) -> np.ndarray:
    """Weights giving the total density integral: int mu ds per coefficient."""
    L = panels.length
    row = np.zeros((panels.n, N_BASIS))
    row[:, 0] = L
    row[:, 2] = L / 3.0
    return row.ravel()


def linear_moment_row(panels: PanelSet, hx: float, hy: float) -> np.ndarray:
    """Weights giving int h(y) mu(y) ds for the linear background h = hx*x + hy*y."""
    L = panels.length
    mid = panels.mid
    tau = panels.tangent
    h_mid = hx * mid[:, 0] + hy * mid[:, 1]
    h_t = hx * tau[:, 0] + hy * tau[:, 1]
    row = np.zeros((panels.n, N_BASIS))
    row[:, 0] = h_mid * L
    row[:, 1] = h_t * L * L / 6.0
    row[:, 2] = h_mid * L / 3.0
    return row.ravel()


def density_values(coef: np.ndarray, taus: np.ndarray = GAUSS3) -> np.ndarray:
    """Density evaluated at scaled coordinates `taus` on every panel."""
    c = coef.reshape(-1, N_BASIS)
    basis = np.stack([np.ones_like(taus), taus, taus * taus], axis=-1)
    return c @ basis.T
