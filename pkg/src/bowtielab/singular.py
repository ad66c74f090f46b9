"""Closed-form corner fields, the gap angle, and the combined gradient field.

The corner field of cone j is r^beta * sin(beta * theta) in the cone frame;
it is harmonic on the exterior, vanishes exactly on the cone boundary, and
its gradient magnitude is beta * r^(beta-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularPointError
from .geometry import (
    ApertureAngles,
    ConeFrame,
    GapFrame,
    cone_angle_raw,
    cone_contains,
    cone_frame,
    corner_exponent,
    gap_angle_gradient,
    gap_frame,
    gap_polar,
    in_exterior_of_cones,
)


@dataclass(frozen=True)
class SingularBasis:
    """Evaluators for the two corner fields and the gap angle."""

    angles: ApertureAngles
    frames: tuple[ConeFrame, ConeFrame]
    betas: tuple[float, float]
    gap: GapFrame

    def frame(self, j: int) -> ConeFrame:
        return self.frames[j - 1]

    def beta(self, j: int) -> float:
        return self.betas[j - 1]

    # -- corner fields -----------------------------------------------------

    def value(self, j: int, X, check: bool = True) -> np.ndarray:
        """Corner field of cone j; nonnegative on the exterior, zero on the edges."""
        frame = self.frame(j)
        pts = np.asarray(X, dtype=float)
        if check and np.any(cone_contains(frame, pts)):
            raise DomainError(f"point(s) inside cone {j}")
        d = pts - frame.vertex
        r = np.hypot(d[..., 0], d[..., 1])
        theta = np.minimum(cone_angle_raw(frame, pts), frame.exterior_sweep)
        beta = self.beta(j)
        return r**beta * np.sin(beta * theta)

    def gradient(self, j: int, X, check: bool = True) -> np.ndarray:
        """Gradient of the corner field; magnitude beta * r^(beta-1)."""
        frame = self.frame(j)
        pts = np.asarray(X, dtype=float)
        if check and np.any(cone_contains(frame, pts)):
            raise DomainError(f"point(s) inside cone {j}")
        d = pts - frame.vertex
        r = np.hypot(d[..., 0], d[..., 1])
        if np.any(r == 0.0):
            raise SingularPointError(f"gradient of corner field {j} at its vertex")
        theta = np.minimum(cone_angle_raw(frame, pts), frame.exterior_sweep)
        beta = self.beta(j)
        psi = np.arctan2(d[..., 1], d[..., 0])
        u_r = np.stack([np.cos(psi), np.sin(psi)], axis=-1)
        u_psi = np.stack([-np.sin(psi), np.cos(psi)], axis=-1)
        amp = beta * r ** (beta - 1.0)
        rad = np.sin(beta * theta)
        ang = frame.orientation * np.cos(beta * theta)
        return amp[..., None] * (rad[..., None] * u_r + ang[..., None] * u_psi)

    def inward_normal(self, j: int, upper: bool = True) -> np.ndarray:
        """Unit normal of a cone edge pointing into the cone."""
        frame = self.frame(j)
        e = frame.reference_ray
        o = frame.orientation
        # quarter turn of the upper-edge ray toward the cone interior
        n = np.array([o * e[1], -o * e[0]])
        if not upper:
            n = n * np.array([1.0, -1.0])
        return n

    # -- gap angle ----------------------------------------------------------

    def gap_angle(self, X, check: bool = True) -> np.ndarray:
        _, phi = gap_polar(self.gap, X, check=check)
        return phi

    def gap_radius(self, X) -> np.ndarray:
        pts = np.asarray(X, dtype=float)
        d = pts - self.gap.q
        return np.hypot(d[..., 0], d[..., 1])

    def gap_angle_gradient(self, X, check: bool = True):
        """Gradient of the even gap angle and the on-axis one-sided flag."""
        return gap_angle_gradient(self.gap, X, check=check)

    # -- combined field -------------------------------------------------

    def combined_gradient(self, b: float, X, check: bool = True) -> np.ndarray:
        """grad(field 1) - b * grad(field 2); b must be positive."""
        if b <= 0.0:
            raise DomainError(f"mixing coefficient b={b} must be positive")
        return self.gradient(1, X, check=check) - b * self.gradient(2, X, check=check)

    def exterior_mask(self, X) -> np.ndarray:
        return in_exterior_of_cones(self.angles, X)


def singular_basis(angles: ApertureAngles) -> SingularBasis:
    return SingularBasis(
        angles=angles,
        frames=(cone_frame(angles, 1), cone_frame(angles, 2)),
        betas=(corner_exponent(angles.alpha1), corner_exponent(angles.alpha2)),
        gap=gap_frame(angles),
    )


@dataclass(frozen=True)
class CombinedField:
    """Corner-field difference with a fixed positive mixing coefficient."""

    basis: SingularBasis
    b: float

    def __post_init__(self):
        if self.b <= 0.0:
            raise DomainError(f"mixing coefficient b={self.b} must be positive")

    def gradient(self, X, check: bool = True) -> np.ndarray:
        return self.basis.combined_gradient(self.b, X, check=check)


def cancellation_ratio_grid(
    basis: SingularBasis,
    b: float,
    half_width: float = 5.0,
    n: int = 200,
    exclude_radius: float = 1e-3,
):
    """Grid supremum of (|g1| + |g2|) / |g1 - b g2| over the cone exterior.

    Excludes small disks about the vertices where both terms blow up at the
    same rate.  Returns (sup_ratio, n_points_used).
    """
    xs = np.linspace(-half_width, half_width, n)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    mask = basis.exterior_mask(pts)
    for j in (1, 2):
        d = pts - basis.frame(j).vertex
        mask &= np.hypot(d[:, 0], d[:, 1]) > exclude_radius
    pts = pts[mask]
    g1 = basis.gradient(1, pts, check=False)
    g2 = basis.gradient(2, pts, check=False)
    num = np.hypot(g1[:, 0], g1[:, 1]) + np.hypot(g2[:, 0], g2[:, 1])
    diff = g1 - b * g2
    den = np.hypot(diff[:, 0], diff[:, 1])
    return float(np.max(num / den)), int(pts.shape[0])


def batch_table(basis: SingularBasis, b: float, points: np.ndarray) -> np.ndarray:
    """Rows (x, y, B1, B2, |gradB1|, |gradB2|, |combined|, phi, rho) at exterior points."""
    pts = np.asarray(points, dtype=float)
    mask = basis.exterior_mask(pts)
    pts = pts[mask]
    v1 = basis.value(1, pts, check=False)
    v2 = basis.value(2, pts, check=False)
    g1 = basis.gradient(1, pts, check=False)
    g2 = basis.gradient(2, pts, check=False)
    comb = g1 - b * g2
    rho, phi = gap_polar(basis.gap, pts, check=False)
    return np.column_stack(
        [
            pts[:, 0],
            pts[:, 1],
            v1,
            v2,
            np.hypot(g1[:, 0], g1[:, 1]),
            np.hypot(g2[:, 0], g2[:, 1]),
            np.hypot(comb[:, 0], comb[:, 1]),
            phi,
            rho,
        ]
    )
