"""Cones, bow-tie inclusions, and the coordinate frames attached to them.

Unit-scale frame: two open cones with vertices S1 = (-1/2, 0) and
S2 = (1/2, 0), opening left and right with apertures alpha1, alpha2.
Gap-scale frame: the inclusions Omega_j are the cones translated so their
vertices sit at V1 = (-eps/2, 0), V2 = (eps/2, 0), closed off at distance
`edge_len` from the vertex by a circular cap tangent to both edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

# Admissibility margins for the angle sum (fixed tool-level constants).
ANGLE_SUM_MIN = 0.1
ANGLE_SUM_MAX_MARGIN = 0.1

_TWO_PI = 2.0 * math.pi


def _as_points(x) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.shape[-1] != 2:
        raise ValueError(f"points must have trailing dimension 2, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class ApertureAngles:
    """Aperture angles of the two cones, validated on construction."""

    alpha1: float
    alpha2: float

    def __post_init__(self):
        for name, a in (("alpha1", self.alpha1), ("alpha2", self.alpha2)):
            if not (0.0 < a <= math.pi):
                raise DomainError(f"{name}={a} outside (0, pi]")
        s = self.alpha1 + self.alpha2
        if not (ANGLE_SUM_MIN <= s <= _TWO_PI - ANGLE_SUM_MAX_MARGIN):
            raise DomainError(
                f"alpha1+alpha2={s:.6g} outside [{ANGLE_SUM_MIN}, 2*pi-{ANGLE_SUM_MAX_MARGIN}]"
            )

    def alpha(self, j: int) -> float:
        if j == 1:
            return self.alpha1
        if j == 2:
            return self.alpha2
        raise ValueError(f"cone index must be 1 or 2, got {j}")


def corner_exponent(alpha: float) -> float:
    """Exponent pi/(2*pi - alpha) of the corner field for aperture alpha.

    Strictly in (1/2, 1] for alpha in (0, pi].
    """
    if not (0.0 < alpha <= math.pi):
        raise DomainError(f"alpha={alpha} outside (0, pi]")
    return math.pi / (_TWO_PI - alpha)


def gap_exponent(angles: ApertureAngles) -> float:
    """Decay exponent 2*pi/(2*pi - (alpha1+alpha2)) of the gap wedge, > 1."""
    s = angles.alpha1 + angles.alpha2
    if s >= _TWO_PI - ANGLE_SUM_MAX_MARGIN:
        raise DomainError(f"alpha1+alpha2={s:.6g} too close to 2*pi")
    return _TWO_PI / (_TWO_PI - s)


def gap_apex(angles: ApertureAngles) -> np.ndarray:
    """Intersection point of the two upper-edge lines (below the x-axis)."""
    c1 = 1.0 / math.tan(angles.alpha1 / 2.0)
    c2 = 1.0 / math.tan(angles.alpha2 / 2.0)
    den = c1 + c2
    return np.array([c1 / den - 0.5, -1.0 / den])


@dataclass(frozen=True)
class ConeFrame:
    """Polar frame attached to one unit-scale cone.

    The angle is measured from the upper edge, sweeping through the cone
    exterior; its range on the exterior is [0, 2*pi - opening].
    """

    index: int
    vertex: np.ndarray
    reference_ray: np.ndarray  # unit vector along the upper edge
    opening: float

    @property
    def exterior_sweep(self) -> float:
        return _TWO_PI - self.opening

    @property
    def reference_angle(self) -> float:
        """Standard (atan2) angle of the upper-edge direction."""
        return math.atan2(self.reference_ray[1], self.reference_ray[0])

    @property
    def orientation(self) -> float:
        """+1 if the exterior angle grows counterclockwise, -1 otherwise."""
        return 1.0 if self.index == 2 else -1.0


def cone_frame(angles: ApertureAngles, j: int) -> ConeFrame:
    a = angles.alpha(j)
    if j == 1:
        vertex = np.array([-0.5, 0.0])
        ray = np.array([-math.cos(a / 2.0), math.sin(a / 2.0)])
    elif j == 2:
        vertex = np.array([0.5, 0.0])
        ray = np.array([math.cos(a / 2.0), math.sin(a / 2.0)])
    else:
        raise ValueError(f"cone index must be 1 or 2, got {j}")
    return ConeFrame(index=j, vertex=vertex, reference_ray=ray, opening=a)


def cone_angle_raw(frame: ConeFrame, X, wrap_tol: float = 1e-12) -> np.ndarray:
    """Exterior angle in [0, 2*pi), without the domain check.

    Values within wrap_tol below 2*pi are folded to 0 (points numerically on
    the upper edge would otherwise wrap to the far end of the range).
    """
    pts = _as_points(X)
    d = pts - frame.vertex
    psi = np.arctan2(d[..., 1], d[..., 0])
    theta = np.mod(frame.orientation * (psi - frame.reference_angle), _TWO_PI)
    return np.where(theta >= _TWO_PI - wrap_tol, 0.0, theta)


def cone_polar(frame: ConeFrame, X, tol: float = 1e-12):
    """Polar coordinates (r, theta) of X in the cone frame.

    theta = 0 on the upper edge, theta = 2*pi - opening on the lower edge.
    Raises DomainError for points strictly inside the cone.
    """
    pts = _as_points(X)
    d = pts - frame.vertex
    r = np.hypot(d[..., 0], d[..., 1])
    theta = cone_angle_raw(frame, pts)
    sweep = frame.exterior_sweep
    inside = theta > sweep + tol
    if np.any(inside & (r > tol)):
        raise DomainError(f"point(s) inside cone {frame.index}")
    theta = np.minimum(theta, sweep)
    return r, theta


def cone_contains(frame: ConeFrame, X, tol: float = 1e-12) -> np.ndarray:
    """Strict membership of X in the open cone (angle-based, valid for alpha = pi)."""
    pts = _as_points(X)
    d = pts - frame.vertex
    r = np.hypot(d[..., 0], d[..., 1])
    theta = cone_angle_raw(frame, pts)
    return (theta > frame.exterior_sweep + tol) & (r > 0.0)


def in_exterior_of_cones(angles: ApertureAngles, X) -> np.ndarray:
    """True where X lies in the closed exterior of both unit-scale cones."""
    f1 = cone_frame(angles, 1)
    f2 = cone_frame(angles, 2)
    return ~(cone_contains(f1, X) | cone_contains(f2, X))


@dataclass(frozen=True)
class GapFrame:
    """Polar frame (rho, phi) about the gap apex Q.

    phi = 0 on the upper-edge line of cone 1, phi = pi/gamma on the
    upper-edge line of cone 2; extended evenly in y below the axis.
    """

    angles: ApertureAngles
    q: np.ndarray
    gamma: float
    reference_angle: float  # standard angle of the phi = 0 direction

    @property
    def opening(self) -> float:
        return math.pi / self.gamma


def gap_frame(angles: ApertureAngles) -> GapFrame:
    q = gap_apex(angles)
    gamma = gap_exponent(angles)
    ref = math.pi - angles.alpha1 / 2.0
    return GapFrame(angles=angles, q=q, gamma=gamma, reference_angle=ref)


def gap_polar(frame: GapFrame, X, check: bool = True):
    """(rho, phi) of X about the apex, with the even extension phi(x,-y)=phi(x,y).

    Raises DomainError when `check` is set and X lies inside a cone.
    """
    pts = _as_points(X)
    if check and np.any(~in_exterior_of_cones(frame.angles, pts)):
        raise DomainError("point(s) inside a cone")
    d = pts - frame.q
    rho = np.hypot(d[..., 0], d[..., 1])
    dy = np.abs(pts[..., 1]) - frame.q[1]
    psi = np.arctan2(dy, d[..., 0])
    phi = frame.reference_angle - psi
    return rho, phi


def gap_angle_gradient(frame: GapFrame, X, check: bool = True):
    """Gradient of the evenly extended gap angle, and an on-axis flag.

    On the open gap segment (y = 0 between the vertices) the even extension
    has a one-sided y-derivative; the upper-sided value is returned and the
    flag marks those points.  |grad| = 1/rho everywhere.
    """
    pts = _as_points(X)
    if check and np.any(~in_exterior_of_cones(frame.angles, pts)):
        raise DomainError("point(s) inside a cone")
    y = pts[..., 1]
    xs = np.stack([pts[..., 0], np.abs(y)], axis=-1)
    d = xs - frame.q
    rho2 = d[..., 0] ** 2 + d[..., 1] ** 2
    gx = d[..., 1] / rho2
    gy = -d[..., 0] / rho2
    sign = np.where(y < 0.0, -1.0, 1.0)
    grad = np.stack([gx, sign * gy], axis=-1)
    flag = y == 0.0
    return grad, flag


# ---------------------------------------------------------------------------
# Bow-tie inclusions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Inclusion:
    """One closed inclusion: two straight edges plus a tangent circular cap."""

    index: int
    vertex: np.ndarray
    opening: float
    edge_len: float
    sign: float  # +1 opens right, -1 opens left
    cap_center: np.ndarray = field(init=False)
    cap_radius: float = field(init=False)
    cap_half_sweep: float = field(init=False)

    def __post_init__(self):
        a2 = self.opening / 2.0
        c = self.edge_len / math.cos(a2)
        object.__setattr__(self, "cap_center", self.vertex + np.array([self.sign * c, 0.0]))
        object.__setattr__(self, "cap_radius", self.edge_len * math.tan(a2))
        object.__setattr__(self, "cap_half_sweep", math.pi / 2.0 + a2)

    @property
    def perimeter(self) -> float:
        return 2.0 * self.edge_len + self.cap_radius * 2.0 * self.cap_half_sweep

    def boundary_point(self, s) -> np.ndarray:
        """Arc-length parametrization, s in [0, perimeter).

        Starts at the vertex, runs along the upper edge, around the cap,
        and back along the lower edge.
        """
        s = np.asarray(s, dtype=float)
        a2 = self.opening / 2.0
        e_up = np.array([self.sign * math.cos(a2), math.sin(a2)])
        e_dn = np.array([self.sign * math.cos(a2), -math.sin(a2)])
        cap_len = self.cap_radius * 2.0 * self.cap_half_sweep
        out = np.empty(s.shape + (2,))

        on_edge1 = s <= self.edge_len
        on_cap = (s > self.edge_len) & (s <= self.edge_len + cap_len)
        on_edge2 = s > self.edge_len + cap_len

        out[on_edge1] = self.vertex + s[on_edge1, None] * e_up
        # cap angle runs from +half_sweep down through 0 to -half_sweep,
        # measured from the cap center, mirrored for the left inclusion
        th = self.cap_half_sweep - (s[on_cap] - self.edge_len) / self.cap_radius
        out[on_cap, 0] = self.cap_center[0] + self.sign * self.cap_radius * np.cos(th)
        out[on_cap, 1] = self.cap_center[1] + self.cap_radius * np.sin(th)
        t2 = self.perimeter - s[on_edge2]
        out[on_edge2] = self.vertex + t2[:, None] * e_dn
        return out

    def contains(self, X) -> np.ndarray:
        """Strict membership in the open inclusion (triangle + cap disk)."""
        pts = _as_points(X)
        d = pts - self.cap_center
        in_disk = d[..., 0] ** 2 + d[..., 1] ** 2 < self.cap_radius**2
        # triangle vertex / upper tangency / lower tangency
        a2 = self.opening / 2.0
        tp = self.vertex + self.edge_len * np.array([self.sign * math.cos(a2), math.sin(a2)])
        tm = np.array([tp[0], -tp[1]])
        in_tri = _in_triangle(pts, self.vertex, tp, tm)
        return in_disk | in_tri


def _in_triangle(pts: np.ndarray, a, b, c) -> np.ndarray:
    def cross(o, p, q):
        return (p[0] - o[0]) * (q[..., 1] - o[1]) - (p[1] - o[1]) * (q[..., 0] - o[0])

    d1 = cross(a, b, pts)
    d2 = cross(b, c, pts)
    d3 = cross(c, a, pts)
    neg = (d1 < 0) & (d2 < 0) & (d3 < 0)
    pos = (d1 > 0) & (d2 > 0) & (d3 > 0)
    return neg | pos


@dataclass(frozen=True)
class BowTieGeometry:
    """The full two-inclusion configuration at gap width eps."""

    angles: ApertureAngles
    eps: float
    edge_len: float
    delta: float
    inclusions: tuple[Inclusion, Inclusion]

    @property
    def vertices(self) -> np.ndarray:
        return np.array([[-self.eps / 2.0, 0.0], [self.eps / 2.0, 0.0]])

    def vertex(self, j: int) -> np.ndarray:
        return self.vertices[j - 1]

    def inclusion(self, j: int) -> Inclusion:
        return self.inclusions[j - 1]

    def contains(self, X) -> np.ndarray:
        """Strict membership in either open inclusion."""
        return self.inclusions[0].contains(X) | self.inclusions[1].contains(X)

    def boundary_sample(self, n_per_inclusion: int = 400) -> np.ndarray:
        """Polyline dump rows (inclusion_id, s, x, y) for plotting."""
        rows = []
        for j, inc in enumerate(self.inclusions, start=1):
            s = np.linspace(0.0, inc.perimeter, n_per_inclusion, endpoint=False)
            pts = inc.boundary_point(s)
            rows.append(
                np.column_stack([np.full(n_per_inclusion, float(j)), s, pts[:, 0], pts[:, 1]])
            )
        return np.vstack(rows)


def build_bowtie(
    angles: ApertureAngles,
    eps: float,
    edge_len: float = 1.0,
    delta: float = 0.25,
) -> BowTieGeometry:
    """Construct the bow-tie geometry, validating parameter consistency.

    Within the disk of radius `delta` about the origin each inclusion must
    coincide with its translated cone, which requires the straight edges to
    reach past the disk.
    """
    if eps <= 0.0:
        raise ConfigError(f"eps={eps} must be positive")
    if not (eps < delta < edge_len):
        raise ConfigError(f"need eps < delta < edge_len, got eps={eps}, delta={delta}, edge_len={edge_len}")
    for j in (1, 2):
        a2 = angles.alpha(j) / 2.0
        # the cap chord sits at distance edge_len*cos(a2) from the vertex
        if edge_len * math.cos(a2) <= delta + eps / 2.0:
            raise ConfigError(
                f"cap of inclusion {j} intrudes into the coincidence disk: "
                f"edge_len*cos(alpha{j}/2)={edge_len * math.cos(a2):.4g} <= delta+eps/2"
            )
    inc1 = Inclusion(
        index=1,
        vertex=np.array([-eps / 2.0, 0.0]),
        opening=angles.alpha1,
        edge_len=edge_len,
        sign=-1.0,
    )
    inc2 = Inclusion(
        index=2,
        vertex=np.array([eps / 2.0, 0.0]),
        opening=angles.alpha2,
        edge_len=edge_len,
        sign=+1.0,
    )
    return BowTieGeometry(
        angles=angles, eps=eps, edge_len=edge_len, delta=delta, inclusions=(inc1, inc2)
    )


def translated_cone_contains(geom: BowTieGeometry, j: int, X) -> np.ndarray:
    """Membership in the translated open cone (the local model of Omega_j)."""
    frame = cone_frame(geom.angles, j)
    shift = geom.vertex(j) - frame.vertex
    pts = _as_points(X) - shift
    return cone_contains(frame, pts)
