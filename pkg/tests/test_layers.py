"""Oracle checks for the closed-form panel integrals and the dense machinery."""

import numpy as np
import pytest
from scipy.integrate import quad

from bowtielab import layers


def _quad_potential(a, b, target, k):
    """Potential of the basis tau^k on segment [a, b] by adaptive quadrature."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    L = np.linalg.norm(b - a)

    def integrand(tau):
        y = 0.5 * (a + b) + 0.5 * tau * (b - a)
        r = np.linalg.norm(np.asarray(target) - y)
        return tau**k * (-np.log(r) / (2.0 * np.pi)) * (L / 2.0)

    val, _ = quad(integrand, -1.0, 1.0, limit=200, epsabs=1e-13, epsrel=1e-13)
    return val


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_potential_coeffs_match_quadrature(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=2)
    b = a + rng.normal(size=2)
    panels = layers.PanelSet(a[None, :], b[None, :])
    # targets: far, near (1e-3 of panel length), and on the segment line
    L = panels.length[0]
    mid = panels.mid[0]
    nrm = panels.normal[0]
    tan = panels.tangent[0]
    targets = [
        mid + 2.3 * L * rng.normal(size=2),
        mid + 1e-3 * L * nrm + 0.3 * L * tan,
        mid + 0.9 * L * tan,  # collinear, just past the end
    ]
    for t in targets:
        block = layers.potential_coeffs(panels, np.asarray(t)[None, :])[0, 0]
        for k in range(3):
            expected = _quad_potential(a, b, t, k)
            assert block[k] == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_potential_on_panel_matches_quadrature():
    a = np.array([0.0, 0.0])
    b = np.array([2.0, 1.0])
    panels = layers.PanelSet(a[None, :], b[None, :])
    tau0 = layers.GAUSS3[2]
    target = panels.nodes()[2]  # the panel's own third Gauss node
    L = panels.length[0]
    block = layers.potential_coeffs(panels, target[None, :])[0, 0]

    def integrand(tau, k):
        y = 0.5 * (a + b) + 0.5 * tau * (b - a)
        r = np.linalg.norm(target - y)
        return tau**k * (-np.log(r) / (2.0 * np.pi)) * (L / 2.0)

    for k in range(3):
        left, _ = quad(integrand, -1.0, tau0, args=(k,), limit=200)
        right, _ = quad(integrand, tau0, 1.0, args=(k,), limit=200)
        assert block[k] == pytest.approx(left + right, rel=1e-7, abs=1e-12)


@pytest.mark.parametrize("seed", [3, 4])
def test_gradient_coeffs_match_quadrature(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=2)
    b = a + rng.normal(size=2)
    panels = layers.PanelSet(a[None, :], b[None, :])
    L = panels.length[0]
    target = panels.mid[0] + 1.7 * L * rng.normal(size=2)
    grad = layers.gradient_coeffs(panels, target[None, :])[0, 0]

    def integrand(tau, k, d):
        y = 0.5 * (a + b) + 0.5 * tau * (b - a)
        diff = target - y
        return tau**k * (-diff[d] / (2 * np.pi * (diff @ diff))) * (L / 2.0)

    for k in range(3):
        for d in range(2):
            expected, _ = quad(integrand, -1, 1, args=(k, d), limit=200, epsabs=1e-14)
            assert grad[k, d] == pytest.approx(expected, rel=1e-10, abs=1e-13)


def test_charge_and_moment_rows():
    rng = np.random.default_rng(5)
    pts = np.array([[0.0, 0.0], [1.0, 0.5], [1.5, 2.0]])
    panels = layers.panels_from_polyline(pts)
    coef = rng.normal(size=(panels.n, layers.N_BASIS))
    # brute force with high-order Gauss
    x, w = np.polynomial.legendre.leggauss(20)
    total = 0.0
    moment = 0.0
    hx, hy = 0.7, -0.3
    for i in range(panels.n):
        y = panels.mid[i] + 0.5 * x[:, None] * panels.length[i] * panels.tangent[i]
        mu = coef[i, 0] + coef[i, 1] * x + coef[i, 2] * x**2
        ds = w * panels.length[i] / 2.0
        total += np.sum(mu * ds)
        moment += np.sum(mu * (hx * y[:, 0] + hy * y[:, 1]) * ds)
    assert layers.charge_row(panels) @ coef.ravel() == pytest.approx(total, rel=1e-12)
    assert layers.linear_moment_row(panels, hx, hy) @ coef.ravel() == pytest.approx(
        moment, rel=1e-12
    )


def test_graded_breaks_cover_and_grow():
    br = layers.graded_breaks(10.0, 1e-3, 0.5, 0.7)
    sizes = np.diff(br)
    assert br[0] == 0.0 and br[-1] == pytest.approx(10.0)
    assert sizes[0] == pytest.approx(1e-3)
    assert np.all(sizes[:-1] <= 0.5 + 1e-12)
    # geometric growth until the cap
    grow = sizes[1:-1] / sizes[:-2]
    assert np.all(grow <= 1.0 / 0.7 + 1e-9)


def test_manufactured_interior_dirichlet():
    """Single layer + constant reproduces a known harmonic function in a square."""
    # boundary: unit square, source of the harmonic field outside it
    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    pts = []
    for i in range(4):
        c0, c1 = corners[i], corners[(i + 1) % 4]
        br = layers.graded_breaks_bidirectional(1.0, 1e-4, 0.05, 0.7)
        pts.append(c0 + br[:-1, None] * (c1 - c0))
    panels = layers.panels_from_polyline(np.vstack(pts), closed=True)
    x0 = np.array([2.5, 1.7])

    def g(p):
        p = np.atleast_2d(p)
        return np.log(np.hypot(p[:, 0] - x0[0], p[:, 1] - x0[1]))

    A = layers.collocation_matrix(panels)
    n_unknown = A.shape[1]
    nodes = panels.nodes()
    # bordered system: [A 1; charge 0] [c; const] = [g; 0]
    M = np.zeros((n_unknown + 1, n_unknown + 1))
    M[: A.shape[0], :n_unknown] = A
    M[: A.shape[0], -1] = 1.0
    M[-1, :n_unknown] = layers.charge_row(panels)
    rhs = np.concatenate([g(nodes), [0.0]])
    sol = np.linalg.solve(M, rhs)
    coef, const = sol[:-1], sol[-1]

    rng = np.random.default_rng(7)
    inner = rng.uniform(0.15, 0.85, size=(40, 2))
    got = layers.potential(panels, coef, inner) + const
    assert np.max(np.abs(got - g(inner))) < 1e-8

    grad = layers.gradient(panels, coef, inner)
    d = inner - x0
    exact = d / (d[:, 0] ** 2 + d[:, 1] ** 2)[:, None]
    assert np.max(np.abs(grad - exact)) < 1e-7
