"""Model geometry: exact formulas, flow laws, isometry identities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from escapelab import geometry as G
from escapelab.errors import DomainError, InvalidIsometryError

HYP = G.ModelGeometry.hyperbolic_ball()
EUC = G.ModelGeometry.euclidean_plane()

LOG3 = 1.0986122886681098


def random_phase(rng, n, rmax=0.6):
    r = rmax * np.sqrt(rng.random(n))
    th = rng.uniform(0, 2 * np.pi, n)
    q = np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
    nu = HYP.unit_covector(q, rng.uniform(0, 2 * np.pi, n))
    return q, nu


class TestDomainTypes:
    def test_boundary_point_must_be_unit(self):
        G.BoundaryPoint([1.0, 0.0])
        with pytest.raises(DomainError):
            G.BoundaryPoint([1.0, 0.1])

    def test_unit_phase_point_norm_checked(self):
        q = np.array([0.3, 0.1])
        nu = HYP.unit_covector(q, 0.7)
        G.UnitPhasePoint(q, nu, HYP)
        with pytest.raises(DomainError):
            G.UnitPhasePoint(q, 1.5 * nu, HYP)

    def test_ball_point_wraps_array(self):
        bp = G.BallPoint([0.1, 0.2])
        assert bp.q.dtype == float


class TestBusemann:
    def test_center_value(self):
        assert G.busemann([1.0, 0.0], [0.0, 0.0]) == 0.0

    def test_plugin_value(self):
        assert abs(G.busemann([1.0, 0.0], [0.5, 0.0]) - LOG3) < 1e-14

    def test_domain_error_on_boundary(self):
        with pytest.raises(DomainError):
            G.busemann([1.0, 0.0], [1.0, 0.0])

    def test_gradient_unit_cometric_norm(self):
        rng = np.random.default_rng(3)
        q, _ = random_phase(rng, 1000, rmax=0.85)
        for ang in (0.0, 1.0, 2.5):
            xi = np.array([np.cos(ang), np.sin(ang)])
            grad = HYP.phase_gradient(xi, q)
            assert np.max(np.abs(HYP.cov_norm(q, grad) - 1.0)) < 1e-10

    def test_gradient_matches_finite_differences(self):
        xi = np.array([0.0, 1.0])
        q = np.array([0.3, 0.4])
        grad = HYP.phase_gradient(xi, q)
        step = 1e-5
        for axis in range(2):
            e = np.zeros(2)
            e[axis] = step
            fd = (G.busemann(xi, q + e) - G.busemann(xi, q - e)) / (2 * step)
            assert abs(fd - grad[axis]) < 1e-6


class TestEuclidPhase:
    def test_values(self):
        assert G.euclid_phase([1.0, 0.0], [0.0, 0.0]) == 0.0
        assert G.euclid_phase([0.0, 1.0], [3.0, 4.0]) == 4.0

    def test_gradient_is_xi(self):
        xi = np.array([0.6, 0.8])
        m = np.array([[1.0, 2.0], [-0.3, 0.7]])
        assert np.array_equal(EUC.phase_gradient(xi, m), np.broadcast_to(xi, (2, 2)))


class TestDistance:
    def test_zero_and_plugin(self):
        assert G.hyp_distance([0.1, 0.2], [0.1, 0.2]) == 0.0
        assert abs(G.hyp_distance([0, 0], [0.5, 0]) - LOG3) < 1e-12

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        a, _ = random_phase(rng, 50)
        b, _ = random_phase(rng, 50)
        assert np.max(np.abs(G.hyp_distance(a, b) - G.hyp_distance(b, a))) < 1e-12

    def test_boundary_domain_error(self):
        with pytest.raises(DomainError):
            G.hyp_distance([1.0, 0.0], [0.0, 0.0])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-0.9, 0.9), min_size=6, max_size=6))
    def test_triangle_inequality(self, coords):
        pts = np.array(coords).reshape(3, 2) * 0.7
        d01 = G.hyp_distance(pts[0], pts[1])
        d12 = G.hyp_distance(pts[1], pts[2])
        d02 = G.hyp_distance(pts[0], pts[2])
        assert d02 <= d01 + d12 + 1e-10


class TestBoundaryDefiningFunction:
    def test_values(self):
        assert G.x0([0.0, 0.0]) == 2.0
        assert G.x0([1.0, 0.0]) == 0.0
        assert abs(G.x0([1 / 3, 0.0]) - 1.0) < 1e-14

    def test_euclid_bdf(self):
        assert abs(EUC.bdf(np.array([4.0, 3.0])) - 0.2) < 1e-15


class TestIsometry:
    def test_identity(self):
        iso = G.Isometry.identity()
        q = np.array([0.3, -0.2])
        assert np.allclose(iso.apply(q), q)
        p = np.array([0.0, 1.0])
        assert abs(iso.boundary_derivative_norm(p) - 1.0) < 1e-14

    def test_invalid_matrix(self):
        with pytest.raises(InvalidIsometryError):
            G.Isometry(np.array([[1.0, 0.0], [0.0, 2.0]]))
        with pytest.raises(InvalidIsometryError):
            G.Isometry.from_matrix(np.zeros((2, 2)))

    def test_preserves_distance(self):
        rng = np.random.default_rng(5)
        iso = G.Isometry.axis_translation(1.3).compose(G.Isometry.rotation(0.7))
        a, _ = random_phase(rng, 200)
        b, _ = random_phase(rng, 200)
        gap = G.hyp_distance(iso.apply(a), iso.apply(b)) - G.hyp_distance(a, b)
        assert np.max(np.abs(gap)) < 1e-10

    def test_cocycle_identity(self):
        # e^{n phi_xi(g^-1 m)} = e^{n phi_{g xi}(m)} |dg(xi)|^n, in log form
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(100):
            iso = G.Isometry.axis_translation(rng.uniform(0.5, 2.5)).compose(
                G.Isometry.rotation(rng.uniform(0, 2 * np.pi))
            )
            ang = rng.uniform(0, 2 * np.pi, 10)
            xi = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
            m, _ = random_phase(rng, 10, rmax=0.8)
            for x_i, m_i in zip(xi, m):
                lhs = G.busemann(x_i, iso.inverse().apply(m_i))
                rhs = G.busemann(iso.boundary_action(x_i), m_i) + np.log(
                    iso.boundary_derivative_norm(x_i)
                )
                worst = max(worst, abs(lhs - rhs))
        assert worst < 1e-10

    def test_boundary_derivative_vs_finite_differences(self):
        iso = G.Isometry.axis_translation(1.7).compose(G.Isometry.rotation(0.9))
        for th in (0.3, 1.4, 2.9, 4.4):
            p = np.array([np.cos(th), np.sin(th)])
            hstep = 1e-6
            p1 = np.array([np.cos(th + hstep), np.sin(th + hstep)])
            p0 = np.array([np.cos(th - hstep), np.sin(th - hstep)])
            fd = np.linalg.norm(iso.boundary_action(p1) - iso.boundary_action(p0)) / (
                2 * hstep
            )
            assert abs(fd - iso.boundary_derivative_norm(p)) < 1e-6

    def test_frame_action_transports_covector(self):
        rng = np.random.default_rng(2)
        iso = G.Isometry.axis_translation(0.9)
        q, nu = random_phase(rng, 20)
        m2, nu2 = iso.apply_phase(q, nu)
        assert np.allclose(m2, iso.apply(q), atol=1e-12)
        assert np.max(np.abs(HYP.cov_norm(m2, nu2) - 1.0)) < 1e-10


class TestGeodesicFlow:
    def test_time_zero_identity(self):
        rng = np.random.default_rng(7)
        q, nu = random_phase(rng, 30)
        mt, nut = G.geodesic(HYP, q, nu, np.asarray(0.0))
        assert np.max(np.abs(mt - q)) < 1e-12
        assert np.max(np.abs(nut - nu)) < 1e-12

    def test_radial_closed_form(self):
        m = np.zeros(2)
        nu = np.array([2.0, 0.0])  # unit covector at the origin along e1
        for t in (0.4, 1.3, 3.0):
            mt, _ = G.geodesic(HYP, m, nu, np.asarray(t))
            assert abs(mt[0] - np.tanh(t / 2)) < 1e-12 and abs(mt[1]) < 1e-14

    def test_composition_law_frames(self):
        # canonical flow representation: exact to rounding for |t|,|s| <= 10
        rng = np.random.default_rng(1)
        q, nu = random_phase(rng, 40)
        g = G.phase_to_frame(q, nu)
        for t, s in [(3.0, 7.0), (-10.0, 4.0), (10.0, 10.0)]:
            lhs = G.flow_frame(g, np.asarray(t + s))
            rhs = G.flow_frame(G.flow_frame(g, np.asarray(s)), np.asarray(t))
            scale = np.maximum(np.abs(lhs), 1.0)
            assert np.max(np.abs(lhs - rhs) / scale) < 1e-12

    def test_composition_law_base_points(self):
        rng = np.random.default_rng(1)
        q, nu = random_phase(rng, 40)
        for t, s in [(2.0, 3.0), (-4.0, 6.0), (5.0, 5.0)]:
            m1, _ = G.geodesic(HYP, q, nu, np.asarray(t + s))
            ma, nua = G.geodesic(HYP, q, nu, np.asarray(s))
            m2, _ = G.geodesic(HYP, ma, nua, np.asarray(t))
            assert np.max(np.abs(m1 - m2)) < 1e-10

    def test_preserves_cometric_norm(self):
        rng = np.random.default_rng(8)
        q, nu = random_phase(rng, 100)
        mt, nut = G.geodesic(HYP, q, nu, np.asarray(4.0))
        assert np.max(np.abs(HYP.cov_norm(mt, nut) - 1.0)) < 1e-10

    def test_phase_derivative_along_flow_is_one(self):
        # d/dt phi_xi(m(t)) = 1 along the xi-outgoing Lagrangian
        rng = np.random.default_rng(4)
        xi = np.array([np.cos(0.8), np.sin(0.8)])
        q, _ = random_phase(rng, 50)
        grad = HYP.phase_gradient(xi, q)
        dt = 1e-5
        mt, _ = G.geodesic(HYP, q, grad, np.asarray(dt))
        deriv = (G.busemann(xi, mt) - G.busemann(xi, q)) / dt
        assert np.max(np.abs(deriv - 1.0)) < 1e-8

    def test_euclid_flow(self):
        m = np.array([3.0, 4.0])
        nu = np.array([0.0, 1.0])
        mt, nut = G.geodesic(EUC, m, nu, np.asarray(2.5))
        assert np.allclose(mt, [3.0, 6.5]) and np.allclose(nut, nu)


class TestForwardEndpoint:
    def test_center_along_e1(self):
        assert np.allclose(
            G.xi_plus_infinity(HYP, np.zeros(2), np.array([2.0, 0.0])), [1.0, 0.0]
        )

    def test_flow_invariance(self):
        rng = np.random.default_rng(9)
        q, nu = random_phase(rng, 30)
        base = G.xi_plus_infinity(HYP, q, nu)
        for t in (-5.0, -1.0, 2.0, 5.0):
            mt, nut = G.geodesic(HYP, q, nu, np.asarray(t))
            assert np.max(np.abs(G.xi_plus_infinity(HYP, mt, nut) - base)) < 1e-10

    def test_euclid_endpoint_is_nu(self):
        m = np.array([5.0, -2.0])
        nu = np.array([0.6, 0.8])
        assert np.allclose(G.xi_plus_infinity(EUC, m, nu), nu)


class TestTau:
    def test_euclid_identity(self):
        xi = np.array([0.0, 1.0])
        m = np.array([[2.5, 0.0], [3.0, 1.0]])
        mm, nu = EUC.tau(m, xi)
        assert np.array_equal(nu, np.broadcast_to(xi, (2, 2)))

    def test_left_inverse_of_endpoint(self):
        rng = np.random.default_rng(10)
        xi = np.array([np.cos(2.2), np.sin(2.2)])
        q, _ = random_phase(rng, 50)
        _, nu = HYP.tau(q, xi)
        ends = G.xi_plus_infinity(HYP, q, nu)
        assert np.max(np.linalg.norm(ends - xi, axis=-1)) < 1e-8

    def test_unit_norm(self):
        rng = np.random.default_rng(12)
        xi = np.array([1.0, 0.0])
        q, _ = random_phase(rng, 50)
        _, nu = HYP.tau(q, xi)
        assert np.max(np.abs(HYP.cov_norm(q, nu) - 1.0)) < 1e-10


class TestG2Convexity:
    def test_no_interior_minimum_of_x0(self):
        # along trajectories with x0 <= epsilon0 there is no interior local
        # minimum of x0 (spec G2 check)
        rng = np.random.default_rng(21)
        q, nu = random_phase(rng, 200, rmax=0.8)
        ts = np.linspace(-6.0, 6.0, 241)
        vals = []
        for t in ts:
            mt, _ = G.geodesic(HYP, q, nu, np.asarray(t))
            vals.append(G.x0(mt))
        vals = np.stack(vals)  # (T, N)
        interior = vals[1:-1]
        is_min = (interior < vals[:-2] - 1e-12) & (interior < vals[2:] - 1e-12)
        assert not np.any(is_min & (interior <= HYP.epsilon0))


class TestLiouvilleJacobian:
    def test_phase_space_factorization(self):
        # Phi^* mu_L = e^{n phi_xi(m)} Vol x dxi on a test function, 3 sigma
        rng = np.random.default_rng(33)
        n = 100_000
        box = 0.55
        q = rng.uniform(-box, box, (n, 2))
        keep = np.sum(q * q, axis=-1) < 0.9**2
        q = q[keep]
        ang = rng.uniform(0, 2 * np.pi, len(q))
        nu = HYP.unit_covector(q, ang)

        def F(m, xi_ang):
            base = np.maximum(1 - np.sum(m * m, axis=-1) / box**2, 0.0)
            return base * (1 + np.cos(xi_ang - 0.7))

        ends = G.xi_plus_infinity(HYP, q, nu)
        vals = F(q, np.arctan2(ends[:, 1], ends[:, 0])) * HYP.vol_density(q)
        mc = np.mean(vals) * (2 * box) ** 2 * 2 * np.pi
        sigma = np.std(vals) / np.sqrt(len(q)) * (2 * box) ** 2 * 2 * np.pi
        # independent quadrature of the factorized density
        from escapelab.quadrature import composite_gauss

        gx, wx = composite_gauss(-box, box, 80)
        gy, wy = composite_gauss(-box, box, 80)
        ga, wa = composite_gauss(0, 2 * np.pi, 80)
        MX, MY = np.meshgrid(gx, gy, indexing="ij")
        m = np.stack([MX, MY], axis=-1)
        quad = 0.0
        for aa, ww in zip(ga, wa):
            xi = np.array([np.cos(aa), np.sin(aa)])
            dens = np.exp(G.busemann(xi, m)) * HYP.vol_density(m)
            quad += ww * float(np.sum(np.outer(wx, wy) * F(m, aa) * dens))
        assert abs(mc - quad) < 3.0 * sigma
