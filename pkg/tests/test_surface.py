"""Chart substrate: metrics, curvature, tensor calculus, Bochner identities."""

import numpy as np
import pytest

from geolp import surface as sf
from geolp.reporting import fit_rate
from geolp.sphere import SpectralSphere

from conftest import band_limited_oneform, band_limited_scalar


class TestMetricConstruction:
    def test_flat_metric_is_identity(self):
        grid, m = sf.build_torus_metric(16, "flat")
        assert np.allclose(m.gamma, np.eye(2), atol=0)
        assert np.allclose(m.sqrt_det, 1.0)

    def test_conformal_determinant(self):
        grid, m = sf.build_torus_metric(32, {"recipe": "conformal", "amplitude": 0.1, "modes": 1})
        phi = sf.conformal_phi(grid, 0.1, 1)
        assert np.allclose(m.det, np.exp(4 * phi), rtol=1e-13)
        assert np.allclose(m.gamma[..., 0, 0], np.exp(2 * phi))
        assert np.allclose(m.gamma[..., 0, 1], 0.0)

    def test_perturbed_distortion_normalized_to_epsilon(self):
        grid, m = sf.build_torus_metric(32, {"recipe": "perturbed", "epsilon": 0.05, "seed": 7})
        assert m.metric_distortion() == pytest.approx(0.05, rel=1e-12)

    def test_positive_definiteness_rejected_with_node(self):
        grid = sf.ChartGrid(8)
        gamma = np.broadcast_to(np.eye(2), (8, 8, 2, 2)).copy()
        gamma[3, 5] = [[1.0, 2.0], [2.0, 1.0]]  # det < 0
        with pytest.raises(sf.MetricError, match=r"\(3,5\)"):
            sf.MetricField(grid, gamma)

    def test_grid_invariants(self):
        with pytest.raises(ValueError):
            sf.ChartGrid(7)
        with pytest.raises(ValueError):
            sf.ChartGrid(6)


class TestCurvature:
    def test_flat_torus_curvature_zero(self, flat16):
        K = sf.gauss_curvature(flat16)
        assert np.max(np.abs(K.components)) < 1e-12

    def test_round_sphere_curvature(self):
        sph = SpectralSphere(8, r=2.0)
        assert sph.gauss_curvature() == pytest.approx(0.25)

    def test_conformal_curvature_closed_form(self):
        # K = -exp(-2 phi) Delta0 phi with Delta0 phi = -2 phi for the
        # deterministic profile phi = a sin(w1) sin(w2)
        grid, m = sf.build_torus_metric(32, {"recipe": "conformal", "amplitude": 0.1, "modes": 1})
        phi = sf.conformal_phi(grid, 0.1, 1)
        exact = 2.0 * phi * np.exp(-2 * phi)
        K = sf.gauss_curvature(m).components
        assert np.max(np.abs(K - exact)) < 5e-4  # 4th-order differences of gamma

    def test_gauss_bonnet(self):
        sph = SpectralSphere(12, r=2.0)
        total = sph.integrate(np.full(len(sph.quad_weights), sph.gauss_curvature()))
        assert total == pytest.approx(4 * np.pi, abs=1e-10)
        grid, m = sf.build_torus_metric(24, {"recipe": "conformal", "amplitude": 0.1, "modes": 1})
        assert abs(sf.integrate(sf.gauss_curvature(m), m)) < 1e-6


class TestCovariantCalculus:
    def test_constant_scalar_gradient_vanishes(self, conformal16):
        c = sf.TensorField(np.full((16, 16), 3.2))
        assert np.max(np.abs(sf.covariant_derivative(c, conformal16).components)) < 1e-12

    def test_flat_gradient_is_spectral(self, flat16):
        w1, w2 = flat16.grid.axes
        f = sf.TensorField(np.cos(2 * w1 + w2))
        df = sf.covariant_derivative(f, flat16)
        assert np.allclose(df.components[:, :, 0], -2 * np.sin(2 * w1 + w2), atol=1e-12)
        assert np.allclose(df.components[:, :, 1], -np.sin(2 * w1 + w2), atol=1e-12)

    def test_metric_compatibility_rate(self):
        residuals, hs = [], []
        for n in (12, 16, 24):
            grid, m = sf.build_torus_metric(n, {"recipe": "conformal", "amplitude": 0.1, "modes": 1})
            ng = sf.covariant_derivative(sf.TensorField(m.gamma, 2), m)
            residuals.append(np.max(np.abs(ng.components)))
            hs.append(m.h)
        assert fit_rate(hs, residuals) >= 1.9

    def test_rank_cap(self, flat16):
        F4 = sf.TensorField(np.zeros((16, 16, 2, 2, 2, 2)), 4)
        with pytest.raises(ValueError):
            sf.covariant_derivative(F4, flat16)

    def test_divergence_of_gradient_is_laplacian(self, conformal16):
        f = band_limited_scalar(conformal16, seed=2)
        a = sf.divergence(sf.covariant_derivative(f, conformal16), conformal16)
        b = sf.laplace_beltrami(f, conformal16)
        assert np.max(np.abs(a.components - b.components)) < 1e-12

    def test_divergence_needs_rank(self, conformal16):
        with pytest.raises(ValueError):
            sf.divergence(sf.TensorField(np.zeros((16, 16))), conformal16)

    def test_flat_mode_divergence(self, flat16):
        w1, w2 = flat16.grid.axes
        f = sf.TensorField(np.cos(3 * w1 + 2 * w2))
        div_grad = sf.divergence(sf.covariant_derivative(f, flat16), flat16)
        assert np.allclose(div_grad.components, -13.0 * f.components, atol=1e-10)

    def test_integration_by_parts(self, conformal16):
        F = band_limited_oneform(conformal16, seed=3)
        phi = band_limited_scalar(conformal16, seed=4)
        lhs = sf.integrate(sf.divergence(F, conformal16).components * phi.components, conformal16)
        rhs = -sf.inner_product(F, sf.covariant_derivative(phi, conformal16), conformal16)
        scale = sf.lebesgue_norm(F, 2, conformal16) * sf.lebesgue_norm(phi, 2, conformal16)
        assert abs(lhs - rhs) < 1e-10 * scale

    def test_laplacian_self_adjoint(self, conformal16):
        f = band_limited_scalar(conformal16, seed=5)
        g = band_limited_scalar(conformal16, seed=6)
        lhs = sf.integrate(sf.laplace_beltrami(f, conformal16).components * g.components, conformal16)
        rhs = sf.integrate(f.components * sf.laplace_beltrami(g, conformal16).components, conformal16)
        scale = np.sqrt(sf.inner_product(f, f, conformal16) * sf.inner_product(g, g, conformal16))
        assert abs(lhs - rhs) <= 1e-8 * scale


class TestIntegration:
    def test_flat_area(self, flat16):
        assert sf.integrate(np.ones((16, 16)), flat16) == pytest.approx((2 * np.pi) ** 2)

    def test_constant_lp_norm(self, conformal16):
        c = sf.TensorField(np.full((16, 16), -1.7))
        area = sf.integrate(np.ones((16, 16)), conformal16)
        for p in (1.0, 2.0, 4.0):
            assert sf.lebesgue_norm(c, p, conformal16) == pytest.approx(1.7 * area ** (1 / p))
        assert sf.lebesgue_norm(c, np.inf, conformal16) == pytest.approx(1.7)

    def test_sphere_parseval_additivity(self):
        sph = SpectralSphere(8, r=1.0)
        f = sph.harmonic(2, 1) + sph.harmonic(5, -3)
        assert f.l2_norm() ** 2 == pytest.approx(
            sph.harmonic(2, 1).l2_norm() ** 2 + sph.harmonic(5, -3).l2_norm() ** 2
        )
        # quadrature-based L^2 agrees with the coefficient norm
        assert sph.integrate(f.values() ** 2) == pytest.approx(f.l2_norm() ** 2, rel=1e-10)


class TestBochner:
    def test_flat_scalar_identity(self, flat16):
        f = band_limited_scalar(flat16, seed=7)
        lhs, rhs, res = sf.bochner_residual(f, flat16)
        assert abs(res) <= 1e-10 * lhs

    def test_sphere_harmonic_closed_form(self):
        # both sides expressible through l and r alone
        sph = SpectralSphere(12, r=2.0)
        l, r = 5, 2.0
        lam = l * (l + 1) / r**2
        K = 1.0 / r**2
        f = sph.harmonic(l, 2)
        lap_sq = np.sum((lam * f.coeffs) ** 2) * r**2
        grad_sq = f.grad_l2_norm() ** 2
        assert lap_sq == pytest.approx(lam**2 * r**2)
        assert grad_sq == pytest.approx(lam * r**2)
        assert lap_sq - K * grad_sq == pytest.approx(lam * (lam - K) * r**2)

    def test_gradient_field_identity_rate(self):
        residuals, hs = [], []
        for n in (12, 16, 24):
            grid, m = sf.build_torus_metric(n, {"recipe": "conformal", "amplitude": 0.1, "modes": 1})
            f = band_limited_scalar(m, seed=8, modes=2)
            F = sf.covariant_derivative(f, m)
            lhs, rhs, res = sf.bochner_residual(F, m)
            residuals.append(abs(res) / lhs)
            hs.append(m.h)
        assert fit_rate(hs, residuals) >= 1.9

    def test_scalar_identity_rate(self):
        residuals, hs = [], []
        for n in (12, 16, 24):
            grid, m = sf.build_torus_metric(n, {"recipe": "conformal", "amplitude": 0.1, "modes": 1})
            f = band_limited_scalar(m, seed=9, modes=2)
            lhs, rhs, res = sf.bochner_residual(f, m)
            residuals.append(abs(res) / lhs)
            hs.append(m.h)
        assert fit_rate(hs, residuals) >= 1.9

    def test_rank_cap(self, flat16):
        with pytest.raises(ValueError):
            sf.bochner_residual(sf.TensorField(np.zeros((16, 16, 2, 2)), 2), flat16)


class TestSerialization:
    def test_field_roundtrip(self, tmp_path, conformal16):
        F = band_limited_oneform(conformal16, seed=10)
        path = tmp_path / "field.csv"
        sf.save_field(str(path), F)
        G = sf.load_field(str(path))
        assert G.rank == 1 and G.n == 16
        assert np.array_equal(G.components, F.components)
