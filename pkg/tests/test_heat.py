"""Heat semigroup: eigenbasis quality, evolution identities, smoothing shapes."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geolp import heat
from geolp import surface as sf
from geolp.sphere import SpectralSphere

from conftest import band_limited_oneform, band_limited_scalar


class TestEigenbasis:
    def test_flat_spectrum_closed_form(self, flat16_basis):
        # spectral first derivatives zero the unpaired Nyquist bin, so the
        # discrete symbol uses the modified wavenumbers
        k = np.fft.fftfreq(16, d=1 / 16)
        k[8] = 0.0
        expect = np.sort([a * a + b * b for a in k for b in k])
        assert np.max(np.abs(np.sort(flat16_basis.lam) - expect)) < 1e-10

    def test_sphere_spectrum(self):
        sph = SpectralSphere(16, r=1.0)
        for l in (0, 3, 16):
            sel = sph.eigenvalues[sph.l_index == l]
            assert len(sel) == 2 * l + 1
            assert np.allclose(sel, l * (l + 1))

    def test_conformal_spectrum_nonnegative_constant_first(self, conformal16_bases):
        b = conformal16_bases[0]
        assert b.lam[0] <= 1e-8
        assert np.min(b.lam) >= 0.0
        v0 = b.vectors[:, 0]
        assert np.std(v0) <= 1e-10 * abs(np.mean(v0))

    def test_orthonormality(self, conformal16_bases):
        for rank in (0, 1):
            b = conformal16_bases[rank]
            G = b.dual.T @ b.vectors
            assert np.max(np.abs(G - np.eye(G.shape[0]))) < 1e-10

    def test_eigen_residual_against_module_operator(self, conformal16_bases):
        # Delta v_j = -lam_j v_j holds for the module's symmetrized operator
        b = conformal16_bases[0]
        for j in (1, 50, 200):
            v = sf.TensorField.from_flat(b.vectors[:, j], 16, 0)
            res = heat.apply_laplacian(b, v).flat.reshape(-1) + b.lam[j] * b.vectors[:, j]
            assert np.linalg.norm(res) <= 1e-8 * np.linalg.norm(b.vectors[:, j])

    def test_symmetrized_matches_composed_on_smooth_fields(self, conformal16_bases, conformal16):
        f = band_limited_scalar(conformal16, seed=1)
        a = heat.apply_laplacian(conformal16_bases[0], f)
        bb = sf.laplace_beltrami(f, conformal16)
        assert np.max(np.abs(a.components - bb.components)) <= 1e-10 * np.max(np.abs(bb.components))

    def test_budget(self):
        grid, m = sf.build_torus_metric(96, "flat")
        with pytest.raises(ValueError, match="budget"):
            heat.eigendecompose(m, 0)
        grid, m2 = sf.build_torus_metric(64, "flat")
        with pytest.raises(ValueError, match="budget"):
            heat.eigendecompose(m2, 1)
        with pytest.raises(ValueError):
            heat.eigendecompose(m2, 2)


class TestEvolution:
    def test_identity_at_zero(self, conformal16_bases, conformal16):
        f = band_limited_scalar(conformal16, seed=2)
        u = heat.evolve(f, 0.0, conformal16_bases[0])
        assert np.max(np.abs(u.components - f.components)) < 1e-12

    def test_negative_time_rejected(self, conformal16_bases, conformal16):
        f = band_limited_scalar(conformal16, seed=3)
        with pytest.raises(ValueError):
            heat.evolve(f, -0.1, conformal16_bases[0])

    def test_sphere_eigen_decay(self):
        sph = SpectralSphere(10, r=2.0)
        f = sph.harmonic(4, -2)
        tau = 0.3
        u = f.evolve(tau)
        assert np.allclose(u.coeffs, np.exp(-20.0 / 4.0 * tau) * f.coeffs)

    def test_semigroup_additivity(self, conformal16_bases, conformal16):
        f = band_limited_scalar(conformal16, seed=4)
        b = conformal16_bases[0]
        u1 = heat.evolve(heat.evolve(f, 0.12, b), 0.21, b)
        u2 = heat.evolve(f, 0.33, b)
        scale = np.sqrt(sf.inner_product(f, f, conformal16))
        diff = np.sqrt(sf.inner_product(u1 - u2, u1 - u2, conformal16))
        assert diff <= 1e-10 * scale

    def test_commutation_with_laplacian(self, conformal16_bases, conformal16):
        f = band_limited_scalar(conformal16, seed=5)
        b = conformal16_bases[0]
        a = heat.evolve(heat.apply_laplacian(b, f), 0.2, b)
        c = heat.apply_laplacian(b, heat.evolve(f, 0.2, b))
        scale = np.sqrt(sf.inner_product(f, f, conformal16))
        assert np.sqrt(sf.inner_product(a - c, a - c, conformal16)) <= 1e-10 * scale

    @settings(max_examples=20, deadline=None)
    @given(t1=st.floats(0.0, 5.0), t2=st.floats(0.0, 5.0))
    def test_energy_decay_monotone(self, conformal16_bases, conformal16, t1, t2):
        f = band_limited_scalar(conformal16, seed=6)
        b = conformal16_bases[0]
        lo, hi = sorted((t1, t2))
        m = conformal16
        n_lo = sf.inner_product(heat.evolve(f, lo, b), heat.evolve(f, lo, b), m)
        n_hi = sf.inner_product(heat.evolve(f, hi, b), heat.evolve(f, hi, b), m)
        assert n_hi <= n_lo * (1 + 1e-12) + 1e-15


class TestSmoothing:
    def test_report_shapes_and_contraction(self, conformal16_bases, conformal16):
        samples = [band_limited_scalar(conformal16, seed=7),
                   band_limited_oneform(conformal16, seed=8)]
        rows = heat.smoothing_report(conformal16_bases, samples, np.array([0.0, 0.05, 0.5, 2.0]))
        ratios = heat.max_ratios(rows)
        assert set(r[0] for r in heat.SMOOTHING_ESTIMATES) <= set(ratios)
        assert ratios["lp_contraction"] <= 1.0 + 1e-10
        for est, val in ratios.items():
            assert np.isfinite(val), est
        scalar_only = {r["estimate_id"] for r in rows if r["scalar_restricted"]}
        assert scalar_only == {"scalar_l2_linf", "scalar_l1_l2"}
        tensor_rows = [r for r in rows if r["rank"] == 1]
        assert all(not r["scalar_restricted"] for r in tensor_rows)

    def test_empty_samples_rejected(self, conformal16_bases):
        with pytest.raises(ValueError):
            heat.smoothing_report(conformal16_bases, [], np.array([0.1]))

    def test_sphere_gradient_closed_form(self):
        # sup over lam > 0 of sqrt(lam) e^(-lam tau) is (2 e tau)^(-1/2),
        # attained at lam = 1/(2 tau); the discrete spectrum stays below it
        sph = SpectralSphere(16, r=1.0)
        lam = sph.eigenvalues[sph.eigenvalues > 0]
        for tau in (0.01, 0.1, 1.0, 10.0):
            worst = np.max(np.sqrt(lam) * np.exp(-lam * tau))
            assert worst <= (2 * np.e * tau) ** -0.5 * (1 + 1e-12)
        tau_star = 1.0 / (2.0 * lam[0])
        attained = np.sqrt(lam[0]) * np.exp(-lam[0] * tau_star)
        assert attained == pytest.approx((2 * np.e * tau_star) ** -0.5)
