"""Projection kernels and families: moments, symbols, projections, properties."""

import numpy as np
import pytest
from scipy.integrate import quad

from geolp import heat, lp
from geolp import surface as sf
from geolp.sphere import SpectralSphere

from conftest import band_limited_oneform, band_limited_scalar


@pytest.fixture(scope="module")
def kernel():
    return lp.make_kernel(8, 4)


@pytest.fixture(scope="module")
def family(flat16_basis, kernel):
    return lp.family_for(flat16_basis.lam, kernel)


class TestKernel:
    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            lp.make_kernel(8, 9)   # boundary terms would break the moments
        with pytest.raises(ValueError):
            lp.make_kernel(8, 1)

    def test_moments_vanish_by_quadrature(self, kernel):
        # independent oracle: adaptive quadrature of the closed-form profile
        for j in range(kernel.n_der):
            val, _ = quad(lambda t, j=j: t**j * kernel.time_profile(t), 0, np.inf, limit=200)
            assert abs(val) <= 1e-9, f"moment {j} = {val}"
        val, _ = quad(lambda t: t**4 * kernel.time_profile(t), 0, np.inf, limit=200)
        assert abs(val) > 1.0  # first non-vanishing moment

    def test_symbol_normalization_and_peak(self, kernel):
        assert kernel.peak_mu == pytest.approx(0.8)  # n/(N+1-n) = 4/5
        assert kernel.symbol(kernel.peak_mu) == pytest.approx(1.0)
        mu = np.linspace(1e-4, 50, 4000)
        assert np.max(kernel.symbol(mu)) <= 1.0 + 1e-12

    def test_symbol_limits(self, kernel):
        assert kernel.symbol(0.0) == 0.0
        # decay mu^(n-N-1) = mu^-5 at large mu
        big = kernel.symbol(np.array([1e4, 2e4]))
        assert big[1] / big[0] == pytest.approx(2.0**-5, rel=1e-3)

    def test_symbol_against_quadrature(self, kernel):
        num, _ = quad(lambda t: kernel.time_profile(t) * np.exp(-t), 0, np.inf, limit=200)
        assert abs(num - kernel.symbol(1.0)) <= 1e-8


class TestFamily:
    def test_partition_of_squares(self, family, flat16_basis):
        lam = flat16_basis.lam[flat16_basis.lam > 1e-10]
        total = np.zeros_like(lam)
        for k in family.ks:
            total += family.multiplier(k, lam) ** 2
        assert np.max(np.abs(total - 1.0)) <= 1e-12

    def test_raw_symbols_bounded(self, family, flat16_basis):
        raw = family.as_mode("raw")
        for k in (-2, 0, 3):
            assert np.max(raw.multiplier(k, flat16_basis.lam)) <= 1.0 + 1e-12

    def test_out_of_range_k(self, family, flat16_basis, flat16):
        f = band_limited_scalar(flat16)
        with pytest.raises(ValueError):
            lp.project(f, family.k_max + 1, family, flat16_basis)


class TestProjections:
    def test_eigenfunction_raw_multiplier(self, family, flat16_basis, kernel):
        j = 40
        ef = sf.TensorField.from_flat(flat16_basis.vectors[:, j], 16, 0)
        lam_j = flat16_basis.lam[j]
        raw = family.as_mode("raw")
        pf = lp.project(ef, 2, raw, flat16_basis)
        assert np.allclose(pf.components, kernel.symbol(lam_j / 16.0) * ef.components, atol=1e-12)

    def test_constants_annihilated(self, family, flat16_basis, flat16):
        one = sf.TensorField(np.ones((16, 16)))
        for k in (0, 2):
            assert np.max(np.abs(lp.project(one, k, family, flat16_basis).components)) < 1e-12
        low = lp.low_part(one, family, flat16_basis)
        assert np.allclose(low.components, 1.0, atol=1e-12)

    def test_selfadjointness(self, family, flat16_basis, flat16):
        f = band_limited_scalar(flat16, seed=1)
        g = band_limited_scalar(flat16, seed=2)
        lhs = sf.inner_product(lp.project(f, 1, family, flat16_basis), g, flat16)
        rhs = sf.inner_product(f, lp.project(g, 1, family, flat16_basis), flat16)
        scale = np.sqrt(sf.inner_product(f, f, flat16) * sf.inner_product(g, g, flat16))
        assert abs(lhs - rhs) <= 1e-10 * scale

    def test_reconstruction(self, family, flat16_basis, flat16):
        f = band_limited_scalar(flat16, seed=3) + sf.TensorField(np.full((16, 16), 0.7))
        acc = lp.low_part(f, family, flat16_basis)
        for k in range(0, family.k_max + 1):
            acc = acc + lp.project(lp.project(f, k, family, flat16_basis), k, family, flat16_basis)
        assert np.max(np.abs(acc.components - f.components)) <= 1e-10

    def test_empty_band(self, family, flat16_basis, flat16):
        f = band_limited_scalar(flat16, seed=4)
        out = lp.project_band(f, [], family, flat16_basis)
        assert np.max(np.abs(out.components)) == 0.0

    def test_single_mode_band_decay(self, family, flat16_basis, kernel):
        # a pure mode at lam = 4^{k0} leaks into far bands only through the
        # closed-form symbol at shifted arguments
        lam = flat16_basis.lam
        j = int(np.argmin(np.abs(lam - 16.0)))  # k0 = 2
        ef = sf.TensorField.from_flat(flat16_basis.vectors[:, j], 16, 0)
        raw = family.as_mode("raw")
        norm = np.sqrt(sf.inner_product(ef, ef, flat16_basis.metric))
        for k in (-4, 8):
            pf = lp.project(ef, k, raw, flat16_basis)
            leak = np.sqrt(sf.inner_product(pf, pf, flat16_basis.metric)) / norm
            assert leak <= kernel.symbol(lam[j] * 4.0**-k) + 1e-12
            assert leak <= kernel.symbol(2.0**12) + 1e-9 or k == -4
        assert raw.sigma(8, 16.0) < 1e-9


class TestQuadratureOracle:
    def test_agreement_with_spectral(self, family, flat16_basis):
        raw = family.as_mode("raw")
        lam = flat16_basis.lam
        idx = [int(np.argmin(np.abs(lam - 4.0**j))) for j in range(6)]
        for j in sorted(set(idx)):
            ef = sf.TensorField.from_flat(flat16_basis.vectors[:, j], 16, 0)
            for k in (-2, 0, 3):
                q = lp.project_quadrature(ef, k, raw, flat16_basis, check=True)
                s = lp.project(ef, k, raw, flat16_basis)
                err = np.linalg.norm(q.flat - s.flat) / np.linalg.norm(ef.flat)
                assert err <= 1e-6

    def test_single_mode_value(self, family, flat16_basis, kernel):
        lam = flat16_basis.lam
        j = int(np.argmin(np.abs(lam - 1.0)))
        ef = sf.TensorField.from_flat(flat16_basis.vectors[:, j], 16, 0)
        out = lp.project_quadrature(ef, 0, family.as_mode("raw"), flat16_basis)
        assert np.allclose(out.components, kernel.symbol(1.0) * ef.components, atol=1e-8)

    def test_zero_field(self, family, flat16_basis):
        z = sf.TensorField(np.zeros((16, 16)))
        out = lp.project_quadrature(z, 1, family.as_mode("raw"), flat16_basis)
        assert np.max(np.abs(out.components)) == 0.0

    def test_insufficient_nodes_detected(self, family, flat16_basis, flat16):
        f = band_limited_scalar(flat16, seed=5)
        with pytest.raises(lp.QuadratureError):
            lp.project_quadrature(f, 0, family.as_mode("raw"), flat16_basis,
                                  quad=lp.QuadratureConfig(n_nodes=8), check=True)


@pytest.fixture(scope="module")
def report(conformal16_bases, conformal16):
    fam = lp.family_for(conformal16_bases[0].lam)
    samples = [band_limited_scalar(conformal16, seed=6),
               band_limited_scalar(conformal16, seed=7),
               band_limited_oneform(conformal16, seed=8)]
    return lp.property_report(fam, conformal16_bases, samples), fam


class TestPropertyReport:
    def test_l2_bound_and_bessel_normalized(self, report):
        rows, fam = report
        for row in rows:
            if row["property_id"] == "lp_bound" and row["mode"] == "normalized" and row["p"] == 2.0:
                if row["k"] == "band":  # interval sums only carry a finite constant
                    assert np.isfinite(row["ratio"])
                else:  # single bands and the low piece are exact contractions
                    assert row["ratio"] <= 1.0 + 1e-10
            if row["property_id"] == "bessel" and row["mode"] == "normalized":
                assert row["ratio"] <= 1.0 + 1e-10

    def test_finite_band_within_closed_form(self, report):
        rows, fam = report
        closed = fam.kernel.sup_mu_symbol()
        closed_inv = fam.kernel.sup_symbol_over_mu()
        for row in rows:
            if row["property_id"] == "finite_band_lap":
                assert row["ratio"] <= closed + 1e-9
            if row["property_id"] == "finite_band_lap_inv":
                assert row["ratio"] <= closed_inv + 1e-9

    def test_reproducing_exact(self, report):
        rows, fam = report
        for row in rows:
            if row["property_id"] == "reproducing":
                assert row["ratio"] <= 1e-12

    def test_sobolev_equalities(self, report):
        rows, fam = report
        for row in rows:
            if row["property_id"] == "sobolev_sum":
                assert row["ratio"] <= 1.0 + 1e-10
            if row["property_id"] in ("sobolev_grad_sum", "sobolev_grad_lower"):
                assert np.isfinite(row["ratio"])

    def test_strong_scalar_bernstein_finite(self, report):
        rows, fam = report
        ks = set()
        for row in rows:
            if row["property_id"] == "strong_scalar_bernstein" and row["k"] != "low":
                assert np.isfinite(row["ratio"])
                ks.add(row["k"])
        assert ks  # every probed band produced a finite constant

    def test_curvature_properties_present(self, report):
        rows, fam = report
        pids = {r["property_id"] for r in rows}
        assert {"strong_tensor_bernstein", "dyadic_bochner", "dyadic_linf"} <= pids


class TestAlmostOrthogonality:
    def test_sphere_closed_form_fit(self):
        # two kernel choices with the same derivative order, exact operator
        # norms over the sphere spectrum
        sph = SpectralSphere(16, r=1.0)
        fam_a = lp.family_for(sph.eigenvalues, lp.make_kernel(8, 4), mode="raw")
        fam_b = lp.LPFamily(lp.make_kernel(10, 4), fam_a.k_min, fam_a.k_max, "raw")
        fitted, rows = lp.almost_orthogonality_decay(fam_a, fam_b, sph.eigenvalues)
        assert fitted >= 1.9
        assert all(r["norm"] >= 0 for r in rows)
