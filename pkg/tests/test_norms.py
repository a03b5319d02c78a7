"""Mixed, Besov and hypersurface norms, N-norms, envelopes."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geolp import foliation as fl
from geolp import heat, lp, norms
from geolp import surface as sf

from conftest import band_limited_scalar


@pytest.fixture(scope="module")
def product12():
    cfg = fl.product_config({"kind": "torus", "n": 12, "spec": "flat"}, n_s=12)
    return fl.build_foliation(cfg)


def random_foliated(fol, seed=0, s_modes=2, modes=2):
    rng = np.random.default_rng(seed)
    w1, w2 = fol.grid.axes
    s = fol.s_grid
    vals = np.zeros((fol.n_s, fol.n, fol.n))
    for m1 in range(-modes, modes + 1):
        for m2 in range(0, modes + 1):
            if m2 == 0 and m1 <= 0:
                continue
            for q in range(s_modes + 1):
                vals += (rng.normal() / (1 + m1 * m1 + m2 * m2 + q * q)
                         * np.cos(m1 * w1 + m2 * w2 + rng.uniform(0, 6.3))[None]
                         * np.cos(np.pi * q * s)[:, None, None])
    return fl.FoliatedTensor(vals, 0, fol)


class TestMixedNorms:
    def test_constant_on_product(self, product12):
        c = fl.FoliatedTensor(np.full((12, 12, 12), 2.5), 0, product12)
        # unit s-interval: the t-factor is 1
        assert norms.mixed_norm(c, "Lx_inf_Lt_2") == pytest.approx(2.5)
        assert norms.mixed_norm(c, "Lt_inf_Lx_inf") == pytest.approx(2.5)

    def test_ordering_over_random_family(self, product12):
        # 100 random samples: sup-then-integrate is below integrate-then-sup
        for seed in range(100):
            F = random_foliated(product12, seed=seed, s_modes=1, modes=1)
            lt = norms.mixed_norm(F, "Lt_inf_Lx_2")
            lx = norms.mixed_norm(F, "Lx_2_Lt_inf")
            assert lt <= lx * (1 + 1e-12)

    def test_separable_factorization(self, product12):
        a_s = 1.0 + 0.5 * product12.s_grid**2
        w1, w2 = product12.grid.axes
        b_x = np.cos(w1 + 2 * w2)
        F = fl.FoliatedTensor(a_s[:, None, None] * b_x[None], 0, product12)
        got = norms.mixed_norm(F, "Lt_2_Lx_2")
        h_s = product12.h_s
        w = np.ones(12); w[0] = w[-1] = 0.5
        a_part = np.sqrt(np.sum(a_s**2 * w) * h_s)
        b_part = np.sqrt(sf.inner_product(sf.TensorField(b_x), sf.TensorField(b_x), product12.slices[0]))
        assert got == pytest.approx(a_part * b_part, rel=1e-12)

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            norms.NormSpec("x_first", 2, 2)
        with pytest.raises(ValueError):
            norms.NormSpec("x_then_t", 0.5, 2)


class TestBesovSurface:
    def test_zero_field(self, conformal16_bases):
        fam = lp.family_for(conformal16_bases[0].lam)
        z = sf.TensorField(np.zeros((16, 16)))
        assert norms.besov_surface(z, 0.0, fam, conformal16_bases[0]) == 0.0

    def test_constant_low_part_only(self, conformal16_bases, conformal16):
        fam = lp.family_for(conformal16_bases[0].lam)
        c = sf.TensorField(np.full((16, 16), 2.5))
        area = sf.integrate(np.ones((16, 16)), conformal16)
        got = norms.besov_surface(c, 0.0, fam, conformal16_bases[0])
        assert got == pytest.approx(2.5 * np.sqrt(area), rel=1e-10)

    def test_eigenfunction_symbol_sum(self, flat16_basis):
        # single eigenfunction: the dyadic sum is the symbol sum at its
        # eigenvalue, computable in closed form
        fam = lp.family_for(flat16_basis.lam)
        lam = flat16_basis.lam
        j = int(np.argmin(np.abs(lam - 16.0)))
        ef = sf.TensorField.from_flat(flat16_basis.vectors[:, j], 16, 0)
        norm = np.sqrt(sf.inner_product(ef, ef, flat16_basis.metric))
        expect = sum(fam.multiplier(k, lam[j]) for k in range(0, fam.k_max + 1))
        expect += fam.low_multiplier(np.array([lam[j]]))[0]
        got = norms.besov_surface(ef, 0.0, fam, flat16_basis)
        assert got == pytest.approx(float(expect) * norm, rel=1e-10)

    def test_negative_exponent_rejected(self, flat16_basis, flat16):
        fam = lp.family_for(flat16_basis.lam)
        with pytest.raises(ValueError):
            norms.besov_surface(band_limited_scalar(flat16), -0.5, fam, flat16_basis)

    def test_b1_by_b0_and_gradient(self, conformal16_bases, conformal16):
        fam = lp.family_for(conformal16_bases[0].lam)
        worst = 0.0
        for seed in range(4):
            f = band_limited_scalar(conformal16, seed=seed)
            b1 = norms.besov_surface(f, 1.0, fam, conformal16_bases[0])
            b0 = norms.besov_surface(f, 0.0, fam, conformal16_bases[0])
            gb0 = norms.besov_surface(sf.covariant_derivative(f, conformal16), 0.0, fam,
                                      conformal16_bases[1])
            worst = max(worst, b1 / (b0 + gb0))
        assert np.isfinite(worst) and worst < 10.0


class TestHyperNorms:
    def test_time_constant_matches_slice(self, product12):
        fam = norms.foliation_family(product12)
        f0 = band_limited_scalar(product12.slices[0], seed=5)
        F = fl.FoliatedTensor(np.tile(f0.components, (12, 1, 1)), 0, product12)
        hyper = norms.hyper_B(F, 0.0, fam)
        slice_b = norms.besov_surface(f0, 0.0, fam, product12.basis(0, 0))
        assert hyper == pytest.approx(slice_b, rel=1e-12)

    def test_p0_below_b0(self, product12):
        fam = norms.foliation_family(product12)
        for seed in range(5):
            F = random_foliated(product12, seed=seed)
            assert norms.hyper_P(F, 0.0, fam) <= norms.hyper_B(F, 0.0, fam) * (1 + 1e-12)

    def test_monotone_in_exponent(self, product12):
        fam = norms.foliation_family(product12)
        F = random_foliated(product12, seed=9)
        b0 = norms.hyper_B(F, 0.0, fam)
        b_half = norms.hyper_B(F, 0.5, fam)
        b1 = norms.hyper_B(F, 1.0, fam)
        assert b0 <= b_half * (1 + 1e-12) <= b1 * (1 + 1e-12)

    def test_exponent_range(self, product12):
        F = random_foliated(product12, seed=1)
        with pytest.raises(ValueError):
            norms.hyper_B(F, 1.5)

    @settings(max_examples=15, deadline=None)
    @given(c=st.floats(0.1, 50.0))
    def test_homogeneity(self, product12, c):
        fam = norms.foliation_family(product12)
        F = random_foliated(product12, seed=2)
        base = norms.hyper_B(F, 0.0, fam)
        assert norms.hyper_B(c * F, 0.0, fam) == pytest.approx(c * base, rel=1e-10)
        assert norms.n1(c * F) == pytest.approx(c * norms.n1(F), rel=1e-10)


class TestNNorms:
    def test_constant(self, product12):
        c = fl.FoliatedTensor(np.full((12, 12, 12), 2.5), 0, product12)
        assert norms.n1(c) == pytest.approx(2.5 * 2 * np.pi, rel=1e-12)

    def test_n1_below_n2(self, product12):
        for seed in range(3):
            F = random_foliated(product12, seed=seed)
            assert norms.n1(F) <= norms.n2(F) * (1 + 1e-12)

    def test_calculus_inequalities_finite(self, fol_small):
        # mixed-norm controls by the first-order norm over a small family
        worst = {k: 0.0 for k in ("LtinfLx2", "LtinfLx4", "Lt6Lx6")}
        for seed in range(4):
            F = random_foliated(fol_small, seed=seed)
            n1 = norms.n1(F)
            if n1 <= 0:
                continue
            worst["LtinfLx2"] = max(worst["LtinfLx2"], norms.mixed_norm(F, "Lt_inf_Lx_2") / n1)
            worst["LtinfLx4"] = max(
                worst["LtinfLx4"],
                norms.mixed_norm(F, norms.NormSpec("t_then_x", 4, np.inf)) / n1)
            worst["Lt6Lx6"] = max(
                worst["Lt6Lx6"],
                norms.mixed_norm(F, norms.NormSpec("t_then_x", 6, 6)) / n1)
            assert norms.mixed_norm(F, "Lt_inf_Lx_inf") / norms.n2(F) < 20.0
        assert all(np.isfinite(v) and v < 20.0 for v in worst.values())

    def test_volume_equivalence(self, fol_small):
        F = random_foliated(fol_small, seed=11)
        r_slice = norms.mixed_norm(F, "Lt_2_Lx_2", measure="slice")
        r_init = norms.mixed_norm(F, "Lt_2_Lx_2", measure="initial")
        ratio = r_slice / r_init
        assert 1.0 - 1e-9 <= ratio <= fl.VOLUME_COMPARABILITY


class TestEnvelope:
    def test_slow_variation_exact(self, fol_small):
        fam = norms.foliation_family(fol_small)
        F = random_foliated(fol_small, seed=3)
        env = norms.n1_envelope(F, 0.125, fam)
        for k in range(len(env)):
            for kp in range(len(env)):
                assert env[k] <= 2.0 ** (0.125 * abs(k - kp)) * env[kp] * (1 + 1e-12)

    def test_square_sum_comparable(self, fol_small):
        fam = norms.foliation_family(fol_small)
        F = random_foliated(fol_small, seed=4)
        env = norms.n1_envelope(F, 0.125, fam)
        total = np.sum(env**2)
        n1sq = norms.n1(F) ** 2
        assert 1e-2 * n1sq <= total <= 1e2 * n1sq

    def test_single_eigenfunction_peak_and_decay(self, product12):
        fam = norms.foliation_family(product12)
        basis = product12.basis(0, 0)
        lam = basis.lam
        j = int(np.argmin(np.abs(lam - 16.0)))  # k0 = 2
        ef = basis.vectors[:, j].reshape(12, 12)
        F = fl.FoliatedTensor(np.tile(ef, (12, 1, 1)), 0, product12)
        env = norms.n1_envelope(F, 0.125, fam)
        k0 = int(np.argmax(env))
        assert abs(k0 - 2) <= 1
        # the tail decays at the envelope rate (up to the one-band width of
        # the projection overlap around the eigenvalue)
        ks = np.arange(len(env))
        far = ks[ks >= k0 + 2]
        for k in far:
            assert env[k] <= env[k0] * 2.0 ** (-0.125 * (k - k0 - 1)) * (1 + 1e-9)

    def test_epsilon_range(self, fol_small):
        F = random_foliated(fol_small, seed=5)
        with pytest.raises(ValueError):
            norms.n1_envelope(F, 0.5)
