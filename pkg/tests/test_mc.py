"""Tests for subordinator sampling, inverse subordinators and comparison checks."""

import math

import numpy as np
import pytest
from scipy.special import erf
from scipy.stats import kstest

from fracgreen import kernels as K
from fracgreen import mc as M
from fracgreen import subordination as S
from fracgreen.errors import CapabilityError, CertificateError, DomainError


class TestStableIncrement:
    def test_laplace_transform_law(self):
        rng = M.rng_stream(42)
        for beta, dt in [(0.5, 1.0), (0.4, 0.5), (0.7, 2.0)]:
            s = M.sample_stable_increment(beta, dt, rng, size=100_000)
            got = np.exp(-s).mean()
            expect = math.exp(-dt)
            serr = np.exp(-s).std() / math.sqrt(len(s))
            assert abs(got - expect) < 3 * serr + 1e-12

    def test_positivity(self):
        rng = M.rng_stream(1)
        s = M.sample_stable_increment(0.5, 1.0, rng, size=10_000)
        assert (s > 0).all()

    def test_tail_constant(self):
        rng = M.rng_stream(5)
        s = M.sample_stable_increment(0.5, 1.0, rng, size=100_000)
        got = (s > 1e3).mean() * 1e3**0.5
        assert got == pytest.approx(1.0 / math.gamma(0.5), rel=0.10)

    def test_scalar_draw(self):
        rng = M.rng_stream(2)
        v = M.sample_stable_increment(0.5, 1.0, rng)
        assert isinstance(v, float) and v > 0

    def test_determinism(self):
        a = M.sample_stable_increment(0.6, 1.0, M.rng_stream(9), size=1000)
        b = M.sample_stable_increment(0.6, 1.0, M.rng_stream(9), size=1000)
        assert np.array_equal(a, b)


class TestSymmetricStable:
    def test_cauchy_quartiles(self):
        rng = M.rng_stream(3)
        z = M.sample_symmetric_stable(1.0, rng, size=100_000)
        # Cauchy quartiles at +-1
        assert np.quantile(z, 0.75) == pytest.approx(1.0, abs=0.02)

    def test_gaussian_limit(self):
        rng = M.rng_stream(4)
        z = M.sample_symmetric_stable(2.0, rng, size=100_000)
        assert z.var() == pytest.approx(2.0, rel=0.03)

    def test_symmetry(self):
        rng = M.rng_stream(6)
        z = M.sample_symmetric_stable(1.5, rng, size=100_000)
        assert abs(np.median(z)) < 0.02


class TestInverseSubordinator:
    @pytest.mark.parametrize("beta", [0.4, 0.5, 0.7])
    def test_mean_identity(self, beta):
        cfg = M.McConfig(sample_count=100_000, seed=17)
        e = M.sample_inverse_subordinator(beta, 1.0, cfg)
        expect = 1.0 / math.gamma(1.0 + beta)
        serr = e.std() / math.sqrt(len(e))
        assert abs(e.mean() - expect) < 3 * serr + cfg.bracket_tol

    def test_ks_closed_form(self):
        cfg = M.McConfig(sample_count=100_000, seed=23)
        e = M.sample_inverse_subordinator(0.5, 1.0, cfg)
        stat = kstest(e, lambda s: erf(s / 2.0)).statistic
        assert stat < 0.02

    def test_small_time_concentration(self):
        cfg = M.McConfig(sample_count=5_000, seed=31, time_step=1e-4, bracket_tol=1e-5)
        e = M.sample_inverse_subordinator(0.5, 1e-6, cfg)
        assert np.quantile(e, 0.99) < 0.1

    def test_determinism_bit_for_bit(self):
        cfg = M.McConfig(sample_count=2_000, seed=77)
        a = M.sample_inverse_subordinator(0.5, 1.0, cfg)
        b = M.sample_inverse_subordinator(0.5, 1.0, cfg)
        assert np.array_equal(a, b)

    def test_domain(self):
        with pytest.raises(DomainError):
            M.sample_inverse_subordinator(0.5, 0.0, M.McConfig(sample_count=10, seed=1))


class TestSubordinatedDensity:
    def test_variance_identity(self):
        cfg = M.McConfig(sample_count=100_000, seed=13)
        x = M.subordinated_path_samples(K.ConstantDiffusion(1), 0.5, 1.0, cfg)
        assert (x**2).mean() == pytest.approx(2.0 / math.gamma(1.5), rel=0.05)

    def test_ks_against_frac_green(self):
        cfg = M.McConfig(sample_count=100_000, seed=19)
        samples = M.subordinated_path_samples(K.ConstantDiffusion(1), 0.5, 1.0, cfg)
        g1 = K.ConstantDiffusion(1)
        grid = np.linspace(0.0, 14.0, 141)
        pdf = np.array(
            [
                S.frac_green(S.FracGreenRequest(kernel=g1, beta=0.5, t=1.0, x=[v], y=[0.0]))
                for v in grid
            ]
        )
        # symmetric kernel: build the CDF on r >= 0 and mirror
        half = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) / 2.0 * np.diff(grid))])

        def cdf(v):
            v = np.asarray(v, dtype=float)
            inner = np.interp(np.abs(v), grid, half)
            return 0.5 + np.sign(v) * inner

        stat = kstest(samples, cdf).statistic
        assert stat < 0.02

    def test_median_symmetric_stable(self):
        cfg = M.McConfig(sample_count=50_000, seed=29)
        x = M.subordinated_path_samples(K.IsotropicStable(1, 1.0), 0.5, 1.0, cfg)
        assert abs(np.median(x)) < 0.03

    def test_histogram_output(self):
        cfg = M.McConfig(sample_count=20_000, seed=37, histogram_bins=40)
        est = M.subordinated_density_mc(K.ConstantDiffusion(1), 0.5, 1.0, cfg)
        assert est.counts.sum() <= cfg.sample_count
        assert est.density.shape == (40,)
        width = np.diff(est.bin_edges)
        assert (est.density * width).sum() == pytest.approx(1.0, abs=0.01)
        # paired quadrature values track the empirical density
        assert est.frac_green_density is not None
        mid = est.density > est.density.max() * 0.2
        rel = np.abs(est.density[mid] / est.frac_green_density[mid] - 1.0)
        assert np.median(rel) < 0.1

    def test_unsupported_family(self):
        an = K.AnisotropicStable2D(1.0, K.SpectralMeasure.uniform(1.0))
        with pytest.raises(CapabilityError):
            M.subordinated_path_samples(an, 0.5, 1.0, M.McConfig(sample_count=100, seed=1))


class TestLevyKernelSpec:
    def test_pure_certificate_degenerate(self):
        nu = M.LevyKernelSpec.pure(0.5)
        cert = nu.certificate()
        assert cert["beta_lower"] == cert["beta_upper"] == 0.5
        assert cert["C_low_small"] == pytest.approx(1.0)
        assert cert["C_high_small"] == pytest.approx(1.0)

    def test_mixture_certificate(self):
        nu = M.LevyKernelSpec(components=((0.5, 0.4), (0.5, 0.6)))
        cert = nu.certificate()
        assert cert["beta_lower"] == 0.4 and cert["beta_upper"] == 0.6
        # sandwich inequalities hold numerically on both half-lines
        c = lambda b: b / math.gamma(1.0 - b)
        for s in np.geomspace(1e-4, 1.0, 40):
            assert nu.density(s) <= cert["C_high_small"] * c(0.6) * s ** (-1.6) * (1 + 1e-12)
            assert nu.density(s) >= cert["C_low_small"] * c(0.4) * s ** (-1.4) * (1 - 1e-12)
        for s in np.geomspace(1.0, 1e4, 40):
            assert nu.density(s) <= cert["C_high_large"] * c(0.4) * s ** (-1.4) * (1 + 1e-12)
            assert nu.density(s) >= cert["C_low_large"] * c(0.6) * s ** (-1.6) * (1 - 1e-12)

    def test_bad_declared_orders(self):
        nu = M.LevyKernelSpec(components=((1.0, 0.5),), beta_lower=0.6, beta_upper=0.7)
        with pytest.raises(CertificateError):
            nu.certificate()


class TestComparison:
    def test_degenerate_sandwich_equal(self):
        nu = M.LevyKernelSpec.pure(0.5)
        cfg = M.McConfig(sample_count=30_000, seed=41)
        f = lambda v: 1.0 if v <= 0.5 else 0.0
        rep = M.comparison_check(nu, K.ConstantDiffusion(1), 1.0, f, cfg)
        assert rep.ordering_holds
        assert rep.estimate_mixture == pytest.approx(rep.estimate_lower_order, abs=0.01)

    def test_constant_function(self):
        nu = M.LevyKernelSpec(components=((0.5, 0.4), (0.5, 0.6)))
        cfg = M.McConfig(sample_count=5_000, seed=43)
        rep = M.comparison_check(nu, K.ConstantDiffusion(1), 1.0, lambda v: 1.0, cfg)
        assert rep.estimate_mixture == 1.0
        assert rep.estimate_lower_order == 1.0
        assert rep.estimate_upper_order == 1.0
        assert rep.ordering_holds

    def test_mixture_sandwich(self):
        nu = M.LevyKernelSpec(components=((0.5, 0.4), (0.5, 0.6)))
        cfg = M.McConfig(sample_count=60_000, seed=47)
        f = lambda v: 1.0 if v <= 0.5 else 0.0
        rep = M.comparison_check(nu, K.ConstantDiffusion(1), 1.0, f, cfg)
        assert rep.ordering_holds

    def test_rejects_increasing_function(self):
        nu = M.LevyKernelSpec.pure(0.5)
        cfg = M.McConfig(sample_count=1_000, seed=51)
        with pytest.raises(DomainError):
            M.comparison_check(nu, K.ConstantDiffusion(1), 1.0, lambda v: v, cfg)
