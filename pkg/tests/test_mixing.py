import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from mixlab.mixing import (
    InvalidDistributionError,
    MixingDistribution,
    alpha_threshold,
    expectation_rule,
    regularized_incomplete_beta,
)


def adaptive_simpson(f, a, b, tol=1e-10, depth=60):
    """Independent quadrature oracle (recursive adaptive Simpson)."""

    def simp(x0, x2):
        x1 = 0.5 * (x0 + x2)
        return (x2 - x0) / 6.0 * (f(x0) + 4.0 * f(x1) + f(x2)), x1

    def rec(x0, x2, whole, t, d):
        s_l, x1l = simp(x0, 0.5 * (x0 + x2))
        s_r, _ = simp(0.5 * (x0 + x2), x2)
        if d <= 0 or abs(s_l + s_r - whole) <= 15 * t:
            return s_l + s_r + (s_l + s_r - whole) / 15.0
        mid = 0.5 * (x0 + x2)
        return rec(x0, mid, s_l, t / 2, d - 1) + rec(mid, x2, s_r, t / 2, d - 1)

    whole, _ = simp(a, b)
    return rec(a, b, whole, tol, depth)


class TestBetaCdf:
    def test_symmetry_at_half(self):
        for a in (0.5, 1, 2, 7, 32, 512):
            assert MixingDistribution.beta(a).cdf(0.5) == pytest.approx(0.5, abs=1e-12)

    def test_uniform_identity_cdf(self):
        assert MixingDistribution.uniform().cdf(0.3) == 0.3

    def test_closed_form_alpha2(self):
        # I_x(2,2) = 3x^2 - 2x^3, evaluated by an independent polynomial oracle
        d = MixingDistribution.beta(2)
        for x in (0.25, 0.1, 0.6, 0.99):
            assert d.cdf(x) == pytest.approx(3 * x**2 - 2 * x**3, abs=1e-12)
        assert d.cdf(0.25) == pytest.approx(0.15625, abs=1e-12)

    def test_endpoints(self):
        d = MixingDistribution.beta(11)
        assert d.cdf(0.0) == 0.0
        assert d.cdf(1.0) == 1.0

    def test_monotone(self):
        d = MixingDistribution.beta(64)
        xs = np.linspace(0, 1, 201)
        vals = [d.cdf(x) for x in xs]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_against_scipy_and_simpson(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            a = float(np.exp(rng.uniform(np.log(0.5), np.log(2048))))
            x = float(rng.uniform(0, 1))
            ours = regularized_incomplete_beta(a, a, x)
            assert ours == pytest.approx(float(special.betainc(a, a, x)), abs=2e-12)
        # spot-check the quadrature oracle on moderate alphas
        for a, x in ((0.7, 0.3), (3.0, 0.8), (40.0, 0.45), (300.0, 0.52)):
            d = MixingDistribution.beta(a)
            quad = adaptive_simpson(lambda t: d.density(t), 1e-12, x)
            assert d.cdf(x) == pytest.approx(quad, abs=1e-8)

    def test_invalid_alpha(self):
        with pytest.raises(InvalidDistributionError):
            MixingDistribution.beta(0.0)
        with pytest.raises(InvalidDistributionError):
            MixingDistribution.beta(-3)
        with pytest.raises(InvalidDistributionError):
            MixingDistribution.beta(0.25)  # endpoint-singular range unsupported

    def test_cdf_domain(self):
        with pytest.raises(ValueError):
            MixingDistribution.beta(2).cdf(1.5)


class TestIntervalQueries:
    def test_uniform_mass(self):
        u = MixingDistribution.uniform()
        assert u.interval_mass(0.45, 0.55) == pytest.approx(0.1, abs=1e-12)

    def test_total_mass(self):
        for d in (MixingDistribution.beta(5), MixingDistribution.uniform()):
            assert d.interval_mass(0, 1) == pytest.approx(1.0, abs=1e-10)

    def test_clamping_and_empty(self):
        d = MixingDistribution.beta(3)
        assert d.interval_mass(-1, 2) == pytest.approx(1.0, abs=1e-10)
        assert d.interval_mass(0.7, 0.2) == 0.0

    def test_beta32_against_quadrature(self):
        d = MixingDistribution.beta(32)
        quad = adaptive_simpson(lambda t: d.density(t), 0.45, 0.55, tol=1e-12)
        assert d.interval_mass(0.45, 0.55) == pytest.approx(quad, abs=1e-8)

    def test_first_moment_uniform(self):
        u = MixingDistribution.uniform()
        assert u.interval_first_moment(0.0, 0.1) == pytest.approx(0.005, abs=1e-12)
        assert u.interval_first_moment(0.9, 1.0) == pytest.approx(0.095, abs=1e-12)

    def test_first_moment_mean_of_symmetric(self):
        assert MixingDistribution.beta(2).interval_first_moment(0, 1) == pytest.approx(
            0.5, abs=1e-10
        )

    def test_first_moment_against_quadrature(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            a = float(np.exp(rng.uniform(np.log(0.5), np.log(256))))
            lo, hi = np.sort(rng.uniform(0, 1, 2))
            d = MixingDistribution.beta(a)
            quad = adaptive_simpson(lambda t: t * d.density(t), lo, hi, tol=1e-12)
            assert d.interval_first_moment(lo, hi) == pytest.approx(quad, abs=1e-8)

    @given(
        a=st.floats(0.5, 512),
        lo=st.floats(0, 1),
        hi=st.floats(0, 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_moment_bounds_property(self, a, lo, hi):
        lo, hi = min(lo, hi), max(lo, hi)
        d = MixingDistribution.beta(a)
        mass = d.interval_mass(lo, hi)
        fm = d.interval_first_moment(lo, hi)
        assert -1e-12 <= fm <= mass + 1e-12
        assert lo * mass - 1e-12 <= fm <= hi * mass + 1e-12

    @given(a=st.floats(0.5, 512), lo=st.floats(0, 1), hi=st.floats(0, 1))
    @settings(max_examples=60, deadline=None)
    def test_symmetric_reflection_property(self, a, lo, hi):
        lo, hi = min(lo, hi), max(lo, hi)
        d = MixingDistribution.beta(a)
        # mirrored first moment satisfies: fm(1-hi, 1-lo) = mass(lo, hi) - fm(lo, hi)
        lhs = d.interval_first_moment(1 - hi, 1 - lo)
        rhs = d.interval_mass(lo, hi) - d.interval_first_moment(lo, hi)
        assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_symmetric_mass_reflection(self):
        d = MixingDistribution.beta(17)
        assert d.interval_mass(0.1, 0.3) == pytest.approx(
            d.interval_mass(0.7, 0.9), abs=1e-10
        )


class TestVarianceAndThreshold:
    def test_variance_closed_form_by_quadrature(self):
        # Var(Beta(a,a)) = 1/(8a+4); quadrature confirms the closed form.
        # Forced breakpoints keep the sharp large-alpha bump visible to the
        # adaptive rule.
        cuts = [1e-12, 0.4, 0.45, 0.48, 0.5, 0.52, 0.55, 0.6, 1 - 1e-12]
        for a in (1, 2, 32, 1024):
            d = MixingDistribution.beta(a)
            quad = sum(
                adaptive_simpson(lambda t: (t - 0.5) ** 2 * d.density(t), lo, hi)
                for lo, hi in zip(cuts, cuts[1:])
            )
            assert quad == pytest.approx(1.0 / (8 * a + 4), abs=1e-8)
            assert d.variance == pytest.approx(1.0 / (8 * a + 4), abs=1e-12)
        # endpoint-singular alpha=1/2 checked against an independent implementation
        assert MixingDistribution.beta(0.5).variance == pytest.approx(
            float(stats.beta(0.5, 0.5).var()), abs=1e-12
        )

    def test_uniform_variance(self):
        assert MixingDistribution.uniform().variance == pytest.approx(1 / 12)

    def test_threshold_frozen_values(self):
        # frozen from direct evaluation of (ln(4)/eps^2 - 1)/2
        assert alpha_threshold(0.1) == pytest.approx(68.81471805599452, abs=1e-10)
        assert alpha_threshold(1.0) == pytest.approx(0.1931471805599453, abs=1e-12)

    def test_threshold_guarantees_central_mass(self):
        # above threshold the central interval holds a strict majority of mass
        alpha = math.ceil(alpha_threshold(0.1)) + 1  # 70
        assert alpha == 70
        d = MixingDistribution.beta(alpha)
        assert d.interval_mass(0.4, 0.6) > 0.5

    def test_threshold_positive_eps_required(self):
        with pytest.raises(ValueError):
            alpha_threshold(0.0)


class TestSampling:
    def test_uniform_mean(self):
        rng = np.random.default_rng(0)
        xs = MixingDistribution.uniform().sample(rng, size=100_000)
        assert abs(xs.mean() - 0.5) < 0.005

    def test_reproducible(self):
        d = MixingDistribution.beta(7)
        a = d.sample(np.random.default_rng(3), size=50)
        b = d.sample(np.random.default_rng(3), size=50)
        assert np.array_equal(a, b)

    def test_beta1024_variance(self):
        d = MixingDistribution.beta(1024)
        xs = d.sample(np.random.default_rng(9), size=100_000)
        true_var = 1.0 / (8 * 1024 + 4)
        assert abs(xs.var() - true_var) < 0.2 * true_var

    def test_beta1_matches_uniform(self):
        xs = MixingDistribution.beta(1).sample(np.random.default_rng(4), size=100_000)
        ks = stats.kstest(xs, "uniform")
        assert ks.statistic < 0.01

    def test_mean_within_standard_errors(self):
        for d in (MixingDistribution.beta(3), MixingDistribution.beta(64)):
            xs = d.sample(np.random.default_rng(8), size=100_000)
            se = math.sqrt(d.variance / xs.size)
            assert abs(xs.mean() - 0.5) < 3 * se


class TestTabulated:
    def test_renormalization_reported(self):
        lam = np.linspace(0, 1, 11)
        d = MixingDistribution.tabulated(lam, np.full(11, 2.0))
        assert d.renorm_factor == pytest.approx(2.0)
        assert d.interval_mass(0, 1) == pytest.approx(1.0, abs=1e-12)

    def test_matches_uniform(self):
        d = MixingDistribution.tabulated(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
        assert d.cdf(0.3) == pytest.approx(0.3, abs=1e-12)
        assert d.interval_first_moment(0, 0.1) == pytest.approx(0.005, abs=1e-12)

    def test_triangle_density(self):
        # f(x) = 2x: cdf x^2, first moment 2x^3/3
        d = MixingDistribution.tabulated(np.array([0.0, 1.0]), np.array([0.0, 2.0]))
        assert d.cdf(0.5) == pytest.approx(0.25, abs=1e-12)
        assert d.interval_first_moment(0, 0.5) == pytest.approx(2 * 0.5**3 / 3, abs=1e-12)
        assert not d.is_symmetric

    def test_negative_entries_rejected(self):
        with pytest.raises(InvalidDistributionError):
            MixingDistribution.tabulated(np.array([0.0, 0.5, 1.0]), np.array([1.0, -0.1, 1.0]))

    def test_grid_validation(self):
        with pytest.raises(InvalidDistributionError):
            MixingDistribution.tabulated(np.array([0.0, 0.5]), np.array([1.0, 1.0]))
        with pytest.raises(InvalidDistributionError):
            MixingDistribution.tabulated(np.array([0.0, 0.6, 0.4, 1.0]), np.ones(4))

    def test_csv_roundtrip(self, tmp_path):
        path = tmp_path / "dens.csv"
        path.write_text("lambda,density\n0.0,0.5\n0.5,2.0\n1.0,0.5\n")
        d = MixingDistribution.tabulated_from_csv(path)
        assert d.is_symmetric
        assert d.interval_mass(0, 1) == pytest.approx(1.0, abs=1e-12)

    def test_csv_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n0,1\n1,1\n")
        with pytest.raises(InvalidDistributionError):
            MixingDistribution.tabulated_from_csv(path)

    def test_sampling_matches_cdf(self):
        d = MixingDistribution.tabulated(np.array([0.0, 0.5, 1.0]), np.array([0.5, 2.0, 0.5]))
        xs = d.sample(np.random.default_rng(2), size=60_000)
        # empirical CDF at a few quantiles against the exact one
        for q in (0.2, 0.5, 0.8):
            assert abs((xs <= q).mean() - d.cdf(q)) < 0.01


class TestExpectationRule:
    def test_weights_integrate_to_one(self):
        for d in (
            MixingDistribution.uniform(),
            MixingDistribution.beta(1),
            MixingDistribution.beta(32),
            MixingDistribution.beta(1024),
            MixingDistribution.tabulated(np.array([0.0, 0.5, 1.0]), np.array([0.5, 2.0, 0.5])),
        ):
            lam, w = expectation_rule(d, 64)
            assert w.sum() == pytest.approx(1.0, abs=1e-9)

    def test_moments_match(self):
        d = MixingDistribution.beta(32)
        lam, w = expectation_rule(d, 64)
        assert float(np.sum(w * lam)) == pytest.approx(0.5, abs=1e-10)
        assert float(np.sum(w * (lam - 0.5) ** 2)) == pytest.approx(d.variance, abs=1e-10)

    def test_minimum_nodes(self):
        with pytest.raises(ValueError):
            expectation_rule(MixingDistribution.uniform(), 8)
