import math

import numpy as np
import pytest

from rgglab import density as dn
from rgglab import sampler as sp
from rgglab import theory as th

GAUSS2 = dn.gaussian_spec(2)
GAUSS3 = dn.gaussian_spec(3)
HEAVY2 = dn.heavy_tail_spec(2, 4.0)
SUBEXP2 = dn.light_tail_spec(2, 0.5)
EXP2 = dn.light_tail_spec(2, 1.0)


class TestRegime:
    def test_classification_of_families(self):
        assert th.regime_of(HEAVY2) == "heavy_tail"
        assert th.regime_of(SUBEXP2) == "subexponential"
        assert th.regime_of(EXP2) == "exponential"
        assert th.regime_of(GAUSS2) == "superexponential"


class TestLightTailRadii:
    def test_gaussian_r0_is_sqrt_log_n(self):
        r0, _ = th.light_tail_radii(GAUSS2, math.exp(100))
        assert r0 == pytest.approx(10.0, rel=1e-12)

    def test_gaussian_r1_hand_chain(self):
        # psi-argument: 100 + log 10 - log 20 - sqrt(log 100) = 97.160887
        _, r1 = th.light_tail_radii(GAUSS2, math.exp(100))
        arg = 100.0 + math.log(10.0) - math.log(20.0) - math.sqrt(math.log(100.0))
        assert arg == pytest.approx(97.160887, abs=1e-6)
        assert r1 == pytest.approx(math.sqrt(arg), rel=1e-12)
        assert r1 == pytest.approx(9.857022, abs=1e-6)

    @pytest.mark.parametrize("spec", [GAUSS2, GAUSS3, SUBEXP2, dn.light_tail_spec(3, 3.0, 0.8)])
    @pytest.mark.parametrize("n", [16.0, 1e3, 1e6, 1e12])
    def test_psi_of_r0_is_log_n(self, spec, n):
        r0, _ = th.light_tail_radii(spec, n)
        assert dn.psi(spec, r0) == pytest.approx(math.log(n), rel=1e-9)

    def test_subexponential_ordering_holds(self):
        # v < 1 has genuinely r0 <= r1; the Gaussian in d=2 does not,
        # which classify() flags as pre_asymptotic
        r0, r1 = th.light_tail_radii(SUBEXP2, 1e4)
        assert r0 <= r1
        r0, r1 = th.light_tail_radii(GAUSS2, 1e4)
        assert r0 > r1
        assert "pre_asymptotic" in th.classify(GAUSS2, 1e4, 0.1, compute_expectations=False).flags

    def test_rejects_small_n_and_heavy(self):
        with pytest.raises(ValueError):
            th.light_tail_radii(GAUSS2, 10.0)
        with pytest.raises(ValueError):
            th.light_tail_radii(HEAVY2, 1e4)


class TestHeavyTailRadii:
    def test_exponent_arithmetic(self):
        r0, r1 = th.heavy_tail_radii(HEAVY2, 1e6)
        assert r0 == r1 == pytest.approx(100.0, rel=1e-12)
        r0, _ = th.heavy_tail_radii(dn.heavy_tail_spec(2, 3.0), 1e4)
        assert r0 == pytest.approx(100.0, rel=1e-12)

    def test_exponent_sits_between_hypotheses(self):
        # 1/(alpha - d/2) < 1/(alpha - 3d/4) for every valid (alpha, d)
        for alpha, d in [(4.0, 2), (4.0, 3), (2.5, 2), (7.0, 3)]:
            assert 1.0 / (alpha - d / 2) < 1.0 / (alpha - 3 * d / 4)


class TestTau:
    def test_gaussian_hand_value(self):
        assert th.tau(GAUSS2, math.exp(100)) == pytest.approx(math.log(100) / 20.0, rel=1e-12)

    def test_gaussian_shape_constant(self):
        # tau * sqrt(log n) / log log n -> 1/2 for the unit-scale Gaussian
        for n in (1e6, 1e12, 1e24):
            ratio = th.tau(GAUSS2, n) * math.sqrt(math.log(n)) / math.log(math.log(n))
            assert ratio == pytest.approx(0.5, rel=1e-12)

    def test_decreasing_for_large_n(self):
        grid = [1e6, 1e7, 1e9, 1e12, 1e15]
        vals = [th.tau(GAUSS2, n) for n in grid]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_rejects_non_superexponential(self):
        for spec in (HEAVY2, SUBEXP2, EXP2):
            with pytest.raises(ValueError):
                th.tau(spec, 1e6)


class TestChernoff:
    def test_values(self):
        assert th.chernoff_h(1.0) == 0.0
        assert th.chernoff_h(0.0) == 1.0
        assert th.chernoff_h(2.0) == pytest.approx(2 * math.log(2) - 1, rel=1e-12)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            th.chernoff_h(-0.1)

    def test_bound_values(self):
        assert th.poisson_tail_bound(100.0, 100.0, "upper") == 1.0
        got = th.poisson_tail_bound(100.0, 200.0, "upper")
        assert got == pytest.approx(math.exp(-100 * (2 * math.log(2) - 1)), rel=1e-12)
        assert got == pytest.approx(1.66e-17, rel=1e-2)

    def test_bound_side_validation(self):
        with pytest.raises(ValueError):
            th.poisson_tail_bound(100.0, 50.0, "upper")
        with pytest.raises(ValueError):
            th.poisson_tail_bound(100.0, 150.0, "lower")
        with pytest.raises(ValueError):
            th.poisson_tail_bound(100.0, 100.0, "sideways")

    def test_dominates_empirical_tails(self):
        rng = np.random.default_rng(314)
        for n in (10, 100, 1000):
            draws = rng.poisson(n, size=200_000)
            for frac in (1.2, 1.5, 2.0):
                k = int(frac * n)
                emp = float(np.mean(draws >= k))
                assert emp <= th.poisson_tail_bound(n, k, "upper")
            for frac in (0.5, 0.8):
                k = int(frac * n)
                emp = float(np.mean(draws <= k))
                assert emp <= th.poisson_tail_bound(n, k, "lower")


class TestExpectedIsolated:
    def test_vanishes_with_intensity(self):
        assert th.expected_isolated(GAUSS2, 1e-6, 0.5, 2.0) < 1e-5

    def test_huge_radius_collapses_integrand(self):
        # ball_mass ~ 1 throughout B(0,R): E ~ n (1 - tail(R)) e^-n
        n, R = 3.0, 1.0
        want = n * (1.0 - dn.tail_mass(GAUSS2, R)) * math.exp(-n)
        got = th.expected_isolated(GAUSS2, n, 10.0, R)
        assert got == pytest.approx(want, rel=1e-3)

    def test_against_brute_force_monte_carlo(self):
        n, r, R = 200.0, 0.3, 2.0
        quad_val = th.expected_isolated(GAUSS2, n, r, R)
        vals = []
        for i in range(800):
            cloud = sp.sample(GAUSS2, n, sp.child_seed(77, i))
            pts = cloud.points
            d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
            np.fill_diagonal(d2, np.inf)
            iso = (np.min(d2, axis=1) >= r * r) & (cloud.radii <= R)
            vals.append(int(iso.sum()))
        mean = float(np.mean(vals))
        se = float(np.std(vals, ddof=1)) / math.sqrt(len(vals))
        assert abs(mean - quad_val) <= max(3 * se, 0.02 * quad_val)

    def test_monotone_in_r_and_R(self):
        vals_r = [th.expected_isolated(GAUSS2, 500.0, r, 2.0) for r in (0.1, 0.2, 0.4)]
        assert all(a > b for a, b in zip(vals_r, vals_r[1:]))
        vals_R = [th.expected_isolated(GAUSS2, 500.0, 0.2, R) for R in (0.5, 1.0, 2.0)]
        assert all(a < b for a, b in zip(vals_R, vals_R[1:]))


class TestTailEmptyProb:
    def test_limits(self):
        assert th.tail_empty_prob(GAUSS2, 100.0, 0.0) == pytest.approx(math.exp(-100.0))
        assert th.tail_empty_prob(GAUSS2, 100.0, math.inf) == 1.0

    def test_gaussian_hand_value(self):
        got = th.tail_empty_prob(GAUSS2, 1e3, 3.0)
        assert got == pytest.approx(math.exp(-1000.0 * math.exp(-9.0)), rel=1e-9)
        assert got == pytest.approx(0.8839, abs=1e-4)

    def test_matches_empirical_frequency(self):
        n, R = 200.0, 1.8
        want = th.tail_empty_prob(GAUSS2, n, R)
        hits = sum(
            1
            for i in range(500)
            if np.all(sp.sample(GAUSS2, n, sp.child_seed(99, i)).radii <= R)
        )
        p_hat = hits / 500
        se = math.sqrt(want * (1 - want) / 500)
        assert abs(p_hat - want) <= 3 * se


class TestConcentrationRadii:
    def test_hand_chain(self):
        conc = th.concentration_radii(GAUSS2, math.exp(100), 1.0, 0.5)
        delta = math.log(6 * math.pi) + 1
        assert conc.delta == pytest.approx(delta, rel=1e-12)
        a_n = 100 + 4 * math.log(0.5) - math.log(math.log(20.0)) - delta
        assert conc.a_n == pytest.approx(a_n, rel=1e-12)
        assert conc.a_n == pytest.approx(92.1937, abs=1e-4)
        assert conc.r0 == pytest.approx(9.6018, abs=1e-4)
        assert not conc.pre_asymptotic

    def test_delta_margin_is_negative(self):
        for spec in (GAUSS2, GAUSS3, dn.light_tail_spec(2, 3.0)):
            conc = th.concentration_radii(spec, 1e5, 1.0, 0.5)
            d = spec.dimension
            assert d - spec.norm_constant * math.exp(conc.delta) / 3.0 < 0
            # with delta = log(3d/C) + 1 the margin is exactly d(1 - e)
            assert d - spec.norm_constant * math.exp(conc.delta) / 3.0 == pytest.approx(
                d * (1 - math.e), rel=1e-12
            )

    def test_outer_gap_shrinks_relative_to_r(self):
        gaps = []
        for n in (math.exp(50), math.exp(100), math.exp(200)):
            conc = th.concentration_radii(GAUSS2, n, 1.0, 0.5)
            assert conc.r1 >= conc.r0
            gaps.append(conc.r1 - conc.r0)
        assert all(a > b for a, b in zip(gaps, gaps[1:]))

    def test_side_condition_flag(self):
        # gamma * r * psi'(psi_inv(log n)) <= 1 is flagged, not fatal
        conc = th.concentration_radii(GAUSS2, 1e5, 0.01, 0.5)
        assert conc.pre_asymptotic

    def test_rejects_invalid_inputs(self):
        with pytest.raises(ValueError):
            th.concentration_radii(SUBEXP2, 1e5, 1.0, 0.5)
        with pytest.raises(ValueError):
            th.concentration_radii(GAUSS2, 1e5, 1.0, 1.5)


class TestClassify:
    def test_heavy_tail_always_disconnected(self):
        rep = th.classify(HEAVY2, 1e5, 1.0, compute_expectations=False)
        assert rep.regime == "heavy_tail"
        assert rep.prediction == "disconnected_whp"
        assert rep.r0 == rep.r1 == pytest.approx(1e5 ** (1 / 3))

    def test_subexponential_always_disconnected(self):
        rep = th.classify(SUBEXP2, 1e4, 1.0, compute_expectations=False)
        assert rep.prediction == "disconnected_whp"

    def test_exponential_rule(self):
        n = 1e5
        slope = dn.psi_prime(EXP2, dn.psi_inverse(EXP2, math.log(n)))  # = 1 for v=1, scale=1
        assert th.classify(EXP2, n, 0.9 / slope, compute_expectations=False).prediction == (
            "disconnected_whp"
        )
        assert th.classify(EXP2, n, 1.5 / slope, compute_expectations=False).prediction == (
            "untheorized"
        )

    def test_superexponential_rules(self):
        n = math.exp(100)
        t = th.tau(GAUSS2, n)
        low = th.classify(GAUSS2, n, 0.1 * t, compute_expectations=False)
        assert low.prediction == "disconnected_whp"
        high = th.classify(GAUSS2, n, 10.0 * t, compute_expectations=False)
        assert high.prediction == "concentration_regime"
        mid = th.classify(GAUSS2, n, 1.0 * t, compute_expectations=False)
        assert mid.prediction == "untheorized"
        assert low.tau == pytest.approx(t)

    def test_gamma_attaches_exponents(self):
        rep = th.classify(GAUSS2, 1e5, 1.0, gamma=0.5, compute_expectations=False)
        conc = th.concentration_radii(GAUSS2, 1e5, 1.0, 0.5)
        assert rep.a_n == pytest.approx(conc.a_n)
        assert rep.b_n == pytest.approx(conc.b_n)

    def test_report_serializes(self):
        rep = th.classify(GAUSS2, 1e4, 0.1, gamma=0.5)
        blob = rep.to_json()
        assert blob["regime"] == "superexponential"
        assert blob["constants"]["c_lo"] == th.DEFAULT_C_LO
        assert isinstance(blob["flags"], list)
        assert blob["expected_isolated"] > 0
