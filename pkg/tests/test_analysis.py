import math

import numpy as np
import pytest

from mhetd import (TDistribution, build_state_space, compute_gains,
                   outlier_expectation, variance_gaussian, variance_yhat)
from mhetd.analysis import mean_s
from mhetd.noise import NoiseMoments

from conftest import random_stable_model


class TestVarianceFormula:
    def test_consistency_var_y_equals_h_var_x_h(self, fifth_order_ss,
                                                fifth_order_model):
        noise = fifth_order_model.noise
        rep = variance_yhat(fifth_order_ss, noise, noise, 6, 9)
        assert rep.var_y == pytest.approx(float(rep.var_x[0, 0]), rel=1e-10)
        assert rep.var_y == pytest.approx(rep.term1 + rep.term2 + rep.term3,
                                          rel=1e-12)

    def test_var_x_symmetric_nonnegative_diagonal(self, fifth_order_ss,
                                                  fifth_order_model):
        noise = fifth_order_model.noise
        rep = variance_yhat(fifth_order_ss, noise, noise, 6, 12)
        np.testing.assert_allclose(rep.var_x, rep.var_x.T, atol=1e-12)
        assert np.all(np.diag(rep.var_x) >= 0)

    def test_monotone_in_window_and_time(self, fifth_order_ss,
                                         fifth_order_model):
        noise = fifth_order_model.noise
        v = {(N, T): variance_yhat(fifth_order_ss, noise, noise, N, T).var_y
             for N in (6, 9, 12) for T in (12, 40, 60)}
        for T in (12, 40, 60):
            assert v[(6, T)] >= v[(9, T)] >= v[(12, T)]
        for N in (6, 9, 12):
            assert v[(N, 12)] <= v[(N, 40)] <= v[(N, 60)]

    def test_time_one_has_no_feedthrough_term(self, scalar_ss, scalar_model):
        noise = scalar_model.noise
        rep = variance_yhat(scalar_ss, noise, noise, 1, 1)
        assert rep.coef3 == 0.0
        assert rep.term3 == 0.0

    def test_gaussian_design_limit_equals_corollary(self, fifth_order_ss):
        g = TDistribution(nu=math.inf, sigma=0.9)
        a = variance_yhat(fifth_order_ss, g, g, 6, 9)
        b = variance_gaussian(fifth_order_ss, g, 6, 9)
        assert a.var_y == pytest.approx(b.var_y, rel=1e-12)
        np.testing.assert_allclose(a.var_x, b.var_x, rtol=1e-12)

    def test_moment_override(self, fifth_order_ss, fifth_order_model):
        noise = fifth_order_model.noise
        mom = NoiseMoments(rho1=8 / 3, rho2=1.0, rho3=0.7414, rho4=8 / 3)
        rep = variance_yhat(fifth_order_ss, noise, noise, 6, 9, moments=mom)
        assert rep.var_y == pytest.approx(0.7055, abs=1e-3)

    @pytest.mark.parametrize("N,T", [(6, 9), (6, 25), (9, 12), (12, 30)])
    def test_gaussian_variance_against_impulse_superposition(
            self, fifth_order_ss, fifth_order_model, N, T):
        # the least-squares estimator is linear in the noise, so its
        # output variance is rho3 * sum_j (d y_hat_T / d e_j)^2 with the
        # sensitivities measured by unit noise impulses pushed through
        # the actual simulation + filter pipeline -- an end-to-end
        # oracle for the closed-form prediction
        from mhetd.estimators import MovingHorizonRunner
        ss = fifth_order_ss
        noise = fifth_order_model.noise
        runner = MovingHorizonRunner(ss, noise, N, gaussian=True,
                                     anchor_every=1)
        phi_a = np.asarray(ss.phi_a)
        om = np.asarray(ss.omega)[:, 0]
        total = 0.0
        u = np.zeros(T)
        for j in range(1, T + 1):
            # trajectory generated by e = unit impulse at instant j
            x = np.zeros(ss.n)
            y = np.zeros(T)
            for k in range(1, T + 1):
                e = 1.0 if k == j else 0.0
                y[k - 1] = x[0] + e
                x = phi_a @ x + om * e
            _, yhat = runner.run(u, y)
            total += yhat[T - 1] ** 2
        predicted = variance_gaussian(ss, noise, N, T).var_y
        assert noise.variance * total == pytest.approx(predicted, rel=1e-8)


class TestMeanS:
    def test_zero_input_zero_mean(self, scalar_ss):
        assert mean_s(scalar_ss, np.zeros(10), 8)[0] == 0.0

    def test_input_driven_mean_matches_brute_force(self):
        rng = np.random.default_rng(0)
        m = random_stable_model(rng, 2)
        ss = build_state_space(m)
        u = rng.normal(size=15)
        T = 12
        brute = np.zeros(2)
        for k in range(1, T):
            P = np.eye(2)
            for _ in range(T - k - 1):
                P = P @ ss.phi_a
            brute += P @ (ss.gamma[:, 0] * u[k - 1])
        np.testing.assert_allclose(mean_s(ss, u, T), brute, atol=1e-12)

    def test_outlier_tail(self, scalar_ss):
        # E(s_T) = Phi_a^{T-k1-1} Omega e for T > k1 with zero input
        val = mean_s(scalar_ss, np.zeros(40), 35, k1=30, e_k1=-10.0)
        assert val[0] == pytest.approx(0.9**4 * 0.05 * -10.0, rel=1e-12)


class TestOutlierExpectation:
    def test_pre_outlier_regime_zero(self, scalar_ss, scalar_model):
        trace = outlier_expectation(scalar_ss, scalar_model.noise, 3, 30,
                                    -10.0, T_range=range(1, 61))
        for i, T in enumerate(trace.times):
            if 3 <= T < 30:
                assert trace.expected_y[i] == 0.0
                assert trace.regimes[i] == "pre"

    def test_window_correction_hand_value(self, scalar_ss, scalar_model):
        # at T = k1 the robust correction is M_N * map(e); M_3 for the
        # scalar model is (phi^-4 + phi^-2 + 1)^-1, map(e) = 6e/(3+e^2)
        trace = outlier_expectation(scalar_ss, scalar_model.noise, 3, 30,
                                    -10.0, T_range=[30])
        phi = 0.85
        M3 = 1.0 / (phi**-4 + phi**-2 + 1.0)
        w = 6.0 * -10.0 / (3.0 + 100.0)
        assert trace.expected_y[0] == pytest.approx(M3 * w, rel=1e-12)
        assert trace.expected_y_gaussian[0] == pytest.approx(M3 * -10.0,
                                                             rel=1e-12)

    def test_correction_active_only_inside_window(self, scalar_ss,
                                                  scalar_model):
        trace = outlier_expectation(scalar_ss, scalar_model.noise, 3, 30,
                                    -10.0, T_range=range(28, 40))
        # outside the window the expectation is the pure feed-through tail
        for i, T in enumerate(trace.times):
            tail = mean_s(scalar_ss, np.zeros(45), T, k1=30, e_k1=-10.0)[0]
            if T < 30 or T > 32:
                assert trace.expected_y[i] == pytest.approx(tail, abs=1e-14)
            else:
                assert trace.regimes[i] == "window"
                assert trace.expected_y[i] != pytest.approx(tail, abs=1e-6)

    def test_bounded_robust_vs_linear_gaussian_scaling(self, scalar_ss,
                                                       scalar_model):
        # the robust window response saturates in the outlier size, the
        # least-squares variant scales linearly; the state feed-through
        # H E(s) is shared and linear for both (the plant itself is hit)
        peaks_r, peaks_g = [], []
        for mag in (10.0, 100.0, 1000.0):
            trace = outlier_expectation(scalar_ss, scalar_model.noise, 3, 30,
                                        -mag, T_range=range(25, 45))
            peaks_r.append(np.nanmax(np.abs(trace.correction)))
            peaks_g.append(np.nanmax(np.abs(trace.correction_gaussian)))
            np.testing.assert_allclose(
                trace.expected_y, trace.mean_feedthrough + trace.correction,
                atol=1e-12)
        # bound: max window projection times the transform supremum
        g = compute_gains(scalar_ss, 3)
        proj = max(abs(float(g.M_N[0] @ r)) for r in g.rows_neg)
        bound = proj * scalar_model.noise.psi_transform_bound()
        assert all(p <= bound + 1e-12 for p in peaks_r)
        assert peaks_r[2] < peaks_r[0]          # transform decays past sigma*sqrt(nu)
        assert peaks_g[1] == pytest.approx(10 * peaks_g[0], rel=1e-9)
        assert peaks_g[2] == pytest.approx(100 * peaks_g[0], rel=1e-9)

    def test_undefined_before_warm_up(self, scalar_ss, scalar_model):
        trace = outlier_expectation(scalar_ss, scalar_model.noise, 3, 2,
                                    -5.0, T_range=[1, 2, 3])
        assert math.isnan(trace.expected_y[0])
        assert math.isnan(trace.expected_y[1])
        assert not math.isnan(trace.expected_y[2])
