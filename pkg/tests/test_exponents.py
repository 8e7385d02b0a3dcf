import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from consensus_detect.exponents import (
    ConnectivityRate, DomainError, Ensemble, analyze, binary_simplified_threshold,
    bound_curve, breakpoints, delta, exponent_bounds, exponent_bounds_piecewise,
    gamma_grid, hetero_bounds, hetero_optimal_threshold, hetero_threshold,
    optimal_threshold, optimality_threshold,
)
from consensus_detect.models import (
    DiscreteModel, GaussianModel, Hypothesis, LaplaceModel, binary_model, chernoff,
    llr_moments, lmgf, rate_function,
)

FIVE_POINT = DiscreteModel((0.01, 0.01, 0.01, 0.01, 0.96), (0.2, 0.2, 0.2, 0.2, 0.2))
R04 = ConnectivityRate.from_r(0.4)


class TestConnectivityRate:
    def test_conversions(self):
        assert ConnectivityRate.from_r(0.25).log_r_abs == pytest.approx(math.log(4))
        assert ConnectivityRate.from_r(0.0).log_r_abs == math.inf
        assert ConnectivityRate(math.inf).r == 0.0
        with pytest.raises(DomainError):
            ConnectivityRate(-0.1)
        with pytest.raises(DomainError):
            ConnectivityRate.from_r(1.5)


class TestDelta:
    def test_at_zero(self):
        for m in (GaussianModel(1, 1), FIVE_POINT):
            assert delta(m, Hypothesis.H0, 0.0, 3, R04) == pytest.approx(-R04.log_r_abs, abs=1e-15)

    def test_gaussian_quadratic(self):
        m, n, lam = GaussianModel(0.7, 1.1), 3, 0.1
        expected = m.k * n * (n - 1) * lam ** 2 - R04.log_r_abs
        assert delta(m, Hypothesis.H0, lam, n, R04) == pytest.approx(expected, abs=1e-12)

    def test_five_point_sign_change(self):
        vals = [delta(FIVE_POINT, Hypothesis.H0, x, 3, R04) for x in np.linspace(0, 2, 201)]
        assert min(vals) < 0 < max(vals)


class TestBreakpoints:
    @pytest.mark.parametrize("n,r", [(3, 0.4), (10, 0.2), (20, 0.8)])
    def test_gaussian_closed_form(self, n, r):
        m = GaussianModel(0.5, 1.0)
        conn = ConnectivityRate.from_r(r)
        bp = breakpoints(m, n, conn)
        expected = math.sqrt(conn.log_r_abs / (m.k * n * (n - 1)))
        assert bp.lambda0_s == pytest.approx(expected, abs=1e-10)
        assert bp.lambda1_s == pytest.approx(-expected, abs=1e-10)

    @pytest.mark.parametrize("model", [GaussianModel(1, 1), LaplaceModel(1, 1), LaplaceModel(0.2, 1)])
    def test_symmetric_mirror(self, model):
        bp = breakpoints(model, 5, R04)
        assert bp.lambda1_s == pytest.approx(-bp.lambda0_s, abs=1e-9)
        assert bp.gamma1_plus == pytest.approx(-bp.gamma0_minus, abs=1e-8)
        assert bp.gamma1_minus == pytest.approx(-bp.gamma0_plus, abs=1e-8)

    def test_five_point_residual_and_order(self):
        bp = breakpoints(FIVE_POINT, 3, R04)
        assert abs(delta(FIVE_POINT, Hypothesis.H0, bp.lambda0_s, 3, R04)) < 1e-9
        assert abs(delta(FIVE_POINT, Hypothesis.H1, bp.lambda1_s, 3, R04)) < 1e-9
        assert bp.gamma0_minus <= bp.gamma0_plus
        assert bp.gamma1_minus <= bp.gamma1_plus
        # frozen from an independent evaluation
        assert bp.lambda0_s == pytest.approx(0.30345, abs=1e-5)
        assert bp.lambda1_s == pytest.approx(-0.25729, abs=1e-5)

    def test_requires_finite_positive_rate(self):
        with pytest.raises(DomainError):
            breakpoints(FIVE_POINT, 3, ConnectivityRate(0.0))
        with pytest.raises(DomainError):
            breakpoints(FIVE_POINT, 3, ConnectivityRate(math.inf))

    def test_no_sign_change_is_degenerate(self):
        # Delta_0 of a Laplace model grows only linearly; a huge |log r| never binds
        bp = breakpoints(LaplaceModel(0.2, 1.0), 3, ConnectivityRate(1e3))
        assert bp.degenerate0 and bp.lambda0_s == math.inf


class TestExponentBounds:
    def test_domain(self):
        g0, g1 = llr_moments(FIVE_POINT)
        with pytest.raises(DomainError):
            exponent_bounds(FIVE_POINT, 3, R04, g0 - 0.1)
        with pytest.raises(DomainError):
            exponent_bounds(FIVE_POINT, 3, R04, g1)

    def test_vanishes_at_mean(self):
        g0, g1 = llr_moments(FIVE_POINT)
        b0, b1 = exponent_bounds(FIVE_POINT, 3, R04, g0 + 1e-9)
        assert b0 < 1e-7
        b0, b1 = exponent_bounds(FIVE_POINT, 3, R04, g1 - 1e-9)
        assert b1 < 1e-7

    def test_five_point_piecewise_agrees(self):
        grid = np.linspace(*llr_moments(FIVE_POINT), 103)[1:-1]
        bp = breakpoints(FIVE_POINT, 3, R04)
        for g in grid:
            np.testing.assert_allclose(exponent_bounds(FIVE_POINT, 3, R04, g),
                                       exponent_bounds_piecewise(FIVE_POINT, 3, R04, g, bp),
                                       rtol=0, atol=1e-7)

    def test_dense_grid_oracle(self):
        n, c = 3, R04.log_r_abs
        f = lambda x: lmgf(FIVE_POINT, 0, x)
        for g in (-1.0, 0.0, 0.068, 1.5):
            b0, b1 = exponent_bounds(FIVE_POINT, n, R04, g)
            lam = np.linspace(0.0, 1.0, 100001)
            ref0 = np.max(n * g * lam - np.maximum(n * f(lam), f(n * lam) - c))
            lam1 = -lam
            ref1 = np.max(n * g * lam1 - np.maximum(n * f(lam1 + 1), f(n * lam1 + 1) - c))
            # a grid can only undershoot a maximum, by O(h) at the kink
            assert ref0 - 1e-12 <= b0 <= ref0 + 1e-4
            assert ref1 - 1e-12 <= b1 <= ref1 + 1e-4

    def test_saturation_gaussian(self):
        m, n = GaussianModel(0.2, 1.0), 20
        thr = optimality_threshold(m, n)
        b0, b1 = exponent_bounds(m, n, ConnectivityRate(thr + 0.01), 0.0)
        nc = n * chernoff(m).c_ind
        assert min(b0, b1) == pytest.approx(nc, abs=1e-7)

    def test_no_failures_is_centralized(self):
        b0, b1 = exponent_bounds(FIVE_POINT, 3, ConnectivityRate(math.inf), 0.2)
        assert b0 == pytest.approx(3 * rate_function(FIVE_POINT, Hypothesis.H0, 0.2), abs=1e-9)
        assert b1 == pytest.approx(3 * rate_function(FIVE_POINT, Hypothesis.H1, 0.2), abs=1e-9)

    @pytest.mark.parametrize("model", [GaussianModel(1, 1), LaplaceModel(1, 1), FIVE_POINT])
    @pytest.mark.parametrize("r", [0.2, 0.4, 0.8])
    def test_monotone_in_gamma(self, model, r):
        ens = Ensemble.homogeneous(model, 3)
        curve = bound_curve(ens, ConnectivityRate.from_r(r), gamma_grid(ens))
        assert np.all(np.diff(curve[:, 1]) >= -1e-10)
        assert np.all(np.diff(curve[:, 2]) <= 1e-10)
        assert np.all(curve[:, 1:3] > 0)

    @settings(max_examples=40, deadline=None)
    @given(c1=st.floats(0.01, 5.0), c2=st.floats(0.01, 5.0), t=st.floats(0.05, 0.95))
    def test_monotone_in_connectivity(self, c1, c2, t):
        lo, hi = sorted((c1, c2))
        g0, g1 = llr_moments(FIVE_POINT)
        g = g0 + t * (g1 - g0)
        a = exponent_bounds(FIVE_POINT, 3, ConnectivityRate(lo), g)
        b = exponent_bounds(FIVE_POINT, 3, ConnectivityRate(hi), g)
        assert b[0] >= a[0] - 1e-9 and b[1] >= a[1] - 1e-9


class TestOptimalThreshold:
    @pytest.mark.parametrize("model", [GaussianModel(1, 1), LaplaceModel(1, 1)])
    @pytest.mark.parametrize("r", [0.1, 0.5, 0.9])
    def test_symmetric_is_zero(self, model, r):
        assert optimal_threshold(model, 5, ConnectivityRate.from_r(r)) == 0.0

    def test_five_point(self):
        gs = optimal_threshold(FIVE_POINT, 3, R04)
        b0, b1 = exponent_bounds(FIVE_POINT, 3, R04, gs)
        assert abs(b0 - b1) < 1e-7
        assert gs == pytest.approx(0.0682777, abs=1e-6)
        assert b0 == pytest.approx(1.15069, abs=1e-5)

    def test_maximizes_min_bound(self):
        gs = optimal_threshold(FIVE_POINT, 3, R04)
        best = min(exponent_bounds(FIVE_POINT, 3, R04, gs))
        ens = Ensemble.homogeneous(FIVE_POINT, 3)
        curve = bound_curve(ens, R04, gamma_grid(ens))
        assert np.all(curve[:, 3] <= best + 1e-9)

    def test_single_sign_change(self):
        ens = Ensemble.homogeneous(FIVE_POINT, 3)
        curve = bound_curve(ens, R04, gamma_grid(ens))
        diff = curve[:, 2] - curve[:, 1]
        assert np.count_nonzero(np.diff(np.sign(diff)) != 0) == 1

    def test_rejects_zero_rate(self):
        with pytest.raises(DomainError):
            optimal_threshold(FIVE_POINT, 3, ConnectivityRate(0.0))


def laplace_lmgf_by_quadrature(m, b, lam):
    g = lambda y: np.exp(-(lam * abs(y - m) + (1 - lam) * abs(y)) / b) / (2 * b)
    lo, hi = sorted((0.0, m))
    return math.log(sum(integrate.quad(g, a, c, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
                        for a, c in [(-np.inf, lo), (lo, hi), (hi, np.inf)]))


class TestOptimalityThreshold:
    @pytest.mark.parametrize("n", [3, 10, 20])
    def test_gaussian(self, n):
        m = GaussianModel(0.6, 1.4)
        assert optimality_threshold(m, n) == pytest.approx(n * (n - 1) * chernoff(m).c_ind, abs=1e-8)

    def test_gaussian_desk_parameters(self):
        assert optimality_threshold(GaussianModel(0.2, 1.0), 20) == pytest.approx(1.9, abs=1e-6)

    def test_laplace_desk_parameters(self):
        thr = optimality_threshold(LaplaceModel(0.2, 1.0), 20)
        # symmetric model: thr = |N L(1/2)| + |L(N/2)| with L evaluated by quadrature
        ref = (20 * abs(laplace_lmgf_by_quadrature(0.2, 1.0, 0.5))
               + abs(laplace_lmgf_by_quadrature(0.2, 1.0, 10.0)))
        assert thr == pytest.approx(ref, rel=1e-8)
        assert 1.22 <= thr <= 1.32

    def test_five_point(self):
        assert optimality_threshold(FIVE_POINT, 3) == pytest.approx(3.2455, abs=1e-4)


class TestBinarySimplified:
    def test_values(self):
        assert binary_simplified_threshold(0.1, 0.12, 32) == pytest.approx(32 * math.log(10))
        assert binary_simplified_threshold(0.5, 0.5 + 1e-12, 7) == pytest.approx(7 * math.log(2))
        assert binary_simplified_threshold(0.5, 0.9, 4) == pytest.approx(4 * math.log(10))

    def test_ordering(self):
        with pytest.raises(DomainError):
            binary_simplified_threshold(0.2, 0.1, 3)

    def test_is_sufficient(self):
        m = binary_model(0.1, 0.12)
        assert binary_simplified_threshold(0.1, 0.12, 8) >= optimality_threshold(m, 8)


class TestHeterogeneous:
    def test_homogeneous_reduction(self):
        for model in (FIVE_POINT, LaplaceModel(0.2, 1.0)):
            ens = Ensemble.homogeneous(model, 4)
            g0, g1 = llr_moments(model)
            for g in np.linspace(g0, g1, 7)[1:-1]:
                np.testing.assert_allclose(hetero_bounds(ens, R04, g),
                                           exponent_bounds(model, 4, R04, g), atol=1e-9)
            thr, ctot = hetero_threshold(ens)
            assert thr == pytest.approx(optimality_threshold(model, 4), abs=1e-9)
            assert ctot == pytest.approx(4 * chernoff(model).c_ind, abs=1e-12)

    def test_two_gaussians_against_grid(self):
        ens = Ensemble((GaussianModel(1.0, 1.0), GaussianModel(2.0, 1.0)))
        conn = ConnectivityRate(5.0)
        n, c = 2, 5.0
        ks = np.array([0.5, 2.0])
        lmgf_i = lambda x: -np.multiply.outer(x * (1 - x), ks)
        lam = np.linspace(0, 1, 100001)
        ref0 = np.max(-np.maximum(lmgf_i(lam).sum(-1), lmgf_i(n * lam).max(-1) - c))
        lam1 = -lam
        ref1 = np.max(-np.maximum(lmgf_i(lam1 + 1).sum(-1), lmgf_i(n * lam1 + 1).max(-1) - c))
        b0, b1 = hetero_bounds(ens, conn, 0.0)
        assert b0 == pytest.approx(ref0, abs=1e-6)
        assert b1 == pytest.approx(ref1, abs=1e-6)

    def test_vanishes_near_mean(self):
        ens = Ensemble((GaussianModel(1.0, 1.0), LaplaceModel(0.5, 1.0), FIVE_POINT))
        g0, _ = ens.gamma_bar()
        assert hetero_bounds(ens, R04, g0 + 1e-9)[0] < 1e-7

    def test_mixed_gaussian_ctot(self):
        ms = [0.3, 1.0, 2.0]
        ens = Ensemble(tuple(GaussianModel(m, 1.5) for m in ms))
        thr, ctot = hetero_threshold(ens)
        assert ctot == pytest.approx(sum(m * m / (8 * 1.5 ** 2) for m in ms), abs=1e-12)
        assert thr >= 0

    def test_requires_positive_rate(self):
        ens = Ensemble((GaussianModel(1.0, 1.0), GaussianModel(2.0, 1.0)))
        with pytest.raises(DomainError):
            hetero_bounds(ens, ConnectivityRate(0.0), 0.0)

    def test_hetero_optimal_threshold_balances(self):
        ens = Ensemble((FIVE_POINT, binary_model(0.2, 0.4), FIVE_POINT))
        gs = hetero_optimal_threshold(ens, R04)
        b0, b1 = hetero_bounds(ens, R04, gs)
        assert abs(b0 - b1) < 1e-7


class TestSimplexBound:
    @settings(max_examples=300, deadline=None)
    @given(n=st.sampled_from([2, 5, 10]), lam=st.floats(-1.0, 1.0),
           seed=st.integers(0, 2 ** 32 - 1),
           name=st.sampled_from(["gauss", "laplace", "five_point"]))
    def test_sum_over_simplex(self, n, lam, seed, name):
        model = {"gauss": GaussianModel(1.0, 1.0), "laplace": LaplaceModel(1.0, 1.0),
                 "five_point": FIVE_POINT}[name]
        a = np.random.default_rng(seed).dirichlet(np.ones(n))
        lhs = float(np.sum(lmgf(model, 0, n * lam * a)))
        assert lhs <= lmgf(model, 0, n * lam) + 1e-12


class TestAnalyze:
    def test_homogeneous_report(self):
        ens = Ensemble.homogeneous(GaussianModel(0.2, 1.0), 20)
        rep = analyze(ens, ConnectivityRate(1.0))
        assert rep.gamma == rep.gamma_star == 0.0
        assert rep.bound == min(rep.b0, rep.b1)
        assert rep.bound <= rep.c_total + 1e-9
        assert rep.optimal_regime is False
        assert rep.thr == pytest.approx(1.9, abs=1e-9)
        assert rep.as_dict()["c_ind"] == pytest.approx(0.005)

    def test_paths_agree(self):
        model = LaplaceModel(0.2, 1.0)
        for c in (0.3, 1.0, 3.0):
            conn = ConnectivityRate(c)
            hom = exponent_bounds(model, 6, conn, 0.01)
            het = hetero_bounds(Ensemble.homogeneous(model, 6), conn, 0.01)
            np.testing.assert_allclose(hom, het, atol=1e-9)

    def test_perfect_network_is_optimal(self):
        ens = Ensemble.homogeneous(FIVE_POINT, 3)
        rep = analyze(ens, ConnectivityRate.from_r(0.0))
        assert rep.optimal_regime
        assert rep.bound == pytest.approx(rep.c_total, abs=1e-9)

    def test_heterogeneous(self):
        ens = Ensemble((FIVE_POINT, binary_model(0.2, 0.4)))
        rep = analyze(ens, R04, gamma=0.1)
        assert rep.extra["homogeneous"] is False
        assert rep.gamma == 0.1
        assert rep.bound <= rep.c_total + 1e-9
