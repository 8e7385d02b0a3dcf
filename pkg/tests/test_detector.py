import math

import numpy as np
import pytest
from scipy import stats

from consensus_detect import _kernel_py, kernel
from consensus_detect.detector import (
    ConfigError, ExponentEstimate, InsufficientTrialsError, PairingError, SimConfig,
    TrialBatchResult, _run, compare_theory, estimate_exponent, monte_carlo_error,
    run_trial, trial_draws,
)
from consensus_detect.exponents import ConnectivityRate, Ensemble, analyze
from consensus_detect.models import (DiscreteModel, GaussianModel, Hypothesis, LaplaceModel,
                                     llr_moments)
from consensus_detect.network import (LinkFailureModel, Topology, build_geometric_graph,
                                      build_regular_graph, explicit_topology,
                                      metropolis_matrices)

FIVE_POINT = DiscreteModel((0.01, 0.01, 0.01, 0.01, 0.96), (0.2, 0.2, 0.2, 0.2, 0.2))


def complete_graph(n):
    return explicit_topology(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def unrolled(config, hyp, trial):
    """x(k) = (1/k) sum_t W(k)...W(t) L(t), evaluated directly from the draws."""
    online, llr = trial_draws(config, hyp, trial)
    ws = metropolis_matrices(config.network.topology, online.astype(bool))
    n = config.ensemble.n
    out = []
    for k in config.checkpoints:
        acc = np.zeros(n)
        for t in range(1, k + 1):
            phi = np.eye(n)
            for s in range(t, k + 1):
                phi = ws[s - 1] @ phi
            acc += phi @ llr[t - 1]
        out.append(acc / k)
    return np.array(out)


def small_config(**kw):
    base = dict(
        ensemble=Ensemble.homogeneous(GaussianModel(0.5, 1.0), 5),
        network=LinkFailureModel(build_geometric_graph(5, 0.6, 1), 0.6),
        gamma=0.0, horizon=20, trials_per_hypothesis=200, master_seed=9,
        checkpoints=(10, 20))
    base.update(kw)
    return SimConfig(**base)


class TestSimConfig:
    def test_validation(self):
        with pytest.raises(ConfigError, match="gamma"):
            small_config(gamma=5.0)
        with pytest.raises(ConfigError, match="horizon"):
            small_config(horizon=15)
        with pytest.raises(ConfigError, match="increasing"):
            small_config(checkpoints=(20, 10))
        with pytest.raises(ConfigError):
            small_config(trials_per_hypothesis=0)
        with pytest.raises(ConfigError, match="nodes"):
            small_config(network=LinkFailureModel(build_regular_graph(6, 2), 0.5))
        with pytest.raises(ConfigError, match="seed"):
            small_config(master_seed=-1)


class TestRecursion:
    def test_single_sensor_running_mean(self):
        cfg = SimConfig(Ensemble.homogeneous(LaplaceModel(0.4, 1.0), 1),
                        LinkFailureModel(Topology(1, ()), 1.0), 0.0, 30, 1, 0, (1, 7, 30))
        _, llr = trial_draws(cfg, Hypothesis.H1, 3)
        states = run_trial(cfg, Hypothesis.H1, 3)
        for st in states:
            assert st.x[0] == pytest.approx(llr[:st.k, 0].mean(), abs=1e-13)

    def test_two_nodes_agree(self):
        cfg = SimConfig(Ensemble.homogeneous(GaussianModel(1.0, 1.0), 2),
                        LinkFailureModel(complete_graph(2), 1.0), 0.0, 10, 1, 0,
                        tuple(range(1, 11)))
        for st in run_trial(cfg, Hypothesis.H0, 0):
            assert st.x[0] == st.x[1]

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_unrolled_products(self, seed):
        cfg = SimConfig(Ensemble.homogeneous(FIVE_POINT, 5),
                        LinkFailureModel(build_geometric_graph(5, 0.6, seed), 0.5),
                        0.0, 50, 1, seed, tuple(range(1, 51)))
        x = np.array([s.x for s in run_trial(cfg, Hypothesis.H0, seed)])
        np.testing.assert_allclose(x, unrolled(cfg, Hypothesis.H0, seed), rtol=0, atol=1e-10)

    def test_heterogeneous_ensemble(self):
        ens = Ensemble((GaussianModel(0.5, 1.0), LaplaceModel(0.5, 1.0), FIVE_POINT))
        cfg = SimConfig(ens, LinkFailureModel(complete_graph(3), 0.7), 0.0, 12, 1, 4, (3, 12))
        x = np.array([s.x for s in run_trial(cfg, Hypothesis.H1, 2)])
        np.testing.assert_allclose(x, unrolled(cfg, Hypothesis.H1, 2), atol=1e-12)
        _, llr = trial_draws(cfg, Hypothesis.H1, 2)
        assert set(np.unique(llr[:, 2])) <= set(FIVE_POINT.llr_values.tolist())

    def test_backends_bit_identical(self):
        cfg = small_config()
        a = _run(cfg, Hypothesis.H0, range(40), backend=_kernel_py.run_batch)
        b = _run(cfg, Hypothesis.H0, range(40), backend=kernel.run_batch)
        np.testing.assert_array_equal(a, b)

    def test_trial_streams_are_independent_of_batching(self):
        cfg = small_config()
        together = _run(cfg, Hypothesis.H1, range(6))
        alone = np.stack([_run(cfg, Hypothesis.H1, [t])[0] for t in range(6)])
        np.testing.assert_array_equal(together, alone)

    def test_mean_tracks_llr_mean(self):
        model = LaplaceModel(0.5, 1.0)
        cfg = small_config(ensemble=Ensemble.homogeneous(model, 5), horizon=40,
                           checkpoints=(40,))
        x = _run(cfg, Hypothesis.H1, range(2000))[:, 0, :]
        g1 = llr_moments(model).gamma1
        se = x.std(axis=0) / math.sqrt(x.shape[0])
        assert np.all(np.abs(x.mean(axis=0) - g1) < 4 * se)


class TestMonteCarlo:
    def test_single_sample_gaussian_tail(self):
        m = GaussianModel(1.0, 1.0)
        cfg = SimConfig(Ensemble.homogeneous(m, 1), LinkFailureModel(Topology(1, ()), 1.0),
                        0.0, 1, 20000, 3, (1,))
        res = monte_carlo_error(cfg)
        exact = stats.norm.sf(0.5)  # P(L >= 0 | H0) = Q(m / (2 sigma))
        se = math.sqrt(exact * (1 - exact) / 20000)
        assert abs(res.alpha[0, 0] - exact) < 4 * se
        assert abs(res.beta[0, 0] - exact) < 4 * se

    def test_threshold_below_support(self):
        cfg = small_config()
        object.__setattr__(cfg, "gamma", -1e9)  # bypass validation to probe the counting rule
        res = monte_carlo_error(cfg)
        np.testing.assert_array_equal(res.alpha, 1.0)
        np.testing.assert_array_equal(res.beta, 0.0)

    def test_pe_combines_priors(self):
        cfg = small_config(ensemble=Ensemble.homogeneous(GaussianModel(0.5, 1.0), 5, pi0=0.3))
        res = monte_carlo_error(cfg)
        np.testing.assert_allclose(res.pe, 0.3 * res.alpha + 0.7 * res.beta, atol=1e-12)
        assert np.all((res.pe >= 0) & (res.pe <= 1))
        assert res.counts == 200

    def test_thread_count_does_not_matter(self):
        cfg = small_config(trials_per_hypothesis=1234)
        a = monte_carlo_error(cfg, threads=1)
        b = monte_carlo_error(cfg, threads=3)
        np.testing.assert_array_equal(a.false_alarms, b.false_alarms)
        np.testing.assert_array_equal(a.misses, b.misses)

    def test_env_thread_fallback(self, monkeypatch):
        from consensus_detect.detector import default_threads
        monkeypatch.setenv("CONSENSUS_DETECT_THREADS", "4")
        assert default_threads() == 4
        monkeypatch.setenv("CONSENSUS_DETECT_THREADS", "junk")
        assert default_threads() == 1

    def test_standard_error_scaling(self):
        m = GaussianModel(1.0, 1.0)
        spread = {}
        for trials in (400, 1600):
            vals = []
            for seed in range(40):
                cfg = SimConfig(Ensemble.homogeneous(m, 1), LinkFailureModel(Topology(1, ()), 1.0),
                                0.0, 1, trials, seed, (1,))
                vals.append(monte_carlo_error(cfg).alpha[0, 0])
            spread[trials] = np.std(vals, ddof=1)
        assert 1.4 < spread[400] / spread[1600] < 2.9

    def test_identical_sensors_on_complete_graph(self):
        cfg = SimConfig(Ensemble.homogeneous(GaussianModel(0.6, 1.0), 4),
                        LinkFailureModel(complete_graph(4), 1.0), 0.0, 20, 3000, 1, (10, 20))
        est = estimate_exponent(monte_carlo_error(cfg), 10, 20)
        s = est.per_sensor_slope
        assert np.max(s) <= 1.05 * np.min(s)


class TestExponentEstimate:
    def test_geometric_curve(self):
        cps = (10, 25, 40)
        pe = np.exp(-0.13 * np.array(cps, float))
        res = TrialBatchResult(cps, np.tile(pe, (3, 1)), np.tile(pe, (3, 1)), 1, 0.5)
        est = estimate_exponent(res, 10, 40)
        np.testing.assert_allclose(est.per_sensor_slope, 0.13, atol=1e-14)
        assert est.network_average == pytest.approx(0.13, abs=1e-14)

    def test_zero_estimate_names_sensor(self):
        fa = np.array([[5, 2], [5, 0]])
        mi = np.array([[5, 1], [5, 0]])
        res = TrialBatchResult((40, 60), fa, mi, 100, 0.5)
        with pytest.raises(InsufficientTrialsError, match="sensor 1.*k=60"):
            estimate_exponent(res)

    def test_window_checks(self):
        res = TrialBatchResult((40, 60), np.ones((1, 2)), np.ones((1, 2)), 10, 0.5)
        with pytest.raises(ValueError):
            estimate_exponent(res, 60, 40)
        with pytest.raises(ValueError, match="checkpoints"):
            estimate_exponent(res, 30, 60)


class TestCompareTheory:
    def test_pairing_errors(self):
        rep = analyze(Ensemble.homogeneous(GaussianModel(1, 1), 3), ConnectivityRate(1.0))
        with pytest.raises(PairingError):
            compare_theory(rep, ExponentEstimate(np.array([]), float("nan"), 1, 2))
        with pytest.raises(PairingError):
            compare_theory(rep, ExponentEstimate(np.ones(4), 1.0, 1, 2))

    def test_record(self):
        rep = analyze(Ensemble.homogeneous(GaussianModel(1, 1), 2), ConnectivityRate(0.5))
        est = ExponentEstimate(np.array([0.2, 0.3]), 0.25, 10, 20)
        c = compare_theory(rep, est)
        assert c.rel_deviation == pytest.approx((0.25 - rep.bound) / rep.bound)
        assert c.regime == ("optimal" if rep.optimal_regime else "sub_threshold")
        assert set(c.as_dict()) == {"log_r_abs", "bound", "slope", "rel_deviation", "regime"}

    def test_bound_is_lower_bound_below_threshold(self):
        model = GaussianModel(0.6, 1.0)
        topo = build_regular_graph(6, 2)
        p = 0.15
        conn = ConnectivityRate(-2 * math.log1p(-p))
        rep = analyze(Ensemble.homogeneous(model, 6), conn, gamma=0.0)
        assert not rep.optimal_regime
        cfg = SimConfig(Ensemble.homogeneous(model, 6), LinkFailureModel(topo, p), 0.0, 30,
                        4000, 21, (10, 30))
        est = estimate_exponent(monte_carlo_error(cfg), 10, 30)
        c = compare_theory(rep, est)
        assert c.slope >= 0.85 * c.bound
