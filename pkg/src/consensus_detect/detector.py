"""Monte Carlo simulation of the distributed consensus+innovations detector.

Every sensor keeps a running statistic ``x_i(k)`` that mixes its neighbours'
statistics through a random Metropolis matrix ``W(k)`` and folds in its own
fresh log-likelihood ratio ``L_i(k)``::

    x(k) = W(k) ((k - 1)/k x(k - 1) + L(k)/k),    x(0) = 0,

and decides H1 when ``x_i(k) >= gamma``.

Reproducibility
---------------
Trial ``t`` under hypothesis ``h`` draws from two independent streams
seeded by ``SeedSequence(master_seed, spawn_key=(h, t, s))``: ``s = 0``
gives the ``(K, E)`` link states, ``s = 1`` the ``(K, N)`` LLR samples.
Results therefore do not depend on how trials are split across threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import kernel
from .exponents import Ensemble, ExponentReport
from .models import Hypothesis
from .network import LinkFailureModel

__all__ = [
    "ConfigError", "InsufficientTrialsError", "PairingError",
    "DetectorState", "SimConfig", "TrialBatchResult", "ExponentEstimate",
    "Comparison", "trial_draws", "run_trial", "monte_carlo_error",
    "estimate_exponent", "compare_theory", "default_threads",
]

CHUNK = 500  # trials per work unit; fixed so results never depend on threads


class ConfigError(ValueError):
    """Invalid simulation configuration."""


class InsufficientTrialsError(RuntimeError):
    """An error-probability estimate is 0 or 1 where a slope needs it interior."""


class PairingError(ValueError):
    """A theoretical report and an empirical estimate do not describe the same setup."""


@dataclass(frozen=True)
class DetectorState:
    k: int
    x: np.ndarray


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines a Monte Carlo run.

    Parameters
    ----------
    ensemble : Ensemble
        Sensor models and prior.
    network : LinkFailureModel
        Topology and link reliabilities; must have ``ensemble.n`` nodes.
    gamma : float
        Decision threshold in nats, strictly between the network-average
        LLR means under H0 and H1.
    horizon : int
        Number of recursion steps ``K``.
    trials_per_hypothesis : int
    master_seed : int
    checkpoints : sequence of int
        Strictly increasing steps at which ``x`` is recorded.
    """

    ensemble: Ensemble
    network: LinkFailureModel
    gamma: float
    horizon: int
    trials_per_hypothesis: int
    master_seed: int
    checkpoints: tuple[int, ...] = (40, 60)

    def __post_init__(self):
        object.__setattr__(self, "checkpoints", tuple(int(c) for c in self.checkpoints))
        self.validate()

    def validate(self) -> None:
        if self.network.n != self.ensemble.n:
            raise ConfigError(f"network has {self.network.n} nodes but the ensemble "
                              f"has {self.ensemble.n} sensors")
        if self.trials_per_hypothesis < 1:
            raise ConfigError("trials_per_hypothesis must be >= 1")
        if not isinstance(self.master_seed, (int, np.integer)) or self.master_seed < 0:
            raise ConfigError("master_seed must be a non-negative integer")
        cps = self.checkpoints
        if not cps:
            raise ConfigError("at least one checkpoint is required")
        if cps[0] < 1 or any(b <= a for a, b in zip(cps, cps[1:])):
            raise ConfigError(f"checkpoints must be strictly increasing and >= 1, got {cps}")
        if self.horizon < cps[-1]:
            raise ConfigError(f"horizon {self.horizon} is shorter than the last "
                              f"checkpoint {cps[-1]}")
        g0, g1 = self.ensemble.gamma_bar()
        if not (g0 < self.gamma < g1) or not math.isfinite(self.gamma):
            raise ConfigError(f"gamma={self.gamma} must lie in ({g0:.6g}, {g1:.6g})")


@dataclass(frozen=True)
class TrialBatchResult:
    """Error-rate estimates with shape ``(N, C)`` (sensor, checkpoint)."""

    checkpoints: tuple[int, ...]
    false_alarms: np.ndarray
    misses: np.ndarray
    counts: int
    pi0: float

    @property
    def alpha(self) -> np.ndarray:
        return self.false_alarms / self.counts

    @property
    def beta(self) -> np.ndarray:
        return self.misses / self.counts

    @property
    def pe(self) -> np.ndarray:
        return self.pi0 * self.alpha + (1.0 - self.pi0) * self.beta

    @property
    def n(self) -> int:
        return self.false_alarms.shape[0]

    def rows(self) -> list[tuple[int, int, float, float, float]]:
        """``(sensor, k, alpha, beta, pe)`` rows, sensor-major."""
        a, b, p = self.alpha, self.beta, self.pe
        return [(i, k, float(a[i, c]), float(b[i, c]), float(p[i, c]))
                for i in range(self.n) for c, k in enumerate(self.checkpoints)]


@dataclass(frozen=True)
class ExponentEstimate:
    per_sensor_slope: np.ndarray
    network_average: float
    k1: int
    k2: int

    def rows(self) -> list[tuple[int, float]]:
        return [(i, float(s)) for i, s in enumerate(self.per_sensor_slope)]


@dataclass(frozen=True)
class Comparison:
    log_r_abs: float
    bound: float
    slope: float
    rel_deviation: float
    regime: str
    extra: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict:
        return {"log_r_abs": self.log_r_abs, "bound": self.bound, "slope": self.slope,
                "rel_deviation": self.rel_deviation, "regime": self.regime}


def default_threads() -> int:
    env = os.environ.get("CONSENSUS_DETECT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _streams(config: SimConfig, hyp: Hypothesis, trial_index: int):
    key = (int(hyp), int(trial_index))
    net = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(int(config.master_seed), spawn_key=key + (0,))))
    obs = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(int(config.master_seed), spawn_key=key + (1,))))
    return net, obs


def trial_draws(config: SimConfig, hyp: Hypothesis, trial_index: int
                ) -> tuple[np.ndarray, np.ndarray]:
    """Link states ``(K, E)`` as uint8 and LLRs ``(K, N)`` for one trial."""
    net, obs = _streams(config, hyp, trial_index)
    k = config.horizon
    probs = config.network.probs
    online = (net.random((k, probs.size)) < probs).astype(np.uint8)
    ens = config.ensemble
    if ens.is_homogeneous:
        llr = ens.models[0]._sample(obs, hyp, (k, ens.n))
    else:
        llr = np.empty((k, ens.n))
        for i, m in enumerate(ens.models):
            llr[:, i] = m._sample(obs, hyp, k)
    return online, np.ascontiguousarray(llr, dtype=np.float64)


def _edge_arrays(config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    ei, ej = config.network.topology.edge_index
    return (np.ascontiguousarray(ei, dtype=np.int64),
            np.ascontiguousarray(ej, dtype=np.int64))


def _run(config: SimConfig, hyp: Hypothesis, indices: Iterable[int], backend=None) -> np.ndarray:
    draws = [trial_draws(config, hyp, t) for t in indices]
    online = np.ascontiguousarray(np.stack([d[0] for d in draws]))
    llr = np.ascontiguousarray(np.stack([d[1] for d in draws]))
    ei, ej = _edge_arrays(config)
    cps = np.asarray(config.checkpoints, dtype=np.int64)
    run = backend if backend is not None else kernel.run_batch
    return run(ei, ej, online, llr, cps)


def run_trial(config: SimConfig, hyp: Hypothesis, trial_index: int) -> list[DetectorState]:
    """Decision vectors of one trial at each checkpoint."""
    x = _run(config, hyp, [trial_index])[0]
    return [DetectorState(k, x[c].copy()) for c, k in enumerate(config.checkpoints)]


def _count_chunk(config: SimConfig, hyp: Hypothesis, lo: int, hi: int, backend) -> np.ndarray:
    x = _run(config, hyp, range(lo, hi), backend)  # (T, C, N)
    if hyp == Hypothesis.H0:
        err = x >= config.gamma
    else:
        err = x < config.gamma
    return err.sum(axis=0, dtype=np.int64).T  # (N, C)


def monte_carlo_error(config: SimConfig, threads: int | None = None,
                      backend=None) -> TrialBatchResult:
    """Per-sensor false-alarm and miss rates at every checkpoint.

    ``threads`` only changes wall time; chunks are fixed-size and their
    integer counts are summed in chunk order.
    """
    threads = default_threads() if threads is None else max(1, int(threads))
    total = config.trials_per_hypothesis
    bounds = [(lo, min(lo + CHUNK, total)) for lo in range(0, total, CHUNK)]
    jobs = [(h, lo, hi) for h in (Hypothesis.H0, Hypothesis.H1) for lo, hi in bounds]

    def work(job):
        return _count_chunk(config, job[0], job[1], job[2], backend)

    if threads == 1:
        parts = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, jobs))
    shape = (config.ensemble.n, len(config.checkpoints))
    fa = np.zeros(shape, dtype=np.int64)
    mi = np.zeros(shape, dtype=np.int64)
    for (h, _, _), part in zip(jobs, parts):
        if h == Hypothesis.H0:
            fa += part
        else:
            mi += part
    return TrialBatchResult(config.checkpoints, fa, mi, total, config.ensemble.pi0)


def estimate_exponent(result: TrialBatchResult, k1: int = 40, k2: int = 60) -> ExponentEstimate:
    """Two-point slope of ``-log Pe_i(k)`` between checkpoints ``k1 < k2``."""
    if not k1 < k2:
        raise ValueError(f"need k1 < k2, got {k1}, {k2}")
    try:
        c1, c2 = result.checkpoints.index(k1), result.checkpoints.index(k2)
    except ValueError:
        raise ValueError(f"k1={k1} and k2={k2} must both be checkpoints "
                         f"{result.checkpoints}") from None
    pe = result.pe
    for i in range(result.n):
        for c, k in ((c1, k1), (c2, k2)):
            if not 0.0 < pe[i, c] < 1.0:
                raise InsufficientTrialsError(
                    f"sensor {i}: estimated error probability at k={k} is {pe[i, c]:g} "
                    f"from {result.counts} trials per hypothesis; increase the trial "
                    "count or use earlier checkpoints")
    slopes = (np.log(pe[:, c1]) - np.log(pe[:, c2])) / (k2 - k1)
    return ExponentEstimate(slopes, float(np.mean(slopes)), k1, k2)


def compare_theory(report: ExponentReport, estimate: ExponentEstimate) -> Comparison:
    """Pair a theoretical bound with an empirical slope."""
    slopes = np.asarray(estimate.per_sensor_slope)
    if slopes.size == 0:
        raise PairingError("empirical estimate is empty")
    if slopes.size != report.n:
        raise PairingError(f"report is for N={report.n} sensors but the estimate has "
                           f"{slopes.size}")
    bound = report.bound
    rel = (estimate.network_average - bound) / bound if bound > 0 else math.inf
    regime = "optimal" if report.optimal_regime else "sub_threshold"
    return Comparison(report.log_r_abs, bound, estimate.network_average, rel, regime,
                      {"k1": estimate.k1, "k2": estimate.k2, "thr": report.thr,
                       "c_total": report.c_total})
