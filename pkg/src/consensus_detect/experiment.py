"""Orchestration behind the command line: analysis, simulation and sweeps."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .config import ConfigError, ExperimentConfig
from .detector import (ExponentEstimate, InsufficientTrialsError, SimConfig,
                       TrialBatchResult, compare_theory, estimate_exponent,
                       monte_carlo_error)
from .exponents import ConnectivityRate, ExponentReport, analyze, bound_curve, gamma_grid
from .network import (EstimationError, LinkFailureModel, estimate_r_empirical,
                      estimate_r_spectral, regular_network_r)

__all__ = ["ConnectivityResolution", "resolve_connectivity", "run_analysis",
           "run_simulation", "run_sweep", "write_csv", "SWEEP_COLUMNS"]

# spawn-key tags keeping the estimator streams apart from the trial streams
_TAG_EMPIRICAL = 2
_TAG_SPECTRAL = 3


@dataclass
class ConnectivityResolution:
    """The ``|log r|`` used downstream plus every estimate that was made."""

    rate: ConnectivityRate
    method: str
    closed_form: float | None = None
    spectral: float | None = None
    empirical: float | None = None
    empirical_stderr: float | None = None
    empirical_saturated: bool = False
    notes: list[str] = field(default_factory=list)


def resolve_connectivity(cfg: ExperimentConfig, link: LinkFailureModel | None,
                         index: int = 0) -> ConnectivityResolution:
    """Connectivity for one network setting.

    Preference order: closed form (regular graphs with a common link
    probability), then the Monte Carlo slope, then the spectral bound.
    A saturated slope estimate (decay too fast to resolve) is taken as
    ``+inf``.
    """
    if link is None:
        rate = cfg.fixed_connectivity()
        if rate is None:
            raise ConfigError("network", "needs a topology, log_r_abs or r")
        return ConnectivityResolution(rate, "given")
    res = ConnectivityResolution(ConnectivityRate(0.0), "")
    topo = link.topology
    if topo.kind == "regular" and not isinstance(link.p_online, tuple):
        res.closed_form = regular_network_r(topo.params["d"], float(link.p_online)).log_r_abs
    opts = cfg.connectivity
    spec = estimate_r_spectral(link, int(opts["spectral_samples"]),
                               np.random.SeedSequence(cfg.seed, spawn_key=(_TAG_SPECTRAL, index)))
    res.spectral = spec.log_r_abs
    try:
        emp = estimate_r_empirical(
            link, float(opts["epsilon"]), int(opts["horizon"]), int(opts["trials"]),
            np.random.SeedSequence(cfg.seed, spawn_key=(_TAG_EMPIRICAL, index)))
    except EstimationError as exc:
        res.notes.append(f"empirical: {exc}")
    else:
        res.empirical = emp.log_r_abs
        res.empirical_stderr = emp.stderr
        res.empirical_saturated = emp.saturated
    if res.closed_form is not None:
        res.method, value = "closed_form_regular", res.closed_form
    elif res.empirical is not None:
        res.method, value = "empirical_slope", res.empirical
    else:
        res.method, value = "spectral_bound", res.spectral
    res.rate = ConnectivityRate(value)
    return res


def run_analysis(cfg: ExperimentConfig, link: LinkFailureModel | None = None,
                 index: int = 0) -> tuple[ExponentReport, ConnectivityResolution]:
    if link is None:
        link = cfg.link_model()
    conn = resolve_connectivity(cfg, link, index)
    return analyze(cfg.ensemble(), conn.rate, cfg.gamma), conn


def analysis_curves(cfg: ExperimentConfig, rate: ConnectivityRate, points: int = 101) -> np.ndarray:
    ens = cfg.ensemble()
    return bound_curve(ens, rate, gamma_grid(ens, points))


def _needs_connectivity_for_gamma(cfg: ExperimentConfig) -> bool:
    if cfg.gamma != "auto":
        return False
    ens = cfg.ensemble()
    return not (ens.is_homogeneous and ens.models[0].symmetric)


def simulation_gamma(cfg: ExperimentConfig, link: LinkFailureModel, index: int = 0) -> float:
    if cfg.gamma != "auto":
        return float(cfg.gamma)
    if not _needs_connectivity_for_gamma(cfg):
        return 0.0
    report, _ = run_analysis(cfg, link, index)
    return report.gamma_star


def run_simulation(cfg: ExperimentConfig, threads: int | None = None,
                   link: LinkFailureModel | None = None, gamma: float | None = None
                   ) -> tuple[TrialBatchResult, ExponentEstimate]:
    """Monte Carlo error rates and the two-checkpoint slope estimate."""
    if link is None:
        link = cfg.link_model()
    if link is None:
        raise ConfigError("network.topology", "simulation needs an explicit topology")
    if gamma is None:
        gamma = simulation_gamma(cfg, link)
    sim = SimConfig(cfg.ensemble(), link, gamma, cfg.horizon, cfg.trials, cfg.seed,
                    cfg.checkpoints)
    result = monte_carlo_error(sim, threads=threads)
    k1, k2 = cfg.window()
    return result, estimate_exponent(result, k1, k2)


SWEEP_COLUMNS = ["value", "p_online", "log_r_abs", "log_r_method", "log_r_closed_form",
                 "log_r_spectral", "log_r_empirical", "log_r_empirical_stderr", "gamma",
                 "b0", "b1", "bound", "thr", "c_total", "regime", "slope",
                 "rel_deviation", "error"]


def _sweep_point(cfg: ExperimentConfig, index: int, value: float) -> dict[str, Any]:
    row: dict[str, Any] = {c: None for c in SWEEP_COLUMNS}
    row["value"] = value
    param = cfg.sweep["parameter"]
    errors: list[str] = []
    try:
        link = None
        if param == "p_online":
            link = cfg.link_model(value)
        else:
            base = cfg.link_model()
            if base is not None and base.topology.kind == "regular":
                d = base.topology.params["d"]
                link = LinkFailureModel(base.topology, -math.expm1(-value / d))
        if link is not None:
            row["p_online"] = float(link.p_online) if not isinstance(link.p_online, tuple) else None
            conn = resolve_connectivity(cfg, link, index)
            if param == "log_r_abs":
                conn.rate, conn.method = ConnectivityRate(value), "given"
        else:
            conn = ConnectivityResolution(ConnectivityRate(value), "given")
        errors.extend(conn.notes)
        row.update(log_r_abs=conn.rate.log_r_abs, log_r_method=conn.method,
                   log_r_closed_form=conn.closed_form, log_r_spectral=conn.spectral,
                   log_r_empirical=conn.empirical,
                   log_r_empirical_stderr=conn.empirical_stderr)
        report = analyze(cfg.ensemble(), conn.rate, cfg.gamma)
        row.update(gamma=report.gamma, b0=report.b0, b1=report.b1, bound=report.bound,
                   thr=report.thr, c_total=report.c_total,
                   regime="optimal" if report.optimal_regime else "sub_threshold")
        if link is None:
            errors.append("simulation skipped: no topology realizes this |log r|")
        else:
            _, est = run_simulation(cfg, threads=1, link=link, gamma=report.gamma)
            cmp = compare_theory(report, est)
            row.update(slope=cmp.slope, rel_deviation=cmp.rel_deviation)
    except (InsufficientTrialsError, EstimationError, ArithmeticError, ValueError,
            RuntimeError) as exc:
        errors.append(f"{type(exc).__name__}: {exc}")
    row["error"] = "; ".join(errors) if errors else None
    return row


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> list[dict[str, Any]]:
    """One comparison row per sweep value; failures are recorded, not raised.

    Points run in parallel when ``threads > 1``; each point is itself
    sequential, so rows do not depend on the thread count.
    """
    if cfg.sweep is None:
        raise ConfigError("sweep", "the sweep command needs a sweep section")
    values = cfg.sweep["values"]
    if threads <= 1:
        return [_sweep_point(cfg, i, v) for i, v in enumerate(values)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda iv: _sweep_point(cfg, *iv), enumerate(values)))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: str, header: list[str], rows) -> str:
    """Write a header plus rows with locale-independent number formatting."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def prepare_output(prefix: str) -> None:
    """Create the output directory and make sure it is writable."""
    d = os.path.dirname(os.path.abspath(prefix))
    try:
        os.makedirs(d, exist_ok=True)
    except OSError as exc:
        raise ConfigError("output", f"cannot create {d}: {exc.strerror}") from None
    if not os.access(d, os.W_OK):
        raise ConfigError("output", f"{d} is not writable")
