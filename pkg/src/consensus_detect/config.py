"""JSON experiment configuration and run manifests.

A config file looks like::

    {
      "sensors": {"model": {"kind": "gaussian", "m": 0.2, "sigma": 1.0}, "n": 20},
      "network": {"topology": {"kind": "geometric", "n": 20, "radius": 0.4, "seed": 2},
                  "p_online": 0.5},
      "priors": {"pi0": 0.5},
      "gamma": "auto",
      "horizon": 60, "trials": 5000, "checkpoints": [40, 60], "seed": 12345,
      "sweep": {"parameter": "p_online", "values": [0.1, 0.3, 0.5]},
      "output": "out/gauss"
    }

``sensors`` may instead hold ``"models": [...]`` (one entry per sensor).
``network`` may give ``"log_r_abs"`` or ``"r"`` directly instead of a
topology, which is enough for ``analyze`` but not for ``simulate``.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Any

from . import detector
from .exponents import ConnectivityRate, DomainError, Ensemble
from .models import InvalidModelError, model_from_dict
from .network import LinkFailureModel, Topology, TopologyError, topology_from_dict

__all__ = ["ConfigError", "ExperimentConfig", "RunManifest", "load_config",
           "parse_config", "DEFAULT_CONNECTIVITY"]

DEFAULT_CONNECTIVITY = {"epsilon": 0.99, "horizon": 60, "trials": 20000,
                        "spectral_samples": 2000}
SWEEP_PARAMETERS = ("p_online", "log_r_abs")
_TOP_KEYS = {"sensors", "network", "priors", "gamma", "horizon", "trials", "checkpoints",
             "seed", "sweep", "connectivity", "exponent_window", "output"}


class ConfigError(detector.ConfigError):
    """Invalid configuration; ``field`` is a dotted path into the JSON."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


def _int(value, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return value


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class ExperimentConfig:
    sensors: dict
    network: dict
    pi0: float = 0.5
    gamma: float | str = "auto"
    horizon: int = 60
    trials: int = 5000
    checkpoints: tuple[int, ...] = (40, 60)
    seed: int = 0
    sweep: dict | None = None
    connectivity: dict = field(default_factory=lambda: dict(DEFAULT_CONNECTIVITY))
    exponent_window: tuple[int, int] | None = None
    output: str = "out/run"

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        d = {
            "sensors": self.sensors, "network": self.network,
            "priors": {"pi0": self.pi0}, "gamma": self.gamma,
            "horizon": self.horizon, "trials": self.trials,
            "checkpoints": list(self.checkpoints), "seed": self.seed,
            "connectivity": self.connectivity, "output": self.output,
        }
        if self.sweep is not None:
            d["sweep"] = self.sweep
        if self.exponent_window is not None:
            d["exponent_window"] = list(self.exponent_window)
        return d

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    def with_overrides(self, seed: int | None = None, trials: int | None = None,
                       output: str | None = None) -> "ExperimentConfig":
        kw: dict[str, Any] = {}
        if seed is not None:
            kw["seed"] = _int(seed, "--seed", 0)
            if seed >= 2 ** 64:
                raise ConfigError("--seed", "must fit in 64 bits")
        if trials is not None:
            kw["trials"] = _int(trials, "--trials", 1)
        if output is not None:
            kw["output"] = output
        return replace(self, **kw) if kw else self

    # -- object construction -------------------------------------------
    def ensemble(self) -> Ensemble:
        s = self.sensors
        if "models" in s:
            models = [model_from_dict(m) for m in s["models"]]
        else:
            models = [model_from_dict(s["model"])] * s["n"]
        return Ensemble(tuple(models), self.pi0)

    @property
    def n(self) -> int:
        s = self.sensors
        return len(s["models"]) if "models" in s else s["n"]

    def topology(self) -> Topology | None:
        t = self.network.get("topology")
        return None if t is None else topology_from_dict(t)

    def link_model(self, p_online=None) -> LinkFailureModel | None:
        topo = self.topology()
        if topo is None:
            return None
        p = self.network.get("p_online", 1.0) if p_online is None else p_online
        if isinstance(p, list):
            p = tuple(p)
        return LinkFailureModel(topo, p)

    def fixed_connectivity(self) -> ConnectivityRate | None:
        """Connectivity given directly in the config, if any."""
        if "log_r_abs" in self.network:
            return ConnectivityRate(float(self.network["log_r_abs"]))
        if "r" in self.network:
            return ConnectivityRate.from_r(float(self.network["r"]))
        return None

    def window(self) -> tuple[int, int]:
        if self.exponent_window is not None:
            return self.exponent_window
        return self.checkpoints[0], self.checkpoints[-1]


def _check_model(d, path: str):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    try:
        return model_from_dict(d)
    except (InvalidModelError, ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from None


def parse_config(data: dict[str, Any]) -> ExperimentConfig:
    """Validate a decoded JSON document and build an :class:`ExperimentConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("", "top level must be a JSON object")
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")

    sensors = data.get("sensors")
    if not isinstance(sensors, dict):
        raise ConfigError("sensors", "required object")
    if "models" in sensors:
        lst = sensors["models"]
        if not isinstance(lst, list) or not lst:
            raise ConfigError("sensors.models", "expected a non-empty list")
        for i, m in enumerate(lst):
            _check_model(m, f"sensors.models[{i}]")
        sensors = {"models": lst}
        n = len(lst)
    else:
        _check_model(sensors.get("model"), "sensors.model")
        n = _int(sensors.get("n"), "sensors.n", 1)
        sensors = {"model": sensors["model"], "n": n}

    network = data.get("network")
    if not isinstance(network, dict):
        raise ConfigError("network", "required object")
    network = dict(network)
    if "topology" in network:
        try:
            topo = topology_from_dict(network["topology"])
        except (TopologyError, ValueError, TypeError) as exc:
            raise ConfigError("network.topology", str(exc)) from None
        if topo.n != n:
            raise ConfigError("network.topology.n", f"{topo.n} nodes but {n} sensors")
        p = network.setdefault("p_online", 1.0)
        try:
            LinkFailureModel(topo, tuple(p) if isinstance(p, list) else p)
        except (TopologyError, ValueError, TypeError) as exc:
            raise ConfigError("network.p_online", str(exc)) from None
    elif "log_r_abs" in network or "r" in network:
        key = "log_r_abs" if "log_r_abs" in network else "r"
        val = network[key]
        if val == "inf" and key == "log_r_abs":
            val = math.inf
        try:
            (ConnectivityRate(_num(val, f"network.{key}")) if key == "log_r_abs"
             else ConnectivityRate.from_r(_num(val, "network.r")))
        except DomainError as exc:
            raise ConfigError(f"network.{key}", str(exc)) from None
    else:
        raise ConfigError("network", "needs a topology, log_r_abs or r")

    priors = data.get("priors", {"pi0": 0.5})
    pi0 = _num(priors.get("pi0", 0.5) if isinstance(priors, dict) else priors, "priors.pi0")
    if not 0.0 < pi0 < 1.0:
        raise ConfigError("priors.pi0", "must lie in (0, 1)")

    gamma = data.get("gamma", "auto")
    if gamma != "auto":
        gamma = _num(gamma, "gamma")

    horizon = _int(data.get("horizon", 60), "horizon", 1)
    trials = _int(data.get("trials", 5000), "trials", 1)
    cps = data.get("checkpoints", [40, 60])
    if not isinstance(cps, list) or not cps:
        raise ConfigError("checkpoints", "expected a non-empty list")
    cps = tuple(_int(c, f"checkpoints[{i}]", 1) for i, c in enumerate(cps))
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise ConfigError("checkpoints", "must be strictly increasing")
    if horizon < cps[-1]:
        raise ConfigError("horizon", f"{horizon} is shorter than the last checkpoint {cps[-1]}")

    seed = _int(data.get("seed", 0), "seed", 0)
    if seed >= 2 ** 64:
        raise ConfigError("seed", "must fit in 64 bits")

    window = data.get("exponent_window")
    if window is not None:
        if (not isinstance(window, list) or len(window) != 2
                or any(w not in cps for w in window) or window[0] >= window[1]):
            raise ConfigError("exponent_window", "expected [k1, k2], two increasing checkpoints")
        window = (int(window[0]), int(window[1]))

    sweep = data.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict):
            raise ConfigError("sweep", "expected an object")
        param = sweep.get("parameter")
        if param not in SWEEP_PARAMETERS:
            raise ConfigError("sweep.parameter", f"must be one of {SWEEP_PARAMETERS}")
        vals = sweep.get("values")
        if not isinstance(vals, list) or not vals:
            raise ConfigError("sweep.values", "expected a non-empty list")
        vals = [_num(v, f"sweep.values[{i}]") for i, v in enumerate(vals)]
        inc = all(b > a for a, b in zip(vals, vals[1:]))
        dec = all(b < a for a, b in zip(vals, vals[1:]))
        if not (inc or dec):
            raise ConfigError("sweep.values", "must be strictly monotone")
        if param == "p_online" and any(not 0.0 <= v <= 1.0 for v in vals):
            raise ConfigError("sweep.values", "link probabilities must lie in [0, 1]")
        if param == "log_r_abs" and any(v < 0 for v in vals):
            raise ConfigError("sweep.values", "|log r| values must be >= 0")
        if param == "p_online" and "topology" not in network:
            raise ConfigError("sweep.parameter", "a p_online sweep needs network.topology")
        sweep = {"parameter": param, "values": vals}

    conn = dict(DEFAULT_CONNECTIVITY)
    user_conn = data.get("connectivity", {})
    if not isinstance(user_conn, dict):
        raise ConfigError("connectivity", "expected an object")
    for key, val in user_conn.items():
        if key not in DEFAULT_CONNECTIVITY:
            raise ConfigError(f"connectivity.{key}", "unknown field")
        conn[key] = val
    eps = _num(conn["epsilon"], "connectivity.epsilon")
    if not 0.0 < eps < 1.0:
        raise ConfigError("connectivity.epsilon", "must lie in (0, 1)")
    _int(conn["horizon"], "connectivity.horizon", 10)
    _int(conn["trials"], "connectivity.trials", 100)
    _int(conn["spectral_samples"], "connectivity.spectral_samples", 1)

    output = data.get("output", "out/run")
    if not isinstance(output, str) or not output:
        raise ConfigError("output", "expected a non-empty path prefix")

    return ExperimentConfig(sensors=sensors, network=network, pi0=pi0, gamma=gamma,
                            horizon=horizon, trials=trials, checkpoints=cps, seed=seed,
                            sweep=sweep, connectivity=conn, exponent_window=window,
                            output=output)


def load_config(path: str) -> ExperimentConfig:
    """Read and validate a JSON config; syntax errors carry line and column."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(data)


@dataclass
class RunManifest:
    config_digest: str
    master_seed: int
    tool_version: str
    started: str
    finished: str = ""
    outputs: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @classmethod
    def start(cls, cfg: ExperimentConfig, version: str) -> "RunManifest":
        return cls(cfg.digest(), cfg.seed, version, _now(), config=cfg.to_dict())

    def finish(self, outputs: list[str]) -> None:
        self.outputs = [os.path.basename(o) for o in outputs]
        self.finished = _now()

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
