"""Random networks: topologies, link failures, Metropolis averaging matrices.

Each undirected edge of a fixed topology is online independently at every
step with probability ``p_online``. Online links get Metropolis weights
``1 / (1 + max(d_i, d_j))`` computed from the *online* degrees; the diagonal
absorbs the remainder so that every ``W(k)`` is symmetric and stochastic.

The connectivity ``|log r|`` (exponential decay rate of
``P(||W(k)...W(1) - J|| > eps)``) can be obtained three ways here: in closed
form for regular graphs, as the spectral upper bound ``mu_2(E[W^2])`` on ``r``,
or by Monte Carlo with a log-linear fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import stats
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "TopologyError", "EstimationError", "Topology", "LinkFailureModel",
    "AveragingMatrix", "ConnectivityEstimate", "build_geometric_graph",
    "build_regular_graph", "explicit_topology", "topology_from_dict",
    "sample_online", "metropolis_matrices", "sample_weight_matrix",
    "regular_network_r", "estimate_r_spectral", "estimate_r_empirical",
    "backward_product_norms", "fit_decay_rate",
]

GEOMETRIC_RETRIES = 100


class TopologyError(ValueError):
    """A topology cannot be generated or is malformed."""


class EstimationError(RuntimeError):
    """Monte Carlo data are insufficient to estimate a decay rate."""


@dataclass(frozen=True)
class Topology:
    n: int
    edges: tuple[tuple[int, int], ...]
    kind: str = "explicit"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise TopologyError("a topology needs at least 1 node")
        clean = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise TopologyError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise TopologyError(f"edge {e} references a node outside 0..{self.n - 1}")
            clean.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(clean)))

    @property
    def edge_index(self) -> tuple[np.ndarray, np.ndarray]:
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        return np.ascontiguousarray(e[:, 0]), np.ascontiguousarray(e[:, 1])

    @property
    def degrees(self) -> np.ndarray:
        ei, ej = self.edge_index
        return np.bincount(np.concatenate([ei, ej]), minlength=self.n)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.edges else 0

    def is_connected(self) -> bool:
        return _connected(self.n, self.edges)

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "geometric":
            return {"kind": "geometric", "n": self.n, **self.params}
        if self.kind == "regular":
            return {"kind": "regular", "n": self.n, "d": self.params["d"]}
        return {"kind": "explicit", "n": self.n, "edges": [list(e) for e in self.edges]}


def _connected(n: int, edges) -> bool:
    if n == 1:
        return True
    if not edges:
        return False
    e = np.asarray(edges).reshape(-1, 2)
    adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=False)
    return ncomp == 1


def build_geometric_graph(n: int, radius: float, seed) -> Topology:
    """Random geometric graph on the unit square, redrawn until connected."""
    if n < 2:
        raise TopologyError("n must be >= 2")
    if not radius > 0:
        raise TopologyError(f"radius must be positive, got {radius}")
    rng = np.random.default_rng(seed)
    for _ in range(GEOMETRIC_RETRIES):
        pos = rng.random((n, 2))
        dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        ii, jj = np.nonzero(np.triu(dist < radius, k=1))
        edges = tuple(zip(ii.tolist(), jj.tolist()))
        if _connected(n, edges):
            return Topology(n, edges, "geometric",
                            {"radius": radius, "seed": seed, "positions": pos.tolist()})
    raise TopologyError(
        f"no connected geometric graph with n={n}, radius={radius} after "
        f"{GEOMETRIC_RETRIES} draws; try a larger radius")


def build_regular_graph(n: int, d: int) -> Topology:
    """Connected ``d``-regular circulant graph.

    Node ``i`` links to ``i +- 1, ..., i +- floor(d/2)``; odd ``d`` (needs
    even ``n``) adds the antipodal node ``i + n/2``.
    """
    if d < 2 or d >= n:
        raise TopologyError(f"need 2 <= d < n, got d={d}, n={n}")
    if d % 2 and n % 2:
        raise TopologyError("odd degree requires an even number of nodes")
    edges = set()
    for i in range(n):
        for s in range(1, d // 2 + 1):
            j = (i + s) % n
            edges.add((min(i, j), max(i, j)))
        if d % 2:
            j = (i + n // 2) % n
            edges.add((min(i, j), max(i, j)))
    topo = Topology(n, tuple(edges), "regular", {"d": d})
    assert np.all(topo.degrees == d)
    return topo


def explicit_topology(n: int, edges: Sequence[Sequence[int]]) -> Topology:
    return Topology(int(n), tuple(tuple(e) for e in edges), "explicit")


def topology_from_dict(d: dict[str, Any]) -> Topology:
    kind = d.get("kind")
    try:
        if kind == "geometric":
            return build_geometric_graph(int(d["n"]), float(d["radius"]), d.get("seed", 0))
        if kind == "regular":
            return build_regular_graph(int(d["n"]), int(d["d"]))
        if kind == "explicit":
            return explicit_topology(int(d["n"]), d["edges"])
    except KeyError as exc:
        raise TopologyError(f"{kind} topology is missing field {exc}") from None
    raise TopologyError(f"unknown topology kind {kind!r}")


@dataclass(frozen=True)
class LinkFailureModel:
    """Topology plus per-edge probability of a link being online."""

    topology: Topology
    p_online: float | tuple[float, ...] = 1.0

    def __post_init__(self):
        p = np.asarray(self.p_online, dtype=float)
        if p.ndim == 1:
            if p.size != len(self.topology.edges):
                raise TopologyError(
                    f"{p.size} link probabilities for {len(self.topology.edges)} edges")
            object.__setattr__(self, "p_online", tuple(p.tolist()))
        elif p.ndim != 0:
            raise TopologyError("p_online must be a scalar or a per-edge list")
        if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise TopologyError("link probabilities must lie in [0, 1]")

    @property
    def n(self) -> int:
        return self.topology.n

    @property
    def probs(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.p_online, dtype=float),
                               (len(self.topology.edges),))

    @property
    def eta(self) -> float:
        """Floor on every diagonal entry of a Metropolis matrix."""
        return 1.0 / (1.0 + self.topology.max_degree)

    def to_dict(self) -> dict[str, Any]:
        p = self.p_online
        return {"p_online": list(p) if isinstance(p, tuple) else p}


@dataclass(frozen=True)
class AveragingMatrix:
    w: np.ndarray
    eta: float

    def check(self, atol: float = 1e-12) -> None:
        """Raise ``AssertionError`` unless ``w`` is a valid averaging matrix."""
        w = self.w
        assert np.allclose(w, w.T, rtol=0, atol=atol), "not symmetric"
        assert np.allclose(w.sum(axis=1), 1.0, rtol=0, atol=atol), "rows do not sum to 1"
        assert np.all(w >= -atol), "negative entry"
        assert np.all(np.diag(w) >= self.eta - atol), "diagonal below eta"


def sample_online(model: LinkFailureModel, rng: np.random.Generator, size=()) -> np.ndarray:
    """Boolean link states of shape ``size + (E,)``."""
    size = (size,) if isinstance(size, int) else tuple(size)
    probs = model.probs
    return rng.random(size + probs.shape) < probs


def metropolis_matrices(topology: Topology, online: np.ndarray) -> np.ndarray:
    """Dense Metropolis matrices for link states ``online[..., E]``."""
    online = np.asarray(online, dtype=bool)
    ei, ej = topology.edge_index
    n = topology.n
    lead = online.shape[:-1]
    on = online.astype(float)
    inc = np.zeros((len(ei), n))
    inc[np.arange(len(ei)), ei] = 1.0
    inc[np.arange(len(ei)), ej] = 1.0
    deg = on @ inc
    wts = np.where(online, 1.0 / (1.0 + np.maximum(deg[..., ei], deg[..., ej])), 0.0)
    w = np.zeros(lead + (n, n))
    w[..., ei, ej] = wts
    w[..., ej, ei] = wts
    idx = np.arange(n)
    w[..., idx, idx] = 1.0 - w.sum(axis=-1)
    return w


def sample_weight_matrix(model: LinkFailureModel, seed) -> AveragingMatrix:
    """One draw of ``W(k)``; ``seed`` may be an int or a ``Generator``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    online = sample_online(model, rng)
    return AveragingMatrix(metropolis_matrices(model.topology, online), model.eta)


@dataclass(frozen=True)
class ConnectivityEstimate:
    method: str
    r: float
    log_r_abs: float
    stderr: float = 0.0
    saturated: bool = False
    details: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_log_r(cls, method: str, log_r_abs: float, **kw) -> "ConnectivityEstimate":
        r = 0.0 if log_r_abs == math.inf else math.exp(-log_r_abs)
        return cls(method, r, log_r_abs, **kw)


def regular_network_r(d: int, p: float) -> ConnectivityEstimate:
    """``r = (1 - p)^d`` for a ``d``-regular graph with link probability ``p``."""
    if d < 2:
        raise TopologyError("degree must be >= 2")
    if not 0.0 <= p <= 1.0:
        raise TopologyError(f"p must lie in [0, 1], got {p}")
    if p == 1.0:
        return ConnectivityEstimate("closed_form_regular", 0.0, math.inf)
    log_r_abs = -d * math.log1p(-p)
    return ConnectivityEstimate("closed_form_regular", (1.0 - p) ** d, log_r_abs)


def estimate_r_spectral(model: LinkFailureModel, samples: int, seed,
                        chunk: int = 2048) -> ConnectivityEstimate:
    """Spectral upper bound ``mu_2(E[W^2])`` on ``r`` from sampled matrices."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    n = model.n
    if n == 1:
        return ConnectivityEstimate("spectral_bound", 0.0, math.inf,
                                    details={"samples": 0, "upper_bound": True})
    acc = np.zeros((n, n))
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        w = metropolis_matrices(model.topology, sample_online(model, rng, m))
        acc += np.einsum("kij,kjl->il", w, w)
        done += m
    ew2 = acc / samples
    ew2 = 0.5 * (ew2 + ew2.T)
    try:
        eig = np.linalg.eigvalsh(ew2)
    except np.linalg.LinAlgError as exc:
        raise EstimationError(f"eigensolver failed: {exc}") from exc
    mu2 = float(min(max(eig[-2], 0.0), 1.0))
    log_r_abs = math.inf if mu2 == 0.0 else -math.log(mu2)
    return ConnectivityEstimate("spectral_bound", mu2, log_r_abs,
                                details={"samples": samples, "upper_bound": True})


def _spectral_norm(m: np.ndarray) -> np.ndarray:
    return np.linalg.svd(m, compute_uv=False)[..., 0]


def fit_decay_rate(k: np.ndarray, prob: np.ndarray, min_points: int = 5
                   ) -> tuple[float, float, int, int]:
    """Slope of ``-log prob`` against ``k`` over the longest interior run.

    Only points with ``0 < prob < 1`` are used, taken from the longest
    contiguous stretch of such points. Returns ``(slope, stderr, k_first,
    k_last)``.
    """
    k = np.asarray(k, dtype=float)
    prob = np.asarray(prob, dtype=float)
    interior = (prob > 0) & (prob < 1)
    best = (0, 0)
    start = None
    for idx, ok in enumerate(list(interior) + [False]):
        if ok and start is None:
            start = idx
        elif not ok and start is not None:
            if idx - start > best[1] - best[0]:
                best = (start, idx)
            start = None
    lo, hi = best
    if hi - lo < min_points:
        raise EstimationError(
            f"only {hi - lo} usable points with 0 < P < 1 (need {min_points})")
    fit = stats.linregress(k[lo:hi], -np.log(prob[lo:hi]))
    return float(fit.slope), float(fit.stderr), int(k[lo]), int(k[hi - 1])


def estimate_r_empirical(model: LinkFailureModel, epsilon: float, horizon: int,
                         trials: int, seed, min_points: int = 5) -> ConnectivityEstimate:
    """Monte Carlo estimate of ``|log r|`` from ``P(||Phi(k,1) - J|| > eps)``.

    ``||Phi(k,1) - J||`` is nonincreasing in ``k`` along every sample path,
    so a trial that has come within ``eps`` of consensus is dropped from the
    matrix products (its random draws are still consumed, which keeps the
    stream layout independent of the data).

    If the probability falls from 1 to 0 without enough intermediate points
    the rate is too fast to resolve with ``trials`` runs, and the estimate is
    returned as ``+inf`` with ``saturated=True``.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0, 1)")
    if horizon < 10 or trials < 100:
        raise ValueError("need horizon >= 10 and trials >= 100")
    rng = np.random.default_rng(seed)
    n = model.n
    jmat = np.full((n, n), 1.0 / n)
    phi = np.broadcast_to(np.eye(n), (trials, n, n)).copy()
    active = np.arange(trials)
    prob = np.zeros(horizon)
    for k in range(horizon):
        online = sample_online(model, rng, trials)
        if active.size == 0:
            continue
        w = metropolis_matrices(model.topology, online[active])
        phi = w @ phi
        far = _spectral_norm(phi - jmat) > epsilon
        prob[k] = far.sum() / trials
        active, phi = active[far], phi[far]
    ks = np.arange(1, horizon + 1)
    details = {"epsilon": epsilon, "horizon": horizon, "trials": trials,
               "prob": prob.tolist()}
    try:
        slope, se, k1, k2 = fit_decay_rate(ks, prob, min_points)
    except EstimationError:
        if np.any(prob == 0.0):
            return ConnectivityEstimate("empirical_slope", 0.0, math.inf, math.inf,
                                        saturated=True, details=details)
        raise EstimationError(
            "connectivity event probabilities never left {0, 1} with enough "
            f"resolution (horizon={horizon}, trials={trials}); try a longer horizon, "
            "more trials or a different epsilon") from None
    details.update(k_first=k1, k_last=k2)
    return ConnectivityEstimate.from_log_r("empirical_slope", max(slope, 0.0),
                                           stderr=se, details=details)


def backward_product_norms(ws: np.ndarray) -> np.ndarray:
    """``||Phi(k, s) - J||`` for ``s = k, k-1, ..., 1`` given ``W(1..k)``.

    ``ws`` has shape ``(k, N, N)`` with ``ws[t-1] = W(t)``; entry ``m`` of the
    result corresponds to ``s = k - m``.
    """
    k, n, _ = ws.shape
    jmat = np.full((n, n), 1.0 / n)
    phi = np.eye(n)
    out = np.empty(k)
    for m in range(k):
        phi = phi @ ws[k - 1 - m]
        out[m] = _spectral_norm(phi - jmat)
    return out
