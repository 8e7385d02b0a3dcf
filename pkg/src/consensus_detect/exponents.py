"""Error-exponent bounds for consensus+innovations detection.

For ``N`` sensors exchanging decision variables over a random network with
connectivity ``|log r|``, the false-alarm and miss probabilities at every
sensor decay at least as fast as ``exp(-k B0(gamma))`` and
``exp(-k B1(gamma))``, where

    B0(gamma) = max_{lam in [0,1]}  N gamma lam - max{N L0(lam), L0(N lam) - |log r|}
    B1(gamma) = max_{lam in [-1,0]} N gamma lam - max{N L1(lam), L1(N lam) - |log r|}

and ``L0``/``L1`` are the per-sensor LMGFs. For identical sensors the bounds
also have a three-piece closed form built from the breakpoints of
``Delta_l(lam) = L_l(N lam) - |log r| - N L_l(lam)``; it is implemented here
as an independent cross-check of the variational evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._optim import NumericError, expand_bracket, find_root, golden_max, newton_min
from .models import Hypothesis, SensorModel, chernoff, llr_moments, rate_function

__all__ = [
    "DomainError", "ConnectivityRate", "Breakpoints", "Ensemble", "ExponentReport",
    "delta", "breakpoints", "exponent_bounds", "exponent_bounds_piecewise",
    "optimal_threshold", "optimality_threshold", "binary_simplified_threshold",
    "hetero_bounds", "hetero_threshold", "hetero_optimal_threshold", "analyze",
    "bound_curve", "gamma_grid",
]

_BRACKET_CAP = 128.0
_GAMMA_TOL = 1e-10


class DomainError(ValueError):
    """Argument outside the range where the bounds are defined."""


@dataclass(frozen=True)
class ConnectivityRate:
    """Network connectivity ``|log r|`` in nats per step (``inf`` when ``r = 0``)."""

    log_r_abs: float

    def __post_init__(self):
        if math.isnan(self.log_r_abs) or self.log_r_abs < 0:
            raise DomainError(f"|log r| must be >= 0, got {self.log_r_abs}")

    @classmethod
    def from_r(cls, r: float) -> "ConnectivityRate":
        if not 0.0 <= r <= 1.0:
            raise DomainError(f"r must lie in [0, 1], got {r}")
        return cls(math.inf if r == 0.0 else -math.log(r))

    @property
    def r(self) -> float:
        return math.exp(-self.log_r_abs)


@dataclass(frozen=True)
class Breakpoints:
    lambda0_s: float
    lambda1_s: float
    gamma0_minus: float
    gamma0_plus: float
    gamma1_minus: float
    gamma1_plus: float
    degenerate0: bool = False
    degenerate1: bool = False


@dataclass(frozen=True)
class Ensemble:
    """``N`` sensor models (possibly different) plus the prior of ``H0``."""

    models: tuple[SensorModel, ...]
    pi0: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        if len(self.models) < 1:
            raise DomainError("an ensemble needs at least one sensor")
        if not 0.0 < self.pi0 < 1.0:
            raise DomainError(f"prior pi0 must be in (0, 1), got {self.pi0}")

    @classmethod
    def homogeneous(cls, model: SensorModel, n: int, pi0: float = 0.5) -> "Ensemble":
        return cls((model,) * int(n), pi0)

    @property
    def n(self) -> int:
        return len(self.models)

    @property
    def pi1(self) -> float:
        return 1.0 - self.pi0

    @property
    def is_homogeneous(self) -> bool:
        return all(m == self.models[0] for m in self.models)

    def distinct(self) -> list[tuple[SensorModel, int]]:
        """Distinct models with multiplicities, in first-seen order."""
        out: dict[SensorModel, int] = {}
        for m in self.models:
            out[m] = out.get(m, 0) + 1
        return list(out.items())

    def gamma_bar(self) -> tuple[float, float]:
        """Network-average LLR means ``(gamma_bar_0, gamma_bar_1)``."""
        g0 = g1 = 0.0
        for m, k in self.distinct():
            mo = llr_moments(m)
            g0 += k * mo.gamma0
            g1 += k * mo.gamma1
        return g0 / self.n, g1 / self.n


@dataclass(frozen=True)
class ExponentReport:
    b0: float
    b1: float
    bound: float
    gamma: float
    gamma_star: float
    thr: float
    optimal_regime: bool
    c_total: float
    log_r_abs: float
    lambda_bullet: float
    n: int
    extra: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "n", "log_r_abs", "gamma", "b0", "b1", "bound", "gamma_star", "thr",
            "optimal_regime", "c_total", "lambda_bullet")}
        d.update(self.extra)
        return d


def _lmgf_l(model: SensorModel, hyp: Hypothesis, lam: float) -> float:
    return model.lmgf0(lam + 1.0) if hyp == Hypothesis.H1 else model.lmgf0(lam)


def _dlmgf_l(model: SensorModel, hyp: Hypothesis, lam: float) -> float:
    return model.lmgf0_derivs(lam + (1.0 if hyp == Hypothesis.H1 else 0.0))[0]


def delta(model: SensorModel, l: Hypothesis, lam: float, n: int,
          conn: ConnectivityRate) -> float:
    """``Delta_l(lam) = Lambda_l(N lam) - |log r| - N Lambda_l(lam)``."""
    hyp = Hypothesis(l)
    return _lmgf_l(model, hyp, n * lam) - conn.log_r_abs - n * _lmgf_l(model, hyp, lam)


def breakpoints(model: SensorModel, n: int, conn: ConnectivityRate) -> Breakpoints:
    """Zeros ``lambda_l^s`` of ``Delta_l`` and the induced gamma breakpoints.

    When ``Delta_l`` does not change sign within ``|lam| <= 128`` the
    corresponding zero is reported as ``+-inf`` and the breakpoints are pushed
    to infinity (the network term never binds).
    """
    c = conn.log_r_abs
    if not (0.0 < c < math.inf):
        raise DomainError(f"breakpoints need 0 < |log r| < inf, got {c}")

    def d0(lam):
        return delta(model, Hypothesis.H0, lam, n, conn)

    def d1(lam):
        return delta(model, Hypothesis.H1, lam, n, conn)

    hi = expand_bracket(d0, 1.0, _BRACKET_CAP, sign=1)
    if hi is None:
        l0s, g0m, g0p, deg0 = math.inf, math.inf, math.inf, True
    else:
        l0s = find_root(d0, 0.0, hi)
        g0m = _dlmgf_l(model, Hypothesis.H0, l0s)
        g0p = _dlmgf_l(model, Hypothesis.H0, n * l0s)
        deg0 = False

    lo = expand_bracket(d1, 1.0, _BRACKET_CAP, sign=-1)
    if lo is None:
        l1s, g1m, g1p, deg1 = -math.inf, -math.inf, -math.inf, True
    else:
        l1s = find_root(d1, lo, 0.0)
        g1m = _dlmgf_l(model, Hypothesis.H1, n * l1s)
        g1p = _dlmgf_l(model, Hypothesis.H1, l1s)
        deg1 = False
    return Breakpoints(l0s, l1s, g0m, g0p, g1m, g1p, deg0, deg1)


def _check_gamma(gamma: float, g0: float, g1: float) -> None:
    if not g0 < gamma < g1:
        raise DomainError(f"threshold gamma={gamma} outside ({g0}, {g1})")


def _variational(objective, lo, hi) -> float:
    return golden_max(objective, lo, hi)[1]


def exponent_bounds(model: SensorModel, n: int, conn: ConnectivityRate,
                    gamma: float) -> tuple[float, float]:
    """``(B0(gamma), B1(gamma))`` for ``n`` identical sensors."""
    g0, g1 = llr_moments(model)
    _check_gamma(gamma, g0, g1)
    c = conn.log_r_abs
    L0 = model.lmgf0

    def phi0(lam):
        base = n * L0(lam)
        return base if c == math.inf else max(base, L0(n * lam) - c)

    def phi1(lam):
        base = n * L0(lam + 1.0)
        return base if c == math.inf else max(base, L0(n * lam + 1.0) - c)

    b0 = _variational(lambda lam: n * gamma * lam - phi0(lam), 0.0, 1.0)
    b1 = _variational(lambda lam: n * gamma * lam - phi1(lam), -1.0, 0.0)
    return b0, b1


def exponent_bounds_piecewise(model: SensorModel, n: int, conn: ConnectivityRate,
                              gamma: float, bp: Breakpoints | None = None
                              ) -> tuple[float, float]:
    """Three-piece closed form of ``(B0, B1)`` built from the breakpoints."""
    g0, g1 = llr_moments(model)
    _check_gamma(gamma, g0, g1)
    c = conn.log_r_abs
    if c == math.inf:
        return (n * rate_function(model, Hypothesis.H0, gamma),
                n * rate_function(model, Hypothesis.H1, gamma))
    bp = bp or breakpoints(model, n, conn)

    def i0(z):
        return rate_function(model, Hypothesis.H0, z)

    def i1(z):
        return i0(z) - z

    if gamma <= bp.gamma0_minus:
        b0 = n * i0(gamma)
    elif gamma < bp.gamma0_plus:
        b0 = n * i0(bp.gamma0_minus) + n * bp.lambda0_s * (gamma - bp.gamma0_minus)
    else:
        b0 = i0(gamma) + c

    if gamma <= bp.gamma1_minus:
        b1 = i1(gamma) + c
    elif gamma < bp.gamma1_plus:
        b1 = n * i1(bp.gamma1_plus) + n * bp.lambda1_s * (gamma - bp.gamma1_plus)
    else:
        b1 = n * i1(gamma)
    return b0, b1


def _bisect_crossing(bounds, g0: float, g1: float) -> float:
    # B1 - B0 is strictly decreasing on (g0, g1), positive near g0, negative near g1
    eps = 1e-12 * (g1 - g0)

    def diff(gamma):
        b0, b1 = bounds(gamma)
        return b1 - b0

    return find_root(diff, g0 + eps, g1 - eps, xtol=_GAMMA_TOL)


def optimal_threshold(model: SensorModel, n: int, conn: ConnectivityRate) -> float:
    """Detector threshold ``gamma*`` where ``B0 = B1``.

    For LMGFs symmetric about 1/2 this is exactly 0 whatever the network.
    """
    if conn.log_r_abs <= 0:
        raise DomainError("optimal threshold needs |log r| > 0")
    if model.symmetric:
        return 0.0
    g0, g1 = llr_moments(model)
    return _bisect_crossing(lambda g: exponent_bounds(model, n, conn, g), g0, g1)


def optimality_threshold(model: SensorModel, n: int) -> float:
    """Connectivity ``thr`` above which the detector reaches ``N C_ind``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    lb, _ = chernoff(model)
    base = n * model.lmgf0(lb)
    return max(model.lmgf0(n * lb) - base,
               model.lmgf0(1.0 - n * (1.0 - lb)) - base)


def binary_simplified_threshold(p: float, q: float, n: int) -> float:
    """Sufficient connectivity for binary sensors, ``N max{|log p|, |log(1-q)|}``."""
    if not 0.0 < p < q < 1.0:
        raise DomainError(f"need 0 < p < q < 1, got p={p}, q={q}")
    return n * max(abs(math.log(p)), abs(math.log1p(-q)))


def _sum_lmgf0(ens: Ensemble, lam: float) -> float:
    return sum(k * m.lmgf0(lam) for m, k in ens.distinct())


def _max_lmgf0(ens: Ensemble, lam: float) -> float:
    return max(m.lmgf0(lam) for m, _ in ens.distinct())


def hetero_bounds(ensemble: Ensemble, conn: ConnectivityRate,
                  gamma: float) -> tuple[float, float]:
    """``(B0, B1)`` for independent, non-identical sensors."""
    c = conn.log_r_abs
    if c <= 0:
        raise DomainError("heterogeneous bounds need a network connected on average (|log r| > 0)")
    g0, g1 = ensemble.gamma_bar()
    _check_gamma(gamma, g0, g1)
    n = ensemble.n

    def phi0(lam):
        base = _sum_lmgf0(ensemble, lam)
        return base if c == math.inf else max(base, _max_lmgf0(ensemble, n * lam) - c)

    def phi1(lam):
        base = _sum_lmgf0(ensemble, lam + 1.0)
        return base if c == math.inf else max(base, _max_lmgf0(ensemble, n * lam + 1.0) - c)

    b0 = _variational(lambda lam: n * gamma * lam - phi0(lam), 0.0, 1.0)
    b1 = _variational(lambda lam: n * gamma * lam - phi1(lam), -1.0, 0.0)
    return b0, b1


def _ensemble_lambda_bullet(ensemble: Ensemble) -> float:
    pairs = ensemble.distinct()
    if all(m.symmetric for m, _ in pairs):
        return 0.5
    if len(pairs) == 1:
        return chernoff(pairs[0][0]).lambda_bullet

    def derivs(lam):
        d1 = d2 = 0.0
        for m, k in pairs:
            a, b = m.lmgf0_derivs(lam)
            d1 += k * a
            d2 += k * b
        return d1, d2

    lb, _ = newton_min(lambda lam: _sum_lmgf0(ensemble, lam), derivs, 0.0, 1.0, 0.5)
    return lb


def hetero_threshold(ensemble: Ensemble) -> tuple[float, float]:
    """``(thr, C_tot)`` for a possibly heterogeneous ensemble."""
    n = ensemble.n
    lb = _ensemble_lambda_bullet(ensemble)
    s = _sum_lmgf0(ensemble, lb)
    c_tot = -s
    if not math.isfinite(c_tot):
        raise NumericError("total Chernoff information is not finite")
    thr = max(_max_lmgf0(ensemble, n * lb) - s,
              _max_lmgf0(ensemble, 1.0 - n * (1.0 - lb)) - s)
    return thr, c_tot


def hetero_optimal_threshold(ensemble: Ensemble, conn: ConnectivityRate) -> float:
    if all(m.symmetric for m, _ in ensemble.distinct()) and ensemble.is_homogeneous:
        return 0.0
    g0, g1 = ensemble.gamma_bar()
    return _bisect_crossing(lambda g: hetero_bounds(ensemble, conn, g), g0, g1)


def analyze(ensemble: Ensemble, conn: ConnectivityRate,
            gamma: float | str = "auto") -> ExponentReport:
    """Full exponent report at threshold ``gamma`` (``"auto"`` picks ``gamma*``).

    Identical sensors go through the single-model bounds; otherwise the
    heterogeneous ones are used.
    """
    n = ensemble.n
    homo = ensemble.is_homogeneous
    model = ensemble.models[0]
    if homo:
        lb, c_ind = chernoff(model)
        thr = optimality_threshold(model, n)
        c_total = n * c_ind
        if model.symmetric:
            gstar = 0.0
        else:
            g0, g1 = llr_moments(model)
            gstar = _bisect_crossing(lambda g: exponent_bounds(model, n, conn, g), g0, g1)
    else:
        lb = _ensemble_lambda_bullet(ensemble)
        thr, c_total = hetero_threshold(ensemble)
        gstar = hetero_optimal_threshold(ensemble, conn)
    g = gstar if gamma == "auto" else float(gamma)
    b0, b1 = (exponent_bounds(model, n, conn, g) if homo
              else hetero_bounds(ensemble, conn, g))
    extra = {"homogeneous": homo}
    if homo:
        extra["c_ind"] = c_total / n
    return ExponentReport(
        b0=b0, b1=b1, bound=min(b0, b1), gamma=g, gamma_star=gstar, thr=thr,
        optimal_regime=conn.log_r_abs >= thr, c_total=c_total,
        log_r_abs=conn.log_r_abs, lambda_bullet=lb, n=n, extra=extra)


def bound_curve(ensemble: Ensemble, conn: ConnectivityRate,
                gammas: Sequence[float]) -> np.ndarray:
    """Rows ``(gamma, b0, b1, bound)`` over a threshold grid."""
    rows = []
    for g in gammas:
        if ensemble.is_homogeneous:
            b0, b1 = exponent_bounds(ensemble.models[0], ensemble.n, conn, g)
        else:
            b0, b1 = hetero_bounds(ensemble, conn, g)
        rows.append((g, b0, b1, min(b0, b1)))
    return np.array(rows, dtype=float).reshape(-1, 4)


def gamma_grid(ensemble: Ensemble, points: int = 101) -> np.ndarray:
    """Evenly spaced interior grid of ``(gamma_bar_0, gamma_bar_1)``."""
    g0, g1 = ensemble.gamma_bar()
    return np.linspace(g0, g1, points + 2)[1:-1]
