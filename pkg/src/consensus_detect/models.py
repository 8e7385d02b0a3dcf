"""Observation models for binary hypothesis testing at a single sensor.

Each model describes a pair of distributions ``(nu_0, nu_1)`` for one sensor
observation ``Y`` and exposes what the large-deviations analysis needs from
the log-likelihood ratio ``L = log f1(Y) / f0(Y)``:

* the log-moment generating function (LMGF) ``Lambda_0(lam) = log E[exp(lam L) | H0]``
  together with its first two derivatives,
* its convex conjugate (the rate function) and the Chernoff information,
* i.i.d. sampling of ``L`` under either hypothesis.

The LMGF under ``H1`` is never coded separately; it is ``Lambda_0(lam + 1)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np
from scipy.special import logsumexp

from ._optim import NumericError, golden_max, newton_min

__all__ = [
    "Hypothesis", "InvalidModelError", "DistinguishabilityError", "SensorModel",
    "GaussianModel", "LaplaceModel", "DiscreteModel", "LlrMoments",
    "ChernoffResult", "ConjugateResult", "lmgf", "lmgf_derivatives",
    "llr_moments", "rate_function", "conjugate", "chernoff", "sample_llr",
    "model_from_dict", "binary_model", "NumericError",
]

_LOG_HALF = math.log(0.5)
_LOG_QUARTER = math.log(0.25)


class Hypothesis(enum.IntEnum):
    H0 = 0
    H1 = 1


class InvalidModelError(ValueError):
    """Model parameters violate the constraints of the distribution family."""


class DistinguishabilityError(InvalidModelError):
    """The two hypotheses induce the same observation distribution."""


class LlrMoments(NamedTuple):
    gamma0: float
    gamma1: float


class ChernoffResult(NamedTuple):
    lambda_bullet: float
    c_ind: float


class ConjugateResult(NamedTuple):
    """Value and maximizer of ``sup_lam lam*z - Lambda(lam)``.

    ``at_boundary`` is set when the maximizer hit the search cap, in which
    case ``value`` is only a lower bound on the true supremum.
    """
    value: float
    argmax: float
    at_boundary: bool


def _finite(*vals: float) -> bool:
    return all(math.isfinite(v) for v in vals)


class SensorModel:
    """Base class; concrete families implement the ``_lmgf0`` kernels."""

    kind: str = ""

    @property
    def symmetric(self) -> bool:
        """True when ``Lambda_0(lam) == Lambda_0(1 - lam)`` identically."""
        return False

    def lmgf0(self, lam):
        raise NotImplementedError

    def lmgf0_derivs(self, lam: float) -> tuple[float, float]:
        raise NotImplementedError

    def _sample(self, rng: np.random.Generator, hyp: Hypothesis, size) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    # convenience wrappers, mirroring the module-level functions
    def lmgf(self, hyp: Hypothesis, lam):
        return lmgf(self, hyp, lam)

    def chernoff(self) -> ChernoffResult:
        return chernoff(self)

    def moments(self) -> LlrMoments:
        return llr_moments(self)


@dataclass(frozen=True)
class GaussianModel(SensorModel):
    """Mean shift ``m`` in Gaussian noise of standard deviation ``sigma``."""

    m: float
    sigma: float
    kind = "gaussian"

    def __post_init__(self):
        if not _finite(self.m, self.sigma):
            raise InvalidModelError(f"non-finite Gaussian parameters m={self.m}, sigma={self.sigma}")
        if self.sigma <= 0:
            raise InvalidModelError(f"sigma must be positive, got {self.sigma}")
        if self.m == 0:
            raise DistinguishabilityError("Gaussian mean shift m must be nonzero")

    @property
    def k(self) -> float:
        # Lambda_0(lam) = -lam (1 - lam) k
        return self.m ** 2 / (2.0 * self.sigma ** 2)

    @property
    def symmetric(self) -> bool:
        return True

    def lmgf0(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = -lam * (1.0 - lam) * self.k
        return float(out) if out.ndim == 0 else out

    def lmgf0_derivs(self, lam: float) -> tuple[float, float]:
        return self.k * (2.0 * lam - 1.0), 2.0 * self.k

    def _sample(self, rng, hyp, size):
        y = rng.normal(self.m * int(hyp), self.sigma, size=size)
        return (self.m * y - 0.5 * self.m ** 2) / self.sigma ** 2

    def to_dict(self):
        return {"kind": "gaussian", "m": self.m, "sigma": self.sigma}


def _log_sinhc(x):
    """``log(sinh(x) / x)``, stable for all real ``x``."""
    x = np.abs(np.asarray(x, dtype=float))
    small = x < 1e-3
    xs = np.where(small, 1.0, x)
    big = xs + np.log1p(-np.exp(-2.0 * xs)) - np.log(2.0 * xs)
    x2 = x * x
    return np.where(small, x2 / 6.0 - x2 * x2 / 180.0, big)


def _log_sinhc_scalar(x: float) -> float:
    x = abs(x)
    if x < 1e-3:
        x2 = x * x
        return x2 / 6.0 - x2 * x2 / 180.0
    return x + math.log1p(-math.exp(-2.0 * x)) - math.log(2.0 * x)


def _logsumexp3(u: float, v: float, w: float) -> float:
    top = max(u, v, w)
    return top + math.log(math.exp(u - top) + math.exp(v - top) + math.exp(w - top))


def _langevin(x: float) -> float:
    # mean of a unit-width exponentially tilted uniform on (-1, 1)
    if abs(x) < 1e-3:
        return x / 3.0 - x ** 3 / 45.0
    return 1.0 / math.tanh(x) - 1.0 / x


def _langevin_var(x: float) -> float:
    if abs(x) < 1e-3:
        return 1.0 / 3.0 - x * x / 15.0
    if abs(x) > 350.0:
        return 1.0 / (x * x)
    return 1.0 / (x * x) - 1.0 / math.sinh(x) ** 2


@dataclass(frozen=True)
class LaplaceModel(SensorModel):
    """Shift ``m`` in Laplace noise of scale ``b``.

    The LLR equals ``(|y| - |y - m|) / b`` and so is bounded by
    ``a = |m| / b``: it carries two atoms at ``-a`` and ``+a`` and a density in
    between. The LMGF is evaluated as a log-sum of those three positive
    contributions, which stays accurate at ``lam = 1/2`` (where the usual
    closed form has a removable ``0/0``) and for large ``|lam|``.
    """

    m: float
    b: float
    kind = "laplace"

    def __post_init__(self):
        if not _finite(self.m, self.b):
            raise InvalidModelError(f"non-finite Laplace parameters m={self.m}, b={self.b}")
        if self.b <= 0:
            raise InvalidModelError(f"scale b must be positive, got {self.b}")
        if self.m == 0:
            raise DistinguishabilityError("Laplace shift m must be nonzero")

    @property
    def a(self) -> float:
        return abs(self.m) / self.b

    @property
    def symmetric(self) -> bool:
        return True

    def _log_weights(self, lam):
        a = self.a
        s = np.asarray(lam, dtype=float) - 0.5
        lw_lo = _LOG_HALF - (s + 0.5) * a
        lw_hi = _LOG_HALF + (s - 0.5) * a
        lw_mid = _LOG_QUARTER - 0.5 * a + math.log(2.0 * a) + _log_sinhc(s * a)
        return lw_lo, lw_hi, lw_mid

    def _log_weights_scalar(self, lam: float) -> tuple[float, float, float]:
        # same as _log_weights without numpy overhead; the optimizers call this a lot
        a = self.a
        s = lam - 0.5
        return (_LOG_HALF - (s + 0.5) * a, _LOG_HALF + (s - 0.5) * a,
                _LOG_QUARTER - 0.5 * a + math.log(2.0 * a) + _log_sinhc_scalar(s * a))

    def lmgf0(self, lam):
        if np.ndim(lam) == 0:
            return _logsumexp3(*self._log_weights_scalar(float(lam)))
        lw = np.stack(np.broadcast_arrays(*self._log_weights(lam)))
        out = logsumexp(lw, axis=0)
        return float(out) if out.ndim == 0 else out

    def lmgf0_derivs(self, lam: float) -> tuple[float, float]:
        a = self.a
        lw = np.array(self._log_weights_scalar(float(lam)))
        w = np.exp(lw - _logsumexp3(*lw))
        x = (lam - 0.5) * a
        mu = np.array([-a, a, a * _langevin(x)])
        var = np.array([0.0, 0.0, a * a * _langevin_var(x)])
        d1 = float(w @ mu)
        d2 = float(w @ var + w @ (mu - d1) ** 2)
        return d1, d2

    def _sample(self, rng, hyp, size):
        y = self.m * int(hyp) + rng.laplace(0.0, self.b, size=size)
        return (np.abs(y) - np.abs(y - self.m)) / self.b

    def to_dict(self):
        return {"kind": "laplace", "m": self.m, "b": self.b}


@dataclass(frozen=True)
class DiscreteModel(SensorModel):
    """Finite alphabet with mass ``p`` under H0 and ``q`` under H1."""

    p: tuple[float, ...]
    q: tuple[float, ...]
    kind = "discrete"

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if p.ndim != 1 or p.shape != q.shape or p.size < 2:
            raise InvalidModelError("p and q must be equal-length vectors with at least 2 entries")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise InvalidModelError("non-finite probabilities")
        if np.any(p <= 0) or np.any(q <= 0):
            raise InvalidModelError(
                "all probabilities must be strictly positive (mutual absolute continuity)")
        for name, v in (("p", p), ("q", q)):
            if abs(v.sum() - 1.0) > 1e-12:
                raise InvalidModelError(f"{name} sums to {v.sum()!r}, not 1")
        if np.array_equal(p, q):
            raise DistinguishabilityError("p == q: hypotheses are indistinguishable")
        object.__setattr__(self, "p", tuple(float(v) for v in p))
        object.__setattr__(self, "q", tuple(float(v) for v in q))

    @property
    def log_p(self) -> np.ndarray:
        return np.log(np.asarray(self.p))

    @property
    def llr_values(self) -> np.ndarray:
        """Support of the LLR: ``c_m = log(q_m / p_m)``."""
        return np.log(np.asarray(self.q)) - np.log(np.asarray(self.p))

    @property
    def symmetric(self) -> bool:
        return sorted(zip(self.p, self.q)) == sorted(zip(self.q, self.p))

    def lmgf0(self, lam):
        if np.ndim(lam) == 0:
            t = self.log_p + float(lam) * self.llr_values
            top = t.max()
            return float(top + math.log(np.exp(t - top).sum()))
        lam = np.asarray(lam, dtype=float)
        terms = self.log_p + lam[..., None] * self.llr_values
        out = logsumexp(terms, axis=-1)
        return float(out) if out.ndim == 0 else out

    def lmgf0_derivs(self, lam: float) -> tuple[float, float]:
        c = self.llr_values
        t = self.log_p + lam * c
        w = np.exp(t - t.max())
        w /= w.sum()
        d1 = float(w @ c)
        return d1, float(w @ (c - d1) ** 2)

    def _sample(self, rng, hyp, size):
        probs = np.asarray(self.q if hyp == Hypothesis.H1 else self.p)
        idx = rng.choice(probs.size, size=size, p=probs)
        return self.llr_values[idx]

    def to_dict(self):
        return {"kind": "discrete", "p": list(self.p), "q": list(self.q)}


def binary_model(p: float, q: float) -> DiscreteModel:
    """Bernoulli observations with ``P(Y=1) = p`` under H0 and ``q`` under H1."""
    return DiscreteModel((1.0 - p, p), (1.0 - q, q))


def model_from_dict(d: dict[str, Any]) -> SensorModel:
    """Build a model from its config sub-schema (see README)."""
    kind = d.get("kind")
    try:
        if kind == "gaussian":
            return GaussianModel(float(d["m"]), float(d["sigma"]))
        if kind == "laplace":
            return LaplaceModel(float(d["m"]), float(d["b"]))
        if kind == "discrete":
            return DiscreteModel(tuple(d["p"]), tuple(d["q"]))
        if kind == "binary":
            return binary_model(float(d["p"]), float(d["q"]))
    except KeyError as exc:
        raise InvalidModelError(f"{kind} model is missing field {exc}") from None
    except TypeError as exc:
        raise InvalidModelError(f"bad {kind} model parameters: {exc}") from None
    raise InvalidModelError(f"unknown model kind {kind!r}")


def lmgf(model: SensorModel, hyp: Hypothesis, lam):
    """LMGF of the LLR under ``hyp``; accepts scalars or arrays."""
    if Hypothesis(hyp) == Hypothesis.H1:
        return model.lmgf0(np.asarray(lam, dtype=float) + 1.0)
    return model.lmgf0(lam)


def lmgf_derivatives(model: SensorModel, lam: float) -> tuple[float, float]:
    """``(Lambda_0'(lam), Lambda_0''(lam))``."""
    return model.lmgf0_derivs(float(lam))


def llr_moments(model: SensorModel) -> LlrMoments:
    """Mean LLR under each hypothesis (``gamma0 < 0 < gamma1``)."""
    g0 = model.lmgf0_derivs(0.0)[0]
    g1 = model.lmgf0_derivs(1.0)[0]
    if not (g0 < 0.0 < g1):
        raise DistinguishabilityError(f"degenerate LLR moments gamma0={g0}, gamma1={g1}")
    return LlrMoments(g0, g1)


_CONJ_CAP = 64.0


def conjugate(model: SensorModel, hyp: Hypothesis, z: float) -> ConjugateResult:
    """Legendre transform of the LMGF under ``hyp`` at ``z``.

    The maximizer solves ``Lambda'(lam) = z``. The search bracket starts at
    ``[-1, 2]`` and its ends double until the derivative brackets ``z``; past
    ``|lam| = 64`` the bracket is clamped and the result flagged.
    """
    shift = 1.0 if Hypothesis(hyp) == Hypothesis.H1 else 0.0

    def d1(lam):
        return model.lmgf0_derivs(lam + shift)[0]

    lo, hi = -1.0, 2.0
    at_boundary = False
    while d1(lo) > z:
        if lo <= -_CONJ_CAP:
            at_boundary = True
            break
        lo = max(2.0 * lo, -_CONJ_CAP)
    while d1(hi) < z:
        if hi >= _CONJ_CAP:
            at_boundary = True
            break
        hi = min(2.0 * hi, _CONJ_CAP)

    def obj(lam):
        return lam * z - model.lmgf0(lam + shift)

    lam_star, val = golden_max(obj, lo, hi)
    if at_boundary and min(lam_star - lo, hi - lam_star) > 1e-6:
        at_boundary = False
    return ConjugateResult(val, lam_star, at_boundary)


def rate_function(model: SensorModel, hyp: Hypothesis, z: float) -> float:
    """``I_l(z) = sup_lam lam z - Lambda_l(lam)``."""
    return conjugate(model, hyp, z).value


def chernoff(model: SensorModel) -> ChernoffResult:
    """Chernoff information ``-min_{[0,1]} Lambda_0`` and its minimizer."""
    if model.symmetric:
        lb = 0.5
    else:
        lb, _ = newton_min(model.lmgf0, model.lmgf0_derivs, 0.0, 1.0, 0.5)
    c = -model.lmgf0(lb)
    if not math.isfinite(c):
        raise NumericError(f"Chernoff information is not finite at lambda={lb}")
    return ChernoffResult(float(lb), float(c))


def sample_llr(model: SensorModel, hyp: Hypothesis, seed, count: int) -> np.ndarray:
    """``count`` i.i.d. LLR draws with ``Y ~ nu_hyp``; deterministic in ``seed``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return model._sample(rng, Hypothesis(hyp), count)
