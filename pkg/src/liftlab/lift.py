"""Lift statistics of a joint P(S, Y) and the average leakages they bound.

The lift l(s, y) = P(s, y) / (P(s) P(y)) is the ratio of posterior to prior
belief about s after seeing y. Per output y we keep the extremes
psi(y) = min_s l, lam(y) = max_s l, and their ratio gamma(y), which is the
local-differential-privacy ratio max_{s,s'} P(y|s) / P(y|s').
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import AlphaOutOfRange, EmptySupport, LiftlabError
from .prob import JointDistribution, _frozen, mutual_information

#: Absolute slack, in nats, on every log-scale budget comparison.
LOG_TOL = 1e-9


@dataclass(frozen=True)
class Budget:
    """Asymmetric budget pair in nats: e^{-eps_l} <= psi and lam <= e^{eps_u}.

    ``math.inf`` is accepted on either side and means "unbounded".
    """

    eps_l: float
    eps_u: float

    def __post_init__(self):
        for name in ("eps_l", "eps_u"):
            v = getattr(self, name)
            if v is None or math.isnan(v) or v < 0:
                raise LiftlabError(f"{name} must be a nonnegative number, got {v!r}")

    @classmethod
    def from_ldp(cls, eps: float, lam: float) -> "Budget":
        """Split an LDP budget as eps_l = lam*eps, eps_u = (1-lam)*eps."""
        if not 0.0 < lam < 1.0:
            raise LiftlabError(f"lambda must lie in (0, 1), got {lam}")
        return cls(lam * eps, (1.0 - lam) * eps)

    @classmethod
    def symmetric(cls, eps: float) -> "Budget":
        return cls(eps, eps)

    @classmethod
    def unbounded(cls) -> "Budget":
        return cls(math.inf, math.inf)

    @property
    def ldp_eps(self) -> float:
        return self.eps_l + self.eps_u


@dataclass(frozen=True, eq=False)
class LiftTable:
    lifts: np.ndarray  # (|S|, |Y|)
    prior: np.ndarray  # P_S
    p_y: np.ndarray
    psi: np.ndarray
    lam: np.ndarray
    gamma: np.ndarray

    @property
    def log_psi(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.psi)

    @property
    def log_lam(self) -> np.ndarray:
        return np.log(self.lam)

    @property
    def max_lift_leak(self) -> float:
        """log max_y lam(y); nonnegative because lam(y) >= 1."""
        return max(0.0, float(self.log_lam.max()))

    @property
    def min_lift_leak(self) -> float:
        """|log min_y psi(y)|; ``inf`` when some cell has zero lift."""
        return max(0.0, float(-self.log_psi.min()))


def lifts_of(probs: np.ndarray) -> np.ndarray:
    """Raw lift matrix for a (|S|, |Y|) joint array. No validation.

    Computed as posterior over prior, P(s|y) / P(s), which is exactly 1
    when there is a single sensitive symbol.
    """
    p_s = probs.sum(axis=1)
    return (probs / probs.sum(axis=0)) / (p_s / p_s.sum())[:, None]


def lift_table(j: JointDistribution) -> LiftTable:
    p = j.probs
    p_s = p.sum(axis=1)
    p_y = p.sum(axis=0)
    if np.any(p_s <= 0) or np.any(p_y <= 0):
        raise EmptySupport("lift needs full-support marginals")
    lifts = lifts_of(p)
    psi = lifts.min(axis=0)
    lam = lifts.max(axis=0)
    with np.errstate(divide="ignore"):
        gamma = np.where(psi > 0, lam / np.where(psi > 0, psi, 1.0), np.inf)
    return LiftTable(
        _frozen(lifts), _frozen(p_s), _frozen(p_y), _frozen(psi), _frozen(lam), _frozen(gamma)
    )


@dataclass(frozen=True)
class AlipCheck:
    ok: bool
    violating: tuple  # output indices breaking either side
    worst_min: int  # argmin_y psi(y)
    worst_max: int  # argmax_y lam(y)

    def __bool__(self):
        return self.ok


def alip_satisfied(lt: LiftTable, b: Budget, tol: float = LOG_TOL) -> AlipCheck:
    """Check e^{-eps_l} <= psi(y) and lam(y) <= e^{eps_u} for all y, in log space."""
    low_bad = lt.log_psi < -b.eps_l - tol
    high_bad = lt.log_lam > b.eps_u + tol
    bad = np.flatnonzero(low_bad | high_bad)
    return AlipCheck(
        ok=len(bad) == 0,
        violating=tuple(int(k) for k in bad),
        worst_min=int(np.argmin(lt.psi)),
        worst_max=int(np.argmax(lt.lam)),
    )


def ldp_satisfied(lt: LiftTable, eps: float, tol: float = LOG_TOL) -> bool:
    with np.errstate(divide="ignore"):
        return bool(np.log(lt.gamma).max() <= eps + tol)


@dataclass(frozen=True)
class AverageMeasures:
    mi: float
    total_variation: float
    chi2: float
    sibson_mi: float
    arimoto_mi: float


def _log_power_mean(log_l: np.ndarray, weights: np.ndarray, alpha: float) -> np.ndarray:
    """log (sum_s w_s l_s^alpha)^{1/alpha} column-wise; alpha=inf gives log max_s l."""
    if math.isinf(alpha):
        return log_l.max(axis=0)
    return logsumexp(alpha * log_l + np.log(weights)[:, None], axis=0) / alpha


def avg_measures(j: JointDistribution, alpha: float = 2.0) -> AverageMeasures:
    """Average leakages of S through Y: MI, total variation, chi^2, Sibson and Arimoto MI.

    ``alpha=math.inf`` returns the maximal-leakage limit for both alpha
    measures, log E_Y[max_s l(s, Y)].
    """
    if not alpha > 1:
        raise AlphaOutOfRange(f"alpha must exceed 1, got {alpha}")
    lt = lift_table(j)
    prior, p_y, l = lt.prior, lt.p_y, lt.lifts
    tv = 0.5 * float(p_y @ (prior @ np.abs(l - 1.0)))
    chi2 = float(p_y @ (prior @ (l - 1.0) ** 2))
    with np.errstate(divide="ignore"):
        log_l = np.log(l)
    factor = 1.0 if math.isinf(alpha) else alpha / (alpha - 1.0)
    sib = factor * float(logsumexp(_log_power_mean(log_l, prior, alpha), b=p_y))
    if math.isinf(alpha):
        ari = sib
    else:
        log_tilt = alpha * np.log(prior)
        tilted = np.exp(log_tilt - logsumexp(log_tilt))
        ari = factor * float(logsumexp(_log_power_mean(log_l, tilted, alpha), b=p_y))
    return AverageMeasures(
        mi=mutual_information(j),
        total_variation=tv,
        chi2=chi2,
        sibson_mi=sib,
        arimoto_mi=ari,
    )
