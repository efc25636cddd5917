"""Lift-based measures and their lift-inverse counterparts.

Lift-based measures average a function of l(s, y) over the prior and only
control the max-lift. Replacing l by 1/l gives lift-inverse measures that
control the min-lift. Both come in three flavours: l1, chi^2 and the
alpha power mean.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import AlphaOutOfRange, LiftlabError, ZeroLift
from .lift import Budget, LiftTable


class Measure(enum.Enum):
    ALIP = "alip"
    LDP = "ldp"
    LIP = "lip"
    ELL1 = "ell1"
    CHI2 = "chi2"
    ALPHA_LIFT = "alpha-lift"


EXTENDED = (Measure.ELL1, Measure.CHI2, Measure.ALPHA_LIFT)


@dataclass(frozen=True)
class MeasureKind:
    tag: Measure = Measure.ALIP
    alpha: float = 2.0

    def __post_init__(self):
        if self.tag is Measure.ALPHA_LIFT and not self.alpha > 1:
            raise AlphaOutOfRange(f"alpha must exceed 1, got {self.alpha}")

    @classmethod
    def parse(cls, name: str, alpha: float = 2.0) -> "MeasureKind":
        key = name.strip().lower().replace("_", "-")
        aliases = {"l1": "ell1", "chi-2": "chi2", "alpha": "alpha-lift", "alphalift": "alpha-lift"}
        key = aliases.get(key, key)
        try:
            tag = Measure(key)
        except ValueError:
            raise LiftlabError(f"unknown measure kind {name!r}") from None
        return cls(tag, alpha)

    @property
    def is_extended(self) -> bool:
        return self.tag in EXTENDED

    def __str__(self):
        return self.tag.value


ALIP = MeasureKind(Measure.ALIP)
LDP = MeasureKind(Measure.LDP)
LIP = MeasureKind(Measure.LIP)


def _check_extended(kind: MeasureKind):
    if not kind.is_extended:
        raise LiftlabError(f"{kind} is not a lift-based measure")


def _power_mean(log_v: np.ndarray, prior: np.ndarray, alpha: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.exp(logsumexp(alpha * log_v + np.log(prior)[:, None], axis=0) / alpha)


def lift_based_values(lifts: np.ndarray, prior: np.ndarray, kind: MeasureKind) -> np.ndarray:
    """Per-column lift-based measure from a raw (|S|, |Y|) lift array."""
    tag = kind.tag
    if tag is Measure.ELL1:
        return prior @ np.abs(lifts - 1.0)
    if tag is Measure.CHI2:
        return prior @ (lifts - 1.0) ** 2
    with np.errstate(divide="ignore"):
        return _power_mean(np.log(lifts), prior, kind.alpha)


def lift_inverse_values(lifts: np.ndarray, prior: np.ndarray, kind: MeasureKind) -> np.ndarray:
    """Per-column lift-inverse measure; ``inf`` wherever a lift is zero."""
    tag = kind.tag
    zero = (lifts <= 0).any(axis=0)
    safe = np.where(lifts > 0, lifts, 1.0)
    if tag is Measure.ELL1:
        out = prior @ np.abs(1.0 / safe - 1.0)
    elif tag is Measure.CHI2:
        out = prior @ (1.0 / safe - 1.0) ** 2
    else:
        out = _power_mean(-np.log(safe), prior, kind.alpha)
    return np.where(zero, np.inf, out)


def lift_based(lt: LiftTable, prior, kind: MeasureKind) -> np.ndarray:
    _check_extended(kind)
    prior = np.asarray(getattr(prior, "probs", prior), dtype=float)
    return lift_based_values(lt.lifts, prior, kind)


def lift_inverse(lt: LiftTable, prior, kind: MeasureKind) -> np.ndarray:
    _check_extended(kind)
    if np.any(lt.lifts <= 0):
        bad = np.flatnonzero((lt.lifts <= 0).any(axis=0)).tolist()
        raise ZeroLift(f"zero lift in output(s) {bad}: lift-inverse leakage is unbounded")
    prior = np.asarray(getattr(prior, "probs", prior), dtype=float)
    return lift_inverse_values(lt.lifts, prior, kind)


def extended_thresholds(kind: MeasureKind, b: Budget) -> tuple[float, float]:
    """(bound on the lift-inverse measure, bound on the lift-based measure)."""
    _check_extended(kind)
    el, eu = math.exp(b.eps_l), math.exp(b.eps_u)
    if kind.tag is Measure.ELL1:
        return el - 1.0, eu - 1.0
    if kind.tag is Measure.CHI2:
        return (el - 1.0) ** 2, (eu - 1.0) ** 2
    return el, eu


def bound_implications(
    lt: LiftTable, prior, budget: float, kind: MeasureKind, direction: str
) -> float:
    """Bound on the max-lift (``direction="max"``) or min-lift (``"min"``)
    implied by a lift-based or lift-inverse budget.

    The prior mass entering the bound is that of the extremal sensitive
    symbol at the worst output; ties go to the lowest index.
    """
    _check_extended(kind)
    prior = np.asarray(getattr(prior, "probs", prior), dtype=float)
    eps = float(budget)
    if direction == "max":
        y = int(np.argmax(lt.lam))
        p = prior[int(np.argmax(lt.lifts[:, y]))]
        if kind.tag is Measure.ELL1:
            return eps / p + 1.0
        if kind.tag is Measure.CHI2:
            return math.sqrt(eps / p) + 1.0
        return eps / p ** (1.0 / kind.alpha)
    if direction == "min":
        y = int(np.argmin(lt.psi))
        p = prior[int(np.argmin(lt.lifts[:, y]))]
        if kind.tag is Measure.ELL1:
            return p / (eps + p)
        if kind.tag is Measure.CHI2:
            return math.sqrt(p) / (math.sqrt(eps) + math.sqrt(p))
        return p ** (1.0 / kind.alpha) / eps if eps > 0 else math.inf
    raise LiftlabError(f"direction must be 'max' or 'min', got {direction!r}")
