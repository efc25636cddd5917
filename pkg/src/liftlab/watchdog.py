"""Watchdog mechanisms: publish low-risk symbols, merge high-risk ones.

Symbols of X are split into a low-risk set, published unchanged, and a
high-risk set that is randomized X-invariantly (every input of a group maps
to the same output distribution). Complete merging collapses the whole
high-risk set into one super-symbol; subset merging greedily partitions it
into groups that each meet the budget on their own, which keeps more
resolution and therefore more utility.

Statistics of a group are the statistics of its merged column
P(s, A) = sum_{x in A} P(s, x), so a singleton group is just the symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import EmptySubset, LiftlabError, MalformedR
from .lift import LOG_TOL, Budget, LiftTable, alip_satisfied, ldp_satisfied, lift_table
from .measures import (
    ALIP,
    Measure,
    MeasureKind,
    extended_thresholds,
    lift_based_values,
    lift_inverse_values,
)
from .prob import Channel, JointDistribution, compose_channel, entropy

__all__ = [
    "Budget",
    "Partition",
    "MechanismReport",
    "partition_low_high",
    "x_invariant_channel",
    "subset_leakage",
    "watchdog_utility",
    "subset_merging",
    "complete_merge_mechanism",
    "subset_merge_mechanism",
    "budget_satisfied",
    "optimal_partition_bruteforce",
]


@dataclass(frozen=True)
class Partition:
    """Low-risk symbols plus an ordered partition of the high-risk ones.

    ``groups`` may be empty while ``high_risk`` is not; that is the bare
    low/high split, which behaves as a single complete-merge group.
    """

    low_risk: tuple
    high_risk: tuple
    groups: tuple = ()

    def __post_init__(self):
        low, high = set(self.low_risk), set(self.high_risk)
        if low & high:
            raise LiftlabError(f"symbols {sorted(low & high)} are both low and high risk")
        if self.groups:
            seen: set = set()
            for g in self.groups:
                if not g:
                    raise LiftlabError("partition groups must be nonempty")
                if seen & set(g):
                    raise LiftlabError("partition groups overlap")
                seen |= set(g)
            if seen != high:
                raise LiftlabError("partition groups do not cover the high-risk set")

    @property
    def effective_groups(self) -> tuple:
        if self.groups:
            return self.groups
        return (tuple(self.high_risk),) if self.high_risk else ()

    def complete(self) -> "Partition":
        return Partition(self.low_risk, self.high_risk, self.effective_groups)


@dataclass(frozen=True, eq=False)
class MechanismReport:
    channel: Channel
    joint_sy: JointDistribution
    utility_mi: float
    nmi: float
    max_lift_leak: float
    min_lift_leak: float
    satisfied: bool
    kind: MeasureKind
    budget: Budget
    partition: Partition | None = None
    info: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# column statistics


def _column_stats(
    cols: np.ndarray, prior: np.ndarray, kind: MeasureKind, b: Budget, alip_risk: str = "inverse"
):
    """Violation flags and risk metric omega for merged columns P(s, A).

    ``cols`` is (|S|, k); returns two length-k arrays. For ALIP the risk is
    lam + 1/psi by default (the alpha -> inf limit of the alpha-lift risk);
    ``alip_risk="sum"`` gives lam + psi instead.
    """
    lifts = cols / (prior[:, None] * cols.sum(axis=0))
    tag = kind.tag
    if tag in (Measure.ALIP, Measure.LIP, Measure.LDP):
        psi = lifts.min(axis=0)
        lam = lifts.max(axis=0)
        with np.errstate(divide="ignore"):
            log_psi = np.log(psi)
        log_lam = np.log(lam)
        if tag is Measure.LDP:
            log_gamma = log_lam - log_psi
            return log_gamma > b.ldp_eps + LOG_TOL, np.exp(log_gamma)
        bad = (log_psi < -b.eps_l - LOG_TOL) | (log_lam > b.eps_u + LOG_TOL)
        if tag is Measure.ALIP:
            if alip_risk == "sum":
                return bad, lam + psi
            return bad, lam + np.exp(-log_psi)
        return bad, np.maximum(log_lam, -log_psi)
    inv = lift_inverse_values(lifts, prior, kind)
    fwd = lift_based_values(lifts, prior, kind)
    thr_l, thr_u = extended_thresholds(kind, b)
    bad = (inv > thr_l + LOG_TOL * max(1.0, thr_l)) | (fwd > thr_u + LOG_TOL * max(1.0, thr_u))
    return bad, fwd + inv


def budget_satisfied(lt: LiftTable, kind: MeasureKind, b: Budget) -> bool:
    """Does every output of ``lt`` meet the budget of ``kind``?"""
    tag = kind.tag
    if tag in (Measure.ALIP, Measure.LIP):
        return bool(alip_satisfied(lt, b))
    if tag is Measure.LDP:
        return ldp_satisfied(lt, b.ldp_eps)
    thr_l, thr_u = extended_thresholds(kind, b)
    inv = lift_inverse_values(lt.lifts, lt.prior, kind)
    fwd = lift_based_values(lt.lifts, lt.prior, kind)
    return bool(
        np.all(inv <= thr_l + LOG_TOL * max(1.0, thr_l))
        and np.all(fwd <= thr_u + LOG_TOL * max(1.0, thr_u))
    )


# ---------------------------------------------------------------------------
# partitioning


def partition_low_high(j: JointDistribution, kind: MeasureKind, b: Budget) -> Partition:
    """Split X by checking each symbol as its own output y = x."""
    p = j.probs
    bad, _ = _column_stats(p, p.sum(axis=1), kind, b)
    low = tuple(int(x) for x in np.flatnonzero(~bad))
    high = tuple(int(x) for x in np.flatnonzero(bad))
    return Partition(low, high)


def subset_merging(
    j: JointDistribution, kind: MeasureKind, b: Budget, alip_risk: str = "inverse"
) -> Partition:
    """Greedy partition of the high-risk symbols into budget-meeting groups.

    Each group starts at the riskiest remaining symbol (largest omega) and
    absorbs, one at a time, the symbol whose addition gives the smallest
    group omega, until the merged group meets the budget. Groups are built
    until no high-risk symbol is left. If the last group still violates,
    it is merged with whichever earlier group minimizes the omega of the
    union, repeatedly, until it complies or is the only group left.
    Ties go to the lowest symbol (or group) index.

    ``alip_risk`` selects the ALIP risk metric, see :func:`_column_stats`.
    """
    if alip_risk not in ("inverse", "sum"):
        raise LiftlabError(f"alip_risk must be 'inverse' or 'sum', got {alip_risk!r}")
    p = j.probs
    prior = p.sum(axis=1)
    split = partition_low_high(j, kind, b)

    def stats(cols):
        return _column_stats(cols, prior, kind, b, alip_risk)

    remaining = list(split.high_risk)
    groups: list[list[int]] = []
    cols: list[np.ndarray] = []
    while remaining:
        _, omega = stats(p[:, remaining])
        group = [remaining.pop(int(np.argmax(omega)))]
        col = p[:, group[0]].copy()
        bad, _ = stats(col[:, None])
        while bad[0] and remaining:
            cand = col[:, None] + p[:, remaining]
            _, omega = stats(cand)
            k = int(np.argmin(omega))
            group.append(remaining.pop(k))
            col = cand[:, k].copy()
            bad, _ = stats(col[:, None])
        groups.append(group)
        cols.append(col)

    while len(groups) > 1 and stats(cols[-1][:, None])[0][0]:
        cand = cols[-1][:, None] + np.stack(cols[:-1], axis=1)
        _, omega = stats(cand)
        i = int(np.argmin(omega))
        groups[-1] = groups[-1] + groups[i]
        cols[-1] = cand[:, i].copy()
        del groups[i], cols[i]

    return Partition(split.low_risk, split.high_risk, tuple(tuple(sorted(g)) for g in groups))


# ---------------------------------------------------------------------------
# channels, leakage, utility


def x_invariant_channel(p: Partition, labels: Sequence, dist="merge") -> Channel:
    """Watchdog channel: identity on low-risk symbols, X-invariant on each group.

    ``dist`` is ``"merge"`` (one super-symbol per group), ``"uniform"``
    (one output per group member, uniform over them), or a sequence with
    one output distribution per group.
    """
    labels = tuple(labels)
    groups = p.effective_groups
    if isinstance(dist, str):
        if dist == "merge":
            dists = [np.ones(1) for _ in groups]
        elif dist == "uniform":
            dists = [np.full(len(g), 1.0 / len(g)) for g in groups]
        else:
            raise MalformedR(f"unknown randomization {dist!r}")
    else:
        dists = [np.asarray(r, dtype=float) for r in dist]
        if len(dists) != len(groups):
            raise MalformedR(f"need {len(groups)} output distributions, got {len(dists)}")
        for r in dists:
            if r.ndim != 1 or r.size == 0 or np.any(r < 0) or abs(r.sum() - 1.0) > 1e-9:
                raise MalformedR(f"randomization {r} is not a probability vector")

    ny = len(p.low_risk) + sum(len(r) for r in dists)
    q = np.zeros((len(labels), ny))
    out_labels = []
    for k, x in enumerate(p.low_risk):
        q[x, k] = 1.0
        out_labels.append(labels[x])
    col = len(p.low_risk)
    for g, r in zip(groups, dists):
        name = "+".join(str(labels[x]) for x in g)
        for x in g:
            q[x, col : col + len(r)] = r
        out_labels.extend([name] if len(r) == 1 else [f"{name}#{m + 1}" for m in range(len(r))])
        col += len(r)
    return Channel.from_table(q, labels, out_labels)


def subset_leakage(j: JointDistribution, subset) -> tuple[float, float]:
    """(eps_bar_l, eps_bar_u) of merging ``subset`` into one output."""
    subset = list(subset)
    if not subset:
        raise EmptySubset("subset must be nonempty")
    p = j.probs
    p_s = p.sum(axis=1)
    mass = p[:, subset].sum(axis=1)
    with np.errstate(divide="ignore"):
        log_lift = np.log(mass / p_s) - np.log(mass.sum())
    return max(0.0, float(-log_lift.min())), max(0.0, float(log_lift.max()))


def watchdog_utility(j: JointDistribution, p: Partition) -> float:
    """I(X;Y) of the watchdog channel built from ``p``, in nats."""
    p_x = j.probs.sum(axis=0)
    loss = 0.0
    for g in p.effective_groups:
        px = p_x[list(g)]
        loss += float(np.sum(px * np.log(px.sum() / px)))
    return max(entropy(p_x) - loss, 0.0)


def _report(j, channel, utility, kind, b, partition=None, info=None) -> MechanismReport:
    joint_sy = compose_channel(j, channel)
    lt = lift_table(joint_sy)
    h = entropy(j.probs.sum(axis=0))
    nmi = 1.0 if h <= 0 else min(max(utility / h, 0.0), 1.0)
    return MechanismReport(
        channel=channel,
        joint_sy=joint_sy,
        utility_mi=utility,
        nmi=nmi,
        max_lift_leak=lt.max_lift_leak,
        min_lift_leak=lt.min_lift_leak,
        satisfied=budget_satisfied(lt, kind, b),
        kind=kind,
        budget=b,
        partition=partition,
        info=dict(info or {}),
    )


def _watchdog_report(j, partition, kind, b, dist, name):
    channel = x_invariant_channel(partition, j.col_labels, dist)
    info = {"mechanism": name, "groups": len(partition.effective_groups)}
    if partition.high_risk:
        worst = max(partition.effective_groups, key=len)
        info["residual"] = max(
            (subset_leakage(j, g) for g in partition.effective_groups), key=lambda t: max(t)
        )
        info["largest_group"] = len(worst)
    return _report(j, channel, watchdog_utility(j, partition), kind, b, partition, info)


def complete_merge_mechanism(
    j: JointDistribution, kind: MeasureKind = ALIP, b: Budget | None = None, dist="merge"
) -> MechanismReport:
    b = b if b is not None else Budget.unbounded()
    partition = partition_low_high(j, kind, b).complete()
    return _watchdog_report(j, partition, kind, b, dist, "watchdog-complete")


def subset_merge_mechanism(
    j: JointDistribution,
    kind: MeasureKind = ALIP,
    b: Budget | None = None,
    dist="merge",
    alip_risk: str = "inverse",
) -> MechanismReport:
    b = b if b is not None else Budget.unbounded()
    partition = subset_merging(j, kind, b, alip_risk)
    return _watchdog_report(j, partition, kind, b, dist, "watchdog-subset")


# ---------------------------------------------------------------------------
# exhaustive oracle


def set_partitions(items: Sequence) -> Iterator[list[list]]:
    """All set partitions of ``items`` (Bell-number many)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for sub in set_partitions(rest):
        yield [[first]] + sub
        for i in range(len(sub)):
            yield sub[:i] + [[first] + sub[i]] + sub[i + 1 :]


def optimal_partition_bruteforce(
    j: JointDistribution, kind: MeasureKind, b: Budget, max_size: int = 8
) -> Partition | None:
    """Best budget-meeting partition of the high-risk set by exhaustive search.

    Returns ``None`` when no partition meets the budget. Only meant for
    checking the greedy algorithm on small high-risk sets.
    """
    split = partition_low_high(j, kind, b)
    if len(split.high_risk) > max_size:
        raise LiftlabError(f"high-risk set of {len(split.high_risk)} exceeds max_size={max_size}")
    if not split.high_risk:
        return split
    p = j.probs
    prior = p.sum(axis=1)
    best, best_u = None, -math.inf
    for parts in set_partitions(split.high_risk):
        cols = np.stack([p[:, g].sum(axis=1) for g in parts], axis=1)
        bad, _ = _column_stats(cols, prior, kind, b)
        if bad.any():
            continue
        cand = Partition(split.low_risk, split.high_risk, tuple(tuple(sorted(g)) for g in parts))
        u = watchdog_utility(j, cand)
        if u > best_u:
            best, best_u = cand, u
    return best
