"""Discrete probability objects: joints, marginals, channels.

Everything here is immutable once built. Tables are numpy arrays flagged
read-only so a validated object cannot be mutated behind its invariants.
All logarithms are natural; entropies and mutual information are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    EmptySupport,
    LabelMismatch,
    LiftlabError,
    NegativeEntry,
    SumOutOfTolerance,
)

#: Tolerance on the total mass of raw input tables.
VALIDATION_TOL = 1e-9
#: Tolerance on sums of internally produced tables.
INTERNAL_TOL = 1e-12
#: Cells below this value make a random draw count as lacking full support.
MIN_RANDOM_CELL = 1e-9


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _default_labels(prefix: str, n: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i + 1}" for i in range(n))


@dataclass(frozen=True, eq=False)
class Marginal:
    labels: tuple
    probs: np.ndarray

    def __len__(self):
        return len(self.probs)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Full-support joint table, rows indexed by S and columns by X (or Y).

    Build through :func:`validate_joint`; the constructor does no checking.
    """

    probs: np.ndarray
    row_labels: tuple
    col_labels: tuple

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape

    @property
    def p_row(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    @property
    def p_col(self) -> np.ndarray:
        return self.probs.sum(axis=0)

    def transpose(self) -> "JointDistribution":
        return JointDistribution(_frozen(self.probs.T), self.col_labels, self.row_labels)


@dataclass(frozen=True, eq=False)
class Channel:
    """Conditional table ``probs[x, y] = q(y|x)``; each row sums to one."""

    probs: np.ndarray
    input_labels: tuple
    output_labels: tuple

    @classmethod
    def from_table(cls, table, input_labels=None, output_labels=None) -> "Channel":
        q = np.array(table, dtype=float)
        if q.ndim != 2 or q.size == 0:
            raise LiftlabError("channel table must be a non-empty 2-D array")
        if np.any(q < 0):
            r, c = np.argwhere(q < 0)[0]
            raise NegativeEntry(int(r), int(c), float(q[r, c]))
        sums = q.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > VALIDATION_TOL):
            raise SumOutOfTolerance(f"channel rows must sum to 1, got {sums}")
        q = q / sums[:, None]
        nx, ny = q.shape
        input_labels = tuple(input_labels) if input_labels is not None else _default_labels("x", nx)
        output_labels = tuple(output_labels) if output_labels is not None else _default_labels("y", ny)
        if len(input_labels) != nx or len(output_labels) != ny:
            raise LabelMismatch("label count does not match channel shape")
        return cls(_frozen(q), input_labels, output_labels)

    @classmethod
    def identity(cls, labels: Sequence) -> "Channel":
        labels = tuple(labels)
        return cls(_frozen(np.eye(len(labels))), labels, labels)


def validate_joint(table, row_labels=None, col_labels=None) -> JointDistribution:
    """Check a raw table and wrap it as a :class:`JointDistribution`.

    The table is renormalized (divided by its total) only when the total is
    within ``1e-9`` of one. Zero rows or columns are rejected because every
    downstream lift computation assumes full-support marginals.
    """
    try:
        p = np.array(table, dtype=float)
    except (TypeError, ValueError) as exc:
        raise LiftlabError(f"table is not a rectangular numeric array: {exc}") from None
    if p.ndim == 1:
        p = p[None, :]
    if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
        raise LiftlabError(f"joint table must be 2-D and at least 1x1, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise LiftlabError("joint table contains non-finite entries")
    neg = np.argwhere(p < 0)
    if len(neg):
        r, c = neg[0]
        raise NegativeEntry(int(r), int(c), float(p[r, c]))
    total = p.sum()
    if abs(total - 1.0) > VALIDATION_TOL:
        raise SumOutOfTolerance(f"joint table sums to {total!r}, expected 1")
    p = p / total
    zero_rows = np.flatnonzero(p.sum(axis=1) <= 0)
    zero_cols = np.flatnonzero(p.sum(axis=0) <= 0)
    if len(zero_rows):
        raise EmptySupport(f"row(s) {zero_rows.tolist()} have zero probability")
    if len(zero_cols):
        raise EmptySupport(f"column(s) {zero_cols.tolist()} have zero probability")
    ns, nx = p.shape
    row_labels = tuple(row_labels) if row_labels is not None else _default_labels("s", ns)
    col_labels = tuple(col_labels) if col_labels is not None else _default_labels("x", nx)
    if len(row_labels) != ns or len(col_labels) != nx:
        raise LabelMismatch(
            f"expected {ns} row and {nx} column labels, got {len(row_labels)} and {len(col_labels)}"
        )
    return JointDistribution(_frozen(p), row_labels, col_labels)


def marginals(j: JointDistribution) -> tuple[Marginal, Marginal]:
    return (
        Marginal(j.row_labels, _frozen(j.probs.sum(axis=1))),
        Marginal(j.col_labels, _frozen(j.probs.sum(axis=0))),
    )


def compose_channel(j: JointDistribution, c: Channel, drop_unused: bool = False) -> JointDistribution:
    """Push the column variable of ``j`` through ``c``: P_SY = P_SX @ q.

    Outputs that receive zero mass raise :class:`EmptySupport` unless
    ``drop_unused`` is set, in which case they are removed together with
    their labels.
    """
    if tuple(c.input_labels) != tuple(j.col_labels):
        raise LabelMismatch(
            f"channel inputs {c.input_labels} do not match joint columns {j.col_labels}"
        )
    p_sy = j.probs @ c.probs
    labels = c.output_labels
    used = p_sy.sum(axis=0) > 0
    if not used.all():
        if not drop_unused:
            dead = [labels[k] for k in np.flatnonzero(~used)]
            raise EmptySupport(f"channel outputs {dead} receive zero probability")
        p_sy = p_sy[:, used]
        labels = tuple(l for l, u in zip(labels, used) if u)
    return JointDistribution(_frozen(p_sy), j.row_labels, tuple(labels))


def entropy(m) -> float:
    """Shannon entropy in nats of a :class:`Marginal` or probability vector."""
    p = np.asarray(m.probs if isinstance(m, Marginal) else m, dtype=float)
    p = p[p > 0]
    return float(max(-np.sum(p * np.log(p)), 0.0))


def mutual_information(j: JointDistribution) -> float:
    p = j.probs
    outer = np.outer(p.sum(axis=1), p.sum(axis=0))
    nz = p > 0
    return float(max(np.sum(p[nz] * np.log(p[nz] / outer[nz])), 0.0))


def nmi(j: JointDistribution) -> float:
    """I(row; col) / H(row). A deterministic row variable counts as fully kept."""
    h = entropy(j.probs.sum(axis=1))
    if h <= 0:
        return 1.0
    return min(mutual_information(j) / h, 1.0)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


GENERATORS = ("dirichlet", "uniform")


def sample_random_joint(ns: int, nx: int, seed, scheme: str = "dirichlet") -> JointDistribution:
    """Draw a random full-support joint over ns x nx cells.

    ``scheme="dirichlet"`` samples the cell simplex uniformly (flat
    Dirichlet). ``scheme="uniform"`` draws i.i.d. U(0, 1) cells and
    normalizes them, which gives milder lifts. Draws with a cell below
    ``1e-9`` are rejected so the result has numerically full support.
    """
    if ns < 1 or nx < 1:
        raise LiftlabError("ns and nx must be positive")
    if scheme not in GENERATORS:
        raise LiftlabError(f"unknown generator {scheme!r}; expected one of {GENERATORS}")
    rng = _rng(seed)
    while True:
        if scheme == "dirichlet":
            cells = rng.dirichlet(np.ones(ns * nx))
        else:
            raw = rng.random(ns * nx)
            cells = raw / raw.sum()
        if cells.min() >= MIN_RANDOM_CELL:
            break
    return validate_joint(cells.reshape(ns, nx))


def product_joint(p_s, p_x) -> JointDistribution:
    return validate_joint(np.outer(np.asarray(p_s, float), np.asarray(p_x, float)))
