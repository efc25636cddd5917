"""Seeded Monte-Carlo sweeps over privacy budgets, and single-joint analysis.

Trial ``i`` of a sweep always draws its joint from the seed ``[seed, i]``,
so every (eps, lambda, mechanism) cell sees the same joints and a cell's
result does not depend on the shape of the grid around it.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import CapExceeded, LiftlabError
from .io import channel_to_csv, fmt, read_joint_csv, report_to_text, write_text
from .lift import Budget, lift_table
from .measures import ALIP, Measure, MeasureKind
from .prob import JointDistribution, sample_random_joint
from .random_response import aorr, srr
from .watchdog import MechanismReport, complete_merge_mechanism, subset_merge_mechanism

log = logging.getLogger(__name__)

MECHANISMS = ("watchdog-complete", "watchdog-subset", "aorr", "srr")
#: Largest alphabet on which sweeps run AORR.
AORR_CAP = 12


def synthesize(
    j: JointDistribution, mechanism: str, kind: MeasureKind = ALIP, b: Budget | None = None
) -> MechanismReport:
    b = b if b is not None else Budget.unbounded()
    if mechanism == "watchdog-complete":
        return complete_merge_mechanism(j, kind, b)
    if mechanism == "watchdog-subset":
        return subset_merge_mechanism(j, kind, b)
    if mechanism == "srr":
        return srr(j, kind, b)
    if mechanism == "aorr":
        if kind.tag not in (Measure.ALIP, Measure.LIP):
            raise LiftlabError(f"aorr enforces ALIP constraints only, not {kind}")
        return aorr(j, b, cap=AORR_CAP)
    raise LiftlabError(f"unknown mechanism {mechanism!r}; expected one of {MECHANISMS}")


def parse_grid(text: str) -> tuple[float, ...]:
    """``"start:stop:step"`` (stop included) or a comma-separated list."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            if step <= 0 or stop < start:
                raise LiftlabError(f"bad grid {text!r}: need step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return tuple(round(start + k * step, 12) for k in range(n))
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise LiftlabError(f"cannot parse grid {text!r}") from None
    if not vals:
        raise LiftlabError("empty grid")
    return vals


@dataclass
class SweepConfig:
    ns: int = 5
    nx: int = 17
    trials: int = 1000
    eps: tuple = (2.0,)
    lambdas: tuple = (0.5,)
    mechanisms: tuple = ("watchdog-subset",)
    kind: MeasureKind = ALIP
    alphas: tuple = (2.0,)
    seed: int = 0
    out: str | None = None
    generator: str = "dirichlet"
    joint: JointDistribution | None = None  # fixed joint used for every trial
    workers: int = 1
    timing: bool = True

    def __post_init__(self):
        self.eps = tuple(float(e) for e in self.eps)
        self.lambdas = tuple(float(l) for l in self.lambdas)
        self.mechanisms = tuple(self.mechanisms)
        self.alphas = tuple(float(a) for a in self.alphas)
        if not self.eps or not self.lambdas or not self.mechanisms:
            raise LiftlabError("eps grid, lambda list and mechanism list must be nonempty")
        if any(e < 0 for e in self.eps):
            raise LiftlabError("eps values must be nonnegative")
        if any(not 0 < l < 1 for l in self.lambdas):
            raise LiftlabError("lambda values must lie in (0, 1)")
        if self.trials < 1:
            raise LiftlabError("trials must be at least 1")
        if self.joint is None and (self.ns < 1 or self.nx < 1):
            raise LiftlabError("ns and nx must be positive")
        for m in self.mechanisms:
            if m not in MECHANISMS:
                raise LiftlabError(f"unknown mechanism {m!r}; expected one of {MECHANISMS}")


@dataclass
class SweepRecord:
    eps: float
    lam: float
    mechanism: str
    kind: str
    alpha: float | None
    mean_nmi: float
    mean_max_lift_leak: float
    mean_min_lift_leak: float
    mean_wall_time_s: float
    trials: int
    satisfied_fraction: float


RECORD_HEADER = tuple("lambda" if f.name == "lam" else f.name for f in fields(SweepRecord))


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_HEADER)
    for r in records:
        w.writerow(["" if v is None else fmt(v) for v in astuple(r)])
    return buf.getvalue()


def trial_joints(cfg: SweepConfig) -> list[JointDistribution]:
    if cfg.joint is not None:
        return [cfg.joint] * cfg.trials
    return [sample_random_joint(cfg.ns, cfg.nx, [cfg.seed, i], cfg.generator) for i in range(cfg.trials)]


def _run_trial(args):
    j, mechanism, kind, b = args
    t0 = time.perf_counter()
    rep = synthesize(j, mechanism, kind, b)
    wall = time.perf_counter() - t0
    return rep.nmi, rep.max_lift_leak, rep.min_lift_leak, wall, rep.satisfied


def _cells(cfg: SweepConfig):
    kinds = (
        [MeasureKind(cfg.kind.tag, a) for a in cfg.alphas]
        if cfg.kind.tag is Measure.ALPHA_LIFT
        else [cfg.kind]
    )
    for mechanism in cfg.mechanisms:
        for kind in kinds:
            for lam in cfg.lambdas:
                for eps in cfg.eps:
                    yield eps, lam, mechanism, kind


@dataclass
class SweepResult:
    records: list = field(default_factory=list)
    skipped: list = field(default_factory=list)  # (cell, reason)


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Evaluate every (mechanism, kind, lambda, eps) cell over ``cfg.trials`` joints.

    A cell whose mechanism raises is skipped with a logged diagnostic; the
    sweep itself carries on. Results are written to ``cfg.out`` as CSV when
    it is set. With ``timing=False`` the wall-time column is written as 0 so
    repeated runs give byte-identical files.
    """
    joints = trial_joints(cfg)
    result = SweepResult()
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for eps, lam, mechanism, kind in _cells(cfg):
            cell = (eps, lam, mechanism, str(kind))
            if mechanism == "aorr" and joints[0].shape[1] > AORR_CAP:
                reason = f"aorr skipped: |X| = {joints[0].shape[1]} exceeds cap {AORR_CAP}"
                log.warning("cell %s: %s", cell, reason)
                result.skipped.append((cell, reason))
                continue
            b = Budget.from_ldp(eps, lam)
            tasks = [(j, mechanism, kind, b) for j in joints]
            try:
                if pool is None:
                    rows = [_run_trial(t) for t in tasks]
                else:
                    chunk = max(1, len(tasks) // (4 * cfg.workers))
                    rows = list(pool.map(_run_trial, tasks, chunksize=chunk))
            except (LiftlabError, CapExceeded) as exc:
                log.warning("cell %s aborted: %s", cell, exc)
                result.skipped.append((cell, str(exc)))
                continue
            arr = np.array(rows, dtype=float)
            result.records.append(
                SweepRecord(
                    eps=eps,
                    lam=lam,
                    mechanism=mechanism,
                    kind=str(kind),
                    alpha=kind.alpha if kind.tag is Measure.ALPHA_LIFT else None,
                    mean_nmi=float(arr[:, 0].mean()),
                    mean_max_lift_leak=float(arr[:, 1].mean()),
                    mean_min_lift_leak=float(arr[:, 2].mean()),
                    mean_wall_time_s=float(arr[:, 3].mean()) if cfg.timing else 0.0,
                    trials=len(rows),
                    satisfied_fraction=float(arr[:, 4].mean()),
                )
            )
    finally:
        if pool is not None:
            pool.shutdown()
    if cfg.out:
        write_text(cfg.out, records_to_csv(result.records))
    return result


# ---------------------------------------------------------------------------
# lift histograms


@dataclass
class LiftHistogram:
    width: float
    centers: np.ndarray
    log_psi_density: np.ndarray
    log_lam_density: np.ndarray
    log_psi: np.ndarray  # pooled raw values
    log_lam: np.ndarray

    @property
    def psi_range(self) -> float:
        return float(self.log_psi.max() - self.log_psi.min())

    @property
    def lam_range(self) -> float:
        return float(self.log_lam.max() - self.log_lam.min())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stat", "bin_center", "density"])
        for name, dens in (("log_psi", self.log_psi_density), ("log_lam", self.log_lam_density)):
            for c, d in zip(self.centers, dens):
                if d > 0:
                    w.writerow([name, fmt(float(c)), fmt(float(d))])
        return buf.getvalue()


def pooled_log_lifts(joints) -> tuple[np.ndarray, np.ndarray]:
    psi, lam = [], []
    for j in joints:
        lt = lift_table(j)
        psi.append(lt.log_psi)
        lam.append(lt.log_lam)
    return np.concatenate(psi), np.concatenate(lam)


def lift_histogram(
    ns: int, nx: int, trials: int, seed: int, width: float = 0.1, generator="dirichlet", joints=None
) -> LiftHistogram:
    """Pooled histograms of log psi(y) and log lam(y) over random joints.

    Bins have fixed ``width`` and are centred on multiples of it, so an
    exact zero sits in the middle of a bin. Densities integrate to one.
    """
    if joints is None:
        joints = [sample_random_joint(ns, nx, [seed, i], generator) for i in range(trials)]
    log_psi, log_lam = pooled_log_lifts(joints)
    both = np.concatenate([log_psi, log_lam])
    lo = math.floor(both.min() / width + 0.5)
    hi = math.floor(both.max() / width + 0.5)
    edges = (np.arange(lo, hi + 2) - 0.5) * width
    centers = np.round(np.arange(lo, hi + 1) * width, 12)
    dens_psi, _ = np.histogram(log_psi, edges, density=True)
    dens_lam, _ = np.histogram(log_lam, edges, density=True)
    return LiftHistogram(width, centers, dens_psi, dens_lam, log_psi, log_lam)


# ---------------------------------------------------------------------------
# single-joint analysis


def analyze(
    path,
    kind: MeasureKind = ALIP,
    b: Budget | None = None,
    mechanism: str = "watchdog-subset",
    out=None,
    report_out=None,
) -> MechanismReport:
    """Synthesize one mechanism for the joint in ``path``.

    The channel P(Y|X) goes to ``out`` as CSV and the key=value report to
    ``report_out`` when those are given.
    """
    j = read_joint_csv(path)
    rep = synthesize(j, mechanism, kind, b)
    if out is not None:
        write_text(out, channel_to_csv(rep.channel))
    if report_out is not None:
        write_text(report_out, report_to_text(rep))
    return rep


def default_report_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".report.txt")
