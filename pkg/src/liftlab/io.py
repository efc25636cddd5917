"""CSV input/output for joints, channels and mechanism reports.

A joint file is a plain CSV table of probabilities, rows indexed by S and
columns by X. An optional header row names the X symbols and an optional
leading column names the S symbols; either is detected by its cells not
parsing as numbers. Blank lines and lines starting with ``#`` are ignored.
Floats are written with 17 significant digits so they round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .errors import NegativeEntry, ParseError, SumOutOfTolerance
from .prob import Channel, JointDistribution, validate_joint


def fmt(v) -> str:
    """Round-trip float formatting; non-floats go through ``str``."""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def parse_joint_csv(text: str) -> JointDistribution:
    """Parse CSV text into a validated joint. Errors carry 1-based line numbers."""
    rows: list[tuple[int, list[str]]] = []
    for lineno, rec in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in rec]
        if not any(cells) or cells[0].startswith("#"):
            continue
        rows.append((lineno, cells))
    if not rows:
        raise ParseError("no data rows")

    col_labels = None
    first_line, first = rows[0]
    if not all(_is_number(c) for c in first[1:]) or (len(first) == 1 and not _is_number(first[0])):
        col_labels = first
        rows = rows[1:]
        if not rows:
            raise ParseError("header without data rows", first_line + 1)
    has_row_labels = any(not _is_number(cells[0]) for _, cells in rows)
    if col_labels is not None and has_row_labels:
        col_labels = col_labels[1:]

    row_labels, table, lines = [], [], []
    width = None
    for lineno, cells in rows:
        if has_row_labels:
            row_labels.append(cells[0])
            cells = cells[1:]
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(f"expected {width} values, found {len(cells)}", lineno)
        vals = []
        for k, c in enumerate(cells):
            try:
                v = float(c)
            except ValueError:
                raise ParseError(f"column {k + 1}: {c!r} is not a number", lineno) from None
            if not math.isfinite(v):
                raise ParseError(f"column {k + 1}: {c!r} is not finite", lineno)
            if v < 0:
                raise NegativeEntry(len(table), k, v, line=lineno)
            vals.append(v)
        table.append(vals)
        lines.append(lineno)
    if col_labels is not None and len(col_labels) != width:
        raise ParseError(f"header has {len(col_labels)} labels for {width} columns", first_line)
    try:
        return validate_joint(
            table,
            row_labels=row_labels if has_row_labels else None,
            col_labels=col_labels,
        )
    except SumOutOfTolerance as exc:
        raise SumOutOfTolerance(f"lines {lines[0]}-{lines[-1]}: {exc}") from None


def read_joint_csv(path) -> JointDistribution:
    return parse_joint_csv(Path(path).read_text(encoding="utf-8"))


def joint_to_csv(j: JointDistribution) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s"] + [str(c) for c in j.col_labels])
    for label, row in zip(j.row_labels, j.probs):
        w.writerow([str(label)] + [fmt(v) for v in row])
    return buf.getvalue()


def channel_to_csv(c: Channel) -> str:
    """One row per input x holding q(y|x) over the output labels."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x"] + [str(y) for y in c.output_labels])
    for label, row in zip(c.input_labels, c.probs):
        w.writerow([str(label)] + [fmt(v) for v in row])
    return buf.getvalue()


def report_to_text(report) -> str:
    """``key=value`` lines summarizing a :class:`MechanismReport`."""
    lines = {
        "mechanism": report.info.get("mechanism", ""),
        "kind": str(report.kind),
        "alpha": fmt(report.kind.alpha) if report.kind.tag.value == "alpha-lift" else "",
        "eps_l": fmt(float(report.budget.eps_l)),
        "eps_u": fmt(float(report.budget.eps_u)),
        "utility_mi": fmt(report.utility_mi),
        "nmi": fmt(report.nmi),
        "max_lift_leak": fmt(report.max_lift_leak),
        "min_lift_leak": fmt(report.min_lift_leak),
        "satisfied": str(bool(report.satisfied)).lower(),
        "outputs": str(len(report.channel.output_labels)),
    }
    if report.partition is not None:
        labels = report.channel.input_labels
        lines["low_risk"] = " ".join(str(labels[x]) for x in report.partition.low_risk)
        lines["groups"] = "; ".join(
            " ".join(str(labels[x]) for x in g) for g in report.partition.effective_groups
        )
    for key in ("vertices", "unions", "fallback", "capped"):
        if key in report.info:
            lines[key] = str(report.info[key]).lower()
    return "".join(f"{k}={v}\n" for k, v in lines.items())


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="")
