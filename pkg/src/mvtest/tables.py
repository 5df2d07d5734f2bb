"""Reading grouped CSV data and writing result tables (CSV, JSON, text)."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Union

from .errors import NonNumericResponse, ParseError, TooFewGroups
from .manova import GroupedDataset, ManovaResult, Statistic
from .simlab import SimulationTable

SIMULATE_COLUMNS = (
    "scenario_id", "n_sizes", "cov_label", "treatment", "convention", "statistic",
    "rejection_rate", "mc_se", "reps", "alpha", "seed",
)
ANALYZE_COLUMNS = ("statistic", "value", "f", "df1", "df2", "p")
FORMATS = ("csv", "json", "text")

# display order of the paper's simulation tables
_TEXT_ORDER = (Statistic.ROY, Statistic.PILLAI, Statistic.HOTELLING_LAWLEY, Statistic.WILKS)


def read_grouped_csv(path, group_col: str = "group") -> GroupedDataset:
    """Read a stacked CSV (response columns plus one group column).

    Groups are ordered by first appearance; their codes are 1..g in that
    order, whatever the group values look like.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not any(cell.strip() for cell in rows[0]):
        raise ParseError("missing header", row=1)
    header = [h.strip() for h in rows[0]]
    if all(_is_number(h) for h in header):
        raise ParseError("missing header (first row is numeric)", row=1)
    matches = [i for i, h in enumerate(header) if h == group_col]
    if not matches:
        # fall back to a case-insensitive match so "Group" works for "group"
        matches = [i for i, h in enumerate(header) if h.lower() == group_col.lower()]
    if len(matches) != 1:
        raise ParseError(f"group column {group_col!r} not found in header {header}", row=1)
    gi = matches[0]
    resp_cols = [i for i in range(len(header)) if i != gi]
    if not resp_cols:
        raise ParseError("no response columns", row=1)

    y, labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=lineno)
        values = []
        for i in resp_cols:
            try:
                v = float(row[i])
            except ValueError:
                raise NonNumericResponse(f"non-numeric response {row[i]!r}",
                                         row=lineno, column=header[i]) from None
            if not math.isfinite(v):
                raise NonNumericResponse(f"non-finite response {row[i]!r}",
                                         row=lineno, column=header[i])
            values.append(v)
        label = row[gi].strip()
        if not label:
            raise ParseError("empty group value", row=lineno, column=header[gi])
        y.append(values)
        labels.append(label)
    if len(set(labels)) < 2:
        raise TooFewGroups(f"need at least 2 distinct values in {header[gi]!r}, "
                           f"found {len(set(labels))}")
    return GroupedDataset.from_stacked(y, labels)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _fmt(x: float, places: int = 4) -> str:
    if math.isinf(x):
        return "inf"
    return f"{x:.{places}f}"


def _fmt_df(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:.4f}".rstrip("0")


def simulation_records(table: SimulationTable) -> list[dict]:
    """Rows of a simulation table as formatted strings, keyed by CSV column."""
    return [
        {
            "scenario_id": str(row.scenario_id),
            "n_sizes": row.size_label,
            "cov_label": row.cov_label,
            "treatment": row.treatment,
            "convention": row.convention,
            "statistic": row.statistic.value,
            "rejection_rate": _fmt(row.rejection_rate, 4),
            "mc_se": _fmt(row.mc_se, 5),
            "reps": str(row.reps),
            "alpha": f"{row.alpha:g}",
            "seed": str(row.seed),
        }
        for row in table.rows
    ]


def analysis_records(result: ManovaResult) -> list[dict]:
    return [
        {
            "statistic": rep.kind.value,
            "value": _fmt(rep.value),
            "f": _fmt(rep.f),
            "df1": _fmt_df(rep.df1),
            "df2": _fmt_df(rep.df2),
            "p": _fmt(rep.p),
        }
        for rep in result.reports
    ]


_INT_FIELDS = {"scenario_id", "reps", "seed"}
_TEXT_FIELDS = {"n_sizes", "cov_label", "treatment", "convention", "statistic"}


def _typed(record: dict) -> dict:
    out = {}
    for key, value in record.items():
        if key in _TEXT_FIELDS:
            out[key] = value
        elif key in _INT_FIELDS:
            out[key] = int(value)
        else:
            out[key] = float(value)
    return out


def _render_csv(columns, records) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(records)
    return buf.getvalue()


def _render_json(payload) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _simulation_text(table: SimulationTable) -> str:
    lines = []
    blocks: dict = {}
    for row in table.rows:
        key = (row.cov_label, row.treatment)
        blocks.setdefault(key, {}).setdefault(row.size_label, {})[row.statistic] = row
    header = f"{'Sample sizes':<18}" + "".join(f"{k.short:>9}" for k in _TEXT_ORDER)
    for (cov_label, treatment), by_size in blocks.items():
        if lines:
            lines.append("")
        lines.append(f"{cov_label} ({treatment})")
        lines.append(header)
        lines.append("-" * len(header))
        for size, stats in by_size.items():
            cells = "".join(
                f"{_fmt(stats[k].rejection_rate):>9}" if k in stats else f"{'':>9}"
                for k in _TEXT_ORDER
            )
            lines.append(f"({size})".ljust(18) + cells)
    return "\n".join(lines) + "\n"


def _analysis_text(result: ManovaResult) -> str:
    head = ("Statistic", "Value", "F Value", "Num DF", "Den DF", "Pr > F")
    widths = (24, 8, 9, 8, 8, 8)
    lines = [f"Group treated as {result.treatment} ({result.convention} F convention)",
             "".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(head, widths)))]
    for rep in result.reports:
        cells = (rep.kind.display, _fmt(rep.value), _fmt(rep.f), _fmt_df(rep.df1),
                 _fmt_df(rep.df2), _fmt(rep.p))
        lines.append("".join(c.ljust(w) if i == 0 else c.rjust(w)
                             for i, (c, w) in enumerate(zip(cells, widths))))
    return "\n".join(lines) + "\n"


def render_table(t: Union[SimulationTable, ManovaResult], fmt: str = "csv") -> str:
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    if isinstance(t, SimulationTable):
        records = simulation_records(t)
        if fmt == "csv":
            return _render_csv(SIMULATE_COLUMNS, records)
        if fmt == "json":
            meta = {k: v for k, v in t.metadata.items() if k != "timestamp"}
            return _render_json({"metadata": meta, "rows": [_typed(r) for r in records]})
        return _simulation_text(t)
    if isinstance(t, ManovaResult):
        records = analysis_records(t)
        if fmt == "csv":
            return _render_csv(ANALYZE_COLUMNS, records)
        if fmt == "json":
            return _render_json({
                "metadata": {"treatment": t.treatment, "convention": t.convention},
                "rows": [_typed(r) for r in records],
            })
        return _analysis_text(t)
    raise TypeError(f"cannot render {type(t).__name__}")


def write_table(t, fmt: str = "csv", path=None) -> str:
    """Render ``t`` and write it to ``path`` (returns the text either way)."""
    text = render_table(t, fmt)
    if path is not None and str(path) != "-":
        Path(path).write_text(text)
    return text


def read_table_csv(path) -> list[dict]:
    """Parse a CSV written by :func:`write_table` back into typed records."""
    with open(path, newline="") as fh:
        return [_typed(rec) for rec in csv.DictReader(fh)]
