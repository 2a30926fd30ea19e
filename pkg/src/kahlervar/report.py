"""Named residual records with CSV and JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

CSV_COLUMNS = ("identity_id", "anchor", "norm_type", "residual", "tolerance", "pass", "runtime")


def _fmt(x: float) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6e}"


@dataclass
class Record:
    check_id: str
    anchor: str
    residual: float
    tolerance: float
    norm_type: str = "relative_linf"
    runtime: float = 0.0
    extra: dict = field(default_factory=dict)
    soft: bool = False
    min_order: float | None = None
    lower_bound: bool = False

    @property
    def passed(self) -> bool:
        """residual <= tolerance (>= for lower bounds), plus the FD order floor when set."""
        r = self.residual
        if math.isnan(r):
            return False
        ok = r >= self.tolerance if self.lower_bound else (math.isfinite(r) and r <= self.tolerance)
        if ok and self.min_order is not None:
            order = self.extra.get("order", math.nan)
            ok = not math.isnan(order) and order >= self.min_order
        return bool(ok)


class ResidualReport:
    """Order-independent collection of records; check ids must be unique."""

    def __init__(self, records=None):
        self._records: dict = {}
        for r in records or ():
            self.add(r)

    def add(self, record: Record) -> Record:
        if record.check_id in self._records:
            raise ValueError(f"duplicate check id {record.check_id}")
        self._records[record.check_id] = record
        return record

    def merge(self, other: "ResidualReport") -> "ResidualReport":
        for r in other.records:
            self.add(r)
        return self

    @property
    def records(self) -> list:
        return [self._records[k] for k in sorted(self._records)]

    def __getitem__(self, key) -> Record:
        return self._records[key]

    def __contains__(self, key) -> bool:
        return key in self._records

    def __len__(self) -> int:
        return len(self._records)

    @property
    def passed(self) -> bool:
        return all(r.passed or r.soft for r in self._records.values())

    def failures(self) -> list:
        return [r for r in self.records if not r.passed and not r.soft]

    def rescale(self, factor: float) -> "ResidualReport":
        """Multiply every upper tolerance by ``factor``; lower bounds and order floors stay."""
        for r in self._records.values():
            if not r.lower_bound:
                r.tolerance *= factor
        return self

    def to_csv(self, extra_columns: tuple = ()) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS[:-1] + tuple(extra_columns) + CSV_COLUMNS[-1:])
        for r in self.records:
            row = [r.check_id, r.anchor, r.norm_type, _fmt(r.residual), _fmt(r.tolerance),
                   "soft" if (r.soft and not r.passed) else str(r.passed).lower()]
            row += [_fmt(r.extra[c]) if isinstance(r.extra.get(c), float) else str(r.extra.get(c, ""))
                    for c in extra_columns]
            row.append(f"{r.runtime:.3f}")
            w.writerow(row)
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "total": len(self),
            "passed": sum(r.passed for r in self._records.values()),
            "failed": [r.check_id for r in self.failures()],
            "soft": [r.check_id for r in self.records if r.soft and not r.passed],
            "all_pass": self.passed,
            "max_ratio": max((r.residual / r.tolerance for r in self._records.values()
                              if r.tolerance > 0 and math.isfinite(r.residual) and not r.lower_bound),
                             default=0.0),
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)
