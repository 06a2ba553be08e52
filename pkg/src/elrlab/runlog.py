"""Per-epoch metric records and their CSV form."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any

COLUMNS = (
    "epoch",
    "step",
    "ce",
    "reg",
    "total",
    "lambda",
    "clean_correct",
    "clean_incorrect",
    "wrong_correct",
    "wrong_memorized",
    "wrong_other",
    "kappa_sq_clean",
    "kappa_sq_wrong",
    "theta_dot_v",
    "grad_corr",
    "target_match_observed",
    "target_match_true",
    "target_wrong_match_observed",
    "target_wrong_match_true",
    "ens_clean_correct",
    "ens_wrong_correct",
    "ens_wrong_memorized",
    "mix_weight_mean",
)
INT_COLUMNS = {"epoch", "step"}


@dataclass
class RunLog:
    records: list[dict[str, Any]] = field(default_factory=list)
    diverged: bool = False
    message: str = ""
    params: Any = None
    targets: Any = None

    def append(self, **values) -> None:
        unknown = set(values) - set(COLUMNS)
        if unknown:
            raise KeyError(f"unknown RunLog columns: {sorted(unknown)}")
        rec = {c: values.get(c) for c in COLUMNS}
        for k, v in rec.items():
            if v is not None and k not in INT_COLUMNS and not math.isfinite(v):
                raise ValueError(f"non-finite value for {k}: {v}")
        self.records.append(rec)

    def column(self, name: str) -> list:
        return [r[name] for r in self.records]

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final(self) -> dict[str, Any]:
        return self.records[-1]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    return f"{v:.17g}"


def to_csv(log: RunLog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in log.records:
        w.writerow([_fmt(r[c]) for c in COLUMNS])
    return buf.getvalue()


def from_csv(text: str) -> RunLog:
    rows = list(csv.reader(io.StringIO(text)))
    if tuple(rows[0]) != COLUMNS:
        raise ValueError("CSV header does not match the RunLog schema")
    log = RunLog()
    for row in rows[1:]:
        rec = {}
        for c, v in zip(COLUMNS, row):
            if v == "":
                rec[c] = None
            elif c in INT_COLUMNS:
                rec[c] = int(v)
            else:
                rec[c] = float(v)
        log.records.append(rec)
    return log
