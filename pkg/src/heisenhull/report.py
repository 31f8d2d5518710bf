"""Iteration logs shared by the envelope solvers."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field


@dataclass
class IterationRecord:
    outer: int
    inner_iters: int
    inner_residual: float
    linf_change: float
    mono_violation: float
    seconds: float


@dataclass
class SchemeReport:
    records: list = field(default_factory=list)
    converged: bool = False
    flags: list = field(default_factory=list)

    COLUMNS = ("outer", "inner_iters", "inner_residual", "linf_change",
               "mono_violation", "seconds")

    def add(self, *args) -> IterationRecord:
        rec = IterationRecord(*args)
        self.records.append(rec)
        return rec

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def max_mono_violation(self) -> float:
        return max((r.mono_violation for r in self.records), default=0.0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for r in self.records:
                w.writerow([r.outer, r.inner_iters, repr(r.inner_residual),
                            repr(r.linf_change), repr(r.mono_violation),
                            f"{r.seconds:.6f}"])
