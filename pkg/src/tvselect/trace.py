"""Per-iteration records of the selection loops."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Termination(str, Enum):
    DISCREPANCY_MET = "DiscrepancyMet"
    ALPHA_STAGNATED = "AlphaStagnated"
    ITERATION_CAP = "IterationCap"
    P_UNDERFLOW = "POverflowedToZero"


SCALAR_HEADER = ("n", "alpha", "H", "B", "p")
FIELD_HEADER = ("n", "alpha_min", "alpha_mean", "alpha_max", "H", "B", "p")


@dataclass
class TraceRecord:
    n: int
    alpha_min: float
    alpha_mean: float
    alpha_max: float
    H: float
    B: float
    p: float

    @property
    def alpha(self):
        return self.alpha_mean


@dataclass
class SelectionTrace:
    """Accepted iterates of a selection loop plus how it ended.

    ``rejections`` counts trial solves discarded by a branch check and
    ``solves`` every inner solve; ``flags`` holds warnings such as
    ``"two_cycle"``.
    """

    method: str
    records: list = field(default_factory=list)
    termination: Termination | None = None
    rejections: int = 0
    solves: int = 0
    inner_iterations: int = 0
    flags: list = field(default_factory=list)
    branch: str = ""

    def add(self, n, alpha, H, B, p):
        a = np.asarray(alpha, dtype=np.float64)
        self.records.append(TraceRecord(n, float(a.min()), float(a.mean()), float(a.max()), float(H), float(B), float(p)))

    @property
    def iterations(self):
        """Index of the last accepted iterate (number of accepted updates)."""
        return self.records[-1].n if self.records else 0

    @property
    def alphas(self):
        return np.array([r.alpha for r in self.records])

    @property
    def H(self):
        return np.array([r.H for r in self.records])

    @property
    def B(self):
        return np.array([r.B for r in self.records])

    def to_csv(self, scalar=None):
        """CSV text; ``scalar`` selects the ``n,alpha,H,B,p`` layout (default: by method)."""
        if scalar is None:
            scalar = self.method in ("cps", "aps", "paps")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SCALAR_HEADER if scalar else FIELD_HEADER)
        for r in self.records:
            if scalar:
                w.writerow([r.n, repr(r.alpha), repr(r.H), repr(r.B), repr(r.p)])
            else:
                w.writerow([r.n, repr(r.alpha_min), repr(r.alpha_mean), repr(r.alpha_max), repr(r.H), repr(r.B), repr(r.p)])
        return buf.getvalue()

    def summary(self):
        last = self.records[-1] if self.records else None
        return {
            "method": self.method,
            "termination": self.termination.value if self.termination else None,
            "iterations": self.iterations,
            "rejections": self.rejections,
            "solves": self.solves,
            "inner_iterations": self.inner_iterations,
            "flags": list(self.flags),
            "branch": self.branch,
            "final": None if last is None else {
                "alpha_min": last.alpha_min, "alpha_mean": last.alpha_mean, "alpha_max": last.alpha_max,
                "H": last.H, "B": last.B, "p": last.p,
            },
        }
