"""Verification results and their JSON form.

The JSON output contains no timings, host names or other run-dependent data,
so identical configurations give byte-identical reports.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional

from .config import SCHEMA, SampleConfig
from .suites import CONTROL_THRESHOLD

SUITE_ORDER = ("elliptic", "classical", "quantum", "face", "operator")


def _num(x: Optional[float]):
    return x if x is not None and math.isfinite(x) else None


@dataclass
class RelationResult:
    """Outcome of one check at one rank (``N`` is ``None`` if rank-independent)."""

    id: str
    suite: str
    anchor: str
    N: Optional[int]
    kind: str
    threshold: list
    samples: int
    attempts: int
    rejected: int
    max_value: Optional[float]
    min_value: Optional[float]
    passed: bool
    details: Optional[dict] = None

    def sort_key(self):
        return (SUITE_ORDER.index(self.suite), self.id, self.N or 0)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "suite": self.suite,
            "anchor": self.anchor,
            "N": self.N,
            "kind": self.kind,
            "threshold": self.threshold,
            "samples": self.samples,
            "attempts": self.attempts,
            "rejected": self.rejected,
            "max": _num(self.max_value),
            "min": _num(self.min_value),
            "pass": self.passed,
            "details": self.details,
        }

    def summary_line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        n = "-" if self.N is None else str(self.N)
        val = "nan" if self.max_value is None else f"{self.max_value:.3e}"
        if self.kind == "control":
            val = "nan" if self.min_value is None else f"min {self.min_value:.3e}"
        elif self.kind == "ratio" and self.min_value is not None:
            val = f"[{self.min_value:.4f}, {self.max_value:.4f}]"
        return (f"{tag}  {self.suite:9s} {self.id:22s} N={n:2s} {val:>24s}  "
                f"samples={self.samples} rejected={self.rejected}/{self.attempts}")


def judge(kind: str, values: List[float], tol: float, bounds, attempts: int, rejected: int) -> bool:
    """Pass rule shared by every check."""
    if not values or any(not math.isfinite(v) for v in values):
        return False
    if 2 * rejected >= attempts:
        return False
    if kind == "residual":
        return max(values) < tol
    if kind == "ratio":
        lo, hi = bounds
        return all(lo <= v <= hi for v in values)
    if kind == "control":
        return min(values) > CONTROL_THRESHOLD
    raise ValueError(f"unknown check kind {kind!r}")


@dataclass
class VerificationReport:
    config: SampleConfig
    results: List[RelationResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.results) and all(r.passed for r in self.results)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def failures(self) -> List[RelationResult]:
        return [r for r in self.results if not r.passed]

    def result(self, check_id: str, N: Optional[int] = None) -> RelationResult:
        for r in self.results:
            if r.id == check_id and (N is None or r.N == N):
                return r
        raise KeyError(f"no result for {check_id} (N={N})")

    def max_residual(self) -> float:
        vals = [r.max_value for r in self.results if r.kind == "residual" and r.max_value is not None]
        return max(vals, default=0.0)

    def to_dict(self) -> dict:
        from .. import __version__

        return {
            "schema": SCHEMA,
            "version": __version__,
            "config_hash": self.config.hash(),
            "config": self.config.to_dict(),
            "pass": self.passed,
            "results": [r.to_dict() for r in sorted(self.results, key=RelationResult.sort_key)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, allow_nan=False) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    def summary(self) -> str:
        lines = [r.summary_line() for r in sorted(self.results, key=RelationResult.sort_key)]
        n_fail = len(self.failures())
        lines.append(f"{len(self.results) - n_fail}/{len(self.results)} checks passed")
        return "\n".join(lines)
