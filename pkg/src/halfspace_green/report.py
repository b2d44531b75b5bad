"""Check records and verification reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional


@dataclass
class CheckRecord:
    check_id: str
    anchor: str
    max_defect: float
    tolerance: float
    passed: Optional[bool] = None
    skipped: bool = False
    note: str = ""

    def __post_init__(self):
        if self.passed is None and not self.skipped:
            self.passed = bool(math.isfinite(self.max_defect) and self.max_defect <= self.tolerance)

    @classmethod
    def skip(cls, check_id: str, anchor: str, reason: str) -> "CheckRecord":
        return cls(check_id, anchor, float("nan"), float("nan"), passed=None, skipped=True, note=reason)

    @property
    def status(self) -> str:
        if self.skipped:
            return "skip"
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "anchor": self.anchor,
            "max_defect": None if math.isnan(self.max_defect) else self.max_defect,
            "tolerance": None if math.isnan(self.tolerance) else self.tolerance,
            "status": self.status,
            "note": self.note,
        }


@dataclass
class VerificationReport:
    """Summary passes iff no record fails; skipped records carry their reason."""

    records: List[CheckRecord] = field(default_factory=list)

    def add(self, rec: CheckRecord) -> CheckRecord:
        self.records.append(rec)
        return rec

    def extend(self, other: "VerificationReport"):
        self.records.extend(other.records)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records if not r.skipped)

    def __getitem__(self, check_id: str) -> CheckRecord:
        for r in self.records:
            if r.check_id == check_id:
                return r
        raise KeyError(check_id)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "records": [r.to_dict() for r in self.records]}
