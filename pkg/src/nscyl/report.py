"""Verdict records shared by the bound checks."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

DEFAULT_REL_TOL = 1e-9
DEFAULT_ABS_TOL = 1e-12

PASS = "pass"
FAIL = "fail"
CAVEAT = "caveat"
TREND = "trend"
SKIP = "skip"
VERDICTS = (PASS, FAIL, CAVEAT, TREND, SKIP)


def passes(lhs: float, rhs: float, rel_tol: float = DEFAULT_REL_TOL,
           abs_tol: float = DEFAULT_ABS_TOL) -> bool:
    """``lhs <= rhs (1 + rel_tol) + abs_tol``; NaN never passes."""
    if math.isnan(lhs) or math.isnan(rhs):
        return False
    return lhs <= rhs * (1 + rel_tol) + abs_tol


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        return _clean(value.item())
    return value


@dataclass
class BoundReport:
    """Outcome of one inequality check.

    Attributes:
        name: identifier of the inequality.
        lhs: measured worst-case left-hand side.
        rhs: right-hand side at the same point.
        verdict: one of pass, fail, caveat, trend, skip.
        slack: ``rhs - lhs``.
        location: where the worst case occurred (e.g. ``{"x1": .., "t": ..}``).
        constants: constants used in the right-hand side.
        rel_tol: relative tolerance applied.
        note: free-form explanation (caveat reasons, trend fits).
    """

    name: str
    lhs: float
    rhs: float
    verdict: str
    slack: float = float("nan")
    location: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    rel_tol: float = DEFAULT_REL_TOL
    note: str = ""

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        self.lhs = float(self.lhs)
        self.rhs = float(self.rhs)
        if math.isnan(self.slack):
            self.slack = self.rhs - self.lhs

    @classmethod
    def compare(cls, name: str, lhs: float, rhs: float, *, rel_tol: float = DEFAULT_REL_TOL,
                abs_tol: float = DEFAULT_ABS_TOL, caveat: str | None = None,
                **kwargs) -> "BoundReport":
        """Build a report; a non-empty ``caveat`` overrides pass/fail."""
        if caveat:
            verdict = CAVEAT
            kwargs["note"] = (kwargs.get("note", "") + " " + caveat).strip()
        else:
            verdict = PASS if passes(lhs, rhs, rel_tol, abs_tol) else FAIL
        return cls(name=name, lhs=lhs, rhs=rhs, verdict=verdict, rel_tol=rel_tol, **kwargs)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    @property
    def failed(self) -> bool:
        return self.verdict == FAIL

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    def line(self) -> str:
        return (f"{self.name:<28s} {self.verdict.upper():<7s} lhs={self.lhs:.6g} "
                f"rhs={self.rhs:.6g} slack={self.slack:.3g}")
