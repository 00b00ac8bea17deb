"""Clause-level reporting shared by the verification routines.

Every asserted identity becomes a :class:`Clause` carrying its numeric
residual and threshold, so the CLI can emit machine-readable reports in
which nothing passes silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Clause:
    name: str
    identity: str          # the operator identity being checked, in plain text
    residual: float
    threshold: float
    passed: bool
    note: str = ""

    def as_dict(self) -> dict:
        d = {
            "name": self.name,
            "identity": self.identity,
            "residual": float(self.residual),
            "threshold": float(self.threshold),
            "passed": bool(self.passed),
        }
        if self.note:
            d["note"] = self.note
        return d


def clause(name: str, identity: str, res: float, threshold: float, note: str = "") -> Clause:
    return Clause(name, identity, float(res), float(threshold),
                  bool(res <= threshold), note)


@dataclass
class ClauseReport:
    """A bag of clauses; ``passed`` is the conjunction."""

    clauses: list[Clause] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def add(self, cl: Clause) -> Clause:
        self.clauses.append(cl)
        return cl

    def extend(self, other: "ClauseReport", prefix: str = "") -> None:
        for cl in other.clauses:
            name = f"{prefix}{cl.name}" if prefix else cl.name
            self.clauses.append(Clause(name, cl.identity, cl.residual,
                                       cl.threshold, cl.passed, cl.note))
        self.notes.extend(other.notes)

    @property
    def passed(self) -> bool:
        return all(cl.passed for cl in self.clauses)

    def max_residual(self) -> float:
        return max((cl.residual for cl in self.clauses), default=0.0)

    def as_dict(self) -> dict:
        d = {"clauses": [cl.as_dict() for cl in self.clauses],
             "passed": self.passed}
        if self.notes:
            d["notes"] = list(self.notes)
        return d
