"""Flow-insensitive points-to analyses as PHL theories.

Steensgaard's analysis unifies both sides of every assignment; Andersen's
propagates points-to facts along assignments instead.  Both run on the same
engine, over ``Alloc(x, e)`` (x holds a pointer to allocation site e) and
``Assign(x, y)`` (y := x) facts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

from ..engine import CloseConfig, CloseReport, close, element_classes
from ..facts import ingest_facts
from ..phl import load_theory
from ..structure import Structure
from ..theory import RhlTheory

_DECLS = """
sort Var;
sort Site;
pred Alloc : Var * Site;
pred Assign : Var * Var;
pred PointsTo : Var * Site;
axiom Alloc(x, e) => PointsTo(x, e);
"""

STEENSGAARD_THEORY = _DECLS + "axiom Assign(x, y) => x = y;\n"
ANDERSEN_THEORY = _DECLS + "axiom Assign(x, y) & PointsTo(x, e) => PointsTo(y, e);\n"


@lru_cache(maxsize=None)
def _theory(text: str) -> RhlTheory:
    return load_theory(text)[0]


@dataclass
class ProgramFacts:
    alloc: list[tuple[str, str]] = field(default_factory=list)
    assign: list[tuple[str, str]] = field(default_factory=list)

    @property
    def variables(self) -> list[str]:
        seen = dict.fromkeys(x for x, _ in self.alloc)
        for x, y in self.assign:
            seen.setdefault(x)
            seen.setdefault(y)
        return list(seen)

    def to_text(self) -> str:
        lines = [f"Alloc({x}, {e})." for x, e in self.alloc]
        lines += [f"Assign({x}, {y})." for x, y in self.assign]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ProgramFacts":
        structure = Structure(_theory(STEENSGAARD_THEORY))
        ingest_facts(structure, text)
        facts = cls()
        for x, e in structure.tuples(0):
            facts.alloc.append((structure.element_name(0, x), structure.element_name(1, e)))
        for x, y in structure.tuples(1):
            facts.assign.append((structure.element_name(0, x), structure.element_name(0, y)))
        return facts


def _load(theory: RhlTheory, facts: ProgramFacts) -> Structure:
    structure = Structure(theory)
    for x, e in facts.alloc:
        structure.insert_tuple(0, (structure.intern(0, x), structure.intern(1, e)))
    for x, y in facts.assign:
        t = structure.canonical_tuple(1, (structure.intern(0, x), structure.intern(0, y)))
        structure.insert_tuple(1, t)
    return structure


@dataclass
class PointsToResult:
    classes: list[frozenset[str]]
    # Variable class -> allocation sites.
    points_to: dict[frozenset[str], frozenset[str]]
    report: CloseReport
    structure: Structure

    def of(self, var: str) -> frozenset[str]:
        for cls, sites in self.points_to.items():
            if var in cls:
                return sites
        return frozenset()


def _run(text: str, facts: ProgramFacts, config: Optional[CloseConfig]) -> PointsToResult:
    theory = _theory(text)
    structure = _load(theory, facts)
    report = close(structure, theory, config)
    classes = element_classes(structure, 0)
    sites: dict[int, set[str]] = {}
    for x, e in structure.tuples(2):
        sites.setdefault(structure.find(0, x), set()).add(structure.element_name(1, e))
    points_to = {}
    for cls in classes:
        root = structure.find(0, structure.sorts[0].by_name[next(iter(cls))])
        points_to[cls] = frozenset(sites.get(root, ()))
    return PointsToResult(classes, points_to, report, structure)


def steensgaard(facts: ProgramFacts, config: Optional[CloseConfig] = None) -> PointsToResult:
    return _run(STEENSGAARD_THEORY, facts, config)


def andersen(facts: ProgramFacts, config: Optional[CloseConfig] = None) -> PointsToResult:
    """Per-variable sets; every class of the result is a singleton."""
    return _run(ANDERSEN_THEORY, facts, config)


def format_points_to(result: PointsToResult) -> str:
    rows = []
    for cls in result.classes:
        members = ", ".join(sorted(cls))
        sites = ", ".join(sorted(result.points_to[cls]))
        rows.append(f"{{{members}}} -> {{{sites}}}")
    return "\n".join(sorted(rows)) + "\n"
