"""Slow reference implementations used for differential testing.

Nothing here shares code with the engine's matcher or union-find: models are
plain sets of named tuples, matching is a literal nested loop over the atoms
in the order written, and equality is handled either by the setoid reduction
or by a quadratic congruence closure loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Optional, Sequence

from .structure import Structure
from .theory import (
    Atom,
    EqualAtom,
    Relation,
    RelationAtom,
    RhlTheory,
    Sequent,
    SortAtom,
    var_sorts,
)


class StepLimitExceeded(RuntimeError):
    pass


@dataclass
class GroundModel:
    """Elements per sort id and tuples per relation id, with named elements."""

    elements: list[set[Hashable]]
    relations: list[set[tuple]]

    @classmethod
    def empty(cls, theory: RhlTheory) -> "GroundModel":
        return cls([set() for _ in theory.sorts], [set() for _ in theory.relations])

    def copy(self) -> "GroundModel":
        return GroundModel([set(e) for e in self.elements], [set(r) for r in self.relations])


def ground_model(structure: Structure) -> GroundModel:
    """Canonical elements and tuples of ``structure``, by element name."""
    model = GroundModel.empty(structure.theory)
    for s, data in enumerate(structure.sorts):
        model.elements[s] = {data.names[e] for e in data.canonical}
    for r, rel in enumerate(structure.theory.relations):
        for t in structure.tuples(r):
            t = structure.canonical_tuple(r, t)
            model.relations[r].add(tuple(structure.element_name(s, x) for s, x in zip(rel.arity, t)))
    return model


def brute_matches(
    model: GroundModel,
    atoms: Sequence[Atom],
    sorts: Sequence[int],
    binding: Optional[dict[int, Hashable]] = None,
) -> Iterator[dict[int, Hashable]]:
    """Nested-loop enumeration of all bindings that satisfy ``atoms``.

    Equality atoms are tested after all other atoms; a side bound by nothing
    else ranges over its sort.
    """
    ordered = [a for a in atoms if not isinstance(a, EqualAtom)]
    ordered += [a for a in atoms if isinstance(a, EqualAtom)]

    def go(i: int, b: dict[int, Hashable]) -> Iterator[dict[int, Hashable]]:
        if i == len(ordered):
            yield dict(b)
            return
        atom = ordered[i]
        if isinstance(atom, RelationAtom):
            for t in model.relations[atom.rel]:
                new = dict(b)
                ok = True
                for v, x in zip(atom.args, t):
                    if new.setdefault(v, x) != x:
                        ok = False
                        break
                if ok:
                    yield from go(i + 1, new)
        elif isinstance(atom, SortAtom):
            if atom.var in b:
                if b[atom.var] in model.elements[atom.sort]:
                    yield from go(i + 1, b)
            else:
                for x in model.elements[atom.sort]:
                    yield from go(i + 1, {**b, atom.var: x})
        else:
            u, w = atom.lhs, atom.rhs
            if u in b and w in b:
                if b[u] == b[w]:
                    yield from go(i + 1, b)
            elif u in b or w in b:
                known = b[u] if u in b else b[w]
                yield from go(i + 1, {**b, u: known, w: known})
            else:
                for x in model.elements[sorts[u]]:
                    yield from go(i + 1, {**b, u: x, w: x})

    yield from go(0, dict(binding or {}))


@dataclass
class Violation:
    sequent: int
    match: dict[int, Hashable]
    text: str

    def __str__(self) -> str:
        return f"sequent {self.sequent} ({self.text}) violated at {self.match}"


def check_satisfaction(structure: Structure, theory: Optional[RhlTheory] = None) -> list[Violation]:
    """Every premise match of every sequent must extend to a conclusion match."""
    theory = theory or structure.theory
    model = ground_model(structure)
    violations = []
    for i, seq in enumerate(theory.sequents):
        sorts = var_sorts(theory, seq)
        for m in brute_matches(model, seq.premise, sorts):
            if next(brute_matches(model, seq.conclusion, sorts, m), None) is None:
                named = {seq.var_names[v]: x for v, x in m.items()}
                violations.append(Violation(i, named, seq.describe(theory)))
    return violations


# -- setoid reduction ---------------------------------------------------------


@dataclass(frozen=True)
class SetoidTheory:
    theory: RhlTheory
    eq_relations: tuple[int, ...]  # per sort, the relation standing for equality


def setoid_lower(theory: RhlTheory) -> SetoidTheory:
    """Replace equality by per-sort equivalence relations plus congruence sequents."""
    relations = list(theory.relations)
    eq_rel = []
    for s, name in enumerate(theory.sorts):
        eq_rel.append(len(relations))
        relations.append(Relation(f"eq_{name}", (s, s)))

    def lower_atoms(atoms: Iterable[Atom], sorts: list[int]) -> tuple[Atom, ...]:
        out: list[Atom] = []
        for a in atoms:
            if isinstance(a, EqualAtom):
                out.append(RelationAtom(eq_rel[sorts[a.lhs]], (a.lhs, a.rhs)))
            else:
                out.append(a)
        return tuple(out)

    sequents = []
    for seq in theory.sequents:
        sorts = var_sorts(theory, seq)
        sequents.append(
            Sequent(lower_atoms(seq.premise, sorts), lower_atoms(seq.conclusion, sorts),
                    seq.var_names, seq.name)
        )
    for s, name in enumerate(theory.sorts):
        eq = eq_rel[s]
        sequents += [
            Sequent((SortAtom(0, s),), (RelationAtom(eq, (0, 0)),), ("x",), f"refl_{name}"),
            Sequent((RelationAtom(eq, (0, 1)),), (RelationAtom(eq, (1, 0)),), ("x", "y"),
                    f"sym_{name}"),
            Sequent((RelationAtom(eq, (0, 1)), RelationAtom(eq, (1, 2))),
                    (RelationAtom(eq, (0, 2)),), ("x", "y", "z"), f"trans_{name}"),
        ]
    for r, rel in enumerate(theory.relations):
        n = len(rel.arity)
        for i, s in enumerate(rel.arity):
            args = tuple(range(n))
            moved = tuple(n if k == i else k for k in range(n))
            names = tuple(f"x{k}" for k in range(n)) + ("y",)
            sequents.append(
                Sequent((RelationAtom(r, args), RelationAtom(eq_rel[s], (i, n))),
                        (RelationAtom(r, moved),), names, f"cong_{rel.name}_{i}")
            )
    lowered = RhlTheory(theory.sorts, tuple(relations), tuple(sequents))
    return SetoidTheory(lowered, tuple(eq_rel))


def brute_close(model: GroundModel, theory: RhlTheory, step_limit: int = 10000) -> GroundModel:
    """Naive Datalog fixpoint: rescan everything every round, no indices or deltas."""
    model = model.copy()
    model.relations += [set() for _ in range(len(theory.relations) - len(model.relations))]
    compiled = []
    for seq in theory.sequents:
        if not seq.conclusion_vars <= seq.premise_vars:
            raise ValueError(f"oracle only handles surjective sequents: {seq.describe(theory)}")
        if any(isinstance(a, EqualAtom) for a in seq.conclusion):
            raise ValueError("oracle needs equality-free conclusions; use setoid_lower first")
        compiled.append((seq, var_sorts(theory, seq)))
    for _ in range(step_limit):
        found = [(seq, list(brute_matches(model, seq.premise, sorts))) for seq, sorts in compiled]
        changed = False
        for seq, matches in found:
            for m in matches:
                for atom in seq.conclusion:
                    if isinstance(atom, RelationAtom):
                        t = tuple(m[v] for v in atom.args)
                        if t not in model.relations[atom.rel]:
                            model.relations[atom.rel].add(t)
                            changed = True
        if not changed:
            return model
    raise StepLimitExceeded(f"no fixpoint after {step_limit} rounds")


# -- comparison -----------------------------------------------------------------


@dataclass(frozen=True)
class Quotient:
    """A model with each element replaced by the set of names in its class."""

    classes: tuple[frozenset[frozenset], ...]
    relations: tuple[frozenset[tuple], ...]


def quotient_of_structure(structure: Structure, relations: Optional[int] = None) -> Quotient:
    classes = []
    block: list[dict[int, frozenset]] = []
    for data in structure.sorts:
        members: dict[int, set] = {}
        for e, name in enumerate(data.names):
            members.setdefault(data.uf.find(e), set()).add(name)
        frozen = {root: frozenset(names) for root, names in members.items()}
        block.append(frozen)
        classes.append(frozenset(frozen.values()))
    rels = []
    theory = structure.theory
    for r in range(relations if relations is not None else len(theory.relations)):
        arity = theory.relations[r].arity
        rels.append(frozenset(
            tuple(block[s][structure.find(s, x)] for s, x in zip(arity, t))
            for t in structure.tuples(r)
        ))
    return Quotient(tuple(classes), tuple(rels))


def quotient_of_setoid(model: GroundModel, setoid: SetoidTheory, relations: int) -> Quotient:
    """Quotient a closed setoid model by its equality relations."""
    classes = []
    block: list[dict[Hashable, frozenset]] = []
    for s, elements in enumerate(model.elements):
        eq = model.relations[setoid.eq_relations[s]]
        cls = {x: frozenset(y for (a, y) in eq if a == x) | {x} for x in elements}
        block.append(cls)
        classes.append(frozenset(cls.values()))
    rels = []
    theory = setoid.theory
    for r in range(relations):
        arity = theory.relations[r].arity
        rels.append(frozenset(tuple(block[s][x] for s, x in zip(arity, t)) for t in model.relations[r]))
    return Quotient(tuple(classes), tuple(rels))


def oracle_quotient(structure: Structure, theory: Optional[RhlTheory] = None) -> Quotient:
    """Close a snapshot of ``structure`` with the setoid oracle and quotient it.

    The structure should not have been closed yet; it is left untouched.
    """
    theory = theory or structure.theory
    setoid = setoid_lower(theory)
    model = GroundModel.empty(setoid.theory)
    for s, data in enumerate(structure.sorts):
        model.elements[s] = set(data.names)
    for r, rel in enumerate(theory.relations):
        for t in structure.tuples(r):
            model.relations[r].add(tuple(structure.element_name(s, x) for s, x in zip(rel.arity, t)))
    # Equalities imposed before closing.
    for s, data in enumerate(structure.sorts):
        for e, name in enumerate(data.names):
            root = data.uf.find(e)
            if root != e:
                model.relations[setoid.eq_relations[s]].add((name, data.names[root]))
    closed = brute_close(model, setoid.theory)
    return quotient_of_setoid(closed, setoid, len(theory.relations))


# -- special-purpose references -------------------------------------------------


class NaiveUnionFind:
    def __init__(self) -> None:
        self.parent: dict[Hashable, Hashable] = {}

    def find(self, x: Hashable) -> Hashable:
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            x = self.parent[x]
        return x

    def union(self, a: Hashable, b: Hashable) -> bool:
        a, b = self.find(a), self.find(b)
        if a == b:
            return False
        self.parent[b] = a
        return True

    def classes(self, items: Iterable[Hashable]) -> list[frozenset]:
        out: dict[Hashable, set] = {}
        for x in items:
            out.setdefault(self.find(x), set()).add(x)
        return sorted((frozenset(c) for c in out.values()), key=lambda c: sorted(map(str, c)))


def naive_congruence_closure(
    graph: Iterable[tuple[Hashable, Hashable, Hashable]],
    equalities: Iterable[tuple[Hashable, Hashable]] = (),
) -> NaiveUnionFind:
    """Quadratic congruence closure for the graph of one binary function."""
    uf = NaiveUnionFind()
    graph = list(graph)
    for a, b in equalities:
        uf.union(a, b)
    graph = [(uf.find(x0), uf.find(x1), uf.find(x2)) for x0, x1, x2 in graph]
    while True:
        eqs = []
        for x0, x1, x2 in graph:
            for y0, y1, y2 in graph:
                if x0 == y0 and x1 == y1:
                    eqs.append((x2, y2))
        changed = False
        for lhs, rhs in eqs:
            if uf.find(lhs) != uf.find(rhs):
                uf.union(lhs, rhs)
                changed = True
        if not changed:
            return uf
        graph = [(uf.find(x0), uf.find(x1), uf.find(x2)) for x0, x1, x2 in graph]


@dataclass
class DirectSteensgaard:
    classes: list[frozenset[str]] = field(default_factory=list)
    points_to: dict[frozenset[str], frozenset[str]] = field(default_factory=dict)


def steensgaard_direct(
    alloc: Iterable[tuple[str, str]], assign: Iterable[tuple[str, str]]
) -> DirectSteensgaard:
    """Union-find over variables, points-to sets kept per class."""
    alloc, assign = list(alloc), list(assign)
    uf = NaiveUnionFind()
    variables = {x for x, _ in alloc} | {v for pair in assign for v in pair}
    for x, y in assign:
        uf.union(x, y)
    sets: dict[Hashable, set[str]] = {}
    for x, e in alloc:
        sets.setdefault(uf.find(x), set()).add(e)
    result = DirectSteensgaard(uf.classes(variables))
    for cls in result.classes:
        result.points_to[cls] = frozenset(sets.get(uf.find(next(iter(cls))), ()))
    return result
