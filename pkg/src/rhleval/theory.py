"""Relational Horn logic syntax and the static analyses the engine relies on.

A theory is a list of sorts, a list of relations with arities and a list of
sequents ``premise => conclusion``.  Variables are dense integers scoped to
one sequent; their names only live in ``Sequent.var_names`` for printing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union


@dataclass(frozen=True)
class RelationAtom:
    rel: int
    args: tuple[int, ...]


@dataclass(frozen=True)
class EqualAtom:
    lhs: int
    rhs: int


@dataclass(frozen=True)
class SortAtom:
    """``v : s``, i.e. ``v`` is defined (sort quantification)."""

    var: int
    sort: int


Atom = Union[RelationAtom, EqualAtom, SortAtom]


def atom_vars(atom: Atom) -> tuple[int, ...]:
    if isinstance(atom, RelationAtom):
        return atom.args
    if isinstance(atom, EqualAtom):
        return (atom.lhs, atom.rhs)
    return (atom.var,)


def rename_atom(atom: Atom, mapping: Sequence[int]) -> Atom:
    if isinstance(atom, RelationAtom):
        return RelationAtom(atom.rel, tuple(mapping[v] for v in atom.args))
    if isinstance(atom, EqualAtom):
        return EqualAtom(mapping[atom.lhs], mapping[atom.rhs])
    return SortAtom(mapping[atom.var], atom.sort)


@dataclass(frozen=True)
class Relation:
    name: str
    arity: tuple[int, ...]


@dataclass(frozen=True)
class Sequent:
    premise: tuple[Atom, ...]
    conclusion: tuple[Atom, ...]
    var_names: tuple[str, ...]
    name: str = ""

    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @cached_property
    def premise_vars(self) -> frozenset[int]:
        return frozenset(v for a in self.premise for v in atom_vars(a))

    @cached_property
    def conclusion_vars(self) -> frozenset[int]:
        return frozenset(v for a in self.conclusion for v in atom_vars(a))

    @property
    def surjective(self) -> bool:
        return classify_surjective(self)

    def describe(self, theory: Optional["RhlTheory"] = None) -> str:
        def fmt(atoms: Iterable[Atom]) -> str:
            return " & ".join(format_atom(a, self.var_names, theory) for a in atoms)

        return f"{fmt(self.premise)} => {fmt(self.conclusion)}"


def format_atom(atom: Atom, names: Sequence[str], theory: Optional["RhlTheory"] = None) -> str:
    if isinstance(atom, RelationAtom):
        rel = theory.relations[atom.rel].name if theory else f"r{atom.rel}"
        return f"{rel}({', '.join(names[v] for v in atom.args)})"
    if isinstance(atom, EqualAtom):
        return f"{names[atom.lhs]} = {names[atom.rhs]}"
    sort = theory.sorts[atom.sort] if theory else f"s{atom.sort}"
    return f"{names[atom.var]} : {sort}"


@dataclass(frozen=True)
class FunctionalDependency:
    """Positions ``determined`` of ``relation`` are fixed by ``determining``."""

    relation: int
    determined: tuple[int, ...]
    determining: tuple[int, ...]
    source: int  # index of the sequent that justifies the dependency


@dataclass(frozen=True)
class RhlTheory:
    sorts: tuple[str, ...]
    relations: tuple[Relation, ...]
    sequents: tuple[Sequent, ...]

    def sort_id(self, name: str) -> int:
        return self.sorts.index(name)

    def rel_id(self, name: str) -> int:
        for i, rel in enumerate(self.relations):
            if rel.name == name:
                return i
        raise KeyError(name)

    @cached_property
    def functional_projections(self) -> tuple[FunctionalDependency, ...]:
        return tuple(infer_functional_projections(self))


@dataclass(frozen=True)
class Diagnostic:
    sequent: int
    message: str
    atom: Optional[Atom] = None

    def __str__(self) -> str:
        return f"sequent {self.sequent}: {self.message}"


def infer_var_sorts(
    theory: RhlTheory, seq: Sequent, index: int = -1
) -> tuple[list[Optional[int]], list[Diagnostic]]:
    """Assign a sort to each variable of ``seq``; report arity and sort clashes."""
    sorts: list[Optional[int]] = [None] * seq.num_vars
    diags: list[Diagnostic] = []
    conflicted: set[int] = set()
    # Variables of malformed atoms; their sorts are not reported as missing.
    malformed: set[int] = set()

    def assign(var: int, sort: int, atom: Atom) -> None:
        if not 0 <= var < seq.num_vars:
            diags.append(Diagnostic(index, f"unknown variable {var}", atom))
            return
        current = sorts[var]
        if current is None:
            sorts[var] = sort
        elif current != sort and var not in conflicted:
            conflicted.add(var)
            diags.append(
                Diagnostic(
                    index,
                    f"variable {seq.var_names[var]} used at sorts "
                    f"{theory.sorts[current]} and {theory.sorts[sort]}",
                    atom,
                )
            )

    atoms = seq.premise + seq.conclusion
    for atom in atoms:
        if isinstance(atom, RelationAtom):
            if not 0 <= atom.rel < len(theory.relations):
                diags.append(Diagnostic(index, f"unknown relation {atom.rel}", atom))
                continue
            rel = theory.relations[atom.rel]
            if len(atom.args) != len(rel.arity):
                diags.append(
                    Diagnostic(
                        index,
                        f"{rel.name} expects {len(rel.arity)} arguments, got {len(atom.args)}",
                        atom,
                    )
                )
                malformed.update(atom.args)
                continue
            for var, sort in zip(atom.args, rel.arity):
                assign(var, sort, atom)
        elif isinstance(atom, SortAtom):
            assign(atom.var, atom.sort, atom)

    # Equalities propagate sorts between otherwise unsorted variables.
    eqs = [a for a in atoms if isinstance(a, EqualAtom)]
    changed = True
    while changed:
        changed = False
        for atom in eqs:
            ls, rs = sorts[atom.lhs], sorts[atom.rhs]
            if ls is None and rs is not None:
                sorts[atom.lhs] = rs
                changed = True
            elif rs is None and ls is not None:
                sorts[atom.rhs] = ls
                changed = True
    for atom in eqs:
        ls, rs = sorts[atom.lhs], sorts[atom.rhs]
        if ls is not None and rs is not None and ls != rs:
            diags.append(
                Diagnostic(
                    index,
                    f"equality between sorts {theory.sorts[ls]} and {theory.sorts[rs]}",
                    atom,
                )
            )
    used = seq.premise_vars | seq.conclusion_vars
    for var in sorted(used):
        if 0 <= var < seq.num_vars and sorts[var] is None and var not in malformed:
            diags.append(Diagnostic(index, f"cannot infer sort of {seq.var_names[var]}"))
    return sorts, diags


def validate_theory(theory: RhlTheory) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    for i, seq in enumerate(theory.sequents):
        diags.extend(infer_var_sorts(theory, seq, i)[1])
    return diags


def var_sorts(theory: RhlTheory, seq: Sequent) -> list[int]:
    sorts, diags = infer_var_sorts(theory, seq)
    if diags:
        raise ValueError(f"ill-sorted sequent {seq.describe(theory)}: {diags[0].message}")
    return [s if s is not None else -1 for s in sorts]


def canonicalize_sequent(seq: Sequent) -> Sequent:
    """Eliminate premise equalities by substituting the right side with the left."""
    parent = list(range(seq.num_vars))

    def find(v: int) -> int:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    premise_eqs = [a for a in seq.premise if isinstance(a, EqualAtom)]
    if not premise_eqs:
        return seq
    for atom in premise_eqs:
        keep, drop = find(atom.lhs), find(atom.rhs)
        if keep != drop:
            parent[drop] = keep

    # Renumber the surviving representatives densely, keeping their order.
    survivors = sorted({find(v) for v in range(seq.num_vars)})
    dense = {v: i for i, v in enumerate(survivors)}
    mapping = [dense[find(v)] for v in range(seq.num_vars)]
    premise = tuple(rename_atom(a, mapping) for a in seq.premise if not isinstance(a, EqualAtom))
    conclusion = tuple(rename_atom(a, mapping) for a in seq.conclusion)
    names = tuple(seq.var_names[v] for v in survivors)
    return Sequent(premise, conclusion, names, seq.name)


def classify_surjective(seq: Sequent) -> bool:
    return seq.conclusion_vars <= seq.premise_vars


def _conclusion_key(atoms: Iterable[Atom]) -> frozenset:
    key = set()
    for atom in atoms:
        if isinstance(atom, EqualAtom):
            if atom.lhs == atom.rhs:
                continue
            key.add(EqualAtom(min(atom.lhs, atom.rhs), max(atom.lhs, atom.rhs)))
        else:
            key.add(atom)
    return frozenset(key)


def _complete_permutation(partial: dict[int, int], num_vars: int) -> Iterable[list[int]]:
    """All extensions of an injective partial map to a permutation of ``range(num_vars)``.

    Variables outside ``dom | img`` stay fixed; the remaining holes are paired
    up in every possible way.
    """
    sources = [v for v in range(num_vars) if v not in partial and v in partial.values()]
    targets = [v for v in range(num_vars) if v in partial and v not in partial.values()]
    for choice in itertools.permutations(targets):
        perm = list(range(num_vars))
        for v, w in partial.items():
            perm[v] = w
        for v, w in zip(sources, choice):
            perm[v] = w
        yield perm


def _swapping_permutation(seq: Sequent, i: int, j: int) -> Optional[list[int]]:
    a, b = seq.premise[i], seq.premise[j]
    partial: dict[int, int] = {}
    for src, dst in itertools.chain(zip(a.args, b.args), zip(b.args, a.args)):
        if partial.setdefault(src, dst) != dst:
            return None
    if len(set(partial.values())) != len(partial):
        return None
    premise_key = sorted(map(repr, seq.premise))
    conclusion_key = _conclusion_key(seq.conclusion)
    for perm in _complete_permutation(partial, seq.num_vars):
        premise = [rename_atom(x, perm) for x in seq.premise]
        if sorted(map(repr, premise)) != premise_key:
            continue
        if _conclusion_key(rename_atom(x, perm) for x in seq.conclusion) == conclusion_key:
            return perm
    return None


def detect_symmetries(seq: Sequent) -> list[list[int]]:
    """Partition premise positions into classes related by sequent symmetries.

    Two relation atoms share a class when some variable permutation swaps
    them, fixes the premise as a multiset and maps the conclusion to an
    equivalent one.  Classes are closed transitively, which is sound because
    the swaps generate a group acting on the class.
    """
    n = len(seq.premise)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            a, b = seq.premise[i], seq.premise[j]
            if not (isinstance(a, RelationAtom) and isinstance(b, RelationAtom)):
                continue
            if a.rel != b.rel or find(i) == find(j):
                continue
            if _swapping_permutation(seq, i, j) is not None:
                parent[max(find(i), find(j))] = min(find(i), find(j))
    classes: dict[int, list[int]] = {}
    for i in range(n):
        classes.setdefault(find(i), []).append(i)
    return list(classes.values())


def _match_dependency(seq: Sequent, index: int) -> Optional[FunctionalDependency]:
    if len(seq.premise) != 2:
        return None
    a, b = seq.premise
    if not (isinstance(a, RelationAtom) and isinstance(b, RelationAtom)) or a.rel != b.rel:
        return None
    if len(set(a.args)) != len(a.args) or len(set(b.args)) != len(b.args):
        return None
    determined = tuple(k for k in range(len(a.args)) if a.args[k] != b.args[k])
    determining = tuple(k for k in range(len(a.args)) if a.args[k] == b.args[k])
    if not determined:
        return None
    # Variables at determined positions must not leak into shared positions.
    shared = {a.args[k] for k in determining}
    if any(a.args[k] in shared or b.args[k] in shared for k in determined):
        return None
    if set(a.args[k] for k in determined) & set(b.args[k] for k in determined):
        return None
    if not all(isinstance(c, EqualAtom) for c in seq.conclusion):
        return None
    expected = _conclusion_key(EqualAtom(a.args[k], b.args[k]) for k in determined)
    if _conclusion_key(seq.conclusion) != expected or len(expected) != len(determined):
        return None
    return FunctionalDependency(a.rel, determined, determining, index)


def infer_functional_projections(theory: RhlTheory) -> list[FunctionalDependency]:
    """Dependencies justified by sequents of the shape ``r(x, u) & r(x, w) => u = w``."""
    deps = []
    for i, seq in enumerate(theory.sequents):
        dep = _match_dependency(canonicalize_sequent(seq), i)
        if dep is not None:
            deps.append(dep)
    return deps


@dataclass
class TheoryBuilder:
    """Incremental construction of an ``RhlTheory`` from names."""

    sorts: list[str] = field(default_factory=list)
    relations: list[Relation] = field(default_factory=list)
    sequents: list[Sequent] = field(default_factory=list)

    def sort(self, name: str) -> int:
        if name not in self.sorts:
            self.sorts.append(name)
        return self.sorts.index(name)

    def relation(self, name: str, *arity: str) -> int:
        self.relations.append(Relation(name, tuple(self.sort(s) for s in arity)))
        return len(self.relations) - 1

    def add(self, seq: Sequent) -> None:
        self.sequents.append(seq)

    def build(self) -> RhlTheory:
        return RhlTheory(tuple(self.sorts), tuple(self.relations), tuple(self.sequents))
