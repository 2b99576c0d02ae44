"""Shared helpers: audited closing and random theory/structure generation."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from rhleval.engine import CloseConfig, CloseReport, Engine, Outcome
from rhleval.oracles import check_satisfaction
from rhleval.structure import Structure
from rhleval.theory import EqualAtom, Relation, RelationAtom, RhlTheory, Sequent


@dataclass
class Audit:
    """Totals over every close run through ``close_audited`` in this session."""

    fixpoints: int = 0
    invariant_checks: int = 0
    violations: list = field(default_factory=list)


AUDIT = Audit()


def close_audited(
    structure: Structure, theory: RhlTheory, config: Optional[CloseConfig] = None, single_loop: bool = False
) -> CloseReport:
    """Close with the full-scan invariant check on, then audit satisfaction at a fixpoint."""
    config = config or CloseConfig()
    config.check_invariants = True
    engine = Engine(theory, config)
    report = engine.close_single_loop(structure) if single_loop else engine.close(structure)
    AUDIT.invariant_checks += report.invariant_checks
    if report.outcome is Outcome.FIXPOINT:
        AUDIT.fixpoints += 1
        AUDIT.violations += check_satisfaction(structure, theory)
    return report


# -- random surjective theories -------------------------------------------------


def random_theory(rng: random.Random) -> RhlTheory:
    """At most 3 relations and 4 surjective sequents over one or two sorts."""
    nsorts = rng.randint(1, 2)
    sorts = tuple(f"S{i}" for i in range(nsorts))
    relations = []
    for r in range(rng.randint(1, 3)):
        n = rng.choices([1, 2, 3], weights=[2, 5, 1])[0]
        relations.append(Relation(f"R{r}", tuple(rng.randrange(nsorts) for _ in range(n))))
    sequents = []
    for k in range(rng.randint(1, 4)):
        binary = [i for i, rel in enumerate(relations) if len(rel.arity) >= 2]
        if binary and rng.random() < 0.25:
            sequents.append(_functional(relations, rng.choice(binary), k))
        else:
            sequents.append(_general(rng, relations, k))
    return RhlTheory(sorts, tuple(relations), tuple(sequents))


def _functional(relations: list[Relation], rel: int, k: int) -> Sequent:
    n = len(relations[rel].arity)
    xs = tuple(range(n - 1))
    u, w = n - 1, n
    names = tuple(f"v{i}" for i in range(n + 1))
    return Sequent((RelationAtom(rel, xs + (u,)), RelationAtom(rel, xs + (w,))),
                   (EqualAtom(u, w),), names, f"s{k}")


def _general(rng: random.Random, relations: list[Relation], k: int) -> Sequent:
    var_sort: list[int] = []

    def pick(sort: int, fresh_bias: float) -> int:
        pool = [v for v, s in enumerate(var_sort) if s == sort]
        if pool and rng.random() > fresh_bias:
            return rng.choice(pool)
        var_sort.append(sort)
        return len(var_sort) - 1

    premise: list = []
    for _ in range(rng.randint(1, 3)):
        rel = rng.randrange(len(relations))
        premise.append(RelationAtom(rel, tuple(pick(s, 0.5) for s in relations[rel].arity)))
    if rng.random() < 0.2:
        s = rng.choice(var_sort)
        pool = [v for v, t in enumerate(var_sort) if t == s]
        premise.append(EqualAtom(rng.choice(pool), rng.choice(pool)))
    conclusion: list = []
    for _ in range(rng.randint(1, 2)):
        usable = [i for i, rel in enumerate(relations) if all(s in var_sort for s in rel.arity)]
        if usable and rng.random() < 0.7:
            rel = rng.choice(usable)
            args = tuple(rng.choice([v for v, t in enumerate(var_sort) if t == s])
                         for s in relations[rel].arity)
            conclusion.append(RelationAtom(rel, args))
        else:
            s = rng.choice(var_sort)
            pool = [v for v, t in enumerate(var_sort) if t == s]
            conclusion.append(EqualAtom(rng.choice(pool), rng.choice(pool)))
    names = tuple(f"v{i}" for i in range(len(var_sort)))
    return Sequent(tuple(premise), tuple(conclusion), names, f"s{k}")


def random_structure(rng: random.Random, theory: RhlTheory, max_elements: int = 4,
                     max_tuples: int = 12) -> Structure:
    structure = Structure(theory)
    counts = [rng.randint(1, max_elements) for _ in theory.sorts]
    for s, n in enumerate(counts):
        for i in range(n):
            structure.intern(s, f"{theory.sorts[s].lower()}{i}")
    for _ in range(rng.randint(0, max_tuples)):
        rel = rng.randrange(len(theory.relations))
        arity = theory.relations[rel].arity
        t = tuple(rng.randrange(counts[s]) for s in arity)
        structure.insert_tuple(rel, t)
    return structure


def copy_structure(structure: Structure) -> Structure:
    """A fresh structure with the same named elements and tuples (no equalities)."""
    theory = structure.theory
    out = Structure(theory)
    for s, data in enumerate(structure.sorts):
        for name in data.names:
            out.intern(s, name)
    for r in range(len(theory.relations)):
        for t in structure.tuples(r):
            out.insert_tuple(r, t)
    return out
