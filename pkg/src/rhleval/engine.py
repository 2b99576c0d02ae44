"""Evaluation of RHL theories over a ``Structure``.

``close`` alternates an inner loop that closes the structure under all
surjective sequents with single rounds of the non-surjective ones, and stops
once such a round leaves the structure unchanged.  Inner iterations are
semi-naive by default: each premise is matched once per symmetry class of its
atoms, with the class representative reading only the delta.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

from .structure import InsertOutcome, Structure
from .theory import (
    EqualAtom,
    RelationAtom,
    RhlTheory,
    Sequent,
    SortAtom,
    canonicalize_sequent,
    detect_symmetries,
    var_sorts,
)

log = logging.getLogger(__name__)


class Mode(enum.Enum):
    NAIVE = "naive"
    SEMI_NAIVE = "semi-naive"


class Outcome(enum.Enum):
    FIXPOINT = "Fixpoint"
    OUTER_LIMIT = "OuterLimit"
    INNER_LIMIT = "InnerLimit"


class InvariantViolation(AssertionError):
    pass


@dataclass
class CloseConfig:
    max_outer_steps: int = 10000
    max_inner_steps: int = 100000
    mode: Mode = Mode.SEMI_NAIVE
    symmetries: bool = True
    functional_projections: bool = True
    bottom: Optional[str] = None
    check_invariants: bool = False
    # When a list is given, (iteration, kind, sequent, *details) events are appended.
    trace: Optional[list] = None

    def __post_init__(self) -> None:
        if self.max_outer_steps < 1 or self.max_inner_steps < 1:
            raise ValueError("step limits must be at least 1")


@dataclass
class CloseReport:
    outcome: Outcome = Outcome.FIXPOINT
    outer_steps: int = 0
    inner_steps: int = 0
    matches: int = 0
    tuples_added: int = 0
    unions: int = 0
    fresh_elements: int = 0
    index_equalities: int = 0
    inconsistent: bool = False
    matches_by_sequent: list[int] = field(default_factory=list)
    invariant_checks: int = 0

    def stats(self) -> str:
        lines = [
            f"outcome: {self.outcome.value}",
            f"outer_steps: {self.outer_steps}",
            f"inner_steps: {self.inner_steps}",
            f"matches: {self.matches}",
            f"tuples_added: {self.tuples_added}",
            f"unions: {self.unions}",
            f"fresh_elements: {self.fresh_elements}",
            f"index_equalities: {self.index_equalities}",
        ]
        if self.inconsistent:
            lines.append("inconsistent: true")
        return "\n".join(lines)


# -- join plans ---------------------------------------------------------------

REL, SORT, EQ = "rel", "sort", "eq"


@dataclass(frozen=True)
class Step:
    """One loop of a nested-loop join.

    For relation steps ``key`` lists argument positions whose variable is
    bound when the step runs, ``free`` the positions that bind a variable and
    ``checks`` pairs of positions that must agree (repeated variables).
    """

    kind: str
    rel: int = -1
    args: tuple[int, ...] = ()
    key: tuple[int, ...] = ()
    free: tuple[int, ...] = ()
    checks: tuple[tuple[int, int], ...] = ()
    sort: int = -1
    delta: bool = False


@dataclass(frozen=True)
class JoinPlan:
    num_vars: int
    variants: tuple[tuple[Step, ...], ...]
    delta_positions: tuple[Optional[int], ...]

    def indices(self) -> set[tuple[int, tuple[int, ...]]]:
        return {
            (s.rel, s.key)
            for steps in self.variants
            for s in steps
            if s.kind == REL and s.key and not s.delta and len(s.key) < len(s.args)
        }


def _compile_steps(
    atoms: Sequence, order: Sequence[int], bound: set[int], delta_pos: Optional[int]
) -> tuple[Step, ...]:
    steps = []
    bound = set(bound)
    for pos in order:
        atom = atoms[pos]
        delta = pos == delta_pos
        if isinstance(atom, RelationAtom):
            key, free, checks = [], [], []
            first: dict[int, int] = {}
            for p, v in enumerate(atom.args):
                if v in bound:
                    key.append(p)
                elif v in first:
                    checks.append((first[v], p))
                else:
                    first[v] = p
                    free.append(p)
            steps.append(
                Step(REL, rel=atom.rel, args=atom.args, key=tuple(key), free=tuple(free),
                     checks=tuple(checks), delta=delta)
            )
            bound.update(atom.args)
        elif isinstance(atom, SortAtom):
            if atom.var in bound and not delta:
                continue  # sort membership is implied by typing
            steps.append(Step(SORT, args=(atom.var,), sort=atom.sort, delta=delta,
                              key=(0,) if atom.var in bound else ()))
            bound.add(atom.var)
        else:
            raise ValueError("equality atoms must be eliminated before planning")
    return tuple(steps)


def _greedy_order(atoms: Sequence, bound: set[int], first: Optional[int] = None) -> list[int]:
    """Order atoms so that each one has as many bound variables as possible."""
    bound = set(bound)
    remaining = [i for i in range(len(atoms)) if i != first]
    order = []
    if first is not None:
        order.append(first)
        bound.update(_vars(atoms[first]))
    while remaining:
        def score(i: int) -> tuple:
            vs = set(_vars(atoms[i]))
            return (isinstance(atoms[i], RelationAtom), len(vs & bound), -len(vs - bound), -i)

        best = max(remaining, key=score)
        remaining.remove(best)
        order.append(best)
        bound.update(_vars(atoms[best]))
    return order


def _vars(atom) -> tuple[int, ...]:
    if isinstance(atom, RelationAtom):
        return atom.args
    if isinstance(atom, SortAtom):
        return (atom.var,)
    return atom.args


def plan_sequent(
    theory: RhlTheory, seq: Sequent, mode: Mode = Mode.SEMI_NAIVE, symmetries: bool = True
) -> JoinPlan:
    """Plan the premise of a canonicalized sequent.

    Semi-naive plans have one variant per symmetry class of premise atoms;
    naive plans a single variant over all data.
    """
    atoms = list(seq.premise)
    if mode is Mode.NAIVE or not atoms:
        steps = _compile_steps(atoms, _greedy_order(atoms, set()), set(), None)
        return JoinPlan(seq.num_vars, (steps,), (None,))
    if symmetries:
        classes = detect_symmetries(seq)
    else:
        classes = [[i] for i in range(len(atoms))]
    variants, positions = [], []
    for cls in classes:
        pos = cls[0]
        order = _greedy_order(atoms, set(), first=pos)
        variants.append(_compile_steps(atoms, order, set(), pos))
        positions.append(pos)
    return JoinPlan(seq.num_vars, tuple(variants), tuple(positions))


# -- matching -----------------------------------------------------------------


def _run(structure: Structure, steps: Sequence[Step], binding: list[int], i: int) -> Iterator[list[int]]:
    if i == len(steps):
        yield list(binding)
        return
    step = steps[i]
    if step.kind == REL:
        store = structure.rels[step.rel]
        args = step.args
        if len(step.key) == len(args):
            t = tuple(binding[v] for v in args)
            if t in (store.new if step.delta else store.all):
                yield from _run(structure, steps, binding, i + 1)
            return
        scan = True
        if step.delta:
            candidates: Iterable = store.new
        elif step.key:
            idx = structure.index(step.rel, step.key)
            candidates = idx.lookup(tuple(binding[args[p]] for p in step.key))
            scan = False
        else:
            candidates = store.all
            scan = False
        key, free, checks = step.key, step.free, step.checks
        for t in candidates:
            if scan and any(t[p] != binding[args[p]] for p in key):
                continue
            if checks and any(t[p] != t[q] for p, q in checks):
                continue
            for p in free:
                binding[args[p]] = t[p]
            yield from _run(structure, steps, binding, i + 1)
    elif step.kind == SORT:
        var = step.args[0]
        data = structure.sorts[step.sort]
        source = data.new if step.delta else data.canonical
        if step.key:
            if binding[var] in source:
                yield from _run(structure, steps, binding, i + 1)
            return
        for e in list(source):
            binding[var] = e
            yield from _run(structure, steps, binding, i + 1)
    else:
        u, w = step.args
        if structure.find(step.sort, binding[u]) == structure.find(step.sort, binding[w]):
            yield from _run(structure, steps, binding, i + 1)


def find_matches(
    structure: Structure, plan: JoinPlan, fixed: Optional[dict[int, int]] = None
) -> Iterator[list[int]]:
    """Yield premise matches as binding vectors indexed by variable id.

    Semi-naive plans yield every match touching delta data at least once.
    Fixed bindings must be canonical; variables they bind are filtered on.
    """
    fixed = fixed or {}
    for steps in plan.variants:
        if fixed:
            steps = _restrict(steps, fixed)
        binding = [-1] * plan.num_vars
        for v, e in fixed.items():
            binding[v] = e
        yield from _run(structure, steps, binding, 0)


def _restrict(steps: Sequence[Step], fixed: dict[int, int]) -> tuple[Step, ...]:
    """Re-key steps of a plan compiled without fixed variables."""
    out = []
    bound = set(fixed)
    for step in steps:
        if step.kind == REL:
            key, free, checks = [], [], []
            first: dict[int, int] = {}
            for p, v in enumerate(step.args):
                if v in bound:
                    key.append(p)
                elif v in first:
                    checks.append((first[v], p))
                else:
                    first[v] = p
                    free.append(p)
            out.append(Step(REL, rel=step.rel, args=step.args, key=tuple(key), free=tuple(free),
                            checks=tuple(checks), delta=step.delta))
            bound.update(step.args)
        elif step.kind == SORT:
            var = step.args[0]
            out.append(Step(SORT, args=step.args, sort=step.sort, delta=step.delta,
                            key=(0,) if var in bound else ()))
            bound.add(var)
        else:
            out.append(step)
    return tuple(out)


# -- compiled sequents --------------------------------------------------------


@dataclass
class CompiledSequent:
    index: int
    seq: Sequent
    sorts: list[int]
    surjective: bool
    plan: JoinPlan
    naive_plan: JoinPlan
    equalities: list[tuple[int, int, int]]
    relations: list[RelationAtom]
    # Conclusion-only variables in allocation order and their representative
    # after merging conclusion equalities.
    fresh_vars: list[int]
    alias: list[int]
    extension: tuple[Step, ...] = ()
    skip: bool = False


def _conclusion_query(seq: Sequent, sorts: list[int]) -> tuple[tuple[Step, ...], list[int]]:
    """Steps that search for an extension of a premise match satisfying the conclusion."""
    parent = list(range(seq.num_vars))
    premise = seq.premise_vars

    def find(v: int) -> int:
        while parent[v] != v:
            v = parent[v]
        return v

    checks = []
    for atom in seq.conclusion:
        if isinstance(atom, EqualAtom):
            a, b = find(atom.lhs), find(atom.rhs)
            if a == b:
                continue
            if a in premise and b in premise:
                checks.append(EqualAtom(a, b))
                parent[b] = a
            elif b in premise:
                parent[a] = b
            else:
                parent[b] = a
    alias = [find(v) for v in range(seq.num_vars)]
    atoms: list = []
    for atom in seq.conclusion:
        if isinstance(atom, RelationAtom):
            atoms.append(RelationAtom(atom.rel, tuple(alias[v] for v in atom.args)))
        elif isinstance(atom, SortAtom) and alias[atom.var] not in premise:
            atoms.append(SortAtom(alias[atom.var], atom.sort))
    bound = set(premise)
    steps = list(_compile_steps(atoms, _greedy_order(atoms, bound), bound, None))
    # Equalities between premise variables are checked up front.
    eq_steps = [Step(EQ, args=(c.lhs, c.rhs), sort=sorts[c.lhs]) for c in checks]
    return tuple(eq_steps + steps), alias


def compile_sequent(theory: RhlTheory, index: int, seq: Sequent, config: CloseConfig) -> CompiledSequent:
    seq = canonicalize_sequent(seq)
    sorts = var_sorts(theory, seq)
    plan = plan_sequent(theory, seq, config.mode, config.symmetries)
    naive = plan if config.mode is Mode.NAIVE else plan_sequent(theory, seq, Mode.NAIVE)
    equalities = [
        (sorts[a.lhs], a.lhs, a.rhs)
        for a in seq.conclusion
        if isinstance(a, EqualAtom) and a.lhs != a.rhs
    ]
    relations = [a for a in seq.conclusion if isinstance(a, RelationAtom)]
    fresh = sorted(seq.conclusion_vars - seq.premise_vars)
    cs = CompiledSequent(index, seq, sorts, not fresh, plan, naive, equalities, relations,
                         fresh, list(range(seq.num_vars)))
    if fresh:
        cs.extension, cs.alias = _conclusion_query(seq, sorts)
    return cs


# -- evaluation ---------------------------------------------------------------


class Engine:
    def __init__(self, theory: RhlTheory, config: Optional[CloseConfig] = None):
        self.theory = theory
        self.config = config or CloseConfig()
        self.compiled = [
            compile_sequent(theory, i, seq, self.config) for i, seq in enumerate(theory.sequents)
        ]
        self.dependencies = list(theory.functional_projections) if self.config.functional_projections else []
        for dep in self.dependencies:
            self.compiled[dep.source].skip = True
        self.report = CloseReport(matches_by_sequent=[0] * len(self.compiled))
        self.iteration = 0

    # events and bookkeeping

    def _event(self, kind: str, seq: int, *details) -> None:
        if self.config.trace is not None:
            self.config.trace.append((self.iteration, kind, seq) + details)

    def _check(self, structure: Structure) -> None:
        if not self.config.check_invariants:
            return
        self.report.invariant_checks += 1
        problems = structure.check_canonical()
        if problems:
            raise InvariantViolation("; ".join(problems[:5]))

    def _union(self, structure: Structure, sort: int, a: int, b: int, seq: int) -> bool:
        merged = structure.union(sort, a, b)
        if merged is None:
            return False
        self.report.unions += 1
        self._event("union", seq, sort, *merged)
        return True

    def _insert(self, structure: Structure, rel: int, t: tuple[int, ...], seq: int) -> InsertOutcome:
        outcome = structure.insert_tuple(rel, t)
        if outcome is InsertOutcome.ADDED:
            self.report.tuples_added += 1
            self._event("insert", seq, rel, t)
        return outcome

    def _drain_equalities(self, structure: Structure) -> bool:
        changed = False
        while structure.pending_equalities:
            pending, structure.pending_equalities = structure.pending_equalities, []
            # Everything queued here came from functional indices.
            self.report.index_equalities += len(pending)
            for sort, a, b in pending:
                changed |= self._union(structure, sort, a, b, -1)
        return changed

    def matches(self, structure: Structure, cs: CompiledSequent, naive: bool) -> list[list[int]]:
        plan = cs.naive_plan if naive else cs.plan
        found = list(find_matches(structure, plan))
        self.report.matches += len(found)
        self.report.matches_by_sequent[cs.index] += len(found)
        return found

    def prepare(self, structure: Structure) -> None:
        for dep in self.dependencies:
            structure.add_functional_index(dep)
        structure.normalize()
        structure.mark_all_new()

    # conclusion application

    def apply_conclusion(self, structure: Structure, cs: CompiledSequent, match: Sequence[int]) -> bool:
        """Make the conclusion hold for ``match``; returns whether the structure changed."""
        binding = list(match) + [-1] * (cs.seq.num_vars - len(match))
        for v in cs.seq.premise_vars:
            binding[v] = structure.find(cs.sorts[v], binding[v])
        changed = False
        if cs.fresh_vars:
            probe = [-1] * cs.seq.num_vars
            for v in cs.seq.premise_vars:
                probe[v] = binding[v]
            if next(_run(structure, cs.extension, probe, 0), None) is not None:
                return False
            for v in cs.fresh_vars:
                rep = cs.alias[v]
                if binding[rep] < 0:
                    binding[rep] = structure.new_element(cs.sorts[rep])
                    self.report.fresh_elements += 1
                    self._event("fresh", cs.index, cs.sorts[rep], binding[rep])
                binding[v] = binding[rep]
            changed = True
        merged = False
        for sort, u, w in cs.equalities:
            merged |= self._union(structure, sort, binding[u], binding[w], cs.index)
        if merged:
            structure.normalize()
            changed = True
        for atom in cs.relations:
            t = structure.canonical_tuple(atom.rel, tuple(binding[v] for v in atom.args))
            if self._insert(structure, atom.rel, t, cs.index) is not InsertOutcome.DUPLICATE:
                changed = True
        return changed

    # loops

    def inner_iteration(self, structure: Structure, first: bool) -> bool:
        naive = self.config.mode is Mode.NAIVE
        found = []
        for cs in self.compiled:
            if cs.skip or not cs.surjective:
                continue
            if not cs.seq.premise:
                ms = [[-1] * cs.seq.num_vars] if (naive or first) else []
                self.report.matches_by_sequent[cs.index] += len(ms)
            else:
                ms = self.matches(structure, cs, naive)
            if ms:
                found.append((cs, ms))

        added_before = self.report.tuples_added
        changed = self._drain_equalities(structure)
        for cs, ms in found:
            for sort, u, w in cs.equalities:
                for m in ms:
                    changed |= self._union(structure, sort, m[u], m[w], cs.index)
        changed |= structure.normalize()
        for cs, ms in found:
            for atom in cs.relations:
                for m in ms:
                    t = structure.canonical_tuple(atom.rel, tuple(m[v] for v in atom.args))
                    self._insert(structure, atom.rel, t, cs.index)
        changed |= structure.normalize()
        structure.advance_deltas()
        changed |= self.report.tuples_added != added_before
        changed |= bool(structure.pending_equalities)
        return changed

    def outer_step(self, structure: Structure) -> bool:
        found = []
        for cs in self.compiled:
            if cs.skip or cs.surjective:
                continue
            found.append((cs, self.matches(structure, cs, naive=True)))
        changed = False
        for cs, ms in found:
            for m in ms:
                changed |= self.apply_conclusion(structure, cs, m)
        structure.normalize()
        structure.advance_deltas()
        return changed

    def close(self, structure: Structure) -> CloseReport:
        report = self.report
        self.prepare(structure)
        self._check(structure)
        first = True
        while True:
            inner = 0
            while True:
                if inner >= self.config.max_inner_steps:
                    report.outcome = Outcome.INNER_LIMIT
                    return self._finish(structure)
                inner += 1
                report.inner_steps += 1
                self.iteration += 1
                changed = self.inner_iteration(structure, first)
                first = False
                self._check(structure)
                if not changed:
                    break
            if report.outer_steps >= self.config.max_outer_steps:
                report.outcome = Outcome.OUTER_LIMIT
                return self._finish(structure)
            report.outer_steps += 1
            self.iteration += 1
            changed = self.outer_step(structure)
            self._check(structure)
            if not changed and not structure.pending_equalities:
                report.outcome = Outcome.FIXPOINT
                return self._finish(structure)

    def close_single_loop(self, structure: Structure) -> CloseReport:
        """All sequents matched and applied together in one naive loop.

        This is the strategy that diverges on theories like the retract
        theory; it is kept for regression tests and comparisons.
        """
        report = self.report
        self.prepare(structure)
        while True:
            if report.outer_steps >= self.config.max_outer_steps:
                report.outcome = Outcome.OUTER_LIMIT
                return self._finish(structure)
            report.outer_steps += 1
            self.iteration += 1
            changed = self._drain_equalities(structure)
            structure.normalize()
            found = [(cs, self.matches(structure, cs, naive=True)) for cs in self.compiled if not cs.skip]
            for cs, ms in found:
                for m in ms:
                    changed |= self.apply_conclusion(structure, cs, m)
            changed |= structure.normalize()
            structure.advance_deltas()
            self._check(structure)
            if not changed and not structure.pending_equalities:
                report.outcome = Outcome.FIXPOINT
                return self._finish(structure)

    def _finish(self, structure: Structure) -> CloseReport:
        if self.config.bottom is not None:
            rel = self.theory.rel_id(self.config.bottom)
            self.report.inconsistent = bool(structure.rels[rel].all)
        log.debug("close finished: %s", self.report)
        return self.report


def close(structure: Structure, theory: RhlTheory, config: Optional[CloseConfig] = None) -> CloseReport:
    return Engine(theory, config).close(structure)


def close_single_loop(structure: Structure, theory: RhlTheory, config: Optional[CloseConfig] = None) -> CloseReport:
    return Engine(theory, config).close_single_loop(structure)


def apply_conclusion(structure: Structure, theory: RhlTheory, index: int, match: Sequence[int],
                     config: Optional[CloseConfig] = None) -> bool:
    """Apply the conclusion of ``theory.sequents[index]`` (canonicalized) to one match."""
    engine = Engine(theory, config or CloseConfig(functional_projections=False))
    return engine.apply_conclusion(structure, engine.compiled[index], match)


CONGRUENCE_THEORY = """
sort N;
func f : N * N -> N;
"""


def run_congruence_closure(
    triples: Iterable[tuple[str, str, str]],
    equalities: Iterable[tuple[str, str]] = (),
    config: Optional[CloseConfig] = None,
    nodes: Iterable[str] = (),
) -> tuple[list[frozenset[str]], CloseReport]:
    """Close the graph of one binary function under its functionality axiom.

    Returns the equivalence classes over all mentioned nodes and the report.
    """
    from .phl import load_theory

    theory, _ = load_theory(CONGRUENCE_THEORY)
    structure = Structure(theory)
    for name in nodes:
        structure.intern(0, name)
    for t in triples:
        ids = tuple(structure.intern(0, x) for x in t)
        structure.insert_tuple(0, structure.canonical_tuple(0, ids))
    for a, b in equalities:
        structure.union(0, structure.intern(0, a), structure.intern(0, b))
    report = close(structure, theory, config)
    return element_classes(structure, 0), report


def element_classes(structure: Structure, sort: int) -> list[frozenset[str]]:
    data = structure.sorts[sort]
    classes: dict[int, set[str]] = {}
    for e, name in enumerate(data.names):
        classes.setdefault(data.uf.find(e), set()).add(name)
    return sorted((frozenset(c) for c in classes.values()), key=sorted)
