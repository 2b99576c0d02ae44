"""The relational structure under construction.

Each sort owns an arena of element ids with a union-find on top; each
relation owns a set of tuples split into ``all``, ``new`` (the delta read by
the current match phase) and ``pending`` (staged for the next delta).  Every
element has an occurrence list of the tuples it was inserted in, so merging two
classes only touches tuples of the element that stops being canonical.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .theory import FunctionalDependency, RhlTheory

Tuple = tuple[int, ...]


class UnionFind:
    """Parent array with path compression; the caller picks which root survives."""

    def __init__(self) -> None:
        self.parent: list[int] = []

    def __len__(self) -> int:
        return len(self.parent)

    def add(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, x: int) -> int:
        root = x
        parent = self.parent
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def link(self, kept: int, retired: int) -> None:
        self.parent[retired] = kept


class InsertOutcome(enum.Enum):
    ADDED = "added"
    DUPLICATE = "duplicate"
    EQUALITIES = "equalities"


@dataclass
class SortData:
    name: str
    uf: UnionFind = field(default_factory=UnionFind)
    canonical: dict[int, None] = field(default_factory=dict)
    new: dict[int, None] = field(default_factory=dict)
    pending: dict[int, None] = field(default_factory=dict)
    occurrences: list[list[tuple[int, Tuple]]] = field(default_factory=list)
    names: list[str] = field(default_factory=list)
    by_name: dict[str, int] = field(default_factory=dict)


@dataclass
class TupleStore:
    arity: tuple[int, ...]
    all: dict[Tuple, None] = field(default_factory=dict)
    new: dict[Tuple, None] = field(default_factory=dict)
    pending: dict[Tuple, None] = field(default_factory=dict)


class Index:
    """Map from the projection ``key`` of a tuple to the tuples with that projection.

    A functional index (one carrying a dependency) holds at most one tuple
    per key.
    """

    def __init__(self, rel: int, key: tuple[int, ...], dep: Optional[FunctionalDependency] = None):
        self.rel = rel
        self.key = key
        self.dep = dep
        self.table: dict[Tuple, dict[Tuple, None]] = {}

    def key_of(self, t: Tuple) -> Tuple:
        return tuple(t[i] for i in self.key)

    def lookup(self, key: Tuple) -> Iterable[Tuple]:
        return self.table.get(key, ())

    def add(self, t: Tuple) -> None:
        self.table.setdefault(self.key_of(t), {})[t] = None

    def remove(self, t: Tuple) -> None:
        k = self.key_of(t)
        bucket = self.table.get(k)
        if bucket is not None:
            bucket.pop(t, None)
            if not bucket:
                del self.table[k]

    def first(self, key: Tuple) -> Optional[Tuple]:
        bucket = self.table.get(key)
        return next(iter(bucket)) if bucket else None

    def __len__(self) -> int:
        return sum(len(b) for b in self.table.values())


class Structure:
    def __init__(self, theory: RhlTheory):
        self.theory = theory
        self.sorts = [SortData(name) for name in theory.sorts]
        self.rels = [TupleStore(rel.arity) for rel in theory.relations]
        self.indices: dict[tuple[int, tuple[int, ...]], Index] = {}
        self.rel_indices: list[list[Index]] = [[] for _ in theory.relations]
        self.functional: list[list[Index]] = [[] for _ in theory.relations]
        self.pending_equalities: list[tuple[int, int, int]] = []
        # Occurrence lists of elements that ceased to be canonical.
        self.staged: list[list[tuple[int, Tuple]]] = []

    # -- elements -----------------------------------------------------------

    def new_element(self, sort: int, name: Optional[str] = None) -> int:
        data = self.sorts[sort]
        e = data.uf.add()
        data.canonical[e] = None
        data.pending[e] = None
        data.occurrences.append([])
        if name is None:
            name = f"_{data.name}{e}"
            while name in data.by_name:
                name += "_"
        data.names.append(name)
        data.by_name[name] = e
        return e

    def intern(self, sort: int, name: str) -> int:
        e = self.sorts[sort].by_name.get(name)
        return e if e is not None else self.new_element(sort, name)

    def element_name(self, sort: int, e: int) -> str:
        return self.sorts[sort].names[e]

    def find(self, sort: int, e: int) -> int:
        return self.sorts[sort].uf.find(e)

    def elements(self, sort: int) -> Iterable[int]:
        return self.sorts[sort].canonical

    def new_elements(self, sort: int) -> Iterable[int]:
        return self.sorts[sort].new

    def num_elements(self, sort: int) -> int:
        return len(self.sorts[sort].canonical)

    def union(self, sort: int, a: int, b: int) -> Optional[tuple[int, int]]:
        """Merge the classes of ``a`` and ``b``; returns ``(kept, retired)`` or None."""
        data = self.sorts[sort]
        a, b = data.uf.find(a), data.uf.find(b)
        if a == b:
            return None
        la, lb = len(data.occurrences[a]), len(data.occurrences[b])
        kept, retired = (a, b) if la > lb or (la == lb and a < b) else (b, a)
        data.uf.link(kept, retired)
        moved = data.occurrences[retired]
        data.occurrences[retired] = []
        data.occurrences[kept].extend(moved)
        if moved:
            self.staged.append(moved)
        del data.canonical[retired]
        data.new.pop(retired, None)
        data.pending.pop(retired, None)
        return kept, retired

    # -- tuples -------------------------------------------------------------

    def tuples(self, rel: int) -> Iterable[Tuple]:
        return self.rels[rel].all

    def new_tuples(self, rel: int) -> Iterable[Tuple]:
        return self.rels[rel].new

    def contains(self, rel: int, t: Tuple) -> bool:
        return t in self.rels[rel].all

    def canonical_tuple(self, rel: int, t: Tuple) -> Tuple:
        sorts = self.sorts
        return tuple(sorts[s].uf.find(x) for s, x in zip(self.rels[rel].arity, t))

    def insert_tuple(self, rel: int, t: Tuple) -> InsertOutcome:
        """Insert a tuple of canonical elements.

        A clash with a functional index is not stored; instead the equalities
        that resolve it are queued on ``pending_equalities``.
        """
        store = self.rels[rel]
        assert len(t) == len(store.arity), "arity mismatch"
        if t in store.all:
            return InsertOutcome.DUPLICATE
        clash = False
        for idx in self.functional[rel]:
            other = idx.first(idx.key_of(t))
            if other is not None:
                clash = True
                for i in idx.dep.determined:
                    if t[i] != other[i]:
                        self.pending_equalities.append((store.arity[i], t[i], other[i]))
        if clash:
            return InsertOutcome.EQUALITIES
        store.all[t] = None
        store.pending[t] = None
        for idx in self.rel_indices[rel]:
            idx.add(t)
        entry = (rel, t)
        seen = set()
        for s, x in zip(store.arity, t):
            if (s, x) not in seen:
                seen.add((s, x))
                self.sorts[s].occurrences[x].append(entry)
        return InsertOutcome.ADDED

    def _remove(self, rel: int, t: Tuple) -> None:
        store = self.rels[rel]
        del store.all[t]
        store.new.pop(t, None)
        store.pending.pop(t, None)
        for idx in self.rel_indices[rel]:
            idx.remove(t)

    def normalize(self) -> bool:
        """Rewrite tuples that mention retired elements; returns whether anything changed."""
        changed = False
        while self.staged:
            staged, self.staged = self.staged, []
            for entries in staged:
                for rel, t in entries:
                    if t not in self.rels[rel].all:
                        continue  # stale entry
                    nt = self.canonical_tuple(rel, t)
                    if nt == t:
                        continue
                    self._remove(rel, t)
                    self.insert_tuple(rel, nt)
                    changed = True
        return changed

    def advance_deltas(self) -> None:
        for store in self.rels:
            store.new, store.pending = store.pending, {}
        for data in self.sorts:
            data.new, data.pending = data.pending, {}

    def mark_all_new(self) -> None:
        """Treat the whole structure as delta, e.g. before the first closing round."""
        for store in self.rels:
            store.new = dict(store.all)
            store.pending = {}
        for data in self.sorts:
            data.new = dict(data.canonical)
            data.pending = {}

    def has_delta(self) -> bool:
        return any(s.new or s.pending for s in self.rels) or any(
            d.new or d.pending for d in self.sorts
        )

    # -- indices ------------------------------------------------------------

    def index(self, rel: int, key: tuple[int, ...]) -> Index:
        idx = self.indices.get((rel, key))
        if idx is None:
            idx = Index(rel, key)
            for t in self.rels[rel].all:
                idx.add(t)
            self.indices[(rel, key)] = idx
            self.rel_indices[rel].append(idx)
        return idx

    def add_functional_index(self, dep: FunctionalDependency) -> Index:
        """Enforce ``dep`` from now on; tuples already stored that clash are
        dropped and replaced by the equalities they imply."""
        key = (dep.relation, dep.determining)
        idx = self.indices.get(key)
        if idx is not None and idx.dep is not None:
            # Same key means same determined positions; the source may differ.
            return idx
        if idx is not None:
            self.rel_indices[dep.relation].remove(idx)
        idx = Index(dep.relation, dep.determining, dep)
        arity = self.rels[dep.relation].arity
        for t in list(self.rels[dep.relation].all):
            other = idx.first(idx.key_of(t))
            if other is None:
                idx.add(t)
                continue
            for i in dep.determined:
                if t[i] != other[i]:
                    self.pending_equalities.append((arity[i], t[i], other[i]))
            self._remove(dep.relation, t)
        self.indices[key] = idx
        self.rel_indices[dep.relation].append(idx)
        self.functional[dep.relation].append(idx)
        return idx

    # -- diagnostics --------------------------------------------------------

    def check_canonical(self) -> list[str]:
        """Full scan of the canonical-form and index invariants."""
        problems = []
        for rel, store in enumerate(self.rels):
            name = self.theory.relations[rel].name
            for t in store.all:
                if self.canonical_tuple(rel, t) != t:
                    problems.append(f"{name}{t} is not canonical")
            for part in ("new", "pending"):
                if any(t not in store.all for t in getattr(store, part)):
                    problems.append(f"{name}.{part} is not a subset of {name}.all")
        for (rel, key), idx in self.indices.items():
            if len(idx) != len(self.rels[rel].all) or any(
                t not in idx.table.get(idx.key_of(t), ()) for t in self.rels[rel].all
            ):
                problems.append(f"index {key} on relation {rel} out of sync")
            if idx.dep is not None and any(len(b) > 1 for b in idx.table.values()):
                problems.append(f"functional index {key} on relation {rel} has a collision")
        return problems

    def size(self) -> tuple[int, int]:
        return sum(len(d.canonical) for d in self.sorts), sum(len(s.all) for s in self.rels)
