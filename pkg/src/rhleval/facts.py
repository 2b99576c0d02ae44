"""Facts files and deterministic model dumps.

A facts file holds one fact per line::

    Le(n1, n2).
    elem lonely : A.

Element names are interned per sort; the sort follows from the relation arity.
"""

from __future__ import annotations

import re

from .structure import Structure

_NAME = r"[A-Za-z0-9_]+"
_FACT = re.compile(rf"^({_NAME})\s*\(\s*(.*?)\s*\)\s*\.$")
_ELEM = re.compile(rf"^elem\s+({_NAME})\s*:\s*({_NAME})\s*\.$")


class FactsError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.message = message
        self.line = line


def ingest_facts(structure: Structure, text: str) -> int:
    """Add the facts in ``text`` to ``structure``; returns the number of lines read."""
    theory = structure.theory
    rel_ids = {r.name: i for i, r in enumerate(theory.relations)}
    count = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _ELEM.match(line)
        if m:
            name, sort = m.groups()
            if sort not in theory.sorts:
                raise FactsError(f"unknown sort {sort}", lineno)
            structure.intern(theory.sort_id(sort), name)
            count += 1
            continue
        m = _FACT.match(line)
        if not m:
            raise FactsError(f"cannot parse {line!r}", lineno)
        rel_name, body = m.groups()
        if rel_name not in rel_ids:
            raise FactsError(f"unknown relation {rel_name}", lineno)
        args = [a.strip() for a in body.split(",")] if body else []
        if any(not re.fullmatch(_NAME, a) for a in args):
            raise FactsError(f"bad element name in {line!r}", lineno)
        rel = rel_ids[rel_name]
        arity = theory.relations[rel].arity
        if len(args) != len(arity):
            raise FactsError(f"{rel_name} expects {len(arity)} arguments, got {len(args)}", lineno)
        t = tuple(structure.intern(s, a) for s, a in zip(arity, args))
        structure.insert_tuple(rel, structure.canonical_tuple(rel, t))
        count += 1
    return count


def dump_model(structure: Structure) -> str:
    """Canonical elements per sort, normalized tuples and retired names, all sorted."""
    theory = structure.theory
    lines = ["sorts:"]
    for data in structure.sorts:
        names = sorted(data.names[e] for e in data.canonical)
        lines.append(f"  {data.name}:" + (" " + " ".join(names) if names else ""))
    lines.append("rels:")
    for r, rel in enumerate(theory.relations):
        rows = []
        for t in structure.tuples(r):
            t = structure.canonical_tuple(r, t)
            rows.append(tuple(structure.element_name(s, x) for s, x in zip(rel.arity, t)))
        for row in sorted(set(rows)):
            lines.append(f"  {rel.name}({', '.join(row)})")
    lines.append("eqs:")
    eqs = []
    for data in structure.sorts:
        for e, name in enumerate(data.names):
            root = data.uf.find(e)
            if root != e:
                eqs.append((name, data.names[root]))
    for name, root in sorted(eqs):
        lines.append(f"  {name} -> {root}")
    return "\n".join(lines) + "\n"
