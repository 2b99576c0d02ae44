"""Partial Horn logic front end: parsing, epicness check and lowering to RHL.

Theory files are sequences of ``;``-terminated declarations::

    sort A;
    pred Le : A * A;
    func f : A -> B;
    axiom x : A => f(x)!;
    axiom y = f(x) => g(y) = x;

``#`` starts a line comment and ``_`` is an anonymous variable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .theory import (
    Atom,
    Diagnostic,
    EqualAtom,
    Relation,
    RelationAtom,
    RhlTheory,
    Sequent,
    SortAtom,
)


class PhlError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Var:
    name: str

    @property
    def anonymous(self) -> bool:
        return self.name.startswith("_#")


@dataclass(frozen=True)
class App:
    func: str
    args: tuple["Term", ...] = ()


Term = Union[Var, App]


@dataclass(frozen=True)
class Pred:
    pred: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class TermEqual:
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Defined:
    term: Term


@dataclass(frozen=True)
class SortOf:
    var: Var
    sort: str


PhlAtom = Union[Pred, TermEqual, Defined, SortOf]


@dataclass
class PhlSequent:
    premise: list[PhlAtom]
    conclusion: list[PhlAtom]
    line: int = 0
    var_sorts: dict[str, str] = field(default_factory=dict)


@dataclass
class PhlTheory:
    sorts: list[str] = field(default_factory=list)
    predicates: dict[str, tuple[str, ...]] = field(default_factory=dict)
    functions: dict[str, tuple[tuple[str, ...], str]] = field(default_factory=dict)
    sequents: list[PhlSequent] = field(default_factory=list)
    # Predicates and functions in declaration order; fixes relation numbering.
    symbols: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class SymbolMap:
    functions: dict[str, int]
    predicates: dict[str, int]
    functionality: dict[str, int]  # function name -> index of its functionality sequent

    def is_function(self, name: str) -> bool:
        return name in self.functions


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
    | (?P<punct>=>|->|[;:*(),&=!])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise PhlError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("ident", "punct"):
            toks.append(_Tok(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0
        self.theory = PhlTheory()
        self.wildcards = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def peek(self, offset: int = 1) -> _Tok:
        return self.toks[min(self.pos + offset, len(self.toks) - 1)]

    def error(self, message: str, tok: Optional[_Tok] = None) -> PhlError:
        tok = tok or self.tok
        return PhlError(message, tok.line, tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind != "eof":
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        tok = self.tok
        if not self.accept(text):
            raise self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return tok

    def ident(self) -> _Tok:
        tok = self.tok
        if tok.kind != "ident":
            raise self.error(f"expected identifier, found {tok.text or 'end of input'!r}")
        self.pos += 1
        return tok

    def sort_name(self) -> str:
        tok = self.ident()
        if tok.text not in self.theory.sorts:
            raise self.error(f"unknown sort {tok.text}", tok)
        return tok.text

    def fresh_symbol(self) -> _Tok:
        tok = self.ident()
        th = self.theory
        if tok.text in th.sorts or tok.text in th.predicates or tok.text in th.functions:
            raise self.error(f"duplicate symbol {tok.text}", tok)
        return tok

    def parse(self) -> PhlTheory:
        while self.tok.kind != "eof":
            tok = self.ident()
            if tok.text == "sort":
                self.theory.sorts.append(self.fresh_symbol().text)
            elif tok.text == "pred":
                name = self.fresh_symbol().text
                arity: tuple[str, ...] = ()
                if self.accept(":"):
                    arity = self.product()
                self.theory.predicates[name] = arity
                self.theory.symbols.append(name)
            elif tok.text == "func":
                name = self.fresh_symbol().text
                self.expect(":")
                dom: tuple[str, ...] = ()
                if self.tok.text != "->":
                    dom = self.product()
                self.expect("->")
                self.theory.functions[name] = (dom, self.sort_name())
                self.theory.symbols.append(name)
            elif tok.text == "axiom":
                self.theory.sequents.append(self.sequent(tok.line))
            else:
                raise self.error(f"unknown declaration {tok.text!r}", tok)
            self.expect(";")
        return self.theory

    def product(self) -> tuple[str, ...]:
        sorts = [self.sort_name()]
        while self.accept("*"):
            sorts.append(self.sort_name())
        return tuple(sorts)

    def sequent(self, line: int) -> PhlSequent:
        premise = [] if self.tok.text == "=>" else self.formula()
        self.expect("=>")
        conclusion = self.formula()
        seq = PhlSequent(premise, conclusion, line)
        seq.var_sorts = _infer_sorts(self.theory, seq)
        return seq

    def formula(self) -> list[PhlAtom]:
        atoms = [self.atom()]
        while self.accept("&"):
            atoms.append(self.atom())
        return atoms

    def atom(self) -> PhlAtom:
        tok = self.tok
        if tok.kind == "ident" and self.peek().text == ":" and tok.text not in self.theory.functions:
            self.pos += 2
            return SortOf(Var(tok.text), self.sort_name())
        if tok.kind == "ident" and tok.text in self.theory.predicates:
            self.pos += 1
            args: tuple[Term, ...] = ()
            if self.accept("("):
                args = self.arguments()
            arity = self.theory.predicates[tok.text]
            if len(args) != len(arity):
                raise self.error(
                    f"{tok.text} expects {len(arity)} arguments, got {len(args)}", tok
                )
            return Pred(tok.text, args)
        lhs = self.term()
        if self.accept("="):
            return TermEqual(lhs, self.term())
        if self.accept("!"):
            return Defined(lhs)
        raise self.error("expected '=' or '!' after term")

    def arguments(self) -> tuple[Term, ...]:
        args: list[Term] = []
        if not self.accept(")"):
            args.append(self.term())
            while self.accept(","):
                args.append(self.term())
            self.expect(")")
        return tuple(args)

    def term(self) -> Term:
        tok = self.ident()
        funcs = self.theory.functions
        if self.tok.text == "(":
            if tok.text not in funcs:
                raise self.error(f"unknown function {tok.text}", tok)
            self.pos += 1
            args = self.arguments()
            if len(args) != len(funcs[tok.text][0]):
                raise self.error(
                    f"{tok.text} expects {len(funcs[tok.text][0])} arguments, got {len(args)}",
                    tok,
                )
            return App(tok.text, args)
        if tok.text in funcs and not funcs[tok.text][0]:
            return App(tok.text, ())
        if tok.text in self.theory.predicates or tok.text in self.theory.sorts:
            raise self.error(f"{tok.text} is not a term", tok)
        if tok.text == "_":
            self.wildcards += 1
            return Var(f"_#{self.wildcards}")
        return Var(tok.text)


def _infer_sorts(theory: PhlTheory, seq: PhlSequent) -> dict[str, str]:
    sorts: dict[str, str] = {}
    links: list[tuple[str, str]] = []

    def assign(var: Var, sort: str) -> None:
        if sorts.setdefault(var.name, sort) != sort:
            raise PhlError(
                f"variable {var.name} used at sorts {sorts[var.name]} and {sort}", seq.line
            )

    def expect(term: Term, sort: str) -> None:
        if isinstance(term, Var):
            assign(term, sort)
            return
        cod = walk(term)
        if cod != sort:
            raise PhlError(f"{term.func}(...) has sort {cod}, expected {sort}", seq.line)

    def walk(term: Term) -> Optional[str]:
        if isinstance(term, Var):
            return None
        dom, cod = theory.functions[term.func]
        for arg, sort in zip(term.args, dom):
            expect(arg, sort)
        return cod

    for atom in seq.premise + seq.conclusion:
        if isinstance(atom, Pred):
            for arg, sort in zip(atom.args, theory.predicates[atom.pred]):
                expect(arg, sort)
        elif isinstance(atom, SortOf):
            assign(atom.var, atom.sort)
        elif isinstance(atom, Defined):
            walk(atom.term)
        else:
            ls, rs = walk(atom.lhs), walk(atom.rhs)
            if ls is not None and rs is not None and ls != rs:
                raise PhlError(f"equality between sorts {ls} and {rs}", seq.line)
            if ls is not None:
                expect(atom.rhs, ls)
            elif rs is not None:
                expect(atom.lhs, rs)
            else:
                links.append((atom.lhs.name, atom.rhs.name))

    changed = True
    while changed:
        changed = False
        for a, b in links:
            if a in sorts and b not in sorts:
                sorts[b] = sorts[a]
                changed = True
            elif b in sorts and a not in sorts:
                sorts[a] = sorts[b]
                changed = True
            elif a in sorts and sorts[a] != sorts[b]:
                raise PhlError(f"equality between sorts {sorts[a]} and {sorts[b]}", seq.line)
    for name in _sequent_vars(seq):
        if name not in sorts:
            shown = "_" if name.startswith("_#") else name
            raise PhlError(f"cannot infer sort of variable {shown}", seq.line)
    return sorts


def _term_vars(term: Term, out: list[str]) -> None:
    if isinstance(term, Var):
        if term.name not in out:
            out.append(term.name)
    else:
        for arg in term.args:
            _term_vars(arg, out)


def _atom_vars(atom: PhlAtom, out: list[str]) -> None:
    if isinstance(atom, Pred):
        for arg in atom.args:
            _term_vars(arg, out)
    elif isinstance(atom, TermEqual):
        _term_vars(atom.lhs, out)
        _term_vars(atom.rhs, out)
    elif isinstance(atom, Defined):
        _term_vars(atom.term, out)
    else:
        _term_vars(atom.var, out)


def _sequent_vars(seq: PhlSequent) -> list[str]:
    out: list[str] = []
    for atom in seq.premise + seq.conclusion:
        _atom_vars(atom, out)
    return out


def parse_phl(text: str) -> PhlTheory:
    return _Parser(text).parse()


def check_epic(theory: PhlTheory) -> list[Diagnostic]:
    diags = []
    for i, seq in enumerate(theory.sequents):
        premise: list[str] = []
        for atom in seq.premise:
            _atom_vars(atom, premise)
        conclusion: list[str] = []
        for atom in seq.conclusion:
            _atom_vars(atom, conclusion)
        for name in conclusion:
            if name not in premise:
                shown = "_" if name.startswith("_#") else name
                diags.append(
                    Diagnostic(i, f"line {seq.line}: conclusion variable {shown} not in premise")
                )
    return diags


class _Flattener:
    def __init__(self, theory: PhlTheory, rel_ids: dict[str, int], sort_ids: dict[str, int],
                 seq: PhlSequent):
        self.theory = theory
        self.rel_ids = rel_ids
        self.sort_ids = sort_ids
        self.seq = seq
        self.ids: dict[str, int] = {}
        self.names: list[str] = []
        self.fresh_count = 0

    def var(self, var: Var) -> int:
        if var.name not in self.ids:
            self.ids[var.name] = len(self.names)
            self.names.append("_" if var.anonymous else var.name)
        return self.ids[var.name]

    def fresh(self) -> int:
        self.names.append(f"_t{self.fresh_count}")
        self.fresh_count += 1
        return len(self.names) - 1

    def term(self, term: Term, out: list[Atom], memo: dict, target: Optional[int] = None) -> int:
        """Flatten ``term`` into ``out`` and return its result variable.

        With ``target`` set, a fresh result variable is replaced by ``target``;
        a memoized result that differs from it is linked by an equality.
        """
        if isinstance(term, Var):
            v = self.var(term)
            if target is not None and target != v:
                out.append(EqualAtom(target, v))
            return v
        args = tuple(self.term(a, out, memo) for a in term.args)
        key = (term.func, args)
        if key in memo:
            result = memo[key]
            if target is not None and target != result:
                out.append(EqualAtom(target, result))
            return result
        result = target if target is not None else self.fresh()
        out.append(RelationAtom(self.rel_ids[term.func], args + (result,)))
        memo[key] = result
        return result

    def atoms(self, atoms: list[PhlAtom], memo: dict) -> list[Atom]:
        out: list[Atom] = []
        for atom in atoms:
            if isinstance(atom, Pred):
                args = tuple(self.term(a, out, memo) for a in atom.args)
                out.append(RelationAtom(self.rel_ids[atom.pred], args))
            elif isinstance(atom, SortOf):
                out.append(SortAtom(self.var(atom.var), self.sort_ids[atom.sort]))
            elif isinstance(atom, Defined):
                if isinstance(atom.term, Var):
                    v = self.var(atom.term)
                    out.append(SortAtom(v, self.sort_ids[self.seq.var_sorts[atom.term.name]]))
                else:
                    self.term(atom.term, out, memo)
            else:
                lhs, rhs = atom.lhs, atom.rhs
                if isinstance(lhs, Var) and isinstance(rhs, Var):
                    out.append(EqualAtom(self.var(lhs), self.var(rhs)))
                elif isinstance(lhs, Var):
                    self.term(rhs, out, memo, target=self.var(lhs))
                elif isinstance(rhs, Var):
                    self.term(lhs, out, memo, target=self.var(rhs))
                else:
                    left = self.term(lhs, out, memo)
                    right = self.term(rhs, out, memo)
                    if left != right:
                        out.append(EqualAtom(left, right))
        return out

    def lower(self, name: str) -> Sequent:
        memo: dict = {}
        premise = self.atoms(self.seq.premise, memo)
        # Conclusion terms already flattened in the premise reuse their result variable.
        conclusion = self.atoms(self.seq.conclusion, dict(memo))
        return Sequent(tuple(premise), tuple(conclusion), tuple(self.names), name)


def functionality_sequent(rel: int, n: int, name: str) -> Sequent:
    """``f(v0..vn-1, u) & f(v0..vn-1, w) => u = w``."""
    args = tuple(range(n))
    u, w = n, n + 1
    names = tuple(f"v{i}" for i in range(n)) + ("u", "w")
    return Sequent(
        (RelationAtom(rel, args + (u,)), RelationAtom(rel, args + (w,))),
        (EqualAtom(u, w),),
        names,
        name,
    )


def lower_theory(theory: PhlTheory) -> tuple[RhlTheory, SymbolMap]:
    """Flatten ``theory``; functionality axioms follow the user axioms."""
    sort_ids = {s: i for i, s in enumerate(theory.sorts)}
    relations = []
    rel_ids: dict[str, int] = {}
    for name in theory.symbols:
        rel_ids[name] = len(relations)
        if name in theory.functions:
            dom, cod = theory.functions[name]
            arity = tuple(sort_ids[s] for s in dom + (cod,))
        else:
            arity = tuple(sort_ids[s] for s in theory.predicates[name])
        relations.append(Relation(name, arity))

    sequents = []
    for i, seq in enumerate(theory.sequents):
        sequents.append(_Flattener(theory, rel_ids, sort_ids, seq).lower(f"axiom{i}@{seq.line}"))
    functionality = {}
    for name in theory.symbols:
        if name in theory.functions:
            functionality[name] = len(sequents)
            n = len(theory.functions[name][0])
            sequents.append(functionality_sequent(rel_ids[name], n, f"functional:{name}"))

    rhl = RhlTheory(tuple(theory.sorts), tuple(relations), tuple(sequents))
    symbols = SymbolMap(
        {n: rel_ids[n] for n in theory.symbols if n in theory.functions},
        {n: rel_ids[n] for n in theory.symbols if n in theory.predicates},
        functionality,
    )
    return rhl, symbols


def load_theory(text: str) -> tuple[RhlTheory, SymbolMap]:
    return lower_theory(parse_phl(text))
