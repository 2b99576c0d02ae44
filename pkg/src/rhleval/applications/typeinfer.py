"""Type inference for a small lambda calculus by closing a PHL theory.

Every subterm becomes an element of sort Tm, term constructors become graph
tuples of App/Lam, and the closed structure is read back by expanding
TmTy(t) along Fun/List/Unit entries.  Incompatible constructors make the
nullary Bot relation non-empty.

Term syntax: ``\\x. t`` or ``\\x:T. t``, juxtaposition for application,
parentheses, and the constants ``nil``, ``cons`` and ``unit``.  Type
annotations use ``unit``, ``[T]`` for lists, ``T -> T`` and bare names for
opaque base types.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

from ..engine import CloseConfig, CloseReport, Outcome, close
from ..phl import SymbolMap, load_theory
from ..structure import Structure
from ..theory import RhlTheory

TYPING_THEORY = """
sort Tm;
sort Ty;
pred Bot;
pred IsNil : Tm;
pred IsCons : Tm;
pred IsUnit : Tm;
func TmTy : Tm -> Ty;
func Fun : Ty * Ty -> Ty;
func Dom : Ty -> Ty;
func Cod : Ty -> Ty;
func List : Ty -> Ty;
func Elem : Ty -> Ty;
func Unit : -> Ty;
func ConsElem : Tm -> Ty;
func App : Tm * Tm -> Tm;
func Lam : Tm * Tm -> Tm;

axiom t : Tm => TmTy(t)!;

axiom Dom(k)! => Cod(k)!;
axiom Cod(k)! => Dom(k)!;
axiom s = Dom(k) & r = Cod(k) => k = Fun(s, r);
axiom k = Fun(s, r) => Dom(k) = s & Cod(k) = r;
axiom k = List(s) => Elem(k) = s;
axiom s = Elem(k) => k = List(s);

axiom Fun(_, _) = List(_) => Bot();
axiom Fun(_, _) = Unit => Bot();
axiom List(_) = Unit => Bot();

axiom App(t0, t1)! & TmTy(t0) = Fun(s, _) => TmTy(t1) = s;
axiom App(t0, t1)! & TmTy(t1) = s => Dom(TmTy(t0)) = s;
axiom t2 = App(t0, t1) & TmTy(t0) = Fun(_, r) => TmTy(t2) = r;
axiom t2 = App(t0, t1) & TmTy(t2) = r => Cod(TmTy(t0)) = r;

axiom l = Lam(x, b) => TmTy(l) = Fun(TmTy(x), TmTy(b));

axiom IsUnit(t) => TmTy(t) = Unit;
axiom IsNil(t) => Elem(TmTy(t))!;
axiom IsCons(t) => TmTy(t) = Fun(ConsElem(t), Fun(List(ConsElem(t)), List(ConsElem(t))));
"""


@lru_cache(maxsize=None)
def typing_theory() -> tuple[RhlTheory, SymbolMap]:
    return load_theory(TYPING_THEORY)


# -- lambda terms -------------------------------------------------------------


@dataclass(frozen=True)
class VarRef:
    name: str
    binder: int  # -1 for free variables


@dataclass(frozen=True)
class Const:
    name: str  # nil, cons or unit


@dataclass(frozen=True)
class Apply:
    func: "Term"
    arg: "Term"


@dataclass(frozen=True)
class Lambda:
    param: str
    binder: int
    annotation: Optional["TypeTree"]
    body: "Term"


Term = Union[VarRef, Const, Apply, Lambda]


class TermSyntaxError(ValueError):
    pass


_LEX = re.compile(r"\s*(?:(->)|([\\λ.():\[\]])|([A-Za-z_][A-Za-z0-9_']*))")
_CONSTS = ("nil", "cons", "unit")


def _lex(text: str) -> list[str]:
    out, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _LEX.match(text, pos)
        if not m or m.end() == pos:
            raise TermSyntaxError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        out.append(m.group(m.lastindex))
        pos = m.end()
    return out


class _TermParser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.pos = 0
        self.binders = itertools.count()

    def peek(self) -> Optional[str]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self, expected: Optional[str] = None) -> str:
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise TermSyntaxError(f"expected {expected or 'a token'}, got {tok or 'end of input'}")
        self.pos += 1
        return tok

    def parse(self) -> Term:
        term = self.term({})
        if self.peek() is not None:
            raise TermSyntaxError(f"trailing input at {self.peek()!r}")
        return term

    def term(self, scope: dict[str, int]) -> Term:
        if self.peek() in ("\\", "λ"):
            self.take()
            name = self.take()
            if not _is_ident(name) or name in _CONSTS:
                raise TermSyntaxError(f"bad parameter name {name!r}")
            annotation = None
            if self.peek() == ":":
                self.take()
                annotation = self.type()
            self.take(".")
            binder = next(self.binders)
            body = self.term({**scope, name: binder})
            return Lambda(name, binder, annotation, body)
        head = self.atom(scope)
        while self.peek() is not None and self.peek() not in (")",):
            if self.peek() in ("\\", "λ"):
                head = Apply(head, self.term(scope))
                break
            head = Apply(head, self.atom(scope))
        return head

    def atom(self, scope: dict[str, int]) -> Term:
        tok = self.take()
        if tok == "(":
            inner = self.term(scope)
            self.take(")")
            return inner
        if tok in _CONSTS:
            return Const(tok)
        if _is_ident(tok):
            return VarRef(tok, scope.get(tok, -1))
        raise TermSyntaxError(f"unexpected {tok!r}")

    def type(self) -> "TypeTree":
        left = self.type_atom()
        if self.peek() == "->":
            self.take()
            return Con("Fun", (left, self.type()))
        return left

    def type_atom(self) -> "TypeTree":
        tok = self.take()
        if tok == "(":
            inner = self.type()
            self.take(")")
            return inner
        if tok == "[":
            inner = self.type()
            self.take("]")
            return Con("List", (inner,))
        if tok == "unit":
            return Con("Unit", ())
        if _is_ident(tok):
            return TVar(tok)
        raise TermSyntaxError(f"unexpected {tok!r} in type")


def _is_ident(tok: str) -> bool:
    return bool(re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", tok))


def parse_term(text: str) -> Term:
    return _TermParser(text).parse()


def show_term(term: Term) -> str:
    if isinstance(term, VarRef):
        return term.name
    if isinstance(term, Const):
        return term.name
    if isinstance(term, Lambda):
        ann = f":{show_type(term.annotation)}" if term.annotation is not None else ""
        return f"\\{term.param}{ann}. {show_term(term.body)}"
    func = show_term(term.func)
    if isinstance(term.func, Lambda):
        func = f"({func})"
    arg = show_term(term.arg)
    if isinstance(term.arg, (Apply, Lambda)):
        arg = f"({arg})"
    return f"{func} {arg}"


def _key(term: Term):
    """Identity of the Tm element standing for ``term``."""
    if isinstance(term, VarRef):
        return ("var", term.binder, term.name if term.binder < 0 else "")
    if isinstance(term, Lambda):
        return ("lam", term.binder)
    return ("node", id(term))


def subterms(term: Term) -> list[Term]:
    """Distinct subterms in post-order; a bound variable is listed at its binder."""
    out: list[Term] = []
    seen: set = set()

    def visit(t: Term) -> None:
        if isinstance(t, Lambda):
            visit(VarRef(t.param, t.binder))
            visit(t.body)
        elif isinstance(t, Apply):
            visit(t.func)
            visit(t.arg)
        k = _key(t)
        if k not in seen:
            seen.add(k)
            out.append(t)

    visit(term)
    return out


# -- type trees ---------------------------------------------------------------


@dataclass(frozen=True)
class Con:
    name: str
    args: tuple["TypeTree", ...] = ()


@dataclass(frozen=True)
class TVar:
    name: str


@dataclass(frozen=True)
class Recursive:
    """Stands for a type that occurs in its own expansion."""


TypeTree = Union[Con, TVar, Recursive]


def show_type(ty: TypeTree) -> str:
    if isinstance(ty, TVar):
        return ty.name
    if isinstance(ty, Recursive):
        return "<recursive>"
    if ty.name == "Fun":
        left, right = ty.args
        text = show_type(left)
        if isinstance(left, Con) and left.name == "Fun":
            text = f"({text})"
        return f"{text} -> {show_type(right)}"
    if ty.name == "List":
        return f"[{show_type(ty.args[0])}]"
    if ty.name == "Unit":
        return "unit"
    return f"{ty.name}({', '.join(show_type(a) for a in ty.args)})"


CONSTRUCTORS = ("Fun", "List", "Unit")


class TypeNamer:
    """Names unconstrained type ids α0, α1, ... in order of first request."""

    def __init__(self) -> None:
        self.names: dict[int, str] = {}

    def __call__(self, ty: int) -> TVar:
        if ty not in self.names:
            self.names[ty] = f"α{len(self.names)}"
        return TVar(self.names[ty])


def constructor_entries(structure: Structure, symbols: SymbolMap) -> dict[int, list[tuple[str, tuple[int, ...]]]]:
    """Type id -> constructor entries having it as last component."""
    entries: dict[int, list[tuple[str, tuple[int, ...]]]] = {}
    ty = structure.theory.sort_id("Ty")
    for name in CONSTRUCTORS:
        rel = symbols.functions[name]
        for t in structure.tuples(rel):
            t = structure.canonical_tuple(rel, t)
            entries.setdefault(t[-1], []).append((name, t[:-1]))
    for v in entries.values():
        v.sort()
    assert all(structure.find(ty, k) == k for k in entries)
    return entries


def extract_type_tree(
    structure: Structure,
    symbols: SymbolMap,
    ty: int,
    namer: Optional[TypeNamer] = None,
    entries: Optional[dict] = None,
) -> TypeTree:
    """Expand the type id ``ty`` depth first into a tree.

    Ids without a constructor entry become variable leaves; an id met again
    on the current expansion path yields ``Recursive()``.
    """
    namer = namer or TypeNamer()
    if entries is None:
        entries = constructor_entries(structure, symbols)
    sort = structure.theory.sort_id("Ty")
    path: set[int] = set()

    def expand(t: int) -> TypeTree:
        t = structure.find(sort, t)
        if t in path:
            return Recursive()
        found = entries.get(t)
        if not found:
            return namer(t)
        name, args = found[0]
        path.add(t)
        tree = Con(name, tuple(expand(a) for a in args))
        path.discard(t)
        return tree

    return expand(ty)


# -- the pipeline -------------------------------------------------------------


@dataclass
class TypingFacts:
    """A term loaded into a structure, with the Tm element of each subterm."""

    structure: Structure
    symbols: SymbolMap
    subterms: list[Term]
    elements: list[int]


def build_facts(term: Term) -> TypingFacts:
    theory, symbols = typing_theory()
    structure = Structure(theory)
    tm, ty = theory.sort_id("Tm"), theory.sort_id("Ty")
    fn, pred = symbols.functions, symbols.predicates
    elem: dict = {}
    items = subterms(term)
    for k, t in enumerate(items):
        elem[_key(t)] = structure.new_element(tm, f"t{k}")

    def ty_of(tree: TypeTree) -> int:
        if isinstance(tree, TVar):
            return structure.intern(ty, tree.name)
        args = tuple(ty_of(a) for a in tree.args)
        result = structure.new_element(ty)
        structure.insert_tuple(fn[tree.name], args + (result,))
        return result

    for t in items:
        e = elem[_key(t)]
        if isinstance(t, Apply):
            structure.insert_tuple(fn["App"], (elem[_key(t.func)], elem[_key(t.arg)], e))
        elif isinstance(t, Lambda):
            x = elem[_key(VarRef(t.param, t.binder))]
            structure.insert_tuple(fn["Lam"], (x, elem[_key(t.body)], e))
            if t.annotation is not None:
                structure.insert_tuple(fn["TmTy"], (x, ty_of(t.annotation)))
        elif isinstance(t, Const):
            name = {"nil": "IsNil", "cons": "IsCons", "unit": "IsUnit"}[t.name]
            structure.insert_tuple(pred[name], (e,))
    return TypingFacts(structure, symbols, items, [elem[_key(t)] for t in items])


@dataclass
class TypingResult:
    status: str  # "ok", "inconsistent" or "limit"
    types: list[tuple[str, TypeTree]] = field(default_factory=list)
    report: Optional[CloseReport] = None
    facts: Optional[TypingFacts] = None

    def format(self) -> str:
        if self.status == "inconsistent":
            return "INCONSISTENT\n"
        if self.status == "limit":
            return "LIMIT\n"
        return "".join(f"{text} : {show_type(ty)}\n" for text, ty in self.types)


def infer_types(term: Union[str, Term], config: Optional[CloseConfig] = None) -> TypingResult:
    if isinstance(term, str):
        term = parse_term(term)
    theory, symbols = typing_theory()
    config = config or CloseConfig(max_outer_steps=200)
    config.bottom = "Bot"
    facts = build_facts(term)
    structure = facts.structure
    report = close(structure, theory, config)
    if report.inconsistent:
        return TypingResult("inconsistent", report=report, facts=facts)
    if report.outcome is not Outcome.FIXPOINT:
        return TypingResult("limit", report=report, facts=facts)
    tm = theory.sort_id("Tm")
    tmty = symbols.functions["TmTy"]
    type_of = {}
    for t, y in structure.tuples(tmty):
        type_of[structure.find(tm, t)] = y
    namer = TypeNamer()
    entries = constructor_entries(structure, symbols)
    types = []
    for sub, e in zip(facts.subterms, facts.elements):
        tree = extract_type_tree(structure, symbols, type_of[structure.find(tm, e)], namer, entries)
        types.append((show_term(sub), tree))
    return TypingResult("ok", types, report, facts)
