import itertools
import random

from hypothesis import given, settings, strategies as st

from rhleval.engine import CloseConfig, close
from rhleval.oracles import GroundModel, brute_matches
from rhleval.theory import (
    EqualAtom,
    RelationAtom,
    Sequent,
    SortAtom,
    TheoryBuilder,
    canonicalize_sequent,
    classify_surjective,
    detect_symmetries,
    infer_functional_projections,
    rename_atom,
    validate_theory,
    var_sorts,
)
from support import random_structure, random_theory

LE, P = 0, 1


def le_theory(*sequents):
    b = TheoryBuilder()
    b.relation("Le", "S", "S")
    b.relation("P", "S")
    for s in sequents:
        b.add(s)
    return b.build()


TRANS = Sequent((RelationAtom(LE, (0, 1)), RelationAtom(LE, (1, 2))), (RelationAtom(LE, (0, 2)),),
                ("u", "v", "w"))
ANTISYM = Sequent((RelationAtom(LE, (0, 1)), RelationAtom(LE, (1, 0))), (EqualAtom(0, 1),), ("u", "v"))


def test_validate_wellformed_transitivity():
    assert validate_theory(le_theory(TRANS)) == []


def test_validate_arity_mismatch():
    bad = Sequent((RelationAtom(LE, (0, 1, 2)),), (RelationAtom(P, (0,)),), ("a", "b", "c"))
    diags = validate_theory(le_theory(bad))
    assert len(diags) == 1 and "expects 2 arguments" in diags[0].message
    assert diags[0].sequent == 0 and diags[0].atom == bad.premise[0]


def test_validate_sort_clash():
    b = TheoryBuilder()
    b.relation("PA", "A")
    b.relation("PB", "B")
    b.add(Sequent((RelationAtom(0, (0,)), RelationAtom(1, (0,))), (RelationAtom(0, (0,)),), ("x",)))
    diags = validate_theory(b.build())
    assert len(diags) == 1 and "sorts A and B" in diags[0].message


def test_validate_nullary_relation():
    b = TheoryBuilder()
    bot = b.relation("Bot")
    b.relation("P", "S")
    b.add(Sequent((RelationAtom(1, (0,)),), (RelationAtom(bot, ()),), ("x",)))
    assert validate_theory(b.build()) == []


def test_canonicalize_substitutes():
    seq = Sequent((RelationAtom(LE, (0, 1)), EqualAtom(0, 1)), (RelationAtom(P, (0,)),), ("u", "v"))
    out = canonicalize_sequent(seq)
    assert out.premise == (RelationAtom(LE, (0, 0)),)
    assert out.conclusion == (RelationAtom(P, (0,)),)
    assert out.var_names == ("u",)


def test_canonicalize_identity_without_equalities():
    assert canonicalize_sequent(TRANS) is TRANS


def _match_projection(seq, model, sorts):
    return {tuple(m[v] for v in range(seq.num_vars)) for m in brute_matches(model, seq.premise, sorts)}


def test_canonicalize_chained_equalities_brute_force():
    seq = Sequent((RelationAtom(LE, (0, 1)), EqualAtom(0, 1), EqualAtom(1, 2), RelationAtom(LE, (2, 0))),
                  (RelationAtom(P, (0,)),), ("u", "v", "w"))
    out = canonicalize_sequent(seq)
    assert out.num_vars == 1 and not any(isinstance(a, EqualAtom) for a in out.premise)
    theory = le_theory(seq)
    for bits in itertools.product([0, 1], repeat=9):
        le = {(a, b) for (a, b), bit in zip(itertools.product(range(3), repeat=2), bits) if bit}
        model = GroundModel([set(range(3))], [le, set()])
        before = {m[0] for m in _match_projection(seq, model, var_sorts(theory, seq))}
        after = {m[0] for m in _match_projection(out, model, var_sorts(theory, out))}
        assert before == after


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_canonicalize_match_bijection(seed):
    rng = random.Random(seed)
    theory = random_theory(rng)
    structure = random_structure(rng, theory)
    model = GroundModel([set(d.names) for d in structure.sorts],
                        [{tuple(structure.element_name(s, x) for s, x in zip(r.arity, t))
                          for t in structure.tuples(i)} for i, r in enumerate(theory.relations)])
    for seq in theory.sequents:
        out = canonicalize_sequent(seq)
        assert not any(isinstance(a, EqualAtom) for a in out.premise)
        sorts, out_sorts = var_sorts(theory, seq), var_sorts(theory, out)
        # Each original match is determined by the surviving variables.
        keep = [seq.var_names.index(n) for n in out.var_names]
        orig = [tuple(m[v] for v in keep) for m in brute_matches(model, seq.premise, sorts)]
        new = [tuple(m[v] for v in range(out.num_vars)) for m in brute_matches(model, out.premise, out_sorts)]
        assert sorted(orig) == sorted(new)
        assert len(set(orig)) == len(orig)


def test_classify_surjective_examples():
    retract = Sequent((RelationAtom(0, (0, 1)),), (RelationAtom(1, (1, 0)),), ("x", "y"))
    total = Sequent((SortAtom(0, 0),), (RelationAtom(0, (0, 1)),), ("x", "v"))
    same = Sequent((RelationAtom(P, (0,)),), (RelationAtom(P, (0,)),), ("x",))
    assert classify_surjective(retract)
    assert not classify_surjective(total)
    assert classify_surjective(same)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9), st.randoms())
def test_surjectivity_invariant_under_reordering(seed, shuffler):
    theory = random_theory(random.Random(seed))
    for seq in theory.sequents:
        premise = list(seq.premise)
        shuffler.shuffle(premise)
        shuffled = Sequent(tuple(premise), seq.conclusion, seq.var_names)
        assert classify_surjective(canonicalize_sequent(shuffled)) == classify_surjective(canonicalize_sequent(seq))


def test_symmetry_functionality():
    seq = Sequent((RelationAtom(0, (0, 1, 2)), RelationAtom(0, (0, 1, 3))), (EqualAtom(2, 3),),
                  ("v0", "v1", "u", "w"))
    assert detect_symmetries(seq) == [[0, 1]]


def test_symmetry_antisymmetry():
    assert detect_symmetries(ANTISYM) == [[0, 1]]


def test_symmetry_transitivity_has_none():
    assert detect_symmetries(TRANS) == [[0], [1]]
    assert _brute_swaps(TRANS) == set()


def _brute_swaps(seq):
    """Pairs of premise positions swapped by some full variable permutation."""
    from rhleval.theory import _conclusion_key

    found = set()
    key = sorted(map(repr, seq.premise))
    ckey = _conclusion_key(seq.conclusion)
    for perm in itertools.permutations(range(seq.num_vars)):
        premise = [rename_atom(a, perm) for a in seq.premise]
        if sorted(map(repr, premise)) != key:
            continue
        if _conclusion_key(rename_atom(a, perm) for a in seq.conclusion) != ckey:
            continue
        for i, j in itertools.combinations(range(len(seq.premise)), 2):
            if premise[i] == seq.premise[j] and premise[j] == seq.premise[i]:
                found.add((i, j))
    return found


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**9))
def test_symmetry_classes_match_brute_force(seed):
    theory = random_theory(random.Random(seed))
    for seq in theory.sequents:
        seq = canonicalize_sequent(seq)
        if seq.num_vars > 7:
            continue
        classes = detect_symmetries(seq)
        assert sorted(i for c in classes for i in c) == list(range(len(seq.premise)))
        # Connected components of the brute-force swap graph.
        parent = list(range(len(seq.premise)))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        for i, j in _brute_swaps(seq):
            parent[find(j)] = find(i)
        expected = {}
        for i in range(len(seq.premise)):
            expected.setdefault(find(i), set()).add(i)
        assert sorted(map(sorted, expected.values())) == sorted(map(sorted, classes))
        for cls in classes:
            assert len({seq.premise[i].rel for i in cls}) == 1


def test_functional_projection_examples():
    b = TheoryBuilder()
    f = b.relation("f", "S", "S", "S")
    b.add(Sequent((RelationAtom(f, (0, 1, 2)), RelationAtom(f, (0, 1, 3))), (EqualAtom(2, 3),),
                  ("v0", "v1", "u", "w")))
    b.add(Sequent((RelationAtom(f, (0, 1, 4)), RelationAtom(f, (2, 3, 4))), (EqualAtom(0, 2), EqualAtom(1, 3)),
                  ("u1", "u2", "w1", "w2", "x")))
    b.relation("Le", "S", "S")
    b.add(Sequent((RelationAtom(1, (0, 1)), RelationAtom(1, (1, 2))), (RelationAtom(1, (0, 2)),),
                  ("u", "v", "w")))
    deps = infer_functional_projections(b.build())
    assert [(d.relation, d.determined, d.determining, d.source) for d in deps] == [
        (0, (2,), (0, 1), 0),
        (0, (0, 1), (2,), 1),
    ]


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_functional_projections_sound(seed):
    rng = random.Random(seed)
    theory = random_theory(rng)
    for dep in infer_functional_projections(theory):
        assert set(dep.determined).isdisjoint(dep.determining)
        assert sorted(dep.determined + dep.determining) == list(range(len(theory.relations[dep.relation].arity)))
        only = type(theory)(theory.sorts, theory.relations, (theory.sequents[dep.source],))
        structure = random_structure(rng, only)
        close(structure, only, CloseConfig(functional_projections=False))
        seen = {}
        for t in structure.tuples(dep.relation):
            key = tuple(t[i] for i in dep.determining)
            val = tuple(t[i] for i in dep.determined)
            assert seen.setdefault(key, val) == val
