import random

import pytest
from hypothesis import given, settings, strategies as st

from rhleval.engine import (
    CloseConfig, Engine, Mode, Outcome, REL, apply_conclusion, close, find_matches, plan_sequent,
    run_congruence_closure,
)
from rhleval.oracles import brute_matches, ground_model, quotient_of_structure
from rhleval.phl import load_theory
from rhleval.structure import Structure
from rhleval.theory import EqualAtom, RelationAtom, Sequent, TheoryBuilder, var_sorts
from support import close_audited, copy_structure, random_structure, random_theory

TRANS = Sequent((RelationAtom(0, (0, 1)), RelationAtom(0, (1, 2))), (RelationAtom(0, (0, 2)),),
                ("u", "v", "w"))


def le_theory(*sequents):
    b = TheoryBuilder()
    b.relation("Le", "S", "S")
    b.relation("Ge", "S", "S")
    for s in sequents:
        b.add(s)
    return b.build()


def chain(theory, n, rel=0):
    s = Structure(theory)
    ids = [s.intern(0, str(i)) for i in range(1, n + 1)]
    for a, b in zip(ids, ids[1:]):
        s.insert_tuple(rel, (a, b))
    return s


# -- plans --------------------------------------------------------------------


def test_plan_transitivity_uses_first_projection_index():
    theory = le_theory(TRANS)
    naive = plan_sequent(theory, TRANS, Mode.NAIVE)
    assert len(naive.variants) == 1
    first, second = naive.variants[0]
    assert first.key == () and second.key == (0,)
    assert (0, (0,)) in naive.indices()
    semi = plan_sequent(theory, TRANS)
    assert semi.delta_positions == (0, 1)
    assert semi.variants[0][0].delta and semi.variants[0][1].key == (0,)
    assert semi.variants[1][0].delta and semi.variants[1][1].key == (1,)


def test_plan_functionality_single_variant():
    rhl, _ = load_theory("sort A; func f : A * A -> A;")
    seq = rhl.sequents[0]
    assert len(plan_sequent(rhl, seq).variants) == 1
    assert len(plan_sequent(rhl, seq, symmetries=False).variants) == 2


def test_plan_single_atom():
    seq = Sequent((RelationAtom(0, (0, 1)),), (RelationAtom(1, (1, 0)),), ("x", "y"))
    theory = le_theory(seq)
    (step,), = plan_sequent(theory, seq).variants
    assert step.kind == REL and step.delta
    (step,), = plan_sequent(theory, seq, Mode.NAIVE).variants
    assert not step.delta


# -- matching -----------------------------------------------------------------


def test_find_matches_transitivity():
    theory = le_theory(TRANS)
    s = chain(theory, 3)
    matches = list(find_matches(s, plan_sequent(theory, TRANS, Mode.NAIVE)))
    assert matches == [[0, 1, 2]]


def test_find_matches_three_atom_premise_vs_nested_loop():
    seq = Sequent((RelationAtom(0, (0, 1)), RelationAtom(1, (2, 1)), RelationAtom(0, (2, 3))),
                  (RelationAtom(0, (0, 3)),), ("u", "v", "w", "x"))
    theory = le_theory(seq)
    rng = random.Random(7)
    for _ in range(30):
        s = Structure(theory)
        for i in range(4):
            s.intern(0, f"e{i}")
        for _ in range(8):
            s.insert_tuple(rng.randrange(2), (rng.randrange(4), rng.randrange(4)))
        got = sorted(tuple(m) for m in find_matches(s, plan_sequent(theory, seq, Mode.NAIVE)))
        model = ground_model(s)
        expected = sorted(tuple(s.sorts[0].by_name[m[v]] for v in range(4))
                          for m in brute_matches(model, seq.premise, var_sorts(theory, seq)))
        assert got == expected
        s.mark_all_new()
        semi = {tuple(m) for m in find_matches(s, plan_sequent(theory, seq))}
        assert semi == set(expected)


def test_find_matches_empty_relation():
    theory = le_theory(TRANS)
    assert list(find_matches(Structure(theory), plan_sequent(theory, TRANS, Mode.NAIVE))) == []


def test_find_matches_with_fixed_binding():
    theory = le_theory(TRANS)
    s = chain(theory, 4)
    s.insert_tuple(0, (0, 2))
    got = sorted(tuple(m) for m in find_matches(s, plan_sequent(theory, TRANS, Mode.NAIVE), {0: 0}))
    assert got == [(0, 1, 2), (0, 2, 3)]


def test_semi_naive_sees_only_delta_matches():
    theory = le_theory(TRANS)
    s = chain(theory, 3)
    s.advance_deltas()
    s.advance_deltas()
    assert list(find_matches(s, plan_sequent(theory, TRANS))) == []
    s.insert_tuple(0, (2, 0))
    s.advance_deltas()
    got = {tuple(m) for m in find_matches(s, plan_sequent(theory, TRANS))}
    assert got == {(1, 2, 0), (2, 0, 1)}


# -- conclusion application ---------------------------------------------------------


def test_apply_conclusion_inserts_missing_tuple():
    theory = le_theory(TRANS)
    s = chain(theory, 3)
    assert apply_conclusion(s, theory, 0, [0, 1, 2])
    assert s.contains(0, (0, 2))
    assert not apply_conclusion(s, theory, 0, [0, 1, 2])


def test_apply_conclusion_equality_already_holds():
    antisym = Sequent((RelationAtom(0, (0, 1)), RelationAtom(0, (1, 0))), (EqualAtom(0, 1),), ("u", "v"))
    theory = le_theory(antisym)
    s = Structure(theory)
    a = s.intern(0, "a")
    s.insert_tuple(0, (a, a))
    assert not apply_conclusion(s, theory, 0, [a, a])


def test_apply_conclusion_fresh_element():
    rhl, symbols = load_theory("sort A; sort B; func f : A -> B; axiom x : A => f(x)!;")
    s = Structure(rhl)
    a0 = s.intern(0, "a0")
    assert apply_conclusion(s, rhl, 0, [a0])
    assert s.num_elements(1) == 1
    assert list(s.tuples(symbols.functions["f"])) == [(a0, 0)]
    # The extension search now succeeds.
    assert not apply_conclusion(s, rhl, 0, [a0])
    assert s.num_elements(1) == 1


# -- close --------------------------------------------------------------------------

RETRACT = """
sort A; sort B;
func f : A -> B;
func g : B -> A;
axiom x : A => f(x)!;
axiom y : B => g(y)!;
axiom y = f(x) => g(y) = x;
"""


def test_close_retract_two_loop_terminates():
    rhl, symbols = load_theory(RETRACT)
    s = Structure(rhl)
    s.intern(0, "a0")
    report = close_audited(s, rhl)
    assert report.outcome is Outcome.FIXPOINT
    assert s.num_elements(0) == 1 and s.num_elements(1) == 1
    a, b = next(iter(s.elements(0))), next(iter(s.elements(1)))
    assert set(s.tuples(symbols.functions["f"])) == {(a, b)}
    assert set(s.tuples(symbols.functions["g"])) == {(b, a)}
    assert report.outer_steps >= 1


def test_close_transitive_chain():
    theory = le_theory(TRANS)
    s = chain(theory, 5)
    report = close_audited(s, theory)
    assert report.outcome is Outcome.FIXPOINT
    assert len(list(s.tuples(0))) == 10
    assert report.fresh_elements == 0


def test_close_limits():
    rhl, _ = load_theory("sort N; func succ : N -> N; axiom x : N => succ(x)!;")
    s = Structure(rhl)
    s.intern(0, "zero")
    report = close(s, rhl, CloseConfig(max_outer_steps=5))
    assert report.outcome is Outcome.OUTER_LIMIT
    assert report.fresh_elements == 5 and s.num_elements(0) == 6
    theory = le_theory(TRANS)
    report = close(chain(theory, 6), theory, CloseConfig(max_inner_steps=1))
    assert report.outcome is Outcome.INNER_LIMIT


def test_config_rejects_zero_limits():
    with pytest.raises(ValueError):
        CloseConfig(max_outer_steps=0)


def test_bottom_flag():
    rhl, _ = load_theory("sort S; pred P : S; pred Q : S; pred Bot; axiom P(x) & Q(x) => Bot();")
    s = Structure(rhl)
    x = s.intern(0, "x")
    s.insert_tuple(0, (x,))
    assert not close(copy_structure(s), rhl, CloseConfig(bottom="Bot")).inconsistent
    s.insert_tuple(1, (x,))
    assert close(s, rhl, CloseConfig(bottom="Bot")).inconsistent


def test_empty_premise_fires_once():
    rhl, _ = load_theory("sort S; pred P : S; func c : -> S; axiom => c!; axiom c = x => P(x);")
    s = Structure(rhl)
    report = close_audited(s, rhl)
    assert report.outcome is Outcome.FIXPOINT
    assert s.num_elements(0) == 1 and len(list(s.tuples(0))) == 1


def test_report_stats_text():
    theory = le_theory(TRANS)
    report = close(chain(theory, 3), theory)
    text = report.stats()
    assert text.splitlines()[0] == "outcome: Fixpoint"
    assert "tuples_added: 1" in text


# -- congruence closure ------------------------------------------------------------


def test_congruence_collapses_same_arguments():
    classes, _ = run_congruence_closure([("a", "b", "c1"), ("a", "b", "c2")])
    assert frozenset({"c1", "c2"}) in classes


def test_congruence_empty_graph():
    classes, report = run_congruence_closure([], nodes=["a", "b"])
    assert classes == [frozenset({"a"}), frozenset({"b"})]
    assert report.unions == 0


def test_congruence_propagation():
    # f(a, a) = b, f(b, b) = c with a ~ b forces b ~ c.
    classes, _ = run_congruence_closure([("a", "a", "b"), ("b", "b", "c")], [("a", "b")])
    assert classes == [frozenset({"a", "b", "c"})]


# -- differential properties ---------------------------------------------------------

CONFIGS = {
    "naive": CloseConfig(mode=Mode.NAIVE),
    "semi": CloseConfig(),
    "semi-nosym": CloseConfig(symmetries=False),
    "semi-nofp": CloseConfig(functional_projections=False),
    "semi-plain": CloseConfig(symmetries=False, functional_projections=False),
}


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_modes_and_toggles_agree(seed):
    rng = random.Random(seed)
    theory = random_theory(rng)
    base = random_structure(rng, theory)
    results = []
    for name, cfg in CONFIGS.items():
        s = copy_structure(base)
        cfg = CloseConfig(mode=cfg.mode, symmetries=cfg.symmetries,
                          functional_projections=cfg.functional_projections)
        before = s.size()
        report = close_audited(s, theory, cfg)
        assert report.outcome is Outcome.FIXPOINT
        assert report.fresh_elements == 0
        assert s.size()[0] <= before[0]
        results.append(quotient_of_structure(s))
    assert all(r == results[0] for r in results)


def test_engine_is_deterministic():
    rhl, _ = load_theory(RETRACT)
    traces = []
    for _ in range(2):
        s = Structure(rhl)
        s.intern(0, "a0")
        s.intern(1, "b0")
        trace = []
        Engine(rhl, CloseConfig(trace=trace)).close(s)
        traces.append(trace)
    assert traces[0] == traces[1]
