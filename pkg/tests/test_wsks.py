import pytest

from archtrap.wsks import (
    BoundedEvaluator,
    BudgetExceeded,
    EpsTerm,
    Eq,
    Mem,
    Not,
    StrategyError,
    SuccTerm,
    UnboundVariable,
    VarTerm,
    WsksFormula,
    conj,
    default_universe,
    disj,
    exists_fo,
    exists_so,
    forall_fo,
    forall_so,
    formula_size,
    free_fo_vars,
    free_so_vars,
    iff,
    implies,
    neg,
    succ_nesting,
    FALSE,
    TRUE,
)

EPS = EpsTerm()
X = VarTerm("x")
Y = VarTerm("y")


@pytest.fixture
def ev():
    return BoundedEvaluator(1, 2)  # universe "", "0", "00"


def test_terms_and_equality(ev):
    assert ev.eval(Eq(EPS, EPS), {})
    assert ev.eval(Eq(SuccTerm(0, X), Y), {"x": "", "y": "0"})
    assert not ev.eval(Eq(SuccTerm(0, X), Y), {"x": "", "y": ""})
    deep = BoundedEvaluator(1, 4)
    assert deep.eval(Eq(SuccTerm(0, SuccTerm(0, EPS)), X), {"x": "00"})


def test_membership(ev):
    assert ev.eval(Mem(X, "A"), {"x": "0", "A": {"0", "00"}})
    assert not ev.eval(Mem(EPS, "A"), {"A": {"0"}})
    assert ev.eval(Not(Mem(EPS, "A")), {"A": frozenset()})


def test_connectives(ev):
    assert ev.eval(conj([TRUE, TRUE]), {})
    assert not ev.eval(conj([TRUE, FALSE]), {})
    assert ev.eval(disj([FALSE, TRUE]), {})
    assert ev.eval(implies(FALSE, FALSE), {})
    assert ev.eval(iff(FALSE, FALSE), {})
    assert not ev.eval(iff(TRUE, FALSE), {})


def test_fo_quantifiers(ev):
    assert ev.eval(exists_fo("x", Eq(X, SuccTerm(0, EPS))), {})
    assert ev.eval(forall_fo("x", Eq(X, X)), {})
    assert not ev.eval(forall_fo("x", Eq(X, EPS)), {})
    # both branches at kappa=2
    ev2 = BoundedEvaluator(2, 1)
    assert ev2.eval(exists_fo("x", Eq(X, SuccTerm(1, EPS))), {})


def test_so_quantifiers(ev):
    grows = implies(Mem(EPS, "A"), Mem(SuccTerm(0, EPS), "A"))
    assert ev.eval(exists_so(["A"], grows), {})
    assert not ev.eval(forall_so(["A"], grows), {})
    assert ev.eval(forall_so(["A"], disj([Mem(EPS, "A"), neg(Mem(EPS, "A"))])), {})


def test_so_models_pinned(ev):
    pin_root = forall_fo("x", iff(Mem(X, "A"), Eq(X, EPS)))
    assert ev.so_models(pin_root, ["A"]) == [{"A": frozenset({""})}]
    pin_none = forall_fo("x", neg(Mem(X, "A")))
    assert ev.so_models(pin_none, ["A"]) == [{"A": frozenset()}]
    both = disj([pin_root, pin_none])
    assert ev.so_models(both, ["A"]) == [{"A": frozenset()}, {"A": frozenset({""})}]
    wrapped = exists_fo("y", conj([pin_root, Eq(Y, EPS)]))
    assert ev.so_models(wrapped, ["A"]) == [{"A": frozenset({""})}]


def test_so_models_rejects_shape(ev):
    with pytest.raises(StrategyError):
        ev.so_models(Mem(EPS, "A"), ["A"])


def test_enumeration_cap():
    taut = disj([Mem(EPS, "A"), neg(Mem(EPS, "A"))])
    tight = BoundedEvaluator(1, 2, subset_cap=4)
    with pytest.raises(StrategyError):
        tight.eval(forall_so(["A"], taut), {})
    narrowed = BoundedEvaluator(1, 2, subset_universe={"A": [""]}, subset_cap=4)
    assert narrowed.eval(forall_so(["A"], taut), {})


def test_unbound_variable(ev):
    with pytest.raises(UnboundVariable):
        ev.eval(Eq(X, EPS), {})
    with pytest.raises(UnboundVariable):
        ev.eval(Mem(EPS, "A"), {})


def test_budget_guard():
    ev = BoundedEvaluator(1, 2)
    with pytest.raises(BudgetExceeded):
        ev.eval(Mem(X, "A"), {"x": "000", "A": frozenset()})
    # successor nesting shrinks the allowance
    with pytest.raises(BudgetExceeded):
        ev.eval(Eq(SuccTerm(0, X), SuccTerm(0, X)), {"x": "00"})
    assert ev.eval(Eq(SuccTerm(0, X), SuccTerm(0, X)), {"x": "0"})


def test_universe_validation():
    with pytest.raises(ValueError):
        BoundedEvaluator(2, 2, fo_universe=["", "00"])  # missing "0"
    with pytest.raises(ValueError):
        BoundedEvaluator(2, 2, fo_universe=[])
    with pytest.raises(ValueError):
        BoundedEvaluator(1, 2).eval(Mem(X, "A"), {"x": "1", "A": frozenset()})


def test_default_universe():
    assert default_universe(2, 2) == ("", "0", "1", "00", "01", "10", "11")
    assert default_universe(1, 3) == ("", "0", "00", "000")
    with pytest.raises(ValueError):
        default_universe(2, 13)


def test_wrapped_formula_arity(ev):
    assert ev.eval(WsksFormula(1, TRUE), {})
    with pytest.raises(ValueError):
        ev.eval(WsksFormula(2, TRUE), {})


def test_sizes_and_free_vars():
    assert formula_size(TRUE) == 1
    assert formula_size(Not(Mem(EPS, "A"))) == 2
    assert formula_size(conj([Mem(EPS, "A"), Mem(EPS, "B")])) == 3
    assert formula_size(exists_so(["A", "B"], TRUE)) == 3
    assert succ_nesting(Eq(SuccTerm(0, SuccTerm(0, EPS)), EPS)) == 2
    assert succ_nesting(TRUE) == 0
    f = forall_fo("x", iff(Mem(X, "A"), Eq(X, Y)))
    assert free_fo_vars(f) == frozenset({"y"})
    assert free_so_vars(f) == frozenset({"A"})


def test_constant_folding():
    assert neg(TRUE) == FALSE
    assert conj([TRUE, TRUE]) == TRUE
    assert disj([FALSE]) == FALSE
    m = Mem(EPS, "A")
    assert conj([TRUE, m]) == m
    assert disj([m, FALSE]) == m
