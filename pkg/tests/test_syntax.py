import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import COIN, DELTA, ENTANGLED
from qlambda.gates import GateTable
from qlambda.gen import PROFILES, gen_term
from qlambda.syntax import (
    NEW,
    App,
    Bang,
    BangLam,
    BVar,
    Gate,
    LinLam,
    Meas,
    ParseError,
    Reg,
    Var,
    enumerate_occurrences,
    free_var_occurrences,
    free_vars,
    instantiate,
    is_surface_position,
    make_pair,
    make_tuple,
    match_pair,
    parse_term,
    print_term,
    register_occurrences,
    registers,
    replace_at,
    size,
    subst,
    subterm_at,
    validate,
)

I = LinLam("x", BVar(0))


# -- parsing ------------------------------------------------------------------


def test_parse_identity():
    assert parse_term(r"\x. x") == LinLam("x", BVar(0))


def test_parse_delta():
    # Δ of the coin: λ!x. meas(H new, I, x !x)
    expected = BangLam("x", Meas(App(Gate("H"), NEW), LinLam("y", BVar(0)), App(BVar(0), Bang(BVar(0)))))
    assert parse_term(DELTA) == expected


def test_parse_pair_sugar():
    t = parse_term("<r0, r1>")
    assert t == LinLam("f", App(App(BVar(0), Reg(0)), Reg(1)))
    assert match_pair(t) == (Reg(0), Reg(1))


def test_tuples_nest_right():
    assert parse_term("<a, b, c>") == make_tuple([Var("a"), Var("b"), Var("c")])
    assert parse_term("<a, b, c>") == make_pair(Var("a"), make_pair(Var("b"), Var("c")))


def test_let_desugars_to_application():
    t = parse_term(r"let <x,y> = p in y x")
    assert t == App(Var("p"), LinLam("x", LinLam("y", App(BVar(0), BVar(1)))))


def test_application_left_assoc_and_lambda_extends_right():
    assert parse_term("a b c") == App(App(Var("a"), Var("b")), Var("c"))
    assert parse_term(r"\x. x a") == LinLam("x", App(BVar(0), Var("a")))
    assert parse_term(r"a \x. x") == App(Var("a"), LinLam("x", BVar(0)))


def test_bang_binds_following_atom():
    assert parse_term("!a b") == App(Bang(Var("a")), Var("b"))
    assert parse_term("!(a b)") == Bang(App(Var("a"), Var("b")))


def test_multi_binder_and_unicode_lambda():
    assert parse_term(r"\x y. y x") == parse_term("λx. λy. y x")


def test_comments_ignored():
    assert parse_term("# comment\n new # trailing\n") == NEW


def test_alpha_equivalent_terms_are_equal():
    assert parse_term(r"\x. \!y. x") == parse_term(r"\u. \!v. u")
    assert hash(parse_term(r"\x. x")) == hash(parse_term(r"\z. z"))


@pytest.mark.parametrize(
    "text",
    ["(a", r"\x x", "meas(a, b)", "U[FOO] r0", "<a>", "let x = a in b", ")", "", "a $ b"],
)
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_term(text)


def test_parse_error_has_location():
    with pytest.raises(ParseError) as exc:
        parse_term("a\n  (b")
    assert exc.value.line == 2


def test_custom_gate_parses_only_when_declared():
    with pytest.raises(ParseError):
        parse_term("U[S] r0")
    table = GateTable()
    table.add("S", [[1, 0], [0, 1j]])
    assert parse_term("U[S] r0", table) == App(Gate("S"), Reg(0))


# -- printing -----------------------------------------------------------------


def test_print_examples():
    assert print_term(LinLam("x", BVar(0))) == r"\x. x"
    assert print_term(Reg(3)) == "r3"
    assert print_term(App(Gate("H"), Reg(0))) == "U[H] r0"
    assert print_term(parse_term("<r0, r1>")) == "<r0, r1>"


@pytest.mark.parametrize(
    "text", [COIN, ENTANGLED, r"\x y. y x", "<a, b, c>", r"(\x. x) ((\y. y) z)", r"meas(r0, !a, \x. x)", r"\!y. y y"]
)
def test_roundtrip_examples(text):
    t = parse_term(text)
    assert parse_term(print_term(t)) == t


def test_printer_avoids_capture_of_free_names():
    # binder hint collides with a free variable
    t = LinLam("a", App(BVar(0), Var("a")))
    assert parse_term(print_term(t)) == t


def test_roundtrip_generated_terms():
    # 1000 generated valid terms across all profiles
    rng = random.Random(7)
    for k in range(1000):
        t, _ = gen_term(rng.randint(1, 14), rng, list(PROFILES)[k % len(PROFILES)])
        assert parse_term(print_term(t)) == t


# -- occurrences and positions ------------------------------------------------


def test_bang_body_not_surface():
    occ = enumerate_occurrences(parse_term("!(U[H] r0)"))
    flags = {pos: s for pos, _, s in occ}
    assert flags[()] is True
    assert flags[("body",)] is False


def test_meas_branches_not_surface():
    t = parse_term("meas(r0, a, b)")
    flags = {pos: s for pos, _, s in enumerate_occurrences(t)}
    assert flags[("subject",)] and not flags[("branch0",)] and not flags[("branch1",)]


def test_beta_and_new_both_surface():
    t = parse_term(r"(\x. U[H] x) new")
    flags = {pos: s for pos, _, s in enumerate_occurrences(t)}
    assert flags[()] and flags[("arg",)]


def test_lambda_bodies_are_surface():
    t = parse_term(r"\x. \!y. x")
    assert is_surface_position(t, ("body", "body"))


def test_preorder_is_deterministic():
    t = parse_term("meas(a, b, c) d")
    order = [pos for pos, _, _ in enumerate_occurrences(t)]
    assert order == [(), ("fun",), ("fun", "subject"), ("fun", "branch0"), ("fun", "branch1"), ("arg",)]


def test_subterm_and_replace():
    t = parse_term("a (b c)")
    assert subterm_at(t, ("arg", "fun")) == Var("b")
    assert replace_at(t, ("arg", "fun"), Var("z")) == parse_term("a (z c)")
    with pytest.raises(KeyError):
        subterm_at(t, ("body",))


def test_size_counts_nodes():
    assert size(parse_term("a b")) == 3
    assert size(I) == 2


# -- variables and registers --------------------------------------------------


def test_free_vars_and_registers():
    assert free_vars(parse_term(r"\x. x")) == set()
    assert registers(parse_term(r"\x. x")) == set()
    assert registers(parse_term("<r0, r1>")) == {0, 1}
    # direct count on the AST
    assert free_var_occurrences(parse_term("x !x")) == {"x": 2}
    assert register_occurrences(parse_term("<r0, r0>"))[0] == 2


# -- substitution -------------------------------------------------------------


def test_subst_examples():
    assert subst(Var("x"), "x", Reg(0)) == Reg(0)
    delta = parse_term(DELTA)
    assert subst(parse_term("x !x"), "x", delta) == parse_term(COIN)
    assert subst(I, "x", Var("n")) == I


def test_subst_avoids_capture():
    # (\y. x y){x := y} must not capture the free y
    got = subst(parse_term(r"\y. x y"), "x", Var("y"))
    assert got == LinLam("z", App(Var("y"), BVar(0)))


def test_instantiate_matches_named_oracle():
    rng = random.Random(3)
    checked = 0
    for _ in range(600):
        body, _ = gen_term(rng.randint(1, 10), rng, "beta-heavy")
        arg, _ = gen_term(rng.randint(1, 6), rng, "beta-heavy")
        lam = LinLam("x", App(BVar(0), body)) if rng.random() < 0.5 else BangLam("x", App(BVar(0), Bang(body)))
        redex = App(lam, arg if isinstance(lam, LinLam) else Bang(arg))
        expected = oracles.beta_root(redex)
        got = instantiate(lam.body, arg)
        assert got == expected
        checked += 1
    assert checked == 600


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32))
def test_linear_subst_never_duplicates_registers(seed):
    rng = random.Random(seed)
    t, _ = gen_term(12, rng, "quantum-heavy")
    for pos, sub, _ in enumerate_occurrences(t):
        if isinstance(sub, App) and isinstance(sub.fun, LinLam):
            res = replace_at(t, pos, instantiate(sub.fun.body, sub.arg))
            assert max(register_occurrences(res).values(), default=1) == 1


# -- validity -----------------------------------------------------------------


def test_duplicate_register_invalid():
    rep = validate(parse_term("<r0, r0>"))
    assert not rep.ok
    assert rep.violations[0].kind == "duplicate-register"


def test_linear_variable_twice_invalid():
    rep = validate(parse_term(r"\x. <x, x>"))
    assert [v.kind for v in rep.violations] == ["nonlinear-binder"]


def test_linear_variable_unused_invalid():
    assert validate(parse_term(r"\x. a")).violations[0].kind == "nonlinear-binder"


def test_register_under_bang_invalid():
    assert validate(parse_term("!r0")).violations[0].kind == "nonsurface-register"


def test_linear_variable_under_bang_invalid():
    rep = validate(parse_term(r"\x. !x"))
    assert rep.violations[0].kind == "nonsurface-linear-variable"


def test_linear_variable_in_meas_branch_invalid():
    rep = validate(parse_term(r"\x. meas(p, x, n)"))
    assert not rep.ok


def test_gate_choice_by_measurement_is_valid():
    # choosing a gate by measurement through banged continuations
    t = parse_term(
        r"(\!f. f z r1) (meas(r0, !(\u. \x. u (U[H] x)), !(\u. \x. u (U[NOT] x))))"
    )
    assert validate(t).ok


def test_bang_variable_may_be_duplicated():
    assert validate(parse_term(r"\!x. x !x")).ok


def test_report_lists_every_violation():
    rep = validate(parse_term(r"<r0, <r0, !r1>>"))
    kinds = sorted(v.kind for v in rep.violations)
    assert kinds == ["duplicate-register", "nonsurface-register"]
    assert "invalid" in str(rep)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(sorted(PROFILES)))
def test_registers_of_valid_terms_are_surface(seed, profile):
    t, _ = gen_term(12, random.Random(seed), profile)
    assert validate(t).ok
    for _, sub, surface in enumerate_occurrences(t):
        if isinstance(sub, Reg):
            assert surface
