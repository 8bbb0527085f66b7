from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrctrace import syntax as S
from nrctrace.core import (
    Comp,
    Let,
    NotANormal,
    Proj,
    TermE,
    TypeError_,
    anormalize,
    atoms_of,
    compile_query,
    parse_core,
    pretty,
    typecheck,
)
from nrctrace.fixtures import JOIN
from nrctrace.gen import random_case
from nrctrace.store import Copy, Lab, Plus, Var, infer_store_type
from nrctrace.types import BOOL, INT, ANY, CollTy, RecTy

seeds = st.integers(0, 10**6)


def as_labels(e: S.Expr) -> S.Expr:
    return S.resolve(e, labels=lambda _: True)


class TestParse:
    def test_conditional(self):
        assert S.parse("if x == 5 then y + 42 else x") == S.SIf(
            S.SEq(S.SVar("x"), S.SInt(5)), S.SPlus(S.SVar("y"), S.SInt(42)), S.SVar("x")
        )

    def test_empty(self):
        assert S.parse("{}") == S.SEmpty(None)

    def test_annotated_empty(self):
        assert S.parse("({} : {int})") == S.SEmpty(CollTy(INT))

    def test_join_shape(self):
        e = S.parse(JOIN)
        assert isinstance(e, S.SFor) and isinstance(e.body, S.SFor)
        assert isinstance(e.body.body, S.SIf)
        assert isinstance(e.body.body.t, S.SSingle)

    def test_precedence(self):
        assert S.parse("1 + 2 == 3 && true") == S.SAnd(
            S.SEq(S.SPlus(S.SInt(1), S.SInt(2)), S.SInt(3)), S.SBool(True)
        )

    def test_label_sigil(self):
        assert S.parse("@r11 + x") == S.SPlus(S.SLabel("r11"), S.SVar("x"))

    @pytest.mark.parametrize("text", ["if x then", "{A: }", "1 +", "for x in R x", "$"])
    def test_errors_have_position(self, text):
        with pytest.raises(S.ParseError) as info:
            S.parse(text)
        assert info.value.line == 1 and info.value.col >= 1

    def test_error_line_numbers(self):
        with pytest.raises(S.ParseError) as info:
            S.parse("1 +\n\n  )")
        assert info.value.line == 3 and info.value.col == 3

    @given(seeds)
    @settings(max_examples=150, deadline=None)
    def test_print_parse_round_trip(self, seed):
        e = random_case(seed).surface
        assert as_labels(S.parse(S.pretty(e))) == e


class TestDesugar:
    def test_comprehension(self):
        e = S.parse("{x.B | x in R}")
        assert S.desugar(e) == S.SFor("x", S.SVar("R"), S.SSingle(S.SProj(S.SVar("x"), "B")))

    def test_idempotent_on_core(self):
        e = S.parse("for (x in R) {x.B}")
        assert S.desugar(e) == e

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_idempotent(self, seed):
        d = S.desugar(random_case(seed).surface)
        assert S.desugar(d) == d


class TestANormal:
    def test_nested_plus(self):
        e = anormalize(S.parse("(1 + 2) + 3"))
        assert isinstance(e, Let)
        assert pretty(e) == "let t1 = 1 in let t2 = 2 in let t3 = t1 + t2 in let t4 = 3 in t3 + t4"

    def test_atom(self):
        assert anormalize(S.parse("x")) == TermE(Copy(Var("x")))

    def test_join_core_shape(self, sigma):
        e = compile_query(JOIN, sigma, "db")
        assert isinstance(e, Comp) and e.w == Lab("r")
        inner = e.body
        while isinstance(inner, Let):
            inner = inner.e2
        assert isinstance(inner, Comp) and inner.w == Lab("s")

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_operator_arguments_are_atoms(self, seed):
        core = random_case(seed).core
        for atom, _ in atoms_of(core):
            assert isinstance(atom, (Var, Lab))

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_core_round_trip(self, seed):
        core = random_case(seed).core
        assert parse_core(pretty(core)) == core

    def test_to_core_rejects_non_normal(self):
        with pytest.raises(NotANormal):
            parse_core("(1 + 2) + 3")


class TestTypecheck:
    def test_plus(self):
        e = parse_core("a + b")
        assert typecheck({"a": INT, "b": INT}, e) == INT

    def test_empty(self):
        assert typecheck({}, parse_core("({} : {int})")) == CollTy(INT)
        assert typecheck({}, parse_core("{}")) == CollTy(ANY)

    def test_join_schema(self, sigma):
        psi = infer_store_type(sigma)
        e = compile_query(JOIN, sigma, "db")
        assert typecheck(psi, e) == CollTy(RecTy((("A", INT), ("B", INT), ("D", INT))))

    @pytest.mark.parametrize(
        "text, psi",
        [
            ("a == b", {"a": BOOL, "b": INT}),
            ("a + b", {"a": INT, "b": BOOL}),
            ("!a", {"a": INT}),
            ("if a then b else c", {"a": INT, "b": INT, "c": INT}),
            ("if a then b else c", {"a": BOOL, "b": INT, "c": BOOL}),
            ("for (x in a) x", {"a": INT}),
            ("sum (x in a) x", {"a": CollTy(BOOL)}),
        ],
    )
    def test_rejects(self, text, psi):
        with pytest.raises(TypeError_):
            typecheck(psi, parse_core(text))

    def test_unbound(self):
        with pytest.raises(TypeError_):
            typecheck({}, parse_core("a + a"))

    def test_unknown_field(self):
        with pytest.raises(TypeError_):
            typecheck({"a": RecTy((("A", INT),))}, Proj("B", Lab("a")))

    def test_projection_from_unannotated_empty(self):
        with pytest.raises(TypeError_):
            typecheck({}, anormalize(S.parse("for (x in {}) x.A")))

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_deterministic_and_total(self, seed):
        c = random_case(seed)
        psi = infer_store_type(c.sigma, hints=c.inputs)
        t1 = typecheck(psi, c.core)
        assert t1 == typecheck(psi, c.core)


# Mutation: swap one int leaf for a bool (or vice versa) where the operator forces the kind.

INT_SLOTS = (S.SPlus, S.SEq)
BOOL_SLOTS = (S.SAnd,)


def _mutants(e: S.Expr):
    """Yield every program obtained by a single forced int/bool leaf swap."""
    if isinstance(e, INT_SLOTS):
        for side in ("a", "b"):
            kid = getattr(e, side)
            if isinstance(kid, S.SInt):
                yield type(e)(**{**vars(e), side: S.SBool(True)})
    if isinstance(e, BOOL_SLOTS):
        for side in ("a", "b"):
            if isinstance(getattr(e, side), S.SBool):
                yield type(e)(**{**vars(e), side: S.SInt(0)})
    if isinstance(e, S.SNot) and isinstance(e.e, S.SBool):
        yield S.SNot(S.SInt(0))
    if isinstance(e, S.SIf) and isinstance(e.c, S.SBool):
        yield S.SIf(S.SInt(1), e.t, e.f)
    kids: list[S.Expr] = []
    S.map_children(e, lambda c: kids.append(c) or c)
    for i, kid in enumerate(kids):
        for m in _mutants(kid):
            j = iter(range(len(kids)))
            yield S.map_children(e, lambda c, m=m, i=i, j=j: m if next(j) == i else c)


class TestMutation:
    def test_literal(self):
        e = S.SPlus(S.SLabel("a"), S.SBool(True))
        with pytest.raises(TypeError_):
            typecheck({"a": INT}, anormalize(e))

    def test_random_mutants_rejected(self):
        checked = 0
        for seed in range(400):
            c = random_case(seed)
            psi = infer_store_type(c.sigma, hints=c.inputs)
            for m in _mutants(c.surface):
                with pytest.raises(TypeError_):
                    typecheck(psi, anormalize(m))
                checked += 1
        assert checked >= 100, checked


def test_plus_term_shape():
    assert parse_core("a + b") == TermE(Plus(Lab("a"), Lab("b")))
