from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrctrace import syntax as S
from nrctrace.core import anormalize, compile_query, typecheck
from nrctrace.evaluate import denote, eval_core
from nrctrace.fixtures import AGG, COND_BINDS, COND_QUERY, EXAMPLES, JOIN, cond_store, proj_store
from nrctrace.gen import random_case
from nrctrace.store import (
    CollC,
    FreshSupply,
    IntC,
    LabelMultiset,
    infer_store_type,
    readback,
    store_typecheck,
)
from nrctrace.trace import traced_eval
from nrctrace.types import INT, CollTy
from nrctrace.values import EMPTY_BAG, VInt, VRecord, bag

seeds = st.integers(0, 10**6)


def row(**kw):
    return VRecord(tuple((k, VInt(v)) for k, v in kw.items()))


def table_env(sigma):
    return {l: readback(sigma, None, l) for l in sigma}


class TestDenote:
    def test_conditional(self):
        # x = 5 takes the then-branch: 42 + 42
        e = S.parse(COND_QUERY)
        assert denote(e, {"x": VInt(5), "y": VInt(42)}) == VInt(84)

    def test_conditional_else(self):
        e = S.parse(COND_QUERY)
        assert denote(e, {"x": VInt(4), "y": VInt(42)}) == VInt(4)

    def test_empty(self):
        assert denote(S.parse("{}"), {}) == EMPTY_BAG

    def test_agg(self, sigma):
        e = S.resolve(S.parse(AGG), root_fields={"R": "r", "S": "s"})
        assert denote(e, {}, table_env(sigma)) == bag([(row(C=42, D=7), 2)])

    def test_join(self, sigma):
        e = S.resolve(S.parse(JOIN), root_fields={"R": "r", "S": "s"})
        assert denote(e, {}, table_env(sigma)) == bag([(row(A=1, B=2, D=7), 1), (row(A=1, B=3, D=7), 1)])

    def test_comprehension(self):
        sigma = proj_store()
        e = S.resolve(S.parse("{x.B | x in R}"), binds={"R": "l"})
        assert denote(e, {}, table_env(sigma)) == bag([(VInt(2), 1), (VInt(3), 1)])

    def test_desugar_preserves_meaning(self):
        sigma = proj_store()
        e = S.resolve(S.parse("{x.B | x in R}"), binds={"R": "l"})
        assert denote(S.desugar(e), {}, table_env(sigma)) == denote(e, {}, table_env(sigma))

    def test_bag_union_and_sum(self):
        e = S.parse("sum (x in {1} union {1} union {3}) x")
        assert denote(e, {}) == VInt(5)


class TestEval:
    @pytest.mark.parametrize("name", ["join", "agg", "reproject"])
    def test_examples_agree_with_denotation(self, sigma, name):
        ex = EXAMPLES[name]
        e = ex.compile(sigma)
        st_ = eval_core(sigma, ex.dest, e)
        surface = S.resolve(S.parse(ex.query), root_fields={"R": "r", "S": "s"})
        assert readback(st_, None, ex.dest) == denote(surface, {}, table_env(sigma))

    def test_join_output(self, sigma):
        st_ = eval_core(sigma, "l", EXAMPLES["join"].compile(sigma))
        assert readback(st_, None, "l") == bag([(row(A=1, B=2, D=7), 1), (row(A=1, B=3, D=7), 1)])

    def test_term(self):
        st_ = eval_core({"a": IntC(2)}, "d", compile_query("a + a", {"a": IntC(2)}))
        assert st_["d"] == IntC(4)

    def test_iteration_over_empty(self):
        e = anormalize(S.parse("for (x in ({} : {int})) {x}"))
        st_ = eval_core({}, "d", e)
        assert st_["d"] == CollC(LabelMultiset.of({}))

    def test_multiplicity_preserved(self):
        sigma = {"a": IntC(1), "b": IntC(2), "c": CollC(LabelMultiset.of({"a": 3, "b": 1}))}
        e = compile_query("for (x in c) {x + x}", sigma)
        st_ = eval_core(sigma, "d", e)
        assert sorted(m for _, m in st_["d"].elems) == [1, 3]
        assert readback(st_, None, "d") == bag([(VInt(2), 3), (VInt(4), 1)])

    def test_conditional(self):
        sigma = cond_store()
        e = compile_query(COND_QUERY, sigma, binds=COND_BINDS)
        assert readback(eval_core(sigma, "l'", e), INT, "l'") == VInt(84)

    def test_dest_must_be_fresh(self, sigma):
        with pytest.raises(Exception):
            eval_core(sigma, "r", EXAMPLES["join"].compile(sigma))


class TestProperties:
    @given(seeds)
    @settings(max_examples=150, deadline=None)
    def test_operational_matches_denotational(self, seed):
        c = random_case(seed)
        got = readback(eval_core(c.sigma, "out", c.core), None, "out")
        assert got == denote(c.surface, {}, table_env(c.sigma))

    @given(seeds)
    @settings(max_examples=150, deadline=None)
    def test_extends_store_and_preserves_typing(self, seed):
        c = random_case(seed)
        st_ = eval_core(c.sigma, "out", c.core)
        assert all(st_[l] == k for l, k in c.sigma.items())
        psi = infer_store_type(st_, hints=c.inputs)
        assert store_typecheck(psi, st_)
        ty = typecheck(infer_store_type(c.sigma, hints=c.inputs), c.core)
        readback(st_, ty if not isinstance(ty, CollTy) else None, "out")

    @given(seeds)
    @settings(max_examples=150, deadline=None)
    def test_traced_store_identical(self, seed):
        c = random_case(seed)
        plain = eval_core(c.sigma, "out", c.core, FreshSupply())
        traced, _ = traced_eval(c.sigma, "out", c.core, FreshSupply())
        assert plain == traced
