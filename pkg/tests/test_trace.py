from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrctrace.core import compile_query, typecheck
from nrctrace.fixtures import COND_BINDS, COND_QUERY, PROJ_BINDS, PROJ_QUERY, cond_store, proj_store
from nrctrace.gen import random_case
from nrctrace.store import BoolC, IntC, IntT, Lab, Plus, Single, infer_store_type
from nrctrace.trace import (
    Assign,
    CompT,
    Cond,
    Entry,
    ProjT,
    Seq,
    TraceTypeError,
    alpha_bijection,
    check_consistency,
    consistency_violation,
    in_star,
    make_theta,
    out,
    out_star,
    subtraces,
    trace_alpha_eq,
    trace_typecheck,
    traced_eval,
    written_labels,
)
from nrctrace.tracefmt import (
    TraceSyntaxError,
    parse_trace,
    trace_dot,
    trace_from_json,
    trace_text,
    trace_to_json,
)
from nrctrace.types import INT, CollTy, compatible

from helpers import golden_trace

seeds = st.integers(0, 10**6)


def cond_run():
    sigma = cond_store()
    e = compile_query(COND_QUERY, sigma, binds=COND_BINDS)
    return sigma, e, *traced_eval(sigma, "l'", e)


def the_cond(T):
    (c,) = [n for n in subtraces(T) if isinstance(n, Cond)]
    return c


def proj_run():
    sigma = proj_store()
    e = compile_query(PROJ_QUERY, sigma, binds=PROJ_BINDS)
    return sigma, e, *traced_eval(sigma, "l'", e)


class TestBasics:
    def test_out(self):
        a = Assign("l", IntT(1))
        assert out(a) == "l"
        assert out(Seq(a, Assign("m", IntT(2)))) == "m"

    def test_stars(self):
        theta = make_theta([Entry("l1", Assign("a", IntT(1)), 2), Entry("l2", Assign("b", IntT(1)), 1)])
        assert dict(in_star(theta)) == {"l1": 2, "l2": 1}
        assert dict(out_star(theta)) == {"a": 2, "b": 1}

    def test_duplicate_entries_rejected(self):
        with pytest.raises(ValueError):
            make_theta([Entry("l1", Assign("a", IntT(1))), Entry("l1", Assign("b", IntT(1)))])

    def test_written(self):
        a, b = Assign("a", IntT(1)), Assign("b", IntT(2))
        assert written_labels(a) == {"a"}
        assert written_labels(Seq(a, b)) == {"a", "b"}

    def test_written_conditional(self):
        _, _, _, T = cond_run()
        # the hoisted constants add two temporaries to the test label and the result
        assert written_labels(T) == {"%1", "%2", "%3", "l'"}
        assert written_labels(the_cond(T)) == {"%3", "l'"}


class TestTracedEval:
    def test_conditional_shape(self):
        _, _, st_, T = cond_run()
        assert st_["l'"] == IntC(84)
        cond = the_cond(T)
        assert cond.b is True and st_[cond.test] == BoolC(True)
        assert out(cond.body) == "l'" == cond.l

    def test_projection_comprehension(self):
        sigma, _, _, T = proj_run()
        frontier = frozenset(sigma) | {"l'"}
        assert trace_alpha_eq(T, golden_trace("proj.trace"), frontier)
        projs = [en.trace.t1 for en in T.theta]
        assert [(p.field, p.rec, p.fl) for p in projs] == [("B", "l1", "l12"), ("B", "l2", "l22")]

    @given(seeds)
    @settings(max_examples=150, deadline=None)
    def test_out_is_dest(self, seed):
        c = random_case(seed)
        _, T = traced_eval(c.sigma, "out", c.core)
        assert out(T) == "out"

    @given(seeds)
    @settings(max_examples=150, deadline=None)
    def test_consistent(self, seed):
        c = random_case(seed)
        st_, T = traced_eval(c.sigma, "out", c.core)
        assert consistency_violation(st_, T) is None

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_trace_typing_matches_expression_typing(self, seed):
        c = random_case(seed)
        psi = infer_store_type(c.sigma, hints=c.inputs)
        _, T = traced_eval(c.sigma, "out", c.core)
        tt = trace_typecheck(psi, T)
        assert tt.label == "out"
        assert compatible(tt.ty, typecheck(psi, c.core))


class TestConsistency:
    def test_wrong_assign(self):
        assert not check_consistency({"l": IntC(46)}, Assign("l", IntT(47)))
        assert check_consistency({"l": IntC(47)}, Assign("l", IntT(47)))

    def test_wrong_test_value(self):
        _, _, st_, T = cond_run()
        bad = dict(st_)
        bad[the_cond(T).test] = BoolC(False)
        assert not check_consistency(bad, T)

    def test_stale_output(self):
        _, _, st_, T = proj_run()
        bad = dict(st_)
        bad["l12"] = IntC(9)
        assert not check_consistency(bad, T)


class TestTraceTyping:
    def test_assign(self):
        tt = trace_typecheck({"l1": INT, "l2": INT}, Assign("l", Plus(Lab("l1"), Lab("l2"))))
        assert (tt.label, tt.ty) == ("l", INT)

    def test_seq_wrong_type(self):
        T = Seq(Assign("a", Single(Lab("x"))), Assign("b", Plus(Lab("a"), Lab("x"))))
        with pytest.raises(TraceTypeError):
            trace_typecheck({"x": INT}, T)

    def test_comp_source_must_be_collection(self):
        T = CompT("l", "x", make_theta([]))
        with pytest.raises(TraceTypeError):
            trace_typecheck({"x": INT}, T)

    def test_projection(self):
        sigma, _, _, T = proj_run()
        tt = trace_typecheck(infer_store_type(sigma), T)
        assert tt.ty == CollTy(INT)


class TestAlpha:
    def test_reflexive(self):
        _, _, _, T = proj_run()
        assert trace_alpha_eq(T, T)

    def test_single_rename(self):
        T = golden_trace("proj.trace")
        renamed = parse_trace(trace_text(T).replace("l1'", "m1'"))
        frontier = {"l", "l1", "l2", "l12", "l22", "l'"}
        assert trace_alpha_eq(T, renamed, frontier)
        assert alpha_bijection(T, renamed, frontier)["l1'"] == "m1'"

    def test_frontier_is_fixed(self):
        T = golden_trace("proj.trace")
        renamed = parse_trace(trace_text(T).replace("l12", "m12"))
        assert not trace_alpha_eq(T, renamed, {"l12"})

    def test_different_shape(self):
        assert not trace_alpha_eq(Assign("a", IntT(1)), ProjT("a", "B", "r", "f"))

    def test_bijection_is_injective(self):
        T1 = Seq(Assign("a", IntT(1)), Assign("b", IntT(1)))
        T2 = Seq(Assign("c", IntT(1)), Assign("c", IntT(1)))
        assert not trace_alpha_eq(T1, T2)


class TestFormats:
    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_text_round_trip(self, seed):
        c = random_case(seed)
        _, T = traced_eval(c.sigma, "out", c.core)
        assert parse_trace(trace_text(T)) == T

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_json_round_trip(self, seed):
        c = random_case(seed)
        _, T = traced_eval(c.sigma, "out", c.core)
        assert trace_from_json(json.loads(json.dumps(trace_to_json(T)))) == T

    def test_text_without_expressions(self):
        _, _, _, T = cond_run()
        assert "|" not in trace_text(T, exprs=False)
        assert "| lx)" in trace_text(T)

    def test_syntax_error(self):
        with pytest.raises(TraceSyntaxError):
            parse_trace("l <- comp(")

    def test_dot(self):
        _, _, _, T = cond_run()
        dot = trace_dot(T)
        assert dot.startswith("digraph trace {")
        assert '"ly" -> "l\'";' in dot
        assert "subgraph cluster_" in dot
        assert trace_dot(T) == dot
