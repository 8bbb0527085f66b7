from __future__ import annotations

import json
import random

import pytest
from helpers import run_example
from hypothesis import given, settings
from hypothesis import strategies as st

from nrctrace.adapt import (
    IllegalEdit,
    adapt,
    apply_edits,
    check_edits,
    edits_from_json,
    edits_to_json,
    matches_avoiding,
    random_edit,
    run_fidelity_check,
)
from nrctrace.core import compile_query
from nrctrace.fixtures import COND_BINDS, COND_QUERY, EXAMPLES, PROJ_BINDS, PROJ_QUERY, cond_store, proj_store
from nrctrace.gen import random_case
from nrctrace.slicing import backward_closure
from nrctrace.store import (
    BoolC,
    CollC,
    IntC,
    LabelMultiset,
    RecordC,
    StoreFormatError,
    infer_store_type,
    readback,
)
from nrctrace.trace import (
    CompT,
    Cond,
    check_consistency,
    subtraces,
    trace_alpha_eq,
    traced_eval,
    written_labels,
)
from nrctrace.values import VInt, VRecord, bag

seeds = st.integers(0, 10**6)


def row(**kw):
    return VRecord(tuple((k, VInt(v)) for k, v in kw.items()))


class TestMatchesAvoiding:
    def test_fixture(self, sigma):
        assert matches_avoiding(sigma, infer_store_type(sigma), set())

    def test_avoid_breach(self, sigma):
        assert not matches_avoiding(sigma, infer_store_type(sigma), {"r11"})

    def test_edited_int(self, sigma):
        psi = infer_store_type(sigma)
        assert matches_avoiding(apply_edits(sigma, [("r11", IntC(3))]), psi, set())

    def test_type_change(self, sigma):
        psi = infer_store_type(sigma)
        assert not matches_avoiding(apply_edits(sigma, [("r11", BoolC(True))]), psi, set())


class TestAdapt:
    @pytest.mark.parametrize("name", ["join", "agg", "reproject"])
    def test_no_edit_fixpoint(self, name):
        sigma, _, st_, T = run_example(name)
        st2, T2 = adapt(st_, T)
        assert T2 == T and st2 == st_

    @pytest.mark.parametrize("name", ["join", "agg", "reproject"])
    def test_no_edit_from_input_store(self, name):
        sigma, _, st_, T = run_example(name)
        st2, T2 = adapt(sigma, T)
        assert T2 == T and st2 == st_

    def test_conditional_branch_switch(self):
        sigma = cond_store()
        e = compile_query(COND_QUERY, sigma, binds=COND_BINDS)
        _, T = traced_eval(sigma, "l'", e)
        sigma2 = apply_edits(sigma, [("lx", IntC(4))])
        st2, T2 = adapt(sigma2, T)
        assert st2["l'"] == IntC(4)
        (c,) = [n for n in subtraces(T2) if isinstance(n, Cond)]
        assert c.b is False
        _, scratch_T = traced_eval(sigma2, "l'", e)
        assert trace_alpha_eq(T2, scratch_T, frozenset(sigma2) | {"l'"})

    def test_abandoned_branch_labels_kept(self):
        sigma = cond_store()
        e = compile_query(COND_QUERY, sigma, binds=COND_BINDS)
        st_, T = traced_eval(sigma, "l'", e)
        st2, _ = adapt(apply_edits(st_, [("lx", IntC(4))]), T)
        assert st2["l'"] == IntC(4)
        assert st2["%3"] == IntC(42)

    def test_join_edit(self, sigma):
        e = EXAMPLES["join"].compile(sigma)
        _, T = traced_eval(sigma, "l", e)
        sigma2 = apply_edits(sigma, [("s31", IntC(4))])
        st2, T2 = adapt(sigma2, T)
        want = bag([(row(A=7, B=42, D=7), 1)])
        assert readback(st2, None, "l") == want
        assert readback(traced_eval(sigma2, "l", e)[0], None, "l") == want
        assert check_consistency(st2, T2)
        # the cached r1 and r2 sub-traces are reused under their input labels
        assert [en.label for en in T2.theta] == [en.label for en in T.theta]

    def test_deleted_element_drops_subtrace(self):
        sigma = proj_store()
        e = compile_query(PROJ_QUERY, sigma, binds=PROJ_BINDS)
        _, T = traced_eval(sigma, "l'", e)
        sigma2 = apply_edits(sigma, [("l", CollC(LabelMultiset.of({"l2": 1})))])
        st2, T2 = adapt(sigma2, T)
        assert isinstance(T2, CompT) and [en.label for en in T2.theta] == ["l2"]
        assert readback(st2, None, "l'") == bag([(VInt(3), 1)])

    def test_added_element_evaluated_fresh(self):
        sigma = proj_store()
        e = compile_query(PROJ_QUERY, sigma, binds=PROJ_BINDS)
        _, T = traced_eval(sigma, "l'", e)
        extra = {"l31": IntC(0), "l32": IntC(9), "l3": RecordC((("A", "l31"), ("B", "l32")))}
        sigma2 = {**sigma, **extra, "l": CollC(LabelMultiset.of({"l1": 1, "l2": 1, "l3": 2}))}
        st2, T2 = adapt(sigma2, T)
        assert [(en.label, en.m) for en in T2.theta] == [("l1", 1), ("l2", 1), ("l3", 2)]
        new = written_labels(T2) - written_labels(T)
        assert new and not new & set(sigma2)
        assert readback(st2, None, "l'") == bag([(VInt(2), 1), (VInt(3), 1), (VInt(9), 2)])

    def test_cached_multiplicity_ignored(self):
        sigma = proj_store()
        e = compile_query(PROJ_QUERY, sigma, binds=PROJ_BINDS)
        _, T = traced_eval(sigma, "l'", e)
        sigma2 = apply_edits(sigma, [("l", CollC(LabelMultiset.of({"l1": 3, "l2": 1})))])
        st2, T2 = adapt(sigma2, T)
        assert readback(st2, None, "l'") == bag([(VInt(2), 3), (VInt(3), 1)])
        assert [en.m for en in T2.theta] == [3, 1]


class TestFidelity:
    @pytest.mark.parametrize("name", ["join", "agg", "reproject"])
    def test_empty_script(self, sigma, name):
        ex = EXAMPLES[name]
        assert run_fidelity_check(ex.compile(sigma), sigma, [], ex.dest).ok

    def test_join_edit(self, sigma):
        v = run_fidelity_check(EXAMPLES["join"].compile(sigma), sigma, [("s31", IntC(4))], "l")
        assert v.ok and str(v) == "PASS"

    @pytest.mark.parametrize(
        "edits",
        [
            [("r13", IntC(2))],
            [("s21", IntC(3)), ("s32", IntC(8))],
            [("r", CollC(LabelMultiset.of({"r1": 2, "r3": 1})))],
            [("s1", RecordC((("C", "s11"), ("D", "r31"))))],
        ],
    )
    @pytest.mark.parametrize("name", ["join", "agg", "reproject"])
    def test_fixture_edits(self, sigma, name, edits):
        ex = EXAMPLES[name]
        assert run_fidelity_check(ex.compile(sigma), sigma, edits, ex.dest).ok

    def test_illegal_edit_verdict(self, sigma):
        v = run_fidelity_check(EXAMPLES["join"].compile(sigma), sigma, [("r11", BoolC(True))], "l")
        assert not v.ok and v.reason.startswith("illegal edit")

    @given(seeds)
    @settings(max_examples=150, deadline=None)
    def test_random_single_edit(self, seed):
        c = random_case(seed)
        _, T = traced_eval(c.sigma, "out", c.core)
        rng = random.Random(seed)
        edit = random_edit(c.sigma, c.inputs, rng, prefer=backward_closure(T, {"out"}) & set(c.sigma))
        v = run_fidelity_check(c.core, c.sigma, [edit] if edit else [], "out")
        assert v.ok, (v.reason, v.details)

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_adaptability_and_idempotence(self, seed):
        c = random_case(seed)
        st_, T = traced_eval(c.sigma, "out", c.core)
        st2, T2 = adapt(st_, T)
        assert (st2, T2) == (st_, T)


class TestEdits:
    def test_json_round_trip(self):
        edits = [("s31", IntC(4)), ("s", CollC(LabelMultiset.of({"s1": 1})))]
        obj = json.loads(json.dumps(edits_to_json(edits)))
        assert obj[0] == {"label": "s31", "value": {"int": 4}}
        assert edits_from_json(obj) == edits

    @pytest.mark.parametrize("obj", [{}, [{"label": "a"}], [{"label": "a", "value": {"int": "x"}}]])
    def test_bad_json(self, obj):
        with pytest.raises(StoreFormatError):
            edits_from_json(obj)

    def test_written_label_rejected(self, sigma):
        _, T = traced_eval(sigma, "l", EXAMPLES["join"].compile(sigma))
        with pytest.raises(IllegalEdit):
            check_edits(sigma, infer_store_type(sigma), T, [("l", IntC(1))])

    def test_type_change_rejected(self, sigma):
        _, T = traced_eval(sigma, "l", EXAMPLES["join"].compile(sigma))
        with pytest.raises(IllegalEdit):
            check_edits(sigma, infer_store_type(sigma), T, [("s31", BoolC(False))])

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_random_edits_preserve_typing(self, seed):
        c = random_case(seed)
        edit = random_edit(c.sigma, c.inputs, random.Random(seed))
        if edit is None:
            return
        _, T = traced_eval(c.sigma, "out", c.core)
        check_edits(c.sigma, c.inputs, T, [edit])
