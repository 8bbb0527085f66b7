from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nrctrace.store import (
    BoolC,
    CollC,
    DomainOverlap,
    Eq,
    FreshSupply,
    IntC,
    IsEmpty,
    KindMismatch,
    Lab,
    LabelMultiset,
    NotAnExtension,
    OverlappingExtensions,
    Plus,
    RecordC,
    Single,
    StoreFormatError,
    Union,
    UnboundLabel,
    disjoint_union,
    flatten,
    infer_store_type,
    load_table,
    multiset_union,
    op_eval,
    orthogonal_merge,
    readback,
    store_from_json,
    store_to_json,
    store_typecheck,
    sum_ints,
)
from nrctrace.types import INT, CollTy, RecTy
from nrctrace.values import VBag, VInt, VRecord, bag

MS = LabelMultiset.of


def row(**kw):
    return VRecord(tuple((k, VInt(v)) for k, v in kw.items()))


class TestMultisets:
    def test_union_adds_pointwise(self):
        assert multiset_union(MS({"l": 1}), MS({"l": 2})) == MS({"l": 3})

    def test_union_identity(self):
        m = MS({"a": 2, "b": 1})
        assert multiset_union(MS({}), m) == m

    def test_union_disjoint_case(self):
        assert multiset_union(MS({"l1": 2}), MS({"l2": 1})) == MS({"l1": 2, "l2": 1})

    def test_disjoint_union(self):
        assert disjoint_union(MS({"l1": 1}), MS({"l2": 1})) == MS({"l1": 1, "l2": 1})
        assert disjoint_union(MS({}), MS({"x": 4})) == MS({"x": 4})

    def test_disjoint_union_overlap(self):
        with pytest.raises(DomainOverlap):
            disjoint_union(MS({"l": 1}), MS({"l": 1}))

    def test_zero_multiplicity_rejected(self):
        with pytest.raises(ValueError):
            LabelMultiset((("l", 0),))

    def test_order_irrelevant(self):
        assert MS([("b", 1), ("a", 2)]) == MS([("a", 2), ("b", 1)])

    @given(st.dictionaries(st.sampled_from("abcde"), st.integers(1, 4)),
           st.dictionaries(st.sampled_from("abcde"), st.integers(1, 4)))
    def test_union_commutes(self, a, b):
        assert multiset_union(MS(a), MS(b)) == multiset_union(MS(b), MS(a))


class TestMerge:
    base = {"x": IntC(1)}

    def test_empty_extensions(self):
        assert orthogonal_merge(self.base, self.base, self.base) == self.base

    def test_disjoint_extensions(self):
        got = orthogonal_merge({**self.base, "a": IntC(1)}, {**self.base, "b": IntC(2)}, self.base)
        assert got == {"x": IntC(1), "a": IntC(1), "b": IntC(2)}

    def test_overlap(self):
        with pytest.raises(OverlappingExtensions):
            orthogonal_merge({**self.base, "a": IntC(1)}, {**self.base, "a": IntC(2)}, self.base)

    def test_not_an_extension(self):
        with pytest.raises(NotAnExtension):
            orthogonal_merge({"x": IntC(2)}, self.base, self.base)


class TestOp:
    def test_plus(self):
        assert op_eval(Plus(Lab("l1"), Lab("l2")), {"l1": IntC(5), "l2": IntC(42)}) == IntC(47)

    def test_is_empty(self):
        assert op_eval(IsEmpty(Lab("l")), {"l": CollC(MS({}))}) == BoolC(True)

    def test_singleton(self):
        assert op_eval(Single(Lab("l")), {"l": IntC(3)}) == CollC(MS({"l": 1}))

    def test_union(self):
        sigma = {"a": CollC(MS({"x": 1})), "b": CollC(MS({"x": 2, "y": 1}))}
        assert op_eval(Union(Lab("a"), Lab("b")), sigma) == CollC(MS({"x": 3, "y": 1}))

    def test_unbound(self):
        with pytest.raises(UnboundLabel):
            op_eval(Plus(Lab("a"), Lab("b")), {"a": IntC(1)})

    def test_kind_mismatch(self):
        with pytest.raises(KindMismatch):
            op_eval(Eq(Lab("a"), Lab("b")), {"a": IntC(1), "b": BoolC(True)})


class TestFlattenSum:
    def test_sum(self):
        sigma = {"a": IntC(3), "b": IntC(4), "c": IntC(0)}
        assert sum_ints(sigma, MS({"a": 1, "b": 1, "c": 1})) == 7

    def test_sum_empty(self):
        assert sum_ints({}, MS({})) == 0

    def test_sum_weighted(self):
        assert sum_ints({"a": IntC(5)}, MS({"a": 3})) == 15

    def test_flatten_scales(self):
        sigma = {"c": CollC(MS({"l": 1}))}
        assert flatten(sigma, MS({"c": 2})) == MS({"l": 2})

    def test_big_ints(self):
        sigma = {"a": IntC(2**80)}
        assert sum_ints(sigma, MS({"a": 4})) == 2**82


class TestTyping:
    def test_fixture_typechecks(self, sigma):
        psi = infer_store_type(sigma)
        assert store_typecheck(psi, sigma)
        assert psi["r"] == CollTy(RecTy((("A", INT), ("B", INT), ("C", INT))))
        assert psi["s"] == CollTy(RecTy((("C", INT), ("D", INT))))

    def test_self_loop_rejected(self):
        sigma = {"l": CollC(MS({"l": 1}))}
        assert not store_typecheck({"l": CollTy(INT)}, sigma)
        with pytest.raises(StoreFormatError):
            infer_store_type(sigma)

    def test_wrong_type(self):
        assert not store_typecheck({"l": CollTy(INT)}, {"l": IntC(1)})

    def test_heterogeneous_collection(self):
        with pytest.raises(StoreFormatError):
            infer_store_type({"a": IntC(1), "b": BoolC(True), "c": CollC(MS({"a": 1, "b": 1}))})


class TestReadback:
    def test_int(self):
        assert readback({"l": IntC(5)}, INT, "l") == VInt(5)

    def test_table(self, sigma):
        r = readback(sigma, None, "r")
        assert r == bag([(row(A=1, B=2, C=3), 1), (row(A=1, B=3, C=3), 1), (row(A=7, B=42, C=4), 1)])

    def test_multiplicity_kept(self):
        sigma = {"a": IntC(1), "b": IntC(1), "c": CollC(MS({"a": 2, "b": 1}))}
        assert readback(sigma, None, "c") == VBag(((VInt(1), 3),))

    def test_type_mismatch(self):
        with pytest.raises(KindMismatch):
            readback({"l": IntC(5)}, CollTy(INT), "l")


class TestFormats:
    def test_json_round_trip(self, sigma):
        obj = json.loads(json.dumps(store_to_json(sigma, "db")))
        back, root = store_from_json(obj)
        assert back == sigma and root == "db"

    @pytest.mark.parametrize(
        "obj",
        [
            {},
            {"labels": {"a": {"int": "5"}}},
            {"labels": {"a": {"coll": {"b": 0}}, "b": {"int": 1}}},
            {"labels": {"a": {"record": {"A": "nowhere"}}}},
            {"labels": {"a b": {"int": 1}}},
            {"labels": {"a": {"coll": {"a": 1}}}},
            {"root": "x", "labels": {"a": {"int": 1}}},
        ],
    )
    def test_bad_json(self, obj):
        with pytest.raises(StoreFormatError):
            store_from_json(obj)

    def test_load_table_naming(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("A,B\n1,2\n3,true\n")
        sigma = load_table("t", str(p))
        assert sigma["t"] == CollC(MS({"t1": 1, "t2": 1}))
        assert sigma["t1"] == RecordC((("A", "t11"), ("B", "t12")))
        assert sigma["t22"] == BoolC(True)

    def test_load_table_bad_cell(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("A\nx\n")
        with pytest.raises(StoreFormatError):
            load_table("t", str(p))


class TestFresh:
    def test_avoids_store_and_avoid_set(self):
        f = FreshSupply(avoid={"%2"})
        assert f.fresh({"%1": IntC(0)}) == "%3"
        assert f.fresh({}) == "%4"

    def test_deterministic(self):
        a, b = FreshSupply(), FreshSupply()
        assert [a.fresh({}) for _ in range(3)] == [b.fresh({}) for _ in range(3)]
