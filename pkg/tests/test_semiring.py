from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nrctrace.check import LAWS, semiring_law_suite
from nrctrace.semiring import (
    SEMIRINGS,
    BoolSR,
    NatSR,
    Poly,
    PolySR,
    bind,
    eta,
    kadd,
    kcoll_str,
    kscale,
    kzero,
    parse_poly,
)

P = PolySR()

monos = st.lists(st.sampled_from(["X", "Y", "Z", "R1", "S3"]), max_size=3)
polys = st.lists(st.tuples(monos, st.integers(1, 5)), max_size=4).map(Poly.of)
ELEMS = {"nat": st.integers(0, 1000), "bool": st.booleans(), "poly": polys}


@pytest.mark.parametrize("name", sorted(SEMIRINGS))
@pytest.mark.parametrize("law", sorted(LAWS))
def test_law(name, law):
    sr = SEMIRINGS[name]
    el = ELEMS[name]

    @given(el, el, el)
    def check(a, b, c):
        assert LAWS[law](sr, a, b, c)

    check()


@pytest.mark.parametrize("name", sorted(SEMIRINGS))
def test_law_suite(name):
    res = semiring_law_suite(SEMIRINGS[name], n=200, seed=3)
    assert res.ok and res.total == 200


class TestPoly:
    def test_canonical(self):
        a = Poly.of([(("S3", "R1"), 1), (("R2", "S3"), 1)])
        b = Poly.of([(("R2", "S3"), 1), (("R1", "S3"), 1)])
        assert a == b
        assert str(a) == "R1*S3 + R2*S3"

    def test_zero_dropped(self):
        assert Poly.of([(("X",), 0)]) == P.zero
        assert str(P.zero) == "0"

    def test_printing(self):
        assert str(Poly.of([(("X",), 2), ((), 1)])) == "1 + 2*X"
        assert str(P.mul(Poly.var("X"), Poly.var("X"))) == "X*X"

    @given(polys)
    def test_parse_round_trip(self, p):
        assert parse_poly(str(p)) == p

    @given(polys)
    def test_json_round_trip(self, p):
        assert P.from_json(P.to_json(p)) == p

    def test_bad_text(self):
        with pytest.raises(ValueError):
            parse_poly("X + * Y")

    def test_product(self):
        got = P.mul(P.add(Poly.var("R1"), Poly.var("R2")), Poly.var("S3"))
        assert got == parse_poly("R1*S3 + R2*S3")


class TestInstances:
    def test_nat(self):
        n = NatSR()
        assert (n.add(2, 3), n.mul(2, 3), n.zero, n.one) == (5, 6, 0, 1)
        with pytest.raises(ValueError):
            n.from_json(-1)

    def test_bool(self):
        b = BoolSR()
        assert b.add(True, False) and not b.mul(True, False)
        with pytest.raises(ValueError):
            b.from_json(1)


class TestKCollections:
    def test_eta(self):
        assert eta(P, "l") == {"l": P.one}

    def test_bind_single_point(self):
        k1, k2 = Poly.var("A"), Poly.var("B")
        assert bind(P, {"l1": k1}, {"l1": {"m": k2}}) == {"m": P.mul(k1, k2)}

    def test_add_identity(self):
        f = {"a": Poly.var("X")}
        assert kadd(P, f, kzero()) == f

    def test_support_has_no_zeros(self):
        n = NatSR()
        assert kscale(n, 0, {"a": 3}) == {}
        assert kadd(n, {"a": 1}, {"b": 2}) == {"a": 1, "b": 2}

    @given(st.dictionaries(st.sampled_from("abc"), st.integers(1, 4)))
    def test_bind_with_eta_is_identity(self, f):
        n = NatSR()
        assert bind(n, f, {x: eta(n, x) for x in f}) == f

    def test_str(self):
        assert kcoll_str(NatSR(), {"b": 2, "a": 1}) == "[a:1, b:2]"
