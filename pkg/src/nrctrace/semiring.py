"""Commutative semirings and K-collections over labels."""

from __future__ import annotations

import random
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import Any, Generic, TypeVar

K = TypeVar("K")


class Semiring(Generic[K]):
    name = ""
    zero: Any
    one: Any

    def add(self, a: K, b: K) -> K:
        raise NotImplementedError

    def mul(self, a: K, b: K) -> K:
        raise NotImplementedError

    def is_zero(self, a: K) -> bool:
        return a == self.zero

    def show(self, a: K) -> str:
        return str(a)

    def to_json(self, a: K) -> Any:
        return a

    def from_json(self, obj: Any) -> K:
        return obj

    def sample(self, rng: random.Random) -> K:
        raise NotImplementedError

    def total(self, xs: Iterable[K]) -> K:
        acc = self.zero
        for x in xs:
            acc = self.add(acc, x)
        return acc


class NatSR(Semiring[int]):
    name = "nat"
    zero = 0
    one = 1

    def add(self, a: int, b: int) -> int:
        return a + b

    def mul(self, a: int, b: int) -> int:
        return a * b

    def from_json(self, obj: Any) -> int:
        if not isinstance(obj, int) or isinstance(obj, bool) or obj < 0:
            raise ValueError(f"not a natural number: {obj!r}")
        return obj

    def sample(self, rng: random.Random) -> int:
        return rng.choice([0, 1, 1, 2, 3, rng.randint(0, 50)])


class BoolSR(Semiring[bool]):
    name = "bool"
    zero = False
    one = True

    def add(self, a: bool, b: bool) -> bool:
        return a or b

    def mul(self, a: bool, b: bool) -> bool:
        return a and b

    def show(self, a: bool) -> str:
        return "true" if a else "false"

    def from_json(self, obj: Any) -> bool:
        if not isinstance(obj, bool):
            raise ValueError(f"not a boolean: {obj!r}")
        return obj

    def sample(self, rng: random.Random) -> bool:
        return rng.random() < 0.5


Monomial = tuple[str, ...]


@dataclass(frozen=True)
class Poly:
    """Canonical polynomial: sorted (monomial, positive coefficient) pairs, monomials sorted multisets."""

    terms: tuple[tuple[Monomial, int], ...] = ()

    @staticmethod
    def of(pairs: Iterable[tuple[Iterable[str], int]] | Mapping[Monomial, int]) -> Poly:
        acc: dict[Monomial, int] = {}
        items = pairs.items() if isinstance(pairs, Mapping) else pairs
        for mono, c in items:
            key = tuple(sorted(mono))
            acc[key] = acc.get(key, 0) + c
        return Poly(tuple(sorted((m, c) for m, c in acc.items() if c != 0)))

    @staticmethod
    def var(x: str) -> Poly:
        return Poly((((x,), 1),))

    @staticmethod
    def const(c: int) -> Poly:
        return Poly.of([((), c)])

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for mono, c in self.terms:
            if not mono:
                parts.append(str(c))
                continue
            body = "*".join(mono)
            parts.append(body if c == 1 else f"{c}*{body}")
        return " + ".join(parts)


class PolySR(Semiring[Poly]):
    name = "poly"
    zero = Poly()
    one = Poly.const(1)

    def add(self, a: Poly, b: Poly) -> Poly:
        return Poly.of(list(a.terms) + list(b.terms))

    def mul(self, a: Poly, b: Poly) -> Poly:
        return Poly.of([(m1 + m2, c1 * c2) for m1, c1 in a.terms for m2, c2 in b.terms])

    def to_json(self, a: Poly) -> Any:
        return [[list(m), c] for m, c in a.terms]

    def from_json(self, obj: Any) -> Poly:
        if isinstance(obj, str):
            return parse_poly(obj)
        if not isinstance(obj, list):
            raise ValueError(f"not a polynomial: {obj!r}")
        return Poly.of((tuple(m), int(c)) for m, c in obj)

    def sample(self, rng: random.Random) -> Poly:
        xs = ["X", "Y", "Z"]
        n = rng.randint(0, 3)
        return Poly.of(
            (tuple(rng.choice(xs) for _ in range(rng.randint(0, 2))), rng.randint(1, 3)) for _ in range(n)
        )


def parse_poly(text: str) -> Poly:
    """Parse 'R1*S3 + 2*X + 1'."""
    text = text.strip()
    if text in ("", "0"):
        return Poly()
    pairs = []
    for term in text.split("+"):
        c, mono = 1, []
        for f in term.strip().split("*"):
            f = f.strip()
            if not f:
                raise ValueError(f"bad polynomial {text!r}")
            if f.isdigit():
                c *= int(f)
            else:
                mono.append(f)
        pairs.append((mono, c))
    return Poly.of(pairs)


SEMIRINGS: dict[str, Semiring] = {"nat": NatSR(), "bool": BoolSR(), "poly": PolySR()}


# K-collections: dicts from labels to non-zero annotations.

KColl = dict


def kzero() -> KColl:
    return {}


def eta(sr: Semiring, l: str) -> KColl:
    return {l: sr.one}


def knorm(sr: Semiring, f: Mapping[str, Any]) -> KColl:
    return {l: k for l, k in f.items() if not sr.is_zero(k)}


def kadd(sr: Semiring, f: Mapping[str, Any], g: Mapping[str, Any]) -> KColl:
    out = dict(f)
    for l, k in g.items():
        out[l] = sr.add(out[l], k) if l in out else k
    return knorm(sr, out)


def kscale(sr: Semiring, k: Any, f: Mapping[str, Any]) -> KColl:
    return knorm(sr, {l: sr.mul(k, v) for l, v in f.items()})


def bind(sr: Semiring, f: Mapping[str, Any], g: Mapping[str, Mapping[str, Any]]) -> KColl:
    """(f . g)(y) = sum over x of f(x) * g(x)(y)."""
    out: KColl = {}
    for x, k in f.items():
        out = kadd(sr, out, kscale(sr, k, g[x]))
    return out


def kcoll_str(sr: Semiring, f: Mapping[str, Any]) -> str:
    return "[" + ", ".join(f"{l}:{sr.show(k)}" for l, k in sorted(f.items())) + "]"
