"""Label-free values: integers, booleans, records and bags."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass


class Value:
    pass


@dataclass(frozen=True)
class VInt(Value):
    n: int

    def __str__(self) -> str:
        return str(self.n)


@dataclass(frozen=True)
class VBool(Value):
    b: bool

    def __str__(self) -> str:
        return "true" if self.b else "false"


@dataclass(frozen=True)
class VRecord(Value):
    fields: tuple[tuple[str, Value], ...]

    def get(self, name: str) -> Value:
        for n, v in self.fields:
            if n == name:
                return v
        raise KeyError(name)

    def __str__(self) -> str:
        return "(" + ",".join(f"{n}:{v}" for n, v in self.fields) + ")"


@dataclass(frozen=True)
class VBag(Value):
    """Finite multiset; items kept sorted so structural equality is bag equality."""

    items: tuple[tuple[Value, int], ...]

    def __str__(self) -> str:
        return "{" + ", ".join(f"{v}:{m}" for v, m in self.items) + "}"

    def __iter__(self):
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)


def sort_key(v: Value) -> tuple:
    if isinstance(v, VInt):
        return (0, v.n)
    if isinstance(v, VBool):
        return (1, v.b)
    if isinstance(v, VRecord):
        return (2, tuple((n, sort_key(f)) for n, f in v.fields))
    if isinstance(v, VBag):
        return (3, tuple((sort_key(x), m) for x, m in v.items))
    raise TypeError(v)


def bag(pairs: Iterable[tuple[Value, int]]) -> VBag:
    counts: Counter = Counter()
    for v, m in pairs:
        if m < 0:
            raise ValueError("negative multiplicity")
        counts[v] += m
    items = [(v, m) for v, m in counts.items() if m > 0]
    items.sort(key=lambda p: sort_key(p[0]))
    return VBag(tuple(items))


EMPTY_BAG = VBag(())


def bag_union(a: VBag, b: VBag) -> VBag:
    return bag(list(a.items) + list(b.items))


def scale(m: int, b: VBag) -> VBag:
    return bag((v, m * k) for v, k in b.items)


def value_to_json(v: Value) -> object:
    if isinstance(v, VInt):
        return v.n
    if isinstance(v, VBool):
        return v.b
    if isinstance(v, VRecord):
        return {"record": {n: value_to_json(f) for n, f in v.fields}}
    if isinstance(v, VBag):
        return {"bag": [[value_to_json(x), m] for x, m in v.items]}
    raise TypeError(v)


def value_from_json(obj: object) -> Value:
    if isinstance(obj, bool):
        return VBool(obj)
    if isinstance(obj, int):
        return VInt(obj)
    if isinstance(obj, dict) and "record" in obj:
        return VRecord(tuple((n, value_from_json(f)) for n, f in obj["record"].items()))
    if isinstance(obj, dict) and "bag" in obj:
        return bag((value_from_json(x), int(m)) for x, m in obj["bag"])
    raise ValueError(f"bad value encoding: {obj!r}")
