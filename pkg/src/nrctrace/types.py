"""NRC types."""

from __future__ import annotations

from dataclasses import dataclass


class Type:
    pass


@dataclass(frozen=True)
class IntTy(Type):
    def __str__(self) -> str:
        return "int"


@dataclass(frozen=True)
class BoolTy(Type):
    def __str__(self) -> str:
        return "bool"


@dataclass(frozen=True)
class RecTy(Type):
    fields: tuple[tuple[str, Type], ...]

    def __post_init__(self) -> None:
        names = [n for n, _ in self.fields]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate record field in {names}")

    def field(self, name: str) -> Type | None:
        for n, t in self.fields:
            if n == name:
                return t
        return None

    def __str__(self) -> str:
        return "(" + ", ".join(f"{n}: {t}" for n, t in self.fields) + ")"


@dataclass(frozen=True)
class CollTy(Type):
    elem: Type

    def __str__(self) -> str:
        return "{" + str(self.elem) + "}"


@dataclass(frozen=True)
class AnyTy(Type):
    """Element type of an unannotated empty collection; unifies with anything."""

    def __str__(self) -> str:
        return "?"


INT = IntTy()
BOOL = BoolTy()
ANY = AnyTy()


def pair(t1: Type, t2: Type) -> RecTy:
    return RecTy((("1", t1), ("2", t2)))


class TypeMismatch(Exception):
    pass


def join(t1: Type, t2: Type) -> Type:
    """Most specific type compatible with both, treating ANY as a wildcard."""
    if isinstance(t1, AnyTy):
        return t2
    if isinstance(t2, AnyTy):
        return t1
    if isinstance(t1, CollTy) and isinstance(t2, CollTy):
        return CollTy(join(t1.elem, t2.elem))
    if isinstance(t1, RecTy) and isinstance(t2, RecTy):
        if [n for n, _ in t1.fields] != [n for n, _ in t2.fields]:
            raise TypeMismatch(f"{t1} vs {t2}")
        return RecTy(tuple((n, join(a, b)) for (n, a), (_, b) in zip(t1.fields, t2.fields)))
    if t1 == t2:
        return t1
    raise TypeMismatch(f"{t1} vs {t2}")


def compatible(t1: Type, t2: Type) -> bool:
    try:
        join(t1, t2)
    except TypeMismatch:
        return False
    return True


def is_concrete(t: Type) -> bool:
    if isinstance(t, AnyTy):
        return False
    if isinstance(t, CollTy):
        return is_concrete(t.elem)
    if isinstance(t, RecTy):
        return all(is_concrete(f) for _, f in t.fields)
    return True


def type_to_json(t: Type) -> object:
    if isinstance(t, IntTy):
        return "int"
    if isinstance(t, BoolTy):
        return "bool"
    if isinstance(t, AnyTy):
        return "?"
    if isinstance(t, CollTy):
        return {"coll": type_to_json(t.elem)}
    if isinstance(t, RecTy):
        return {"record": [[n, type_to_json(f)] for n, f in t.fields]}
    raise TypeError(t)


def type_from_json(obj: object) -> Type:
    if obj == "int":
        return INT
    if obj == "bool":
        return BOOL
    if obj == "?":
        return ANY
    if isinstance(obj, dict) and "coll" in obj:
        return CollTy(type_from_json(obj["coll"]))
    if isinstance(obj, dict) and "record" in obj:
        fields = obj["record"]
        if isinstance(fields, dict):
            fields = list(fields.items())
        return RecTy(tuple((str(n), type_from_json(f)) for n, f in fields))
    raise ValueError(f"bad type encoding: {obj!r}")
