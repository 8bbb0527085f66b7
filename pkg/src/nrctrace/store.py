"""Labeled stores: constructors, label multisets, terms, store typing and readback."""

from __future__ import annotations

import csv
import itertools
import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field

from .types import ANY, BOOL, INT, CollTy, RecTy, Type, TypeMismatch, join
from .values import VBool, VInt, VRecord, Value, bag

Label = str


class StoreError(Exception):
    pass


class DomainOverlap(StoreError):
    pass


class NotAnExtension(StoreError):
    pass


class OverlappingExtensions(StoreError):
    pass


class UnboundLabel(StoreError):
    pass


class KindMismatch(StoreError):
    pass


class StoreFormatError(StoreError):
    pass


class Rebind(StoreError):
    """A label was written twice during write-once evaluation."""


# Label multisets


@dataclass(frozen=True)
class LabelMultiset:
    items: tuple[tuple[Label, int], ...] = ()

    def __post_init__(self) -> None:
        for _, m in self.items:
            if m < 1:
                raise ValueError("multiplicities must be positive")

    @staticmethod
    def of(pairs: Iterable[tuple[Label, int]] | Mapping[Label, int]) -> LabelMultiset:
        if isinstance(pairs, Mapping):
            pairs = pairs.items()
        acc: dict[Label, int] = {}
        for l, m in pairs:
            acc[l] = acc.get(l, 0) + m
        return LabelMultiset(tuple(sorted((l, m) for l, m in acc.items() if m > 0)))

    def __iter__(self) -> Iterator[tuple[Label, int]]:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, l: object) -> bool:
        return any(x == l for x, _ in self.items)

    def get(self, l: Label) -> int:
        for x, m in self.items:
            if x == l:
                return m
        return 0

    def labels(self) -> list[Label]:
        return [l for l, _ in self.items]

    def __str__(self) -> str:
        return "{" + ", ".join(l if m == 1 else f"{l}:{m}" for l, m in self.items) + "}"


EMPTY_MS = LabelMultiset()


def multiset_union(a: LabelMultiset, b: LabelMultiset) -> LabelMultiset:
    return LabelMultiset.of(list(a.items) + list(b.items))


def disjoint_union(a: LabelMultiset, b: LabelMultiset) -> LabelMultiset:
    overlap = set(a.labels()) & set(b.labels())
    if overlap:
        raise DomainOverlap(f"labels in both operands: {sorted(overlap)}")
    return LabelMultiset.of(list(a.items) + list(b.items))


def scale_ms(m: int, a: LabelMultiset) -> LabelMultiset:
    return LabelMultiset.of((l, m * k) for l, k in a.items)


# Constructors


class Constructor:
    pass


@dataclass(frozen=True)
class IntC(Constructor):
    n: int

    def __str__(self) -> str:
        return str(self.n)


@dataclass(frozen=True)
class BoolC(Constructor):
    b: bool

    def __str__(self) -> str:
        return "true" if self.b else "false"


@dataclass(frozen=True)
class RecordC(Constructor):
    fields: tuple[tuple[str, Label], ...]

    def get(self, name: str) -> Label:
        for n, l in self.fields:
            if n == name:
                return l
        raise KindMismatch(f"record has no field {name}")

    def __str__(self) -> str:
        return "(" + ",".join(f"{n}:{l}" for n, l in self.fields) + ")"


@dataclass(frozen=True)
class CollC(Constructor):
    elems: LabelMultiset

    def __str__(self) -> str:
        return str(self.elems)


def labels_of(k: Constructor) -> list[Label]:
    if isinstance(k, RecordC):
        return [l for _, l in k.fields]
    if isinstance(k, CollC):
        return k.elems.labels()
    return []


# Atoms and terms. Atoms are variables or labels; after substitution only labels remain.


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Lab:
    name: Label

    def __str__(self) -> str:
        return self.name


Atom = Var | Lab


class Term:
    def atoms(self) -> tuple[Atom, ...]:
        return ()

    def map_atoms(self, f) -> Term:
        return self


@dataclass(frozen=True)
class IntT(Term):
    n: int


@dataclass(frozen=True)
class BoolT(Term):
    b: bool


@dataclass(frozen=True)
class EmptyT(Term):
    elem: Type | None = field(default=None, compare=False)


@dataclass(frozen=True)
class _Unary(Term):
    a: Atom

    def atoms(self) -> tuple[Atom, ...]:
        return (self.a,)

    def map_atoms(self, f) -> Term:
        return type(self)(f(self.a))


@dataclass(frozen=True)
class _Binary(Term):
    a: Atom
    b: Atom

    def atoms(self) -> tuple[Atom, ...]:
        return (self.a, self.b)

    def map_atoms(self, f) -> Term:
        return type(self)(f(self.a), f(self.b))


class Copy(_Unary):
    pass


class Not(_Unary):
    pass


class Single(_Unary):
    pass


class IsEmpty(_Unary):
    pass


class Plus(_Binary):
    pass


class Eq(_Binary):
    pass


class And(_Binary):
    pass


class Union(_Binary):
    pass


@dataclass(frozen=True)
class RecordT(Term):
    fields: tuple[tuple[str, Atom], ...]

    def atoms(self) -> tuple[Atom, ...]:
        return tuple(a for _, a in self.fields)

    def map_atoms(self, f) -> Term:
        return RecordT(tuple((n, f(a)) for n, a in self.fields))


def term_labels(t: Term) -> list[Label]:
    out = []
    for a in t.atoms():
        if not isinstance(a, Lab):
            raise KindMismatch(f"unsubstituted variable {a} in term")
        out.append(a.name)
    return out


# Fresh labels


class FreshSupply:
    """Deterministic "%<n>" labels that avoid the current store and an avoid-set."""

    def __init__(self, start: int = 1, prefix: str = "%", avoid: Iterable[Label] = ()) -> None:
        self.counter = start
        self.prefix = prefix
        self.avoid = set(avoid)

    def fresh(self, store: Mapping[Label, Constructor]) -> Label:
        while True:
            l = f"{self.prefix}{self.counter}"
            self.counter += 1
            if l not in store and l not in self.avoid:
                return l


# Store operations

Store = Mapping[Label, Constructor]


def lookup(sigma: Store, l: Label) -> Constructor:
    try:
        return sigma[l]
    except KeyError:
        raise UnboundLabel(l) from None


def _int(sigma: Store, l: Label) -> int:
    k = lookup(sigma, l)
    if not isinstance(k, IntC):
        raise KindMismatch(f"{l} is not an integer")
    return k.n


def _bool(sigma: Store, l: Label) -> bool:
    k = lookup(sigma, l)
    if not isinstance(k, BoolC):
        raise KindMismatch(f"{l} is not a boolean")
    return k.b


def _coll(sigma: Store, l: Label) -> LabelMultiset:
    k = lookup(sigma, l)
    if not isinstance(k, CollC):
        raise KindMismatch(f"{l} is not a collection")
    return k.elems


def _lab(a: Atom) -> Label:
    if not isinstance(a, Lab):
        raise KindMismatch(f"unsubstituted variable {a}")
    return a.name


def op_eval(t: Term, sigma: Store) -> Constructor:
    if isinstance(t, Copy):
        return lookup(sigma, _lab(t.a))
    if isinstance(t, IntT):
        return IntC(t.n)
    if isinstance(t, BoolT):
        return BoolC(t.b)
    if isinstance(t, Plus):
        return IntC(_int(sigma, _lab(t.a)) + _int(sigma, _lab(t.b)))
    if isinstance(t, Eq):
        return BoolC(_int(sigma, _lab(t.a)) == _int(sigma, _lab(t.b)))
    if isinstance(t, And):
        return BoolC(_bool(sigma, _lab(t.a)) and _bool(sigma, _lab(t.b)))
    if isinstance(t, Not):
        return BoolC(not _bool(sigma, _lab(t.a)))
    if isinstance(t, RecordT):
        return RecordC(tuple((n, _lab(a)) for n, a in t.fields))
    if isinstance(t, EmptyT):
        return CollC(EMPTY_MS)
    if isinstance(t, Single):
        return CollC(LabelMultiset(((_lab(t.a), 1),)))
    if isinstance(t, Union):
        return CollC(multiset_union(_coll(sigma, _lab(t.a)), _coll(sigma, _lab(t.b))))
    if isinstance(t, IsEmpty):
        return BoolC(len(_coll(sigma, _lab(t.a))) == 0)
    raise TypeError(f"unknown term {t!r}")


def flatten(sigma: Store, L: LabelMultiset) -> LabelMultiset:
    acc: list[tuple[Label, int]] = []
    for l, m in L:
        acc.extend((x, m * k) for x, k in _coll(sigma, l))
    return LabelMultiset.of(acc)


def sum_ints(sigma: Store, L: LabelMultiset) -> int:
    return sum(_int(sigma, l) * m for l, m in L)


def orthogonal_merge(sigma1: Store, sigma2: Store, base: Store) -> dict[Label, Constructor]:
    for s in (sigma1, sigma2):
        for l, k in base.items():
            if s.get(l) != k:
                raise NotAnExtension(f"label {l} differs from the base store")
    ext1 = {l: k for l, k in sigma1.items() if l not in base}
    ext2 = {l: k for l, k in sigma2.items() if l not in base}
    overlap = set(ext1) & set(ext2)
    if overlap:
        raise OverlappingExtensions(f"both extensions bind {sorted(overlap)}")
    return {**base, **ext1, **ext2}


# Store typing


def _topo_order(sigma: Store) -> list[Label]:
    order: list[Label] = []
    state: dict[Label, int] = {}
    for root in sorted(sigma):
        if root in state:
            continue
        stack = [(root, iter(labels_of(sigma[root])))]
        state[root] = 1
        while stack:
            l, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                state[l] = 2
                order.append(l)
                continue
            if nxt not in sigma:
                raise StoreFormatError(f"{l} refers to unbound label {nxt}")
            s = state.get(nxt, 0)
            if s == 1:
                raise StoreFormatError(f"cycle through {nxt}")
            if s == 0:
                state[nxt] = 1
                stack.append((nxt, iter(labels_of(sigma[nxt]))))
    return order


def constructor_type(psi: Mapping[Label, Type], k: Constructor) -> Type:
    if isinstance(k, IntC):
        return INT
    if isinstance(k, BoolC):
        return BOOL
    if isinstance(k, RecordC):
        return RecTy(tuple((n, psi[l]) for n, l in k.fields))
    if isinstance(k, CollC):
        t: Type = ANY
        for l in k.elems.labels():
            t = join(t, psi[l])
        return CollTy(t)
    raise TypeError(k)


def check_store(psi: Mapping[Label, Type], sigma: Store) -> str | None:
    """Return None when the store has type psi, else a diagnostic."""
    if set(psi) != set(sigma):
        missing = sorted(set(sigma) ^ set(psi))
        return f"store and store type disagree on labels {missing[:5]}"
    try:
        order = _topo_order(sigma)
    except StoreFormatError as exc:
        return str(exc)
    for l in order:
        try:
            t = constructor_type(psi, sigma[l])
            join(t, psi[l])
        except (TypeMismatch, KeyError) as exc:
            return f"label {l}: constructor {sigma[l]} does not have type {psi[l]} ({exc})"
    return None


def store_typecheck(psi: Mapping[Label, Type], sigma: Store) -> bool:
    return check_store(psi, sigma) is None


def infer_store_type(sigma: Store, hints: Mapping[Label, Type] | None = None) -> dict[Label, Type]:
    """Type every label bottom-up; empty collections get element type ANY unless hinted."""
    hints = hints or {}
    psi: dict[Label, Type] = {}
    for l in _topo_order(sigma):
        try:
            t = constructor_type(psi, sigma[l])
            if l in hints:
                t = join(t, hints[l])
        except TypeMismatch as exc:
            raise StoreFormatError(f"label {l} is ill-typed: {exc}") from None
        psi[l] = t
    return psi


# Readback


def readback(sigma: Store, tau: Type | None, l: Label) -> Value:
    """sigma-up-arrow: the label-free value stored at l."""
    k = lookup(sigma, l)
    if isinstance(k, IntC):
        if tau is not None and tau not in (INT, ANY):
            raise KindMismatch(f"{l} holds an int, expected {tau}")
        return VInt(k.n)
    if isinstance(k, BoolC):
        if tau is not None and tau not in (BOOL, ANY):
            raise KindMismatch(f"{l} holds a bool, expected {tau}")
        return VBool(k.b)
    if isinstance(k, RecordC):
        if tau is not None and not isinstance(tau, (RecTy, type(ANY))):
            raise KindMismatch(f"{l} holds a record, expected {tau}")
        out = []
        for n, x in k.fields:
            sub = tau.field(n) if isinstance(tau, RecTy) else None
            if isinstance(tau, RecTy) and sub is None:
                raise KindMismatch(f"{l} has unexpected field {n}")
            out.append((n, readback(sigma, sub, x)))
        return VRecord(tuple(out))
    if isinstance(k, CollC):
        if tau is not None and not isinstance(tau, (CollTy, type(ANY))):
            raise KindMismatch(f"{l} holds a collection, expected {tau}")
        sub = tau.elem if isinstance(tau, CollTy) else None
        return bag((readback(sigma, sub, x), m) for x, m in k.elems)
    raise TypeError(k)


# JSON and CSV formats


def constructor_to_json(k: Constructor) -> dict:
    if isinstance(k, IntC):
        return {"int": k.n}
    if isinstance(k, BoolC):
        return {"bool": k.b}
    if isinstance(k, RecordC):
        return {"record": {n: l for n, l in k.fields}}
    if isinstance(k, CollC):
        return {"coll": {l: m for l, m in k.elems}}
    raise TypeError(k)


def constructor_from_json(obj: object) -> Constructor:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise StoreFormatError(f"bad constructor {obj!r}")
    (kind, body), = obj.items()
    if kind == "int" and isinstance(body, int) and not isinstance(body, bool):
        return IntC(body)
    if kind == "bool" and isinstance(body, bool):
        return BoolC(body)
    if kind == "record" and isinstance(body, dict):
        if not all(isinstance(v, str) for v in body.values()):
            raise StoreFormatError(f"record fields must be labels: {body!r}")
        return RecordC(tuple(body.items()))
    if kind == "coll" and isinstance(body, dict):
        for m in body.values():
            if not isinstance(m, int) or isinstance(m, bool) or m < 1:
                raise StoreFormatError(f"bad multiplicity {m!r}")
        return CollC(LabelMultiset.of(body))
    raise StoreFormatError(f"bad constructor {obj!r}")


LABEL_NAME = re.compile(r"[A-Za-z_%][A-Za-z0-9_'%]*")


def store_to_json(sigma: Store, root: Label | None = None) -> dict:
    return {"root": root, "labels": {l: constructor_to_json(sigma[l]) for l in sorted(sigma)}}


def store_from_json(obj: object) -> tuple[dict[Label, Constructor], Label | None]:
    if not isinstance(obj, dict) or not isinstance(obj.get("labels"), dict):
        raise StoreFormatError("store JSON needs a 'labels' object")
    sigma = {str(l): constructor_from_json(k) for l, k in obj["labels"].items()}
    for l, k in sigma.items():
        for name in [l, *labels_of(k)]:
            if not LABEL_NAME.fullmatch(name):
                raise StoreFormatError(f"bad label name {name!r}")
    root = obj.get("root")
    if root is not None and root not in sigma:
        raise StoreFormatError(f"root {root} is not bound")
    _topo_order(sigma)
    return sigma, root


def _cell(text: str) -> Constructor:
    s = text.strip()
    if s.lower() in ("true", "false"):
        return BoolC(s.lower() == "true")
    try:
        return IntC(int(s))
    except ValueError:
        raise StoreFormatError(f"cell {text!r} is neither an integer nor a boolean") from None


def table_labels(name: str, rows: list[list[str]], header: list[str]) -> dict[Label, Constructor]:
    """Labels NAME, NAME<i>, NAME<i><j>; an underscore separates indices past 9."""
    wide = len(rows) > 9 or len(header) > 9
    out: dict[Label, Constructor] = {}
    elems = []
    for i, row in enumerate(rows, 1):
        if len(row) != len(header):
            raise StoreFormatError(f"row {i} has {len(row)} cells, header has {len(header)}")
        rl = f"{name}{i}"
        fields = []
        for j, (col, cell) in enumerate(zip(header, row), 1):
            fl = f"{name}{i}_{j}" if wide else f"{name}{i}{j}"
            out[fl] = _cell(cell)
            fields.append((col.strip(), fl))
        out[rl] = RecordC(tuple(fields))
        elems.append((rl, 1))
    out[name] = CollC(LabelMultiset.of(elems))
    return out


def load_table(name: str, path: str) -> dict[Label, Constructor]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise StoreFormatError(f"{path} is empty")
        rows = [r for r in reader if r]
    return table_labels(name, rows, header)


def reachable(sigma: Store, roots: Iterable[Label]) -> set[Label]:
    seen: set[Label] = set()
    todo = list(roots)
    while todo:
        l = todo.pop()
        if l in seen:
            continue
        seen.add(l)
        todo.extend(labels_of(lookup(sigma, l)))
    return seen


def counter_labels() -> Iterator[int]:
    return itertools.count(1)
