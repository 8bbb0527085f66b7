"""A-normal core expressions, A-normalization and typechecking."""

from __future__ import annotations

from collections.abc import Callable, Iterator, Mapping
from dataclasses import dataclass

from . import syntax as S
from .store import (
    And,
    Atom,
    BoolT,
    Copy,
    EmptyT,
    Eq,
    IntT,
    IsEmpty,
    Lab,
    Not,
    Plus,
    RecordT,
    Single,
    Term,
    Union,
    Var,
)
from .types import ANY, BOOL, INT, AnyTy, CollTy, RecTy, Type, TypeMismatch, join


class CoreExpr:
    pass


@dataclass(frozen=True)
class TermE(CoreExpr):
    t: Term


@dataclass(frozen=True)
class Let(CoreExpr):
    x: str
    e1: CoreExpr
    e2: CoreExpr


@dataclass(frozen=True)
class If(CoreExpr):
    w: Atom
    t: CoreExpr
    f: CoreExpr


@dataclass(frozen=True)
class Proj(CoreExpr):
    field: str
    w: Atom


@dataclass(frozen=True)
class Comp(CoreExpr):
    x: str
    w: Atom
    body: CoreExpr


@dataclass(frozen=True)
class Sum(CoreExpr):
    x: str
    w: Atom
    body: CoreExpr


# Substitution and free names


def subst(e: CoreExpr, x: str, a: Atom) -> CoreExpr:
    """e[a/x]; binders shadow."""

    def f(w: Atom) -> Atom:
        return a if isinstance(w, Var) and w.name == x else w

    if isinstance(e, TermE):
        return TermE(e.t.map_atoms(f))
    if isinstance(e, Let):
        e2 = e.e2 if e.x == x else subst(e.e2, x, a)
        return Let(e.x, subst(e.e1, x, a), e2)
    if isinstance(e, If):
        return If(f(e.w), subst(e.t, x, a), subst(e.f, x, a))
    if isinstance(e, Proj):
        return Proj(e.field, f(e.w))
    if isinstance(e, (Comp, Sum)):
        body = e.body if e.x == x else subst(e.body, x, a)
        return type(e)(e.x, f(e.w), body)
    raise TypeError(e)


def atoms_of(e: CoreExpr) -> Iterator[tuple[Atom, frozenset[str]]]:
    """Every atom occurrence with the set of variables bound around it."""

    def go(e: CoreExpr, bound: frozenset[str]):
        if isinstance(e, TermE):
            for a in e.t.atoms():
                yield a, bound
        elif isinstance(e, Let):
            yield from go(e.e1, bound)
            yield from go(e.e2, bound | {e.x})
        elif isinstance(e, If):
            yield e.w, bound
            yield from go(e.t, bound)
            yield from go(e.f, bound)
        elif isinstance(e, Proj):
            yield e.w, bound
        elif isinstance(e, (Comp, Sum)):
            yield e.w, bound
            yield from go(e.body, bound | {e.x})
        else:
            raise TypeError(e)

    return go(e, frozenset())


def free_vars(e: CoreExpr) -> set[str]:
    return {a.name for a, b in atoms_of(e) if isinstance(a, Var) and a.name not in b}


def free_labels(e: CoreExpr) -> set[str]:
    return {a.name for a, _ in atoms_of(e) if isinstance(a, Lab)}


def rename_labels(e: CoreExpr, f: Callable[[str], str]) -> CoreExpr:
    def g(w: Atom) -> Atom:
        return Lab(f(w.name)) if isinstance(w, Lab) else w

    if isinstance(e, TermE):
        return TermE(e.t.map_atoms(g))
    if isinstance(e, Let):
        return Let(e.x, rename_labels(e.e1, f), rename_labels(e.e2, f))
    if isinstance(e, If):
        return If(g(e.w), rename_labels(e.t, f), rename_labels(e.f, f))
    if isinstance(e, Proj):
        return Proj(e.field, g(e.w))
    if isinstance(e, (Comp, Sum)):
        return type(e)(e.x, g(e.w), rename_labels(e.body, f))
    raise TypeError(e)


# Conversion to and from surface syntax


def _atom_s(a: Atom) -> S.Expr:
    return S.SVar(a.name) if isinstance(a, Var) else S.SLabel(a.name)


def term_to_surface(t: Term) -> S.Expr:
    if isinstance(t, Copy):
        return _atom_s(t.a)
    if isinstance(t, IntT):
        return S.SInt(t.n)
    if isinstance(t, BoolT):
        return S.SBool(t.b)
    if isinstance(t, Plus):
        return S.SPlus(_atom_s(t.a), _atom_s(t.b))
    if isinstance(t, Eq):
        return S.SEq(_atom_s(t.a), _atom_s(t.b))
    if isinstance(t, And):
        return S.SAnd(_atom_s(t.a), _atom_s(t.b))
    if isinstance(t, Union):
        return S.SUnion(_atom_s(t.a), _atom_s(t.b))
    if isinstance(t, Not):
        return S.SNot(_atom_s(t.a))
    if isinstance(t, Single):
        return S.SSingle(_atom_s(t.a))
    if isinstance(t, IsEmpty):
        return S.SIsEmpty(_atom_s(t.a))
    if isinstance(t, RecordT):
        return S.SRecord(tuple((n, _atom_s(a)) for n, a in t.fields))
    if isinstance(t, EmptyT):
        return S.SEmpty(None if t.elem is None or isinstance(t.elem, AnyTy) else CollTy(t.elem))
    raise TypeError(t)


def to_surface(e: CoreExpr) -> S.Expr:
    if isinstance(e, TermE):
        return term_to_surface(e.t)
    if isinstance(e, Let):
        return S.SLet(e.x, to_surface(e.e1), to_surface(e.e2))
    if isinstance(e, If):
        return S.SIf(_atom_s(e.w), to_surface(e.t), to_surface(e.f))
    if isinstance(e, Proj):
        return S.SProj(_atom_s(e.w), e.field)
    if isinstance(e, Comp):
        return S.SFor(e.x, _atom_s(e.w), to_surface(e.body))
    if isinstance(e, Sum):
        return S.SSum(e.x, _atom_s(e.w), to_surface(e.body))
    raise TypeError(e)


def pretty(e: CoreExpr, bound: frozenset[str] = frozenset()) -> str:
    return S.pretty(to_surface(e), frozenset(bound))


class NotANormal(Exception):
    pass


def _atom_c(e: S.Expr) -> Atom:
    if isinstance(e, S.SVar):
        return Var(e.name)
    if isinstance(e, S.SLabel):
        return Lab(e.name)
    raise NotANormal(f"expected a variable or label, got {S.pretty(e)}")


def to_core(e: S.Expr) -> CoreExpr:
    """Read a surface expression that is already in A-normal form, without renaming."""
    if isinstance(e, (S.SVar, S.SLabel)):
        return TermE(Copy(_atom_c(e)))
    if isinstance(e, S.SInt):
        return TermE(IntT(e.n))
    if isinstance(e, S.SBool):
        return TermE(BoolT(e.b))
    if isinstance(e, S.SEmpty):
        return TermE(EmptyT(e.ty.elem if e.ty else None))
    if isinstance(e, S.SPlus):
        return TermE(Plus(_atom_c(e.a), _atom_c(e.b)))
    if isinstance(e, S.SEq):
        return TermE(Eq(_atom_c(e.a), _atom_c(e.b)))
    if isinstance(e, S.SAnd):
        return TermE(And(_atom_c(e.a), _atom_c(e.b)))
    if isinstance(e, S.SUnion):
        return TermE(Union(_atom_c(e.a), _atom_c(e.b)))
    if isinstance(e, S.SNot):
        return TermE(Not(_atom_c(e.e)))
    if isinstance(e, S.SSingle):
        return TermE(Single(_atom_c(e.e)))
    if isinstance(e, S.SIsEmpty):
        return TermE(IsEmpty(_atom_c(e.e)))
    if isinstance(e, S.SRecord):
        return TermE(RecordT(tuple((n, _atom_c(x)) for n, x in e.fields)))
    if isinstance(e, S.SLet):
        return Let(e.x, to_core(e.e1), to_core(e.e2))
    if isinstance(e, S.SIf):
        return If(_atom_c(e.c), to_core(e.t), to_core(e.f))
    if isinstance(e, S.SProj):
        return Proj(e.field, _atom_c(e.e))
    if isinstance(e, S.SFor):
        return Comp(e.x, _atom_c(e.src), to_core(e.body))
    if isinstance(e, S.SSum):
        return Sum(e.x, _atom_c(e.src), to_core(e.body))
    raise NotANormal(f"not A-normal: {S.pretty(e)}")


def parse_core(text: str, free_as_labels: bool = True, bound: frozenset[str] = frozenset()) -> CoreExpr:
    e = S.parse(text)
    if free_as_labels:
        e = S.resolve(e, labels=lambda _: True, scope=frozenset(bound))
    return to_core(e)


# A-normalization

Bindings = list[tuple[str, CoreExpr]]


class _Names:
    def __init__(self, used: set[str], reserved: set[str]) -> None:
        self.used = set(used)
        self.reserved = reserved
        self.n = 0

    def temp(self) -> str:
        while True:
            self.n += 1
            name = f"t{self.n}"
            if name not in self.used and name not in self.reserved:
                self.used.add(name)
                return name

    def binder(self, x: str) -> str:
        if x not in self.used:
            self.used.add(x)
            return x
        k = 1
        while f"{x}{k}" in self.used:
            k += 1
        self.used.add(f"{x}{k}")
        return f"{x}{k}"


def build(bs: Bindings, tail: CoreExpr) -> CoreExpr:
    for x, rhs in reversed(bs):
        tail = Let(x, rhs, tail)
    return tail


def anormalize(e: S.Expr) -> CoreExpr:
    """A-normal form with let-flattening and loop-invariant bindings floated out of loop bodies.

    Every binder is renamed apart so later floating cannot capture.
    """
    e = S.desugar(e)
    # binders keep their names unless already taken; temporaries avoid every program name
    names = _Names(S.free_vars(e), S.all_names(e))

    def norm(e: S.Expr, env: Mapping[str, str]) -> tuple[Bindings, CoreExpr]:
        if isinstance(e, S.SVar):
            return [], TermE(Copy(Var(env.get(e.name, e.name))))
        if isinstance(e, S.SLabel):
            return [], TermE(Copy(Lab(e.name)))
        if isinstance(e, S.SInt):
            return [], TermE(IntT(e.n))
        if isinstance(e, S.SBool):
            return [], TermE(BoolT(e.b))
        if isinstance(e, S.SEmpty):
            return [], TermE(EmptyT(e.ty.elem if e.ty else None))
        if isinstance(e, (S.SPlus, S.SEq, S.SAnd, S.SUnion)):
            bs1, w1 = atom(e.a, env)
            bs2, w2 = atom(e.b, env)
            ctor = {S.SPlus: Plus, S.SEq: Eq, S.SAnd: And, S.SUnion: Union}[type(e)]
            return bs1 + bs2, TermE(ctor(w1, w2))
        if isinstance(e, (S.SNot, S.SSingle, S.SIsEmpty)):
            bs, w = atom(e.e, env)
            ctor = {S.SNot: Not, S.SSingle: Single, S.SIsEmpty: IsEmpty}[type(e)]
            return bs, TermE(ctor(w))
        if isinstance(e, S.SRecord):
            bs: Bindings = []
            fields = []
            for n, sub in e.fields:
                b, w = atom(sub, env)
                bs += b
                fields.append((n, w))
            return bs, TermE(RecordT(tuple(fields)))
        if isinstance(e, S.SProj):
            bs, w = atom(e.e, env)
            return bs, Proj(e.field, w)
        if isinstance(e, S.SLet):
            bs1, t1 = norm(e.e1, env)
            x = names.binder(e.x)
            bs2, t2 = norm(e.e2, {**env, e.x: x})
            return bs1 + [(x, t1)] + bs2, t2
        if isinstance(e, S.SIf):
            bs, w = atom(e.c, env)
            return bs, If(w, build(*norm(e.t, env)), build(*norm(e.f, env)))
        if isinstance(e, (S.SFor, S.SSum)):
            bs, w = atom(e.src, env)
            x = names.binder(e.x)
            body_bs, body_tail = norm(e.body, {**env, e.x: x})
            floated: Bindings = []
            kept: Bindings = []
            blocked = {x}
            for v, rhs in body_bs:
                if free_vars(rhs) & blocked:
                    kept.append((v, rhs))
                    blocked.add(v)
                else:
                    floated.append((v, rhs))
            ctor = Comp if isinstance(e, S.SFor) else Sum
            return bs + floated, ctor(x, w, build(kept, body_tail))
        raise TypeError(f"cannot normalize {e!r}")

    def atom(e: S.Expr, env: Mapping[str, str]) -> tuple[Bindings, Atom]:
        bs, tail = norm(e, env)
        if isinstance(tail, TermE) and isinstance(tail.t, Copy):
            return bs, tail.t.a
        t = names.temp()
        return bs + [(t, tail)], Var(t)

    return build(*norm(e, {}))


# Typechecking


class TypeError_(Exception):
    """Ill-typed core expression."""


def _atom_type(a: Atom, psi: Mapping[str, Type], gamma: Mapping[str, Type]) -> Type:
    if isinstance(a, Var):
        if a.name not in gamma:
            raise TypeError_(f"unbound variable {a.name}")
        return gamma[a.name]
    if a.name not in psi:
        raise TypeError_(f"unbound label {a.name}")
    return psi[a.name]


def _expect(t: Type, want: Type, what: str) -> Type:
    try:
        return join(t, want)
    except TypeMismatch:
        raise TypeError_(f"{what}: expected {want}, found {t}") from None


def _coll_elem(t: Type, what: str) -> Type:
    if isinstance(t, AnyTy):
        return ANY
    if not isinstance(t, CollTy):
        raise TypeError_(f"{what}: expected a collection, found {t}")
    return t.elem


def term_type(t: Term, psi: Mapping[str, Type], gamma: Mapping[str, Type]) -> Type:
    ty = lambda a: _atom_type(a, psi, gamma)  # noqa: E731
    if isinstance(t, Copy):
        return ty(t.a)
    if isinstance(t, IntT):
        return INT
    if isinstance(t, BoolT):
        return BOOL
    if isinstance(t, Plus):
        _expect(ty(t.a), INT, "left operand of +")
        _expect(ty(t.b), INT, "right operand of +")
        return INT
    if isinstance(t, Eq):
        _expect(ty(t.a), INT, "left operand of ==")
        _expect(ty(t.b), INT, "right operand of ==")
        return BOOL
    if isinstance(t, And):
        _expect(ty(t.a), BOOL, "left operand of &&")
        _expect(ty(t.b), BOOL, "right operand of &&")
        return BOOL
    if isinstance(t, Not):
        _expect(ty(t.a), BOOL, "operand of !")
        return BOOL
    if isinstance(t, RecordT):
        return RecTy(tuple((n, ty(a)) for n, a in t.fields))
    if isinstance(t, EmptyT):
        return CollTy(t.elem if t.elem is not None else ANY)
    if isinstance(t, Single):
        return CollTy(ty(t.a))
    if isinstance(t, Union):
        a, b = ty(t.a), ty(t.b)
        _coll_elem(a, "left operand of union")
        _coll_elem(b, "right operand of union")
        try:
            return join(join(a, b), CollTy(ANY))
        except TypeMismatch:
            raise TypeError_(f"union of {a} and {b}") from None
    if isinstance(t, IsEmpty):
        _coll_elem(ty(t.a), "operand of empty")
        return BOOL
    raise TypeError(t)


def typecheck(psi: Mapping[str, Type], e: CoreExpr, gamma: Mapping[str, Type] | None = None) -> Type:
    """Omega |- e : tau; ANY marks an unconstrained empty-collection element."""
    gamma = dict(gamma or {})
    if isinstance(e, TermE):
        return term_type(e.t, psi, gamma)
    if isinstance(e, Let):
        t1 = typecheck(psi, e.e1, gamma)
        return typecheck(psi, e.e2, {**gamma, e.x: t1})
    if isinstance(e, If):
        _expect(_atom_type(e.w, psi, gamma), BOOL, "condition")
        tt = typecheck(psi, e.t, gamma)
        tf = typecheck(psi, e.f, gamma)
        try:
            return join(tt, tf)
        except TypeMismatch:
            raise TypeError_(f"branches disagree: {tt} vs {tf}") from None
    if isinstance(e, Proj):
        t = _atom_type(e.w, psi, gamma)
        if isinstance(t, AnyTy):
            raise TypeError_(f"cannot project {e.field}: annotate the empty collection's element type")
        if not isinstance(t, RecTy):
            raise TypeError_(f"projection .{e.field} from non-record {t}")
        ft = t.field(e.field)
        if ft is None:
            raise TypeError_(f"record {t} has no field {e.field}")
        return ft
    if isinstance(e, (Comp, Sum)):
        elem = _coll_elem(_atom_type(e.w, psi, gamma), "iteration source")
        body = typecheck(psi, e.body, {**gamma, e.x: elem})
        if isinstance(e, Sum):
            _expect(body, INT, "sum body")
            return INT
        _coll_elem(body, "comprehension body")
        return join(body, CollTy(ANY))
    raise TypeError(e)


def compile_query(
    text: str,
    sigma: Mapping[str, object] | None = None,
    root: str | None = None,
    binds: Mapping[str, str] | None = None,
) -> CoreExpr:
    """Parse, resolve free names against the store and its root record, then A-normalize."""
    root_fields: dict[str, str] = {}
    if sigma is not None and root is not None:
        rec = sigma.get(root)
        for name, l in getattr(rec, "fields", ()):
            root_fields[name] = l
    known = (lambda n: n in sigma) if sigma is not None else None
    surface = S.resolve(S.parse(text), binds=binds, root_fields=root_fields, labels=known)
    return anormalize(surface)
