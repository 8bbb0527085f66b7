"""Traces, traced evaluation, consistency, trace typing and alpha-equivalence."""

from __future__ import annotations

from collections import ChainMap
from collections.abc import Iterator, Mapping, MutableMapping
from dataclasses import dataclass, field

from .core import Comp, CoreExpr, If, Let, Proj, Sum, TermE, TypeError_, atoms_of, subst, term_type, typecheck
from .store import (
    BoolC,
    CollC,
    Constructor,
    FreshSupply,
    IntC,
    KindMismatch,
    Lab,
    LabelMultiset,
    OverlappingExtensions,
    RecordC,
    Rebind,
    Store,
    StoreError,
    Term,
    flatten,
    lookup,
    op_eval,
    sum_ints,
    term_labels,
)
from .types import ANY, BOOL, INT, AnyTy, CollTy, RecTy, Type, TypeMismatch, join


class Trace:
    pass


@dataclass(frozen=True)
class Assign(Trace):
    l: str
    t: Term


@dataclass(frozen=True)
class ProjT(Trace):
    l: str
    field: str
    rec: str
    fl: str


@dataclass(frozen=True)
class Seq(Trace):
    t1: Trace
    t2: Trace


@dataclass(frozen=True)
class Cond(Trace):
    l: str
    test: str
    b: bool
    body: Trace
    et: CoreExpr | None = None
    ef: CoreExpr | None = None


@dataclass(frozen=True)
class Entry:
    label: str
    trace: Trace
    m: int = 1


@dataclass(frozen=True)
class CompT(Trace):
    l: str
    src: str
    theta: tuple[Entry, ...]
    x: str | None = None
    body: CoreExpr | None = None


@dataclass(frozen=True)
class SumT(Trace):
    l: str
    src: str
    theta: tuple[Entry, ...]
    x: str | None = None
    body: CoreExpr | None = None


Loop = (CompT, SumT)


def make_theta(entries) -> tuple[Entry, ...]:
    entries = sorted(entries, key=lambda en: en.label)
    for a, b in zip(entries, entries[1:]):
        if a.label == b.label:
            raise ValueError(f"duplicate input label {a.label} in trace set")
    return tuple(entries)


def out(T: Trace) -> str:
    if isinstance(T, Seq):
        return out(T.t2)
    return T.l


def in_star(theta) -> LabelMultiset:
    return LabelMultiset.of((en.label, en.m) for en in theta)


def out_star(theta) -> LabelMultiset:
    return LabelMultiset.of((out(en.trace), en.m) for en in theta)


def written_labels(T: Trace) -> set[str]:
    if isinstance(T, Seq):
        return written_labels(T.t1) | written_labels(T.t2)
    if isinstance(T, Cond):
        return {T.l} | written_labels(T.body)
    if isinstance(T, Loop):
        acc = {T.l}
        for en in T.theta:
            acc |= written_labels(en.trace)
        return acc
    return {T.l}


def seq(parts: list[Trace]) -> Trace:
    t = parts[-1]
    for p in reversed(parts[:-1]):
        t = Seq(p, t)
    return t


def flatten_seq(T: Trace) -> list[Trace]:
    if isinstance(T, Seq):
        return flatten_seq(T.t1) + flatten_seq(T.t2)
    return [T]


def subtraces(T: Trace) -> Iterator[Trace]:
    """All non-Seq nodes, pre-order."""
    if isinstance(T, Seq):
        yield from subtraces(T.t1)
        yield from subtraces(T.t2)
        return
    yield T
    if isinstance(T, Cond):
        yield from subtraces(T.body)
    elif isinstance(T, Loop):
        for en in T.theta:
            yield from subtraces(en.trace)


# Traced evaluation


def _lab(w) -> str:
    if not isinstance(w, Lab):
        raise KindMismatch(f"free variable {w} at evaluation time")
    return w.name


class Tracer:
    """Traced evaluator; write_once=False lets adaptation overwrite stale labels."""

    def __init__(self, fresh: FreshSupply, write_once: bool = True) -> None:
        self.fresh = fresh
        self.write_once = write_once

    def write(self, st: MutableMapping[str, Constructor], l: str, k: Constructor) -> None:
        if self.write_once and l in st:
            raise Rebind(f"label {l} is already bound")
        st[l] = k

    def eval(self, st: MutableMapping[str, Constructor], l: str, e: CoreExpr) -> Trace:
        if isinstance(e, TermE):
            self.write(st, l, op_eval(e.t, st))
            return Assign(l, e.t)
        if isinstance(e, Let):
            l1 = self.fresh.fresh(st)
            t1 = self.eval(st, l1, e.e1)
            t2 = self.eval(st, l, subst(e.e2, e.x, Lab(l1)))
            return Seq(t1, t2)
        if isinstance(e, If):
            test = _lab(e.w)
            k = lookup(st, test)
            if not isinstance(k, BoolC):
                raise KindMismatch(f"condition {test} is not a boolean")
            body = self.eval(st, l, e.t if k.b else e.f)
            return Cond(l, test, k.b, body, e.t, e.f)
        if isinstance(e, Proj):
            rec = _lab(e.w)
            k = lookup(st, rec)
            if not isinstance(k, RecordC):
                raise KindMismatch(f"{rec} is not a record")
            fl = k.get(e.field)
            self.write(st, l, lookup(st, fl))
            return ProjT(l, e.field, rec, fl)
        if isinstance(e, (Comp, Sum)):
            src = _lab(e.w)
            k = lookup(st, src)
            if not isinstance(k, CollC):
                raise KindMismatch(f"{src} is not a collection")
            jobs = [(li, m, None) for li, m in k.elems]
            L, theta = self.iterate(st, e.x, e.body, jobs)
            self.finish_loop(st, l, L, isinstance(e, Comp))
            ctor = CompT if isinstance(e, Comp) else SumT
            return ctor(l, src, theta, e.x, e.body)
        raise TypeError(e)

    def finish_loop(self, st, l: str, L: LabelMultiset, is_comp: bool) -> None:
        self.write(st, l, CollC(flatten(st, L)) if is_comp else IntC(sum_ints(st, L)))

    def element(self, layer, li: str, x: str, body: CoreExpr, cached: Trace | None) -> Trace:
        lo = self.fresh.fresh(layer)
        return self.eval(layer, lo, subst(body, x, Lab(li)))

    def iterate(self, st, x: str, body: CoreExpr, jobs) -> tuple[LabelMultiset, tuple[Entry, ...]]:
        """Run each element on its own extension of st, then merge the disjoint extensions."""
        outs: list[tuple[str, int]] = []
        entries: list[Entry] = []
        merged: dict[str, Constructor] = {}
        for li, m, cached in jobs:
            layer = ChainMap({}, st)
            T = self.element(layer, li, x, body, cached)
            delta = layer.maps[0]
            clash = merged.keys() & delta.keys()
            if clash:
                raise OverlappingExtensions(f"iterations both wrote {sorted(clash)}")
            merged.update(delta)
            outs.append((out(T), m))
            entries.append(Entry(li, T, m))
        for k, v in merged.items():
            self.write(st, k, v)
        return LabelMultiset.of(outs), make_theta(entries)


def traced_eval(
    sigma: Store, dest: str, e: CoreExpr, fresh: FreshSupply | None = None
) -> tuple[dict[str, Constructor], Trace]:
    """sigma, dest |- e => sigma', T."""
    st = dict(sigma)
    fresh = fresh or FreshSupply()
    fresh.avoid.add(dest)
    T = Tracer(fresh).eval(st, dest, e)
    return st, T


# Consistency


def consistency_violation(sigma: Store, T: Trace) -> str | None:
    """None when sigma |= T, otherwise a description of the first violated node."""
    try:
        return _violation(sigma, T)
    except StoreError as exc:
        return f"store error: {exc}"


def _violation(sigma: Store, T: Trace) -> str | None:
    if isinstance(T, Seq):
        return _violation(sigma, T.t1) or _violation(sigma, T.t2)
    if isinstance(T, Assign):
        if lookup(sigma, T.l) != op_eval(T.t, sigma):
            return f"{T.l} <- ...: stored {sigma[T.l]} differs from recomputed value"
        return None
    if isinstance(T, ProjT):
        rec = lookup(sigma, T.rec)
        if not isinstance(rec, RecordC) or rec.get(T.field) != T.fl:
            return f"{T.l}: {T.rec} does not hold field {T.field} at {T.fl}"
        if lookup(sigma, T.l) != lookup(sigma, T.fl):
            return f"{T.l}: differs from projected {T.fl}"
        return None
    if isinstance(T, Cond):
        if lookup(sigma, T.test) != BoolC(T.b):
            return f"cond at {T.l}: test {T.test} is not {T.b}"
        if out(T.body) != T.l:
            return f"cond at {T.l}: body writes {out(T.body)}"
        return _violation(sigma, T.body)
    if isinstance(T, Loop):
        if lookup(sigma, T.src) != CollC(in_star(T.theta)):
            return f"{T.l}: source {T.src} does not match the trace set inputs"
        for en in T.theta:
            bad = _violation(sigma, en.trace)
            if bad:
                return bad
        outs = out_star(T.theta)
        want = CollC(flatten(sigma, outs)) if isinstance(T, CompT) else IntC(sum_ints(sigma, outs))
        if lookup(sigma, T.l) != want:
            return f"{T.l}: stored {sigma[T.l]} differs from combined outputs {want}"
        return None
    raise TypeError(T)


def check_consistency(sigma: Store, T: Trace) -> bool:
    return consistency_violation(sigma, T) is None


# Trace typing


@dataclass(frozen=True)
class TraceType:
    psi: Mapping[str, Type] = field(compare=False)
    label: str
    ty: Type


class TraceTypeError(Exception):
    pass


def _need(psi: Mapping[str, Type], l: str, node: str) -> Type:
    if l not in psi:
        raise TraceTypeError(f"{node}: label {l} has no type")
    return psi[l]


def _fits(t: Type, want: Type, node: str) -> Type:
    try:
        return join(t, want)
    except TypeMismatch:
        raise TraceTypeError(f"{node}: expected {want}, found {t}") from None


def _check(psi: dict[str, Type], T: Trace) -> dict[str, Type]:
    if isinstance(T, Seq):
        return _check(_check(psi, T.t1), T.t2)
    if isinstance(T, Assign):
        try:
            ty = term_type(T.t, psi, {})
        except TypeError_ as exc:
            raise TraceTypeError(f"{T.l} <- term: {exc}") from None
        return {**psi, T.l: ty}
    if isinstance(T, ProjT):
        node = f"{T.l} <- proj_{T.field}"
        rt = _need(psi, T.rec, node)
        if not isinstance(rt, RecTy) or rt.field(T.field) is None:
            raise TraceTypeError(f"{node}: {T.rec} has type {rt}, no field {T.field}")
        ft = _fits(_need(psi, T.fl, node), rt.field(T.field), node)
        return {**psi, T.l: ft}
    if isinstance(T, Cond):
        node = f"cond at {T.l}"
        _fits(_need(psi, T.test, node), BOOL, node)
        psi2 = _check(psi, T.body)
        if out(T.body) != T.l:
            raise TraceTypeError(f"{node}: body writes {out(T.body)}")
        ty = psi2[T.l]
        for e in (T.et, T.ef):
            if e is not None:
                try:
                    ty = _fits(typecheck(psi, e), ty, node)
                except TypeError_ as exc:
                    raise TraceTypeError(f"{node}: branch: {exc}") from None
        return {**psi2, T.l: ty}
    if isinstance(T, Loop):
        node = f"{T.l} <- {'comp' if isinstance(T, CompT) else 'sum'}"
        st = _need(psi, T.src, node)
        if isinstance(st, AnyTy):
            elem: Type = ANY
        elif isinstance(st, CollTy):
            elem = st.elem
        else:
            raise TraceTypeError(f"{node}: source {T.src} has type {st}")
        res: Type = CollTy(ANY) if isinstance(T, CompT) else INT
        if T.body is not None:
            try:
                res = _fits(typecheck(psi, T.body, {T.x: elem}), res, node)
            except TypeError_ as exc:
                raise TraceTypeError(f"{node}: body: {exc}") from None
        acc = dict(psi)
        for en in T.theta:
            _fits(_need(psi, en.label, node), elem, node)
            psi_i = _check(psi, en.trace)
            res = _fits(psi_i[out(en.trace)], res, node)
            for k, v in psi_i.items():
                if k not in psi:
                    if k in acc:
                        raise TraceTypeError(f"{node}: iterations both write {k}")
                    acc[k] = v
        acc[T.l] = res
        return acc
    raise TypeError(T)


def trace_typecheck(psi: Mapping[str, Type], T: Trace) -> TraceType:
    """Psi |- T : l:tau."""
    psi2 = _check(dict(psi), T)
    l = out(T)
    return TraceType(psi2, l, psi2[l])


# Alpha-equivalence


class _Bij:
    def __init__(self, frontier: frozenset[str]) -> None:
        self.frontier = frontier
        self.fwd: dict[str, str] = {}
        self.bwd: dict[str, str] = {}

    def copy(self) -> _Bij:
        b = _Bij(self.frontier)
        b.fwd = dict(self.fwd)
        b.bwd = dict(self.bwd)
        return b

    def pair(self, a: str, b: str) -> bool:
        if a in self.frontier or b in self.frontier:
            return a == b
        if a in self.fwd:
            return self.fwd[a] == b
        if b in self.bwd:
            return False
        self.fwd[a] = b
        self.bwd[b] = a
        return True


def _term_eq(t1: Term, t2: Term, bij: _Bij) -> bool:
    if type(t1) is not type(t2):
        return False
    l1, l2 = term_labels(t1), term_labels(t2)
    if len(l1) != len(l2):
        return False
    # compare the label-free skeleton
    if t1.map_atoms(lambda _: Lab("")) != t2.map_atoms(lambda _: Lab("")):
        return False
    return all(bij.pair(a, b) for a, b in zip(l1, l2))


def _expr_eq(e1: CoreExpr | None, e2: CoreExpr | None, bij: _Bij) -> bool:
    if e1 is None or e2 is None:
        return True
    skel = lambda e: _blank(e)  # noqa: E731
    if skel(e1) != skel(e2):
        return False
    a1 = [a for a, _ in atoms_of(e1) if isinstance(a, Lab)]
    a2 = [a for a, _ in atoms_of(e2) if isinstance(a, Lab)]
    return len(a1) == len(a2) and all(bij.pair(a.name, b.name) for a, b in zip(a1, a2))


def _blank(e: CoreExpr) -> CoreExpr:
    from .core import rename_labels

    return rename_labels(e, lambda _: "")


def _alpha(T1: Trace, T2: Trace, bij: _Bij) -> bool:
    if type(T1) is not type(T2):
        return False
    if isinstance(T1, Seq):
        return _alpha(T1.t1, T2.t1, bij) and _alpha(T1.t2, T2.t2, bij)
    if isinstance(T1, Assign):
        return bij.pair(T1.l, T2.l) and _term_eq(T1.t, T2.t, bij)
    if isinstance(T1, ProjT):
        return (
            T1.field == T2.field
            and bij.pair(T1.l, T2.l)
            and bij.pair(T1.rec, T2.rec)
            and bij.pair(T1.fl, T2.fl)
        )
    if isinstance(T1, Cond):
        return (
            T1.b == T2.b
            and bij.pair(T1.l, T2.l)
            and bij.pair(T1.test, T2.test)
            and _alpha(T1.body, T2.body, bij)
            and _expr_eq(T1.et, T2.et, bij)
            and _expr_eq(T1.ef, T2.ef, bij)
        )
    if isinstance(T1, Loop):
        if not (bij.pair(T1.l, T2.l) and bij.pair(T1.src, T2.src)):
            return False
        if len(T1.theta) != len(T2.theta):
            return False
        if T1.x is not None and T2.x is not None and T1.x != T2.x:
            return False
        if not _expr_eq(T1.body, T2.body, bij):
            return False
        return _theta(list(T1.theta), list(T2.theta), bij)
    raise TypeError(T1)


def _theta(th1: list[Entry], th2: list[Entry], bij: _Bij) -> bool:
    if not th1:
        return True
    en, rest = th1[0], th1[1:]
    key = en.label if en.label in bij.frontier else bij.fwd.get(en.label)
    if key is not None:
        cands = [c for c in th2 if c.label == key]
    else:
        cands = [c for c in th2 if c.m == en.m and c.label not in bij.bwd and c.label not in bij.frontier]
    for c in cands:
        trial = bij.copy()
        if c.m == en.m and trial.pair(en.label, c.label) and _alpha(en.trace, c.trace, trial):
            remaining = list(th2)
            remaining.remove(c)
            if _theta(rest, remaining, trial):
                bij.fwd, bij.bwd = trial.fwd, trial.bwd
                return True
    return False


def trace_alpha_eq(T1: Trace, T2: Trace, frontier=frozenset()) -> bool:
    """True iff a bijection on non-frontier labels maps T1 onto T2.

    Expression annotations that are None on either side match anything.
    """
    return _alpha(T1, T2, _Bij(frozenset(frontier)))


def alpha_bijection(T1: Trace, T2: Trace, frontier=frozenset()) -> dict[str, str] | None:
    bij = _Bij(frozenset(frontier))
    return dict(bij.fwd) if _alpha(T1, T2, bij) else None
