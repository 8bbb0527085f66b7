"""Provenance: annotated evaluators (the oracles) and extraction from traces.

Three kinds are supported. Where-provenance tracks an optional source token
through copies and projections. Dependency provenance tracks a set of tokens
that may influence each label. Semiring provenance annotates every collection
with a K-collection over its elements.

The evaluators run the program; the extractors only walk a trace and never
consult the store.
"""

from __future__ import annotations

from collections import ChainMap
from collections.abc import Callable, Mapping, MutableMapping
from dataclasses import dataclass
from typing import Any

from .core import Comp, CoreExpr, If, Let, Proj, Sum, TermE, subst
from .semiring import KColl, Semiring, bind, eta, kadd, kscale, kzero
from .store import (
    BoolC,
    CollC,
    Constructor,
    Copy,
    EmptyT,
    FreshSupply,
    IntC,
    KindMismatch,
    Lab,
    LabelMultiset,
    OverlappingExtensions,
    RecordC,
    Rebind,
    Single,
    Store,
    Term,
    Union,
    flatten,
    lookup,
    op_eval,
    sum_ints,
    term_labels,
)
from .trace import Assign, CompT, Cond, Loop, ProjT, Seq, Trace, out, subtraces
from .values import VBool, VInt, VRecord

Ann = Any
AnnMap = dict


class ProvenanceError(Exception):
    pass


# Auxiliary functions on terms


def where_fn(t: Term, h: Mapping[str, Ann]) -> str | None:
    if isinstance(t, Copy):
        return h.get(t.a.name)
    return None


def dep_fn(t: Term, h: Mapping[str, Ann]) -> frozenset[str]:
    acc: frozenset[str] = frozenset()
    for l in term_labels(t):
        acc |= h.get(l, frozenset())
    return acc


def semiring_fn(sr: Semiring, t: Term, h: Mapping[str, Ann]) -> KColl | None:
    if isinstance(t, Copy):
        return h.get(t.a.name)
    if isinstance(t, EmptyT):
        return kzero()
    if isinstance(t, Single):
        return eta(sr, t.a.name)
    if isinstance(t, Union):
        f, g = h.get(t.a.name), h.get(t.b.name)
        if f is None or g is None:
            raise ProvenanceError(f"union of unannotated collections {t.a.name}, {t.b.name}")
        return kadd(sr, f, g)
    return None


def _need_k(h: Mapping[str, Ann], l: str) -> KColl:
    k = h.get(l)
    if k is None:
        raise ProvenanceError(f"collection {l} has no K-annotation")
    return k


# Policies for the annotated evaluator


class Policy:
    kind = ""

    def term(self, t: Term, h: Mapping[str, Ann]) -> Ann:
        raise NotImplementedError

    def proj(self, h: Mapping[str, Ann], rec: str, fl: str) -> Ann:
        raise NotImplementedError

    def cond(self, h: MutableMapping[str, Ann], l: str, test: str) -> None:
        pass

    def loop(self, h: Mapping[str, Ann], src: str, elems: list[tuple[str, int, str]], is_comp: bool) -> Ann:
        raise NotImplementedError


class WherePolicy(Policy):
    kind = "where"

    def term(self, t, h):
        return where_fn(t, h)

    def proj(self, h, rec, fl):
        return h.get(fl)

    def loop(self, h, src, elems, is_comp):
        return None


class DepPolicy(Policy):
    kind = "dep"

    def term(self, t, h):
        return dep_fn(t, h)

    def proj(self, h, rec, fl):
        return h.get(rec, frozenset()) | h.get(fl, frozenset())

    def cond(self, h, l, test):
        h[l] = h.get(l, frozenset()) | h.get(test, frozenset())

    def loop(self, h, src, elems, is_comp):
        a: frozenset[str] = frozenset()
        for _, _, lo in elems:
            a |= h.get(lo, frozenset())
        return h.get(src, frozenset()) | a


class SemiringPolicy(Policy):
    kind = "semiring"

    def __init__(self, sr: Semiring) -> None:
        self.sr = sr

    def term(self, t, h):
        return semiring_fn(self.sr, t, h)

    def proj(self, h, rec, fl):
        return h.get(fl)

    def loop(self, h, src, elems, is_comp):
        if not is_comp:
            return None
        k = _need_k(h, src)
        kp: KColl = kzero()
        for li, _, lo in elems:
            kp = kadd(self.sr, kp, kscale(self.sr, k.get(li, self.sr.zero), eta(self.sr, lo)))
        return bind(self.sr, kp, {lo: _need_k(h, lo) for _, _, lo in elems})


def _lab(w) -> str:
    if not isinstance(w, Lab):
        raise KindMismatch(f"free variable {w} at evaluation time")
    return w.name


class AnnotatedEvaluator:
    """sigma, h, l |- e => sigma', h'. Label allocation matches traced_eval."""

    def __init__(self, policy: Policy, fresh: FreshSupply) -> None:
        self.policy = policy
        self.fresh = fresh

    def _write(self, st, h, l: str, k: Constructor, a: Ann) -> None:
        if l in st:
            raise Rebind(f"label {l} is already bound")
        st[l] = k
        h[l] = a

    def eval(self, st: MutableMapping[str, Constructor], h: MutableMapping[str, Ann], l: str, e: CoreExpr) -> None:
        p = self.policy
        if isinstance(e, TermE):
            self._write(st, h, l, op_eval(e.t, st), p.term(e.t, h))
        elif isinstance(e, Let):
            l1 = self.fresh.fresh(st)
            self.eval(st, h, l1, e.e1)
            self.eval(st, h, l, subst(e.e2, e.x, Lab(l1)))
        elif isinstance(e, If):
            test = _lab(e.w)
            k = lookup(st, test)
            if not isinstance(k, BoolC):
                raise KindMismatch(f"condition {test} is not a boolean")
            self.eval(st, h, l, e.t if k.b else e.f)
            p.cond(h, l, test)
        elif isinstance(e, Proj):
            rec = _lab(e.w)
            k = lookup(st, rec)
            if not isinstance(k, RecordC):
                raise KindMismatch(f"{rec} is not a record")
            fl = k.get(e.field)
            self._write(st, h, l, lookup(st, fl), p.proj(h, rec, fl))
        elif isinstance(e, (Comp, Sum)):
            src = _lab(e.w)
            k = lookup(st, src)
            if not isinstance(k, CollC):
                raise KindMismatch(f"{src} is not a collection")
            elems: list[tuple[str, int, str]] = []
            merged_st: dict[str, Constructor] = {}
            merged_h: dict[str, Ann] = {}
            for li, m in k.elems:
                lo = self.fresh.fresh(st)
                lst, lh = ChainMap({}, st), ChainMap({}, h)
                self.eval(lst, lh, lo, subst(e.body, e.x, Lab(li)))
                dst, dh = lst.maps[0], lh.maps[0]
                if merged_st.keys() & dst.keys():
                    raise OverlappingExtensions(sorted(merged_st.keys() & dst.keys()))
                merged_st.update(dst)
                merged_h.update(dh)
                elems.append((li, m, lo))
            for k2, v in merged_st.items():
                if k2 in st:
                    raise Rebind(f"label {k2} is already bound")
                st[k2] = v
            h.update(merged_h)
            L = LabelMultiset.of((lo, m) for _, m, lo in elems)
            is_comp = isinstance(e, Comp)
            ctor = CollC(flatten(st, L)) if is_comp else IntC(sum_ints(st, L))
            self._write(st, h, l, ctor, p.loop(h, src, elems, is_comp))
        else:
            raise TypeError(e)


def annotated_eval(
    policy: Policy, sigma: Store, h: Mapping[str, Ann], dest: str, e: CoreExpr, fresh: FreshSupply | None = None
) -> tuple[dict[str, Constructor], AnnMap]:
    st, hh = dict(sigma), dict(h)
    fresh = fresh or FreshSupply()
    fresh.avoid.add(dest)
    AnnotatedEvaluator(policy, fresh).eval(st, hh, dest, e)
    return st, hh


def where_eval(sigma, h, dest, e, fresh=None):
    return annotated_eval(WherePolicy(), sigma, h, dest, e, fresh)


def dep_eval(sigma, h, dest, e, fresh=None):
    return annotated_eval(DepPolicy(), sigma, h, dest, e, fresh)


def k_eval(sr: Semiring, sigma, h, dest, e, fresh=None):
    return annotated_eval(SemiringPolicy(sr), sigma, h, dest, e, fresh)


# Extraction from traces


def _theta_merge(results: list[AnnMap], base: Mapping[str, Ann]) -> dict[str, Ann]:
    merged = dict(base)
    for r in results:
        for l, a in r.items():
            if l not in base:
                merged[l] = a
    return merged


def where_extract(h: Mapping[str, Ann], T: Trace) -> AnnMap:
    """h |- T ~> h' for where-provenance."""
    h = dict(h)
    _where(h, T)
    return h


def _where(h: dict, T: Trace) -> None:
    if isinstance(T, Assign):
        h[T.l] = where_fn(T.t, h)
    elif isinstance(T, ProjT):
        h[T.l] = h.get(T.fl)
    elif isinstance(T, Seq):
        _where(h, T.t1)
        _where(h, T.t2)
    elif isinstance(T, Cond):
        _where(h, T.body)
    elif isinstance(T, Loop):
        parts = []
        for en in T.theta:
            hi = dict(h)
            _where(hi, en.trace)
            parts.append(hi)
        h.update(_theta_merge(parts, h))
        h[T.l] = None
    else:
        raise TypeError(T)


def dep_extract(h: Mapping[str, Ann], T: Trace) -> AnnMap:
    """h |- T ~> h' for dependency provenance."""
    h = dict(h)
    _dep(h, T)
    return h


def _dep(h: dict, T: Trace) -> None:
    empty: frozenset[str] = frozenset()
    if isinstance(T, Assign):
        h[T.l] = dep_fn(T.t, h)
    elif isinstance(T, ProjT):
        h[T.l] = h.get(T.rec, empty) | h.get(T.fl, empty)
    elif isinstance(T, Seq):
        _dep(h, T.t1)
        _dep(h, T.t2)
    elif isinstance(T, Cond):
        _dep(h, T.body)
        h[T.l] = h.get(T.l, empty) | h.get(T.test, empty)
    elif isinstance(T, Loop):
        parts, a = [], empty
        for en in T.theta:
            hi = dict(h)
            _dep(hi, en.trace)
            a |= hi.get(out(en.trace), empty)
            parts.append(hi)
        h.update(_theta_merge(parts, h))
        h[T.l] = h.get(T.src, empty) | a
    else:
        raise TypeError(T)


def k_extract(sr: Semiring, h: Mapping[str, Ann], T: Trace) -> AnnMap:
    """h |- T ~> h' for semiring provenance; sums get no annotation."""
    h = dict(h)
    _k(sr, h, T)
    return h


def _k(sr: Semiring, h: dict, T: Trace) -> None:
    if isinstance(T, Assign):
        h[T.l] = semiring_fn(sr, T.t, h)
    elif isinstance(T, ProjT):
        h[T.l] = h.get(T.fl)
    elif isinstance(T, Seq):
        _k(sr, h, T.t1)
        _k(sr, h, T.t2)
    elif isinstance(T, Cond):
        _k(sr, h, T.body)
    elif isinstance(T, Loop):
        parts = []
        for en in T.theta:
            hi = dict(h)
            _k(sr, hi, en.trace)
            parts.append(hi)
        h.update(_theta_merge(parts, h))
        if isinstance(T, CompT):
            k = _need_k(h, T.src)
            kp: KColl = kzero()
            for en in T.theta:
                kp = kadd(sr, kp, kscale(sr, k.get(en.label, sr.zero), eta(sr, out(en.trace))))
            h[T.l] = bind(sr, kp, {out(en.trace): _need_k(h, out(en.trace)) for en in T.theta})
        else:
            h[T.l] = None
    else:
        raise TypeError(T)


# Initial annotations


def identity_where(sigma: Store) -> AnnMap:
    return {l: l for l in sigma}


def identity_dep(sigma: Store) -> AnnMap:
    return {l: frozenset({l}) for l in sigma}


def default_indeterminate(l: str) -> str:
    return l.upper()


def identity_k(sr: Semiring, sigma: Store, name: Callable[[str], str] = default_indeterminate) -> AnnMap:
    """Collections map each element to an indeterminate (Poly) or to 1 (other instances)."""
    from .semiring import Poly, PolySR

    h: AnnMap = {}
    for l, k in sigma.items():
        if isinstance(k, CollC):
            if isinstance(sr, PolySR):
                h[l] = {li: Poly.var(name(li)) for li, _ in k.elems}
            else:
                h[l] = {li: sr.one for li, _ in k.elems}
        else:
            h[l] = None
    return h


def identity_for(kind: str, sigma: Store, sr: Semiring | None = None) -> AnnMap:
    if kind == "where":
        return identity_where(sigma)
    if kind == "dep":
        return identity_dep(sigma)
    if kind == "semiring":
        if sr is None:
            raise ValueError("semiring annotations need an instance")
        return identity_k(sr, sigma)
    raise ValueError(f"unknown provenance kind {kind!r}")


def annotations_from_json(obj: Mapping[str, Any], sigma: Store, sr: Semiring | None = None) -> AnnMap:
    """Identity annotations overridden by the file's assignments."""
    kind = obj.get("kind")
    h = identity_for(kind, sigma, sr)
    for l, v in (obj.get("assignments") or {}).items():
        if l not in sigma:
            raise ProvenanceError(f"annotation for unknown label {l}")
        if kind == "where":
            h[l] = None if v is None else str(v)
        elif kind == "dep":
            h[l] = frozenset(str(x) for x in v)
        elif v is None:
            h[l] = None
        else:
            h[l] = {str(x): sr.from_json(k) for x, k in v.items() if not sr.is_zero(sr.from_json(k))}
    return h


def ann_to_json(kind: str, a: Ann, sr: Semiring | None = None) -> Any:
    if a is None:
        return None
    if kind == "dep":
        return sorted(a)
    if kind == "semiring":
        return {l: sr.to_json(k) for l, k in sorted(a.items())}
    return a


def ann_str(kind: str, a: Ann, sr: Semiring | None = None) -> str:
    if a is None:
        return "_|_"
    if kind == "dep":
        return "{" + ",".join(sorted(a)) + "}"
    if kind == "semiring":
        return "[" + ", ".join(f"{l}:{sr.show(k)}" for l, k in sorted(a.items())) + "]"
    return str(a)


# Copies and K-readback


def copy_edges(T: Trace) -> list[tuple[str, str]]:
    edges = []
    for node in subtraces(T):
        if isinstance(node, Assign) and isinstance(node.t, Copy):
            edges.append((node.t.a.name, node.l))
        elif isinstance(node, ProjT):
            edges.append((node.fl, node.l))
    return edges


def chain_of_copies(T: Trace, src: str, dst: str) -> bool:
    """A (possibly empty) chain of copies and projections carries src to dst."""
    succ: dict[str, list[str]] = {}
    for a, b in copy_edges(T):
        succ.setdefault(a, []).append(b)
    seen, todo = {src}, [src]
    while todo:
        x = todo.pop()
        if x == dst:
            return True
        for y in succ.get(x, ()):
            if y not in seen:
                seen.add(y)
                todo.append(y)
    return False


@dataclass(frozen=True)
class KBag:
    """A collection read back with K-annotations: distinct values paired with their summed annotation."""

    items: tuple[tuple[Any, Any], ...]

    def as_dict(self) -> dict:
        return dict(self.items)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{v}:{k}" for v, k in self.items) + "}"


def k_readback(sr: Semiring, sigma: Store, h: Mapping[str, Ann], l: str) -> Any:
    """sigma, h read back at l. Element multiplicities are ignored; equal values add their annotations."""
    k = lookup(sigma, l)
    if isinstance(k, IntC):
        return VInt(k.n)
    if isinstance(k, BoolC):
        return VBool(k.b)
    if isinstance(k, RecordC):
        return VRecord(tuple((n, k_readback(sr, sigma, h, fl)) for n, fl in k.fields))
    if isinstance(k, CollC):
        ann = _need_k(h, l)
        acc: dict[Any, Any] = {}
        for li, _ in k.elems:
            v = k_readback(sr, sigma, h, li)
            acc[v] = sr.add(acc[v], ann.get(li, sr.zero)) if v in acc else ann.get(li, sr.zero)
        items = [(v, a) for v, a in acc.items() if not sr.is_zero(a)]
        items.sort(key=lambda p: str(p[0]))
        return KBag(tuple(items))
    raise TypeError(k)
