"""Reference evaluators: denotational semantics over values, and untraced store-passing evaluation."""

from __future__ import annotations

from collections import ChainMap
from collections.abc import Mapping, MutableMapping

from . import syntax as S
from .core import Comp, CoreExpr, If, Let, Proj, Sum, TermE, subst
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
    flatten,
    lookup,
    op_eval,
    sum_ints,
)
from .values import EMPTY_BAG, VBag, VBool, VInt, VRecord, Value, bag, bag_union


class DenoteError(Exception):
    pass


def denote(e: S.Expr, gamma: Mapping[str, Value], labels: Mapping[str, Value] | None = None) -> Value:
    """[[e]]gamma on plain values; free labels are looked up in `labels`."""
    labels = labels or {}

    def go(e: S.Expr, g: Mapping[str, Value]) -> Value:
        if isinstance(e, S.SVar):
            if e.name not in g:
                raise DenoteError(f"unbound variable {e.name}")
            return g[e.name]
        if isinstance(e, S.SLabel):
            if e.name not in labels:
                raise DenoteError(f"unbound label {e.name}")
            return labels[e.name]
        if isinstance(e, S.SInt):
            return VInt(e.n)
        if isinstance(e, S.SBool):
            return VBool(e.b)
        if isinstance(e, S.SLet):
            return go(e.e2, {**g, e.x: go(e.e1, g)})
        if isinstance(e, S.SRecord):
            return VRecord(tuple((n, go(f, g)) for n, f in e.fields))
        if isinstance(e, S.SProj):
            r = go(e.e, g)
            if not isinstance(r, VRecord):
                raise DenoteError(f"projection from {r}")
            return r.get(e.field)
        if isinstance(e, S.SNot):
            return VBool(not _b(go(e.e, g)))
        if isinstance(e, S.SAnd):
            return VBool(_b(go(e.a, g)) and _b(go(e.b, g)))
        if isinstance(e, S.SIf):
            return go(e.t, g) if _b(go(e.c, g)) else go(e.f, g)
        if isinstance(e, S.SEmpty):
            return EMPTY_BAG
        if isinstance(e, S.SSingle):
            return bag([(go(e.e, g), 1)])
        if isinstance(e, S.SUnion):
            return bag_union(_bag(go(e.a, g)), _bag(go(e.b, g)))
        if isinstance(e, S.SIsEmpty):
            return VBool(len(_bag(go(e.e, g))) == 0)
        if isinstance(e, S.SPlus):
            return VInt(_i(go(e.a, g)) + _i(go(e.b, g)))
        if isinstance(e, S.SEq):
            return VBool(_i(go(e.a, g)) == _i(go(e.b, g)))
        if isinstance(e, S.SFor):
            pairs = []
            for v, m in _bag(go(e.src, g)):
                for w, k in _bag(go(e.body, {**g, e.x: v})):
                    pairs.append((w, m * k))
            return bag(pairs)
        if isinstance(e, S.SSum):
            return VInt(sum(m * _i(go(e.body, {**g, e.x: v})) for v, m in _bag(go(e.src, g))))
        if isinstance(e, S.SCompr):
            return bag((go(e.body, {**g, e.x: v}), m) for v, m in _bag(go(e.src, g)))
        raise TypeError(e)

    return go(e, gamma)


def _b(v: Value) -> bool:
    if not isinstance(v, VBool):
        raise DenoteError(f"expected a boolean, got {v}")
    return v.b


def _i(v: Value) -> int:
    if not isinstance(v, VInt):
        raise DenoteError(f"expected an integer, got {v}")
    return v.n


def _bag(v: Value) -> VBag:
    if not isinstance(v, VBag):
        raise DenoteError(f"expected a collection, got {v}")
    return v


# Destination-passing evaluation


def _lab(w) -> str:
    if not isinstance(w, Lab):
        raise KindMismatch(f"free variable {w} at evaluation time")
    return w.name


def _write(st: MutableMapping[str, Constructor], l: str, k: Constructor) -> None:
    if l in st:
        raise Rebind(f"label {l} is already bound")
    st[l] = k


def _eval(st: MutableMapping[str, Constructor], l: str, e: CoreExpr, fresh: FreshSupply) -> None:
    if isinstance(e, TermE):
        _write(st, l, op_eval(e.t, st))
    elif isinstance(e, Let):
        l1 = fresh.fresh(st)
        _eval(st, l1, e.e1, fresh)
        _eval(st, l, subst(e.e2, e.x, Lab(l1)), fresh)
    elif isinstance(e, If):
        k = lookup(st, _lab(e.w))
        if not isinstance(k, BoolC):
            raise KindMismatch(f"condition {e.w} is not a boolean")
        _eval(st, l, e.t if k.b else e.f, fresh)
    elif isinstance(e, Proj):
        k = lookup(st, _lab(e.w))
        if not isinstance(k, RecordC):
            raise KindMismatch(f"{e.w} is not a record")
        _write(st, l, lookup(st, k.get(e.field)))
    elif isinstance(e, (Comp, Sum)):
        src = lookup(st, _lab(e.w))
        if not isinstance(src, CollC):
            raise KindMismatch(f"{e.w} is not a collection")
        outs: list[tuple[str, int]] = []
        merged: dict[str, Constructor] = {}
        for li, m in src.elems:
            lo = fresh.fresh(st)
            layer = ChainMap({}, st)
            _eval(layer, lo, subst(e.body, e.x, Lab(li)), fresh)
            delta = layer.maps[0]
            if merged.keys() & delta.keys():
                raise OverlappingExtensions(sorted(merged.keys() & delta.keys()))
            merged.update(delta)
            outs.append((lo, m))
        for k2, v in merged.items():
            _write(st, k2, v)
        L = LabelMultiset.of(outs)
        _write(st, l, CollC(flatten(st, L)) if isinstance(e, Comp) else IntC(sum_ints(st, L)))
    else:
        raise TypeError(e)


def eval_core(sigma: Store, dest: str, e: CoreExpr, fresh: FreshSupply | None = None) -> dict[str, Constructor]:
    """sigma, dest |- e => sigma'. The input store is not modified."""
    st = dict(sigma)
    fresh = fresh or FreshSupply(avoid=[dest])
    fresh.avoid.add(dest)
    _eval(st, dest, e, fresh)
    return st
