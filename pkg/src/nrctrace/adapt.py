"""Trace adaptation (change propagation), edit scripts and the fidelity check."""

from __future__ import annotations

import random
from collections.abc import Iterable, Mapping, MutableMapping, Sequence
from dataclasses import dataclass, field

from .core import CoreExpr, subst
from .store import (
    BoolC,
    CollC,
    Constructor,
    FreshSupply,
    IntC,
    KindMismatch,
    Lab,
    LabelMultiset,
    RecordC,
    Store,
    StoreError,
    StoreFormatError,
    check_store,
    constructor_from_json,
    constructor_to_json,
    infer_store_type,
    lookup,
    op_eval,
    readback,
)
from .trace import (
    Assign,
    CompT,
    Cond,
    Loop,
    ProjT,
    Seq,
    Trace,
    Tracer,
    consistency_violation,
    out,
    trace_alpha_eq,
    traced_eval,
    written_labels,
)
from .tracefmt import trace_text
from .types import Type, TypeMismatch, join

Edit = tuple[str, Constructor]


class AdaptError(Exception):
    pass


class IllegalEdit(Exception):
    pass


def matches_avoiding(sigma: Store, psi: Mapping[str, Type], avoid: Iterable[str]) -> bool:
    """Some psi' extending psi types sigma, and no label of sigma lies in avoid."""
    if set(sigma) & set(avoid):
        return False
    if not set(psi) <= set(sigma):
        return False
    try:
        psi2 = infer_store_type(sigma, hints=psi)
    except StoreFormatError:
        return False
    return check_store(psi2, sigma) is None


class Adapter(Tracer):
    def __init__(self, fresh: FreshSupply) -> None:
        super().__init__(fresh, write_once=False)

    def adapt(self, st: MutableMapping[str, Constructor], T: Trace) -> Trace:
        if isinstance(T, Assign):
            self.write(st, T.l, op_eval(T.t, st))
            return T
        if isinstance(T, Seq):
            t1 = self.adapt(st, T.t1)
            return Seq(t1, self.adapt(st, T.t2))
        if isinstance(T, ProjT):
            rec = lookup(st, T.rec)
            if not isinstance(rec, RecordC):
                raise KindMismatch(f"{T.rec} is no longer a record")
            fl = rec.get(T.field)
            self.write(st, T.l, lookup(st, fl))
            return ProjT(T.l, T.field, T.rec, fl)
        if isinstance(T, Cond):
            k = lookup(st, T.test)
            if not isinstance(k, BoolC):
                raise KindMismatch(f"{T.test} is no longer a boolean")
            if k.b == T.b:
                body = self.adapt(st, T.body)
                if out(body) != T.l:
                    raise AdaptError(f"cond at {T.l}: adapted body writes {out(body)}")
                return Cond(T.l, T.test, T.b, body, T.et, T.ef)
            branch = T.et if k.b else T.ef
            if branch is None:
                raise AdaptError(f"cond at {T.l}: branch expression missing from trace")
            body = self.eval(st, T.l, branch)
            return Cond(T.l, T.test, k.b, body, T.et, T.ef)
        if isinstance(T, Loop):
            src = lookup(st, T.src)
            if not isinstance(src, CollC):
                raise KindMismatch(f"{T.src} is no longer a collection")
            cached = {en.label: en.trace for en in T.theta}
            jobs = [(li, m, cached.get(li)) for li, m in src.elems]
            if T.body is None and any(c is None for _, _, c in jobs):
                raise AdaptError(f"{T.l}: new elements but no body expression in trace")
            L, theta = self.iterate(st, T.x, T.body, jobs)
            self.finish_loop(st, T.l, L, isinstance(T, CompT))
            return type(T)(T.l, T.src, theta, T.x, T.body)
        raise TypeError(T)

    def element(self, layer, li: str, x: str, body: CoreExpr, cached: Trace | None) -> Trace:
        if cached is not None:
            return self.adapt(layer, cached)
        lo = self.fresh.fresh(layer)
        return self.eval(layer, lo, subst(body, x, Lab(li)))


def adapt(sigma: Store, T: Trace, fresh: FreshSupply | None = None) -> tuple[dict[str, Constructor], Trace]:
    """sigma, T ~> sigma', T'. Fresh labels avoid sigma and every label T writes."""
    st = dict(sigma)
    if fresh is None:
        fresh = FreshSupply()
    fresh.avoid |= set(sigma) | written_labels(T)
    T2 = Adapter(fresh).adapt(st, T)
    return st, T2


# Edits


def edits_from_json(obj: object) -> list[Edit]:
    if not isinstance(obj, list):
        raise StoreFormatError("edit script must be a JSON list")
    out_: list[Edit] = []
    for item in obj:
        if not isinstance(item, dict) or "label" not in item or "value" not in item:
            raise StoreFormatError(f"bad edit {item!r}")
        out_.append((str(item["label"]), constructor_from_json(item["value"])))
    return out_


def edits_to_json(edits: Sequence[Edit]) -> list:
    return [{"label": l, "value": constructor_to_json(k)} for l, k in edits]


def apply_edits(sigma: Store, edits: Sequence[Edit]) -> dict[str, Constructor]:
    st = dict(sigma)
    for l, k in edits:
        st[l] = k
    return st


def check_edits(sigma: Store, psi: Mapping[str, Type], T: Trace, edits: Sequence[Edit]) -> dict[str, Constructor]:
    """Apply edits, raising IllegalEdit unless the result matches psi avoiding Wr(T)."""
    wr = written_labels(T)
    for l, _ in edits:
        if l in wr:
            raise IllegalEdit(f"label {l} is written by the trace")
    sigma2 = apply_edits(sigma, edits)
    if set(sigma2) & wr:
        raise IllegalEdit("edited store overlaps the labels written by the trace")
    try:
        psi2 = infer_store_type(sigma2, hints=psi)
    except StoreFormatError as exc:
        raise IllegalEdit(f"edit breaks store typing: {exc}") from None
    bad = check_store(psi2, sigma2)
    if bad:
        raise IllegalEdit(f"edit breaks store typing: {bad}")
    return sigma2


def random_edit(
    sigma: Store,
    psi: Mapping[str, Type],
    rng: random.Random,
    protect: Iterable[str] = (),
    prefer: Iterable[str] = (),
) -> Edit | None:
    """One type-preserving whole-constructor replacement, or None if nothing is editable.

    Labels in `prefer` are tried first, in random order.
    """
    protect, prefer = set(protect), set(prefer)
    cands = sorted(l for l in sigma if l not in protect)
    rng.shuffle(cands)
    cands.sort(key=lambda l: l not in prefer)
    for l in cands:
        k = sigma[l]
        if isinstance(k, IntC):
            n = rng.randint(-3, 6)
            return l, IntC(n if n != k.n else n + 1)
        if isinstance(k, BoolC):
            return l, BoolC(not k.b)
        same_type = lambda t, not_=l: sorted(  # noqa: E731
            x for x in sigma if x != not_ and x not in protect and _same(psi.get(x), t) and not _reaches(sigma, x, not_)
        )
        if isinstance(k, RecordC) and k.fields:
            i = rng.randrange(len(k.fields))
            name, old = k.fields[i]
            others = [x for x in same_type(psi.get(old)) if x != old]
            if not others:
                continue
            fields = list(k.fields)
            fields[i] = (name, rng.choice(others))
            return l, RecordC(tuple(fields))
        if isinstance(k, CollC):
            t = psi.get(l)
            elem = getattr(t, "elem", None)
            choice = rng.randrange(3)
            items = dict(k.elems.items)
            if choice == 0 and items:
                x = rng.choice(sorted(items))
                items[x] += rng.choice([1, 2])
            elif choice == 1 and items:
                del items[rng.choice(sorted(items))]
            else:
                pool = [x for x in same_type(elem) if x not in items] if elem is not None else []
                if not pool:
                    if not items:
                        continue
                    x = rng.choice(sorted(items))
                    items[x] += 1
                else:
                    items[rng.choice(pool)] = rng.choice([1, 1, 2])
            return l, CollC(LabelMultiset.of(items))
    return None


def _same(a: Type | None, b: Type | None) -> bool:
    if a is None or b is None:
        return False
    try:
        join(a, b)
    except TypeMismatch:
        return False
    return True


def _reaches(sigma: Store, start: str, target: str) -> bool:
    from .store import reachable

    return target in reachable(sigma, [start])


# Fidelity


@dataclass
class Verdict:
    ok: bool
    reason: str = ""
    details: dict = field(default_factory=dict)

    def __str__(self) -> str:
        return "PASS" if self.ok else f"FAIL: {self.reason}"


def run_fidelity_check(
    e: CoreExpr, sigma1: Store, edits: Sequence[Edit], dest: str = "out", seed: int = 1
) -> Verdict:
    """Compare adapt(sigma2, T1) with traced_eval(sigma2, dest, e) after the edits."""
    sigma1_out, T1 = traced_eval(sigma1, dest, e, FreshSupply(start=seed))
    psi = infer_store_type(sigma1)
    try:
        sigma2 = check_edits(sigma1, psi, T1, edits)
    except IllegalEdit as exc:
        return Verdict(False, f"illegal edit: {exc}")
    return compare_adapted(e, sigma2, T1, dest, seed)


def compare_adapted(e: CoreExpr, sigma2: Store, T1: Trace, dest: str, seed: int = 1) -> Verdict:
    try:
        sa, Ta = adapt(sigma2, T1)
    except (AdaptError, StoreError) as exc:
        return Verdict(False, f"adaptation failed: {exc}")
    sb, Tb = traced_eval(sigma2, dest, e, FreshSupply(start=seed))
    details = {"adapted": trace_text(Ta), "scratch": trace_text(Tb)}
    va, vb = readback(sa, None, dest), readback(sb, None, dest)
    if va != vb:
        details.update(adapted_value=str(va), scratch_value=str(vb))
        return Verdict(False, "readback differs", details)
    bad = consistency_violation(sa, Ta)
    if bad:
        return Verdict(False, f"adapted trace inconsistent: {bad}", details)
    if not trace_alpha_eq(Ta, Tb, frozenset(sigma2) | {dest}):
        return Verdict(False, "traces are not alpha-equivalent", details)
    return Verdict(True, "", details)

