"""Randomized property suites, shared by the test-suite and `nrctrace check`."""

from __future__ import annotations

import random
import time
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field

from .adapt import random_edit, run_fidelity_check
from .evaluate import denote, eval_core
from .gen import Case, random_case
from .provenance import (
    DepPolicy,
    WherePolicy,
    annotated_eval,
    dep_extract,
    identity_dep,
    identity_k,
    identity_where,
    k_eval,
    k_extract,
    where_extract,
)
from .semiring import SEMIRINGS, Semiring
from .slicing import backward_closure
from .store import readback
from .trace import consistency_violation, traced_eval

DEST = "out"


@dataclass
class SuiteResult:
    name: str
    total: int = 0
    failures: list[str] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> int:
        return self.total - len(self.failures)

    @property
    def ok(self) -> bool:
        return not self.failures and self.total > 0

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{status} {self.name}: {self.passed}/{self.total} in {self.seconds:.2f}s"


def cases(n: int, seed: int) -> Iterator[tuple[int, Case]]:
    for i in range(n):
        s = seed * 1_000_003 + i
        yield s, random_case(s)


def _suite(name: str, n: int, seed: int, check: Callable[[int, Case], str | None]) -> SuiteResult:
    res = SuiteResult(name)
    t0 = time.perf_counter()
    for s, case in cases(n, seed):
        res.total += 1
        try:
            bad = check(s, case)
        except Exception as exc:  # a crash is a failure of the property, reported with its seed
            bad = f"{type(exc).__name__}: {exc}"
        if bad:
            res.failures.append(f"seed {s}: {bad}")
    res.seconds = time.perf_counter() - t0
    return res


def consistency_suite(n: int = 500, seed: int = 0) -> SuiteResult:
    def check(s: int, c: Case) -> str | None:
        st, T = traced_eval(c.sigma, DEST, c.core)
        return consistency_violation(st, T)

    return _suite("consistency", n, seed, check)


def fidelity_suite(n: int = 500, seed: int = 0) -> SuiteResult:
    def check(s: int, c: Case) -> str | None:
        _, T = traced_eval(c.sigma, DEST, c.core)
        reads = backward_closure(T, {DEST}) & set(c.sigma)
        edit = random_edit(c.sigma, c.inputs, random.Random(s), prefer=reads)
        v = run_fidelity_check(c.core, c.sigma, [edit] if edit else [], DEST)
        return None if v.ok else v.reason

    return _suite("fidelity", n, seed, check)


def denotational_suite(n: int = 500, seed: int = 0) -> SuiteResult:
    def check(s: int, c: Case) -> str | None:
        labels = {l: readback(c.sigma, None, l) for l in c.sigma}
        want = denote(c.surface, {}, labels)
        got = readback(eval_core(c.sigma, DEST, c.core), None, DEST)
        return None if got == want else f"eval gave {got}, denotation {want}"

    return _suite("operational/denotational", n, seed, check)


def where_suite(n: int = 500, seed: int = 0) -> SuiteResult:
    def check(s: int, c: Case) -> str | None:
        h = identity_where(c.sigma)
        _, T = traced_eval(c.sigma, DEST, c.core)
        _, want = annotated_eval(WherePolicy(), c.sigma, h, DEST, c.core)
        return _diff(where_extract(h, T), want)

    return _suite("where extraction", n, seed, check)


def dep_suite(n: int = 500, seed: int = 0) -> SuiteResult:
    def check(s: int, c: Case) -> str | None:
        h = identity_dep(c.sigma)
        _, T = traced_eval(c.sigma, DEST, c.core)
        _, want = annotated_eval(DepPolicy(), c.sigma, h, DEST, c.core)
        return _diff(dep_extract(h, T), want)

    return _suite("dependency extraction", n, seed, check)


def k_suite(sr: Semiring, n: int = 500, seed: int = 0) -> SuiteResult:
    def check(s: int, c: Case) -> str | None:
        h = identity_k(sr, c.sigma)
        _, T = traced_eval(c.sigma, DEST, c.core)
        _, want = k_eval(sr, c.sigma, h, DEST, c.core)
        return _diff(k_extract(sr, h, T), want)

    return _suite(f"semiring extraction ({sr.name})", n, seed, check)


def _diff(got: dict, want: dict) -> str | None:
    if got == want:
        return None
    keys = sorted(set(got) | set(want))
    bad = [k for k in keys if got.get(k, "<missing>") != want.get(k, "<missing>")]
    k = bad[0]
    return f"{len(bad)} labels differ, first {k}: extracted {got.get(k)!r}, oracle {want.get(k)!r}"


LAWS: dict[str, Callable[[Semiring, object, object, object], bool]] = {
    "+ associative": lambda sr, a, b, c: sr.add(sr.add(a, b), c) == sr.add(a, sr.add(b, c)),
    "+ commutative": lambda sr, a, b, c: sr.add(a, b) == sr.add(b, a),
    "0 is the + identity": lambda sr, a, b, c: sr.add(a, sr.zero) == a,
    "* associative": lambda sr, a, b, c: sr.mul(sr.mul(a, b), c) == sr.mul(a, sr.mul(b, c)),
    "* commutative": lambda sr, a, b, c: sr.mul(a, b) == sr.mul(b, a),
    "1 is the * identity": lambda sr, a, b, c: sr.mul(a, sr.one) == a,
    "* distributes over +": lambda sr, a, b, c: sr.mul(a, sr.add(b, c)) == sr.add(sr.mul(a, b), sr.mul(a, c)),
    "0 annihilates": lambda sr, a, b, c: sr.mul(a, sr.zero) == sr.zero,
}


def semiring_law_suite(sr: Semiring, n: int = 1000, seed: int = 0) -> SuiteResult:
    res = SuiteResult(f"semiring laws ({sr.name})")
    rng = random.Random(seed)
    t0 = time.perf_counter()
    for _ in range(n):
        a, b, c = sr.sample(rng), sr.sample(rng), sr.sample(rng)
        res.total += 1
        broken = [name for name, law in LAWS.items() if not law(sr, a, b, c)]
        if broken:
            res.failures.append(f"{broken[0]} fails on {sr.show(a)}, {sr.show(b)}, {sr.show(c)}")
    res.seconds = time.perf_counter() - t0
    return res


def run_all(n: int = 500, seed: int = 0, laws: int = 1000) -> list[SuiteResult]:
    out = [
        consistency_suite(n, seed),
        fidelity_suite(n, seed),
        denotational_suite(n, seed),
        where_suite(n, seed),
        dep_suite(n, seed),
    ]
    out += [k_suite(sr, n, seed) for sr in SEMIRINGS.values()]
    out += [semiring_law_suite(sr, laws, seed) for sr in SEMIRINGS.values()]
    return out
