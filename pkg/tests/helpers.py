from __future__ import annotations

from pathlib import Path

from nrctrace.fixtures import EXAMPLES, rs_store
from nrctrace.trace import traced_eval
from nrctrace.tracefmt import parse_trace

GOLDEN = Path(__file__).parent / "golden"


def golden_text(name: str) -> str:
    return (GOLDEN / name).read_text()


def golden_trace(name: str):
    return parse_trace(golden_text(name))


def run_example(name: str):
    """(sigma, core, final store, trace) for one of the R/S examples."""
    sigma = rs_store()
    ex = EXAMPLES[name]
    e = ex.compile(sigma)
    st, T = traced_eval(sigma, ex.dest, e)
    return sigma, e, st, T


# criterion number -> "PASS ..." / "FAIL ..." line, printed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def record(n: int, ok: bool, text: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {text}"
    ACCEPTANCE[n] = line
    print(line)
