"""Small worked stores and queries used by tests, the CLI and the README."""

from __future__ import annotations

from dataclasses import dataclass

from .core import CoreExpr, compile_query
from .store import CollC, Constructor, IntC, LabelMultiset, RecordC, table_labels

R_ROWS = [[1, 2, 3], [1, 3, 3], [7, 42, 4]]
R_HEADER = ["A", "B", "C"]
S_ROWS = [[2, 3], [2, 4], [3, 7]]
S_HEADER = ["C", "D"]

JOIN = "for (r in R) for (s in S) if r.C == s.C then {{A: r.A, B: r.B, D: s.D}} else {}"
AGG = (
    "{{C: 42, D: sum (s in S) if s.C == 2 then s.D else 0}} "
    "union for (r in R) if r.C == 4 then {{C: r.B, D: r.A}} else {}"
)
REPROJECT = "{{A: x.A, D: x.D} | x in (" + JOIN + ")}"


def _rows(rows: list[list[int]]) -> list[list[str]]:
    return [[str(v) for v in r] for r in rows]


def rs_store() -> dict[str, Constructor]:
    """Tables R (labels r, r1.., r11..) and S under a root record db."""
    sigma: dict[str, Constructor] = {}
    sigma.update(table_labels("r", _rows(R_ROWS), R_HEADER))
    sigma.update(table_labels("s", _rows(S_ROWS), S_HEADER))
    sigma["db"] = RecordC((("R", "r"), ("S", "s")))
    return sigma


ROOT = "db"


@dataclass(frozen=True)
class Example:
    name: str
    query: str
    dest: str
    description: str

    def compile(self, sigma: dict[str, Constructor] | None = None) -> CoreExpr:
        return compile_query(self.query, sigma if sigma is not None else rs_store(), ROOT)


EXAMPLES = {
    "join": Example("join", JOIN, "l", "join R and S on C, keep A, B, D"),
    "agg": Example("agg", AGG, "l'", "a constant row with a conditional sum, plus a filtered R"),
    "reproject": Example("reproject", REPROJECT, "out", "project the join onto A and D"),
}


def cond_store() -> dict[str, Constructor]:
    return {"lx": IntC(5), "ly": IntC(42)}


COND_QUERY = "if x == 5 then y + 42 else x"
COND_BINDS = {"x": "lx", "y": "ly"}


def proj_store() -> dict[str, Constructor]:
    """A two-row table at l whose rows carry fields A and B."""
    return {
        "l11": IntC(1),
        "l12": IntC(2),
        "l21": IntC(2),
        "l22": IntC(3),
        "l1": RecordC((("A", "l11"), ("B", "l12"))),
        "l2": RecordC((("A", "l21"), ("B", "l22"))),
        "l": CollC(LabelMultiset.of([("l1", 1), ("l2", 1)])),
    }


PROJ_QUERY = "{x.B | x in R}"
PROJ_BINDS = {"R": "l"}
