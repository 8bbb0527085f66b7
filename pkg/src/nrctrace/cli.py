"""nrctrace command line.

Exit status: 0 ok, 1 parse or type error, 2 malformed store or input file,
3 internal invariant breach, 4 illegal edit.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from collections.abc import Callable
from typing import Any

import click

from . import fixtures as F
from .adapt import IllegalEdit, adapt, check_edits, compare_adapted, edits_from_json
from .check import run_all
from .core import CoreExpr, NotANormal, TypeError_, compile_query, parse_core, pretty, typecheck
from .provenance import (
    DepPolicy,
    ProvenanceError,
    SemiringPolicy,
    WherePolicy,
    annotated_eval,
    annotations_from_json,
    ann_to_json,
    dep_extract,
    identity_for,
    k_extract,
    k_readback,
    where_extract,
)
from .semiring import SEMIRINGS
from .slicing import SliceError, backward_slice, forward_slice, residue, simplify
from .store import (
    CollC,
    FreshSupply,
    RecordC,
    StoreError,
    StoreFormatError,
    infer_store_type,
    load_table,
    readback,
    store_from_json,
    store_to_json,
)
from .syntax import ParseError, ResolveError
from .trace import consistency_violation, traced_eval, written_labels
from .tracefmt import TraceSyntaxError, trace_dot, trace_from_json, trace_text, trace_to_json
from .values import value_to_json

BUNDLE_FORMAT = "nrctrace-bundle/1"


class Breach(Exception):
    """An internal invariant failed."""


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _fail(code: int, msg: str) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def exits(fn: Callable) -> Callable:
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ParseError, ResolveError, TypeError_, NotANormal, TraceSyntaxError) as exc:
            _fail(1, str(exc))
        except IllegalEdit as exc:
            _fail(4, str(exc))
        except (StoreFormatError, json.JSONDecodeError, OSError) as exc:
            _fail(2, str(exc))
        except (Breach, StoreError, ProvenanceError) as exc:
            _fail(3, f"invariant breach: {exc}")

    return wrapper


def _read_json(path: str) -> Any:
    with open(path) as fh:
        return json.load(fh)


def _load_store(path: str):
    return store_from_json(_read_json(path))


def _binds(pairs: tuple[str, ...]) -> dict[str, str]:
    out = {}
    for p in pairs:
        if "=" not in p:
            raise StoreFormatError(f"--bind expects NAME=LABEL, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _write(out_dir: str | None, name: str, text: str) -> None:
    if out_dir is None:
        return
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w") as fh:
        fh.write(text)


def _emit(selected: tuple[str, ...], sigma, T, dest: str) -> None:
    for what in selected:
        if what == "value":
            click.echo(_dump(value_to_json(readback(sigma, None, dest))), nl=False)
        elif what == "text":
            click.echo(str(readback(sigma, None, dest)))
        elif what == "trace":
            click.echo(trace_text(T, exprs=False))
        elif what == "trace-full":
            click.echo(trace_text(T))
        elif what == "json":
            click.echo(_dump(trace_to_json(T)), nl=False)
        elif what == "dot":
            click.echo(trace_dot(T), nl=False)


def _artifacts(out_dir: str | None, bundle: dict, sigma, T, dest: str) -> None:
    _write(out_dir, "value.json", _dump(value_to_json(readback(sigma, None, dest))))
    _write(out_dir, "trace.txt", trace_text(T) + "\n")
    _write(out_dir, "trace.json", _dump(trace_to_json(T)))
    _write(out_dir, "trace.dot", trace_dot(T))
    _write(out_dir, "bundle.json", _dump(bundle))


def _bundle(e: CoreExpr, dest: str, seed: int, sigma, root, T) -> dict:
    return {
        "format": BUNDLE_FORMAT,
        "query": pretty(e),
        "dest": dest,
        "seed": seed,
        "store": store_to_json(sigma, root),
        "trace": trace_to_json(T),
    }


def _open_bundle(path: str):
    b = _read_json(path)
    if not isinstance(b, dict) or b.get("format") != BUNDLE_FORMAT:
        raise StoreFormatError(f"{path} is not a trace bundle")
    sigma, root = store_from_json(b["store"])
    e = parse_core(b["query"])
    T = trace_from_json(b["trace"])
    return b, sigma, root, e, T


EMIT = click.Choice(["value", "text", "trace", "trace-full", "json", "dot"])


@click.group()
@click.version_option(package_name="artifact")
def main() -> None:
    """Traced evaluation, adaptation, provenance and slicing for nested relational queries."""


@main.command()
@click.argument("paths", nargs=-1, type=click.Path(exists=True, dir_okay=False))
@click.option("-e", "--expr", help="Query text instead of a query file.")
@click.option("--dest", default="out", show_default=True, help="Label receiving the result.")
@click.option("--seed", default=1, show_default=True, help="First index of the fresh-label supply.")
@click.option("--bind", "binds", multiple=True, help="NAME=LABEL for a free query name.")
@click.option("--emit", "emit", multiple=True, type=EMIT, help="What to print; repeatable.")
@click.option("--out-dir", type=click.Path(file_okay=False), help="Write value, trace and bundle files here.")
@exits
def run(paths, expr, dest, seed, binds, emit, out_dir) -> None:
    """Evaluate a query against a store, recording a trace.

    PATHS is QUERY_FILE STORE_FILE, or just STORE_FILE together with --expr.
    """
    if len(paths) != (1 if expr is not None else 2):
        raise click.UsageError("expected QUERY_FILE STORE_FILE, or --expr TEXT STORE_FILE")
    store = paths[-1]
    if expr is not None:
        text = expr
    else:
        with open(paths[0]) as fh:
            text = fh.read()
    sigma, root = _load_store(store)
    if dest in sigma:
        raise StoreFormatError(f"destination {dest} is already bound in the store")
    e = compile_query(text, sigma, root, _binds(binds))
    typecheck(infer_store_type(sigma), e)
    st, T = traced_eval(sigma, dest, e, FreshSupply(start=seed))
    bad = consistency_violation(st, T)
    if bad:
        raise Breach(bad)
    _emit(emit or ("value",), st, T, dest)
    _artifacts(out_dir, _bundle(e, dest, seed, sigma, root, T), st, T, dest)


@main.command("adapt")
@click.argument("bundle", type=click.Path(exists=True, dir_okay=False))
@click.argument("edits", type=click.Path(exists=True, dir_okay=False))
@click.option("--emit", "emit", multiple=True, type=EMIT)
@click.option("--out-dir", type=click.Path(file_okay=False))
@exits
def adapt_cmd(bundle, edits, emit, out_dir) -> None:
    """Propagate the EDITS script through the trace in BUNDLE and check it against a fresh run."""
    b, sigma, root, e, T = _open_bundle(bundle)
    dest, seed = b["dest"], int(b["seed"])
    script = edits_from_json(_read_json(edits))
    psi = infer_store_type(sigma)
    sigma2 = check_edits(sigma, psi, T, script)
    st, T2 = adapt(sigma2, T)
    verdict = compare_adapted(e, sigma2, T, dest, seed)
    st1, _ = traced_eval(sigma, dest, e, FreshSupply(start=seed))
    changed = T2 != T or readback(st1, None, dest) != readback(st, None, dest)
    report = f"{'changed' if changed else 'unchanged'}; fidelity {verdict}"
    _emit(emit, st, T2, dest)
    click.echo(report)
    _artifacts(out_dir, _bundle(e, dest, seed, sigma2, root, T2), st, T2, dest)
    _write(out_dir, "report.txt", report + "\n")
    if not verdict.ok:
        raise Breach(verdict.reason)


def _cells(sigma, h, l: str, kind: str, sr) -> Any:
    """The output value with the annotation of every cell."""
    k = sigma[l]
    ann = ann_to_json(kind, h.get(l), sr)
    if isinstance(k, CollC):
        return {"label": l, "ann": ann, "elems": [_cells(sigma, h, li, kind, sr) for li, _ in k.elems]}
    if isinstance(k, RecordC):
        return {"label": l, "ann": ann, "fields": {n: _cells(sigma, h, fl, kind, sr) for n, fl in k.fields}}
    return {"label": l, "ann": ann, "value": value_to_json(readback(sigma, None, l))}


@main.command()
@click.argument("bundle", type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", type=click.Choice(["where", "dep", "semiring"]), required=True)
@click.option("--instance", type=click.Choice(sorted(SEMIRINGS)), default="poly", show_default=True)
@click.option("--annotations", type=click.Path(exists=True, dir_okay=False), help="Initial annotation JSON.")
@click.option("--check-oracle", is_flag=True, help="Also run the annotated evaluator and compare.")
@click.option("--all-labels", is_flag=True, help="Include input labels in the annotation map.")
@exits
def provenance(bundle, kind, instance, annotations, check_oracle, all_labels) -> None:
    """Extract where, dependency or semiring provenance from the trace in BUNDLE."""
    b, sigma, root, e, T = _open_bundle(bundle)
    dest, seed = b["dest"], int(b["seed"])
    sr = SEMIRINGS[instance] if kind == "semiring" else None
    if annotations:
        doc = _read_json(annotations)
        if doc.get("kind", kind) != kind:
            raise StoreFormatError(f"annotation file is for {doc.get('kind')}, not {kind}")
        h0 = annotations_from_json({**doc, "kind": kind}, sigma, sr)
    else:
        h0 = identity_for(kind, sigma, sr)
    if kind == "where":
        h = where_extract(h0, T)
    elif kind == "dep":
        h = dep_extract(h0, T)
    else:
        h = k_extract(sr, h0, T)
    st, _ = traced_eval(sigma, dest, e, FreshSupply(start=seed))
    labels = sorted(h) if all_labels else sorted(written_labels(T))
    result: dict[str, Any] = {
        "kind": kind,
        "annotations": {l: ann_to_json(kind, h.get(l), sr) for l in labels},
        "output": _cells(st, h, dest, kind, sr),
    }
    if sr is not None:
        result["instance"] = instance
        if isinstance(st[dest], CollC):
            kb = k_readback(sr, st, h, dest)
            result["readback"] = [[str(v), sr.to_json(a)] for v, a in kb.items]
    if check_oracle:
        policy = {"where": WherePolicy(), "dep": DepPolicy()}.get(kind) or SemiringPolicy(sr)
        _, want = annotated_eval(policy, sigma, h0, dest, e, FreshSupply(start=seed))
        result["oracle"] = "MATCH" if want == h else "MISMATCH"
    click.echo(_dump(result), nl=False)
    if result.get("oracle") == "MISMATCH":
        raise Breach("extraction disagrees with the annotated evaluator")


def _labels(s: str | None) -> list[str]:
    return [x.strip() for x in s.split(",") if x.strip()] if s else []


@main.command("slice")
@click.argument("bundle", type=click.Path(exists=True, dir_okay=False))
@click.option("--backward", help="Comma-separated output labels.")
@click.option("--forward", help="Comma-separated input labels.")
@click.option("--simplify", "simp", is_flag=True, help="Inline projections and scalar steps.")
@click.option("--residue", "res", is_flag=True, help="Print an expression over inputs for the slice's output.")
@click.option("--format", "fmt", type=click.Choice(["text", "dot"]), default="text", show_default=True)
@exits
def slice_cmd(bundle, backward, forward, simp, res, fmt) -> None:
    """Slice the trace in BUNDLE backward from outputs or forward from inputs."""
    if bool(backward) == bool(forward):
        raise click.UsageError("give exactly one of --backward or --forward")
    _, sigma, _, _, T = _open_bundle(bundle)
    try:
        if backward:
            S = backward_slice(T, _labels(backward), sigma)
        else:
            S = forward_slice(T, _labels(forward), sigma)
    except SliceError as exc:
        raise StoreFormatError(str(exc)) from None
    if fmt == "dot":
        kept = written_labels(S) if S is not None else set()
        click.echo(trace_dot(T, dimmed=written_labels(T) - kept), nl=False)
        return
    if S is None:
        click.echo("(empty slice)")
        return
    click.echo(str(simplify(S)) if simp else trace_text(S, exprs=False))
    if res:
        click.echo(f"residue: {residue(S)}")


@main.command()
@click.option("--seed", default=0, show_default=True)
@click.option("--size", default=500, show_default=True, help="Random programs per suite.")
@click.option("--laws", default=1000, show_default=True, help="Random triples per semiring.")
def check(seed, size, laws) -> None:
    """Run the randomized property suites."""
    results = run_all(size, seed, laws)
    for r in results:
        click.echo(r.line())
        for f in r.failures[:3]:
            click.echo(f"    {f}")
    if not all(r.ok for r in results):
        sys.exit(3)


@main.command("load-table")
@click.argument("name")
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--store", "store_path", type=click.Path(exists=True, dir_okay=False), help="Store to extend.")
@click.option("--prefix", help="Label prefix; defaults to the lower-cased NAME.")
@click.option("--root", default="db", show_default=True, help="Root record receiving field NAME.")
@exits
def load_table_cmd(name, csv_path, store_path, prefix, root) -> None:
    """Add the CSV table at CSV_PATH to a store under field NAME of the root record."""
    prefix = prefix or name.lower()
    sigma, old_root = _load_store(store_path) if store_path else ({}, None)
    root = old_root or root
    new = load_table(prefix, csv_path)
    clash = set(new) & set(sigma)
    if clash:
        raise StoreFormatError(f"labels already bound: {', '.join(sorted(clash))}")
    sigma.update(new)
    fields = dict(sigma[root].fields) if root in sigma and isinstance(sigma[root], RecordC) else {}
    if name in fields:
        raise StoreFormatError(f"root already has a field {name}")
    fields[name] = prefix
    sigma[root] = RecordC(tuple(fields.items()))
    store_from_json(store_to_json(sigma, root))
    click.echo(_dump(store_to_json(sigma, root)), nl=False)


@main.command("fixtures")
@click.argument("out_dir", type=click.Path(file_okay=False))
def fixtures_cmd(out_dir) -> None:
    """Write the sample R/S store, its queries and an edit script to OUT_DIR."""
    _write(out_dir, "rs.json", _dump(store_to_json(F.rs_store(), F.ROOT)))
    for ex in F.EXAMPLES.values():
        _write(out_dir, f"{ex.name}.nrc", ex.query + "\n")
    _write(out_dir, "edit-s31.json", _dump([{"label": "s31", "value": {"int": 4}}]))
    _write(out_dir, "no-edits.json", "[]\n")
    _write(out_dir, "R.csv", "A,B,C\n" + "".join(",".join(map(str, r)) + "\n" for r in F.R_ROWS))
    _write(out_dir, "S.csv", "C,D\n" + "".join(",".join(map(str, r)) + "\n" for r in F.S_ROWS))
    click.echo(f"wrote fixtures to {out_dir}")


if __name__ == "__main__":
    main()
