"""Reading and writing instance files and constraint specs.

Grammars are documented in ``docs/formats.md``.  Every parse failure raises
:class:`~submax.errors.ParseError` carrying the file, line and column.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .constraints import Constraint, GraphicMatroid, PartitionMatroid, PSystem, UniformMatroid
from .errors import InvalidConfiguration, ParseError
from .functions import InstanceSpec

__all__ = [
    "read_instance",
    "write_instance",
    "parse_constraint",
    "constraint_to_dict",
    "INSTANCE_KINDS",
]

INSTANCE_KINDS = InstanceSpec.KINDS


def _lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            body = raw.split("#", 1)[0]
            if body.strip():
                yield lineno, raw.rstrip("\n"), body


def _number(tok: str, path, lineno, col, what: str, integer=False):
    try:
        val = int(tok) if integer else float(tok)
    except ValueError:
        raise ParseError(f"expected {what}, found {tok!r}", path, lineno, col) from None
    if not integer and not math.isfinite(val):
        raise ParseError(f"{what} must be finite", path, lineno, col)
    return val


def _col(raw: str, tok: str, start: int = 0) -> int:
    return raw.find(tok, start) + 1


def _read_coverage(path: Path) -> InstanceSpec:
    sets: dict[int, list[int]] = {}
    weights: dict[int, float] = {}
    for lineno, raw, body in _lines(path):
        if ":" not in body:
            raise ParseError("expected 'element_id: item*weight, ...'", path, lineno, 1)
        head, rest = body.split(":", 1)
        eid = _number(head.strip(), path, lineno, _col(raw, head.strip()), "element id", integer=True)
        if eid < 0:
            raise ParseError("element ids must be >= 0", path, lineno, 1)
        if eid in sets:
            raise ParseError(f"duplicate element id {eid}", path, lineno, 1)
        items = []
        offset = raw.find(":") + 1
        for tok in rest.replace(",", " ").split():
            col = _col(raw, tok, offset)
            offset = col + len(tok) - 1
            if "*" in tok:
                it, wt = tok.split("*", 1)
                w = _number(wt, path, lineno, col, "item weight")
            else:
                it, w = tok, 1.0
            item = _number(it, path, lineno, col, "item id", integer=True)
            if item < 0:
                raise ParseError("item ids must be >= 0", path, lineno, col)
            if w < 0:
                raise ParseError(f"negative weight {w} for item {item}", path, lineno, col)
            if item in weights and weights[item] != w:
                raise ParseError(
                    f"item {item} weighted {w} here but {weights[item]} earlier", path, lineno, col)
            weights[item] = w
            items.append(item)
        sets[eid] = items
    n = max(sets) + 1 if sets else 0
    missing = sorted(set(range(n)) - set(sets))
    if missing:
        raise ParseError(f"element ids must cover 0..{n - 1}; missing {missing[:5]}", path)
    n_items = max(weights) + 1 if weights else 0
    item_weights = [weights.get(i, 0.0) for i in range(n_items)]
    return InstanceSpec("coverage", n, {"sets": [sets[e] for e in range(n)],
                                        "item_weights": item_weights})


def _read_graph(path: Path) -> InstanceSpec:
    n_header = None
    edges = []
    top = -1
    for lineno, raw, body in _lines(path):
        toks = body.split()
        if toks[0] == "n":
            if n_header is not None or edges:
                raise ParseError("the 'n' header must come first and only once", path, lineno, 1)
            if len(toks) != 2:
                raise ParseError("expected 'n <int>'", path, lineno, 1)
            n_header = _number(toks[1], path, lineno, _col(raw, toks[1], 1), "vertex count", integer=True)
            continue
        if len(toks) not in (2, 3):
            raise ParseError("expected 'u v w'", path, lineno, 1)
        u = _number(toks[0], path, lineno, _col(raw, toks[0]), "vertex", integer=True)
        v = _number(toks[1], path, lineno, _col(raw, toks[1], len(toks[0])), "vertex", integer=True)
        w = 1.0 if len(toks) == 2 else _number(toks[2], path, lineno, _col(raw, toks[2], len(toks[0]) + len(toks[1])), "edge weight")
        if u < 0 or v < 0:
            raise ParseError("vertices must be >= 0", path, lineno, 1)
        if u == v:
            raise ParseError(f"self-loop on vertex {u}", path, lineno, 1)
        if w < 0:
            raise ParseError(f"negative edge weight {w}", path, lineno, 1)
        edges.append((u, v, w))
        top = max(top, u, v)
    n = top + 1 if n_header is None else n_header
    if top >= n:
        raise ParseError(f"vertex {top} outside the declared n={n}", path)
    return InstanceSpec("graph-cut", n, {"edges": edges})


def _read_facility(path: Path) -> InstanceSpec:
    rows = []
    width = None
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            vals = []
            col = 1
            for cell in row:
                v = _number(cell.strip(), path, lineno, col, "similarity")
                if v < 0:
                    raise ParseError(f"negative similarity {v}", path, lineno, col)
                vals.append(v)
                col += len(cell) + 1
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ParseError(f"row has {len(vals)} columns, expected {width}", path, lineno, 1)
            rows.append(vals)
    sim = np.asarray(rows, dtype=float).reshape(len(rows), width or 0)
    return InstanceSpec("facility-location", sim.shape[1], {"similarity": sim})


def _read_modular(path: Path) -> InstanceSpec:
    weights: dict[int, float] = {}
    for lineno, raw, body in _lines(path):
        toks = body.split()
        if len(toks) != 2:
            raise ParseError("expected 'element_id weight'", path, lineno, 1)
        e = _number(toks[0], path, lineno, _col(raw, toks[0]), "element id", integer=True)
        w = _number(toks[1], path, lineno, _col(raw, toks[1], len(toks[0])), "weight")
        if e < 0:
            raise ParseError("element ids must be >= 0", path, lineno, 1)
        if e in weights:
            raise ParseError(f"duplicate element id {e}", path, lineno, 1)
        if w < 0:
            raise ParseError(f"negative weight {w}", path, lineno, _col(raw, toks[1], len(toks[0])))
        weights[e] = w
    n = max(weights) + 1 if weights else 0
    missing = sorted(set(range(n)) - set(weights))
    if missing:
        raise ParseError(f"element ids must cover 0..{n - 1}; missing {missing[:5]}", path)
    return InstanceSpec("modular", n, {"weights": [weights[e] for e in range(n)]})


_READERS = {
    "coverage": _read_coverage,
    "graph-cut": _read_graph,
    "facility-location": _read_facility,
    "modular": _read_modular,
}


def read_instance(path, kind: str) -> InstanceSpec:
    if kind not in _READERS:
        raise InvalidConfiguration(f"unknown objective kind {kind!r}; expected one of {INSTANCE_KINDS}")
    path = Path(path)
    if not path.exists():
        raise InvalidConfiguration(f"instance file {path} does not exist")
    return _READERS[kind](path)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_instance(spec: InstanceSpec, path) -> None:
    path = Path(path)
    p = spec.payload
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if spec.kind == "coverage":
            w = p.get("item_weights")
            for e, items in enumerate(p["sets"]):
                toks = [f"{int(i)}*{_fmt(w[int(i)])}" if w is not None else str(int(i)) for i in items]
                fh.write(f"{e}: {', '.join(toks)}\n")
        elif spec.kind == "graph-cut":
            fh.write(f"n {spec.n}\n")
            for u, v, wt in p["edges"]:
                fh.write(f"{int(u)} {int(v)} {_fmt(wt)}\n")
        elif spec.kind == "facility-location":
            writer = csv.writer(fh, lineterminator="\n")
            for row in np.asarray(p["similarity"], dtype=float):
                writer.writerow([_fmt(v) for v in row])
        elif spec.kind == "modular":
            for e, wt in enumerate(p["weights"]):
                fh.write(f"{e} {_fmt(wt)}\n")
        else:
            raise InvalidConfiguration(f"unknown objective kind {spec.kind!r}")


def parse_constraint(obj: dict[str, Any], n: int) -> Constraint:
    """Build a constraint from its JSON description for a ground set of size ``n``."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InvalidConfiguration("constraint spec must be an object with a 'kind' field")
    kind = obj["kind"]
    try:
        if kind == "cardinality":
            return UniformMatroid(n, int(obj["k"]))
        if kind in ("partition", "partition-matroid"):
            return PartitionMatroid(n, obj["blocks"], obj["capacities"])
        if kind in ("graphic", "graphic-matroid"):
            edges = obj["edges"]
            if len(edges) != n:
                raise InvalidConfiguration(f"graphic matroid has {len(edges)} edges for n={n} elements")
            return GraphicMatroid([tuple(e) for e in edges])
        if kind in ("intersection", "p-system"):
            members = [parse_constraint(m, n) for m in obj["members"]]
            if not all(m.is_matroid for m in members):
                raise InvalidConfiguration("p-system members must be matroids")
            return PSystem(members)
    except KeyError as exc:
        raise InvalidConfiguration(f"constraint kind {kind!r} is missing field {exc.args[0]!r}") from None
    raise InvalidConfiguration(f"unknown constraint kind {kind!r}")


def constraint_to_dict(c: Constraint) -> dict[str, Any]:
    if isinstance(c, UniformMatroid):
        return {"kind": "cardinality", "k": c.bound}
    if isinstance(c, PartitionMatroid):
        return {"kind": "partition", "blocks": c.blocks, "capacities": c.capacities.tolist()}
    if isinstance(c, GraphicMatroid):
        return {"kind": "graphic", "edges": [list(e) for e in c.edges]}
    if isinstance(c, PSystem):
        return {"kind": "intersection", "members": [constraint_to_dict(m) for m in c.members]}
    raise InvalidConfiguration(f"cannot serialize constraint of kind {c.kind!r}")


def load_json(path) -> Any:
    path = Path(path)
    if not path.exists():
        raise InvalidConfiguration(f"file {path} does not exist")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, str(path), exc.lineno, exc.colno) from None
