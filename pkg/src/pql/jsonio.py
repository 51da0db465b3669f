"""Machine-readable exports: channel documents, trace records, DOT.

The channel document is a JSON object with a "kind" discriminator:

    {"kind": "eps",  "wires": [...]}
    {"kind": "gate", "gate": "H", "wires": [...], "rest": {...}}
    {"kind": "init", "bit": true, "wire": "w", "rest": {...}}
    {"kind": "meas", "wire": "w", "ifTrue": {...}, "ifFalse": {...}}
    {"kind": "free", "wire": "w", "rest": {...}}

Serialization is deterministic: object keys are sorted and eps wire
lists are name-sorted.  Gate wire lists keep their operand order, which
is significant.
"""

from __future__ import annotations

import json

import numpy as np

from . import qcalg
from .printer import pretty_term
from .syntax import BLeaf, BNode, Branching


class FormatError(Exception):
    pass


# ---------------------------------------------------------------------------
# Channel documents

def channel_to_doc(q: qcalg.Channel) -> dict:
    if isinstance(q, qcalg.Eps):
        return {"kind": "eps", "wires": sorted(q.wires)}
    if isinstance(q, qcalg.Gate):
        return {
            "kind": "gate",
            "gate": q.gate,
            "wires": list(q.wires),
            "rest": channel_to_doc(q.rest),
        }
    if isinstance(q, qcalg.Init):
        return {
            "kind": "init",
            "bit": bool(q.bit),
            "wire": q.wire,
            "rest": channel_to_doc(q.rest),
        }
    if isinstance(q, qcalg.Meas):
        return {
            "kind": "meas",
            "wire": q.wire,
            "ifTrue": channel_to_doc(q.if_true),
            "ifFalse": channel_to_doc(q.if_false),
        }
    if isinstance(q, qcalg.Free):
        return {"kind": "free", "wire": q.wire, "rest": channel_to_doc(q.rest)}
    raise TypeError(f"not a channel: {q!r}")


def _want(doc: dict, key: str, kinds) -> object:
    if key not in doc:
        raise FormatError(f"channel document of kind {doc.get('kind')!r} lacks {key!r}")
    v = doc[key]
    if not isinstance(v, kinds):
        raise FormatError(f"field {key!r} has the wrong shape")
    return v


def channel_from_doc(doc: dict) -> qcalg.Channel:
    if not isinstance(doc, dict):
        raise FormatError("channel document must be an object")
    kind = doc.get("kind")
    if kind == "eps":
        wires = _want(doc, "wires", list)
        if not all(isinstance(w, str) for w in wires):
            raise FormatError("eps wires must be strings")
        return qcalg.Eps(frozenset(wires))
    if kind == "gate":
        wires = _want(doc, "wires", list)
        if not all(isinstance(w, str) for w in wires):
            raise FormatError("gate wires must be strings")
        return qcalg.Gate(
            str(_want(doc, "gate", str)),
            tuple(wires),
            channel_from_doc(_want(doc, "rest", dict)),
        )
    if kind == "init":
        return qcalg.Init(
            bool(_want(doc, "bit", bool)),
            str(_want(doc, "wire", str)),
            channel_from_doc(_want(doc, "rest", dict)),
        )
    if kind == "meas":
        return qcalg.Meas(
            str(_want(doc, "wire", str)),
            channel_from_doc(_want(doc, "ifTrue", dict)),
            channel_from_doc(_want(doc, "ifFalse", dict)),
        )
    if kind == "free":
        return qcalg.Free(
            str(_want(doc, "wire", str)),
            channel_from_doc(_want(doc, "rest", dict)),
        )
    raise FormatError(f"unknown channel kind {kind!r}")


def dump_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2)


def channel_to_json(q: qcalg.Channel) -> str:
    return dump_json(channel_to_doc(q))


def channel_from_json(text: str) -> qcalg.Channel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"bad JSON: {e}") from None
    return channel_from_doc(doc)


# ---------------------------------------------------------------------------
# Branching values and configurations

def branching_to_doc(m: Branching) -> dict:
    if isinstance(m, BLeaf):
        return {"leaf": pretty_term(m.term)}
    return {"ifTrue": branching_to_doc(m.left), "ifFalse": branching_to_doc(m.right)}


def config_to_doc(q: qcalg.Channel, m: Branching) -> dict:
    return {"channel": channel_to_doc(q), "branches": branching_to_doc(m)}


def step_to_doc(index: int, rule: str, q: qcalg.Channel, m: Branching) -> dict:
    return {"step": index, "rule": rule, "config": config_to_doc(q, m)}


# ---------------------------------------------------------------------------
# Numeric payloads

def matrix_to_doc(mat: np.ndarray) -> dict:
    mat = np.asarray(mat, dtype=complex)
    return {
        "rows": int(mat.shape[0]),
        "cols": int(mat.shape[1]),
        "entries": [
            [float(np.real(v)), float(np.imag(v))] for v in mat.reshape(-1)
        ],
    }


def matrix_from_doc(doc: dict) -> np.ndarray:
    rows = int(_want(doc, "rows", int))
    cols = int(_want(doc, "cols", int))
    entries = _want(doc, "entries", list)
    if len(entries) != rows * cols:
        raise FormatError("matrix entry count does not match its shape")
    flat = np.array([complex(re, im) for re, im in entries], dtype=complex)
    return flat.reshape(rows, cols)


# ---------------------------------------------------------------------------
# DOT export

def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def config_to_dot(q: qcalg.Channel, m: Branching, wires: frozenset[str]) -> str:
    """Graphviz view of a configuration: channel constructors as nodes,
    edges labeled with the live wire set, branch terms at the leaves."""
    lines = ["digraph channel {", "  rankdir=TB;", '  node [fontname="monospace"];']
    counter = [0]

    def fresh() -> str:
        counter[0] += 1
        return f"n{counter[0]}"

    def leaf_term(mm: Branching, path: tuple) -> str:
        cur = mm
        for bit in path:
            if not isinstance(cur, BNode):
                return ""
            cur = cur.left if bit else cur.right
        if isinstance(cur, BLeaf):
            return pretty_term(cur.term)
        return ""

    def walk(qq: qcalg.Channel, live: frozenset[str], path: tuple) -> str:
        me = fresh()
        if isinstance(qq, qcalg.Eps):
            text = leaf_term(m, path)
            label = "eps{" + ",".join(sorted(qq.wires)) + "}"
            if text:
                label += "\\n" + _dot_escape(text)
            lines.append(f'  {me} [shape=box, label="{label}"];')
            return me
        if isinstance(qq, qcalg.Gate):
            lines.append(
                f'  {me} [label="{qq.gate}({",".join(qq.wires)})"];'
            )
            child = walk(qq.rest, live, path)
            lines.append(f'  {me} -> {child} [label="{{{",".join(sorted(live))}}}"];')
            return me
        if isinstance(qq, qcalg.Init):
            bit = "tt" if qq.bit else "ff"
            lines.append(f'  {me} [label="init {bit} {qq.wire}"];')
            nxt = live | {qq.wire}
            child = walk(qq.rest, nxt, path)
            lines.append(f'  {me} -> {child} [label="{{{",".join(sorted(nxt))}}}"];')
            return me
        if isinstance(qq, qcalg.Meas):
            lines.append(f'  {me} [shape=diamond, label="meas {qq.wire}"];')
            left = walk(qq.if_true, live, path + (True,))
            right = walk(qq.if_false, live, path + (False,))
            lines.append(f'  {me} -> {left} [label="tt"];')
            lines.append(f'  {me} -> {right} [label="ff"];')
            return me
        if isinstance(qq, qcalg.Free):
            lines.append(f'  {me} [label="free {qq.wire}"];')
            nxt = live - {qq.wire}
            child = walk(qq.rest, nxt, path)
            lines.append(f'  {me} -> {child} [label="{{{",".join(sorted(nxt))}}}"];')
            return me
        raise TypeError(f"not a channel: {qq!r}")

    walk(q, wires, ())
    lines.append("}")
    return "\n".join(lines) + "\n"
