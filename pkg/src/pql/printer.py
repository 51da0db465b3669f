"""Render terms, types, patterns, channels, and branchings back to the
concrete syntax accepted by the parser.

Output is deterministic: wire sets print sorted, and parentheses are
emitted only where reparsing would otherwise regroup.
"""

from __future__ import annotations

from . import qcalg
from .syntax import (
    App,
    BLeaf,
    BNode,
    Box,
    Branching,
    FF,
    If,
    Lam,
    LetPair,
    Pair,
    Pattern,
    PPair,
    PUnit,
    PVar,
    QChanConst,
    TT,
    TBang,
    TBool,
    TChan,
    TLolli,
    TQubit,
    TTensor,
    TUnit,
    Term,
    Unbox,
    UnboxApplied,
    Unit,
    Var,
)

# type precedence levels: lolli 0, tensor 1, prefix 2, atom 3
def pretty_type(t, level: int = 0) -> str:
    if isinstance(t, TUnit):
        return "I"
    if isinstance(t, TBool):
        return "bool"
    if isinstance(t, TQubit):
        return "qubit"
    if isinstance(t, TChan):
        return f"QChan({pretty_type(t.pattern_type)}, {pretty_type(t.out)})"
    if isinstance(t, TBang):
        inner = pretty_type(t.inner, 3)
        return f"!{inner}"
    if isinstance(t, TTensor):
        s = f"{pretty_type(t.left, 2)} * {pretty_type(t.right, 1)}"
        return f"({s})" if level > 1 else s
    if isinstance(t, TLolli):
        s = f"{pretty_type(t.arg, 1)} -o {pretty_type(t.res, 0)}"
        return f"({s})" if level > 0 else s
    raise TypeError(f"not a type: {t!r}")


def pretty_pattern(p: Pattern) -> str:
    if isinstance(p, PVar):
        return p.name
    if isinstance(p, PUnit):
        return "*"
    return f"<{pretty_pattern(p.left)}, {pretty_pattern(p.right)}>"


def pretty_channel(q) -> str:
    if isinstance(q, qcalg.Eps):
        return "eps{" + ", ".join(sorted(q.wires)) + "}"
    if isinstance(q, qcalg.Gate):
        return f"{q.gate}({', '.join(q.wires)}); {pretty_channel(q.rest)}"
    if isinstance(q, qcalg.Init):
        bit = "tt" if q.bit else "ff"
        return f"init {bit} {q.wire}; {pretty_channel(q.rest)}"
    if isinstance(q, qcalg.Meas):
        return f"meas {q.wire} {{ {pretty_channel(q.if_true)} | {pretty_channel(q.if_false)} }}"
    if isinstance(q, qcalg.Free):
        return f"free {q.wire}; {pretty_channel(q.rest)}"
    raise TypeError(f"not a channel: {q!r}")


# term precedence levels: term 0, application 1, atom 2
def pretty_term(t, level: int = 0) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Unit):
        return "*"
    if isinstance(t, TT):
        return "tt"
    if isinstance(t, FF):
        return "ff"
    if isinstance(t, Unbox):
        return "unbox"
    if isinstance(t, Box):
        return f"box[{pretty_type(t.pattern_type)}]"
    if isinstance(t, Pair):
        return f"<{pretty_term(t.left)}, {pretty_term(t.right)}>"
    if isinstance(t, QChanConst):
        p = pretty_pattern(t.pattern)
        q = pretty_channel(t.channel)
        m = pretty_branching(t.branches)
        return f"qchan({p}; {q}; {m})"
    if isinstance(t, App):
        s = f"{pretty_term(t.fn, 1)} {pretty_term(t.arg, 2)}"
        return f"({s})" if level > 1 else s
    if isinstance(t, UnboxApplied):
        s = f"unbox {pretty_term(t.arg, 2)}"
        return f"({s})" if level > 1 else s
    if isinstance(t, Lam):
        s = f"fun {t.var} -> {pretty_term(t.body)}"
        return f"({s})" if level > 0 else s
    if isinstance(t, LetPair):
        s = f"let <{t.left_var}, {t.right_var}> = {pretty_term(t.pair)} in {pretty_term(t.body)}"
        return f"({s})" if level > 0 else s
    if isinstance(t, If):
        s = f"if {pretty_term(t.cond)} then {pretty_term(t.then)} else {pretty_term(t.els)}"
        return f"({s})" if level > 0 else s
    raise TypeError(f"not a term: {t!r}")


def pretty_branching(m: Branching) -> str:
    if isinstance(m, BLeaf):
        return pretty_term(m.term)
    return f"[{pretty_branching(m.left)}, {pretty_branching(m.right)}]"


def pretty_configuration(q, m: Branching) -> str:
    return f"({pretty_channel(q)}, {pretty_branching(m)})"
