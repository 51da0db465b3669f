"""Abstract syntax: terms, branching terms, patterns, and types.

Qubits appear in terms as ordinary variables of type `qubit`; the
evaluator aliases them with channel wires, so wire names and variable
names share one namespace.  A channel constant `(p; Q; m)` packages a
channel Q together with an input pattern p and a branching term m whose
leaves describe the output of each measurement branch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

from . import qcalg
from .qcalg import Channel


# ---------------------------------------------------------------------------
# Types

@dataclass(frozen=True)
class TUnit:
    pass


@dataclass(frozen=True)
class TBool:
    pass


@dataclass(frozen=True)
class TQubit:
    pass


@dataclass(frozen=True)
class TTensor:
    left: "Type"
    right: "Type"


@dataclass(frozen=True)
class TLolli:
    arg: "Type"
    res: "Type"


@dataclass(frozen=True)
class TBang:
    inner: "Type"


@dataclass(frozen=True)
class TChan:
    pattern_type: "Type"
    out: "Type"


Type = Union[TUnit, TBool, TQubit, TTensor, TLolli, TBang, TChan]

UNIT = TUnit()
BOOL = TBool()
QUBIT = TQubit()


def is_pattern_type(t: Type) -> bool:
    """Pattern types are the first-order shapes a channel can consume:
    unit, qubit, and tensors of pattern types."""
    if isinstance(t, (TUnit, TQubit)):
        return True
    if isinstance(t, TTensor):
        return is_pattern_type(t.left) and is_pattern_type(t.right)
    return False


def is_basic_type(t: Type) -> bool:
    # Basic types are those whose closed values are observable data.
    if isinstance(t, (TUnit, TBool, TQubit)):
        return True
    if isinstance(t, TTensor):
        return is_basic_type(t.left) and is_basic_type(t.right)
    return False


def strip_bangs(t: Type) -> Type:
    while isinstance(t, TBang):
        t = t.inner
    return t


# ---------------------------------------------------------------------------
# Patterns

@dataclass(frozen=True)
class PVar:
    name: str


@dataclass(frozen=True)
class PUnit:
    pass


@dataclass(frozen=True)
class PPair:
    left: "Pattern"
    right: "Pattern"


Pattern = Union[PVar, PUnit, PPair]


def pattern_vars(p: Pattern) -> tuple[str, ...]:
    if isinstance(p, PVar):
        return (p.name,)
    if isinstance(p, PUnit):
        return ()
    return pattern_vars(p.left) + pattern_vars(p.right)


def pattern_linear(p: Pattern) -> bool:
    vs = pattern_vars(p)
    return len(vs) == len(set(vs))


def matches_pattern_type(p: Pattern, t: Type) -> bool:
    """p fits t when their tree shapes agree: variables sit at qubit
    positions, units at unit positions, and the variables are distinct."""
    if not pattern_linear(p):
        return False
    return _matches(p, t)


def _matches(p: Pattern, t: Type) -> bool:
    if isinstance(p, PVar):
        return isinstance(t, TQubit)
    if isinstance(p, PUnit):
        return isinstance(t, TUnit)
    if isinstance(p, PPair):
        return (
            isinstance(t, TTensor)
            and _matches(p.left, t.left)
            and _matches(p.right, t.right)
        )
    raise TypeError(f"not a pattern: {p!r}")


# ---------------------------------------------------------------------------
# Terms

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unit:
    pass


@dataclass(frozen=True)
class TT:
    pass


@dataclass(frozen=True)
class FF:
    pass


@dataclass(frozen=True)
class Lam:
    var: str
    body: "Term"


@dataclass(frozen=True)
class App:
    fn: "Term"
    arg: "Term"


@dataclass(frozen=True)
class Pair:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class LetPair:
    left_var: str
    right_var: str
    pair: "Term"
    body: "Term"


@dataclass(frozen=True)
class If:
    cond: "Term"
    then: "Term"
    els: "Term"


@dataclass(frozen=True)
class Box:
    pattern_type: Type


@dataclass(frozen=True)
class Unbox:
    pass


@dataclass(frozen=True)
class UnboxApplied:
    # `unbox V`: a function value waiting for its pattern argument.
    arg: "Term"


@dataclass(frozen=True)
class QChanConst:
    pattern: Pattern
    channel: Channel
    branches: "Branching"


Term = Union[
    Var, Unit, TT, FF, Lam, App, Pair, LetPair, If, Box, Unbox, UnboxApplied, QChanConst
]


@dataclass(frozen=True)
class BLeaf:
    term: "Term"


@dataclass(frozen=True)
class BNode:
    left: "Branching"
    right: "Branching"


Branching = Union[BLeaf, BNode]


UNIT_TERM = Unit()
TT_TERM = TT()
FF_TERM = FF()
UNBOX = Unbox()


def mk_app(fn: Term, arg: Term) -> Term:
    """Build an application, folding `unbox V` into its value form."""
    if isinstance(fn, Unbox) and is_value(arg):
        return UnboxApplied(arg)
    return App(fn, arg)


def is_value(t: Term) -> bool:
    if isinstance(t, (Var, Unit, TT, FF, Lam, Box, Unbox, QChanConst)):
        return True
    if isinstance(t, UnboxApplied):
        return is_value(t.arg)
    if isinstance(t, Pair):
        return is_value(t.left) and is_value(t.right)
    return False


def branching_is_value(m: Branching) -> bool:
    return all(is_value(t) for t in branch_leaves(m))


def branch_leaves(m: Branching) -> list[Term]:
    if isinstance(m, BLeaf):
        return [m.term]
    return branch_leaves(m.left) + branch_leaves(m.right)


def branch_paths(m: Branching) -> Iterator[tuple[tuple[bool, ...], Term]]:
    """Leaves with their paths; True = left (tt side), False = right."""
    def walk(node: Branching, path: tuple[bool, ...]) -> Iterator[tuple[tuple[bool, ...], Term]]:
        if isinstance(node, BLeaf):
            yield path, node.term
        else:
            yield from walk(node.left, path + (True,))
            yield from walk(node.right, path + (False,))
    return walk(m, ())


def branch_map(f, m: Branching) -> Branching:
    if isinstance(m, BLeaf):
        return BLeaf(f(m.term))
    return BNode(branch_map(f, m.left), branch_map(f, m.right))


# ---------------------------------------------------------------------------
# Free variables

def free_vars(t: Term) -> frozenset[str]:
    if isinstance(t, Var):
        return frozenset({t.name})
    if isinstance(t, (Unit, TT, FF, Box, Unbox)):
        return frozenset()
    if isinstance(t, Lam):
        return free_vars(t.body) - {t.var}
    if isinstance(t, App):
        return free_vars(t.fn) | free_vars(t.arg)
    if isinstance(t, UnboxApplied):
        return free_vars(t.arg)
    if isinstance(t, Pair):
        return free_vars(t.left) | free_vars(t.right)
    if isinstance(t, LetPair):
        return free_vars(t.pair) | (free_vars(t.body) - {t.left_var, t.right_var})
    if isinstance(t, If):
        return free_vars(t.cond) | free_vars(t.then) | free_vars(t.els)
    if isinstance(t, QChanConst):
        return _qchan_free_vars(t)
    raise TypeError(f"not a term: {t!r}")


def _qchan_free_vars(t: QChanConst) -> frozenset[str]:
    # The pattern variables and, leafwise, the channel's output wires
    # are binders.  When the channel is invalid (possible mid-check on
    # generated garbage) fall back to subtracting every mentioned wire.
    bound = frozenset(pattern_vars(t.pattern))
    leaves = branch_leaves(t.branches)
    try:
        out = qcalg.validate(t.channel, frozenset(pattern_vars(t.pattern)))
        outs = qcalg.bunch_leaves(out)
        if len(outs) == len(leaves):
            acc: frozenset[str] = frozenset()
            for wires, leaf in zip(outs, leaves):
                acc |= free_vars(leaf) - wires
            return acc - bound
    except qcalg.ChannelError:
        pass
    acc = frozenset()
    for leaf in leaves:
        acc |= free_vars(leaf)
    return acc - qcalg.all_wires(t.channel) - bound


def branching_free_vars(m: Branching) -> frozenset[str]:
    acc: frozenset[str] = frozenset()
    for leaf in branch_leaves(m):
        acc |= free_vars(leaf)
    return acc


# ---------------------------------------------------------------------------
# Value shapes

@dataclass(frozen=True)
class ShapeLeaf:
    pass


@dataclass(frozen=True)
class ShapeUnit:
    pass


@dataclass(frozen=True)
class ShapePair:
    left: "Shape"
    right: "Shape"


Shape = Union[ShapeLeaf, ShapeUnit, ShapePair]


def shape_of_pattern(p: Pattern) -> Shape:
    if isinstance(p, PVar):
        return ShapeLeaf()
    if isinstance(p, PUnit):
        return ShapeUnit()
    return ShapePair(shape_of_pattern(p.left), shape_of_pattern(p.right))


def shape_of(v: Term) -> Shape | None:
    """Shape of a first-order value: variables are wire leaves, * is the
    unit, pairs recurse.  None for values outside that fragment."""
    if isinstance(v, Var):
        return ShapeLeaf()
    if isinstance(v, Unit):
        return ShapeUnit()
    if isinstance(v, Pair):
        l = shape_of(v.left)
        r = shape_of(v.right)
        if l is None or r is None:
            return None
        return ShapePair(l, r)
    return None


# ---------------------------------------------------------------------------
# Alpha-equivalence keys

def alpha_key(t: Term, env: dict[str, int] | None = None, depth: int = 0):
    """A hashable key identifying t up to renaming of bound term
    variables.  Channel constants compare literally (their wire names
    are part of the constant)."""
    if env is None:
        env = {}
    if isinstance(t, Var):
        if t.name in env:
            return ("bv", env[t.name])
        return ("fv", t.name)
    if isinstance(t, Unit):
        return ("unit",)
    if isinstance(t, TT):
        return ("tt",)
    if isinstance(t, FF):
        return ("ff",)
    if isinstance(t, Lam):
        inner = dict(env)
        inner[t.var] = depth
        return ("lam", alpha_key(t.body, inner, depth + 1))
    if isinstance(t, App):
        return ("app", alpha_key(t.fn, env, depth), alpha_key(t.arg, env, depth))
    if isinstance(t, UnboxApplied):
        return ("unboxapp", alpha_key(t.arg, env, depth))
    if isinstance(t, Pair):
        return ("pair", alpha_key(t.left, env, depth), alpha_key(t.right, env, depth))
    if isinstance(t, LetPair):
        inner = dict(env)
        inner[t.left_var] = depth
        inner[t.right_var] = depth + 1
        return (
            "letpair",
            alpha_key(t.pair, env, depth),
            alpha_key(t.body, inner, depth + 2),
        )
    if isinstance(t, If):
        return (
            "if",
            alpha_key(t.cond, env, depth),
            alpha_key(t.then, env, depth),
            alpha_key(t.els, env, depth),
        )
    if isinstance(t, Box):
        return ("box", t.pattern_type)
    if isinstance(t, Unbox):
        return ("unbox",)
    if isinstance(t, QChanConst):
        return ("qchan", t)
    raise TypeError(f"not a term: {t!r}")
