"""Small-step reduction of machine states.

A machine state pairs a channel with a branching term whose leaves line
up with the channel's measurement tree.  Steps are deterministic: the
leftmost branch whose leaf is not yet a value is advanced, and inside a
leaf the leftmost non-value subterm is reduced first.

Each step reports the chain of rule names that justified it, outermost
first, joined with ">".  The names:

    a.1  beta          a.2  let-pair        a.3  if
    b.1  boxing        b.2  unboxing        struct-qchan  step inside a constant
    c.1..c.6           evaluation contexts (app fn, app arg, pair left,
                       pair right, if scrutinee, let scrutinee)
    d.2 / d.3          step under the true / false branch of a measurement
    d.4                step under a gate, init, or free prefix
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

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
    Term,
    UNIT_TERM,
    Unbox,
    UnboxApplied,
    Unit,
    Var,
    branch_leaves,
    branching_free_vars,
    branching_is_value,
    free_vars,
    is_value,
    mk_app,
    pattern_vars,
)


class EvalError(Exception):
    pass


class StuckTerm(EvalError):
    pass


class FuelExhausted(EvalError):
    pass


@dataclass
class Step:
    rule: str
    channel: qcalg.Channel
    branches: Branching


class FreshWires:
    """Names w0, w1, ... skipping everything visible in the starting state."""

    def __init__(self, avoid: set[str]):
        self.taken = set(avoid)
        self.counter = itertools.count()

    def next(self) -> str:
        while True:
            name = f"w{next(self.counter)}"
            if name not in self.taken:
                self.taken.add(name)
                return name


# ---------------------------------------------------------------------------
# Substitution

def substitute(t: Term, var: str, value: Term) -> Term:
    """Capture-avoiding substitution of a value for a free variable."""
    if isinstance(t, Var):
        return value if t.name == var else t
    if isinstance(t, (Unit, TT, FF, Box, Unbox)):
        return t
    if isinstance(t, Lam):
        if t.var == var:
            return t
        if t.var in free_vars(value):
            fresh = _fresh_name(t.var, free_vars(value) | free_vars(t.body) | {var})
            body = substitute(t.body, t.var, Var(fresh))
            return Lam(fresh, substitute(body, var, value))
        return Lam(t.var, substitute(t.body, var, value))
    if isinstance(t, App):
        return App(substitute(t.fn, var, value), substitute(t.arg, var, value))
    if isinstance(t, UnboxApplied):
        return UnboxApplied(substitute(t.arg, var, value))
    if isinstance(t, Pair):
        return Pair(substitute(t.left, var, value), substitute(t.right, var, value))
    if isinstance(t, LetPair):
        pair = substitute(t.pair, var, value)
        if var in (t.left_var, t.right_var):
            return LetPair(t.left_var, t.right_var, pair, t.body)
        x, y, body = t.left_var, t.right_var, t.body
        fv = free_vars(value)
        if x in fv:
            nx = _fresh_name(x, fv | free_vars(body) | {var, y})
            body = substitute(body, x, Var(nx))
            x = nx
        if y in fv:
            ny = _fresh_name(y, fv | free_vars(body) | {var, x})
            body = substitute(body, y, Var(ny))
            y = ny
        return LetPair(x, y, pair, substitute(body, var, value))
    if isinstance(t, If):
        return If(
            substitute(t.cond, var, value),
            substitute(t.then, var, value),
            substitute(t.els, var, value),
        )
    if isinstance(t, QChanConst):
        bound = set(pattern_vars(t.pattern)) | qcalg.all_wires(t.channel)
        if var in bound:
            return t
        clash = free_vars(value) & bound
        if clash:
            t = _rename_const_wires(t, clash, free_vars(value) | {var})
        branches = _map_branches(lambda leaf: substitute(leaf, var, value), t.branches)
        return QChanConst(t.pattern, t.channel, branches)
    raise TypeError(f"not a term: {t!r}")


def _fresh_name(base: str, avoid: set[str]) -> str:
    for i in itertools.count():
        name = f"{base}_{i}"
        if name not in avoid:
            return name


def _map_branches(f, m: Branching) -> Branching:
    if isinstance(m, BLeaf):
        return BLeaf(f(m.term))
    return BNode(_map_branches(f, m.left), _map_branches(f, m.right))


def _rename_const_wires(t: QChanConst, clash: set[str], avoid: set[str]) -> QChanConst:
    taken = set(avoid) | set(pattern_vars(t.pattern)) | qcalg.all_wires(t.channel)
    for leaf in branch_leaves(t.branches):
        taken |= free_vars(leaf)
    ren: dict[str, str] = {}
    for w in sorted(clash):
        nw = _fresh_name(w, taken)
        taken.add(nw)
        ren[w] = nw
    channel = _rename_channel_wires(t.channel, ren)
    pattern = _rename_pattern_vars(t.pattern, ren)
    branches = t.branches
    for old, new in ren.items():
        branches = _map_branches(lambda leaf: substitute(leaf, old, Var(new)), branches)
    return QChanConst(pattern, channel, branches)


def _rename_channel_wires(q, ren: dict[str, str]):
    r = lambda w: ren.get(w, w)
    if isinstance(q, qcalg.Eps):
        return qcalg.Eps(frozenset(r(w) for w in q.wires))
    if isinstance(q, qcalg.Gate):
        return qcalg.Gate(q.gate, tuple(r(w) for w in q.wires), _rename_channel_wires(q.rest, ren))
    if isinstance(q, qcalg.Init):
        return qcalg.Init(q.bit, r(q.wire), _rename_channel_wires(q.rest, ren))
    if isinstance(q, qcalg.Meas):
        return qcalg.Meas(
            r(q.wire),
            _rename_channel_wires(q.if_true, ren),
            _rename_channel_wires(q.if_false, ren),
        )
    if isinstance(q, qcalg.Free):
        return qcalg.Free(r(q.wire), _rename_channel_wires(q.rest, ren))
    raise TypeError(f"not a channel: {q!r}")


def _rename_pattern_vars(p: Pattern, ren: dict[str, str]) -> Pattern:
    if isinstance(p, PVar):
        return PVar(ren.get(p.name, p.name))
    if isinstance(p, PUnit):
        return p
    return PPair(_rename_pattern_vars(p.left, ren), _rename_pattern_vars(p.right, ren))


# ---------------------------------------------------------------------------
# Pattern plumbing for the box / unbox steps

def fresh_pattern(p_ty, gen: FreshWires) -> tuple[Pattern, list[str]]:
    """A pattern of the given shape over brand new wires."""
    from .syntax import TQubit, TTensor, TUnit

    if isinstance(p_ty, TQubit):
        w = gen.next()
        return PVar(w), [w]
    if isinstance(p_ty, TUnit):
        return PUnit(), []
    if isinstance(p_ty, TTensor):
        lp, lw = fresh_pattern(p_ty.left, gen)
        rp, rw = fresh_pattern(p_ty.right, gen)
        return PPair(lp, rp), lw + rw
    raise StuckTerm(f"box annotation {p_ty} is not a pattern shape")


def pattern_to_term(p: Pattern) -> Term:
    if isinstance(p, PVar):
        return Var(p.name)
    if isinstance(p, PUnit):
        return UNIT_TERM
    return Pair(pattern_to_term(p.left), pattern_to_term(p.right))


def bind_pattern(p: Pattern, v: Term) -> dict[str, str] | None:
    """Match a pattern against a value of the same shape, yielding the
    wire substitution.  Qubit positions must hold variables."""
    if isinstance(p, PVar):
        if isinstance(v, Var):
            return {p.name: v.name}
        return None
    if isinstance(p, PUnit):
        return {} if isinstance(v, Unit) else None
    if isinstance(p, PPair) and isinstance(v, Pair):
        l = bind_pattern(p.left, v.left)
        r = bind_pattern(p.right, v.right)
        if l is None or r is None:
            return None
        return {**l, **r}
    return None


# ---------------------------------------------------------------------------
# The step function

def step_configuration(
    q: qcalg.Channel, m: Branching, gen: FreshWires
) -> tuple[qcalg.Channel, Branching, str] | None:
    """One deterministic step, or None when every leaf is a value."""
    if branching_is_value(m):
        return None
    if isinstance(q, qcalg.Meas):
        if not isinstance(m, BNode):
            raise StuckTerm("measurement channel paired with a single branch")
        if not branching_is_value(m.left):
            q1, m1, rule = step_configuration(q.if_true, m.left, gen)
            return qcalg.Meas(q.wire, q1, q.if_false), BNode(m1, m.right), f"d.2>{rule}"
        q0, m0, rule = step_configuration(q.if_false, m.right, gen)
        return qcalg.Meas(q.wire, q.if_true, q0), BNode(m.left, m0), f"d.3>{rule}"
    if isinstance(q, (qcalg.Gate, qcalg.Init, qcalg.Free)):
        inner, m2, rule = step_configuration(q.rest, m, gen)
        if isinstance(q, qcalg.Gate):
            rebuilt = qcalg.Gate(q.gate, q.wires, inner)
        elif isinstance(q, qcalg.Init):
            rebuilt = qcalg.Init(q.bit, q.wire, inner)
        else:
            rebuilt = qcalg.Free(q.wire, inner)
        return rebuilt, m2, f"d.4>{rule}"
    if isinstance(q, qcalg.Eps):
        if not isinstance(m, BLeaf):
            raise StuckTerm("leaf channel paired with a branching term")
        return step_term(q.wires, m.term, gen)
    raise TypeError(f"not a channel: {q!r}")


def step_term(
    wires: frozenset[str], t: Term, gen: FreshWires
) -> tuple[qcalg.Channel, Branching, str]:
    """Step the single-leaf state (eps{wires}, t)."""

    # a.1: (fun x -> M) V
    if isinstance(t, App) and isinstance(t.fn, Lam) and is_value(t.arg):
        return qcalg.Eps(wires), BLeaf(substitute(t.fn.body, t.fn.var, t.arg)), "a.1"

    # a.2: let <x, y> = <V, W> in M
    if isinstance(t, LetPair) and isinstance(t.pair, Pair) and is_value(t.pair):
        body = substitute(t.body, t.left_var, t.pair.left)
        body = substitute(body, t.right_var, t.pair.right)
        return qcalg.Eps(wires), BLeaf(body), "a.2"

    # a.3: if tt / if ff
    if isinstance(t, If) and isinstance(t.cond, (TT, FF)):
        chosen = t.then if isinstance(t.cond, TT) else t.els
        return qcalg.Eps(wires), BLeaf(chosen), "a.3"

    # b.1: box_P V opens a fresh channel over the shape of P
    if isinstance(t, App) and isinstance(t.fn, Box) and is_value(t.arg):
        if wires:
            raise StuckTerm("boxing requires an empty wire set")
        pat, new_wires = fresh_pattern(t.fn.pattern_type, gen)
        seed = QChanConst(
            pat,
            qcalg.Eps(frozenset(new_wires)),
            BLeaf(mk_app(t.arg, pattern_to_term(pat))),
        )
        return qcalg.Eps(frozenset()), BLeaf(seed), "b.1"

    # b.2: (unbox (p; Q; u)) V splices the constant into the state
    if (
        isinstance(t, App)
        and isinstance(t.fn, UnboxApplied)
        and isinstance(t.fn.arg, QChanConst)
        and is_value(t.arg)
    ):
        const = t.fn.arg
        sigma = bind_pattern(const.pattern, t.arg)
        if sigma is None:
            raise StuckTerm("unboxed argument does not match the channel's pattern")
        if wires != free_vars(t.arg):
            raise StuckTerm("unboxing requires exactly the argument's wires")
        internal = qcalg.all_wires(const.channel) - set(pattern_vars(const.pattern))
        ren = dict(sigma)
        for w in sorted(internal):
            ren[w] = gen.next()
        channel = _rename_channel_wires(const.channel, ren)
        branches = const.branches
        for old, new in ren.items():
            branches = _map_branches(lambda leaf: substitute(leaf, old, Var(new)), branches)
        return channel, branches, "b.2"

    # struct-qchan: reduce inside a channel constant
    if isinstance(t, QChanConst) and not branching_is_value(t.branches):
        if wires:
            raise StuckTerm("a channel constant cannot hold outer wires")
        stepped = step_configuration(t.channel, t.branches, gen)
        if stepped is None:
            raise StuckTerm("constant reported non-value branches but did not step")
        q2, m2, rule = stepped
        return (
            qcalg.Eps(frozenset()),
            BLeaf(QChanConst(t.pattern, q2, m2)),
            f"struct-qchan>{rule}",
        )

    # c.1 .. c.6: descend into the leftmost non-value position
    for rule, hole, rebuild in _context_split(t):
        hole_wires = wires & free_vars(hole)
        q_sub, m_sub, inner = step_term(hole_wires, hole, gen)
        rest = wires - hole_wires
        q_out = qcalg.extend(q_sub, rest)
        m_out = _map_branches(rebuild, m_sub)
        return q_out, m_out, f"{rule}>{inner}"

    raise StuckTerm(f"no rule applies to {type(t).__name__}")


def _context_split(t: Term):
    """Yield at most one (rule, subterm, rebuild) for the evaluation
    context that applies to t."""
    if isinstance(t, App):
        # rebuilding with mk_app refolds `unbox V` into its value form
        if not is_value(t.fn):
            yield "c.1", t.fn, lambda h: mk_app(h, t.arg)
        elif not is_value(t.arg):
            yield "c.2", t.arg, lambda h: mk_app(t.fn, h)
    elif isinstance(t, UnboxApplied):
        # the argument of a formed unbox is a value by construction
        pass
    elif isinstance(t, Pair):
        if not is_value(t.left):
            yield "c.3", t.left, lambda h: Pair(h, t.right)
        elif not is_value(t.right):
            yield "c.4", t.right, lambda h: Pair(t.left, h)
    elif isinstance(t, If):
        if not is_value(t.cond):
            yield "c.5", t.cond, lambda h: If(h, t.then, t.els)
    elif isinstance(t, LetPair):
        if not is_value(t.pair):
            yield "c.6", t.pair, lambda h: LetPair(t.left_var, t.right_var, h, t.body)


# ---------------------------------------------------------------------------
# Driving loops

def initial_state(term: Term, wires: frozenset[str]) -> tuple[qcalg.Channel, Branching]:
    return qcalg.Eps(wires), BLeaf(term)


def state_names(q: qcalg.Channel, m: Branching) -> set[str]:
    names = set(qcalg.all_wires(q)) | branching_free_vars(m)
    for leaf in branch_leaves(m):
        names |= _deep_names(leaf)
    return names


def _deep_names(t: Term) -> set[str]:
    from .typecheck import _all_names

    return _all_names(t)


def run_to_value(
    q: qcalg.Channel,
    m: Branching,
    fuel: int = 10000,
    gen: FreshWires | None = None,
) -> tuple[qcalg.Channel, Branching, list[Step]]:
    """Reduce until every leaf is a value, recording each step."""
    if gen is None:
        gen = FreshWires(state_names(q, m))
    trace: list[Step] = []
    for _ in range(fuel):
        stepped = step_configuration(q, m, gen)
        if stepped is None:
            return q, m, trace
        q, m, rule = stepped
        trace.append(Step(rule, q, m))
    if step_configuration(q, m, FreshWires(set(gen.taken))) is None:
        return q, m, trace
    raise FuelExhausted(f"no value after {fuel} steps")


# ---------------------------------------------------------------------------
# Equality of states up to renaming of non-protected wires

def states_equal(
    q1: qcalg.Channel,
    m1: Branching,
    q2: qcalg.Channel,
    m2: Branching,
    protected: frozenset[str] = frozenset(),
) -> bool:
    """Structural equality allowing a bijective renaming of wires
    outside the protected set."""
    c1 = _canon_state(q1, m1, protected)
    c2 = _canon_state(q2, m2, protected)
    return c1 is not None and c1 == c2


def _canon_state(q, m, protected: frozenset[str]):
    order: dict[str, str] = {}

    def visit(w: str) -> None:
        if w not in protected and w not in order:
            order[w] = f"#{len(order)}"

    def walk(q) -> None:
        if isinstance(q, qcalg.Eps):
            for w in sorted(q.wires):
                visit(w)
        elif isinstance(q, qcalg.Gate):
            for w in q.wires:
                visit(w)
            walk(q.rest)
        elif isinstance(q, qcalg.Init):
            visit(q.wire)
            walk(q.rest)
        elif isinstance(q, qcalg.Meas):
            visit(q.wire)
            walk(q.if_true)
            walk(q.if_false)
        elif isinstance(q, qcalg.Free):
            visit(q.wire)
            walk(q.rest)

    walk(q)
    ren = {w: n for w, n in order.items()}
    try:
        q_r = _rename_channel_wires(q, ren)
        m_r = m
        for old, new in ren.items():
            m_r = _map_branches(lambda leaf: substitute(leaf, old, Var(new)), m_r)
    except Exception:
        return None
    from .printer import pretty_branching, pretty_channel

    return pretty_channel(q_r), pretty_branching(m_r)
