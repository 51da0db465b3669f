"""Seeded random builders for terms, configurations, and channels.

Terms are grown bottom-up, so every intermediate carries its type and
the exact set of linear variables it consumed; combinators only fire
when their linearity side conditions hold, which makes the well-typed
stream well-typed by construction rather than by filtering.

Two conventions keep the generated terms decidable by both the
production checker and the declarative reference search:

  * open type pivots (application domains, let-pair scrutinee shapes)
    are drawn from a fixed menu, and the menu is planted into the
    typing context as never-used reusable hint variables, so every
    pivot lands in the shared candidate universe;
  * branches of a conditional are built by dedicated shapes (closed
    pairs, gate variants over one variable, a shared subterm, swapped
    pairs) so both branches consume identical resources.

`perturb` damages a case in ways that may or may not preserve
typability; callers assert agreement between checkers, not a label.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from pql import qcalg
from pql.parser import parse_term
from pql.syntax import (
    App,
    BOOL,
    Box,
    FF,
    If,
    Lam,
    LetPair,
    Pair,
    QChanConst,
    QUBIT,
    TBang,
    TChan,
    TLolli,
    TT,
    TTensor,
    Term,
    Type,
    UNIT,
    Unbox,
    UnboxApplied,
    Unit,
    Var,
    branch_leaves,
)

# ---------------------------------------------------------------------------
# Atoms reused across built terms.  Sharing one object per macro keeps
# surface size honest (each use counts as one atom) and lets repeated
# channel constants hit the checker's synthesis cache.

MEAS = parse_term("meas")
FREE = parse_term("free")
INIT_TT = parse_term("init_tt")
INIT_FF = parse_term("init_ff")
GATES1 = {g: parse_term(g) for g in ("H", "S", "T", "X", "Y", "Z")}
GATES2 = {g: parse_term(g) for g in ("CNOT", "CZ")}

CANNED_CHANS: list[tuple[Term, Type]] = [
    (parse_term("qchan(w; H(w); eps{w}; w)"), TBang(TChan(QUBIT, QUBIT))),
    (
        parse_term("qchan(w; meas w { eps{w} | eps{w} }; [free w, free w])"),
        TBang(TChan(QUBIT, UNIT)),
    ),
    (
        parse_term("qchan(w; meas w { free w; eps{} | eps{w} }; [init_tt *, w])"),
        TBang(TChan(QUBIT, QUBIT)),
    ),
]

_ATOMS = {id(MEAS), id(FREE), id(INIT_TT), id(INIT_FF)}
_ATOMS.update(id(t) for t in GATES1.values())
_ATOMS.update(id(t) for t in GATES2.values())
_ATOMS.update(id(t) for t, _ in CANNED_CHANS)

BQ = TTensor(BOOL, QUBIT)
QQ = TTensor(QUBIT, QUBIT)

# pivot menu: choices for application domains and let-pair shapes
SAFE_DOMAINS: list[Type] = [QUBIT, BOOL, UNIT, TBang(BOOL), QQ, BQ]
SAFE_TENSORS: list[TTensor] = [
    BQ,
    QQ,
    TTensor(BOOL, BOOL),
    TTensor(UNIT, QUBIT),
    TTensor(TBang(BOOL), BOOL),
]
HINT_TYPES: list[Type] = SAFE_DOMAINS + SAFE_TENSORS


def hint_inputs() -> dict[str, Type]:
    """Reusable context entries that plant the pivot menu into the
    candidate universe.  Never referenced by generated terms."""
    return {f"_h{i}": TBang(t) for i, t in enumerate(HINT_TYPES)}


def term_size(t: Term) -> int:
    """Surface size: shared macro atoms and channel literals count 1."""
    if id(t) in _ATOMS:
        return 1
    if isinstance(t, Lam):
        return 1 + term_size(t.body)
    if isinstance(t, App):
        return 1 + term_size(t.fn) + term_size(t.arg)
    if isinstance(t, UnboxApplied):
        return 1 + term_size(t.arg)
    if isinstance(t, Pair):
        return 1 + term_size(t.left) + term_size(t.right)
    if isinstance(t, LetPair):
        return 1 + term_size(t.pair) + term_size(t.body)
    if isinstance(t, If):
        return 1 + term_size(t.cond) + term_size(t.then) + term_size(t.els)
    if isinstance(t, QChanConst):
        return 1 + sum(term_size(leaf) for leaf in branch_leaves(t.branches))
    return 1


@dataclass(frozen=True)
class Built:
    term: Term
    ty: Type
    consumed: frozenset[str]


class TermGen:
    def __init__(self, rng: random.Random, max_inits: int = 8):
        self.rng = rng
        self.max_inits = max_inits
        self._inits = 0
        self._names = itertools.count()

    def fresh(self) -> str:
        return f"v{next(self._names)}"

    # entry ------------------------------------------------------------------

    def any_term(self, depth: int, nl: dict, lin: dict, avail: frozenset[str]) -> Built:
        strategies = [
            (3, self._s_var),
            (2, self._s_lit),
            (1, self._s_init),
            (2 if depth > 0 else 0, self._s_gate),
            (2 if depth > 0 else 0, self._s_pair),
            (1 if depth > 0 else 0, self._s_meas),
            (1 if depth > 0 else 0, self._s_free),
            (1 if depth > 0 else 0, self._s_cnot),
            (2 if depth > 0 else 0, self._s_letpair),
            (2 if depth > 0 else 0, self._s_if),
            (1 if depth > 0 else 0, self._s_unbox_app),
            (1 if depth > 0 else 0, self._s_app_lam),
            (1 if depth > 0 else 0, self._s_box),
            (1, self._s_canned),
        ]
        for _ in range(14):
            pick = self._weighted(strategies)
            got = pick(depth, nl, lin, avail)
            if got is not None:
                return got
        return Built(TT(), BOOL, frozenset())

    def _weighted(self, table):
        total = sum(w for w, _ in table)
        roll = self.rng.uniform(0, total)
        for w, f in table:
            roll -= w
            if roll <= 0 and w > 0:
                return f
        return table[0][1]

    # leaf strategies -----------------------------------------------------------

    def _s_lit(self, depth, nl, lin, avail):
        t = self.rng.choice([TT(), FF(), Unit()])
        return Built(t, BOOL if not isinstance(t, Unit) else UNIT, frozenset())

    def _s_var(self, depth, nl, lin, avail):
        names = [n for n in nl if not n.startswith("_h")] + sorted(avail)
        if not names:
            return None
        x = self.rng.choice(names)
        if x in lin:
            return Built(Var(x), lin[x], frozenset({x}))
        return Built(Var(x), nl[x], frozenset())

    def _s_init(self, depth, nl, lin, avail):
        if self._inits >= self.max_inits:
            return None
        self._inits += 1
        macro = INIT_TT if self.rng.random() < 0.5 else INIT_FF
        return Built(App(macro, Unit()), QUBIT, frozenset())

    def _s_canned(self, depth, nl, lin, avail):
        t, ty = self.rng.choice(CANNED_CHANS)
        return Built(t, ty, frozenset())

    # qubit-yielding strategies ----------------------------------------------------

    def _s_gate(self, depth, nl, lin, avail):
        sub = self.typed(QUBIT, depth - 1, nl, lin, avail)
        if sub is None:
            return None
        g = GATES1[self.rng.choice(sorted(GATES1))]
        return Built(App(g, sub.term), QUBIT, sub.consumed)

    def _s_meas(self, depth, nl, lin, avail):
        sub = self.typed(QUBIT, depth - 1, nl, lin, avail)
        if sub is None:
            return None
        return Built(App(MEAS, sub.term), BQ, sub.consumed)

    def _s_free(self, depth, nl, lin, avail):
        sub = self.typed(QUBIT, depth - 1, nl, lin, avail)
        if sub is None:
            return None
        return Built(App(FREE, sub.term), UNIT, sub.consumed)

    def _s_cnot(self, depth, nl, lin, avail):
        a = self.typed(QUBIT, depth - 1, nl, lin, avail)
        if a is None:
            return None
        b = self.typed(QUBIT, depth - 1, nl, lin, avail - a.consumed)
        if b is None:
            return None
        g = GATES2[self.rng.choice(sorted(GATES2))]
        return Built(
            App(g, Pair(a.term, b.term)), QQ, a.consumed | b.consumed
        )

    # structured strategies ----------------------------------------------------------

    def _s_pair(self, depth, nl, lin, avail):
        left = self.any_term(depth - 1, nl, lin, avail)
        right = self.any_term(depth - 1, nl, lin, avail - left.consumed)
        return Built(
            Pair(left.term, right.term),
            TTensor(left.ty, right.ty),
            left.consumed | right.consumed,
        )

    def _s_letpair(self, depth, nl, lin, avail):
        shape = self.rng.choice(SAFE_TENSORS)
        pair = self.typed(shape, depth - 1, nl, lin, avail)
        if pair is None:
            return None
        x, y = self.fresh(), self.fresh()
        nl2, lin2 = dict(nl), dict(lin)
        binders = []
        for name, ty in ((x, shape.left), (y, shape.right)):
            if isinstance(ty, TBang):
                nl2[name] = ty
            else:
                lin2[name] = ty
                binders.append(name)
        inner_avail = (avail - pair.consumed) | frozenset(binders)
        body = self.any_term(depth - 1, nl2, lin2, inner_avail)
        body = self._force_consume(body, [b for b in binders if b not in body.consumed], lin2)
        return Built(
            LetPair(x, y, pair.term, body.term),
            body.ty,
            pair.consumed | (body.consumed - {x, y}),
        )

    def _s_if(self, depth, nl, lin, avail):
        cond = self.typed(BOOL, depth - 1, nl, lin, avail)
        if cond is None:
            return None
        pair = self._branch_pair(depth - 1, nl, lin, avail - cond.consumed)
        if pair is None:
            return None
        then, els, ty, used = pair
        return Built(If(cond.term, then, els), ty, cond.consumed | used)

    def _branch_pair(self, depth, nl, lin, avail):
        """Two branches of one conditional: same type, same linear usage."""
        roll = self.rng.random()
        if roll < 0.3:
            then, els, ty = self.rng.choice(
                [
                    (TT(), FF(), BOOL),
                    (Unit(), Unit(), UNIT),
                    (App(INIT_TT, Unit()), App(INIT_FF, Unit()), QUBIT),
                    (Pair(TT(), Unit()), Pair(FF(), Unit()), TTensor(BOOL, UNIT)),
                ]
            )
            return then, els, ty, frozenset()
        if roll < 0.55:
            qs = [x for x in sorted(avail) if lin.get(x) == QUBIT]
            if qs:
                x = self.rng.choice(qs)
                return (
                    self._maybe_gate(Var(x)),
                    self._maybe_gate(Var(x)),
                    QUBIT,
                    frozenset({x}),
                )
        if roll < 0.7:
            pool = sorted(avail)
            pairs = [
                (a, b)
                for a in pool
                for b in pool
                if a < b and lin[a] == lin[b]
            ]
            if pairs:
                a, b = self.rng.choice(pairs)
                ty = TTensor(lin[a], lin[b])
                return Pair(Var(a), Var(b)), Pair(Var(b), Var(a)), ty, frozenset({a, b})
        shared = self.any_term(depth, nl, lin, avail)
        return shared.term, shared.term, shared.ty, shared.consumed

    def _maybe_gate(self, t: Term) -> Term:
        if self.rng.random() < 0.6:
            return App(GATES1[self.rng.choice(sorted(GATES1))], t)
        return t

    def _s_unbox_app(self, depth, nl, lin, avail):
        arg = self.typed(QUBIT, depth - 1, nl, lin, avail)
        if arg is None:
            return None
        roll = self.rng.random()
        chan_vars = [n for n, ty in nl.items() if ty == TBang(TChan(QUBIT, QUBIT))]
        if roll < 0.4 and chan_vars:
            k = Var(self.rng.choice(sorted(chan_vars)))
            return Built(App(UnboxApplied(k), arg.term), QUBIT, arg.consumed)
        if roll < 0.7:
            k, kty = self.rng.choice(
                [(t, ty) for t, ty in CANNED_CHANS if ty.inner.pattern_type == QUBIT]
            )
            return Built(
                App(UnboxApplied(k), arg.term), kty.inner.out, arg.consumed
            )
        boxed = self._boxed_lam()
        return Built(
            App(App(Unbox(), boxed), arg.term), QUBIT, arg.consumed
        )

    def _s_box(self, depth, nl, lin, avail):
        return Built(self._boxed_lam(), TBang(TChan(QUBIT, QUBIT)), frozenset())

    def _boxed_lam(self) -> Term:
        x = self.fresh()
        body: Term = Var(x)
        for _ in range(self.rng.randint(1, 2)):
            body = App(GATES1[self.rng.choice(sorted(GATES1))], body)
        return App(Box(QUBIT), Lam(x, body))

    def _s_app_lam(self, depth, nl, lin, avail):
        dom = self.rng.choice(SAFE_DOMAINS)
        arg = self.typed(dom, depth - 1, nl, lin, avail)
        if arg is None:
            return None
        x = self.fresh()
        nl2, lin2 = dict(nl), dict(lin)
        if isinstance(dom, TBang):
            nl2[x] = dom
            inner_avail = avail - arg.consumed
        else:
            lin2[x] = dom
            inner_avail = (avail - arg.consumed) | {x}
        body = self.any_term(depth - 1, nl2, lin2, inner_avail)
        if not isinstance(dom, TBang) and x not in body.consumed:
            body = self._force_consume(body, [x], lin2)
        return Built(
            App(Lam(x, body.term), arg.term),
            body.ty,
            arg.consumed | (body.consumed - {x}),
        )

    def _force_consume(self, body: Built, names: list[str], lin: dict) -> Built:
        for x in names:
            body = Built(
                Pair(body.term, Var(x)),
                TTensor(body.ty, lin[x]),
                body.consumed | {x},
            )
        return body

    # type-directed building ------------------------------------------------------

    def typed(self, ty: Type, depth: int, nl: dict, lin: dict, avail: frozenset[str]):
        for _ in range(8):
            got = self._typed_once(ty, depth, nl, lin, avail)
            if got is not None:
                return got
        return None

    def _typed_once(self, ty, depth, nl, lin, avail):
        direct = [x for x in sorted(avail) if lin[x] == ty]
        roll = self.rng.random()
        if direct and roll < 0.45:
            x = self.rng.choice(direct)
            return Built(Var(x), ty, frozenset({x}))
        if ty == QUBIT:
            return self._typed_qubit(depth, nl, lin, avail)
        if ty == BOOL:
            nlb = [n for n, t in nl.items() if t == TBang(BOOL) and not n.startswith("_h")]
            if nlb and roll < 0.6:
                return Built(Var(self.rng.choice(sorted(nlb))), BOOL, frozenset())
            return Built(TT() if self.rng.random() < 0.5 else FF(), BOOL, frozenset())
        if ty == UNIT:
            if depth > 0 and roll < 0.3:
                sub = self.typed(QUBIT, depth - 1, nl, lin, avail)
                if sub is not None:
                    return Built(App(FREE, sub.term), UNIT, sub.consumed)
            return Built(Unit(), UNIT, frozenset())
        if ty == TBang(BOOL):
            return Built(TT() if self.rng.random() < 0.5 else FF(), ty, frozenset())
        if ty == BQ and depth > 0 and roll < 0.6:
            sub = self.typed(QUBIT, depth - 1, nl, lin, avail)
            if sub is not None:
                return Built(App(MEAS, sub.term), BQ, sub.consumed)
        if ty == QQ and depth > 0 and roll < 0.45:
            return self._s_cnot(depth, nl, lin, avail)
        if isinstance(ty, TTensor) and depth > 0:
            left = self.typed(ty.left, depth - 1, nl, lin, avail)
            if left is None:
                return None
            right = self.typed(ty.right, depth - 1, nl, lin, avail - left.consumed)
            if right is None:
                return None
            return Built(
                Pair(left.term, right.term), ty, left.consumed | right.consumed
            )
        return None

    def _typed_qubit(self, depth, nl, lin, avail):
        qs = [x for x in sorted(avail) if lin[x] == QUBIT]
        roll = self.rng.random()
        if qs and roll < 0.5:
            x = self.rng.choice(qs)
            return Built(Var(x), QUBIT, frozenset({x}))
        if depth > 0 and roll < 0.65:
            sub = self.typed(QUBIT, depth - 1, nl, lin, avail)
            if sub is not None:
                return Built(
                    App(GATES1[self.rng.choice(sorted(GATES1))], sub.term),
                    QUBIT,
                    sub.consumed,
                )
        if depth > 0 and roll < 0.8 and qs:
            # measure, branch on the outcome, return the surviving qubit
            x = self.rng.choice(qs)
            b, q = self.fresh(), self.fresh()
            body = If(Var(b), self._maybe_gate(Var(q)), self._maybe_gate(Var(q)))
            return Built(
                LetPair(b, q, App(MEAS, Var(x)), body), QUBIT, frozenset({x})
            )
        if self._inits < self.max_inits:
            self._inits += 1
            macro = INIT_TT if self.rng.random() < 0.5 else INIT_FF
            return Built(App(macro, Unit()), QUBIT, frozenset())
        return None


# ---------------------------------------------------------------------------
# Checker-agreement cases: a context, a term, and a goal

def gen_checker_case(rng: random.Random, max_size: int = 12):
    """One (term, goal, inputs) case with everything linear consumed."""
    for _ in range(40):
        lin: dict[str, Type] = {}
        for i in range(rng.randint(0, 2)):
            lin[f"q{i}"] = QUBIT
        if rng.random() < 0.5:
            lin["b0"] = BOOL
        if rng.random() < 0.35:
            lin["z0"] = rng.choice(SAFE_TENSORS)
        nl: dict[str, Type] = {}
        if rng.random() < 0.4:
            nl["f0"] = TBang(TLolli(QUBIT, QUBIT))
        if rng.random() < 0.3:
            nl["k0"] = TBang(TChan(QUBIT, QUBIT))
        if rng.random() < 0.3:
            nl["c0"] = TBang(BOOL)
        g = TermGen(rng)
        built = g.any_term(rng.randint(2, 4), nl, lin, frozenset(lin))
        if term_size(built.term) > max_size:
            continue
        inputs = dict(nl)
        inputs.update({x: lin[x] for x in built.consumed})
        inputs.update(hint_inputs())
        return built.term, built.ty, inputs
    return TT(), BOOL, hint_inputs()


def perturb(rng: random.Random, term: Term, goal: Type, inputs: dict):
    """Damage a case; the result may or may not stay typable."""
    lin = sorted(n for n, t in inputs.items() if not isinstance(t, TBang))
    kind = rng.choice(["wrong_goal", "dup", "unused", "qubit_cond", "misapply", "swap_goal"])
    if kind == "wrong_goal":
        return term, rng.choice([QUBIT, BOOL, UNIT, TTensor(BOOL, goal)]), inputs
    if kind == "dup" and lin:
        x = rng.choice(lin)
        return Pair(Var(x), term), TTensor(inputs[x], goal), inputs
    if kind == "unused":
        extra = dict(inputs)
        extra["q_spare"] = QUBIT
        return term, goal, extra
    if kind == "qubit_cond" and any(inputs[x] == QUBIT for x in lin):
        x = next(x for x in lin if inputs[x] == QUBIT)
        return If(Var(x), term, term), goal, inputs
    if kind == "misapply":
        return App(term, TT()), BOOL, inputs
    if isinstance(goal, TTensor):
        return term, TTensor(goal.right, goal.left), inputs
    return term, TBang(goal), inputs


# ---------------------------------------------------------------------------
# Configurations: closed programs over a handful of input wires

def gen_config(rng: random.Random, max_size: int = 30):
    """One (term, wire inputs) configuration, all inputs consumed."""
    for _ in range(40):
        k = rng.randint(0, 3)
        lin = {f"q{i}": QUBIT for i in range(k)}
        g = TermGen(rng, max_inits=max(0, 3 - k))
        built = g.any_term(rng.randint(2, 5), {}, lin, frozenset(lin))
        for x in sorted(lin):
            if x not in built.consumed:
                built = Built(
                    Pair(built.term, Var(x)),
                    TTensor(built.ty, QUBIT),
                    built.consumed | {x},
                )
        if term_size(built.term) <= max_size:
            return built.term, dict(lin)
    return App(FREE, App(INIT_TT, Unit())), {}


# ---------------------------------------------------------------------------
# Channels

def gen_channel(rng: random.Random, max_wires: int = 3, max_depth: int = 5):
    """One well-formed channel plus its input wire order."""
    k = rng.randint(0, max_wires)
    order = tuple(f"w{i}" for i in range(k))
    counter = itertools.count(k)

    def go(live: frozenset[str], depth: int) -> qcalg.Channel:
        if depth <= 0 or rng.random() < 0.12:
            return qcalg.Eps(live)
        ops = []
        if live:
            ops += ["gate1", "free", "meas", "meas"]
        if len(live) >= 2:
            ops += ["gate2"]
        if len(live) < max_wires:
            ops += ["init", "init"]
        if not ops:
            return qcalg.Eps(live)
        op = rng.choice(ops)
        if op == "gate1":
            w = rng.choice(sorted(live))
            g = rng.choice(("H", "S", "T", "X", "Y", "Z"))
            return qcalg.Gate(g, (w,), go(live, depth - 1))
        if op == "gate2":
            w1, w2 = rng.sample(sorted(live), 2)
            g = rng.choice(("CNOT", "CZ"))
            return qcalg.Gate(g, (w1, w2), go(live, depth - 1))
        if op == "init":
            w = f"w{next(counter)}"
            return qcalg.Init(rng.random() < 0.5, w, go(live | {w}, depth - 1))
        if op == "free":
            w = rng.choice(sorted(live))
            return qcalg.Free(w, go(live - {w}, depth - 1))
        w = rng.choice(sorted(live))
        return qcalg.Meas(w, go(live, depth - 1), go(live, depth - 1))

    return go(frozenset(order), rng.randint(0, max_depth)), order
