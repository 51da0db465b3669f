"""Linear typechecker.

Contexts split into a nonlinear zone (entries of ! type, freely copied
and dropped) and a linear zone (everything else, used exactly once).
Because a subterm's linear consumption is just the set of linear
variables occurring free in it, the checker verifies linearity instead
of searching for context splits: each judgment reports which linear
entries it consumed, and the rules demand disjointness or equality of
those sets where the system requires it.

Checking is bidirectional.  Synthesis covers variables, literals,
pairs, channel constants, applications headed by something with a
function type, and the boxing idiom; checking handles binders and the
two coercions:

    M : !A  =>  M : A            (dereliction, any term)
    V : A   =>  V : !A           (promotion, values that consumed nothing)

Where neither mode pins down an intermediate type (an application whose
halves are both unsynthesizable), the checker iterates over a finite
candidate universe: subformulas of the context, the goal, the term's
shape annotations, and the synthesized types of its subterms, closed
under one layer of !.  The declarative search in the test suite draws
from the same universe, which keeps the two decision procedures
comparable.

Every accepted judgment is returned as a Derivation tree; the
denotational interpreter walks these trees, so each node records its
rule name, its exact contexts, and rule-specific data in `note`.
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
    TBang,
    TBool,
    TChan,
    TLolli,
    TQubit,
    TTensor,
    TUnit,
    Term,
    Type,
    UNIT,
    BOOL,
    QUBIT,
    Unbox,
    UnboxApplied,
    Unit,
    Var,
    branch_leaves,
    free_vars,
    is_value,
    matches_pattern_type,
    pattern_vars,
)


class TypeCheckError(Exception):
    """Failure report.  `rule` and `where` name the typing rule and the
    innermost subterm in play when checking gave up, when known."""

    rule: str | None = None
    where = None


class LinearityError(TypeCheckError):
    pass


class UnboundVariable(TypeCheckError):
    pass


_RULE_OF = {
    "Var": "var",
    "Unit": "I",
    "TT": "tt",
    "FF": "ff",
    "Lam": "lolli_i",
    "App": "lolli_e",
    "Pair": "tensor_i",
    "LetPair": "tensor_e",
    "If": "if",
    "Box": "box",
    "Unbox": "unbox",
    "UnboxApplied": "lolli_e",
    "QChanConst": "qchan_i",
}


def _note_site(e: TypeCheckError, t: Term) -> None:
    # keep the innermost site: the first frame to see the error wins
    if e.where is None:
        e.where = t
        e.rule = _RULE_OF.get(type(t).__name__)


@dataclass(frozen=True)
class Derivation:
    rule: str
    term: Term
    type: Type
    nl: tuple[tuple[str, Type], ...]
    lin: tuple[tuple[str, Type], ...]
    premises: tuple["Derivation", ...] = ()
    note: tuple = ()


@dataclass(frozen=True)
class BDLeaf:
    deriv: Derivation


@dataclass(frozen=True)
class BDNode:
    left: "BranchingDerivation"
    right: "BranchingDerivation"


BranchingDerivation = BDLeaf | BDNode


def bderiv_leaves(b: BranchingDerivation) -> list[Derivation]:
    if isinstance(b, BDLeaf):
        return [b.deriv]
    return bderiv_leaves(b.left) + bderiv_leaves(b.right)


def is_nonlinear(t: Type) -> bool:
    return isinstance(t, TBang)


def pattern_type_of(p: Pattern) -> Type:
    if isinstance(p, PVar):
        return QUBIT
    if isinstance(p, PUnit):
        return UNIT
    return TTensor(pattern_type_of(p.left), pattern_type_of(p.right))


# ---------------------------------------------------------------------------
# Shadow-free renaming.  The checker (and the evaluator's substitution)
# is simplest when no binder shadows anything in scope, so inputs are
# renamed apart first.  Wire names inside channel constants count as
# in-scope for the constant's own leaves.

def freshen_shadowing(t: Term, avoid: frozenset[str]) -> Term:
    counter = itertools.count()
    taken = set(avoid) | _all_names(t)

    def fresh(base: str) -> str:
        name = base
        while name in taken:
            name = f"{base}_{next(counter)}"
        taken.add(name)
        return name

    def go(t: Term, scope: frozenset[str], ren: dict[str, str]) -> Term:
        if isinstance(t, Var):
            return Var(ren.get(t.name, t.name))
        if isinstance(t, (Unit, TT, FF, Box, Unbox)):
            return t
        if isinstance(t, Lam):
            v = fresh(t.var) if t.var in scope else t.var
            inner = dict(ren)
            inner[t.var] = v
            return Lam(v, go(t.body, scope | {v}, inner))
        if isinstance(t, App):
            return App(go(t.fn, scope, ren), go(t.arg, scope, ren))
        if isinstance(t, UnboxApplied):
            return UnboxApplied(go(t.arg, scope, ren))
        if isinstance(t, Pair):
            return Pair(go(t.left, scope, ren), go(t.right, scope, ren))
        if isinstance(t, LetPair):
            pair = go(t.pair, scope, ren)
            x = fresh(t.left_var) if t.left_var in scope else t.left_var
            inner = dict(ren)
            inner[t.left_var] = x
            y = fresh(t.right_var) if t.right_var in scope | {x} else t.right_var
            inner[t.right_var] = y
            return LetPair(x, y, pair, go(t.body, scope | {x, y}, inner))
        if isinstance(t, If):
            return If(go(t.cond, scope, ren), go(t.then, scope, ren), go(t.els, scope, ren))
        if isinstance(t, QChanConst):
            bound = set(pattern_vars(t.pattern)) | qcalg.all_wires(t.channel)
            inner = {k: v for k, v in ren.items() if k not in bound}
            branches = _map_branch(lambda leaf: go(leaf, scope | bound, inner), t.branches)
            return QChanConst(t.pattern, t.channel, branches)
        raise TypeError(f"not a term: {t!r}")

    return go(t, avoid, {})


def _map_branch(f, m: Branching) -> Branching:
    if isinstance(m, BLeaf):
        return BLeaf(f(m.term))
    return BNode(_map_branch(f, m.left), _map_branch(f, m.right))


def _all_names(t: Term) -> set[str]:
    names: set[str] = set()

    def walk(t: Term) -> None:
        if isinstance(t, Var):
            names.add(t.name)
        elif isinstance(t, Lam):
            names.add(t.var)
            walk(t.body)
        elif isinstance(t, App):
            walk(t.fn)
            walk(t.arg)
        elif isinstance(t, UnboxApplied):
            walk(t.arg)
        elif isinstance(t, Pair):
            walk(t.left)
            walk(t.right)
        elif isinstance(t, LetPair):
            names.add(t.left_var)
            names.add(t.right_var)
            walk(t.pair)
            walk(t.body)
        elif isinstance(t, If):
            walk(t.cond)
            walk(t.then)
            walk(t.els)
        elif isinstance(t, QChanConst):
            names.update(pattern_vars(t.pattern))
            names.update(qcalg.all_wires(t.channel))
            for leaf in branch_leaves(t.branches):
                walk(leaf)

    walk(t)
    return names


# ---------------------------------------------------------------------------
# Candidate universe

def subformulas(t: Type) -> set[Type]:
    out = {t}
    if isinstance(t, (TTensor,)):
        out |= subformulas(t.left) | subformulas(t.right)
    elif isinstance(t, TLolli):
        out |= subformulas(t.arg) | subformulas(t.res)
    elif isinstance(t, TBang):
        out |= subformulas(t.inner)
    elif isinstance(t, TChan):
        out |= subformulas(t.pattern_type) | subformulas(t.out)
    return out


def _annotation_types(t: Term) -> set[Type]:
    out: set[Type] = set()

    def walk(t: Term) -> None:
        if isinstance(t, Box):
            out.add(t.pattern_type)
        elif isinstance(t, QChanConst):
            out.add(pattern_type_of(t.pattern))
            for leaf in branch_leaves(t.branches):
                walk(leaf)
        elif isinstance(t, Lam):
            walk(t.body)
        elif isinstance(t, App):
            walk(t.fn)
            walk(t.arg)
        elif isinstance(t, UnboxApplied):
            walk(t.arg)
        elif isinstance(t, Pair):
            walk(t.left)
            walk(t.right)
        elif isinstance(t, LetPair):
            walk(t.pair)
            walk(t.body)
        elif isinstance(t, If):
            walk(t.cond)
            walk(t.then)
            walk(t.els)

    walk(t)
    return out


def candidate_types(
    ctx_types: list[Type], term: Term, goal: Type | None, checker: "Checker | None" = None
) -> frozenset[Type]:
    """The shared finite type universe for search-driven rules.

    Seeds: context types, the goal, the base types, every shape
    annotation in the term, and the synthesized type of every
    synthesizable subterm.  Closed under subformulas and one extra !.
    """
    seeds: set[Type] = {UNIT, BOOL, QUBIT}
    seeds.update(ctx_types)
    if goal is not None:
        seeds.add(goal)
    seeds.update(_annotation_types(term))
    if checker is not None:
        for sub in _subterms(term):
            got = checker.try_synth_quiet(sub)
            if got is not None:
                seeds.add(got)
    closed: set[Type] = set()
    for s in seeds:
        closed |= subformulas(s)
    return frozenset(closed | {TBang(t) for t in closed})


def _subterms(t: Term):
    yield t
    if isinstance(t, Lam):
        yield from _subterms(t.body)
    elif isinstance(t, App):
        yield from _subterms(t.fn)
        yield from _subterms(t.arg)
    elif isinstance(t, UnboxApplied):
        yield from _subterms(t.arg)
    elif isinstance(t, Pair):
        yield from _subterms(t.left)
        yield from _subterms(t.right)
    elif isinstance(t, LetPair):
        yield from _subterms(t.pair)
        yield from _subterms(t.body)
    elif isinstance(t, If):
        yield from _subterms(t.cond)
        yield from _subterms(t.then)
        yield from _subterms(t.els)
    elif isinstance(t, QChanConst):
        for leaf in branch_leaves(t.branches):
            yield from _subterms(leaf)


# ---------------------------------------------------------------------------
# The checker proper

class Checker:
    def __init__(
        self,
        nl: dict[str, Type],
        lin: dict[str, Type],
        memo: dict | None = None,
    ):
        self.nl = dict(nl)
        self.lin = dict(lin)
        self.universe: frozenset[Type] = frozenset()
        # shared across one top-level check: repeated channel constants
        # (nested boxes splice the same object many times) synthesize once
        self.memo = {} if memo is None else memo

    # helpers ---------------------------------------------------------------

    def nl_tuple(self) -> tuple[tuple[str, Type], ...]:
        return tuple(sorted(self.nl.items()))

    def lin_entries(self, consumed: frozenset[str]) -> tuple[tuple[str, Type], ...]:
        return tuple(sorted((n, self.lin[n]) for n in consumed))

    def scoped(self, extra_nl: dict[str, Type], extra_lin: dict[str, Type]) -> "Checker":
        child = Checker({**self.nl, **extra_nl}, {**self.lin, **extra_lin}, memo=self.memo)
        child.universe = self.universe
        return child

    def try_synth_quiet(self, term: Term) -> Type | None:
        try:
            d, _ = self.synth(term)
            return d.type
        except TypeCheckError:
            return None

    def _node(self, rule, term, ty, consumed, premises, note=()) -> Derivation:
        return Derivation(rule, term, ty, self.nl_tuple(), self.lin_entries(consumed), premises, note)

    def fits(self, d: Derivation, consumed: frozenset[str], goal: Type) -> Derivation | None:
        """Coerce d's type to goal with dereliction / promotion wrappers."""
        chain = [d.type]
        while isinstance(chain[-1], TBang):
            chain.append(chain[-1].inner)
        # plain dereliction
        for k, s in enumerate(chain):
            if s == goal:
                out = d
                for i in range(k):
                    out = self._node("d", d.term, chain[i + 1], consumed, (out,))
                return out
        # dereliction then promotion, values that consumed nothing only
        if is_value(d.term) and not consumed:
            g = goal
            adds = 0
            while isinstance(g, TBang):
                g = g.inner
                adds += 1
            if adds and g in chain:
                k = chain.index(g)
                out = d
                for i in range(k):
                    out = self._node("d", d.term, chain[i + 1], consumed, (out,))
                ty = g
                for _ in range(adds):
                    ty = TBang(ty)
                    out = self._node("p", d.term, ty, consumed, (out,))
                return out
        return None

    # synthesis ---------------------------------------------------------------

    def synth(self, t: Term) -> tuple[Derivation, frozenset[str]]:
        try:
            return self._synth_dispatch(t)
        except TypeCheckError as e:
            _note_site(e, t)
            raise

    def _synth_dispatch(self, t: Term) -> tuple[Derivation, frozenset[str]]:
        none = frozenset()

        # G, (x : A) |- x : A
        if isinstance(t, Var):
            if t.name in self.lin:
                c = frozenset({t.name})
                return self._node("var", t, self.lin[t.name], c, (), (t.name,)), c
            if t.name in self.nl:
                return self._node("var", t, self.nl[t.name], none, (), (t.name,)), none
            raise UnboundVariable(f"unbound variable {t.name!r}")

        # !D |- * : I        !D |- tt : bool      !D |- ff : bool
        if isinstance(t, Unit):
            return self._node("I", t, UNIT, none, ()), none
        if isinstance(t, TT):
            return self._node("tt", t, BOOL, none, ()), none
        if isinstance(t, FF):
            return self._node("ff", t, BOOL, none, ()), none

        # G_a |- M : A   G_b |- N : B   =>   G_a, G_b |- <M, N> : A * B
        if isinstance(t, Pair):
            dl, cl = self.synth(t.left)
            dr, cr = self.synth(t.right)
            self._disjoint(cl, cr, t)
            c = cl | cr
            return self._node("tensor_i", t, TTensor(dl.type, dr.type), c, (dl, dr)), c

        if isinstance(t, App):
            return self._synth_app(t)

        # unbox applied to a channel value: the residual function P -o A
        if isinstance(t, UnboxApplied):
            da, ca = self.synth(t.arg)
            da, chan_ty = self._strip_to(da, ca, TChan, t.arg)
            fn_ty = TLolli(chan_ty.pattern_type, chan_ty.out)
            unbox_d = self._node("unbox", Unbox(), TLolli(chan_ty, fn_ty), frozenset(), (),
                                 (chan_ty.pattern_type, chan_ty.out))
            return self._node("lolli_e", t, fn_ty, ca, (unbox_d, da)), ca

        if isinstance(t, LetPair):
            try:
                dp, cp = self.synth(t.pair)
                dp, tensor_ty = self._strip_to(dp, cp, TTensor, t.pair)
                body_checker = self._bind_pair(t, tensor_ty)
                db, cb = body_checker.synth(t.body)
                return self._finish_letpair(t, dp, cp, db, cb, tensor_ty, None)
            except TypeCheckError:
                pass
            # the scrutinee's own type may bind the pair too rigidly:
            # retry with every tensor shape the universe offers
            for cand in sorted(self.universe, key=_type_key):
                if not isinstance(cand, TTensor):
                    continue
                try:
                    dp, cp = self.chk(t.pair, cand)
                    body_checker = self._bind_pair(t, cand)
                    db, cb = body_checker.synth(t.body)
                    return self._finish_letpair(t, dp, cp, db, cb, cand, None)
                except TypeCheckError:
                    continue
            raise TypeCheckError("let-pair scrutinee has no workable tensor type")

        if isinstance(t, If):
            dc, cc = self.chk(t.cond, BOOL)
            dt, ct = self.synth(t.then)
            de, ce = self.synth(t.els)
            common = self._common_type(dt, ct, de, ce)
            if common is None:
                raise TypeCheckError(
                    f"if branches disagree: {dt.type} vs {de.type}"
                )
            dt2 = self.fits(dt, ct, common)
            de2 = self.fits(de, ce, common)
            return self._finish_if(t, dc, cc, dt2, ct, de2, ce, common)

        if isinstance(t, QChanConst):
            return self._synth_qchan(t, None)

        raise TypeCheckError(f"cannot synthesize a type for {type(t).__name__}")

    def _synth_app(self, t: App) -> tuple[Derivation, frozenset[str]]:
        # box_P V : the argument determines the output type
        if isinstance(t.fn, Box):
            return self._app_box(t, None)
        # unbox M for a not-yet-value M: same shape as the folded form
        if isinstance(t.fn, Unbox):
            da, ca = self.synth(t.arg)
            da, chan_ty = self._strip_to(da, ca, TChan, t.arg)
            fn_ty = TLolli(chan_ty.pattern_type, chan_ty.out)
            unbox_d = self._node("unbox", Unbox(), TLolli(chan_ty, fn_ty), frozenset(), (),
                                 (chan_ty.pattern_type, chan_ty.out))
            return self._node("lolli_e", t, fn_ty, ca, (unbox_d, da)), ca
        df_cf = None
        try:
            df_cf = self.synth(t.fn)
        except TypeCheckError:
            pass
        if df_cf is not None:
            # G_a |- M : A -o B   G_b |- N : A   =>   G_a, G_b |- M N : B
            df, cf = df_cf
            df, fn_ty = self._strip_to(df, cf, TLolli, t.fn)
            da, ca = self.chk(t.arg, fn_ty.arg)
            self._disjoint(cf, ca, t)
            c = cf | ca
            return self._node("lolli_e", t, fn_ty.res, c, (df, da)), c
        raise TypeCheckError("application head is not synthesizable")

    def _app_box(self, t: App, goal: Type | None) -> tuple[Derivation, frozenset[str]]:
        # !D |- box_P : !(P -o A) -o !QChan(P, A)
        p_ty = t.fn.pattern_type
        if goal is not None:
            core = goal
            while isinstance(core, TBang):
                core = core.inner
            if not (isinstance(core, TChan) and core.pattern_type == p_ty):
                raise TypeCheckError(f"box over {p_ty} cannot produce {goal}")
            out_ty = core.out
            da, ca = self.chk(t.arg, TBang(TLolli(p_ty, out_ty)))
        else:
            da, ca = self._synth_box_arg(t.arg, p_ty)
            stripped = da.type
            while isinstance(stripped, TBang):
                stripped = stripped.inner
            if not isinstance(stripped, TLolli):
                raise TypeCheckError(f"box argument has type {da.type}, not a function")
            out_ty = stripped.res
            want = TBang(TLolli(p_ty, out_ty))
            da2 = self.fits(da, ca, want)
            if da2 is None:
                raise TypeCheckError(f"box argument has type {da.type}, not {want}")
            da = da2
        result = TBang(TChan(p_ty, out_ty))
        box_d = self._node("box", t.fn, TLolli(TBang(TLolli(p_ty, out_ty)), result),
                           frozenset(), (), (p_ty, out_ty))
        d = self._node("lolli_e", t, result, ca, (box_d, da))
        if goal is not None:
            d2 = self.fits(d, ca, goal)
            if d2 is None:
                raise TypeCheckError(f"box produces {result}, wanted {goal}")
            d = d2
        return d, ca

    def _synth_box_arg(self, arg: Term, p_ty: Type) -> tuple[Derivation, frozenset[str]]:
        if isinstance(arg, Lam):
            dom_nl, dom_lin = ({}, {arg.var: p_ty})
            body_checker = self.scoped(dom_nl, dom_lin)
            db, cb = body_checker.synth(arg.body)
            if arg.var not in cb:
                raise LinearityError(f"binder {arg.var!r} unused")
            c = cb - {arg.var}
            d = self._node("lolli_i", arg, TLolli(p_ty, db.type), c, (db,),
                           (arg.var, p_ty, True))
            return d, c
        return self.synth(arg)

    def _synth_qchan(self, t: QChanConst, goal_out: Type | None) -> tuple[Derivation, frozenset[str]]:
        # the key pins everything the result can depend on; t itself is
        # stored in the entry so the id stays valid for the memo's life
        key = (id(t), self.nl_tuple(), frozenset(self.lin), self.universe, goal_out)
        hit = self.memo.get(key)
        if hit is not None:
            tag, payload, _pin = hit
            if tag == "ok":
                return payload, frozenset()
            raise TypeCheckError(payload)
        try:
            d, c = self._synth_qchan_inner(t, goal_out)
        except TypeCheckError as e:
            self.memo[key] = ("err", str(e), t)
            raise
        self.memo[key] = ("ok", d, t)
        return d, c

    def _synth_qchan_inner(self, t: QChanConst, goal_out: Type | None) -> tuple[Derivation, frozenset[str]]:
        # p matches P   vBind(!D, out(Q), m, A)   =>   !D |- (p; Q; m) : !QChan(P, A)
        p_ty = pattern_type_of(t.pattern)
        if not matches_pattern_type(t.pattern, p_ty):
            raise TypeCheckError("channel constant pattern repeats a variable")
        t = self._rename_wires_apart(t)
        try:
            bunch = qcalg.validate(t.channel, frozenset(pattern_vars(t.pattern)))
        except qcalg.ChannelError as e:
            raise TypeCheckError(f"invalid channel in constant: {e}") from None
        wire_sets = qcalg.bunch_leaves(bunch)
        leaves = branch_leaves(t.branches)
        if len(wire_sets) != len(leaves) or not _same_shape(bunch, t.branches):
            raise TypeCheckError("channel branch tree and term branches have different shapes")
        derivs = []
        types = []
        for wires, leaf in zip(wire_sets, leaves):
            leaf_checker = Checker(self.nl, {w: QUBIT for w in sorted(wires)}, memo=self.memo)
            leaf_checker.universe = self.universe
            if goal_out is not None:
                d, c = leaf_checker.chk(leaf, goal_out)
            else:
                d, c = self._leaf_synth_or_candidates(leaf_checker, leaf)
            if c != frozenset(wires):
                missing = sorted(frozenset(wires) - c)
                raise LinearityError(f"channel branch does not consume wires {missing}")
            derivs.append((d, c, leaf_checker))
            types.append(d.type)
        if goal_out is None:
            common = self._common_of(types[0], types)
            if common is None:
                raise TypeCheckError(f"channel branches disagree: {types}")
            fixed = []
            for (d, c, lc) in derivs:
                d2 = lc.fits(d, c, common)
                if d2 is None:
                    raise TypeCheckError(f"channel branch type {d.type} does not fit {common}")
                fixed.append(d2)
        else:
            common = goal_out
            fixed = [d for (d, c, lc) in derivs]
        ty = TBang(TChan(p_ty, common))
        note = (t.pattern, t.channel, p_ty, tuple(tuple(sorted(w)) for w in wire_sets))
        return self._node("qchan_i", t, ty, frozenset(), tuple(fixed), note), frozenset()

    def _leaf_synth_or_candidates(self, leaf_checker: "Checker", leaf: Term):
        # a branch left unsynthesizable mid-reduction (a bare redex, say)
        # may still check against a type from the shared universe
        try:
            return leaf_checker.synth(leaf)
        except TypeCheckError:
            pass
        for cand in sorted(self.universe, key=_type_key):
            try:
                return leaf_checker.chk(leaf, cand)
            except TypeCheckError:
                continue
        raise TypeCheckError("channel branch has no synthesizable type")

    def _rename_wires_apart(self, t: QChanConst) -> QChanConst:
        # vBind demands the constant's wires stay clear of ambient names
        from .eval import substitute  # local import: eval depends on syntax only

        taken = set(self.nl) | set(self.lin)
        wires = set(pattern_vars(t.pattern)) | qcalg.all_wires(t.channel)
        clashes = sorted(wires & taken)
        if not clashes:
            return t
        avoid = set(taken) | wires
        for leaf in branch_leaves(t.branches):
            avoid |= free_vars(leaf)
        ren: dict[str, str] = {}
        counter = itertools.count()
        for w in clashes:
            nw = w
            while nw in avoid:
                nw = f"{w}_{next(counter)}"
            avoid.add(nw)
            ren[w] = nw
        channel = _rename_channel(t.channel, ren)
        pattern = _rename_pattern(t.pattern, ren)
        branches = t.branches
        for old, new in ren.items():
            branches = _map_branch(lambda leaf: substitute(leaf, old, Var(new)), branches)
        return QChanConst(pattern, channel, branches)

    # checking ----------------------------------------------------------------

    def chk(self, t: Term, goal: Type) -> tuple[Derivation, frozenset[str]]:
        try:
            return self._chk_dispatch(t, goal)
        except TypeCheckError as e:
            _note_site(e, t)
            raise

    def _chk_dispatch(self, t: Term, goal: Type) -> tuple[Derivation, frozenset[str]]:
        try:
            d, c = self.synth(t)
        except TypeCheckError:
            d, c = None, frozenset()
        if d is not None:
            fitted = self.fits(d, c, goal)
            if fitted is not None:
                return fitted, c
        return self._chk_structural(t, goal)

    def _chk_structural(self, t: Term, goal: Type) -> tuple[Derivation, frozenset[str]]:
        # V : A, nothing consumed   =>   V : !A
        if isinstance(goal, TBang) and is_value(t):
            try:
                d, c = self.chk(t, goal.inner)
                if not c:
                    return self._node("p", t, goal, c, (d,)), c
            except TypeCheckError:
                pass

        # G, (x : A) |- M : B   =>   G |- fun x -> M : A -o B
        if isinstance(t, Lam) and isinstance(goal, TLolli):
            dom = goal.arg
            if is_nonlinear(dom):
                body_checker = self.scoped({t.var: dom}, {})
            else:
                body_checker = self.scoped({}, {t.var: dom})
            db, cb = body_checker.chk(t.body, goal.res)
            if not is_nonlinear(dom):
                if t.var not in cb:
                    raise LinearityError(f"binder {t.var!r} unused")
                cb = cb - {t.var}
            return self._node("lolli_i", t, goal, cb, (db,), (t.var, dom, not is_nonlinear(dom))), cb

        if isinstance(t, Pair) and isinstance(goal, TTensor):
            dl, cl = self.chk(t.left, goal.left)
            dr, cr = self.chk(t.right, goal.right)
            self._disjoint(cl, cr, t)
            c = cl | cr
            return self._node("tensor_i", t, goal, c, (dl, dr)), c

        # G_a |- M : bool   G_b |- N_i : A   =>   G_a, G_b |- if M ... : A
        if isinstance(t, If):
            dc, cc = self.chk(t.cond, BOOL)
            dt, ct = self.chk(t.then, goal)
            de, ce = self.chk(t.els, goal)
            return self._finish_if(t, dc, cc, dt, ct, de, ce, goal)

        if isinstance(t, LetPair):
            try:
                dp, cp = self.synth(t.pair)
                dp, tensor_ty = self._strip_to(dp, cp, TTensor, t.pair)
                body_checker = self._bind_pair(t, tensor_ty)
                db, cb = body_checker.chk(t.body, goal)
                return self._finish_letpair(t, dp, cp, db, cb, tensor_ty, goal)
            except TypeCheckError:
                pass
            for cand in sorted(self.universe, key=_type_key):
                if not isinstance(cand, TTensor):
                    continue
                try:
                    dp, cp = self.chk(t.pair, cand)
                    body_checker = self._bind_pair(t, cand)
                    db, cb = body_checker.chk(t.body, goal)
                    return self._finish_letpair(t, dp, cp, db, cb, cand, goal)
                except TypeCheckError:
                    continue
            raise TypeCheckError("let-pair scrutinee has no tensor type")

        if isinstance(t, QChanConst):
            core = goal
            strips = 0
            while isinstance(core, TBang):
                core = core.inner
                strips += 1
            if isinstance(core, TChan):
                if pattern_type_of(t.pattern) != core.pattern_type:
                    raise TypeCheckError(
                        f"channel pattern has shape {pattern_type_of(t.pattern)}, wanted {core.pattern_type}"
                    )
                d, c = self._synth_qchan(t, core.out)
                fitted = self.fits(d, c, goal)
                if fitted is None:
                    raise TypeCheckError(f"channel constant types as {d.type}, wanted {goal}")
                return fitted, c

        if isinstance(t, UnboxApplied) and isinstance(goal, TLolli):
            da, ca = self.chk(t.arg, TChan(goal.arg, goal.res))
            unbox_d = self._node("unbox", Unbox(), TLolli(TChan(goal.arg, goal.res), goal),
                                 frozenset(), (), (goal.arg, goal.res))
            return self._node("lolli_e", t, goal, ca, (unbox_d, da)), ca

        if isinstance(t, App):
            if isinstance(t.fn, Box):
                return self._app_box(t, goal)
            if isinstance(t.fn, Unbox) and isinstance(goal, TLolli):
                da, ca = self.chk(t.arg, TChan(goal.arg, goal.res))
                unbox_d = self._node("unbox", Unbox(), TLolli(TChan(goal.arg, goal.res), goal),
                                     frozenset(), (), (goal.arg, goal.res))
                return self._node("lolli_e", t, goal, ca, (unbox_d, da)), ca
            # argument-first: a synthesizable argument pins the domain
            try:
                da, ca = self.synth(t.arg)
            except TypeCheckError:
                da = None
            if da is not None:
                for arg_ty in self._coercion_targets(da, ca):
                    try:
                        df, cf = self.chk(t.fn, TLolli(arg_ty, goal))
                        da2 = self.fits(da, ca, arg_ty)
                        if da2 is None:
                            continue
                        self._disjoint(cf, ca, t)
                        c = cf | ca
                        return self._node("lolli_e", t, goal, c, (df, da2)), c
                    except TypeCheckError:
                        continue
            # last resort: iterate the shared candidate universe
            for cand in sorted(self.universe, key=_type_key):
                try:
                    df, cf = self.chk(t.fn, TLolli(cand, goal))
                    da3, ca3 = self.chk(t.arg, cand)
                    self._disjoint(cf, ca3, t)
                    c = cf | ca3
                    return self._node("lolli_e", t, goal, c, (df, da3)), c
                except TypeCheckError:
                    continue
            raise TypeCheckError(f"cannot give the application type {goal}")

        if isinstance(t, Box):
            core = goal
            while isinstance(core, TBang):
                core = core.inner
            want = _box_shape(core, t.pattern_type)
            if want is not None:
                d = self._node("box", t, core, frozenset(), (), (t.pattern_type, want))
                fitted = self.fits(d, frozenset(), goal)
                if fitted is not None:
                    return fitted, frozenset()
            raise TypeCheckError(f"box over {t.pattern_type} does not have type {goal}")

        if isinstance(t, Unbox):
            core = goal
            while isinstance(core, TBang):
                core = core.inner
            shape = _unbox_shape(core)
            if shape is not None:
                d = self._node("unbox", t, core, frozenset(), (), shape)
                fitted = self.fits(d, frozenset(), goal)
                if fitted is not None:
                    return fitted, frozenset()
            raise TypeCheckError(f"unbox does not have type {goal}")

        raise TypeCheckError(f"term does not have type {goal}")

    # shared rule tails -------------------------------------------------------

    def _bind_pair(self, t: LetPair, tensor_ty: TTensor) -> "Checker":
        extra_nl, extra_lin = {}, {}
        for name, ty in ((t.left_var, tensor_ty.left), (t.right_var, tensor_ty.right)):
            (extra_nl if is_nonlinear(ty) else extra_lin)[name] = ty
        return self.scoped(extra_nl, extra_lin)

    def _finish_letpair(self, t, dp, cp, db, cb, tensor_ty, goal):
        # G_a |- M : A * B   G_b, (x : A), (y : B) |- N : C
        for name, ty in ((t.left_var, tensor_ty.left), (t.right_var, tensor_ty.right)):
            if not is_nonlinear(ty) and name not in cb:
                raise LinearityError(f"binder {name!r} unused")
        cb = cb - {t.left_var, t.right_var}
        self._disjoint(cp, cb, t)
        c = cp | cb
        note = (t.left_var, t.right_var, tensor_ty.left, tensor_ty.right)
        return self._node("tensor_e", t, db.type, c, (dp, db), note), c

    def _finish_if(self, t, dc, cc, dt, ct, de, ce, goal):
        if dt is None or de is None:
            raise TypeCheckError("if branches disagree")
        if ct != ce:
            raise LinearityError(
                f"if branches consume different resources: {sorted(ct)} vs {sorted(ce)}"
            )
        self._disjoint(cc, ct, t)
        c = cc | ct
        return self._node("if", t, dt.type, c, (dc, dt, de)), c

    # small utilities ---------------------------------------------------------

    def _disjoint(self, a: frozenset[str], b: frozenset[str], t: Term) -> None:
        dup = a & b
        if dup:
            raise LinearityError(f"linear variables used twice: {sorted(dup)}")

    def _strip_to(self, d: Derivation, c: frozenset[str], shape, at: Term):
        ty = d.type
        while isinstance(ty, TBang):
            ty = ty.inner
            d = self._node("d", d.term, ty, c, (d,))
        if not isinstance(ty, shape):
            raise TypeCheckError(f"expected a {shape.__name__} type, got {d.type}")
        return d, ty

    def _coercion_targets(self, d: Derivation, c: frozenset[str]) -> list[Type]:
        """Types d's term can be coerced to, most specific first."""
        chain = [d.type]
        while isinstance(chain[-1], TBang):
            chain.append(chain[-1].inner)
        out = list(chain)
        if is_value(d.term) and not c:
            out.extend(TBang(s) for s in chain if TBang(s) not in out)
        return out

    def _common_of(self, first: Type, types: list[Type]) -> Type | None:
        common = first
        for ty in types:
            common = self._common_type_pair(common, ty)
            if common is None:
                return None
        return common

    def _common_type(self, dt, ct, de, ce) -> Type | None:
        if dt.type == de.type:
            return dt.type
        # prefer a type both branches reach; try each side's chain
        for cand in self._coercion_targets(dt, ct):
            if self.fits(de, ce, cand) is not None and self.fits(dt, ct, cand) is not None:
                return cand
        for cand in self._coercion_targets(de, ce):
            if self.fits(dt, ct, cand) is not None and self.fits(de, ce, cand) is not None:
                return cand
        return None

    def _common_type_pair(self, a: Type, b: Type) -> Type | None:
        if a == b:
            return a
        chain_a = [a]
        while isinstance(chain_a[-1], TBang):
            chain_a.append(chain_a[-1].inner)
        chain_b = [b]
        while isinstance(chain_b[-1], TBang):
            chain_b.append(chain_b[-1].inner)
        for s in chain_a:
            if s in chain_b:
                return s
        return None


def _same_shape(bunch: qcalg.Bunch, m: Branching) -> bool:
    if isinstance(bunch, qcalg.BunchLeaf):
        return isinstance(m, BLeaf)
    return (
        isinstance(m, BNode)
        and _same_shape(bunch.left, m.left)
        and _same_shape(bunch.right, m.right)
    )


def _box_shape(core: Type, p_ty: Type) -> Type | None:
    # !(P -o A) -o !QChan(P, A), for the P written on the box
    if (
        isinstance(core, TLolli)
        and isinstance(core.arg, TBang)
        and isinstance(core.arg.inner, TLolli)
        and core.arg.inner.arg == p_ty
        and isinstance(core.res, TBang)
        and isinstance(core.res.inner, TChan)
        and core.res.inner.pattern_type == p_ty
        and core.res.inner.out == core.arg.inner.res
    ):
        return core.arg.inner.res
    return None


def _unbox_shape(core: Type) -> tuple[Type, Type] | None:
    # QChan(P, A) -o (P -o A)
    if (
        isinstance(core, TLolli)
        and isinstance(core.arg, TChan)
        and isinstance(core.res, TLolli)
        and core.res.arg == core.arg.pattern_type
        and core.res.res == core.arg.out
    ):
        return (core.arg.pattern_type, core.arg.out)
    return None


def _rename_channel(q, ren: dict[str, str]):
    r = lambda w: ren.get(w, w)
    if isinstance(q, qcalg.Eps):
        return qcalg.Eps(frozenset(r(w) for w in q.wires))
    if isinstance(q, qcalg.Gate):
        return qcalg.Gate(q.gate, tuple(r(w) for w in q.wires), _rename_channel(q.rest, ren))
    if isinstance(q, qcalg.Init):
        return qcalg.Init(q.bit, r(q.wire), _rename_channel(q.rest, ren))
    if isinstance(q, qcalg.Meas):
        return qcalg.Meas(r(q.wire), _rename_channel(q.if_true, ren), _rename_channel(q.if_false, ren))
    if isinstance(q, qcalg.Free):
        return qcalg.Free(r(q.wire), _rename_channel(q.rest, ren))
    raise TypeError(f"not a channel: {q!r}")


def _rename_pattern(p: Pattern, ren: dict[str, str]) -> Pattern:
    if isinstance(p, PVar):
        return PVar(ren.get(p.name, p.name))
    if isinstance(p, PUnit):
        return p
    return PPair(_rename_pattern(p.left, ren), _rename_pattern(p.right, ren))


def _type_key(t: Type):
    return repr(t)


# ---------------------------------------------------------------------------
# Entry points

def split_inputs(inputs: dict[str, Type]) -> tuple[dict[str, Type], dict[str, Type]]:
    nl = {n: t for n, t in inputs.items() if is_nonlinear(t)}
    lin = {n: t for n, t in inputs.items() if not is_nonlinear(t)}
    return nl, lin


def check_term(term: Term, goal: Type | None = None, inputs: dict[str, Type] | None = None) -> Derivation:
    """Typecheck term (inferring a type when goal is None) and return
    the derivation.  Every linear input must be consumed."""
    inputs = inputs or {}
    nl, lin = split_inputs(inputs)
    term = freshen_shadowing(term, frozenset(inputs))
    checker = Checker(nl, lin)
    checker.universe = candidate_types(list(inputs.values()), term, goal, checker)
    if goal is None:
        d, c = checker.synth(term)
        # reusable values surface at their promoted type
        if is_value(term) and not c and not isinstance(d.type, TBang):
            d = checker._node("p", term, TBang(d.type), c, (d,))
    else:
        d, c = checker.chk(term, goal)
    leftover = frozenset(lin) - c
    if leftover:
        raise LinearityError(f"unused linear inputs: {sorted(leftover)}")
    return d


def infer_type(term: Term, inputs: dict[str, Type] | None = None) -> Type:
    return check_term(term, None, inputs).type


def check_vbind(
    nl: dict[str, Type],
    wires: frozenset[str],
    leaf: Term,
    goal: Type | None,
    memo: dict | None = None,
) -> Derivation:
    """One branch of a channel binding: the leaf is typed with exactly
    the branch's output wires as its linear context."""
    checker = Checker(nl, {w: QUBIT for w in sorted(wires)}, memo=memo)
    leaf = freshen_shadowing(leaf, frozenset(nl) | wires)
    checker.universe = candidate_types(list(nl.values()) + [QUBIT], leaf, goal, checker)
    if goal is None:
        d, c = checker.synth(leaf)
    else:
        d, c = checker.chk(leaf, goal)
    if c != wires:
        raise LinearityError(f"branch must consume wires {sorted(wires)}, consumed {sorted(c)}")
    return d


def check_branching(
    bunch: qcalg.Bunch,
    m: Branching,
    goal: Type | None,
    nl: dict[str, Type] | None = None,
    memo: dict | None = None,
) -> tuple[Type, BranchingDerivation]:
    """Type a branching term against the wire bunch of its channel."""
    nl = nl or {}
    if memo is None:
        memo = {}
    if isinstance(bunch, qcalg.BunchLeaf):
        if not isinstance(m, BLeaf):
            raise TypeCheckError("branch tree is deeper than the channel's")
        d = check_vbind(nl, bunch.wires, m.term, goal, memo=memo)
        if goal is None:
            # a lone leaf may still need reconciling by the caller
            pass
        return d.type, BDLeaf(d)
    if not isinstance(m, BNode):
        raise TypeCheckError("channel branches but the term does not")
    lt, ld = check_branching(bunch.left, m.left, goal, nl, memo=memo)
    rt, rd = check_branching(bunch.right, m.right, goal, nl, memo=memo)
    if goal is None and lt != rt:
        raise TypeCheckError(f"branches disagree: {lt} vs {rt}")
    return lt, BDNode(ld, rd)


def check_configuration(
    q: qcalg.Channel,
    m: Branching,
    wires: frozenset[str],
    goal: Type | None = None,
) -> tuple[Type, BranchingDerivation]:
    """Type a machine state: the channel must be valid on the input
    wires and each branch's term must consume that branch's outputs."""
    try:
        bunch = qcalg.validate(q, wires)
    except qcalg.ChannelError as e:
        raise TypeCheckError(f"invalid channel: {e}") from None
    memo: dict = {}
    if goal is not None:
        return check_branching(bunch, m, goal, memo=memo)
    # infer: synthesize every leaf, then re-check against a common type
    leaves = branch_leaves(m)
    wire_sets = qcalg.bunch_leaves(bunch)
    if len(leaves) != len(wire_sets) or not _same_shape(bunch, m):
        raise TypeCheckError("channel branch tree and term branches have different shapes")
    types = []
    for ws, leaf in zip(wire_sets, leaves):
        types.append(check_vbind({}, ws, leaf, None, memo=memo).type)
    helper = Checker({}, {})
    common = types[0]
    for ty in types[1:]:
        got = helper._common_type_pair(common, ty)
        if got is None:
            raise TypeCheckError(f"branches disagree: {types}")
        common = got
    return check_branching(bunch, m, common, memo=memo)
