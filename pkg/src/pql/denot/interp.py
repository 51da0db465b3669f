"""Denotational interpretation of typing derivations and channels.

Types denote indexed families of wire bundles.  A typing derivation
denotes a Kleisli morphism for the branching monad: each point of the
context object is sent to a multiset of result indices together with a
block morphism of completely positive maps into their shapes.

Function, boxed, and channel types have index sets that are not
enumerated up front: their points are met one at a time as closures,
global elements, and channel elements.  Within one interpreter run they
are compared by creation identity; across runs they are compared
extensionally, pointwise at enumerable argument types.

Wire order convention: wherever a set of live wires becomes a qubit
register, the register lists the wires sorted by name.  A context
register follows the context entry order, which is name-sorted per
zone, nonlinear entries first (those are all zero-width).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import qcalg
from ..syntax import (
    PUnit,
    PVar,
    Pattern,
    TBang,
    TBool,
    TChan,
    TLolli,
    TQubit,
    TTensor,
    TUnit,
    Type,
)
from ..typecheck import (
    BDLeaf,
    BranchingDerivation,
    Derivation,
)
from . import category as cat
from . import cpmap
from .category import BMor, FVal, KMor, Obj, bmor_identity, bmor_single, fval_sorted


class DenotError(Exception):
    pass


# ---------------------------------------------------------------------------
# Semantic points of the non-enumerable types

class SemClosure(cat.Opaque):
    """A point of a function type: the shape of its captured linear
    state plus a map from argument indices to branching results."""

    __slots__ = ("dom_type", "cod_type", "state_shape", "apply")

    def __init__(self, dom_type, cod_type, state_shape, apply):
        super().__init__()
        self.dom_type = dom_type
        self.cod_type = cod_type
        self.state_shape = state_shape
        self.apply = apply  # argument index -> FVal, dom (state+arg,)


class GlobalElem(cat.Opaque):
    """A point of a ! type: an index of the underlying type together
    with the preparation that rebuilds its state from nothing."""

    __slots__ = ("index", "cp", "inner_type")

    def __init__(self, index, cp: BMor, inner_type):
        super().__init__()
        self.index = index
        self.cp = cp  # BMor (0,) -> shape of index
        self.inner_type = inner_type


class ChannelElem(cat.Opaque):
    """A point of a channel type: a map from pattern indices to
    branching results, dom register in pattern traversal order."""

    __slots__ = ("at", "pattern_type", "out_type")

    def __init__(self, at, pattern_type, out_type):
        super().__init__()
        self.at = at
        self.pattern_type = pattern_type
        self.out_type = out_type


# ---------------------------------------------------------------------------
# Type denotations

def denote_type(ty: Type) -> Obj:
    if isinstance(ty, TUnit):
        return cat.finite_obj([((), (0,))], "I")
    if isinstance(ty, TBool):
        return cat.finite_obj([(True, (0,)), (False, (0,))], "bool")
    if isinstance(ty, TQubit):
        return cat.finite_obj([((), (1,))], "qubit")
    if isinstance(ty, TTensor):
        return cat.tensor_obj(denote_type(ty.left), denote_type(ty.right))
    if isinstance(ty, TBang):
        return Obj(lambda g: (0,), None, "bang")
    if isinstance(ty, TChan):
        return Obj(lambda k: (0,), None, "chan")
    if isinstance(ty, TLolli):
        return Obj(lambda cl: cl.state_shape, None, "fun")
    raise TypeError(f"not a type: {ty!r}")


def type_qubits(ty: Type, idx) -> int:
    return denote_type(ty).shape(idx)[0]


# ---------------------------------------------------------------------------
# Context registers

Entry = tuple  # (name, Type)


def ctx_entries(d: Derivation) -> tuple[Entry, ...]:
    return tuple(d.nl) + tuple(d.lin)


def ctx_obj(entries: tuple[Entry, ...]) -> Obj:
    def fam(idx):
        total = 0
        for (_, ty), i in zip(entries, idx):
            total += type_qubits(ty, i)
        return (total,)

    objs = [denote_type(ty) for _, ty in entries]
    indices = None
    if all(o.indices is not None for o in objs):
        combos = [()]
        for o in objs:
            combos = [prev + (i,) for prev in combos for i in o.indices]
        indices = tuple(combos)
    return Obj(fam, indices, "ctx")


def _entry_blocks(entries, idx) -> list[tuple[str, int]]:
    return [(name, type_qubits(ty, i)) for (name, ty), i in zip(entries, idx)]


def _project(entries, idx, child_entries):
    pos = {name: k for k, (name, _) in enumerate(entries)}
    return tuple(idx[pos[name]] for name, _ in child_entries)


def _blocks_perm(src: list[tuple[str, int]], dst_names: list[str]) -> BMor:
    """Permutation of a qubit register from named blocks to the order
    the destination names give.  Every nonzero block must be kept."""
    sizes = dict(src)
    offsets = {}
    off = 0
    for name, n in src:
        offsets[name] = off
        off += n
    perm = [0] * off
    placed = 0
    for name in dst_names:
        for k in range(sizes[name]):
            perm[offsets[name] + k] = placed
            placed += 1
    if placed != off:
        raise DenotError("register rearrangement dropped live qubits")
    if perm == list(range(off)):
        return bmor_single(cpmap.identity(2**off), off, off)
    return bmor_single(cpmap.qubit_permutation(perm), off, off)


def _perm_to(entries, idx, ordered_names: list[str]) -> BMor:
    """Route the context register into the named blocks in the given
    order; unnamed blocks must be zero-width."""
    blocks = _entry_blocks(entries, idx)
    keep = set(ordered_names)
    src = []
    for n, w in blocks:
        if n in keep:
            src.append((n, w))
        elif w > 0:
            raise DenotError(f"live qubits of {n!r} have no destination")
    return _blocks_perm(src, [n for n in ordered_names])


# ---------------------------------------------------------------------------
# The interpreter

class Interpreter:
    """Interprets derivations.  Memoization keyed by derivation node and
    context index keeps opaque points stable within one run."""

    def __init__(self):
        self._fvals: dict[tuple, FVal] = {}
        self._opaques: dict[tuple, object] = {}
        self._pins: dict[int, object] = {}

    # entry points -----------------------------------------------------------

    def denote(self, d: Derivation) -> KMor:
        entries = ctx_entries(d)
        return KMor(
            ctx_obj(entries), denote_type(d.type), lambda idx: self.value(d, idx)
        )

    def value(self, d: Derivation, idx: tuple) -> FVal:
        key = (id(d), cat.canon_key(idx))
        got = self._fvals.get(key)
        if got is None:
            self._pins[id(d)] = d
            got = self._value(d, idx)
            self._fvals[key] = got
        return got

    def denote_configuration(
        self, q: qcalg.Channel, bd: BranchingDerivation, wires: frozenset[str]
    ) -> KMor:
        order = tuple(sorted(wires))
        entries = tuple((w, TQubit()) for w in order)
        chan = self.denote_channel(q, order)
        leaf_by_path = dict(_bderiv_paths(bd))
        for leaf_d in leaf_by_path.values():
            if leaf_d.nl:
                raise DenotError("configuration has free nonlinear variables")

        def at(idx):
            fv = chan.at(())
            pairs = []
            for path, comp in zip(fv.elements, fv.comps):
                leaf_d = leaf_by_path[path]
                leaf_idx = tuple(() for _ in ctx_entries(leaf_d))
                leaf_fv = self.value(leaf_d, leaf_idx)
                for e2, c2 in zip(leaf_fv.elements, leaf_fv.comps):
                    pairs.append((e2, cat.bmor_compose(c2, comp)))
            return fval_sorted(pairs)

        leaf0 = next(iter(leaf_by_path.values()))
        return KMor(ctx_obj(entries), denote_type(leaf0.type), at)

    def denote_channel(self, q: qcalg.Channel, order: tuple[str, ...]) -> KMor:
        parts = _chan(q, order)
        dom = Obj(lambda _: (len(order),), ((),), "wires")
        fam = {path: (len(out),) for path, out, _ in parts}
        cod = Obj(lambda p: fam[p], tuple(fam), "paths")
        fv = fval_sorted(
            [(path, bmor_single(m, len(order), len(out))) for path, out, m in parts]
        )
        return KMor(dom, cod, lambda _: fv)

    # rule dispatch ------------------------------------------------------------

    def _value(self, d: Derivation, idx: tuple) -> FVal:
        entries = ctx_entries(d)
        rule = d.rule

        if rule == "var":
            name = d.note[0]
            pos = {n: k for k, (n, _) in enumerate(entries)}
            i = idx[pos[name]]
            return FVal((i,), (_perm_to(entries, idx, [name]),))

        if rule in ("I", "tt", "ff"):
            out = {"I": (), "tt": True, "ff": False}[rule]
            return FVal((out,), (bmor_identity((0,)),))

        if rule == "d":
            prem = d.premises[0]
            fv = self.value(prem, _project(entries, idx, ctx_entries(prem)))
            pairs = []
            for g, c in zip(fv.elements, fv.comps):
                if not isinstance(g, GlobalElem):
                    raise DenotError("dereliction of a non-reusable point")
                pairs.append((g.index, cat.bmor_compose(g.cp, c)))
            return fval_sorted(pairs)

        if rule == "p":
            prem = d.premises[0]
            key = (id(d), cat.canon_key(idx), "promote")
            g = self._opaques.get(key)
            if g is None:
                fv = self.value(prem, _project(entries, idx, ctx_entries(prem)))
                if len(fv.elements) != 1:
                    raise DenotError("promotion of a branching value")
                g = GlobalElem(fv.elements[0], fv.comps[0], prem.type)
                self._opaques[key] = g
            return FVal((g,), (bmor_identity((0,)),))

        if rule == "lolli_i":
            key = (id(d), cat.canon_key(idx), "closure")
            cl = self._opaques.get(key)
            if cl is None:
                cl = self._make_closure(d, idx)
                self._opaques[key] = cl
            return FVal((cl,), (bmor_identity(cl.state_shape),))

        if rule == "lolli_e":
            return self._app(d, idx)

        if rule == "tensor_i":
            return self._pair(d, idx)

        if rule == "tensor_e":
            return self._letpair(d, idx)

        if rule == "if":
            return self._if(d, idx)

        if rule == "qchan_i":
            return self._qchan(d, idx)

        if rule == "box":
            key = (id(d), cat.canon_key(idx), "box")
            cl = self._opaques.get(key)
            if cl is None:
                p_ty, out_ty = d.note
                cl = SemClosure(d.type.arg, d.type.res, (0,), _BoxApply(p_ty, out_ty))
                self._opaques[key] = cl
            return FVal((cl,), (bmor_identity((0,)),))

        if rule == "unbox":
            key = (id(d), cat.canon_key(idx), "unbox")
            cl = self._opaques.get(key)
            if cl is None:
                p_ty, out_ty = d.note
                cl = SemClosure(
                    d.type.arg, d.type.res, (0,), _UnboxApply(p_ty, out_ty)
                )
                self._opaques[key] = cl
            return FVal((cl,), (bmor_identity((0,)),))

        raise DenotError(f"no interpretation for rule {rule!r}")

    # individual rules ----------------------------------------------------------

    def _make_closure(self, d: Derivation, idx: tuple) -> SemClosure:
        binder, dom_ty, _ = d.note
        prem = d.premises[0]
        entries = ctx_entries(d)
        prem_entries = ctx_entries(prem)
        pos = {n: k for k, (n, _) in enumerate(entries)}
        captured = _entry_blocks(entries, idx)
        state = sum(w for _, w in captured)

        def apply(arg_idx):
            child_idx = tuple(
                arg_idx if name == binder else idx[pos[name]]
                for name, _ in prem_entries
            )
            fv = self.value(prem, child_idx)
            src = [(n, w) for n, w in captured] + [
                (binder, type_qubits(dom_ty, arg_idx))
            ]
            have = {n for n, _ in src}
            pre = _blocks_perm(src, [n for n, _ in prem_entries if n in have])
            return FVal(fv.elements, tuple(cat.bmor_compose(c, pre) for c in fv.comps))

        return SemClosure(dom_ty, d.type.res, (state,), apply)

    def _app(self, d: Derivation, idx: tuple) -> FVal:
        entries = ctx_entries(d)
        fn_d, arg_d = d.premises
        fv = self.value(fn_d, _project(entries, idx, ctx_entries(fn_d)))
        av = self.value(arg_d, _project(entries, idx, ctx_entries(arg_d)))
        pre = _perm_to(
            entries, idx, [n for n, _ in fn_d.lin] + [n for n, _ in arg_d.lin]
        )
        pairs = []
        for cl, c1 in zip(fv.elements, fv.comps):
            if not isinstance(cl, SemClosure):
                raise DenotError("application of a non-function point")
            for a, c2 in zip(av.elements, av.comps):
                base = cat.bmor_compose(cat.bmor_tensor(c1, c2), pre)
                res = cl.apply(a)
                for e, c3 in zip(res.elements, res.comps):
                    pairs.append((e, cat.bmor_compose(c3, base)))
        return fval_sorted(pairs)

    def _pair(self, d: Derivation, idx: tuple) -> FVal:
        entries = ctx_entries(d)
        left, right = d.premises
        lv = self.value(left, _project(entries, idx, ctx_entries(left)))
        rv = self.value(right, _project(entries, idx, ctx_entries(right)))
        pre = _perm_to(
            entries, idx, [n for n, _ in left.lin] + [n for n, _ in right.lin]
        )
        pairs = []
        for e1, c1 in zip(lv.elements, lv.comps):
            for e2, c2 in zip(rv.elements, rv.comps):
                pairs.append(
                    ((e1, e2), cat.bmor_compose(cat.bmor_tensor(c1, c2), pre))
                )
        return fval_sorted(pairs)

    def _letpair(self, d: Derivation, idx: tuple) -> FVal:
        entries = ctx_entries(d)
        x, y, ty_x, ty_y = d.note
        pair_d, body_d = d.premises
        pv = self.value(pair_d, _project(entries, idx, ctx_entries(pair_d)))
        body_entries = ctx_entries(body_d)
        pos = {n: k for k, (n, _) in enumerate(entries)}
        types = dict(entries)
        rest_names = [n for n, _ in body_d.lin if n not in (x, y)]
        pre = _perm_to(entries, idx, [n for n, _ in pair_d.lin] + rest_names)
        rest = [(n, type_qubits(types[n], idx[pos[n]])) for n in rest_names]
        rest_width = sum(w for _, w in rest)
        pairs = []
        for (a, b), c1 in zip(pv.elements, pv.comps):
            body_idx = tuple(
                a if name == x else b if name == y else idx[pos[name]]
                for name, _ in body_entries
            )
            bv = self.value(body_d, body_idx)
            src = [(x, type_qubits(ty_x, a)), (y, type_qubits(ty_y, b))] + rest
            have = {n for n, _ in src}
            mid = _blocks_perm(src, [n for n, _ in body_d.lin if n in have])
            step = cat.bmor_compose(
                mid,
                cat.bmor_compose(
                    cat.bmor_tensor(c1, bmor_identity((rest_width,))), pre
                ),
            )
            for e, c2 in zip(bv.elements, bv.comps):
                pairs.append((e, cat.bmor_compose(c2, step)))
        return fval_sorted(pairs)

    def _if(self, d: Derivation, idx: tuple) -> FVal:
        entries = ctx_entries(d)
        cond_d, then_d, else_d = d.premises
        cv = self.value(cond_d, _project(entries, idx, ctx_entries(cond_d)))
        pos = {n: k for k, (n, _) in enumerate(entries)}
        types = dict(entries)
        branch_names = [n for n, _ in then_d.lin]
        pre = _perm_to(entries, idx, [n for n, _ in cond_d.lin] + branch_names)
        width = sum(type_qubits(types[n], idx[pos[n]]) for n in branch_names)
        pairs = []
        for b, c1 in zip(cv.elements, cv.comps):
            branch = then_d if b else else_d
            bv = self.value(branch, _project(entries, idx, ctx_entries(branch)))
            base = cat.bmor_compose(cat.bmor_tensor(c1, bmor_identity((width,))), pre)
            for e, c2 in zip(bv.elements, bv.comps):
                pairs.append((e, cat.bmor_compose(c2, base)))
        return fval_sorted(pairs)

    def _qchan(self, d: Derivation, idx: tuple) -> FVal:
        key = (id(d), cat.canon_key(idx), "chan")
        g = self._opaques.get(key)
        if g is None:
            k = self._make_channel_elem(d, idx)
            g = GlobalElem(k, bmor_identity((0,)), d.type.inner)
            self._opaques[key] = g
        return FVal((g,), (bmor_identity((0,)),))

    def _make_channel_elem(self, d: Derivation, idx: tuple) -> ChannelElem:
        pattern, channel, p_ty, _ = d.note
        in_wires = tuple(sorted(_pattern_wires(pattern)))
        chan = self.denote_channel(channel, in_wires)
        leaf_by_path = dict(zip(_channel_paths(channel), d.premises))
        fv0 = chan.at(())
        pre = _blocks_perm([(w, 1) for w in _pattern_wires(pattern)], list(in_wires))
        chan_ty = d.type.inner

        def at(p_idx):
            pairs = []
            for path, comp in zip(fv0.elements, fv0.comps):
                leaf_d = leaf_by_path[path]
                leaf_idx = tuple(
                    idx[_entry_pos(d, n)] if (n, ty) in d.nl else ()
                    for n, ty in ctx_entries(leaf_d)
                )
                leaf_fv = self.value(leaf_d, leaf_idx)
                base = cat.bmor_compose(comp, pre)
                for e, c in zip(leaf_fv.elements, leaf_fv.comps):
                    pairs.append((e, cat.bmor_compose(c, base)))
            return fval_sorted(pairs)

        return ChannelElem(at, p_ty, chan_ty.out)


class _BoxApply:
    """Turn a reusable function point into a reusable channel point."""

    def __init__(self, p_ty, out_ty):
        self.p_ty = p_ty
        self.out_ty = out_ty
        self.cache: dict[tuple, FVal] = {}

    def __call__(self, g):
        if not isinstance(g, GlobalElem) or not isinstance(g.index, SemClosure):
            raise DenotError("boxing a point that is not a reusable function")
        ck = cat.canon_key(g)
        got = self.cache.get(ck)
        if got is None:
            fn = g.index
            k = ChannelElem(lambda p_idx: fn.apply(p_idx), self.p_ty, self.out_ty)
            gk = GlobalElem(k, g.cp, TChan(self.p_ty, self.out_ty))
            got = FVal((gk,), (bmor_identity((0,)),))
            self.cache[ck] = got
        return got


class _UnboxApply:
    """Turn a channel point into the function that runs it."""

    def __init__(self, p_ty, out_ty):
        self.p_ty = p_ty
        self.out_ty = out_ty
        self.cache: dict[tuple, FVal] = {}

    def __call__(self, k):
        if not isinstance(k, ChannelElem):
            raise DenotError("unboxing a point that is not a channel")
        ck = cat.canon_key(k)
        got = self.cache.get(ck)
        if got is None:
            cl = SemClosure(self.p_ty, self.out_ty, (0,), k.at)
            got = FVal((cl,), (bmor_identity((0,)),))
            self.cache[ck] = got
        return got


def _entry_pos(d: Derivation, name: str) -> int:
    for k, (n, _) in enumerate(ctx_entries(d)):
        if n == name:
            return k
    raise DenotError(f"entry {name!r} missing")


def _pattern_wires(p: Pattern) -> list[str]:
    if isinstance(p, PVar):
        return [p.name]
    if isinstance(p, PUnit):
        return []
    return _pattern_wires(p.left) + _pattern_wires(p.right)


def _bderiv_paths(bd: BranchingDerivation, path: tuple = ()):
    if isinstance(bd, BDLeaf):
        yield path, bd.deriv
        return
    yield from _bderiv_paths(bd.left, path + (True,))
    yield from _bderiv_paths(bd.right, path + (False,))


def _channel_paths(q: qcalg.Channel, path: tuple = ()) -> list[tuple]:
    if isinstance(q, qcalg.Eps):
        return [path]
    if isinstance(q, qcalg.Meas):
        return _channel_paths(q.if_true, path + (True,)) + _channel_paths(
            q.if_false, path + (False,)
        )
    return _channel_paths(q.rest, path)


# ---------------------------------------------------------------------------
# Channels as path-indexed families of completely positive maps

def _chan(q: qcalg.Channel, order: tuple[str, ...]):
    """List (path, output wire order, CPMap) per measurement branch.
    Registers are name-sorted at both ends."""
    from ..sim import TT_PROJECTOR_IS_ONE

    n = len(order)
    if isinstance(q, qcalg.Eps):
        return [((), order, cpmap.identity(2**n))]
    if isinstance(q, qcalg.Gate):
        u = qcalg.gate_matrix(q.gate)
        positions = [order.index(w) for w in q.wires]
        full = cpmap.unitary_map(cpmap.embed_unitary(u, positions, n))
        return [
            (path, out, cpmap.compose(m, full)) for path, out, m in _chan(q.rest, order)
        ]
    if isinstance(q, qcalg.Init):
        level = (1 if q.bit else 0) if TT_PROJECTOR_IS_ONE else (0 if q.bit else 1)
        appended = cpmap.tensor(cpmap.identity(2**n), cpmap.init_map(level))
        new_order = tuple(sorted(order + (q.wire,)))
        perm = [new_order.index(w) for w in order + (q.wire,)]
        routed = cpmap.compose(cpmap.qubit_permutation(perm), appended)
        return [
            (path, out, cpmap.compose(m, routed))
            for path, out, m in _chan(q.rest, new_order)
        ]
    if isinstance(q, qcalg.Free):
        new_order = tuple(w for w in order if w != q.wire)
        to_end = [new_order.index(w) if w != q.wire else n - 1 for w in order]
        routed = cpmap.compose(
            cpmap.tensor(cpmap.identity(2 ** (n - 1)), cpmap.free_map()),
            cpmap.qubit_permutation(to_end),
        )
        return [
            (path, out, cpmap.compose(m, routed))
            for path, out, m in _chan(q.rest, new_order)
        ]
    if isinstance(q, qcalg.Meas):
        pos = order.index(q.wire)
        tt_level = 1 if TT_PROJECTOR_IS_ONE else 0
        out = []
        for bit, sub, level in (
            (True, q.if_true, tt_level),
            (False, q.if_false, 1 - tt_level),
        ):
            k = np.zeros((2, 2), dtype=complex)
            k[level, level] = 1.0
            kfull = cpmap.embed_unitary(k, [pos], n)
            m0 = cpmap.from_kraus([kfull], 2**n, 2**n)
            for path, out_wires, m in _chan(sub, order):
                out.append(((bit,) + path, out_wires, cpmap.compose(m, m0)))
        return out
    raise TypeError(f"not a channel: {q!r}")


# ---------------------------------------------------------------------------
# Observable comparison

def bmor_norm(b: BMor) -> float:
    worst = 0.0
    for row in b.blocks:
        for m in row:
            worst = max(worst, m.norm())
    return worst


def value_deviation(a, b, ty: Type, tol: float) -> float:
    """Extensional distance between two points of the same type.
    Structurally different points are infinitely far apart."""
    if isinstance(ty, (TUnit, TBool, TQubit)):
        return 0.0 if a == b else float("inf")
    if isinstance(ty, TTensor):
        if not (isinstance(a, tuple) and isinstance(b, tuple)):
            return float("inf")
        return max(
            value_deviation(a[0], b[0], ty.left, tol),
            value_deviation(a[1], b[1], ty.right, tol),
        )
    if isinstance(ty, TBang):
        if not (isinstance(a, GlobalElem) and isinstance(b, GlobalElem)):
            return float("inf")
        return max(
            cat.bmor_deviation(a.cp, b.cp),
            value_deviation(a.index, b.index, ty.inner, tol),
        )
    if isinstance(ty, TChan):
        if not (isinstance(a, ChannelElem) and isinstance(b, ChannelElem)):
            return float("inf")
        worst = 0.0
        for p_idx in denote_type(ty.pattern_type).indices:
            worst = max(
                worst,
                fval_observable_deviation(a.at(p_idx), b.at(p_idx), ty.out, tol),
            )
        return worst
    if isinstance(ty, TLolli):
        if a is b:
            return 0.0
        if not (isinstance(a, SemClosure) and isinstance(b, SemClosure)):
            return float("inf")
        if a.state_shape != b.state_shape:
            return float("inf")
        dom = denote_type(ty.arg)
        if dom.indices is None:
            return float("inf")
        worst = 0.0
        for i in dom.indices:
            worst = max(
                worst,
                fval_observable_deviation(a.apply(i), b.apply(i), ty.res, tol),
            )
        return worst
    raise TypeError(f"not a type: {ty!r}")


def fval_observable_deviation(a: FVal, b: FVal, ty: Type, tol: float) -> float:
    """Distance between two branching values of one type: branches whose
    maps vanish are dropped, the rest are matched bijectively."""
    aa = [(e, c) for e, c in zip(a.elements, a.comps) if bmor_norm(c) > tol]
    bb = [(e, c) for e, c in zip(b.elements, b.comps) if bmor_norm(c) > tol]
    if len(aa) != len(bb):
        return float("inf")
    if not aa:
        return 0.0
    cost = [
        [
            max(value_deviation(ea, eb, ty, tol), cat.bmor_deviation(ca, cb))
            for eb, cb in bb
        ]
        for ea, ca in aa
    ]
    return _best_matching(cost)


def _best_matching(cost: list[list[float]]) -> float:
    n = len(cost)
    best = [float("inf")]

    def go(i: int, used: int, worst: float):
        if worst >= best[0]:
            return
        if i == n:
            best[0] = worst
            return
        for j in range(n):
            if not used & (1 << j):
                go(i + 1, used | (1 << j), max(worst, cost[i][j]))

    go(0, 0, 0.0)
    return best[0]


def kmor_observable_deviation(f: KMor, g: KMor, ty: Type, tol: float = 1e-9) -> float:
    if f.dom.indices is None or g.dom.indices is None:
        raise DenotError("cannot enumerate the domain for comparison")
    if len(f.dom.indices) != len(g.dom.indices):
        return float("inf")
    worst = 0.0
    for i, j in zip(f.dom.indices, g.dom.indices):
        worst = max(worst, fval_observable_deviation(f.at(i), g.at(j), ty, tol))
    return worst


def equal_observable(f: KMor, g: KMor, ty: Type, tol: float = 1e-9) -> bool:
    return kmor_observable_deviation(f, g, ty, tol) <= tol


# ---------------------------------------------------------------------------
# Soundness over a reduction trace

@dataclass
class SoundnessStep:
    rule: str
    deviation: float


@dataclass
class SoundnessReport:
    type: Type
    steps: list[SoundnessStep]
    max_deviation: float
    passed: bool


def soundness_trace(
    term,
    wire_inputs: frozenset[str] = frozenset(),
    goal: Type | None = None,
    fuel: int = 10000,
    tol: float = 1e-9,
) -> SoundnessReport:
    """Reduce a configuration to values, interpreting every intermediate
    state and measuring how far each step moves the denotation."""
    from .. import eval as ev
    from ..typecheck import check_configuration

    q, m = ev.initial_state(term, wire_inputs)
    ty, bd = check_configuration(q, m, wire_inputs, goal)
    current = Interpreter().denote_configuration(q, bd, wire_inputs)
    _, _, trace = ev.run_to_value(q, m, fuel)
    steps: list[SoundnessStep] = []
    worst = 0.0
    for st in trace:
        _, bd2 = check_configuration(st.channel, st.branches, wire_inputs, ty)
        nxt = Interpreter().denote_configuration(st.channel, bd2, wire_inputs)
        dev = kmor_observable_deviation(current, nxt, ty, tol)
        steps.append(SoundnessStep(st.rule, dev))
        worst = max(worst, dev)
        current = nxt
    return SoundnessReport(ty, steps, worst, worst <= tol)
