"""Indexed families of wire bundles and the branching monad.

An object is an index set (possibly not enumerable) together with, for
each index, a branch shape: the wire-bundle alternatives that index can
carry, given as qubit counts.  A morphism component between two branch
shapes is a block matrix of completely positive maps.

A Kleisli morphism into the branching monad sends each input index to
an FVal: a canonically sorted multiset of output indices together with
one block morphism landing in the concatenation of their shapes.
Kleisli composition flattens multisets and stably re-sorts, tracking
the induced branch permutation; this is the monad multiplication
inlined.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import cpmap
from .cpmap import CPMap

_opaque_counter = itertools.count()


class Opaque:
    """Base for semantic index values compared by creation identity."""

    __slots__ = ("_id",)

    def __init__(self):
        self._id = next(_opaque_counter)

    def __repr__(self):
        return f"<{type(self).__name__} #{self._id}>"


def canon_key(v):
    if isinstance(v, bool):
        # tt sorts before ff
        return (1, 0 if v else 1)
    if isinstance(v, int):
        return (2, v)
    if isinstance(v, str):
        return (3, v)
    if isinstance(v, tuple):
        return (4, len(v), tuple(canon_key(x) for x in v))
    if isinstance(v, MSet):
        return (5, len(v.items), tuple(canon_key(x) for x in v.items))
    if isinstance(v, Opaque):
        return (6, v._id)
    raise TypeError(f"no canonical order for {type(v).__name__}")


class MSet:
    """A multiset kept as a canonically sorted tuple."""

    __slots__ = ("items",)

    def __init__(self, items):
        self.items = tuple(sorted(items, key=canon_key))

    def __eq__(self, other):
        return isinstance(other, MSet) and self.items == other.items

    def __hash__(self):
        return hash(self.items)

    def __repr__(self):
        return f"MSet{list(self.items)!r}"


@dataclass(frozen=True)
class Obj:
    """indices is None for objects whose points are only met one at a
    time (function spaces and the like)."""

    family: Callable
    indices: tuple | None = None
    label: str = ""

    def shape(self, idx) -> tuple[int, ...]:
        return self.family(idx)


def finite_obj(pairs: list[tuple[object, tuple[int, ...]]], label: str = "") -> Obj:
    table = {canon_key(i): s for i, s in pairs}
    idxs = tuple(i for i, _ in pairs)
    return Obj(lambda i: table[canon_key(i)], idxs, label)


UNIT_OBJ = finite_obj([((), (0,))], "I")


def tensor_obj(a: Obj, b: Obj) -> Obj:
    def fam(idx):
        x, y = idx
        sa, sb = a.shape(x), b.shape(y)
        return tuple(p + q for p in sa for q in sb)

    idxs = None
    if a.indices is not None and b.indices is not None:
        idxs = tuple((x, y) for x in a.indices for y in b.indices)
    return Obj(fam, idxs, f"({a.label}*{b.label})")


def coproduct_obj(a: Obj, b: Obj) -> Obj:
    def fam(idx):
        tag, x = idx
        return a.shape(x) if tag == 0 else b.shape(x)

    idxs = None
    if a.indices is not None and b.indices is not None:
        idxs = tuple((0, x) for x in a.indices) + tuple((1, x) for x in b.indices)
    return Obj(fam, idxs, f"({a.label}+{b.label})")


# ---------------------------------------------------------------------------
# Block morphisms between branch shapes

@dataclass(frozen=True)
class BMor:
    dom: tuple[int, ...]
    cod: tuple[int, ...]
    blocks: tuple[tuple[CPMap, ...], ...]  # [cod branch][dom branch]

    def block(self, i: int, j: int) -> CPMap:
        return self.blocks[i][j]


def bmor_from_blocks(dom, cod, blocks) -> BMor:
    return BMor(tuple(dom), tuple(cod), tuple(tuple(row) for row in blocks))


def bmor_identity(shape: tuple[int, ...]) -> BMor:
    rows = []
    for i, ni in enumerate(shape):
        rows.append(
            tuple(
                cpmap.identity(2**ni) if i == j else cpmap.zero(2**nj, 2**ni)
                for j, nj in enumerate(shape)
            )
        )
    return BMor(tuple(shape), tuple(shape), tuple(rows))


def bmor_single(m: CPMap, n_in: int, n_out: int) -> BMor:
    return BMor((n_in,), (n_out,), ((m,),))


def bmor_compose(g: BMor, f: BMor) -> BMor:
    if f.cod != g.dom:
        raise ValueError(f"cannot compose shapes {g.dom} after {f.cod}")
    rows = []
    for i, ni in enumerate(g.cod):
        row = []
        for j, nj in enumerate(f.dom):
            acc = cpmap.zero(2**nj, 2**ni)
            for k in range(len(f.cod)):
                acc = cpmap.add(acc, cpmap.compose(g.block(i, k), f.block(k, j)))
            row.append(acc)
        rows.append(tuple(row))
    return BMor(f.dom, g.cod, tuple(rows))


def bmor_tensor(f: BMor, g: BMor) -> BMor:
    dom = tuple(a + b for a in f.dom for b in g.dom)
    cod = tuple(a + b for a in f.cod for b in g.cod)
    rows = []
    for i1 in range(len(f.cod)):
        for i2 in range(len(g.cod)):
            row = []
            for j1 in range(len(f.dom)):
                for j2 in range(len(g.dom)):
                    row.append(cpmap.tensor(f.block(i1, j1), g.block(i2, j2)))
            rows.append(tuple(row))
    return BMor(dom, cod, tuple(rows))


def bmor_permute_cod(f: BMor, perm: list[int]) -> BMor:
    """Reindex output branches: new branch i is old branch perm[i]."""
    cod = tuple(f.cod[p] for p in perm)
    rows = tuple(f.blocks[p] for p in perm)
    return BMor(f.dom, cod, rows)


def bmor_stack(parts: list[BMor]) -> BMor:
    """Stack morphisms with a shared domain into one with concatenated
    output branches."""
    if not parts:
        raise ValueError("cannot stack nothing")
    dom = parts[0].dom
    for p in parts:
        if p.dom != dom:
            raise ValueError("stack parts must share their domain")
    cod = tuple(n for p in parts for n in p.cod)
    rows = tuple(row for p in parts for row in p.blocks)
    return BMor(dom, cod, rows)


def bmor_deviation(f: BMor, g: BMor) -> float:
    if f.dom != g.dom or f.cod != g.cod:
        return float("inf")
    worst = 0.0
    for ri, rj in zip(f.blocks, g.blocks):
        for a, b in zip(ri, rj):
            worst = max(worst, cpmap.deviation(a, b))
    return worst


def bmor_is_tp(f: BMor, tol: float = 1e-9) -> bool:
    """Trace preserving as a whole: traces summed over all output
    branches reproduce the input trace, per input branch."""
    for j, nj in enumerate(f.dom):
        total = np.zeros((2**nj, 2**nj), dtype=complex)
        for i in range(len(f.cod)):
            total += f.block(i, j).trace_of_output()
        if not np.allclose(total, np.eye(2**nj), atol=tol):
            return False
    return True


# ---------------------------------------------------------------------------
# Kleisli morphisms for the branching monad

@dataclass(frozen=True)
class FVal:
    """A multiset of output indices with the block morphism into the
    concatenation of their shapes, one block column per element."""

    elements: tuple
    comps: tuple[BMor, ...]

    def __post_init__(self):
        if len(self.elements) != len(self.comps):
            raise ValueError("element/component mismatch")


def fval_sorted(pairs: list[tuple[object, BMor]]) -> FVal:
    pairs = sorted(pairs, key=lambda p: canon_key(p[0]))
    return FVal(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))


@dataclass(frozen=True)
class KMor:
    dom: Obj
    cod: Obj
    at: Callable  # index -> FVal


def keta(obj: Obj) -> KMor:
    return KMor(obj, obj, lambda x: FVal((x,), (bmor_identity(obj.shape(x)),)))


def kcompose(g: KMor, f: KMor) -> KMor:
    def at(x):
        fv = f.at(x)
        pairs = []
        for elem, comp in zip(fv.elements, fv.comps):
            gv = g.at(elem)
            for elem2, comp2 in zip(gv.elements, gv.comps):
                pairs.append((elem2, bmor_compose(comp2, comp)))
        return fval_sorted(pairs)

    return KMor(f.dom, g.cod, at)


def kpair(f: KMor, g: KMor) -> KMor:
    """The doubled strength: pair two Kleisli maps over a product of
    their domains."""
    dom = tensor_obj(f.dom, g.dom)
    cod = tensor_obj(f.cod, g.cod)

    def at(idx):
        x, y = idx
        fv, gv = f.at(x), g.at(y)
        pairs = []
        for e1, c1 in zip(fv.elements, fv.comps):
            for e2, c2 in zip(gv.elements, gv.comps):
                pairs.append(((e1, e2), bmor_tensor(c1, c2)))
        return fval_sorted(pairs)

    return KMor(dom, cod, at)


# plain morphisms, for functoriality and naturality statements

@dataclass(frozen=True)
class PMor:
    dom: Obj
    cod: Obj
    on_idx: Callable
    comp: Callable  # index -> BMor from dom.shape(i) to cod.shape(on_idx(i))


def pmor_identity(obj: Obj) -> PMor:
    return PMor(obj, obj, lambda x: x, lambda x: bmor_identity(obj.shape(x)))


def pmor_coproduct(p: PMor, q: PMor) -> PMor:
    dom = coproduct_obj(p.dom, q.dom)
    cod = coproduct_obj(p.cod, q.cod)

    def on_idx(idx):
        tag, x = idx
        return (tag, p.on_idx(x) if tag == 0 else q.on_idx(x))

    def comp(idx):
        tag, x = idx
        return p.comp(x) if tag == 0 else q.comp(x)

    return PMor(dom, cod, on_idx, comp)


def plift(p: PMor) -> KMor:
    """Embed a plain morphism as a deterministic Kleisli morphism."""
    return KMor(p.dom, p.cod, lambda x: FVal((p.on_idx(x),), (p.comp(x),)))


def fmap_fval(p: PMor, fv: FVal) -> FVal:
    pairs = [
        (p.on_idx(e), bmor_compose(p.comp(e), c)) for e, c in zip(fv.elements, fv.comps)
    ]
    return fval_sorted(pairs)


def bif(a: Obj) -> KMor:
    """Duplicate into a tagged pair of branches.  Componentwise this is
    a column of identities, which is not trace preserving on its own;
    trace bookkeeping lives at the level of whole values."""
    cod = coproduct_obj(a, a)

    def at(x):
        ident = bmor_identity(a.shape(x))
        return fval_sorted([((0, x), ident), ((1, x), ident)])

    return KMor(a, cod, at)


def merge_fval(fv: FVal) -> FVal:
    """Strip coproduct tags off every element, stably re-sorting."""
    pairs = []
    for e, c in zip(fv.elements, fv.comps):
        tag, x = e
        pairs.append((x, c))
    return fval_sorted(pairs)


def fval_deviation(a: FVal, b: FVal) -> float:
    """Strict comparison: same sorted elements, componentwise block
    deviation."""
    if len(a.elements) != len(b.elements):
        return float("inf")
    for x, y in zip(a.elements, b.elements):
        if canon_key(x) != canon_key(y):
            return float("inf")
    worst = 0.0
    for c1, c2 in zip(a.comps, b.comps):
        worst = max(worst, bmor_deviation(c1, c2))
    return worst
