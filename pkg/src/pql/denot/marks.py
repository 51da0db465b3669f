"""Object syntax for branching wire bundles.

An object is a tuple of marks; a mark is a single qubit wire, a sum box
holding alternative objects, or a dual.  Extensionally every dual-free
object flattens to a branch shape: one entry per alternative, counting
the qubits that alternative carries.  Tensoring distributes over sums
left-major, so the flattening of a tuple of marks is the ordered
product of the flattenings of its parts.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class MQ:
    pass


@dataclass(frozen=True)
class MSum:
    alternatives: tuple["MObject", ...]


@dataclass(frozen=True)
class MDual:
    inner: "Mark"


Mark = MQ | MSum | MDual
MObject = tuple  # tuple[Mark, ...]


def qubits(n: int) -> MObject:
    return tuple(MQ() for _ in range(n))


def sum_of(*alternatives: MObject) -> MObject:
    return (MSum(tuple(alternatives)),)


def _mark_branches(m: Mark) -> list[int]:
    if isinstance(m, MQ):
        return [1]
    if isinstance(m, MSum):
        out: list[int] = []
        for alt in m.alternatives:
            out.extend(branch_shape(alt))
        return out
    raise ValueError("dual marks have no extensional branch shape")


def branch_shape(obj: MObject) -> tuple[int, ...]:
    """Flatten to one qubit count per branch.  The empty object is the
    scalar: a single branch of zero qubits."""
    shapes = [0]
    for mark in obj:
        shapes = [a + b for a in shapes for b in _mark_branches(mark)]
    return tuple(shapes)
