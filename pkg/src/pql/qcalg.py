"""Quantum channel algebra: tree-shaped circuits with branching measurement.

A channel is a finite tree built from five constructors.  `Eps` is the
empty channel holding the set of wires currently alive; `Gate`, `Init`
and `Free` prefix a single operation onto a continuation channel; `Meas`
forks into two continuations, one per measurement outcome.  The first
continuation of a `Meas` is the tt outcome, the second the ff outcome.

Wires are plain strings.  Measurement keeps its wire alive in both
continuations (the post-measurement qubit can still be acted on, or
freed explicitly).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


class ChannelError(Exception):
    pass


class InvalidChannel(ChannelError):
    pass


class WireClash(ChannelError):
    pass


@dataclass(frozen=True)
class Eps:
    wires: frozenset[str]


@dataclass(frozen=True)
class Gate:
    gate: str
    wires: tuple[str, ...]
    rest: "Channel"


@dataclass(frozen=True)
class Init:
    bit: bool
    wire: str
    rest: "Channel"


@dataclass(frozen=True)
class Meas:
    wire: str
    if_true: "Channel"
    if_false: "Channel"


@dataclass(frozen=True)
class Free:
    wire: str
    rest: "Channel"


Channel = Union[Eps, Gate, Init, Meas, Free]


def eps(*wires: str) -> Eps:
    return Eps(frozenset(wires))


# Wire bunches: binary trees whose leaves are wire sets.  A channel with
# n measurements has an output bunch with one leaf per branch.

@dataclass(frozen=True)
class BunchLeaf:
    wires: frozenset[str]


@dataclass(frozen=True)
class BunchNode:
    left: "Bunch"
    right: "Bunch"


Bunch = Union[BunchLeaf, BunchNode]


def bunch_leaves(b: Bunch) -> list[frozenset[str]]:
    if isinstance(b, BunchLeaf):
        return [b.wires]
    return bunch_leaves(b.left) + bunch_leaves(b.right)


# ---------------------------------------------------------------------------
# Gate table

_SQ2 = 1.0 / np.sqrt(2.0)

_GATES: dict[str, np.ndarray] = {}


def register_gate(name: str, matrix: np.ndarray) -> None:
    """Add a named unitary to the gate table.

    The matrix must be square of dimension 2**n for some n >= 1 and
    unitary to within 1e-12.
    """
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"gate {name!r}: matrix must be square, got {m.shape}")
    dim = m.shape[0]
    n = int(dim).bit_length() - 1
    if dim < 2 or 2**n != dim:
        raise ValueError(f"gate {name!r}: dimension {dim} is not a power of two")
    dev = np.abs(m.conj().T @ m - np.eye(dim)).max()
    if dev > 1e-12:
        raise ValueError(f"gate {name!r}: not unitary (deviation {dev:.3e})")
    m = m.copy()
    m.setflags(write=False)
    _GATES[name] = m


def gate_matrix(name: str) -> np.ndarray:
    if name not in _GATES:
        raise InvalidChannel(f"unknown gate {name!r}")
    return _GATES[name]


def gate_arity(name: str) -> int:
    return int(gate_matrix(name).shape[0]).bit_length() - 1


def known_gates() -> tuple[str, ...]:
    return tuple(sorted(_GATES))


register_gate("X", np.array([[0, 1], [1, 0]]))
register_gate("Y", np.array([[0, -1j], [1j, 0]]))
register_gate("Z", np.array([[1, 0], [0, -1]]))
register_gate("H", np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]]))
register_gate("S", np.array([[1, 0], [0, 1j]]))
register_gate("T", np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]]))
# Two-wire gates act on (first wire, second wire) = (left factor, right factor).
register_gate("CNOT", np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]))
register_gate("CZ", np.diag([1, 1, 1, -1]))


# ---------------------------------------------------------------------------
# Validity

def validate(q: Channel, wires: frozenset[str]) -> Bunch:
    """Check q against the live wire set and return its output bunch.

    Each constructor constrains the wires it touches: a gate only acts
    on live wires, init introduces a wire that is not yet live, meas and
    free demand a live wire.  The Eps leaves must list exactly the wires
    still alive on their branch.  Raises InvalidChannel or WireClash.
    """
    if isinstance(q, Eps):
        if q.wires != wires:
            raise InvalidChannel(
                f"eps leaf holds {sorted(q.wires)} but the live wires are {sorted(wires)}"
            )
        return BunchLeaf(q.wires)
    if isinstance(q, Gate):
        arity = gate_arity(q.gate)
        if len(q.wires) != arity:
            raise InvalidChannel(
                f"gate {q.gate} wants {arity} wires, got {len(q.wires)}"
            )
        if len(set(q.wires)) != len(q.wires):
            raise WireClash(f"gate {q.gate} applied to repeated wire {q.wires}")
        missing = set(q.wires) - wires
        if missing:
            raise InvalidChannel(f"gate {q.gate} touches dead wires {sorted(missing)}")
        return validate(q.rest, wires)
    if isinstance(q, Init):
        if q.wire in wires:
            raise WireClash(f"init reuses live wire {q.wire!r}")
        return validate(q.rest, wires | {q.wire})
    if isinstance(q, Meas):
        if q.wire not in wires:
            raise InvalidChannel(f"meas on dead wire {q.wire!r}")
        # The measured wire stays live in both continuations.
        return BunchNode(validate(q.if_true, wires), validate(q.if_false, wires))
    if isinstance(q, Free):
        if q.wire not in wires:
            raise InvalidChannel(f"free on dead wire {q.wire!r}")
        return validate(q.rest, wires - {q.wire})
    raise TypeError(f"not a channel: {q!r}")


def in_wires(q: Channel) -> frozenset[str]:
    """The wires q consumes from its environment."""
    if isinstance(q, Eps):
        return q.wires
    if isinstance(q, Gate):
        return in_wires(q.rest)
    if isinstance(q, Init):
        return in_wires(q.rest) - {q.wire}
    if isinstance(q, Meas):
        return in_wires(q.if_true) | in_wires(q.if_false) | {q.wire}
    if isinstance(q, Free):
        return in_wires(q.rest) | {q.wire}
    raise TypeError(f"not a channel: {q!r}")


def out_bunch(q: Channel) -> Bunch:
    return validate(q, in_wires(q))


def all_wires(q: Channel) -> frozenset[str]:
    """Every wire name mentioned anywhere in q."""
    if isinstance(q, Eps):
        return q.wires
    if isinstance(q, Gate):
        return all_wires(q.rest) | set(q.wires)
    if isinstance(q, Init):
        return all_wires(q.rest) | {q.wire}
    if isinstance(q, Meas):
        return all_wires(q.if_true) | all_wires(q.if_false) | {q.wire}
    if isinstance(q, Free):
        return all_wires(q.rest) | {q.wire}
    raise TypeError(f"not a channel: {q!r}")


def extend(q: Channel, extra: frozenset[str]) -> Channel:
    """Thread extra untouched wires through q, widening every Eps leaf.

    The extra wires must be disjoint from every name in q.
    """
    extra = frozenset(extra)
    if not extra:
        return q
    clash = extra & all_wires(q)
    if clash:
        raise WireClash(f"extend would capture wires {sorted(clash)}")
    return _extend(q, extra)


def _extend(q: Channel, extra: frozenset[str]) -> Channel:
    if isinstance(q, Eps):
        return Eps(q.wires | extra)
    if isinstance(q, Gate):
        return Gate(q.gate, q.wires, _extend(q.rest, extra))
    if isinstance(q, Init):
        return Init(q.bit, q.wire, _extend(q.rest, extra))
    if isinstance(q, Meas):
        return Meas(q.wire, _extend(q.if_true, extra), _extend(q.if_false, extra))
    if isinstance(q, Free):
        return Free(q.wire, _extend(q.rest, extra))
    raise TypeError(f"not a channel: {q!r}")
