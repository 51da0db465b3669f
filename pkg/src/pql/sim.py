"""Density-matrix simulation of channels.

This module applies a channel to a concrete state by walking the
channel syntax and acting on a numpy density matrix, one constructor at
a time.  It is deliberately self-contained: the categorical semantics
in `pql.denot` computes the same maps by composing Choi matrices, and
the test suite uses this simulator as the independent cross-check.

Wire order convention: a DensityMatrix carries an explicit wire tuple;
index 0 is the most significant qubit of the matrix.  `init` appends
its new wire at the end of the order.

The first branch of a measurement is the outcome tagged tt.  Whether tt
means projecting onto |1> or |0> is a module-level switch so the
convention is written down in exactly one place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qcalg

# tt corresponds to the |1><1| projector when True
TT_PROJECTOR_IS_ONE = True

_KETS = {
    "0": np.array([1.0, 0.0], dtype=complex),
    "1": np.array([0.0, 1.0], dtype=complex),
    "+": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
    "-": np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0),
}


def ket(name: str) -> np.ndarray:
    return _KETS[name].copy()


def pure(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


class SimError(Exception):
    pass


@dataclass
class DensityMatrix:
    wires: tuple[str, ...]
    matrix: np.ndarray
    validate: bool = True

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        n = len(self.wires)
        if self.matrix.shape != (2**n, 2**n):
            raise SimError(
                f"matrix shape {self.matrix.shape} does not fit {n} wires"
            )
        if len(set(self.wires)) != n:
            raise SimError(f"duplicate wires in {self.wires}")
        if self.validate:
            if not np.allclose(self.matrix, self.matrix.conj().T, atol=1e-9):
                raise SimError("density matrix is not hermitian")
            if np.trace(self.matrix).real > 1.0 + 1e-9:
                raise SimError("density matrix has trace above one")

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def permuted(self, new_order: tuple[str, ...]) -> "DensityMatrix":
        if set(new_order) != set(self.wires):
            raise SimError(f"cannot permute {self.wires} into {new_order}")
        n = len(self.wires)
        perm = [self.wires.index(w) for w in new_order]
        tensor = self.matrix.reshape((2,) * (2 * n))
        axes = perm + [p + n for p in perm]
        out = tensor.transpose(axes).reshape(2**n, 2**n)
        return DensityMatrix(tuple(new_order), out, validate=False)


def product_state(parts: list[tuple[str, np.ndarray]]) -> DensityMatrix:
    """Tensor single-wire density matrices together, in the given order."""
    wires = tuple(w for w, _ in parts)
    mat = np.array([[1.0 + 0.0j]])
    for _, rho in parts:
        mat = np.kron(mat, np.asarray(rho, dtype=complex))
    return DensityMatrix(wires, mat)


@dataclass
class LeafOutcome:
    """One measurement branch: the path of outcomes taken (tt first),
    its probability, and the renormalized residual state."""

    path: tuple[bool, ...]
    probability: float
    state: DensityMatrix


def _embed_one(op: np.ndarray, pos: int, n: int) -> np.ndarray:
    full = np.array([[1.0 + 0.0j]])
    for i in range(n):
        full = np.kron(full, op if i == pos else np.eye(2, dtype=complex))
    return full


def _apply_gate(rho: DensityMatrix, name: str, on: tuple[str, ...]) -> DensityMatrix:
    u = qcalg.gate_matrix(name)
    n = len(rho.wires)
    k = len(on)
    positions = [rho.wires.index(w) for w in on]
    # route the gate's wires to the front, apply, route back
    rest = [i for i in range(n) if i not in positions]
    order = positions + rest
    tensor = rho.matrix.reshape((2,) * (2 * n))
    tensor = tensor.transpose(order + [p + n for p in order])
    mat = tensor.reshape(2**n, 2**n)
    big = np.kron(u, np.eye(2 ** (n - k), dtype=complex))
    mat = big @ mat @ big.conj().T
    tensor = mat.reshape((2,) * (2 * n))
    inverse = np.argsort(order).tolist()
    tensor = tensor.transpose(inverse + [p + n for p in inverse])
    return DensityMatrix(rho.wires, tensor.reshape(2**n, 2**n), validate=False)


def _trace_out(rho: DensityMatrix, wire: str) -> DensityMatrix:
    n = len(rho.wires)
    pos = rho.wires.index(wire)
    tensor = rho.matrix.reshape((2,) * (2 * n))
    reduced = np.trace(tensor, axis1=pos, axis2=pos + n)
    wires = tuple(w for w in rho.wires if w != wire)
    return DensityMatrix(wires, reduced.reshape(2 ** (n - 1), 2 ** (n - 1)), validate=False)


def _project(rho: DensityMatrix, wire: str, bit: bool) -> DensityMatrix:
    level = (1 if bit else 0) if TT_PROJECTOR_IS_ONE else (0 if bit else 1)
    proj = np.zeros((2, 2), dtype=complex)
    proj[level, level] = 1.0
    pos = rho.wires.index(wire)
    full = _embed_one(proj, pos, len(rho.wires))
    return DensityMatrix(rho.wires, full @ rho.matrix @ full.conj().T, validate=False)


def apply_channel(q: qcalg.Channel, rho: DensityMatrix) -> list[LeafOutcome]:
    """Run the channel on the state.  Output branches appear in channel
    order (tt side first), with probabilities summing to the input
    trace and states renormalized."""
    if set(rho.wires) != qcalg.in_wires(q):
        raise SimError(
            f"state is over {sorted(rho.wires)} but the channel needs {sorted(qcalg.in_wires(q))}"
        )
    outcomes = []
    for path, weight, state in _run(q, rho):
        p = weight
        if p > 1e-300:
            norm = DensityMatrix(state.wires, state.matrix / p, validate=False)
        else:
            norm = DensityMatrix(state.wires, np.zeros_like(state.matrix), validate=False)
        outcomes.append(LeafOutcome(path, p, norm))
    return outcomes


def _run(q: qcalg.Channel, rho: DensityMatrix) -> list[tuple[tuple[bool, ...], float, DensityMatrix]]:
    if isinstance(q, qcalg.Eps):
        return [((), rho.trace(), rho)]
    if isinstance(q, qcalg.Gate):
        return _run(q.rest, _apply_gate(rho, q.gate, q.wires))
    if isinstance(q, qcalg.Init):
        level = (1 if q.bit else 0) if TT_PROJECTOR_IS_ONE else (0 if q.bit else 1)
        fresh = np.zeros((2, 2), dtype=complex)
        fresh[level, level] = 1.0
        grown = DensityMatrix(
            rho.wires + (q.wire,), np.kron(rho.matrix, fresh), validate=False
        )
        return _run(q.rest, grown)
    if isinstance(q, qcalg.Free):
        return _run(q.rest, _trace_out(rho, q.wire))
    if isinstance(q, qcalg.Meas):
        tt_side = _run(q.if_true, _project(rho, q.wire, True))
        ff_side = _run(q.if_false, _project(rho, q.wire, False))
        return [((True,) + path, p, s) for path, p, s in tt_side] + [
            ((False,) + path, p, s) for path, p, s in ff_side
        ]
    raise TypeError(f"not a channel: {q!r}")


def unnormalized_branch_maps(
    q: qcalg.Channel, in_order: tuple[str, ...]
) -> list[tuple[tuple[bool, ...], tuple[str, ...], "np.ndarray"]]:
    """Tomography helper: reconstruct each branch's Choi matrix by
    feeding basis matrix units through the simulator.  Wire order of
    each output is whatever the simulator produced for that branch."""
    d = 2 ** len(in_order)
    probes: list[list[tuple[tuple[bool, ...], DensityMatrix]]] = []
    for i in range(d):
        for j in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[i, j] = 1.0
            rho = DensityMatrix(in_order, unit, validate=False)
            probes.append([(path, s) for path, _, s in _run(q, rho)])
    branches = []
    n_branches = len(probes[0])
    for b in range(n_branches):
        path = probes[0][b][0]
        out_wires = probes[0][b][1].wires
        d_out = 2 ** len(out_wires)
        choi = np.zeros((d * d_out, d * d_out), dtype=complex)
        k = 0
        for i in range(d):
            for j in range(d):
                block = probes[k][b][1].matrix
                choi[i * d_out : (i + 1) * d_out, j * d_out : (j + 1) * d_out] = block
                k += 1
        branches.append((path, out_wires, choi))
    return branches
