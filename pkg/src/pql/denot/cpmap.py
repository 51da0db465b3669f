"""Completely positive maps as Choi matrices.

A map from a d_in-dimensional system to a d_out-dimensional one is
stored as the (d_in*d_out) square matrix

    C[(i, k), (j, l)] = L(|i><j|)[k, l]

with the input index major in the row-major flattening.  Composition,
tensoring, and application are einsum manipulations of the reshaped
4-tensor C[i, k, j, l].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CPMap:
    d_in: int
    d_out: int
    choi: np.ndarray

    def __post_init__(self):
        want = (self.d_in * self.d_out, self.d_in * self.d_out)
        if self.choi.shape != want:
            raise ValueError(f"choi shape {self.choi.shape}, expected {want}")

    def tensor4(self) -> np.ndarray:
        return self.choi.reshape(self.d_in, self.d_out, self.d_in, self.d_out)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        t = self.tensor4()
        return np.einsum("ij,ikjl->kl", np.asarray(rho, dtype=complex), t)

    def is_cp(self, tol: float = 1e-9) -> bool:
        h = (self.choi + self.choi.conj().T) / 2.0
        if not np.allclose(self.choi, h, atol=tol):
            return False
        return bool(np.linalg.eigvalsh(h).min() >= -tol)

    def trace_of_output(self) -> np.ndarray:
        """The matrix T with tr(L(rho)) = sum_ij rho[i,j] T[i,j];
        the identity exactly when the map is trace preserving."""
        return np.einsum("ikjk->ij", self.tensor4())

    def is_tp(self, tol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.trace_of_output(), np.eye(self.d_in), atol=tol)
        )

    def norm(self) -> float:
        return float(np.abs(self.choi).max()) if self.choi.size else 0.0


def from_kraus(kraus: list[np.ndarray], d_in: int, d_out: int) -> CPMap:
    choi = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    t = choi.reshape(d_in, d_out, d_in, d_out)
    for k in kraus:
        k = np.asarray(k, dtype=complex)
        t += np.einsum("ki,lj->ikjl", k, k.conj())
    return CPMap(d_in, d_out, choi)


def identity(d: int) -> CPMap:
    return from_kraus([np.eye(d, dtype=complex)], d, d)


def zero(d_in: int, d_out: int) -> CPMap:
    return CPMap(d_in, d_out, np.zeros((d_in * d_out, d_in * d_out), dtype=complex))


def unitary_map(u: np.ndarray) -> CPMap:
    u = np.asarray(u, dtype=complex)
    return from_kraus([u], u.shape[1], u.shape[0])


def init_map(bit_level: int) -> CPMap:
    """Scalar -> qubit: prepare the given basis level."""
    k = np.zeros((2, 1), dtype=complex)
    k[bit_level, 0] = 1.0
    return from_kraus([k], 1, 2)


def free_map() -> CPMap:
    """Qubit -> scalar: the trace."""
    k0 = np.array([[1.0, 0.0]], dtype=complex)
    k1 = np.array([[0.0, 1.0]], dtype=complex)
    return from_kraus([k0, k1], 2, 1)


def proj_map(level: int) -> CPMap:
    """Unrenormalized projection onto one basis level of a qubit."""
    p = np.zeros((2, 2), dtype=complex)
    p[level, level] = 1.0
    return from_kraus([p], 2, 2)


def compose(g: CPMap, f: CPMap) -> CPMap:
    """g after f."""
    if f.d_out != g.d_in:
        raise ValueError(f"cannot compose {g.d_in}<-?-{f.d_out}")
    t = np.einsum("ikjl,kmln->imjn", f.tensor4(), g.tensor4())
    d = f.d_in * g.d_out
    return CPMap(f.d_in, g.d_out, t.reshape(d, d))


def tensor(f: CPMap, g: CPMap) -> CPMap:
    t = np.einsum("ikjl,mpnq->imkpjnlq", f.tensor4(), g.tensor4())
    d_in = f.d_in * g.d_in
    d_out = f.d_out * g.d_out
    return CPMap(d_in, d_out, t.reshape(d_in * d_out, d_in * d_out))


def add(f: CPMap, g: CPMap) -> CPMap:
    if (f.d_in, f.d_out) != (g.d_in, g.d_out):
        raise ValueError("dimension mismatch in sum")
    return CPMap(f.d_in, f.d_out, f.choi + g.choi)


def scale(f: CPMap, a: float) -> CPMap:
    return CPMap(f.d_in, f.d_out, f.choi * a)


def close(f: CPMap, g: CPMap, tol: float = 1e-9) -> bool:
    return (f.d_in, f.d_out) == (g.d_in, g.d_out) and bool(
        np.allclose(f.choi, g.choi, atol=tol)
    )


def deviation(f: CPMap, g: CPMap) -> float:
    if (f.d_in, f.d_out) != (g.d_in, g.d_out):
        return float("inf")
    if f.choi.size == 0:
        return 0.0
    return float(np.abs(f.choi - g.choi).max())


def qubit_permutation_matrix(perm: list[int]) -> np.ndarray:
    """Unitary sending qubit i of the input to position perm[i]."""
    n = len(perm)
    d = 2**n
    u = np.zeros((d, d), dtype=complex)
    for src in range(d):
        bits = [(src >> (n - 1 - i)) & 1 for i in range(n)]
        out_bits = [0] * n
        for i, b in enumerate(bits):
            out_bits[perm[i]] = b
        dst = 0
        for b in out_bits:
            dst = (dst << 1) | b
        u[dst, src] = 1.0
    return u


def qubit_permutation(perm: list[int]) -> CPMap:
    return unitary_map(qubit_permutation_matrix(perm))


def embed_unitary(u: np.ndarray, positions: list[int], n: int) -> np.ndarray:
    """Lift a gate on the listed qubit positions (in gate wire order)
    to the full n-qubit register."""
    k = len(positions)
    to_front = [0] * n
    slot = k
    for i in range(n):
        if i in positions:
            to_front[i] = positions.index(i)
        else:
            to_front[i] = slot
            slot += 1
    p_front = qubit_permutation_matrix(to_front)
    big = np.kron(np.asarray(u, dtype=complex), np.eye(2 ** (n - k), dtype=complex))
    return p_front.conj().T @ big @ p_front
