"""Frozen expected values, computed by hand before the implementation.

Nothing here imports the package.  Every constant was derived on paper
from first principles (projector algebra on 2x2 density matrices, plus
the standard Kraus-to-Choi formula), so these act as an independent
check on the toolchain rather than a regression snapshot of it.
"""

from __future__ import annotations

import numpy as np

# ---------------------------------------------------------------------------
# The running example program: measure a qubit, then branch.  On tt we
# discard the measured qubit and prepare a fresh one in state 1; on ff
# we keep the qubit.  `FRESH` marks the one wire the evaluator invents.

EXP_SOURCE = """\
input v_c : qubit;

let <b, v> = meas v_c in
if b then <init_tt *, free v> else <v, *>
"""

EXP_TYPE_TEXT = "qubit * I"
MEAS_TYPE_TEXT = "!(qubit -o bool * qubit)"
FREE_TYPE_TEXT = "!(qubit -o I)"
INIT_APPLIED_SOURCE = "init_tt *"
INIT_APPLIED_TYPE_TEXT = "qubit"

# Hand-stepped reduction of EXP_SOURCE, one leaf per step, leftmost
# branch first.  Each entry is the chain of rules applied at that step,
# outermost context first.
EXP_RULE_CHAINS = [
    "c.6>b.2",
    "d.2>a.2",
    "d.2>a.3",
    "d.2>c.3>b.2",
    "d.2>d.4>c.4>b.2",
    "d.3>a.2",
    "d.3>a.3",
]

# Final configuration, with FRESH standing for the invented wire.
EXP_FINAL_CHANNEL_TEXT = "meas v_c { init tt FRESH; free v_c; eps{FRESH} | eps{v_c} }"
EXP_FINAL_LEAVES_TEXT = ["<FRESH, *>", "<v_c, *>"]

# ---------------------------------------------------------------------------
# Simulation oracle for the example, by hand.
#
# The final channel measures v_c.  Writing the input state as
# rho = [[a, b], [b*, d]] (trace 1):
#   tt branch: project with |1><1|, probability d; then free v_c and
#     init a fresh qubit in |1>, so the state is |1><1| on FRESH.
#   ff branch: project with |0><0|, probability a; v_c survives in
#     state |0><0| (the projected state renormalized).

KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)
KET_PLUS = (KET0 + KET1) / np.sqrt(2.0)
KET_MINUS = (KET0 - KET1) / np.sqrt(2.0)

RHO0 = np.outer(KET0, KET0.conj())
RHO1 = np.outer(KET1, KET1.conj())
RHO_PLUS = np.outer(KET_PLUS, KET_PLUS.conj())
RHO_MINUS = np.outer(KET_MINUS, KET_MINUS.conj())


def exp_sim_oracle(rho_in: np.ndarray) -> list[tuple[float, np.ndarray]]:
    """Per-branch (probability, normalized state) for EXP_SOURCE,
    tt branch first.  A zero-probability branch reports a zero state."""
    rho_in = np.asarray(rho_in, dtype=complex)
    p_tt = float(np.real(rho_in[1, 1]))
    p_ff = float(np.real(rho_in[0, 0]))
    state_tt = RHO1.copy() if p_tt > 0 else np.zeros((2, 2), dtype=complex)
    state_ff = RHO0.copy() if p_ff > 0 else np.zeros((2, 2), dtype=complex)
    return [(p_tt, state_tt), (p_ff, state_ff)]


EXP_PLUS_PROBS = (0.5, 0.5)
EXP_ONE_PROBS = (1.0, 0.0)

# ---------------------------------------------------------------------------
# Choi matrices, textbook convention.
#
# A map L on d_in-dimensional states with outputs of dimension d_out is
# stored as the (d_in*d_out)^2 matrix C with
#   C[(i, k), (j, l)] = L(|i><j|)[k, l]
# where row index (i, k) is flattened row-major.  For Kraus operators
# {K}: C[(i,k),(j,l)] = sum_K K[k,i] * conj(K[l,j]).


def choi_of_kraus(kraus: list[np.ndarray], d_in: int, d_out: int) -> np.ndarray:
    c = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for k in kraus:
        k = np.asarray(k, dtype=complex).reshape(d_out, d_in)
        for i in range(d_in):
            for j in range(d_in):
                block = np.outer(k[:, i], k[:, j].conj())
                for kk in range(d_out):
                    for ll in range(d_out):
                        c[i * d_out + kk, j * d_out + ll] += block[kk, ll]
    return c


def apply_choi(choi: np.ndarray, rho: np.ndarray, d_in: int, d_out: int) -> np.ndarray:
    out = np.zeros((d_out, d_out), dtype=complex)
    for i in range(d_in):
        for j in range(d_in):
            out += rho[i, j] * choi.reshape(d_in, d_out, d_in, d_out)[i, :, j, :]
    return out


# ---------------------------------------------------------------------------
# Denotational expectations for the example.
#
# At output type qubit * I the index set is the one-point set {((),())},
# and the example's two measurement branches both land on it, so the
# image of the empty input index is a two-element multiset with both
# elements equal.

EXP_INDEX_MULTISET = (((), ()), ((), ()))
