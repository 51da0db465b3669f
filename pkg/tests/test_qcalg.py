"""Channel algebra: wire discipline, gate table, bunch structure."""

import numpy as np
import pytest

from pql import qcalg
from pql.qcalg import (
    BunchLeaf,
    BunchNode,
    Eps,
    Free,
    Gate,
    Init,
    InvalidChannel,
    Meas,
    WireClash,
    all_wires,
    bunch_leaves,
    eps,
    extend,
    gate_arity,
    gate_matrix,
    in_wires,
    known_gates,
    register_gate,
    validate,
)


def w(*names):
    return frozenset(names)


class TestValidate:
    def test_eps_matches_live_wires(self):
        assert validate(eps("a", "b"), w("a", "b")) == BunchLeaf(w("a", "b"))

    def test_eps_mismatch(self):
        with pytest.raises(InvalidChannel):
            validate(eps("a"), w("a", "b"))

    def test_gate_keeps_wires(self):
        q = Gate("H", ("a",), eps("a", "b"))
        assert validate(q, w("a", "b")) == BunchLeaf(w("a", "b"))

    def test_gate_on_dead_wire(self):
        with pytest.raises(InvalidChannel):
            validate(Gate("H", ("c",), eps("a")), w("a"))

    def test_gate_repeated_wire(self):
        with pytest.raises(WireClash):
            validate(Gate("CNOT", ("a", "a"), eps("a")), w("a"))

    def test_gate_arity_mismatch(self):
        with pytest.raises(InvalidChannel):
            validate(Gate("CNOT", ("a",), eps("a")), w("a"))

    def test_unknown_gate(self):
        with pytest.raises(InvalidChannel):
            validate(Gate("NOPE", ("a",), eps("a")), w("a"))

    def test_init_adds_wire(self):
        q = Init(True, "b", eps("a", "b"))
        assert validate(q, w("a")) == BunchLeaf(w("a", "b"))

    def test_init_reuses_live_wire(self):
        with pytest.raises(WireClash):
            validate(Init(False, "a", eps("a")), w("a"))

    def test_free_removes_wire(self):
        q = Free("a", eps("b"))
        assert validate(q, w("a", "b")) == BunchLeaf(w("b"))

    def test_free_dead_wire(self):
        with pytest.raises(InvalidChannel):
            validate(Free("c", eps("a")), w("a"))

    def test_meas_branches_and_keeps_wire(self):
        q = Meas("a", eps("a"), Free("a", eps()))
        got = validate(q, w("a"))
        assert got == BunchNode(BunchLeaf(w("a")), BunchLeaf(w()))

    def test_meas_dead_wire(self):
        with pytest.raises(InvalidChannel):
            validate(Meas("c", eps("a"), eps("a")), w("a"))

    def test_nested_measurement_tree(self):
        inner = Meas("b", eps("a", "b"), eps("a", "b"))
        q = Meas("a", Init(True, "b", inner), Free("a", eps()))
        got = validate(q, w("a"))
        assert isinstance(got, BunchNode)
        assert bunch_leaves(got) == [w("a", "b"), w("a", "b"), w()]


class TestWireQueries:
    def test_in_wires_ignores_initialized(self):
        q = Init(True, "b", Gate("CNOT", ("a", "b"), eps("a", "b")))
        assert in_wires(q) == w("a")

    def test_in_wires_branching(self):
        q = Meas("a", eps("a", "b"), Free("b", eps("a")))
        assert in_wires(q) == w("a", "b")

    def test_all_wires(self):
        q = Init(True, "b", Free("a", eps("b")))
        assert all_wires(q) == w("a", "b")

    def test_extend_widens_every_leaf(self):
        q = Meas("a", eps("a"), Free("a", eps()))
        q2 = extend(q, w("z"))
        assert validate(q2, w("a", "z")) == BunchNode(
            BunchLeaf(w("a", "z")), BunchLeaf(w("z"))
        )


class TestGateTable:
    def test_known_gates_cover_the_macro_set(self):
        have = set(known_gates())
        assert {"X", "Y", "Z", "H", "S", "T", "CNOT", "CZ"} <= have

    def test_arities(self):
        assert gate_arity("H") == 1
        assert gate_arity("CNOT") == 2

    def test_matrices_are_unitary(self):
        for name in known_gates():
            m = gate_matrix(name)
            assert np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=1e-12)

    def test_matrices_are_read_only(self):
        with pytest.raises(ValueError):
            gate_matrix("H")[0, 0] = 5.0

    def test_register_rejects_non_unitary(self):
        with pytest.raises(ValueError):
            register_gate("BAD", np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_register_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            register_gate("BAD3", np.eye(3))

    def test_register_roundtrip(self):
        phase = np.diag([1.0, np.exp(0.25j)])
        register_gate("PHASE_TEST", phase)
        assert np.allclose(gate_matrix("PHASE_TEST"), phase)
        assert gate_arity("PHASE_TEST") == 1
