"""Density-matrix simulation of branching channels."""

import numpy as np
import pytest

from pql import eval as ev
from pql import qcalg, sim
from pql.parser import parse_program

import oracles


def final_channel(source: str):
    prog = parse_program(source)
    wires = frozenset(dict(prog.inputs))
    q, m = ev.initial_state(prog.term, wires)
    q, m, _ = ev.run_to_value(q, m)
    return q


def run_example(rho_in):
    q = final_channel(oracles.EXP_SOURCE)
    state = sim.DensityMatrix(("v_c",), rho_in)
    return sim.apply_channel(q, state)


class TestExampleOracle:
    @pytest.mark.parametrize(
        "rho", [oracles.RHO_PLUS, oracles.RHO_MINUS, oracles.RHO0, oracles.RHO1]
    )
    def test_matches_hand_computed_branches(self, rho):
        outcomes = run_example(rho)
        expected = oracles.exp_sim_oracle(rho)
        assert len(outcomes) == 2
        assert outcomes[0].path == (True,)
        assert outcomes[1].path == (False,)
        for got, (p, state) in zip(outcomes, expected):
            assert got.probability == pytest.approx(p, abs=1e-9)
            if p > 0:
                assert np.allclose(got.state.matrix, state, atol=1e-9)

    def test_plus_probabilities(self):
        got = [o.probability for o in run_example(oracles.RHO_PLUS)]
        assert got == pytest.approx(list(oracles.EXP_PLUS_PROBS), abs=1e-9)

    def test_one_probabilities(self):
        got = [o.probability for o in run_example(oracles.RHO1)]
        assert got == pytest.approx(list(oracles.EXP_ONE_PROBS), abs=1e-9)


class TestChannelPrimitives:
    def test_hadamard_on_zero(self):
        q = qcalg.Gate("H", ("a",), qcalg.eps("a"))
        out = sim.apply_channel(q, sim.DensityMatrix(("a",), oracles.RHO0))
        assert len(out) == 1
        assert np.allclose(out[0].state.matrix, oracles.RHO_PLUS, atol=1e-12)

    def test_measure_plus_is_fair(self):
        q = qcalg.Meas("a", qcalg.eps("a"), qcalg.eps("a"))
        out = sim.apply_channel(q, sim.DensityMatrix(("a",), oracles.RHO_PLUS))
        assert [o.probability for o in out] == pytest.approx([0.5, 0.5])
        assert np.allclose(out[0].state.matrix, oracles.RHO1, atol=1e-12)
        assert np.allclose(out[1].state.matrix, oracles.RHO0, atol=1e-12)

    def test_init_extends_the_register(self):
        q = qcalg.Init(True, "b", qcalg.eps("a", "b"))
        out = sim.apply_channel(q, sim.DensityMatrix(("a",), oracles.RHO0))
        st = out[0].state
        assert set(st.wires) == {"a", "b"}
        expect = sim.product_state([("a", oracles.RHO0), ("b", oracles.RHO1)])
        assert np.allclose(st.permuted(("a", "b")).matrix, expect.matrix, atol=1e-12)

    def test_free_traces_out(self):
        rho_ab = sim.product_state([("a", oracles.RHO_PLUS), ("b", oracles.RHO1)])
        q = qcalg.Free("b", qcalg.eps("a"))
        out = sim.apply_channel(q, rho_ab)
        assert out[0].state.wires == ("a",)
        assert np.allclose(out[0].state.matrix, oracles.RHO_PLUS, atol=1e-12)

    def test_cnot_makes_bell_pair(self):
        q = qcalg.Gate(
            "H", ("a",), qcalg.Gate("CNOT", ("a", "b"), qcalg.eps("a", "b"))
        )
        rho = sim.product_state([("a", oracles.RHO0), ("b", oracles.RHO0)])
        out = sim.apply_channel(q, rho)
        bell = np.zeros(4, dtype=complex)
        bell[0] = bell[3] = 1 / np.sqrt(2)
        expect = np.outer(bell, bell.conj())
        got = out[0].state.permuted(("a", "b")).matrix
        assert np.allclose(got, expect, atol=1e-12)

    def test_probabilities_sum_to_input_trace(self):
        q = qcalg.Meas(
            "a",
            qcalg.Meas("b", qcalg.eps("a", "b"), qcalg.eps("a", "b")),
            qcalg.Free("b", qcalg.eps("a")),
        )
        rho = sim.product_state([("a", oracles.RHO_PLUS), ("b", oracles.RHO_PLUS)])
        out = sim.apply_channel(q, rho)
        assert sum(o.probability for o in out) == pytest.approx(1.0, abs=1e-12)

    def test_state_validation(self):
        with pytest.raises(sim.SimError):
            sim.DensityMatrix(("a",), np.array([[0.5, 0.3], [0.2, 0.5]]))
        with pytest.raises(sim.SimError):
            sim.DensityMatrix(("a", "a"), np.eye(4) / 4.0)


class TestTomography:
    def test_unitary_branch_choi(self):
        q = qcalg.Gate("H", ("a",), qcalg.eps("a"))
        branches = sim.unnormalized_branch_maps(q, ("a",))
        assert len(branches) == 1
        _, out_wires, choi = branches[0]
        assert out_wires == ("a",)
        expect = oracles.choi_of_kraus([qcalg.gate_matrix("H")], 2, 2)
        assert np.allclose(choi, expect, atol=1e-12)

    def test_measurement_branch_chois(self):
        q = qcalg.Meas("a", qcalg.eps("a"), qcalg.eps("a"))
        branches = dict(
            (path, choi) for path, _, choi in sim.unnormalized_branch_maps(q, ("a",))
        )
        p1 = np.array([[0, 0], [0, 1]], dtype=complex)
        p0 = np.array([[1, 0], [0, 0]], dtype=complex)
        assert np.allclose(branches[(True,)], oracles.choi_of_kraus([p1], 2, 2))
        assert np.allclose(branches[(False,)], oracles.choi_of_kraus([p0], 2, 2))

    def test_choi_reproduces_the_action(self):
        q = qcalg.Gate("S", ("a",), qcalg.Free("a", qcalg.Init(False, "b", qcalg.eps("b"))))
        (_, out_wires, choi), = sim.unnormalized_branch_maps(q, ("a",))
        got = oracles.apply_choi(choi, oracles.RHO_PLUS, 2, 2)
        direct = sim.apply_channel(q, sim.DensityMatrix(("a",), oracles.RHO_PLUS))
        assert np.allclose(got, direct[0].state.matrix * direct[0].probability, atol=1e-12)
