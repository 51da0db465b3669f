"""Reduction: golden traces, stepping invariants, wire hygiene."""

import pytest

from pql import eval as ev
from pql import qcalg
from pql.parser import parse_program, parse_term
from pql.printer import pretty_channel, pretty_term
from pql.syntax import BLeaf, TT, branch_leaves, is_value

import oracles


def reduce_source(source: str):
    prog = parse_program(source)
    wires = frozenset(dict(prog.inputs))
    q, m = ev.initial_state(prog.term, wires)
    return ev.run_to_value(q, m)


def fresh_names(q, m, declared):
    return sorted(ev.state_names(q, m) - set(declared))


class TestGoldenReduction:
    def test_rule_chain_sequence(self):
        _, _, trace = reduce_source(oracles.EXP_SOURCE)
        assert [s.rule for s in trace] == oracles.EXP_RULE_CHAINS

    def test_final_state_up_to_fresh_wire(self):
        q, m, _ = reduce_source(oracles.EXP_SOURCE)
        fresh = fresh_names(q, m, ["v_c"])
        assert len(fresh) == 1
        expect_chan = oracles.EXP_FINAL_CHANNEL_TEXT.replace("FRESH", fresh[0])
        expect_leaves = [
            s.replace("FRESH", fresh[0]) for s in oracles.EXP_FINAL_LEAVES_TEXT
        ]
        assert pretty_channel(q) == expect_chan
        assert [pretty_term(t) for t in branch_leaves(m)] == expect_leaves

    def test_all_leaves_are_values(self):
        _, m, _ = reduce_source(oracles.EXP_SOURCE)
        assert all(is_value(t) for t in branch_leaves(m))

    def test_trace_is_deterministic(self):
        a = reduce_source(oracles.EXP_SOURCE)
        b = reduce_source(oracles.EXP_SOURCE)
        assert [s.rule for s in a[2]] == [s.rule for s in b[2]]
        assert ev.states_equal(a[0], a[1], b[0], b[1], frozenset({"v_c"}))


class TestStepping:
    def test_value_takes_no_step(self):
        q, m = ev.initial_state(TT(), frozenset())
        assert ev.step_configuration(q, m, ev.FreshWires(set())) is None

    def test_run_counts_steps(self):
        q, m, trace = reduce_source("free (init_tt *)")
        assert len(trace) >= 2
        assert pretty_channel(q).startswith("init tt")

    def test_fuel_exhaustion_reported(self):
        prog = parse_program(oracles.EXP_SOURCE)
        q, m = ev.initial_state(prog.term, frozenset({"v_c"}))
        with pytest.raises(ev.FuelExhausted):
            ev.run_to_value(q, m, fuel=1)

    def test_stuck_untyped_term(self):
        q, m = ev.initial_state(parse_term("tt ff"), frozenset())
        with pytest.raises(ev.EvalError):
            ev.run_to_value(q, m)

    def test_measure_forks_the_branching(self):
        q, m, _ = reduce_source("input a : qubit;\nlet <b, v> = meas a in <b, v>")
        assert isinstance(q, qcalg.Meas)
        assert len(branch_leaves(m)) == 2


class TestWireHygiene:
    def test_fresh_wires_avoid_declared_names(self):
        src = "input w0 : qubit;\n<free w0, init_tt *>"
        q, m, _ = reduce_source(src)
        fresh = fresh_names(q, m, ["w0"])
        assert len(fresh) == 1 and fresh[0] != "w0"
        qcalg.validate(q, frozenset({"w0"}))

    def test_two_inits_get_distinct_wires(self):
        q, m, _ = reduce_source("<init_tt *, init_ff *>")
        leaves = branch_leaves(m)
        assert len(leaves) == 1
        bunch = qcalg.validate(q, frozenset())
        assert len(qcalg.bunch_leaves(bunch)[0]) == 2

    def test_boxed_constant_wires_do_not_leak(self):
        src = "input x1 : qubit;\nH x1"
        q, m, _ = reduce_source(src)
        assert ev.state_names(q, m) == {"x1"}


class TestStatesEqual:
    def test_renaming_of_unprotected_wires(self):
        q1 = qcalg.Init(True, "a", qcalg.eps("a"))
        q2 = qcalg.Init(True, "b", qcalg.eps("b"))
        m1 = BLeaf(parse_term("a"))
        m2 = BLeaf(parse_term("b"))
        assert ev.states_equal(q1, m1, q2, m2)

    def test_protected_wires_must_match_exactly(self):
        q1 = qcalg.Free("a", qcalg.eps())
        q2 = qcalg.Free("b", qcalg.eps())
        m = BLeaf(TT())
        assert not ev.states_equal(q1, m, q2, m, frozenset({"a", "b"}))

    def test_bit_value_matters(self):
        q1 = qcalg.Init(True, "a", qcalg.eps("a"))
        q2 = qcalg.Init(False, "b", qcalg.eps("b"))
        m1 = BLeaf(parse_term("a"))
        m2 = BLeaf(parse_term("b"))
        assert not ev.states_equal(q1, m1, q2, m2)


class TestSubstitution:
    def test_capture_avoided(self):
        body = parse_term("fun y -> <x, y>")
        out = ev.substitute(body, "x", parse_term("y"))
        assert isinstance(out, type(body))
        assert out.var != "y"
        got = ev.substitute(out.body, out.var, TT())
        assert pretty_term(got) == "<y, tt>"

    def test_shadowed_binder_untouched(self):
        t = parse_term("fun x -> x")
        assert ev.substitute(t, "x", TT()) == t
