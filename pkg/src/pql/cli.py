"""Command-line front end.

Subcommands:

    check     parse and typecheck a program, report its type
    run       reduce a program to a branching value and final channel
    simulate  run, then push an input state through the final channel
    soundness re-typecheck and re-interpret after every reduction step
    denote    print the program denotation as JSON

Exit status: 0 on success, 1 on a semantic failure (typing, stuck
evaluation, soundness violation), 2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import jsonio
from .eval import EvalError, initial_state, run_to_value
from .parser import ParseError, parse_program, parse_type
from .printer import pretty_branching, pretty_channel, pretty_term, pretty_type
from .sim import DensityMatrix, SimError, apply_channel, product_state
from .syntax import BLeaf, BNode, TQubit
from .typecheck import TypeCheckError, check_configuration, check_term


class UsageFailure(Exception):
    pass


class SemanticFailure(Exception):
    pass


def _read_program(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            source = fh.read()
    except OSError as e:
        raise UsageFailure(f"cannot read {path}: {e.strerror or e}") from None
    try:
        return parse_program(source)
    except ParseError as e:
        raise UsageFailure(f"SyntaxError: {path}: {e}") from None


def _diagnostic(e: TypeCheckError) -> str:
    doc = {"error": type(e).__name__, "message": str(e)}
    if e.rule is not None:
        doc["rule"] = e.rule
    if e.where is not None:
        doc["location"] = pretty_term(e.where)
    return json.dumps(doc, sort_keys=True)


def _qubit_wires(prog) -> frozenset[str]:
    bad = [n for n, ty in prog.inputs if ty != TQubit()]
    if bad:
        raise SemanticFailure(
            f"inputs {bad} are not qubit wires; only qubit inputs can seed a configuration"
        )
    return frozenset(n for n, _ in prog.inputs)


def _compact(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# check

def _cmd_check(args) -> int:
    prog = _read_program(args.file)
    goal = None
    if args.type is not None:
        try:
            goal = parse_type(args.type)
        except ParseError as e:
            raise UsageFailure(f"SyntaxError: --type: {e}") from None
    try:
        d = check_term(prog.term, goal, inputs=dict(prog.inputs))
    except TypeCheckError as e:
        print(_diagnostic(e))
        return 1
    print(pretty_type(d.type))
    return 0


# ---------------------------------------------------------------------------
# run

def _checked_initial(prog):
    wires = _qubit_wires(prog)
    q0, m0 = initial_state(prog.term, wires)
    ty, bd = check_configuration(q0, m0, wires)
    return q0, m0, wires, ty, bd


def _cmd_run(args) -> int:
    prog = _read_program(args.file)
    try:
        q0, m0, wires, ty, _ = _checked_initial(prog)
    except TypeCheckError as e:
        print(_diagnostic(e))
        return 1
    try:
        q, m, trace = run_to_value(q0, m0, fuel=args.fuel)
    except EvalError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    if args.trace:
        for i, st in enumerate(trace, start=1):
            print(_compact(jsonio.step_to_doc(i, st.rule, st.channel, st.branches)))
    if args.emit == "json":
        doc = jsonio.config_to_doc(q, m)
        doc["steps"] = len(trace)
        doc["type"] = pretty_type(ty)
        print(jsonio.dump_json(doc))
    elif args.emit == "dot":
        sys.stdout.write(jsonio.config_to_dot(q, m, wires))
    else:
        print(f"type: {pretty_type(ty)}")
        print(f"steps: {len(trace)}")
        print(f"channel: {pretty_channel(q)}")
        print(f"value: {pretty_branching(m)}")
    return 0


# ---------------------------------------------------------------------------
# simulate

_KET_STATES = {
    "0": np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex),
    "1": np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex),
    "+": np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex),
    "-": np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex),
}


def _entry_to_complex(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if (
        isinstance(v, list)
        and len(v) == 2
        and all(isinstance(x, (int, float)) for x in v)
    ):
        return complex(v[0], v[1])
    raise UsageFailure(f"matrix entry {v!r} is neither a number nor [re, im]")


def _one_wire_state(spec) -> np.ndarray:
    if isinstance(spec, str):
        key = spec.strip().replace("−", "-")
        if key in _KET_STATES:
            return _KET_STATES[key].copy()
        raise UsageFailure(f"unknown state {spec!r} (expected 0, 1, +, or -)")
    if isinstance(spec, list):
        if len(spec) != 2 or any(not isinstance(r, list) or len(r) != 2 for r in spec):
            raise UsageFailure("explicit state matrices must be 2x2")
        return np.array(
            [[_entry_to_complex(v) for v in row] for row in spec], dtype=complex
        )
    raise UsageFailure(f"bad state spec {spec!r}")


def _parse_state_arg(text: str, wires: frozenset[str]) -> DensityMatrix:
    specs: dict[str, object] = {}
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as e:
            raise UsageFailure(f"--in: bad JSON: {e}") from None
        if not isinstance(obj, dict):
            raise UsageFailure("--in: JSON form must be an object of wire: state")
        specs.update(obj)
    else:
        for part in stripped.split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise UsageFailure(f"--in: expected wire=state, found {part!r}")
            name, val = part.split("=", 1)
            specs[name.strip()] = val.strip()
    missing = sorted(wires - specs.keys())
    if missing:
        raise UsageFailure(f"--in: no state given for input wires {missing}")
    extra = sorted(specs.keys() - wires)
    if extra:
        raise UsageFailure(f"--in: {extra} are not input wires of the program")
    parts = [(w, _one_wire_state(specs[w])) for w in sorted(wires)]
    try:
        return product_state(parts)
    except SimError as e:
        raise UsageFailure(f"--in: {e}") from None


def _leaf_at(m, path: tuple[bool, ...]):
    cur = m
    for bit in path:
        if not isinstance(cur, BNode):
            return None
        cur = cur.left if bit else cur.right
    return cur.term if isinstance(cur, BLeaf) else None


def _fmt_path(path: tuple[bool, ...]) -> str:
    return "[" + ",".join("tt" if b else "ff" for b in path) + "]"


def _fmt_matrix(mat: np.ndarray) -> str:
    rows = []
    for row in np.asarray(mat, dtype=complex):
        cells = " ".join(f"{v.real:+.6f}{v.imag:+.6f}j" for v in row)
        rows.append(f"    [ {cells} ]")
    return "\n".join(rows)


def _cmd_simulate(args) -> int:
    prog = _read_program(args.file)
    try:
        q0, m0, wires, ty, _ = _checked_initial(prog)
    except TypeCheckError as e:
        print(_diagnostic(e))
        return 1
    rho = _parse_state_arg(args.in_state, wires)
    try:
        q, m, _ = run_to_value(q0, m0, fuel=args.fuel)
        outcomes = apply_channel(q, rho)
    except (EvalError, SimError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    print(f"type: {pretty_type(ty)}")
    for out in outcomes:
        leaf = _leaf_at(m, out.path)
        print(f"branch {_fmt_path(out.path)}: probability {out.probability:.9f}")
        if leaf is not None:
            print(f"  value: {pretty_term(leaf)}")
        live = ", ".join(out.state.wires) if out.state.wires else "none"
        print(f"  state wires: {live}")
        print(_fmt_matrix(out.state.matrix))
    return 0


# ---------------------------------------------------------------------------
# soundness

def _cmd_soundness(args) -> int:
    from .denot import soundness_trace

    prog = _read_program(args.file)
    wires = _qubit_wires(prog)
    try:
        report = soundness_trace(prog.term, wires, fuel=args.fuel, tol=args.tol)
    except TypeCheckError as e:
        print(_diagnostic(e))
        return 1
    except EvalError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    print(f"type: {pretty_type(report.type)}")
    for i, st in enumerate(report.steps, start=1):
        print(f"step {i}: {st.rule} deviation {st.deviation:.3e}")
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict} max deviation {report.max_deviation:.3e} (tol {args.tol:g})")
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# denote

def _index_desc(v) -> str:
    if v is True:
        return "tt"
    if v is False:
        return "ff"
    if isinstance(v, tuple):
        return "(" + ", ".join(_index_desc(x) for x in v) + ")"
    return str(v)


def _bmor_doc(b) -> dict:
    blocks = [
        [jsonio.matrix_to_doc(cp.choi) for cp in row] for row in b.blocks
    ]
    if len(blocks) == 1 and len(blocks[0]) == 1:
        return {"choi": blocks[0][0]}
    return {"blocks": blocks}


def _cmd_denote(args) -> int:
    from .denot import Interpreter

    prog = _read_program(args.file)
    try:
        q0, m0, wires, ty, bd = _checked_initial(prog)
    except TypeCheckError as e:
        print(_diagnostic(e))
        return 1
    k = Interpreter().denote_configuration(q0, bd, wires)
    if k.dom.indices is None:
        raise SemanticFailure("program context has no enumerable denotation")
    rows = []
    for x in k.dom.indices:
        fv = k.at(x)
        branches = []
        for elem, comp in zip(fv.elements, fv.comps):
            entry = {"index": _index_desc(elem)}
            entry.update(_bmor_doc(comp))
            branches.append(entry)
        rows.append(
            {
                "at": _index_desc(x),
                "image": [_index_desc(e) for e in fv.elements],
                "branches": branches,
            }
        )
    doc = {
        "type": pretty_type(ty),
        "wires": sorted(wires),
        "map": rows,
    }
    print(jsonio.dump_json(doc))
    return 0


# ---------------------------------------------------------------------------
# wiring

def _default_seed() -> int | None:
    raw = os.environ.get("PQL_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise UsageFailure(f"PQL_SEED={raw!r} is not an integer") from None


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="pql",
        description="Typecheck, reduce, simulate, and interpret circuit-description programs.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse and typecheck a program")
    p.add_argument("file")
    p.add_argument("--type", help="expected type to check against")
    p.set_defaults(fn=_cmd_check)

    p = sub.add_parser("run", help="reduce a program to a value")
    p.add_argument("file")
    p.add_argument("--trace", action="store_true", help="print one JSON line per step")
    p.add_argument("--fuel", type=int, default=10000)
    p.add_argument(
        "--seed",
        type=int,
        default=None,
        help="seed recorded for reproducibility (evaluation itself is deterministic); defaults to PQL_SEED",
    )
    p.add_argument("--emit", choices=["json", "dot"], help="machine-readable output")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("simulate", help="run and apply the final channel to a state")
    p.add_argument("file")
    p.add_argument(
        "--in",
        dest="in_state",
        required=True,
        help='input state, e.g. "v_c=+" or \'{"v_c": "+"}\' (kets 0/1/+/- or 2x2 matrices)',
    )
    p.add_argument("--fuel", type=int, default=10000)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("soundness", help="check the denotation is preserved step by step")
    p.add_argument("file")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--fuel", type=int, default=10000)
    p.set_defaults(fn=_cmd_soundness)

    p = sub.add_parser("denote", help="print the program denotation as JSON")
    p.add_argument("file")
    p.set_defaults(fn=_cmd_denote)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "seed", None) is None and hasattr(args, "seed"):
        try:
            args.seed = _default_seed()
        except UsageFailure as e:
            print(f"usage error: {e}", file=sys.stderr)
            return 2
    try:
        return args.fn(args)
    except UsageFailure as e:
        print(f"usage error: {e}" if not str(e).startswith("SyntaxError") else str(e), file=sys.stderr)
        return 2
    except SemanticFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
