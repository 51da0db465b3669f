"""Parser for .pql source files.

Surface grammar, LL(1) over a hand-rolled token stream:

    program  ::= ("input" IDENT ":" type ";")* term
    term     ::= "fun" IDENT "->" term
               | "let" "<" IDENT "," IDENT ">" "=" term "in" term
               | "if" term "then" term "else" term
               | atom atom*                          (application, left assoc)
    atom     ::= IDENT | "*" | "tt" | "ff" | "unbox"
               | "box" "[" type "]"
               | "qchan" "(" pattern ";" channel ";" branching ")"
               | "meas" | "free" | "init_tt" | "init_ff"      (macros)
               | "<" term "," term ">" | "(" term ")"
    branching::= term | "[" branching "," branching "]"
    pattern  ::= IDENT | "*" | "<" pattern "," pattern ">"
    channel  ::= "eps" "{" wires "}" | IDENT "(" wires ")" ";" channel
               | "init" ("tt"|"ff") IDENT ";" channel
               | "meas" IDENT "{" channel "|" channel "}"
               | "free" IDENT ";" channel
    type     ::= tensor ["-o" type] ; tensor ::= prefix ["*" tensor]
    prefix   ::= "!" prefix | "I" | "bool" | "qubit"
               | "QChan" "(" type "," type ")" | "(" type ")"

"#" starts a comment running to end of line.  Identifiers matching a
registered gate name (H, X, CNOT, ...) are reserved: they expand to the
gate's channel constant, just as meas/free/init_tt/init_ff expand to
theirs.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import qcalg
from .qcalg import Channel, Eps, Free, Gate, Init, Meas
from .syntax import (
    App,
    BLeaf,
    BNode,
    Box,
    Branching,
    FF_TERM,
    If,
    Lam,
    LetPair,
    Pair,
    Pattern,
    PPair,
    PUnit,
    PVar,
    QChanConst,
    TT_TERM,
    TBang,
    TChan,
    TLolli,
    TTensor,
    Term,
    Type,
    UNBOX,
    UNIT,
    UNIT_TERM,
    BOOL,
    QUBIT,
    Var,
    is_pattern_type,
    mk_app,
    pattern_linear,
    pattern_vars,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.line = line
        self.col = col


KEYWORDS = {
    "fun", "let", "in", "if", "then", "else", "input",
    "tt", "ff", "box", "unbox", "qchan",
    "meas", "free", "init", "init_tt", "init_ff", "eps",
    "I", "bool", "qubit", "QChan",
}

PUNCT = {"(", ")", "<", ">", "[", "]", "{", "}", ",", ";", ":", "|", "*", "!", "=", "->", "-o"}


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "kw" | "punct" | "eof"
    text: str
    line: int
    col: int


class Lexer:
    def __init__(self, source: str):
        self.source = source
        self.idx = 0
        self.line = 1
        self.col = 1

    def has_input(self) -> bool:
        return self.idx < len(self.source)

    def peek_char(self) -> str:
        return self.source[self.idx] if self.has_input() else ""

    def read_char(self) -> str:
        c = self.source[self.idx]
        self.idx += 1
        if c == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return c

    def tokens(self) -> list[Token]:
        out = []
        while True:
            tok = self.next_token()
            out.append(tok)
            if tok.kind == "eof":
                return out

    def next_token(self) -> Token:
        while self.has_input():
            c = self.peek_char()
            if c in " \t\r\n":
                self.read_char()
            elif c == "#":
                while self.has_input() and self.peek_char() != "\n":
                    self.read_char()
            else:
                break
        if not self.has_input():
            return Token("eof", "", self.line, self.col)
        line, col = self.line, self.col
        c = self.read_char()
        if c.isalpha() or c == "_":
            word = c
            while self.has_input() and (self.peek_char().isalnum() or self.peek_char() in "_'"):
                word += self.read_char()
            kind = "kw" if word in KEYWORDS else "ident"
            return Token(kind, word, line, col)
        if c == "-":
            if self.peek_char() == ">":
                self.read_char()
                return Token("punct", "->", line, col)
            if self.peek_char() == "o":
                self.read_char()
                return Token("punct", "-o", line, col)
            raise ParseError("stray '-' (expected '->' or '-o')", line, col)
        if c in PUNCT:
            return Token("punct", c, line, col)
        raise ParseError(f"unexpected character {c!r}", line, col)


@dataclass(frozen=True)
class Program:
    inputs: tuple[tuple[str, Type], ...]
    term: Term


class Parser:
    def __init__(self, source: str):
        self.toks = Lexer(source).tokens()
        self.pos = 0

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        tok = self.peek()
        if tok.kind == kind and (text is None or tok.text == text):
            return self.next()
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            raise ParseError(f"expected {want!r}, found {tok.text or tok.kind!r}", tok.line, tok.col)
        return self.next()

    # -- programs -----------------------------------------------------------

    def program(self) -> Program:
        inputs = []
        seen = set()
        while self.accept("kw", "input"):
            name = self.expect("ident").text
            if name in seen:
                raise ParseError(f"duplicate input {name!r}")
            seen.add(name)
            self.expect("punct", ":")
            ty = self.type_expr()
            self.expect("punct", ";")
            inputs.append((name, ty))
        t = self.term()
        self.expect("eof")
        return Program(tuple(inputs), t)

    # -- terms --------------------------------------------------------------

    def term(self) -> Term:
        tok = self.peek()
        if tok.kind == "kw" and tok.text == "fun":
            self.next()
            var = self.expect("ident").text
            self.expect("punct", "->")
            return Lam(var, self.term())
        if tok.kind == "kw" and tok.text == "let":
            self.next()
            self.expect("punct", "<")
            x = self.expect("ident").text
            self.expect("punct", ",")
            y = self.expect("ident").text
            self.expect("punct", ">")
            if x == y:
                raise ParseError(f"let pair binds {x!r} twice", tok.line, tok.col)
            self.expect("punct", "=")
            pair = self.term()
            self.expect("kw", "in")
            return LetPair(x, y, pair, self.term())
        if tok.kind == "kw" and tok.text == "if":
            self.next()
            cond = self.term()
            self.expect("kw", "then")
            then = self.term()
            self.expect("kw", "else")
            return If(cond, then, self.term())
        t = self.atom()
        while self.starts_atom():
            t = mk_app(t, self.atom())
        return t

    def starts_atom(self) -> bool:
        tok = self.peek()
        if tok.kind == "ident":
            return True
        if tok.kind == "kw":
            return tok.text in {"tt", "ff", "box", "unbox", "qchan", "meas", "free", "init_tt", "init_ff"}
        if tok.kind == "punct":
            return tok.text in {"(", "<", "*"}
        return False

    def atom(self) -> Term:
        tok = self.next()
        if tok.kind == "ident":
            if tok.text in qcalg.known_gates():
                return gate_macro(tok.text)
            return Var(tok.text)
        if tok.kind == "punct" and tok.text == "*":
            return UNIT_TERM
        if tok.kind == "punct" and tok.text == "(":
            t = self.term()
            self.expect("punct", ")")
            return t
        if tok.kind == "punct" and tok.text == "<":
            left = self.term()
            self.expect("punct", ",")
            right = self.term()
            self.expect("punct", ">")
            return Pair(left, right)
        if tok.kind == "kw":
            if tok.text == "tt":
                return TT_TERM
            if tok.text == "ff":
                return FF_TERM
            if tok.text == "unbox":
                return UNBOX
            if tok.text == "box":
                self.expect("punct", "[")
                ty = self.type_expr()
                self.expect("punct", "]")
                if not is_pattern_type(ty):
                    raise ParseError("box wants a first-order shape (I, qubit, tensors)", tok.line, tok.col)
                return Box(ty)
            if tok.text == "meas":
                return MEAS_MACRO
            if tok.text == "free":
                return FREE_MACRO
            if tok.text == "init_tt":
                return INIT_TT_MACRO
            if tok.text == "init_ff":
                return INIT_FF_MACRO
            if tok.text == "qchan":
                self.expect("punct", "(")
                p = self.pattern()
                if not pattern_linear(p):
                    raise ParseError("pattern repeats a variable", tok.line, tok.col)
                self.expect("punct", ";")
                q = self.channel()
                self.expect("punct", ";")
                m = self.branching()
                self.expect("punct", ")")
                return QChanConst(p, q, m)
        raise ParseError(f"unexpected {tok.text or tok.kind!r} in term", tok.line, tok.col)

    def branching(self) -> Branching:
        if self.peek().kind == "punct" and self.peek().text == "[":
            self.next()
            left = self.branching()
            self.expect("punct", ",")
            right = self.branching()
            self.expect("punct", "]")
            return BNode(left, right)
        return BLeaf(self.term())

    def pattern(self) -> Pattern:
        tok = self.next()
        if tok.kind == "ident":
            return PVar(tok.text)
        if tok.kind == "punct" and tok.text == "*":
            return PUnit()
        if tok.kind == "punct" and tok.text == "<":
            left = self.pattern()
            self.expect("punct", ",")
            right = self.pattern()
            self.expect("punct", ">")
            return PPair(left, right)
        raise ParseError(f"unexpected {tok.text!r} in pattern", tok.line, tok.col)

    # -- channels -----------------------------------------------------------

    def channel(self) -> Channel:
        tok = self.next()
        if tok.kind == "kw" and tok.text == "eps":
            self.expect("punct", "{")
            wires = []
            if not (self.peek().kind == "punct" and self.peek().text == "}"):
                wires.append(self.expect("ident").text)
                while self.accept("punct", ","):
                    wires.append(self.expect("ident").text)
            self.expect("punct", "}")
            return Eps(frozenset(wires))
        if tok.kind == "kw" and tok.text == "init":
            bit_tok = self.next()
            if bit_tok.kind != "kw" or bit_tok.text not in ("tt", "ff"):
                raise ParseError("init wants tt or ff", bit_tok.line, bit_tok.col)
            wire = self.expect("ident").text
            self.expect("punct", ";")
            return Init(bit_tok.text == "tt", wire, self.channel())
        if tok.kind == "kw" and tok.text == "meas":
            wire = self.expect("ident").text
            self.expect("punct", "{")
            if_true = self.channel()
            self.expect("punct", "|")
            if_false = self.channel()
            self.expect("punct", "}")
            return Meas(wire, if_true, if_false)
        if tok.kind == "kw" and tok.text == "free":
            wire = self.expect("ident").text
            self.expect("punct", ";")
            return Free(wire, self.channel())
        if tok.kind == "ident":
            gate = tok.text
            self.expect("punct", "(")
            wires = [self.expect("ident").text]
            while self.accept("punct", ","):
                wires.append(self.expect("ident").text)
            self.expect("punct", ")")
            self.expect("punct", ";")
            return Gate(gate, tuple(wires), self.channel())
        raise ParseError(f"unexpected {tok.text or tok.kind!r} in channel", tok.line, tok.col)

    # -- types ----------------------------------------------------------------

    def type_expr(self) -> Type:
        left = self.tensor_type()
        if self.accept("punct", "-o"):
            return TLolli(left, self.type_expr())
        return left

    def tensor_type(self) -> Type:
        left = self.prefix_type()
        if self.accept("punct", "*"):
            return TTensor(left, self.tensor_type())
        return left

    def prefix_type(self) -> Type:
        tok = self.next()
        if tok.kind == "punct" and tok.text == "!":
            # binds tighter than * so !A * B reads as (!A) * B
            return TBang(self.prefix_type())
        if tok.kind == "punct" and tok.text == "(":
            t = self.type_expr()
            self.expect("punct", ")")
            return t
        if tok.kind == "kw":
            if tok.text == "I":
                return UNIT
            if tok.text == "bool":
                return BOOL
            if tok.text == "qubit":
                return QUBIT
            if tok.text == "QChan":
                self.expect("punct", "(")
                p = self.type_expr()
                self.expect("punct", ",")
                a = self.type_expr()
                self.expect("punct", ")")
                if not is_pattern_type(p):
                    raise ParseError("QChan wants a first-order input shape", tok.line, tok.col)
                return TChan(p, a)
        raise ParseError(f"unexpected {tok.text or tok.kind!r} in type", tok.line, tok.col)


# ---------------------------------------------------------------------------
# Macros: each one wraps a closed channel constant in `unbox`.

def _nested_pattern(names: list[str]) -> Pattern:
    if len(names) == 1:
        return PVar(names[0])
    return PPair(PVar(names[0]), _nested_pattern(names[1:]))


def _nested_pair(names: list[str]) -> Term:
    if len(names) == 1:
        return Var(names[0])
    return Pair(Var(names[0]), _nested_pair(names[1:]))


def gate_macro(name: str) -> Term:
    arity = qcalg.gate_arity(name)
    names = [f"x{i}" for i in range(1, arity + 1)]
    const = QChanConst(
        _nested_pattern(names),
        Gate(name, tuple(names), Eps(frozenset(names))),
        BLeaf(_nested_pair(names)),
    )
    return mk_app(UNBOX, const)


def _meas_macro() -> Term:
    const = QChanConst(
        PVar("x"),
        Meas("x", Eps(frozenset({"x"})), Eps(frozenset({"x"}))),
        BNode(BLeaf(Pair(TT_TERM, Var("x"))), BLeaf(Pair(FF_TERM, Var("x")))),
    )
    return mk_app(UNBOX, const)


def _init_macro(bit: bool) -> Term:
    const = QChanConst(
        PUnit(),
        Init(bit, "x", Eps(frozenset({"x"}))),
        BLeaf(Var("x")),
    )
    return mk_app(UNBOX, const)


def _free_macro() -> Term:
    const = QChanConst(
        PVar("x"),
        Free("x", Eps(frozenset())),
        BLeaf(UNIT_TERM),
    )
    return mk_app(UNBOX, const)


MEAS_MACRO = _meas_macro()
INIT_TT_MACRO = _init_macro(True)
INIT_FF_MACRO = _init_macro(False)
FREE_MACRO = _free_macro()


# ---------------------------------------------------------------------------

def parse_program(source: str) -> Program:
    return Parser(source).program()


def parse_term(source: str) -> Term:
    p = Parser(source)
    t = p.term()
    p.expect("eof")
    return t


def parse_type(source: str) -> Type:
    p = Parser(source)
    t = p.type_expr()
    p.expect("eof")
    return t


def parse_channel(source: str) -> Channel:
    p = Parser(source)
    q = p.channel()
    p.expect("eof")
    return q
