"""OPENQASM 2.0 subset reader and writer."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

from .circuit import (
    CCX, CP, CX, SWAP, Barrier, Circuit, CircuitError, Delay, Gate, H, Measure, RZ, SX, X, u3_native,
)


class QasmError(ValueError):
    pass


class QasmSyntaxError(QasmError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line = line
        self.col = col


class UnsupportedGateError(QasmError):
    pass


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<number>(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)
  | (?P<string>"[^"]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<arrow>->)
  | (?P<op>[\[\](),;+\-*/^{}])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QasmSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        nl = m.group().count("\n")
        if nl:
            line += nl
            line_start = m.start() + m.group().rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


_FUNCS: dict[str, Callable[[float], float]] = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": math.exp, "ln": math.log, "sqrt": math.sqrt,
}


def _u3(t, p, l):
    return lambda q: u3_native(t, p, l, q)


# name -> (n_params, n_qubits, builder(params) -> callable(*qubits) -> list[Gate])
_GATES: dict[str, tuple[int, int, Callable]] = {
    "h": (0, 1, lambda: lambda q: [H(q)]),
    "x": (0, 1, lambda: lambda q: [X(q)]),
    "sx": (0, 1, lambda: lambda q: [SX(q)]),
    "id": (0, 1, lambda: lambda q: []),
    "y": (0, 1, lambda: lambda q: [RZ(math.pi, q), X(q)]),
    "z": (0, 1, lambda: lambda q: [RZ(math.pi, q)]),
    "s": (0, 1, lambda: lambda q: [RZ(math.pi / 2, q)]),
    "sdg": (0, 1, lambda: lambda q: [RZ(-math.pi / 2, q)]),
    "t": (0, 1, lambda: lambda q: [RZ(math.pi / 4, q)]),
    "tdg": (0, 1, lambda: lambda q: [RZ(-math.pi / 4, q)]),
    "rz": (1, 1, lambda a: lambda q: [RZ(a, q)]),
    "u1": (1, 1, lambda a: lambda q: [RZ(a, q)]),
    "p": (1, 1, lambda a: lambda q: [RZ(a, q)]),
    "rx": (1, 1, lambda a: _u3(a, -math.pi / 2, math.pi / 2)),
    "ry": (1, 1, lambda a: _u3(a, 0.0, 0.0)),
    "u2": (2, 1, lambda p, l: _u3(math.pi / 2, p, l)),
    "u3": (3, 1, _u3),
    "u": (3, 1, _u3),
    "U": (3, 1, _u3),
    "cx": (0, 2, lambda: lambda c, t: [CX(c, t)]),
    "CX": (0, 2, lambda: lambda c, t: [CX(c, t)]),
    "cz": (0, 2, lambda: lambda c, t: [H(t), CX(c, t), H(t)]),
    "swap": (0, 2, lambda: lambda a, b: [SWAP(a, b)]),
    "cp": (1, 2, lambda a: lambda c, t: [CP(a, c, t)]),
    "cu1": (1, 2, lambda a: lambda c, t: [CP(a, c, t)]),
    "ccx": (0, 3, lambda: lambda a, b, t: [CCX(a, b, t)]),
    "delay": (1, 1, lambda d: lambda q: [Delay(d, q)]),
}


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.qregs: dict[str, tuple[int, int]] = {}
        self.cregs: dict[str, int] = {}
        self.n_qubits = 0
        self.gates: list[Gate] = []

    # token helpers
    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        raise QasmSyntaxError(msg, tok.line, tok.col)

    def expect(self, text: str | None = None, kind: str | None = None) -> _Tok:
        t = self.next()
        if (text is not None and t.text != text) or (kind is not None and t.kind != kind):
            self.fail(f"expected {text or kind}, found {t.text or 'end of input'!r}", t)
        return t

    # expressions
    def expr(self) -> float:
        v = self.term()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            r = self.term()
            v = v + r if op == "+" else v - r
        return v

    def term(self) -> float:
        v = self.power()
        while self.peek().text in ("*", "/"):
            op = self.next().text
            r = self.power()
            if op == "/" and r == 0:
                self.fail("division by zero")
            v = v * r if op == "*" else v / r
        return v

    def power(self) -> float:
        v = self.unary()
        if self.peek().text == "^":
            self.next()
            v = v ** self.power()
        return v

    def unary(self) -> float:
        if self.peek().text == "-":
            self.next()
            return -self.unary()
        if self.peek().text == "+":
            self.next()
            return self.unary()
        return self.atom()

    def atom(self) -> float:
        t = self.next()
        if t.kind == "number":
            return float(t.text)
        if t.kind == "ident" and t.text == "pi":
            return math.pi
        if t.kind == "ident" and t.text in _FUNCS:
            self.expect("(")
            v = self.expr()
            self.expect(")")
            return _FUNCS[t.text](v)
        if t.text == "(":
            v = self.expr()
            self.expect(")")
            return v
        self.fail(f"bad expression token {t.text!r}", t)

    # operands
    def argument(self) -> list[int]:
        name = self.expect(kind="ident")
        if name.text not in self.qregs:
            self.fail(f"unknown quantum register {name.text!r}", name)
        offset, size = self.qregs[name.text]
        if self.peek().text == "[":
            self.next()
            idx_tok = self.expect(kind="number")
            self.expect("]")
            idx = int(idx_tok.text)
            if idx >= size:
                raise QasmError(f"operand {name.text}[{idx}] out of range (size {size})")
            return [offset + idx]
        return list(range(offset, offset + size))

    def creg_argument(self):
        name = self.expect(kind="ident")
        if name.text not in self.cregs:
            self.fail(f"unknown classical register {name.text!r}", name)
        if self.peek().text == "[":
            self.next()
            self.expect(kind="number")
            self.expect("]")

    def arglist(self) -> list[list[int]]:
        args = [self.argument()]
        while self.peek().text == ",":
            self.next()
            args.append(self.argument())
        return args

    # statements
    def parse(self) -> Circuit:
        self.expect("OPENQASM")
        ver = self.expect(kind="number")
        if not ver.text.startswith("2"):
            self.fail("only OPENQASM 2.x is supported", ver)
        self.expect(";")
        while self.peek().kind != "eof":
            self.statement()
        try:
            return Circuit(self.n_qubits, self.gates)
        except CircuitError as e:
            raise QasmError(str(e)) from e

    def statement(self):
        t = self.next()
        if t.kind != "ident":
            self.fail(f"unexpected {t.text!r}", t)
        kw = t.text
        if kw == "include":
            f = self.expect(kind="string")
            if f.text.strip('"') != "qelib1.inc":
                self.fail(f"unsupported include {f.text}", f)
            self.expect(";")
        elif kw in ("qreg", "creg"):
            name = self.expect(kind="ident").text
            self.expect("[")
            size = int(self.expect(kind="number").text)
            self.expect("]")
            self.expect(";")
            if kw == "qreg":
                self.qregs[name] = (self.n_qubits, size)
                self.n_qubits += size
            else:
                self.cregs[name] = size
        elif kw == "measure":
            qs = self.argument()
            self.expect("->")
            self.creg_argument()
            self.expect(";")
            self.gates.extend(Measure(q) for q in qs)
        elif kw == "barrier":
            args = self.arglist()
            self.expect(";")
            qs = [q for a in args for q in a]
            self.gates.append(Barrier(*dict.fromkeys(qs)))
        elif kw in ("gate", "opaque", "if", "reset"):
            raise UnsupportedGateError(f"unsupported statement {kw!r} at line {t.line}")
        else:
            self.gate_call(t)

    def gate_call(self, t: _Tok):
        if t.text not in _GATES:
            raise UnsupportedGateError(f"unsupported gate {t.text!r} at line {t.line}")
        n_params, n_qubits, build = _GATES[t.text]
        params: list[float] = []
        if self.peek().text == "(":
            self.next()
            if self.peek().text != ")":
                params.append(self.expr())
                while self.peek().text == ",":
                    self.next()
                    params.append(self.expr())
            self.expect(")")
        if len(params) != n_params:
            self.fail(f"{t.text} takes {n_params} parameters, got {len(params)}", t)
        args = self.arglist()
        self.expect(";")
        if len(args) != n_qubits:
            self.fail(f"{t.text} takes {n_qubits} operands, got {len(args)}", t)
        width = {len(a) for a in args if len(a) > 1}
        if len(width) > 1:
            self.fail("register size mismatch in broadcast", t)
        reps = width.pop() if width else 1
        fn = build(*params)
        for k in range(reps):
            qs = [a[k] if len(a) > 1 else a[0] for a in args]
            try:
                self.gates.extend(fn(*qs))
            except CircuitError as e:
                raise QasmError(f"{e} at line {t.line}") from e


def parse_qasm(text: str) -> Circuit:
    return _Parser(text).parse()


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_qasm(c: Circuit) -> str:
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{c.n_qubits}];"]
    if any(g.kind == "measure" for g in c.gates):
        lines.append(f"creg c[{c.n_qubits}];")
    for g in c.gates:
        ops = ",".join(f"q[{q}]" for q in g.qubits)
        if g.kind == "measure":
            q = g.qubits[0]
            lines.append(f"measure q[{q}] -> c[{q}];")
        elif g.param is not None:
            lines.append(f"{g.kind}({_fmt(g.param)}) {ops};")
        else:
            lines.append(f"{g.kind} {ops};")
    return "\n".join(lines) + "\n"
