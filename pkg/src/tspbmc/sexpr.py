"""Minimal S-expression reader for SMT-LIB2 scripts and solver replies."""

from __future__ import annotations

from fractions import Fraction
from typing import IO, Iterator, List, Union

Sexpr = Union[str, List["Sexpr"]]


def tokenize(text: str) -> Iterator[str]:
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            yield c
            i += 1
        elif c == "|":
            j = text.index("|", i + 1)
            yield text[i:j + 1]
            i = j + 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            yield text[i:j + 1]
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            yield text[i:j]
            i = j


def parse_all(text: str) -> List[Sexpr]:
    """Parse every toplevel S-expression in ``text``."""
    stack: List[List[Sexpr]] = [[]]
    for tok in tokenize(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise ValueError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ValueError("unbalanced '('")
    return stack[0]


def parse_one(text: str) -> Sexpr:
    exprs = parse_all(text)
    if len(exprs) != 1:
        raise ValueError(f"expected one S-expression, got {len(exprs)}")
    return exprs[0]


def read_sexpr(stream: IO[str]) -> str:
    """Read one balanced S-expression (as raw text) from a stream.

    Also accepts a bare token (e.g. the ``sat`` reply line).
    """
    buf = []
    depth = 0
    started = False
    while True:
        ch = stream.read(1)
        if ch == "":
            if buf:
                break
            raise EOFError("stream closed")
        if not started and ch.isspace():
            continue
        buf.append(ch)
        started = True
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                break
        elif depth == 0 and ch == "\n":
            break
    return "".join(buf).strip()


def parse_value(expr: Sexpr):
    """Decode a model value: Bool or exact rational.

    Accepts integer, decimal, ``(/ p q)`` and ``(- x)`` forms.
    """
    if isinstance(expr, str):
        if expr == "true":
            return True
        if expr == "false":
            return False
        return Fraction(expr)
    if len(expr) == 2 and expr[0] == "-":
        return -parse_value(expr[1])
    if len(expr) == 3 and expr[0] == "/":
        return parse_value(expr[1]) / parse_value(expr[2])
    raise ValueError(f"cannot decode value {expr!r}")


def render_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    q = Fraction(v)
    if q < 0:
        return f"(- {render_value(-q)})"
    if q.denominator == 1:
        return f"{q.numerator}.0"
    return f"(/ {q.numerator}.0 {q.denominator}.0)"
