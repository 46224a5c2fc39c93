"""Text form of expressions and forms, plus the recursive-descent parser.

Grammar (whitespace-insensitive)::

    form    := term (("+" | "-") term)*
    term    := unary (("*" | "/" | "&") unary)*
    unary   := ("-" | "+") unary | power
    power   := primary ("^" exponent)?
    exponent:= ["-" | "+"] INT | "(" ["-" | "+"] INT ")"
    primary := NUMBER | "I" | "pi" | "x" INT | "G[" INT "][" INT "][" INT "]"
             | "dx" INT | "dG[" INT "][" INT "][" INT "]"
             | ["D[" var ("," var)* "]"] NAME "(" var ("," var)* ")"
             | "(" form ")"

``&`` is the wedge product; ``*`` between two forms of positive degree is
also read as a wedge.  ``/`` and ``^`` only apply to degree-0 operands.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import List, Optional

from .forms import Form, wedge
from .symkernel import (
    GQ,
    I,
    ONE,
    PI,
    Expr,
    Poly,
    VarId,
    _mono_degree,
    base,
    const,
    fiber,
    funcsym,
    var,
)


class DSLSyntaxError(ValueError):
    """Parse failure with a 1-based line/column position."""

    def __init__(self, message: str, text: str = "", pos: int = 0, line_offset: int = 0):
        line = text.count("\n", 0, pos) + 1 + line_offset
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        self.line = line
        self.column = col
        self.message = message
        super().__init__(f"line {line}, column {col}: {message}")


# ---------------------------------------------------------------------------
# rendering


def _render_rational(q) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _render_atom(atom) -> str:
    return repr(atom)


def _render_mono(m) -> str:
    parts = []
    for atom, e in m:
        s = _render_atom(atom)
        parts.append(s if e == 1 else f"{s}^{e}")
    return "*".join(parts)


def _render_term(mono, c: GQ):
    """Return (negative?, body) for one coefficient * monomial."""
    ms = _render_mono(mono)
    if c.re and c.im:
        body = f"({_render_rational(c.re)} {'-' if c.im < 0 else '+'} "
        body += f"{_render_rational(abs(c.im)) + '*I' if abs(c.im) != 1 else 'I'})"
        return False, body + (f"*{ms}" if ms else "")
    if c.im:
        neg = c.im < 0
        mag = abs(c.im)
        body = "I" if mag == 1 else f"{_render_rational(mag)}*I"
        return neg, body + (f"*{ms}" if ms else "")
    neg = c.re < 0
    mag = abs(c.re)
    if not ms:
        return neg, _render_rational(mag)
    if mag == 1:
        return neg, ms
    return neg, f"{_render_rational(mag)}*{ms}"


def _mono_key(m):
    # higher degree first, then x1 before x2 and higher powers first
    return (-_mono_degree(m), tuple((atom, -e) for atom, e in m))


def render_poly(p: Poly) -> str:
    if not p.terms:
        return "0"
    out = []
    for m in sorted(p.terms, key=_mono_key):
        neg, body = _render_term(m, p.terms[m])
        if not out:
            out.append(("-" if neg else "") + body)
        else:
            out.append((" - " if neg else " + ") + body)
    return "".join(out)


def render_expr(e: Expr) -> str:
    if e.den.is_one():
        return render_poly(e.num)
    return f"({render_poly(e.num)})/({render_poly(e.den)})"


def render_gen(v: VarId) -> str:
    return "d" + repr(v)


def render_form(f: Form) -> str:
    if not f.terms:
        return "0"
    parts = []
    for g in sorted(f.terms, key=lambda g: (len(g), g)):
        c = f.terms[g]
        gs = "&".join(render_gen(v) for v in g)
        if not g:
            parts.append(f"({render_expr(c)})")
        elif c == ONE:
            parts.append(gs)
        else:
            parts.append(f"({render_expr(c)})*{gs}")
    return " + ".join(parts)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>\d+(?:\.\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^&()\[\],])"
    r")"
)
_RESERVED = {"I", "pi", "G", "dG", "D"}


class _Tok:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos

    def __repr__(self):
        return f"{self.kind}:{self.text}@{self.pos}"


def _tokenize(text: str, line_offset: int = 0) -> List[_Tok]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise DSLSyntaxError(f"unexpected character {text[pos]!r}", text, pos, line_offset)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start))
        pos = m.end()
    toks.append(_Tok("end", "", n))
    return toks


class _Parser:
    def __init__(self, text: str, n: Optional[int], line_offset: int = 0):
        self.text = text
        self.n = n
        self.line_offset = line_offset
        self.toks = _tokenize(text, line_offset)
        self.i = 0

    def error(self, msg: str, tok: Optional[_Tok] = None):
        tok = tok or self.peek()
        raise DSLSyntaxError(msg, self.text, tok.pos, self.line_offset)

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.peek().kind == "op" and self.peek().text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            self.error(f"expected {text!r}")

    def index(self) -> int:
        t = self.next()
        if t.kind != "num" or "." in t.text:
            self.error("expected an integer index", t)
        k = int(t.text)
        if k < 1 or (self.n is not None and k > self.n):
            self.error(f"index {k} out of range 1..{self.n}", t)
        return k

    def bracket_index(self) -> int:
        self.expect("[")
        k = self.index()
        self.expect("]")
        return k

    def parse(self) -> Form:
        f = self.form()
        if self.peek().kind != "end":
            self.error(f"unexpected {self.peek().text!r}")
        return f

    def form(self) -> Form:
        f = self.term()
        while True:
            if self.accept("+"):
                f = f + self.term()
            elif self.accept("-"):
                f = f - self.term()
            else:
                return f

    def term(self) -> Form:
        f = self.unary()
        while True:
            tok = self.peek()
            if self.accept("*") or self.accept("&"):
                f = wedge(f, self.unary())
            elif self.accept("/"):
                rhs = self.unary()
                den = _scalar_of(rhs)
                if den is None:
                    self.error("can only divide by a degree-0 expression", tok)
                if den.is_zero():
                    self.error("division by zero", tok)
                f = f.scale(ONE / den)
            else:
                return f

    def unary(self) -> Form:
        if self.accept("-"):
            return -self.unary()
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Form:
        f = self.primary()
        tok = self.peek()
        if self.accept("^"):
            paren = self.accept("(")
            sign = 1
            if self.accept("-"):
                sign = -1
            else:
                self.accept("+")
            t = self.next()
            if t.kind != "num" or "." in t.text:
                self.error("exponent must be an integer", t)
            if paren:
                self.expect(")")
            k = sign * int(t.text)
            b = _scalar_of(f)
            if b is None:
                self.error("only degree-0 expressions can be raised to a power", tok)
            if k < 0 and b.is_zero():
                self.error("division by zero", tok)
            return Form.scalar(b ** k)
        return f

    def variable(self) -> VarId:
        t = self.next()
        if t.kind != "name":
            self.error("expected a coordinate", t)
        m = re.fullmatch(r"x(\d+)", t.text)
        if m:
            k = int(m.group(1))
            if k < 1 or (self.n is not None and k > self.n):
                self.error(f"index {k} out of range 1..{self.n}", t)
            return base(k)
        if t.text == "G":
            a = self.bracket_index()
            i = self.bracket_index()
            b = self.bracket_index()
            return fiber(a, i, b)
        self.error(f"expected a coordinate, got {t.text!r}", t)

    def primary(self) -> Form:
        t = self.peek()
        if t.kind == "num":
            self.next()
            return Form.scalar(const(Fraction(t.text)))
        if t.kind == "op" and t.text == "(":
            self.next()
            f = self.form()
            self.expect(")")
            return f
        if t.kind != "name":
            self.error(f"unexpected {t.text or 'end of input'!r}")
        name = t.text
        if name == "I":
            self.next()
            return Form.scalar(I)
        if name == "pi":
            self.next()
            return Form.scalar(PI)
        if re.fullmatch(r"x\d+", name) or name == "G":
            return Form.scalar(var(self.variable()))
        m = re.fullmatch(r"dx(\d+)", name)
        if m:
            self.next()
            k = int(m.group(1))
            if k < 1 or (self.n is not None and k > self.n):
                self.error(f"index {k} out of range 1..{self.n}", t)
            return Form.gen(base(k))
        if name == "dG":
            self.next()
            a = self.bracket_index()
            i = self.bracket_index()
            b = self.bracket_index()
            return Form.gen(fiber(a, i, b))
        partials = ()
        if name == "D":
            self.next()
            self.expect("[")
            ps = [self.variable()]
            while self.accept(","):
                ps.append(self.variable())
            self.expect("]")
            partials = tuple(ps)
            t = self.peek()
            if t.kind != "name":
                self.error("expected a function name after D[...]", t)
            name = t.text
        if name in _RESERVED or re.fullmatch(r"d?x\d+", name):
            self.error(f"{name!r} is reserved", t)
        self.next()
        self.expect("(")
        args = [self.variable()]
        while self.accept(","):
            args.append(self.variable())
        self.expect(")")
        if len(set(args)) != len(args):
            self.error("repeated function argument", t)
        try:
            fs = funcsym(name, args, partials)
        except ValueError as exc:
            self.error(str(exc), t)
        return Form.scalar(Expr(Poly.atom(fs)))


def _scalar_of(f: Form) -> Optional[Expr]:
    if not f.terms:
        return const(0)
    if set(f.terms) == {()}:
        return f.terms[()]
    return None


def parse_form(text: str, n: Optional[int] = None, line_offset: int = 0) -> Form:
    return _Parser(text, n, line_offset).parse()


def parse_expr(text: str, n: Optional[int] = None, line_offset: int = 0) -> Expr:
    p = _Parser(text, n, line_offset)
    f = p.parse()
    e = _scalar_of(f)
    if e is None:
        raise DSLSyntaxError("expected a scalar expression, got a form", text, 0, line_offset)
    return e
