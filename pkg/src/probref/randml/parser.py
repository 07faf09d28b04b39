"""Concrete syntax for RandML (``.rml`` files).

See ``grammar.md`` next to this module for the token set and precedence
table.  Derived forms (``fun``, ``let``, ``;``, ``flip``, ``while``,
``None``/``Some``, tuple patterns) are expanded during parsing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .syntax import (
    FALSE,
    NONE,
    TRUE,
    UNIT,
    Alloc,
    AllocTape,
    App,
    BinOp,
    BoolV,
    Expr,
    Fst,
    If,
    Inl,
    InlV,
    Inr,
    InrV,
    IntV,
    LabelV,
    Load,
    LocV,
    Match,
    Pair,
    PairV,
    Rand,
    RecV,
    Snd,
    Store,
    UnitV,
    UnOp,
    Var,
    flip,
    lam,
    let,
    seq,
    while_loop,
)


class ParseError(SyntaxError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message


KEYWORDS = {
    "let", "in", "rec", "fun", "if", "then", "else", "while", "do", "end",
    "match", "with", "inl", "inr", "ref", "fst", "snd", "rand", "alloctape",
    "flip", "true", "false", "not", "None", "Some",
}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<loc>loc\#\d+)
  | (?P<tape>tape\#\d+)
  | (?P<comment>\#[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>->|<-|==|!=|<=|>=|&&|\|\||[-+*/%()<>,;=|@!\[\]])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        if kind not in ("ws", "comment"):
            if kind == "ident" and tok in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, tok, line, pos - line_start + 1))
        for i, ch in enumerate(tok):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _pair(a: Expr, b: Expr) -> Expr:
    return PairV(a, b) if a.is_value() and b.is_value() else Pair(a, b)


def _inl(e: Expr) -> Expr:
    return InlV(e) if e.is_value() else Inl(e)


def _inr(e: Expr) -> Expr:
    return InrV(e) if e.is_value() else Inr(e)


_ATOM_START_KW = {"true", "false", "None", "flip"}
_PREFIX_KW = {"ref", "fst", "snd", "inl", "inr", "Some", "rand", "alloctape", "not"}


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("kw", "op") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def error(self, msg: str) -> None:
        raise ParseError(msg, self.tok.line, self.tok.col)

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def binder(self) -> str:
        if self.at("(") and self.toks[self.i + 1].text == ")":
            self.i += 2
            return "_"
        return self.ident()

    # grammar
    def program(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r}")
        return e

    def expr(self) -> Expr:
        e = self.stmt()
        if self.accept(";"):
            if self.tok.kind == "eof" or self.at("end") or self.at(")") or self.at("|") or self.at("in"):
                return e
            return seq(e, self.expr())
        return e

    def stmt(self) -> Expr:
        if self.at("let"):
            return self.let_expr()
        if self.at("fun"):
            self.i += 1
            params = [self.binder()]
            while not self.at("->"):
                params.append(self.binder())
            self.expect("->")
            body = self.expr()
            for x in reversed(params):
                body = lam(x, body)
            return body
        if self.at("rec"):
            self.i += 1
            return self.rec_binding()
        if self.at("if"):
            self.i += 1
            c = self.expr()
            self.expect("then")
            t = self.stmt()
            self.expect("else")
            f = self.stmt()
            return If(c, t, f)
        if self.at("while"):
            self.i += 1
            c = self.expr()
            self.expect("do")
            body = self.expr()
            self.expect("end")
            return while_loop(c, body)
        if self.at("match"):
            return self.match_expr()
        lhs = self.or_expr()
        if self.accept("<-"):
            return Store(lhs, self.stmt())
        return lhs

    def rec_binding(self) -> RecV:
        f = self.ident()
        params = [self.binder()]
        while not self.at("="):
            params.append(self.binder())
        self.expect("=")
        body = self.expr()
        for x in reversed(params[1:]):
            body = lam(x, body)
        return RecV(f, params[0], body)

    def let_expr(self) -> Expr:
        self.expect("let")
        if self.accept("rec"):
            fn = self.rec_binding()
            self.expect("in")
            return let(fn.f, fn, self.expr())  # type: ignore[arg-type]
        if self.at("("):
            if self.toks[self.i + 1].text == ")":
                self.i += 2
                names = ["_"]
            else:
                self.i += 1
                names = [self.binder()]
                while self.accept(","):
                    names.append(self.binder())
                self.expect(")")
            self.expect("=")
            rhs = self.expr()
            self.expect("in")
            body = self.expr()
            if len(names) == 1:
                return let(names[0], rhs, body)
            if len(names) != 2:
                self.error("tuple patterns bind exactly two names")
            a, b = names
            return let("__p", rhs, let(a, Fst(Var("__p")), let(b, Snd(Var("__p")), body)))
        x = self.binder()
        params = []
        while not self.at("="):
            params.append(self.binder())
        self.expect("=")
        rhs = self.expr()
        for p in reversed(params):
            rhs = lam(p, rhs)
        self.expect("in")
        return let(x, rhs, self.expr())

    def match_expr(self) -> Expr:
        self.expect("match")
        scrut = self.expr()
        self.expect("with")
        self.accept("|")
        arms: dict[str, tuple[str, Expr]] = {}
        for _ in range(2):
            if self.accept("inl") or self.accept("None"):
                side = "inl"
                x = "_" if self.toks[self.i - 1].text == "None" else self.binder()
            elif self.accept("inr") or self.accept("Some"):
                side = "inr"
                x = self.binder()
            else:
                self.error("expected a match arm (inl/inr/None/Some)")
            if side in arms:
                self.error(f"duplicate {side} arm")
            self.expect("->")
            arms[side] = (x, self.expr())
            if len(arms) < 2:
                self.expect("|")
        self.expect("end")
        (x, l), (y, r) = arms["inl"], arms["inr"]
        return Match(scrut, x, l, y, r)

    def or_expr(self) -> Expr:
        e = self.and_expr()
        while self.accept("||"):
            e = If(e, TRUE, self.and_expr())
        return e

    def and_expr(self) -> Expr:
        e = self.cmp_expr()
        while self.accept("&&"):
            e = If(e, self.cmp_expr(), FALSE)
        return e

    def cmp_expr(self) -> Expr:
        e = self.add_expr()
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.accept(op):
                return BinOp(op, e, self.add_expr())
        return e

    def add_expr(self) -> Expr:
        e = self.mul_expr()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.mul_expr())
        return e

    def mul_expr(self) -> Expr:
        e = self.unary()
        while self.at("*") or self.at("/") or self.at("%"):
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.at("-"):
            self.i += 1
            if self.tok.kind == "int":
                n = int(self.tok.text)
                self.i += 1
                return self.app_rest(IntV(-n))
            return UnOp("neg", self.unary())
        if self.accept("not"):
            return UnOp("not", self.unary())
        return self.app()

    def app(self) -> Expr:
        return self.app_rest(self.head())

    def app_rest(self, e: Expr) -> Expr:
        while self.starts_atom():
            e = App(e, self.atom())
        return e

    def head(self) -> Expr:
        t = self.tok
        if t.kind == "kw" and t.text in _PREFIX_KW and t.text != "not":
            self.i += 1
            if t.text == "rand":
                bound = self.atom()
                label = self.atom() if self.accept("@") else None
                return Rand(bound, label)
            arg = self.atom()
            return {
                "ref": Alloc,
                "fst": Fst,
                "snd": Snd,
                "inl": _inl,
                "inr": _inr,
                "Some": _inr,
                "alloctape": AllocTape,
            }[t.text](arg)
        return self.atom()

    def starts_atom(self) -> bool:
        t = self.tok
        if t.kind in ("int", "ident", "loc", "tape"):
            return True
        if t.kind == "kw":
            return t.text in _ATOM_START_KW
        return t.kind == "op" and t.text in ("(", "!", "[")

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return IntV(int(t.text))
        if t.kind == "loc":
            self.i += 1
            return LocV(int(t.text.split("#")[1]))
        if t.kind == "tape":
            self.i += 1
            return LabelV(int(t.text.split("#")[1]))
        if t.kind == "ident":
            self.i += 1
            return Var(t.text)
        if self.accept("true"):
            return TRUE
        if self.accept("false"):
            return FALSE
        if self.accept("None"):
            return NONE
        if self.accept("flip"):
            return flip(self.atom() if self.accept("@") else None)
        if self.accept("!"):
            return Load(self.atom())
        if self.accept("["):
            self.expect("]")
            return NONE
        if self.accept("("):
            if self.accept(")"):
                return UNIT
            e = self.expr()
            if self.accept(","):
                e = _pair(e, self.expr())
            self.expect(")")
            return e
        self.error(f"unexpected {t.text or 'end of input'!r}")
        raise AssertionError  # unreachable


def parse(text: str) -> Expr:
    """Parse RandML source text into an expression."""
    return Parser(text).program()


# Pretty printing ---------------------------------------------------------------------


def pretty(e: Expr) -> str:
    """Render ``e`` as source text that parses back to ``e``."""
    if isinstance(e, IntV):
        return str(e.n) if e.n >= 0 else f"({e.n})"
    if isinstance(e, BoolV):
        return "true" if e.b else "false"
    if isinstance(e, UnitV):
        return "()"
    if isinstance(e, LocV):
        return f"loc#{e.loc}"
    if isinstance(e, LabelV):
        return f"tape#{e.label}"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, RecV):
        if e.f is None:
            return f"(fun {e.x} -> {pretty(e.body)})"
        return f"(rec {e.f} {e.x} = {pretty(e.body)})"
    if isinstance(e, (PairV, Pair)):
        return f"({pretty(e.fst)}, {pretty(e.snd)})"
    if isinstance(e, (InlV, Inl)):
        inner = e.v if isinstance(e, InlV) else e.e
        return f"(inl {pretty(inner)})"
    if isinstance(e, (InrV, Inr)):
        inner = e.v if isinstance(e, InrV) else e.e
        return f"(inr {pretty(inner)})"
    if isinstance(e, App):
        fn = e.fn
        if isinstance(fn, RecV) and fn.f is None:
            if fn.x == "_":
                return f"({pretty(e.arg)}; {pretty(fn.body)})"
            return f"(let {fn.x} = {pretty(e.arg)} in {pretty(fn.body)})"
        return f"({pretty(fn)} {pretty(e.arg)})"
    if isinstance(e, BinOp):
        return f"({pretty(e.left)} {e.op} {pretty(e.right)})"
    if isinstance(e, UnOp):
        return f"(not {pretty(e.e)})" if e.op == "not" else f"(- ({pretty(e.e)}))"
    if isinstance(e, If):
        return f"(if {pretty(e.cond)} then {pretty(e.then)} else {pretty(e.orelse)})"
    if isinstance(e, Fst):
        return f"(fst {pretty(e.e)})"
    if isinstance(e, Snd):
        return f"(snd {pretty(e.e)})"
    if isinstance(e, Match):
        return f"(match {pretty(e.e)} with inl {e.x} -> {pretty(e.left)} | inr {e.y} -> {pretty(e.right)} end)"
    if isinstance(e, Alloc):
        return f"(ref {pretty(e.e)})"
    if isinstance(e, Load):
        return f"(!{pretty(e.e)})"
    if isinstance(e, Store):
        return f"({pretty(e.loc)} <- {pretty(e.val)})"
    if isinstance(e, AllocTape):
        return f"(alloctape {pretty(e.e)})"
    if isinstance(e, Rand):
        if e.label is None:
            return f"(rand {pretty(e.bound)})"
        return f"(rand {pretty(e.bound)} @ {pretty(e.label)})"
    raise TypeError(f"cannot print {e!r}")
