"""Abstract syntax of RandML: values, expressions, heaps with tapes, configurations.

Every node is an immutable dataclass with a cached structural hash, so that
configurations can key dictionaries cheaply during exact execution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator


class Expr:
    """Base class of all expressions (values included)."""

    __slots__ = ()

    def is_value(self) -> bool:
        return False

    def children(self) -> tuple[tuple[str, Expr], ...]:
        return tuple((f, getattr(self, f)) for f in self._fields)  # type: ignore[attr-defined]


class Val(Expr):
    __slots__ = ()

    def is_value(self) -> bool:
        return True


def node(cls):
    """Make ``cls`` a frozen dataclass whose hash is computed once."""
    cls = dataclass(frozen=True, eq=True, repr=True)(cls)
    names = tuple(f.name for f in cls.__dataclass_fields__.values() if f.compare)
    cls._fields = tuple(n for n in names if n in getattr(cls, "_subexprs", ()))
    eq = cls.__eq__

    def __hash__(self) -> int:
        try:
            return self.__dict__["_h"]
        except KeyError:
            h = hash((cls.__name__,) + tuple(getattr(self, n) for n in names))
            object.__setattr__(self, "_h", h)
            return h

    def __eq__(self, other: Any) -> bool:
        if self is other:
            return True
        if type(other) is not type(self):
            return NotImplemented
        if hash(self) != hash(other):
            return False
        return eq(self, other)

    cls.__hash__ = __hash__
    cls.__eq__ = __eq__
    return cls


# Values -------------------------------------------------------------------------


@node
class IntV(Val):
    n: int


@node
class BoolV(Val):
    b: bool


@node
class UnitV(Val):
    pass


@node
class LocV(Val):
    loc: int


@node
class LabelV(Val):
    label: int


@node
class RecV(Val):
    """``rec f x = body``; ``f`` is ``None`` for an anonymous function."""

    f: str | None
    x: str
    body: Expr


@node
class PairV(Val):
    fst: Val
    snd: Val


@node
class InlV(Val):
    v: Val


@node
class InrV(Val):
    v: Val


UNIT = UnitV()
TRUE = BoolV(True)
FALSE = BoolV(False)


# Expressions ---------------------------------------------------------------------

BINOPS = ("+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=")
UNOPS = ("not", "neg")


@node
class Var(Expr):
    name: str


@node
class App(Expr):
    fn: Expr
    arg: Expr
    _subexprs = ("fn", "arg")


@node
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    _subexprs = ("left", "right")


@node
class UnOp(Expr):
    op: str
    e: Expr
    _subexprs = ("e",)


@node
class If(Expr):
    cond: Expr
    then: Expr
    orelse: Expr
    _subexprs = ("cond", "then", "orelse")


@node
class Pair(Expr):
    fst: Expr
    snd: Expr
    _subexprs = ("fst", "snd")


@node
class Fst(Expr):
    e: Expr
    _subexprs = ("e",)


@node
class Snd(Expr):
    e: Expr
    _subexprs = ("e",)


@node
class Inl(Expr):
    e: Expr
    _subexprs = ("e",)


@node
class Inr(Expr):
    e: Expr
    _subexprs = ("e",)


@node
class Match(Expr):
    """``match e with inl x -> left | inr y -> right end``."""

    e: Expr
    x: str
    left: Expr
    y: str
    right: Expr
    _subexprs = ("e", "left", "right")


@node
class Alloc(Expr):
    e: Expr
    _subexprs = ("e",)


@node
class Load(Expr):
    e: Expr
    _subexprs = ("e",)


@node
class Store(Expr):
    loc: Expr
    val: Expr
    _subexprs = ("loc", "val")


@node
class Rand(Expr):
    """``rand bound`` or, with a label expression, ``rand bound @ label``."""

    bound: Expr
    label: Expr | None = None
    _subexprs = ("bound", "label")


@node
class AllocTape(Expr):
    e: Expr
    _subexprs = ("e",)


# Value subexpressions of compound values are also children for traversal.
RecV._fields = ("body",)
PairV._fields = ("fst", "snd")
InlV._fields = ("v",)
InrV._fields = ("v",)
Rand._fields = ("bound", "label")


def subexprs(e: Expr) -> Iterator[tuple[str, Expr]]:
    for name in e._fields:  # type: ignore[attr-defined]
        child = getattr(e, name)
        if child is not None:
            yield name, child


# Sugar -----------------------------------------------------------------------------


def lam(x: str, body: Expr) -> RecV:
    return RecV(None, x, body)


def let(x: str, e1: Expr, e2: Expr) -> Expr:
    return App(lam(x, e2), e1)


def seq(e1: Expr, e2: Expr) -> Expr:
    return let("_", e1, e2)


def flip(label: Expr | None = None) -> Expr:
    return BinOp("==", Rand(IntV(1), label), IntV(1))


def while_loop(cond: Expr, body: Expr) -> Expr:
    """``(rec f _ = if cond then (body; f ()) else ()) ()``."""
    f = "_while"
    return App(RecV(f, "_", If(cond, seq(body, App(Var(f), UNIT)), UNIT)), UNIT)


NONE = InlV(UNIT)


def some(e: Expr) -> Expr:
    return InrV(e) if e.is_value() else Inr(e)


# Machine state -----------------------------------------------------------------------


@dataclass(frozen=True)
class Tape:
    bound: int
    queue: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.bound < 0:
            raise ValueError("tape bound must be non-negative")
        for k in self.queue:
            if not 0 <= k <= self.bound:
                raise ValueError(f"tape value {k} outside 0..{self.bound}")


@dataclass(frozen=True)
class State:
    """Heap and tapes.  Locations and labels are dense indices from 0."""

    heap: tuple[Val, ...] = ()
    tapes: tuple[Tape, ...] = ()
    _h: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_h", hash((self.heap, self.tapes)))

    def __hash__(self) -> int:
        return self._h

    def fresh_loc(self) -> int:
        return len(self.heap)

    def fresh_label(self) -> int:
        return len(self.tapes)

    def alloc(self, v: Val) -> State:
        return State(self.heap + (v,), self.tapes)

    def store(self, loc: int, v: Val) -> State:
        return State(self.heap[:loc] + (v,) + self.heap[loc + 1 :], self.tapes)

    def alloc_tape(self, bound: int) -> State:
        return State(self.heap, self.tapes + (Tape(bound),))

    def set_tape(self, label: int, tape: Tape) -> State:
        return State(self.heap, self.tapes[:label] + (tape,) + self.tapes[label + 1 :])

    def with_tapes(self, *tapes: Tape) -> State:
        return State(self.heap, self.tapes + tuple(tapes))


EMPTY_STATE = State()


@dataclass(frozen=True)
class Config:
    expr: Expr
    state: State

    def is_final(self) -> bool:
        return self.expr.is_value()
