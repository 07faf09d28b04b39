"""Call-by-value small-step Markov semantics of RandML.

Evaluation order: function application and store evaluate their right
operand first (``e K`` then ``K v``; ``e <- K`` then ``K <- v``).  Every
other compound form evaluates left to right.

A configuration steps to a sub-distribution over configurations.  Values and
stuck configurations step to the zero distribution; :func:`classify` tells
the two apart.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from ..subdist import SubDist, ret, uniform, zero
from .syntax import (
    UNIT,
    Alloc,
    AllocTape,
    App,
    BinOp,
    BoolV,
    Config,
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
    State,
    Store,
    Tape,
    UnitV,
    UnOp,
    Val,
    Var,
)


class StuckError(Exception):
    """Raised internally by head reduction on a stuck redex."""


# Free variables and substitution ------------------------------------------------------


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, RecV):
        return free_vars(e.body) - {e.f, e.x}
    if isinstance(e, Match):
        return free_vars(e.e) | (free_vars(e.left) - {e.x}) | (free_vars(e.right) - {e.y})
    out: frozenset[str] = frozenset()
    for _, child in _kids(e):
        out |= free_vars(child)
    return out


def is_closed(e: Expr) -> bool:
    return not free_vars(e)


def _kids(e: Expr) -> Iterable[tuple[str, Expr]]:
    for name in e._fields:  # type: ignore[attr-defined]
        child = getattr(e, name)
        if child is not None:
            yield name, child


def subst(e: Expr, x: str, v: Val) -> Expr:
    """Replace free occurrences of ``x`` in ``e`` by the closed value ``v``.

    Closed values cannot capture, so no renaming is needed.  Unchanged
    subtrees are returned as-is to keep sharing.
    """
    if isinstance(e, Var):
        return v if e.name == x else e
    if isinstance(e, RecV):
        if x == e.f or x == e.x:
            return e
        body = subst(e.body, x, v)
        return e if body is e.body else RecV(e.f, e.x, body)
    if isinstance(e, Match):
        scrut = subst(e.e, x, v)
        left = e.left if x == e.x else subst(e.left, x, v)
        right = e.right if x == e.y else subst(e.right, x, v)
        if scrut is e.e and left is e.left and right is e.right:
            return e
        return Match(scrut, e.x, left, e.y, right)
    if not e._fields:  # type: ignore[attr-defined]
        return e
    changes = {}
    for name, child in _kids(e):
        new = subst(child, x, v)
        if new is not child:
            changes[name] = new
    return dataclasses.replace(e, **changes) if changes else e


def substitute_all(e: Expr, env: dict[str, Val]) -> Expr:
    for x, v in env.items():
        e = subst(e, x, v)
    return e


# Evaluation contexts ------------------------------------------------------------------


@dataclass(frozen=True)
class Frame:
    """One evaluation-context layer: ``node`` with its ``hole`` field replaced."""

    node: Expr
    hole: str

    def plug(self, e: Expr) -> Expr:
        return dataclasses.replace(self.node, **{self.hole: e})

    def describe(self) -> str:
        """Short label used by certificate context patterns."""
        n = self.node
        if isinstance(n, App):
            if self.hole == "arg":
                fn = n.fn
                if isinstance(fn, RecV):
                    return f"call:{fn.f}" if fn.f is not None else f"let:{fn.x}"
                return "arg"
            return "fn"
        if isinstance(n, BinOp):
            return f"binop:{n.op}"
        if isinstance(n, UnOp):
            return f"unop:{n.op}"
        if isinstance(n, Store):
            return f"store_{self.hole}"
        if isinstance(n, Rand):
            return f"rand_{self.hole}"
        if isinstance(n, Pair):
            return f"pair_{self.hole}"
        return type(n).__name__.lower()


# Evaluation order per node type: fields in the order they are evaluated.
_ORDER: dict[type, tuple[str, ...]] = {
    App: ("arg", "fn"),
    Store: ("val", "loc"),
    BinOp: ("left", "right"),
    UnOp: ("e",),
    If: ("cond",),
    Pair: ("fst", "snd"),
    Fst: ("e",),
    Snd: ("e",),
    Inl: ("e",),
    Inr: ("e",),
    Match: ("e",),
    Alloc: ("e",),
    Load: ("e",),
    Rand: ("bound", "label"),
    AllocTape: ("e",),
}

Context = tuple[Frame, ...]


def decompose(e: Expr) -> tuple[Context, Expr]:
    """Split a non-value into ``K[r]``; frames are listed outermost first.

    The redex ``r`` has only values in its evaluated positions.  Free
    variables are returned as their own (stuck) redex.
    """
    if e.is_value():
        raise ValueError("values do not decompose")
    frames: list[Frame] = []
    while True:
        for name in _ORDER.get(type(e), ()):
            child = getattr(e, name)
            if child is not None and not child.is_value():
                frames.append(Frame(e, name))
                e = child
                break
        else:
            return tuple(frames), e


def plug(ctx: Context, e: Expr) -> Expr:
    for frame in reversed(ctx):
        e = frame.plug(e)
    return e


# Head reduction ----------------------------------------------------------------------


def _int(v: Expr) -> int:
    if isinstance(v, IntV):
        return v.n
    raise StuckError(f"expected an integer, got {v!r}")


_EQ_TYPES = (IntV, BoolV, UnitV, LocV, LabelV)


def _binop(op: str, a: Val, b: Val) -> Val:
    if op in ("==", "!="):
        if type(a) is not type(b) or not isinstance(a, _EQ_TYPES):
            raise StuckError(f"cannot compare {a!r} and {b!r}")
        return BoolV((a == b) == (op == "=="))
    if op in ("<", "<=", ">", ">="):
        if isinstance(a, IntV) and isinstance(b, IntV):
            x, y = a.n, b.n
        elif isinstance(a, BoolV) and isinstance(b, BoolV):
            x, y = int(a.b), int(b.b)
        else:
            raise StuckError(f"cannot order {a!r} and {b!r}")
        return BoolV({"<": x < y, "<=": x <= y, ">": x > y, ">=": x >= y}[op])
    x, y = _int(a), _int(b)
    if op == "+":
        return IntV(x + y)
    if op == "-":
        return IntV(x - y)
    if op == "*":
        return IntV(x * y)
    if y == 0:
        raise StuckError("division by zero")
    # truncating division, remainder takes the sign of the dividend
    q = abs(x) // abs(y) * (1 if (x >= 0) == (y >= 0) else -1)
    return IntV(q if op == "/" else x - q * y)


def head_step(r: Expr, state: State) -> SubDist:
    """Sub-distribution over ``(expr, state)`` results of a redex.

    Raises :class:`StuckError` when ``r`` cannot reduce.
    """
    if isinstance(r, App):
        fn, arg = r.fn, r.arg
        if not isinstance(fn, RecV):
            raise StuckError(f"applying a non-function {fn!r}")
        body = subst(fn.body, fn.x, arg)
        if fn.f is not None and fn.f != fn.x:
            body = subst(body, fn.f, fn)
        return ret((body, state))
    if isinstance(r, BinOp):
        return ret((_binop(r.op, r.left, r.right), state))
    if isinstance(r, UnOp):
        v = r.e
        if r.op == "not" and isinstance(v, BoolV):
            return ret((BoolV(not v.b), state))
        if r.op == "neg" and isinstance(v, IntV):
            return ret((IntV(-v.n), state))
        raise StuckError(f"bad operand for {r.op}: {v!r}")
    if isinstance(r, If):
        if not isinstance(r.cond, BoolV):
            raise StuckError(f"if on non-boolean {r.cond!r}")
        return ret((r.then if r.cond.b else r.orelse, state))
    if isinstance(r, Pair):
        return ret((PairV(r.fst, r.snd), state))
    if isinstance(r, (Fst, Snd)):
        if not isinstance(r.e, PairV):
            raise StuckError(f"projection from non-pair {r.e!r}")
        return ret((r.e.fst if isinstance(r, Fst) else r.e.snd, state))
    if isinstance(r, Inl):
        return ret((InlV(r.e), state))
    if isinstance(r, Inr):
        return ret((InrV(r.e), state))
    if isinstance(r, Match):
        v = r.e
        if isinstance(v, InlV):
            return ret((subst(r.left, r.x, v.v), state))
        if isinstance(v, InrV):
            return ret((subst(r.right, r.y, v.v), state))
        raise StuckError(f"match on non-injection {v!r}")
    if isinstance(r, Alloc):
        loc = state.fresh_loc()
        return ret((LocV(loc), state.alloc(r.e)))
    if isinstance(r, Load):
        v = r.e
        if isinstance(v, LocV) and 0 <= v.loc < len(state.heap):
            return ret((state.heap[v.loc], state))
        raise StuckError(f"load from invalid location {v!r}")
    if isinstance(r, Store):
        loc = r.loc
        if isinstance(loc, LocV) and 0 <= loc.loc < len(state.heap):
            return ret((UNIT, state.store(loc.loc, r.val)))
        raise StuckError(f"store to invalid location {loc!r}")
    if isinstance(r, AllocTape):
        n = _int(r.e)
        if n < 0:
            raise StuckError("negative tape bound")
        label = state.fresh_label()
        return ret((LabelV(label), state.alloc_tape(n)))
    if isinstance(r, Rand):
        n = _int(r.bound)
        if n < 0:
            raise StuckError("negative rand bound")
        if r.label is not None:
            lab = r.label
            if not isinstance(lab, LabelV) or not 0 <= lab.label < len(state.tapes):
                raise StuckError(f"rand on unknown tape {lab!r}")
            tape = state.tapes[lab.label]
            if tape.bound == n and tape.queue:
                popped = state.set_tape(lab.label, Tape(tape.bound, tape.queue[1:]))
                return ret((IntV(tape.queue[0]), popped))
        return uniform(n).map(lambda k: (IntV(k), state))
    if isinstance(r, Var):
        raise StuckError(f"free variable {r.name}")
    raise StuckError(f"no reduction for {type(r).__name__}")


def step_distr(cfg: Config) -> SubDist:
    """One step of the Markov semantics."""
    if cfg.expr.is_value():
        return zero()
    ctx, r = decompose(cfg.expr)
    try:
        res = head_step(r, cfg.state)
    except StuckError:
        return zero()
    if not ctx:
        return res.map(lambda es: Config(es[0], es[1]))
    return res.map(lambda es: Config(plug(ctx, es[0]), es[1]))


def rand_outcomes(cfg: Config) -> dict[Config, int] | None:
    """For a configuration whose redex is ``rand``, map each successor to the sampled value."""
    if cfg.expr.is_value():
        return None
    ctx, r = decompose(cfg.expr)
    if not isinstance(r, Rand):
        return None
    try:
        res = head_step(r, cfg.state)
    except StuckError:
        return None
    return {Config(plug(ctx, e), s): e.n for (e, s) in res.support}


def classify(cfg: Config) -> str:
    """``"value"``, ``"reducible"``, or ``"stuck: <reason>"``."""
    if cfg.expr.is_value():
        return "value"
    _, r = decompose(cfg.expr)
    try:
        head_step(r, cfg.state)
    except StuckError as exc:
        return f"stuck: {exc}"
    return "reducible"


def reducible(cfg: Config) -> bool:
    return step_distr(cfg).mass == 1


def redex_kind(cfg: Config) -> str:
    """Name of the redex constructor, or ``"value"``."""
    if cfg.expr.is_value():
        return "value"
    _, r = decompose(cfg.expr)
    return type(r).__name__.lower()


def context_labels(cfg: Config) -> list[str]:
    """Frame descriptions innermost first; empty for values."""
    if cfg.expr.is_value():
        return []
    ctx, _ = decompose(cfg.expr)
    return [f.describe() for f in reversed(ctx)]


# Tapes ---------------------------------------------------------------------------------


def state_step(state: State, label: int) -> SubDist:
    """Append a uniformly sampled value to tape ``label``."""
    if not 0 <= label < len(state.tapes):
        raise KeyError(f"unknown tape label {label}")
    tape = state.tapes[label]
    w = Fraction(1, tape.bound + 1)
    return SubDist._trusted(
        {state.set_tape(label, Tape(tape.bound, tape.queue + (k,))): w for k in range(tape.bound + 1)},
        Fraction(1),
    )


def fold_state_steps(state: State, labels: Iterable[int]) -> SubDist:
    """Monadic fold of :func:`state_step` over a list of labels."""
    mu = ret(state)
    for label in labels:
        mu = mu.bind(lambda s, label=label: state_step(s, label))
    return mu
