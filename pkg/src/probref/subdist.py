"""Finite-support sub-distributions with exact rational probabilities.

A :class:`SubDist` maps outcomes to :class:`fractions.Fraction` weights whose
total is at most one.  Zero weights are never stored, so two sub-distributions
are equal exactly when their entry maps are equal.
"""

from __future__ import annotations

import dataclasses
import json
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping, TypeVar

A = TypeVar("A", bound=Hashable)
B = TypeVar("B", bound=Hashable)

ProbLike = Fraction | int | str


class SubDistError(ValueError):
    """Raised when entries do not form a sub-distribution."""


def as_prob(value: ProbLike) -> Fraction:
    """Parse an exact probability; accepts ``Fraction``, ``int`` or ``"n/d"``."""
    if isinstance(value, float):
        raise SubDistError(f"floating point probability {value!r} is not exact")
    try:
        p = Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise SubDistError(f"not a rational probability: {value!r}") from exc
    if p < 0 or p > 1:
        raise SubDistError(f"probability {p} outside [0, 1]")
    return p


def canonical_key(x: Any) -> tuple:
    """Structural sort key that totally orders heterogeneous outcomes.

    Booleans sort before integers, integers before strings, and containers
    and dataclasses compare field by field.
    """
    if x is None:
        return (0,)
    if isinstance(x, bool):
        return (1, int(x))
    if isinstance(x, int):
        return (2, x)
    if isinstance(x, Fraction):
        return (3, x)
    if isinstance(x, str):
        return (4, x)
    if isinstance(x, (tuple, list)):
        return (5, len(x), tuple(canonical_key(i) for i in x))
    if isinstance(x, (frozenset, set)):
        return (6, tuple(sorted(canonical_key(i) for i in x)))
    if dataclasses.is_dataclass(x) and not isinstance(x, type):
        return (
            7,
            type(x).__name__,
            tuple(canonical_key(getattr(x, f.name)) for f in dataclasses.fields(x)),
        )
    return (9, type(x).__name__, repr(x))


class SubDist(Mapping[A, Fraction]):
    """Immutable finite-support sub-distribution.

    Parameters
    ----------
    entries : mapping or iterable of pairs
        Outcome to probability.  Zero entries are dropped; repeated outcomes
        in an iterable of pairs are summed.
    """

    __slots__ = ("_p", "_mass", "_sorted", "_hash")

    def __init__(self, entries: Mapping[A, ProbLike] | Iterable[tuple[A, ProbLike]] = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        p: dict[A, Fraction] = {}
        for a, w in items:
            w = as_prob(w)
            if w:
                p[a] = p.get(a, Fraction(0)) + w
        total = sum(p.values(), Fraction(0))
        if total > 1:
            raise SubDistError(f"total mass {total} exceeds 1")
        for a, w in p.items():
            if w > 1:
                raise SubDistError(f"probability {w} of {a!r} exceeds 1")
        self._p = p
        self._mass = total
        self._sorted: list[A] | None = None
        self._hash: int | None = None

    @classmethod
    def _trusted(cls, p: dict[A, Fraction], mass: Fraction | None = None) -> SubDist[A]:
        # internal constructor: caller guarantees pruned, non-negative entries
        d = cls.__new__(cls)
        d._p = p
        d._mass = sum(p.values(), Fraction(0)) if mass is None else mass
        if d._mass > 1:
            raise SubDistError(f"total mass {d._mass} exceeds 1")
        d._sorted = None
        d._hash = None
        return d

    # Mapping protocol --------------------------------------------------------
    def __getitem__(self, a: A) -> Fraction:
        return self._p.get(a, Fraction(0))

    def __contains__(self, a: object) -> bool:
        return a in self._p

    def __iter__(self) -> Iterator[A]:
        return iter(self.outcomes())

    def __len__(self) -> int:
        return len(self._p)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, SubDist):
            return self._p == other._p
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._p.items()))
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{a!r}: {w}" for a, w in self.items())
        return f"SubDist({{{body}}})"

    # Queries -------------------------------------------------------------------
    def outcomes(self) -> list[A]:
        """Support in canonical order."""
        if self._sorted is None:
            self._sorted = sorted(self._p, key=canonical_key)
        return list(self._sorted)

    def items(self) -> list[tuple[A, Fraction]]:  # type: ignore[override]
        return [(a, self._p[a]) for a in self.outcomes()]

    def raw(self) -> dict[A, Fraction]:
        """Entry map in construction order (cheaper than :meth:`items`)."""
        return dict(self._p)

    @property
    def support(self) -> frozenset[A]:
        return frozenset(self._p)

    @property
    def mass(self) -> Fraction:
        return self._mass

    def prob(self, pred: Callable[[A], bool]) -> Fraction:
        """Total probability of outcomes satisfying ``pred``."""
        return sum((w for a, w in self._p.items() if pred(a)), Fraction(0))

    # Monad -----------------------------------------------------------------------
    def bind(self, f: Callable[[A], SubDist[B]]) -> SubDist[B]:
        out: dict[B, Fraction] = {}
        for a, w in self._p.items():
            for b, v in f(a)._p.items():
                out[b] = out.get(b, Fraction(0)) + w * v
        return SubDist._trusted(out)

    def map(self, f: Callable[[A], B]) -> SubDist[B]:
        out: dict[B, Fraction] = {}
        for a, w in self._p.items():
            b = f(a)
            out[b] = out.get(b, Fraction(0)) + w
        return SubDist._trusted(out, self._mass)

    def filter(self, pred: Callable[[A], bool]) -> SubDist[A]:
        return SubDist._trusted({a: w for a, w in self._p.items() if pred(a)})

    def marginals(self) -> tuple[SubDist, SubDist]:
        """Left and right marginals of a distribution over pairs."""
        return self.map(lambda ab: ab[0]), self.map(lambda ab: ab[1])

    # Serialization ---------------------------------------------------------------
    def to_json(self, encode: Callable[[A], Any] = lambda a: a) -> list[dict[str, Any]]:
        return [
            {"outcome": encode(a), "numerator": w.numerator, "denominator": w.denominator}
            for a, w in self.items()
        ]

    @classmethod
    def from_json(cls, records: list[dict[str, Any]], decode: Callable[[Any], A] = lambda a: a) -> SubDist[A]:
        try:
            return cls(
                (decode(r["outcome"]), Fraction(int(r["numerator"]), int(r["denominator"])))
                for r in records
            )
        except (KeyError, TypeError, ZeroDivisionError) as exc:
            raise SubDistError(f"malformed sub-distribution record: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json(_jsonable))


def _jsonable(a: Any) -> Any:
    if isinstance(a, tuple):
        return [_jsonable(i) for i in a]
    return a


def ret(a: A) -> SubDist[A]:
    """Dirac distribution at ``a``."""
    return SubDist._trusted({a: Fraction(1)}, Fraction(1))


def zero() -> SubDist:
    """The everywhere-zero sub-distribution."""
    return SubDist._trusted({}, Fraction(0))


def uniform(n: int) -> SubDist[int]:
    """Uniform distribution on ``{0, ..., n}``."""
    if n < 0:
        raise SubDistError(f"uniform bound must be non-negative, got {n}")
    w = Fraction(1, n + 1)
    return SubDist._trusted({k: w for k in range(n + 1)}, Fraction(1))


def uniform_over(outcomes: Iterable[A]) -> SubDist[A]:
    xs = list(dict.fromkeys(outcomes))
    if not xs:
        return zero()
    w = Fraction(1, len(xs))
    return SubDist._trusted({a: w for a in xs}, Fraction(1))


def bind(mu: SubDist[A], f: Callable[[A], SubDist[B]]) -> SubDist[B]:
    return mu.bind(f)


def mass(mu: SubDist) -> Fraction:
    return mu.mass


def support(mu: SubDist[A]) -> frozenset[A]:
    return mu.support


def fold_m(f: Callable[[A, B], SubDist[A]], init: A, xs: Iterable[B]) -> SubDist[A]:
    """Monadic left fold: ``init >>= f(., x1) >>= f(., x2) ...``."""
    mu = ret(init)
    for x in xs:
        mu = mu.bind(lambda a, x=x: f(a, x))
    return mu


def parse_fraction(text: str) -> Fraction:
    """Parse a ``"num/den"`` string without the [0, 1] restriction."""
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise SubDistError(f"not a rational number: {text!r}") from exc


def fraction_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"
