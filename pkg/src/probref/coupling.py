"""Left-partial couplings of sub-distributions.

A joint sub-distribution ``w`` over pairs is a left-partial R-coupling of
``mu1`` and ``mu2`` when its left marginal equals ``mu1``, its right marginal
is pointwise below ``mu2`` and its support lies inside ``R``.  Existence is
decided exactly by a max-flow computation on the bipartite network

    source -> a   (capacity mu1(a))
    a -> b        (for (a, b) in R, capacity mass(mu1) + mass(mu2))
    b -> sink     (capacity mu2(b))

A coupling exists iff the maximum flow saturates every source edge.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Collection, Hashable, Mapping

from .subdist import SubDist, canonical_key, ret

Relation = Callable[[Any, Any], bool] | Collection[tuple[Any, Any]]


class CouplingError(ValueError):
    """A coupling construction received invalid input."""


class InconsistencyError(AssertionError):
    """A verified coupling produced a conclusion that does not hold.

    This indicates a bug in the checker, never a user error.
    """


def as_predicate(R: Relation) -> Callable[[Any, Any], bool]:
    if callable(R):
        return R
    pairs = frozenset(R)
    return lambda a, b: (a, b) in pairs


def equality(a: Any, b: Any) -> bool:
    return a == b


def full(a: Any, b: Any) -> bool:
    return True


def materialize(mu1: SubDist, mu2: SubDist, R: Relation) -> list[tuple[Any, Any]]:
    """Pairs of ``supp(mu1) x supp(mu2)`` inside ``R`` in canonical order."""
    pred = as_predicate(R)
    return [(a, b) for a in mu1.outcomes() for b in mu2.outcomes() if pred(a, b)]


@dataclass(frozen=True)
class CouplingWitness:
    """A joint sub-distribution over pairs presented as a coupling."""

    joint: SubDist

    @classmethod
    def of(cls, entries: Mapping[tuple[Any, Any], Any]) -> CouplingWitness:
        return cls(SubDist(entries))

    def left(self) -> SubDist:
        return self.joint.map(lambda ab: ab[0])

    def right(self) -> SubDist:
        return self.joint.map(lambda ab: ab[1])

    def to_json(self, encode: Callable[[Any], Any] = lambda x: x) -> list[dict[str, Any]]:
        return [
            {
                "left": encode(a),
                "right": encode(b),
                "numerator": w.numerator,
                "denominator": w.denominator,
            }
            for (a, b), w in self.joint.items()
        ]

    @classmethod
    def from_json(cls, records: list[dict[str, Any]], decode: Callable[[Any], Any] = lambda x: x) -> CouplingWitness:
        try:
            return cls(
                SubDist(
                    ((decode(r["left"]), decode(r["right"])), Fraction(int(r["numerator"]), int(r["denominator"])))
                    for r in records
                )
            )
        except (KeyError, TypeError, ZeroDivisionError) as exc:
            raise CouplingError(f"malformed witness record: {exc}") from exc


def witness_violation(mu1: SubDist, mu2: SubDist, R: Relation, w: CouplingWitness) -> str | None:
    """Describe the first violated coupling clause, or return ``None``."""
    left: dict[Any, Fraction] = {}
    right: dict[Any, Fraction] = {}
    for (a, b), p in w.joint.raw().items():
        left[a] = left.get(a, Fraction(0)) + p
        right[b] = right.get(b, Fraction(0)) + p
    for a in sorted(set(left) | set(mu1.support), key=canonical_key):
        if left.get(a, Fraction(0)) != mu1[a]:
            return f"left marginal at {a!r} is {left.get(a, Fraction(0))}, expected {mu1[a]}"
    for b in sorted(right, key=canonical_key):
        if right[b] > mu2[b]:
            return f"right marginal at {b!r} is {right[b]}, exceeds {mu2[b]}"
    pred = as_predicate(R)
    for a, b in w.joint.outcomes():
        if not pred(a, b):
            return f"support pair ({a!r}, {b!r}) not in relation"
    return None


def check_witness(mu1: SubDist, mu2: SubDist, R: Relation, w: CouplingWitness) -> bool:
    return witness_violation(mu1, mu2, R, w) is None


@dataclass
class FlowResult:
    """Outcome of the max-flow existence check.

    ``hall_set`` is the left side of a minimum cut: a set X of left outcomes
    with ``mu1(X) - mu2(R(X)) == deficit``.  When the deficit is positive it
    certifies that no coupling exists.
    """

    value: Fraction
    required: Fraction
    joint: SubDist
    hall_set: list[Any] = field(default_factory=list)
    hall_neighbours: list[Any] = field(default_factory=list)
    unmatched: list[tuple[Any, Fraction, Fraction]] = field(default_factory=list)

    @property
    def deficit(self) -> Fraction:
        return self.required - self.value

    @property
    def feasible(self) -> bool:
        return self.value == self.required

    def witness(self) -> CouplingWitness | None:
        return CouplingWitness(self.joint) if self.feasible else None


def max_flow_coupling(mu1: SubDist, mu2: SubDist, R: Relation) -> FlowResult:
    """Run Edmonds-Karp on the coupling network with exact rationals."""
    lefts = mu1.outcomes()
    rights = mu2.outcomes()
    p, q = len(lefts), len(rights)
    src, sink = 0, p + q + 1
    big = mu1.mass + mu2.mass
    cap: list[dict[int, Fraction]] = [dict() for _ in range(p + q + 2)]

    def add_edge(u: int, v: int, c: Fraction) -> None:
        cap[u][v] = cap[u].get(v, Fraction(0)) + c
        cap[v].setdefault(u, Fraction(0))

    for i, a in enumerate(lefts):
        add_edge(src, 1 + i, mu1[a])
    for j, b in enumerate(rights):
        add_edge(1 + p + j, sink, mu2[b])
    pred = as_predicate(R)
    middle: list[tuple[int, int]] = []
    for i, a in enumerate(lefts):
        for j, b in enumerate(rights):
            if pred(a, b):
                add_edge(1 + i, 1 + p + j, big)
                middle.append((i, j))
    original = [dict(c) for c in cap]

    value = Fraction(0)
    while True:
        parent = {src: src}
        queue = deque([src])
        while queue and sink not in parent:
            u = queue.popleft()
            for v in sorted(cap[u]):
                if v not in parent and cap[u][v] > 0:
                    parent[v] = u
                    queue.append(v)
        if sink not in parent:
            break
        bottleneck = None
        v = sink
        while v != src:
            u = parent[v]
            c = cap[u][v]
            bottleneck = c if bottleneck is None or c < bottleneck else bottleneck
            v = u
        v = sink
        while v != src:
            u = parent[v]
            cap[u][v] -= bottleneck
            cap[v][u] += bottleneck
            v = u
        value += bottleneck

    joint = {}
    for i, j in middle:
        f = original[1 + i][1 + p + j] - cap[1 + i][1 + p + j]
        if f > 0:
            joint[(lefts[i], rights[j])] = f

    # residual reachability from the source gives the min-cut / Hall set
    seen = {src}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v, c in cap[u].items():
            if c > 0 and v not in seen:
                seen.add(v)
                queue.append(v)
    hall = [lefts[i] for i in range(p) if 1 + i in seen]
    neigh = [rights[j] for j in range(q) if 1 + p + j in seen]
    unmatched = []
    for i, a in enumerate(lefts):
        routed = original[src][1 + i] - cap[src][1 + i]
        if routed < mu1[a]:
            unmatched.append((a, mu1[a], routed))
    return FlowResult(
        value=value,
        required=mu1.mass,
        joint=SubDist._trusted(joint),
        hall_set=hall,
        hall_neighbours=neigh,
        unmatched=unmatched,
    )


def exists_coupling(mu1: SubDist, mu2: SubDist, R: Relation) -> CouplingWitness | None:
    """Return a left-partial R-coupling of ``mu1`` and ``mu2`` if one exists.

    Which witness is returned when several exist is unspecified but
    deterministic for a given input.
    """
    return max_flow_coupling(mu1, mu2, R).witness()


def diagonal(mu: SubDist) -> CouplingWitness:
    """The identity coupling of ``mu`` with itself."""
    return CouplingWitness(mu.map(lambda a: (a, a)))


def lift_ret(a: Hashable, b: Hashable, R: Relation) -> CouplingWitness:
    """Coupling of ``ret(a)`` and ``ret(b)`` for a related pair."""
    if not as_predicate(R)(a, b):
        raise CouplingError(f"({a!r}, {b!r}) is not in the relation")
    return CouplingWitness(ret((a, b)))


def compose(
    w1: CouplingWitness,
    f1: Callable[[Any], SubDist],
    f2: Callable[[Any], SubDist],
    pair_witnesses: Mapping[tuple[Any, Any], CouplingWitness] | Callable[[Any, Any], CouplingWitness | None],
    S: Relation,
) -> CouplingWitness:
    """Compose a coupling with per-pair continuation couplings.

    The result couples ``mu1 >>= f1`` with ``mu2 >>= f2`` along ``S``, where
    ``mu1``/``mu2`` are the distributions ``w1`` couples.
    """
    lookup = pair_witnesses if callable(pair_witnesses) else pair_witnesses.get
    chosen: dict[tuple[Any, Any], CouplingWitness] = {}
    for a, b in w1.joint.outcomes():
        wab = lookup(a, b) if callable(pair_witnesses) else lookup((a, b))
        if wab is None:
            raise CouplingError(f"missing continuation witness for ({a!r}, {b!r})")
        problem = witness_violation(f1(a), f2(b), S, wab)
        if problem is not None:
            raise CouplingError(f"continuation witness for ({a!r}, {b!r}) is invalid: {problem}")
        chosen[(a, b)] = wab
    return CouplingWitness(w1.joint.bind(lambda ab: chosen[ab].joint))


def pointwise_bound(mu1: SubDist, mu2: SubDist, w: CouplingWitness) -> list[tuple[Any, Fraction, Fraction]]:
    """From a valid equality coupling, list ``(a, mu1(a), mu2(a))`` for all a.

    Every row satisfies ``mu1(a) <= mu2(a)``; this is re-checked directly.
    """
    problem = witness_violation(mu1, mu2, equality, w)
    if problem is not None:
        raise CouplingError(f"not a valid (=)-coupling: {problem}")
    rows = []
    for a in sorted(mu1.support | mu2.support, key=canonical_key):
        if mu1[a] > mu2[a]:
            raise InconsistencyError(f"valid (=)-coupling but mu1({a!r}) = {mu1[a]} > mu2({a!r}) = {mu2[a]}")
        rows.append((a, mu1[a], mu2[a]))
    return rows


def mass_bound(mu1: SubDist, mu2: SubDist, w: CouplingWitness, R: Relation = full) -> tuple[Fraction, Fraction]:
    """From any valid coupling, return ``(mass(mu1), mass(mu2))`` with the first below the second."""
    problem = witness_violation(mu1, mu2, R, w)
    if problem is not None:
        raise CouplingError(f"not a valid coupling: {problem}")
    if mu1.mass > mu2.mass:
        raise InconsistencyError(f"valid coupling but mass {mu1.mass} > {mu2.mass}")
    return mu1.mass, mu2.mass
