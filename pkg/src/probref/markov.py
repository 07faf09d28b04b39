"""Markov chains with final states and their stratified execution.

``exec_n(s)`` is the sub-distribution over final states reachable from ``s``
in at most ``n`` steps.  It is computed here by a forward pass over the
reachable frontier, which is equivalent to the usual backward recursion

    exec_n(s) = 0                        if s non-final and n = 0
              = ret(s)                   if s final
              = step(s) >>= exec_(n-1)   otherwise
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterator

from .subdist import SubDist, SubDistError, as_prob, uniform_over, zero

DEFAULT_STATE_CAP = 10**6


class ModelError(ValueError):
    """Malformed model description or unknown model name."""


class StateCapExceeded(RuntimeError):
    """Exploration touched more states than the configured cap."""


@dataclass(frozen=True)
class Model:
    """A Markov chain ``(step, is_final)`` with an optional default start."""

    step: Callable[[Any], SubDist]
    is_final: Callable[[Any], bool]
    name: str = "model"
    start: Any = None
    states: tuple | None = None

    def __call__(self, s: Any) -> SubDist:
        return zero() if self.is_final(s) else self.step(s)

    def reducible(self, s: Any) -> bool:
        """Full-mass step available (the ``red`` side condition)."""
        return not self.is_final(s) and self.step(s).mass == 1


@dataclass
class ExecTable:
    """Per-depth execution results from a single start state.

    ``exec[k]`` is ``exec_k(start)``; ``frontier_mass[k]`` is the probability
    of still being in a non-final state after exactly ``k`` steps, and
    ``reachable[k]`` the number of distinct frontier states.
    """

    start: Any
    exec: list[SubDist] = field(default_factory=list)
    frontier_mass: list[Fraction] = field(default_factory=list)
    reachable: list[int] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.exec) - 1

    def masses(self) -> list[Fraction]:
        return [d.mass for d in self.exec]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["depth", "mass_num", "mass_den"])
        for k, m in enumerate(self.masses()):
            w.writerow([k, m.numerator, m.denominator])
        return buf.getvalue()


def iter_exec(
    model: Model,
    start: Any,
    *,
    state_cap: int = DEFAULT_STATE_CAP,
    key: Callable[[Any], Hashable] | None = None,
) -> Iterator[tuple[int, SubDist, Fraction, int]]:
    """Yield ``(k, exec_k(start), frontier mass, frontier size)`` for k = 0, 1, ...

    ``key`` merges states that are equivalent for the purpose of the
    computation; the first representative seen is kept.
    """
    finals: dict[Any, Fraction] = {}
    frontier: dict[Any, Fraction] = {}
    if model.is_final(start):
        finals[start] = Fraction(1)
    else:
        frontier[start] = Fraction(1)
    reps: dict[Hashable, Any] = {}

    def canon(s: Any) -> Any:
        if key is None:
            return s
        return reps.setdefault(key(s), s)

    k = 0
    while True:
        yield k, SubDist._trusted(dict(finals)), sum(frontier.values(), Fraction(0)), len(frontier)
        nxt: dict[Any, Fraction] = {}
        for s, w in frontier.items():
            for t, v in model.step(s).raw().items():
                t = canon(t)
                if model.is_final(t):
                    finals[t] = finals.get(t, Fraction(0)) + w * v
                else:
                    nxt[t] = nxt.get(t, Fraction(0)) + w * v
            if len(nxt) > state_cap:
                raise StateCapExceeded(f"more than {state_cap} states reachable at depth {k + 1}")
        frontier = nxt
        k += 1


def exec_table(model: Model, start: Any, n: int, **kw: Any) -> ExecTable:
    table = ExecTable(start=start)
    for k, dist, fmass, size in iter_exec(model, start, **kw):
        table.exec.append(dist)
        table.frontier_mass.append(fmass)
        table.reachable.append(size)
        if k >= n:
            break
    return table


def exec_n(model: Model, start: Any, n: int, **kw: Any) -> SubDist:
    """Distribution over final states reached within ``n`` steps."""
    return exec_table(model, start, n, **kw).exec[-1]


def term_prob_lower(model: Model, start: Any, n: int, **kw: Any) -> Fraction:
    """Certified lower bound ``mass(exec_n(start))`` on the termination probability."""
    return exec_n(model, start, n, **kw).mass


def reachable_states(model: Model, start: Any, depth: int, *, state_cap: int = DEFAULT_STATE_CAP) -> list[Any]:
    """All states reachable from ``start`` within ``depth`` steps, BFS order."""
    seen = {start: None}
    layer = [start]
    for _ in range(depth):
        nxt = []
        for s in layer:
            if model.is_final(s):
                continue
            for t in model.step(s).outcomes():
                if t not in seen:
                    seen[t] = None
                    nxt.append(t)
                    if len(seen) > state_cap:
                        raise StateCapExceeded(f"more than {state_cap} states within depth {depth}")
        layer = nxt
    return list(seen)


# Model zoo ---------------------------------------------------------------------

HALF = Fraction(1, 2)


def random_walk() -> Model:
    def step(n: int) -> SubDist:
        if n <= 0:
            return zero()
        return SubDist._trusted({n - 1: HALF, n + 1: HALF}, Fraction(1))

    return Model(step, lambda n: n == 0, name="random_walk", start=1)


def flip_model() -> Model:
    def step(b: bool) -> SubDist:
        return SubDist._trusted({True: HALF, False: HALF}, Fraction(1)) if b else zero()

    return Model(step, lambda b: not b, name="flip", start=True, states=(False, True))


LISTGEN_STATES = ("qf", "q0", "q1")


def listgen_model() -> Model:
    table = {
        "q0": SubDist({"qf": HALF, "q1": HALF}),
        "q1": SubDist({"q1": HALF, "q0": HALF}),
    }
    return Model(
        lambda q: table.get(q, zero()),
        lambda q: q == "qf",
        name="listgen",
        start="q0",
        states=LISTGEN_STATES,
    )


def two_coin_model() -> Model:
    pairs = [(b1, b2) for b1 in (True, False) for b2 in (True, False)]
    coins = uniform_over(pairs)

    def step(s: tuple[bool, bool]) -> SubDist:
        return coins if s[0] == s[1] else zero()

    return Model(step, lambda s: s[0] != s[1], name="two_coin", start=(True, True), states=tuple(pairs))


def gw_walk(mu: SubDist) -> Model:
    """Galton-Watson walk: from ``n + 1`` move to ``n + k`` with probability ``mu(k)``."""
    if mu.mass != 1 or any(not isinstance(k, int) or isinstance(k, bool) or k < 0 for k in mu.support):
        raise ModelError("offspring distribution must have mass 1 over natural numbers")
    offspring = mu.items()

    def step(n: int) -> SubDist:
        if n <= 0:
            return zero()
        return SubDist._trusted({n - 1 + k: w for k, w in offspring}, Fraction(1))

    return Model(step, lambda n: n == 0, name="gw_walk", start=1)


def model_zoo(name: str, **params: Any) -> Model:
    """Look up one of the built-in case-study models.

    ``gw_walk`` requires ``mu``: a :class:`SubDist` or a mapping from
    naturals to probabilities.
    """
    if name == "random_walk":
        return random_walk()
    if name == "flip":
        return flip_model()
    if name == "listgen":
        return listgen_model()
    if name == "two_coin":
        return two_coin_model()
    if name == "gw_walk":
        mu = params.get("mu")
        if mu is None:
            raise ModelError("gw_walk needs an offspring distribution 'mu'")
        if not isinstance(mu, SubDist):
            try:
                mu = SubDist({int(k): as_prob(v) for k, v in dict(mu).items()})
            except (SubDistError, ValueError, TypeError) as exc:
                raise ModelError(f"invalid offspring distribution: {exc}") from exc
        return gw_walk(mu)
    raise ModelError(f"unknown model {name!r}")


ZOO_NAMES = ("random_walk", "flip", "listgen", "two_coin", "gw_walk")


def parse_state(text: str) -> Any:
    """Parse a model state written on a command line or in JSON."""
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        return text
    return state_from_json(value)


def state_from_json(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(state_from_json(v) for v in value)
    return value


def state_to_json(s: Any) -> Any:
    if isinstance(s, tuple):
        return [state_to_json(v) for v in s]
    return s


# JSON models ---------------------------------------------------------------------


def finite_model_from_json(doc: dict[str, Any] | str) -> Model:
    """Build an explicit finite model from ``{states, edges, start}``.

    ``states`` is a list of ``{id, final}``; ``edges`` a list of
    ``{from, to, num, den}``.
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    if not isinstance(doc, dict):
        raise ModelError("model document must be an object")
    states = doc.get("states") or []
    if not states:
        raise ModelError("model has no states")
    final: dict[Any, bool] = {}
    for entry in states:
        try:
            sid = state_from_json(entry["id"])
        except (KeyError, TypeError) as exc:
            raise ModelError(f"malformed state entry {entry!r}") from exc
        if sid in final:
            raise ModelError(f"duplicate state {sid!r}")
        final[sid] = bool(entry.get("final", False))
    if "start" not in doc:
        raise ModelError("model has no start state")
    start = state_from_json(doc["start"])
    if start not in final:
        raise ModelError(f"start state {start!r} is not declared")

    out: dict[Any, dict[Any, Fraction]] = {s: {} for s in final}
    for e in doc.get("edges", []):
        try:
            src, dst = state_from_json(e["from"]), state_from_json(e["to"])
            p = Fraction(int(e["num"]), int(e["den"]))
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ModelError(f"malformed edge {e!r}") from exc
        if src not in final or dst not in final:
            raise ModelError(f"edge {e!r} mentions an undeclared state")
        if p < 0 or p > 1:
            raise ModelError(f"edge probability {p} outside [0, 1]")
        if final[src] and p > 0:
            raise ModelError(f"final state {src!r} has outgoing edges")
        out[src][dst] = out[src].get(dst, Fraction(0)) + p
    steps: dict[Any, SubDist] = {}
    for s, row in out.items():
        try:
            steps[s] = SubDist(row)
        except SubDistError as exc:
            raise ModelError(f"outgoing probabilities of {s!r}: {exc}") from exc

    return Model(
        step=lambda s: steps.get(s, zero()),
        is_final=lambda s: final.get(s, False),
        name=str(doc.get("name", "json_model")),
        start=start,
        states=tuple(final),
    )


def finite_model_to_json(model: Model, start: Any = None) -> dict[str, Any]:
    if model.states is None:
        raise ModelError("only models with an explicit state list can be exported")
    edges = []
    for s in model.states:
        for t, p in model(s).items():
            edges.append({"from": state_to_json(s), "to": state_to_json(t), "num": p.numerator, "den": p.denominator})
    return {
        "name": model.name,
        "states": [{"id": state_to_json(s), "final": bool(model.is_final(s))} for s in model.states],
        "edges": edges,
        "start": state_to_json(model.start if start is None else start),
    }


__all__ = [
    "DEFAULT_STATE_CAP",
    "ExecTable",
    "Model",
    "ModelError",
    "StateCapExceeded",
    "ZOO_NAMES",
    "exec_n",
    "exec_table",
    "finite_model_from_json",
    "finite_model_to_json",
    "flip_model",
    "gw_walk",
    "iter_exec",
    "listgen_model",
    "model_zoo",
    "parse_state",
    "random_walk",
    "reachable_states",
    "term_prob_lower",
    "two_coin_model",
]
