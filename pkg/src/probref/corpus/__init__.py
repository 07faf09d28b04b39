"""Case-study fixtures: programs, models, certificates and comparison points.

Each fixture lives in ``data/<name>/`` with ``program.rml``, ``meta.json``
and optionally ``model.json``, ``refinement.json`` and ``rsm.json``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

from ..markov import Model, finite_model_from_json, model_zoo, state_from_json
from ..randml.parser import parse
from ..randml.semantics import substitute_all
from ..randml.syntax import EMPTY_STATE, BoolV, Expr, InlV, InrV, IntV, LabelV, LocV, PairV, State, Tape, Val
from ..refine import Certificate
from ..rsm import RSMCertificate, rsm_from_json

DATA_DIR = Path(__file__).resolve().parent / "data"
NAMES = ("walk", "flips", "listgen", "lazy_real", "treap", "galton_watson")


class CorpusError(LookupError):
    pass


def _value(v: Any) -> Val:
    if isinstance(v, bool):
        return BoolV(v)
    if isinstance(v, int):
        return IntV(v)
    raise CorpusError(f"unsupported binding value {v!r}")


@dataclass
class CaseStudy:
    name: str
    path: Path
    meta: dict[str, Any] = field(repr=False)

    @property
    def title(self) -> str:
        return self.meta.get("title", self.name)

    @property
    def source(self) -> str:
        return (self.path / self.meta.get("program", "program.rml")).read_text(encoding="utf-8")

    def program(self, **bindings: Any) -> Expr:
        """The fixture program with free variables bound (defaults from meta)."""
        env = {**self.meta.get("bindings", {}), **bindings}
        e = parse(self.source)
        return substitute_all(e, {k: _value(v) for k, v in env.items()}) if env else e

    def model(self) -> Model:
        spec = self.meta["model"]
        model_file = self.path / "model.json"
        if model_file.exists():
            return finite_model_from_json(model_file.read_text(encoding="utf-8"))
        return model_zoo(spec["name"], **spec.get("params", {}))

    @property
    def model_name(self) -> str:
        return self.meta["model"]["name"]

    @property
    def model_start(self) -> Any:
        return state_from_json(self.meta["model_start"])

    @property
    def certificate_path(self) -> Path | None:
        name = self.meta.get("certificate")
        return self.path / name if name else None

    @cached_property
    def certificate(self) -> Certificate | None:
        p = self.certificate_path
        return Certificate.from_json(p.read_text(encoding="utf-8")) if p else None

    @property
    def rsm_path(self) -> Path | None:
        name = self.meta.get("rsm")
        return self.path / name if name else None

    @property
    def rsm(self) -> RSMCertificate | None:
        p = self.rsm_path
        return rsm_from_json(p.read_text(encoding="utf-8")) if p else None

    @property
    def compare_points(self) -> list[tuple[int, int]]:
        """Documented ``(n, m)`` pairs: model depth and a program depth that suffices."""
        return [(c["n"], c["m"]) for c in self.meta.get("compare", [])]

    def erasure_program(self) -> tuple[Expr, State, int] | None:
        """The tape-annotated variant, its initial state and the tape label, if any."""
        spec = self.meta.get("erasure")
        if not spec:
            return None
        e = parse((self.path / spec["program"]).read_text(encoding="utf-8"))
        state = EMPTY_STATE.with_tapes(Tape(spec.get("bound", 1), ()))
        env = {k: _value(v) for k, v in spec.get("bindings", {}).items()}
        env[spec["label_var"]] = LabelV(0)
        return substitute_all(e, env), state, 0

    def extra_program(self, key: str) -> Expr | None:
        name = self.meta.get(key)
        return parse((self.path / name).read_text(encoding="utf-8")) if name else None


def load_case(name: str) -> CaseStudy:
    path = DATA_DIR / name
    meta_file = path / "meta.json"
    if not meta_file.exists():
        raise CorpusError(f"unknown case study {name!r}; known: {', '.join(NAMES)}")
    return CaseStudy(name, path, json.loads(meta_file.read_text(encoding="utf-8")))


def corpus_list() -> list[CaseStudy]:
    return [load_case(n) for n in NAMES]


# Treap ---------------------------------------------------------------------------------

_TREAP_DRIVER = "let root = ref None in"


def transcribe_treap_insert(keys: tuple[int, ...] | list[int] = (2, 1, 3)) -> Expr:
    """Treap insertion program whose driver inserts ``keys`` into an empty treap.

    The program returns the root as ``None | Some node``.
    """
    text = load_case("treap").source
    head, _, _ = text.partition(_TREAP_DRIVER)
    body = "".join(f"insert root {k};\n" for k in keys)
    return parse(f"{head}{_TREAP_DRIVER}\n{body}!root\n")


class TreapInvariantError(AssertionError):
    pass


def _bits(loc: int, heap: tuple[Val, ...]) -> list[bool]:
    """Sampled prefix of the lazy real stored at ``loc``."""
    out = []
    seen = set()
    while loc not in seen:
        seen.add(loc)
        cell = heap[loc]
        if isinstance(cell, InlV):
            break
        if not (isinstance(cell, InrV) and isinstance(cell.v, PairV)):
            raise TreapInvariantError(f"location {loc} does not hold a lazy real digit")
        b, nxt = cell.v.fst, cell.v.snd
        out.append(b.b)
        loc = nxt.loc
    return out


def _greater(a: list[bool], b: list[bool]) -> bool | None:
    """Compare two sampled prefixes; None if the sampled digits do not decide it."""
    for x, y in zip(a, b):
        if x != y:
            return x > y
    return None


def treap_nodes(root: Val, heap: tuple[Val, ...]) -> dict[int, tuple[int, int, int | None, int | None]]:
    """Map node location to ``(key, priority location, left, right)``."""
    nodes: dict[int, tuple[int, int, int | None, int | None]] = {}

    def child(v: Val) -> int | None:
        if isinstance(v, InlV):
            return None
        if isinstance(v, InrV) and isinstance(v.v, LocV):
            return v.v.loc
        raise TreapInvariantError(f"malformed child {v!r}")

    stack = [child(root)]
    while stack:
        loc = stack.pop()
        if loc is None:
            continue
        if loc in nodes:
            raise TreapInvariantError(f"node {loc} is reachable twice")
        cell = heap[loc]
        try:
            k = cell.fst.n
            prio = cell.snd.fst.loc
            left, right = child(cell.snd.snd.fst), child(cell.snd.snd.snd)
        except AttributeError as exc:
            raise TreapInvariantError(f"location {loc} does not hold a treap node") from exc
        nodes[loc] = (k, prio, left, right)
        stack += [left, right]
    return nodes


def validate_treap(root: Val, state: State) -> list[int]:
    """Check BST order and heap order of the treap rooted at ``root``; return keys in order.

    Heap order is checked on what has been sampled: every parent must be
    known to exceed its children through a chain of decided digit comparisons.
    """
    heap = state.heap
    nodes = treap_nodes(root, heap)
    bits = {loc: _bits(p, heap) for loc, (_, p, _, _) in nodes.items()}
    locs = sorted(nodes)
    above = {a: {b for b in locs if a != b and _greater(bits[a], bits[b])} for a in locs}
    changed = True
    while changed:
        changed = False
        for a in locs:
            extra = set().union(*(above[b] for b in above[a])) - above[a] if above[a] else set()
            if extra:
                above[a] |= extra
                changed = True
    for a in locs:
        if a in above[a]:
            raise TreapInvariantError("priority comparisons are cyclic")

    def walk(loc: int | None, lo: int | None, hi: int | None) -> list[int]:
        if loc is None:
            return []
        k, _, left, right = nodes[loc]
        if (lo is not None and k <= lo) or (hi is not None and k >= hi):
            raise TreapInvariantError(f"key {k} violates search-tree order")
        for c in (left, right):
            if c is not None and c not in above[loc]:
                raise TreapInvariantError(f"priority of node {c} is not known to be below its parent {loc}")
        return walk(left, lo, k) + [k] + walk(right, k, hi)

    top = None if isinstance(root, InlV) else root.v.loc
    return walk(top, None, None)


__all__ = [
    "CaseStudy",
    "CorpusError",
    "DATA_DIR",
    "NAMES",
    "TreapInvariantError",
    "corpus_list",
    "load_case",
    "transcribe_treap_insert",
    "treap_nodes",
    "validate_treap",
]
