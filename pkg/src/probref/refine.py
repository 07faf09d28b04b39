"""Checker for refinement certificates relating a Markov model to a RandML program.

A certificate is a finite graph of joint nodes.  Each node names one of the
rules

    RefVal        the program is a value
    RefProg       the program steps, the model stays:   ret(m)  ⊑R step(ρ)
    RefModelProg  both step together:                    step(m) ⊑R step(ρ)
    RefModel      the model steps, the program stays:   step(m) ⊑R ret(ρ)
    RefTape       the model steps against presampling:  step(m) ⊑R foldM(state_step, σ, ls)

and describes the relation R by a list of entries pointing at successor
nodes.  The checker explores concrete (model state, configuration) pairs
from the root, matches each against node patterns and discharges the
coupling obligation with the exact max-flow decider.  Pattern parameters
(``"$n"``) range over a declared finite sample set; successors whose
parameters leave that set are counted as frontier instances and are not
explored further.

Certificate JSON::

    {"params": ["n"], "samples": {"n": [0, ..., 8]},
     "root": {"node": "start", "model": "=n"},
     "nodes": {"start": {"rule": "RefProg",
                         "model_state": "$n", "guard": "n >= 1",
                         "config_pattern": {"redex": "pure", "context": "regex"},
                         "labels": [0],
                         "relation": [{"model": "=n", "node": "start", "sample": 1}]}}}

Model-state patterns are JSON literals, ``"$x"`` binders or lists of
patterns.  Relation ``model`` fields are literals or ``"=expr"`` arithmetic
over the bound parameters.  ``sample`` restricts an entry to successors
produced by that outcome of a ``rand`` redex; ``appended`` to the values
presampled onto the tapes by a RefTape node.

Guardedness is not checked: the later modality of the original relation is
replaced by :func:`soundness_crosscheck`, which compares exact termination
masses of the two sides.
"""

from __future__ import annotations

import ast
import itertools
import json
import operator
import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable

from .coupling import FlowResult, check_witness, max_flow_coupling
from .markov import DEFAULT_STATE_CAP, Model, iter_exec, state_from_json, state_to_json
from .randml.machine import as_markov, config_key
from .randml.parser import parse, pretty
from .randml.semantics import context_labels, free_vars, rand_outcomes, redex_kind, state_step, step_distr, substitute_all
from .randml.syntax import EMPTY_STATE, BoolV, Config, Expr, IntV, State
from .subdist import SubDist, fraction_str, ret

RULES = ("RefVal", "RefProg", "RefModelProg", "RefModel", "RefTape")
REDEX_CLASSES = ("rand", "pure", "value", "any")
DEFAULT_SAMPLES = tuple(range(9))
DEFAULT_BUDGET = 100_000


class CertificateError(ValueError):
    """Malformed certificate document."""


# Parameter expressions ----------------------------------------------------------------

_BINOPS: dict[type, Callable[[Any, Any], Any]] = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.FloorDiv: operator.floordiv,
    ast.Mod: operator.mod,
}
_CMPS: dict[type, Callable[[Any, Any], bool]] = {
    ast.Eq: operator.eq,
    ast.NotEq: operator.ne,
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
}


def eval_param_expr(text: str, env: dict[str, Any]) -> Any:
    """Evaluate a small arithmetic/boolean expression over pattern parameters."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise CertificateError(f"bad expression {text!r}: {exc.msg}") from exc

    def ev(n: ast.AST) -> Any:
        if isinstance(n, ast.Expression):
            return ev(n.body)
        if isinstance(n, ast.Constant) and isinstance(n.value, (int, bool, str)):
            return n.value
        if isinstance(n, ast.Name):
            if n.id in env:
                return env[n.id]
            if n.id in ("true", "True"):
                return True
            if n.id in ("false", "False"):
                return False
            raise CertificateError(f"unbound parameter {n.id!r} in {text!r}")
        if isinstance(n, ast.Tuple):
            return tuple(ev(e) for e in n.elts)
        if isinstance(n, ast.BinOp) and type(n.op) in _BINOPS:
            return _BINOPS[type(n.op)](ev(n.left), ev(n.right))
        if isinstance(n, ast.UnaryOp) and isinstance(n.op, ast.USub):
            return -ev(n.operand)
        if isinstance(n, ast.UnaryOp) and isinstance(n.op, ast.Not):
            return not ev(n.operand)
        if isinstance(n, ast.BoolOp):
            vals = [ev(v) for v in n.values]
            return all(vals) if isinstance(n.op, ast.And) else any(vals)
        if isinstance(n, ast.Compare):
            left = ev(n.left)
            for op, right in zip(n.ops, n.comparators):
                r = ev(right)
                if type(op) not in _CMPS or not _CMPS[type(op)](left, r):
                    return False
                left = r
            return True
        raise CertificateError(f"unsupported construct in {text!r}")

    return ev(tree)


def same_state(a: Any, b: Any) -> bool:
    """Structural equality that does not identify ``True`` with ``1``."""
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(same_state(x, y) for x, y in zip(a, b))
    return type(a) is type(b) and a == b


def match_state(pattern: Any, value: Any, env: dict[str, Any]) -> dict[str, Any] | None:
    if isinstance(pattern, str) and pattern.startswith("$"):
        name = pattern[1:]
        if name in env:
            return env if same_state(env[name], value) else None
        return {**env, name: value}
    if isinstance(pattern, list):
        if not isinstance(value, tuple) or len(value) != len(pattern):
            return None
        for p, v in zip(pattern, value):
            env = match_state(p, v, env)
            if env is None:
                return None
        return env
    return env if same_state(state_from_json(pattern), value) else None


def model_value(spec: Any, env: dict[str, Any]) -> Any:
    if isinstance(spec, str) and spec.startswith("="):
        return eval_param_expr(spec[1:], env)
    if isinstance(spec, list):
        return tuple(model_value(s, env) for s in spec)
    return state_from_json(spec)


# Certificate structure ------------------------------------------------------------------


@dataclass(frozen=True)
class RelEntry:
    node: str
    model: Any = None
    sample: int | None = None
    appended: tuple[int, ...] | None = None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"model": self.model, "node": self.node}
        if self.sample is not None:
            out["sample"] = self.sample
        if self.appended is not None:
            out["appended"] = list(self.appended)
        return out


@dataclass(frozen=True)
class Node:
    key: str
    rule: str
    model_state: Any
    redex: str = "any"
    context: str | None = None
    guard: str | None = None
    labels: tuple[int, ...] = ()
    relation: tuple[RelEntry, ...] = ()

    def matches(self, m: Any, cfg: Config, env: dict[str, Any] | None = None) -> dict[str, Any] | None:
        """Bindings if ``(m, cfg)`` is an instance of this node, else None."""
        env = match_state(self.model_state, m, dict(env or {}))
        if env is None:
            return None
        if self.guard is not None and not eval_param_expr(self.guard, env):
            return None
        kind = redex_kind(cfg)
        if self.redex == "rand" and kind != "rand":
            return None
        if self.redex == "value" and kind != "value":
            return None
        if self.redex == "pure" and kind in ("rand", "value"):
            return None
        if self.context is not None and not re.search(self.context, " ".join(context_labels(cfg))):
            return None
        return env

    def to_json(self) -> dict[str, Any]:
        pat: dict[str, Any] = {"redex": self.redex}
        if self.context is not None:
            pat["context"] = self.context
        out: dict[str, Any] = {"rule": self.rule, "model_state": self.model_state, "config_pattern": pat}
        if self.guard is not None:
            out["guard"] = self.guard
        if self.labels:
            out["labels"] = list(self.labels)
        out["relation"] = [e.to_json() for e in self.relation]
        return out


@dataclass
class Certificate:
    nodes: dict[str, Node]
    root_node: str
    root_model: Any
    params: tuple[str, ...] = ()
    samples: dict[str, tuple[Any, ...]] = field(default_factory=dict)
    explore_depth: int | None = None

    @classmethod
    def from_json(cls, doc: dict[str, Any] | str) -> Certificate:
        if isinstance(doc, str):
            doc = json.loads(doc)
        if not isinstance(doc, dict) or not isinstance(doc.get("nodes"), dict):
            raise CertificateError("certificate needs a 'nodes' object")
        nodes = {}
        for key, nd in doc["nodes"].items():
            if not isinstance(nd, dict):
                raise CertificateError(f"node {key!r} is not an object")
            rule = nd.get("rule")
            if rule not in RULES:
                raise CertificateError(f"node {key!r}: unknown rule {rule!r}")
            if "model_state" not in nd:
                raise CertificateError(f"node {key!r}: missing model_state")
            pat = nd.get("config_pattern", {}) or {}
            redex = pat.get("redex", "value" if rule == "RefVal" else "any")
            if redex not in REDEX_CLASSES:
                raise CertificateError(f"node {key!r}: unknown redex class {redex!r}")
            if pat.get("context") is not None:
                try:
                    re.compile(pat["context"])
                except re.error as exc:
                    raise CertificateError(f"node {key!r}: bad context regex: {exc}") from exc
            rel = []
            for e in nd.get("relation", []):
                if isinstance(e, list) and len(e) == 2:
                    e = {"model": e[0], "node": e[1]}
                if not isinstance(e, dict) or "node" not in e:
                    raise CertificateError(f"node {key!r}: malformed relation entry {e!r}")
                app = e.get("appended")
                rel.append(
                    RelEntry(
                        node=e["node"],
                        model=e.get("model"),
                        sample=e.get("sample"),
                        appended=None if app is None else tuple(app),
                    )
                )
            nodes[key] = Node(
                key=key,
                rule=rule,
                model_state=nd["model_state"],
                redex=redex,
                context=pat.get("context"),
                guard=nd.get("guard"),
                labels=tuple(nd.get("labels", ())),
                relation=tuple(rel),
            )
        root = doc.get("root")
        if isinstance(root, str):
            root = {"node": root}
        if not isinstance(root, dict) or root.get("node") not in nodes:
            raise CertificateError("root does not name a node")
        for nd in nodes.values():
            for e in nd.relation:
                if e.node not in nodes:
                    raise CertificateError(f"node {nd.key!r}: dangling successor {e.node!r}")
            if nd.rule == "RefTape" and not nd.labels:
                raise CertificateError(f"node {nd.key!r}: RefTape needs a label list")
        params = tuple(doc.get("params", ()))
        samples = {p: tuple(doc.get("samples", {}).get(p, DEFAULT_SAMPLES)) for p in params}
        root_model = root.get("model", nodes[root["node"]].model_state)
        return cls(nodes, root["node"], root_model, params, samples, doc.get("explore_depth"))

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "root": {"node": self.root_node, "model": self.root_model},
            "nodes": {k: n.to_json() for k, n in self.nodes.items()},
        }
        if self.params:
            out["params"] = list(self.params)
            out["samples"] = {p: list(v) for p, v in self.samples.items()}
        if self.explore_depth is not None:
            out["explore_depth"] = self.explore_depth
        return out

    def instances(self) -> list[dict[str, Any]]:
        names = list(self.params)
        return [dict(zip(names, vals)) for vals in itertools.product(*(self.samples[p] for p in names))]

    def in_samples(self, env: dict[str, Any]) -> bool:
        return all(v in self.samples[k] for k, v in env.items() if k in self.samples)


# Node checking --------------------------------------------------------------------------


@dataclass
class NodeVerdict:
    ok: bool
    reason: str = ""
    flow: FlowResult | None = None
    successors: list[tuple[str, Any, Config, dict[str, Any]]] = field(default_factory=list)


def _tape_fold(cfg: Config, labels: Iterable[int]) -> dict[Config, tuple[int, ...]]:
    """Successors of presampling ``labels`` in order, tagged with the appended values."""
    dist: dict[tuple[State, tuple[int, ...]], Fraction] = {(cfg.state, ()): Fraction(1)}
    for label in labels:
        nxt: dict[tuple[State, tuple[int, ...]], Fraction] = {}
        for (st, tag), w in dist.items():
            for st2, v in state_step(st, label).raw().items():
                k = st2.tapes[label].queue[-1]
                nxt[(st2, tag + (k,))] = nxt.get((st2, tag + (k,)), Fraction(0)) + w * v
        dist = nxt
    return {Config(cfg.expr, st): tag for (st, tag) in dist}


def _right_side(node: Node, cfg: Config) -> tuple[SubDist, dict[Config, Any]]:
    if node.rule == "RefModel":
        return ret(cfg), {}
    if node.rule == "RefTape":
        for label in node.labels:
            if not 0 <= label < len(cfg.state.tapes):
                raise CertificateError(f"node {node.key!r}: label {label} not allocated")
        tagged = _tape_fold(cfg, node.labels)
        mu = SubDist._trusted({c: Fraction(1, len(tagged)) for c in tagged}, Fraction(1))
        return mu, tagged
    return step_distr(cfg), rand_outcomes(cfg) or {}


def check_node(
    model: Model,
    node: Node,
    m: Any,
    cfg: Config,
    cert: Certificate,
    env: dict[str, Any] | None = None,
) -> NodeVerdict:
    """Discharge one node's obligation at the concrete pair ``(m, cfg)``."""
    env = node.matches(m, cfg, env)
    if env is None:
        return NodeVerdict(False, "pair does not match the node pattern")
    if node.rule == "RefVal":
        return NodeVerdict(True) if cfg.expr.is_value() else NodeVerdict(False, "program is not a value")
    if node.rule in ("RefProg", "RefModelProg") and step_distr(cfg).mass != 1:
        return NodeVerdict(False, "reducibility violation: program configuration is not reducible")
    if node.rule in ("RefModelProg", "RefModel", "RefTape") and not model.reducible(m):
        return NodeVerdict(False, "reducibility violation: model state is not reducible")

    left = ret(m) if node.rule == "RefProg" else model.step(m)
    try:
        right, tags = _right_side(node, cfg)
    except CertificateError as exc:
        return NodeVerdict(False, str(exc))

    pairs: dict[tuple[Any, Config], tuple[str, dict[str, Any]]] = {}
    for c2 in right.outcomes():
        tag = tags.get(c2)
        for entry in node.relation:
            if entry.sample is not None and tag != entry.sample:
                continue
            if entry.appended is not None and tag != entry.appended:
                continue
            target = cert.nodes[entry.node]
            want = m if entry.model is None else model_value(entry.model, env)
            for m2 in left.outcomes():
                if not same_state(m2, want) or (m2, c2) in pairs:
                    continue
                env2 = target.matches(m2, c2)
                if env2 is not None:
                    pairs[(m2, c2)] = (entry.node, env2)

    flow = max_flow_coupling(left, right, set(pairs))
    if not flow.feasible:
        return NodeVerdict(False, f"no coupling: deficit {fraction_str(flow.deficit)}", flow)
    w = flow.witness()
    assert w is not None and check_witness(left, right, set(pairs), w), "max-flow witness failed validation"
    succ = [(key, m2, c2, env2) for (m2, c2), (key, env2) in pairs.items()]
    return NodeVerdict(True, "", flow, succ)


# Whole-certificate exploration ------------------------------------------------------------


@dataclass
class Failure:
    node: str
    model_state: Any
    config: Config
    reason: str
    flow: FlowResult | None = None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "node": self.node,
            "model_state": state_to_json(self.model_state),
            "config": _short(pretty(self.config.expr)),
            "reason": self.reason,
        }
        if self.flow is not None and not self.flow.feasible:
            out["deficit"] = fraction_str(self.flow.deficit)
            out["unmatched"] = [
                {"state": state_to_json(a), "required": fraction_str(req), "available": fraction_str(av)}
                for a, req, av in self.flow.unmatched
            ]
            out["hall_set"] = [state_to_json(a) for a in self.flow.hall_set]
        return out


def _short(text: str, limit: int = 160) -> str:
    text = " ".join(text.split())
    return text if len(text) <= limit else text[: limit - 3] + "..."


@dataclass
class CertificateReport:
    verdict: str  # accept | reject | inconclusive
    explored: int = 0
    frontier: int = 0
    bounded: bool = False
    instances: list[dict[str, Any]] = field(default_factory=list)
    node_counts: dict[str, int] = field(default_factory=dict)
    node_rules: dict[str, str] = field(default_factory=dict)
    failures: list[Failure] = field(default_factory=list)
    unchecked: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"

    def to_json(self) -> dict[str, Any]:
        failed = {f.node for f in self.failures}
        return {
            "verdict": self.verdict,
            "explored": self.explored,
            "frontier": self.frontier,
            "unchecked": self.unchecked,
            "bounded": self.bounded,
            "instances": [{k: state_to_json(v) for k, v in i.items()} for i in self.instances],
            "nodes": {
                k: {
                    "rule": self.node_rules[k],
                    "checked": self.node_counts.get(k, 0),
                    "verdict": "reject" if k in failed else ("accept" if self.node_counts.get(k) else "unreached"),
                }
                for k in sorted(self.node_rules)
            },
            "failures": [f.to_json() for f in self.failures],
            "notes": self.notes,
        }


def _as_val(v: Any) -> Any:
    if isinstance(v, bool):
        return BoolV(v)
    if isinstance(v, int):
        return IntV(v)
    raise CertificateError(f"cannot pass parameter value {v!r} to the program")


def check_certificate(
    model: Model,
    program: Expr | str,
    cert: Certificate | dict[str, Any],
    budget: int = DEFAULT_BUDGET,
    init_state: State = EMPTY_STATE,
    stop_at_first: bool = True,
) -> CertificateReport:
    """Explore the certificate from its root for every parameter instance."""
    if not isinstance(cert, Certificate):
        cert = Certificate.from_json(cert)
    if isinstance(program, str):
        program = parse(program)
    report = CertificateReport("accept", node_rules={k: n.rule for k, n in cert.nodes.items()})
    report.instances = cert.instances()
    seen: set = set()
    queue: deque[tuple[str, Any, Config, int]] = deque()

    for inst in report.instances:
        fv = free_vars(program)
        missing = fv - set(inst)
        if missing:
            raise CertificateError(f"program has free variables not bound by the certificate: {sorted(missing)}")
        prog = substitute_all(program, {x: _as_val(inst[x]) for x in fv})
        m0 = model_value(cert.root_model, inst)
        queue.append((cert.root_node, m0, Config(prog, init_state), 0))

    while queue:
        key, m, cfg, depth = queue.popleft()
        memo = (key, m, config_key(cfg))
        if memo in seen:
            continue
        if report.explored >= budget:
            report.unchecked = len(queue) + 1
            report.verdict = "inconclusive" if not report.failures else "reject"
            report.notes.append(f"exploration budget of {budget} joint nodes exhausted")
            return report
        seen.add(memo)
        report.explored += 1
        node = cert.nodes[key]
        v = check_node(model, node, m, cfg, cert)
        report.node_counts[key] = report.node_counts.get(key, 0) + 1
        if not v.ok:
            report.failures.append(Failure(key, m, cfg, v.reason, v.flow))
            report.verdict = "reject"
            if stop_at_first:
                return report
            continue
        for key2, m2, c2, env2 in v.successors:
            if not cert.in_samples(env2):
                report.frontier += 1
            elif cert.explore_depth is not None and depth + 1 > cert.explore_depth:
                report.frontier += 1
                report.bounded = True
            else:
                queue.append((key2, m2, c2, depth + 1))

    if cert.params:
        report.notes.append(
            "pattern parameters checked on samples "
            + "; ".join(f"{p} in {list(cert.samples[p])}" for p in cert.params)
            + "; instances leaving the samples are frontier, uniformity in the parameter is not proved"
        )
    if report.bounded:
        report.notes.append(f"exploration cut at depth {cert.explore_depth}; deeper pairs are frontier")
    report.notes.append("guardedness is not checked; see the soundness cross-check")
    return report


# Soundness cross-check ---------------------------------------------------------------------


@dataclass
class CrosscheckReport:
    verdict: str  # accept | inconclusive
    n: int
    model_mass: Fraction
    witness_depth: int | None
    program_mass: Fraction
    model_curve: list[Fraction] = field(default_factory=list)
    program_curve: list[Fraction] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "n": self.n,
            "model_mass": fraction_str(self.model_mass),
            "witness_depth": self.witness_depth,
            "program_mass": fraction_str(self.program_mass),
        }


def soundness_crosscheck(
    model: Model,
    start: Any,
    program: Expr | str,
    n: int,
    depth_budget: int = 200,
    init_state: State = EMPTY_STATE,
    state_cap: int = DEFAULT_STATE_CAP,
) -> CrosscheckReport:
    """Search for ``m <= depth_budget`` with ``mass(exec_n(start)) <= mass(exec_m(program))``."""
    if isinstance(program, str):
        program = parse(program)
    model_curve = []
    for k, dist, _, _ in iter_exec(model, start, state_cap=state_cap):
        model_curve.append(dist.mass)
        if k >= n:
            break
    target = model_curve[-1]
    pm = as_markov(program, init_state)
    curve: list[Fraction] = []
    for k, dist, _, _ in iter_exec(pm, pm.start, state_cap=state_cap, key=config_key):
        curve.append(dist.mass)
        if dist.mass >= target:
            return CrosscheckReport("accept", n, target, k, dist.mass, model_curve, curve)
        if k >= depth_budget:
            break
    return CrosscheckReport("inconclusive", n, target, None, curve[-1], model_curve, curve)


# Mutation suite -----------------------------------------------------------------------------


def certificate_mutants(doc: dict[str, Any]) -> Iterable[tuple[str, dict[str, Any]]]:
    """Variants of a certificate document that each drop one relation entry or swap samples."""
    for key, nd in doc["nodes"].items():
        rel = nd.get("relation", [])
        for i in range(len(rel)):
            mutant = json.loads(json.dumps(doc))
            del mutant["nodes"][key]["relation"][i]
            yield f"drop {key}[{i}]", mutant
        samples = [e.get("sample") for e in rel if isinstance(e, dict)]
        if sorted(s for s in samples if s is not None) == [0, 1]:
            mutant = json.loads(json.dumps(doc))
            for e in mutant["nodes"][key]["relation"]:
                if e.get("sample") is not None:
                    e["sample"] = 1 - e["sample"]
            yield f"swap samples {key}", mutant


def perturbed_model(model: Model, state: Any, shift: Fraction) -> Model:
    """Move probability ``shift`` between the first two successors of ``state``."""

    def step(s: Any) -> SubDist:
        mu = model.step(s)
        if not same_state(s, state):
            return mu
        items = mu.items()
        if len(items) < 2:
            raise ValueError("perturbation needs at least two successors")
        table = dict(items)
        (a, pa), (b, pb) = items[0], items[1]
        table[a], table[b] = pa + shift, pb - shift
        return SubDist(table)

    return Model(step, model.is_final, name=f"{model.name}~", start=model.start, states=model.states)


def load_certificate(path: str) -> Certificate:
    with open(path, encoding="utf-8") as fh:
        return Certificate.from_json(json.load(fh))


__all__ = [
    "Certificate",
    "CertificateError",
    "CertificateReport",
    "CrosscheckReport",
    "Node",
    "NodeVerdict",
    "RULES",
    "RelEntry",
    "certificate_mutants",
    "check_certificate",
    "check_node",
    "eval_param_expr",
    "load_certificate",
    "perturbed_model",
    "soundness_crosscheck",
]
